// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end for the uplink simulator. Subcommands:
//   simulate          run a scenario and emit aggregated metrics
//   sweep-ld          served-LD-users capacity vs. granted rate
//   sweep-hd          HD rate vs. LD load
//   validate-theorem  large-M interference diagnostics over an antenna grid
//   codes             dump the codebook / per-user spreading codes
//   baselines         LoRa and narrow-band reference capacities

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "moma/moma.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string out = "-";
  std::string format = "csv";
  std::string profile;
  std::string detector;
  std::string combiner;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int trials = 0;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
  auto* opt = cmd->add_option("--config", args.config, "scenario config (JSON)");
  if (config_required) opt->required();
  cmd->add_option("--out", args.out, "output path ('-' for stdout)");
  cmd->add_option("--format", args.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--profile", args.profile, "channel profile override (EPA|EVA|FLAT|IID)");
  cmd->add_option("--detector", args.detector, "detector override (auto|su|sic)")
      ->check(CLI::IsMember({"auto", "su", "sic"}));
  cmd->add_option("--combiner", args.combiner, "combiner override (mrc|mmse)")
      ->check(CLI::IsMember({"mrc", "mmse"}));
  cmd->add_option("--seed", args.seed, "base seed override")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--trials", args.trials, "trial count override");
  cmd->add_option("--threads", args.threads, "worker threads");
}

moma::Scenario load_scenario(const CommonArgs& args) {
  std::ifstream is(args.config);
  if (!is) throw std::runtime_error("cannot open config '" + args.config + "'");
  nlohmann::json j;
  is >> j;
  moma::Scenario sc = moma::scenario_from_json(j);
  if (!args.profile.empty()) sc.channel = moma::TapDelayProfile::by_name(args.profile);
  if (args.seed_set) sc.run.seed = args.seed;
  if (args.trials > 0) sc.run.trials = args.trials;
  if (args.threads > 0) sc.run.threads = args.threads;
  if (!args.detector.empty()) sc.run.detector = moma::detail::detector_from(args.detector);
  if (!args.combiner.empty()) sc.run.combiner = moma::detail::combiner_from(args.combiner);
  return sc;
}

moma::EmitMeta make_meta(const moma::Scenario& sc) {
  moma::EmitMeta meta;
  meta.scenario_hash = moma::scenario_hash(sc);
  meta.seed = sc.run.seed;
  meta.trials = sc.run.trials;
  return meta;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

std::vector<double> default_rate_grid() {
  return {0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MOMA uplink link-level simulator"};
  app.require_subcommand(1);

  CommonArgs sim_args, sweep_ld_args, sweep_hd_args, theorem_args, codes_args, base_args;
  std::string rates_flag, ld_users_flag, m_grid_flag;

  CLI::App* sim = app.add_subcommand("simulate", "run a scenario, emit aggregates");
  add_common(sim, sim_args);

  CLI::App* sweep_ld = app.add_subcommand("sweep-ld", "LD capacity vs. granted rate");
  add_common(sweep_ld, sweep_ld_args);
  sweep_ld->add_option("--rates", rates_flag, "comma-separated rate grid, bit/s/Hz");

  CLI::App* sweep_hd = app.add_subcommand("sweep-hd", "HD rate vs. LD load");
  add_common(sweep_hd, sweep_hd_args);
  sweep_hd->add_option("--ld-users", ld_users_flag, "comma-separated LD user counts");

  CLI::App* theorem = app.add_subcommand("validate-theorem", "interference diagnostics vs. M");
  add_common(theorem, theorem_args);
  theorem->add_option("--m-grid", m_grid_flag, "comma-separated antenna counts");

  CLI::App* codes = app.add_subcommand("codes", "dump codebook and user codes");
  add_common(codes, codes_args);

  CLI::App* baselines = app.add_subcommand("baselines", "reference capacities");
  add_common(baselines, base_args);
  baselines->add_option("--rates", rates_flag, "comma-separated rate grid, bit/s/Hz");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      moma::Scenario sc = load_scenario(sim_args);
      const moma::MonteCarloSummary mc = moma::run_monte_carlo(sc);
      moma::emit(mc, sim_args.out, sim_args.format, make_meta(sc));
    } else if (sweep_ld->parsed()) {
      moma::Scenario sc = load_scenario(sweep_ld_args);
      std::vector<double> rates = !rates_flag.empty() ? parse_double_list(rates_flag)
                                  : !sc.sweep.rates.empty() ? sc.sweep.rates
                                                            : default_rate_grid();
      const moma::SweepTable table = moma::sweep_ld_capacity(sc, rates);
      moma::emit(table, sweep_ld_args.out, sweep_ld_args.format, make_meta(sc));
    } else if (sweep_hd->parsed()) {
      moma::Scenario sc = load_scenario(sweep_hd_args);
      std::vector<int> grid = !ld_users_flag.empty() ? parse_int_list(ld_users_flag)
                              : !sc.sweep.ld_users.empty() ? sc.sweep.ld_users
                                                           : std::vector<int>{0, 40, 80, 160, 320};
      const moma::SweepTable table = moma::sweep_hd_rate(sc, grid);
      moma::emit(table, sweep_hd_args.out, sweep_hd_args.format, make_meta(sc));
    } else if (theorem->parsed()) {
      moma::Scenario sc = load_scenario(theorem_args);
      std::vector<int> grid =
          !m_grid_flag.empty() ? parse_int_list(m_grid_flag) : std::vector<int>{8, 32, 128};
      const moma::SweepTable table = moma::theorem_sweep(sc, grid);
      moma::emit(table, theorem_args.out, theorem_args.format, make_meta(sc));
    } else if (codes->parsed()) {
      moma::Scenario sc = load_scenario(codes_args);
      moma::Rng rng_pop(moma::derive_seed(sc.run.seed, 0, moma::Stream::placement));
      moma::UserPopulation pop = moma::build_population(
          sc.plan, sc.placement.min_m, sc.placement.max_m, sc.system, rng_pop, sc.hata);
      const moma::OrthogonalCodebook book = moma::generate_hadamard(sc.system.spreading_length);
      const moma::ClassCodePartition part = moma::partition_codebook(book, sc.plan);
      moma::Rng rng_w(moma::derive_seed(sc.run.seed, 0, moma::Stream::combining));
      std::vector<moma::CombiningMatrix> ws;
      for (const moma::ClassSpec* ld : sc.plan.ld_levels()) {
        if (ld->user_count == 0)
          ws.push_back({Eigen::MatrixXd(ld->code_count, 0)});
        else
          ws.push_back(moma::sample_combining_matrix(ld->code_count, ld->user_count, rng_w));
      }
      const moma::SpreadingAssignment asg = moma::assign_codes(part, ws, pop);
      moma::SweepTable table;
      table.x_name = "user";
      table.columns = {"kind_hd", "level", "code_index"};
      for (int n = 0; n < sc.system.spreading_length; ++n)
        table.columns.push_back("c" + std::to_string(n));
      for (const moma::User& u : pop.users) {
        std::vector<double> row = {u.kind == moma::UserClass::hd ? 1.0 : 0.0,
                                   static_cast<double>(u.level),
                                   static_cast<double>(u.code_index)};
        for (int n = 0; n < sc.system.spreading_length; ++n)
          row.push_back(asg.codes(n, u.id));
        table.x.push_back(static_cast<double>(u.id));
        table.cells.push_back(std::move(row));
      }
      moma::emit(table, codes_args.out, codes_args.format, make_meta(sc));
    } else if (baselines->parsed()) {
      moma::Scenario sc = load_scenario(base_args);
      std::vector<double> rates = !rates_flag.empty() ? parse_double_list(rates_flag)
                                  : !sc.sweep.rates.empty() ? sc.sweep.rates
                                                            : default_rate_grid();
      const int sg = sc.sweep.spatial_gain > 0 ? sc.sweep.spatial_gain
                                               : moma::detail::derived_spatial_gain(sc.plan);
      const double g_min =
          moma::pathloss_gain(sc.placement.max_m, sc.system.carrier_freq_hz, sc.hata);
      const double p_ld = moma::detail::first_ld_class(sc.plan).tx_power_watt();
      const double per_sc_snr =
          std::isnan(sc.sweep.per_sc_snr_db)
              ? sc.system.num_antennas * g_min * p_ld / sc.system.noise_variance()
              : moma::db_to_linear(sc.sweep.per_sc_snr_db);
      moma::SweepTable table;
      table.x_name = "rate_bps_hz";
      table.columns = {"lora_users", "narrowband_users"};
      for (double r : rates) {
        table.x.push_back(r);
        table.cells.push_back(
            {static_cast<double>(moma::baseline_lora(sg)),
             static_cast<double>(
                 moma::baseline_narrowband(r, sc.sweep.reserved_scs, sg, per_sc_snr))});
      }
      moma::emit(table, base_args.out, base_args.format, make_meta(sc));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
