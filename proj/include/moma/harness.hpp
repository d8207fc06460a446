// SPDX-License-Identifier: Apache-2.0
//
// Experiment harness: scenario ingestion (JSON), deterministic trial
// execution, Monte Carlo aggregation, the LD-capacity and HD-rate sweeps,
// and the large-M diagnostics campaign. A trial is a pure function of
// (scenario, trial index); parallel and serial execution produce identical
// results because every random stream is derived statelessly and the
// reduction runs in trial order.

#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "moma/channel.hpp"
#include "moma/codes.hpp"
#include "moma/metrics.hpp"
#include "moma/phy.hpp"
#include "moma/scenario.hpp"
#include "moma/version.hpp"

namespace moma {

enum class SymbolKind { qpsk, gaussian };

struct PlacementSpec {
  double min_m = 25.0;
  double max_m = 100.0;
  bool unit_gain_power = false;  // force g_k = 1, P_k = 1 W (validation runs)
};

struct RunSpec {
  int trials = 100;
  std::uint64_t seed = 1;
  Combiner combiner = Combiner::mrc;
  DetectorPolicy detector = DetectorPolicy::automatic;
  double detector_threshold = 0.5;
  SymbolKind symbols = SymbolKind::qpsk;
  int threads = 1;
  bool diagnostics = false;
  bool diagnostics_only = false;
  bool positions_only = false;  // redraw user positions per trial, keep codes/channel/noise fixed
};

struct SweepSpec {
  std::string kind;            // "", "ld-capacity" or "hd-rate"
  std::vector<double> rates;   // ld-capacity grid, bit/s/Hz
  std::vector<int> ld_users;   // hd-rate grid
  bool include_sic = false;
  int spatial_gain = 0;        // 0: derive as ceil(K_HD / N_HD)
  int reserved_scs = 72;
  double per_sc_snr_db = std::numeric_limits<double>::quiet_NaN();  // NaN: derive
  bool verify_by_simulation = false;
};

struct Scenario {
  SystemConfig system;
  ClassPlan plan;
  TapDelayProfile channel = TapDelayProfile::epa();
  PlacementSpec placement;
  RunSpec run;
  SweepSpec sweep;
  HataParams hata;
};

// ---------------------------------------------------------------------------
// Scenario JSON (unknown keys rejected at every level)

namespace detail {

inline void expect_keys(const nlohmann::json& obj,
                        std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok)
      throw std::invalid_argument("scenario config: unknown key '" + it.key() + "' in " + where);
  }
}

inline std::string combiner_name(Combiner c) { return c == Combiner::mrc ? "mrc" : "mmse"; }
inline Combiner combiner_from(const std::string& s) {
  if (s == "mrc") return Combiner::mrc;
  if (s == "mmse") return Combiner::mmse_spatial;
  throw std::invalid_argument("scenario config: combiner must be 'mrc' or 'mmse'");
}
inline std::string detector_name(DetectorPolicy p) {
  switch (p) {
    case DetectorPolicy::force_su: return "su";
    case DetectorPolicy::force_sic: return "sic";
    default: return "auto";
  }
}
inline DetectorPolicy detector_from(const std::string& s) {
  if (s == "auto") return DetectorPolicy::automatic;
  if (s == "su") return DetectorPolicy::force_su;
  if (s == "sic") return DetectorPolicy::force_sic;
  throw std::invalid_argument("scenario config: detector must be 'auto', 'su' or 'sic'");
}
inline std::string symbols_name(SymbolKind s) {
  return s == SymbolKind::qpsk ? "qpsk" : "gaussian";
}
inline SymbolKind symbols_from(const std::string& s) {
  if (s == "qpsk") return SymbolKind::qpsk;
  if (s == "gaussian") return SymbolKind::gaussian;
  throw std::invalid_argument("scenario config: symbols must be 'qpsk' or 'gaussian'");
}

}  // namespace detail

inline Scenario scenario_from_json(const nlohmann::json& j) {
  using nlohmann::json;
  detail::expect_keys(j, {"system", "classes", "channel", "placement", "run", "sweep"},
                      "scenario");
  Scenario sc;

  if (j.contains("system")) {
    const json& s = j.at("system");
    detail::expect_keys(s,
                        {"n_fft", "n_used", "spreading_length", "subcarrier_spacing_hz",
                         "num_antennas", "noise_psd_dbm_hz", "carrier_freq_hz"},
                        "system");
    sc.system.n_fft = s.value("n_fft", sc.system.n_fft);
    sc.system.n_used = s.value("n_used", sc.system.n_used);
    sc.system.spreading_length = s.value("spreading_length", sc.system.spreading_length);
    sc.system.subcarrier_spacing_hz =
        s.value("subcarrier_spacing_hz", sc.system.subcarrier_spacing_hz);
    sc.system.num_antennas = s.value("num_antennas", sc.system.num_antennas);
    sc.system.noise_psd_dbm_hz = s.value("noise_psd_dbm_hz", sc.system.noise_psd_dbm_hz);
    sc.system.carrier_freq_hz = s.value("carrier_freq_hz", sc.system.carrier_freq_hz);
  }

  if (!j.contains("classes") || !j.at("classes").is_array() || j.at("classes").empty())
    throw std::invalid_argument("scenario config: 'classes' array is required");
  for (const json& c : j.at("classes")) {
    detail::expect_keys(c, {"kind", "level", "codes", "users", "tx_power_dbm",
                            "target_rate_bps_hz"},
                        "classes[]");
    ClassSpec spec;
    const std::string kind = c.value("kind", std::string("LD"));
    if (kind == "HD")
      spec.kind = UserClass::hd;
    else if (kind == "LD")
      spec.kind = UserClass::ld;
    else
      throw std::invalid_argument("scenario config: class kind must be 'HD' or 'LD'");
    spec.level = c.value("level", spec.kind == UserClass::hd ? 0 : 1);
    spec.code_count = c.value("codes", 0);
    spec.user_count = c.value("users", 0);
    spec.tx_power_dbm = c.value("tx_power_dbm", 23.0);
    spec.target_rate_bps_hz = c.value("target_rate_bps_hz", 0.0);
    sc.plan.classes.push_back(spec);
  }

  if (j.contains("channel")) {
    const json& c = j.at("channel");
    detail::expect_keys(c, {"profile", "name", "taps"}, "channel");
    const std::string profile = c.value("profile", std::string("EPA"));
    if (profile == "CUSTOM") {
      TapDelayProfile custom;
      custom.name = c.value("name", std::string("CUSTOM"));
      if (!c.contains("taps") || !c.at("taps").is_array())
        throw std::invalid_argument("scenario config: custom channel requires a 'taps' array");
      for (const json& t : c.at("taps")) {
        detail::expect_keys(t, {"delay_ns", "power_db"}, "channel.taps[]");
        custom.taps.push_back({t.value("delay_ns", 0.0) * 1e-9, t.value("power_db", 0.0)});
      }
      custom.validate();
      sc.channel = custom;
    } else {
      sc.channel = TapDelayProfile::by_name(profile);
    }
  }

  if (j.contains("placement")) {
    const json& p = j.at("placement");
    detail::expect_keys(p, {"min_m", "max_m", "unit_gain_power"}, "placement");
    sc.placement.min_m = p.value("min_m", sc.placement.min_m);
    sc.placement.max_m = p.value("max_m", sc.placement.max_m);
    sc.placement.unit_gain_power = p.value("unit_gain_power", false);
  }

  if (j.contains("run")) {
    const json& r = j.at("run");
    detail::expect_keys(r,
                        {"trials", "seed", "combiner", "detector", "detector_threshold",
                         "symbols", "threads", "diagnostics", "diagnostics_only",
                         "positions_only"},
                        "run");
    sc.run.trials = r.value("trials", sc.run.trials);
    sc.run.seed = r.value("seed", sc.run.seed);
    sc.run.combiner = detail::combiner_from(r.value("combiner", std::string("mrc")));
    sc.run.detector = detail::detector_from(r.value("detector", std::string("auto")));
    sc.run.detector_threshold = r.value("detector_threshold", sc.run.detector_threshold);
    sc.run.symbols = detail::symbols_from(r.value("symbols", std::string("qpsk")));
    sc.run.threads = r.value("threads", sc.run.threads);
    sc.run.diagnostics = r.value("diagnostics", false);
    sc.run.diagnostics_only = r.value("diagnostics_only", false);
    sc.run.positions_only = r.value("positions_only", false);
  }

  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    detail::expect_keys(s,
                        {"kind", "rates", "ld_users", "include_sic", "spatial_gain",
                         "reserved_scs", "per_sc_snr_db", "verify_by_simulation"},
                        "sweep");
    sc.sweep.kind = s.value("kind", std::string());
    if (s.contains("rates")) sc.sweep.rates = s.at("rates").get<std::vector<double>>();
    if (s.contains("ld_users")) sc.sweep.ld_users = s.at("ld_users").get<std::vector<int>>();
    sc.sweep.include_sic = s.value("include_sic", false);
    sc.sweep.spatial_gain = s.value("spatial_gain", 0);
    sc.sweep.reserved_scs = s.value("reserved_scs", 72);
    if (s.contains("per_sc_snr_db")) sc.sweep.per_sc_snr_db = s.at("per_sc_snr_db").get<double>();
    sc.sweep.verify_by_simulation = s.value("verify_by_simulation", false);
  }

  sc.system.validate();
  sc.plan.validate(sc.system.spreading_length);
  return sc;
}

inline nlohmann::json scenario_to_json(const Scenario& sc) {
  using nlohmann::json;
  json j;
  j["system"] = {{"n_fft", sc.system.n_fft},
                 {"n_used", sc.system.n_used},
                 {"spreading_length", sc.system.spreading_length},
                 {"subcarrier_spacing_hz", sc.system.subcarrier_spacing_hz},
                 {"num_antennas", sc.system.num_antennas},
                 {"noise_psd_dbm_hz", sc.system.noise_psd_dbm_hz},
                 {"carrier_freq_hz", sc.system.carrier_freq_hz}};
  j["classes"] = json::array();
  for (const ClassSpec& c : sc.plan.classes) {
    json e = {{"kind", c.kind == UserClass::hd ? "HD" : "LD"},
              {"level", c.level},
              {"codes", c.code_count},
              {"users", c.user_count},
              {"tx_power_dbm", c.tx_power_dbm}};
    if (c.kind == UserClass::ld) e["target_rate_bps_hz"] = c.target_rate_bps_hz;
    j["classes"].push_back(e);
  }
  const std::string& pname = sc.channel.name;
  if (pname == "EPA" || pname == "EVA" || pname == "FLAT" || pname == "IID") {
    j["channel"] = {{"profile", pname}};
  } else {
    json taps = json::array();
    for (const Tap& t : sc.channel.taps)
      taps.push_back({{"delay_ns", t.delay_s * 1e9}, {"power_db", t.power_db}});
    j["channel"] = {{"profile", "CUSTOM"}, {"name", pname}, {"taps", taps}};
  }
  j["placement"] = {{"min_m", sc.placement.min_m},
                    {"max_m", sc.placement.max_m},
                    {"unit_gain_power", sc.placement.unit_gain_power}};
  j["run"] = {{"trials", sc.run.trials},
              {"seed", sc.run.seed},
              {"combiner", detail::combiner_name(sc.run.combiner)},
              {"detector", detail::detector_name(sc.run.detector)},
              {"detector_threshold", sc.run.detector_threshold},
              {"symbols", detail::symbols_name(sc.run.symbols)},
              {"threads", sc.run.threads},
              {"diagnostics", sc.run.diagnostics},
              {"diagnostics_only", sc.run.diagnostics_only},
              {"positions_only", sc.run.positions_only}};
  if (!sc.sweep.kind.empty()) {
    json s = {{"kind", sc.sweep.kind},
              {"include_sic", sc.sweep.include_sic},
              {"spatial_gain", sc.sweep.spatial_gain},
              {"reserved_scs", sc.sweep.reserved_scs},
              {"verify_by_simulation", sc.sweep.verify_by_simulation}};
    if (!sc.sweep.rates.empty()) s["rates"] = sc.sweep.rates;
    if (!sc.sweep.ld_users.empty()) s["ld_users"] = sc.sweep.ld_users;
    if (!std::isnan(sc.sweep.per_sc_snr_db)) s["per_sc_snr_db"] = sc.sweep.per_sc_snr_db;
    j["sweep"] = s;
  }
  return j;
}

// FNV-1a over the canonical serialized scenario.
inline std::string scenario_hash(const Scenario& sc) {
  const std::string dump = scenario_to_json(sc).dump();
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Trial execution

struct UserReport {
  int user = 0;
  UserClass kind = UserClass::ld;
  int level = 0;
  double gain = 0.0;
  double distance_m = 0.0;
  DetectorKind detector = DetectorKind::single_user;
  cd decision{};
  SinrComponents sinr;
  double rate_bps_hz = 0.0;
  double bound_rate_bps_hz = 0.0;  // HD users under SU detection
};

struct TrialResult {
  std::uint64_t trial_index = 0;
  std::vector<UserReport> reports;
  std::vector<int> sic_order;
  TheoremDiagnostics diagnostics;

  std::map<std::string, double> scalars() const {
    std::map<std::string, double> out;
    double hd_sum = 0, hd_bound_sum = 0, hd_sinr_sum = 0;
    double ld_sum = 0, ld_sinr_sum = 0;
    double ld_min = std::numeric_limits<double>::infinity();
    int n_hd = 0, n_ld = 0;
    bool have_bound = false;
    for (const UserReport& r : reports) {
      if (r.kind == UserClass::hd) {
        ++n_hd;
        hd_sum += r.rate_bps_hz;
        hd_sinr_sum += r.sinr.sinr();
        if (r.bound_rate_bps_hz > 0.0) {
          hd_bound_sum += r.bound_rate_bps_hz;
          have_bound = true;
        }
      } else {
        ++n_ld;
        ld_sum += r.rate_bps_hz;
        ld_sinr_sum += r.sinr.sinr();
        ld_min = std::min(ld_min, r.rate_bps_hz);
      }
    }
    if (n_hd > 0) {
      out["hd_rate_mean"] = hd_sum / n_hd;
      out["hd_sum_rate"] = hd_sum;
      out["hd_sinr_mean"] = hd_sinr_sum / n_hd;
      if (have_bound) {
        out["hd_bound_rate_mean"] = hd_bound_sum / n_hd;
        out["hd_rate_over_bound"] = hd_sum / hd_bound_sum;
      }
    }
    if (n_ld > 0) {
      out["ld_rate_mean"] = ld_sum / n_ld;
      out["ld_sum_rate"] = ld_sum;
      out["ld_rate_min"] = ld_min;
      out["ld_sinr_mean"] = ld_sinr_sum / n_ld;
    }
    if (!diagnostics.users.empty()) {
      double hd_i = 0, ld_i = 0, ld_c = 0, self = 0;
      int nh = 0, nl = 0;
      for (std::size_t i = 0; i < diagnostics.users.size(); ++i) {
        const double interf = diagnostics.interference[i];
        if (diagnostics.centering[i] > 0.0) {
          ld_i += interf;
          ld_c += interf - diagnostics.centering[i];
          ++nl;
        } else {
          hd_i += interf;
          ++nh;
        }
        self += diagnostics.self_gain[i].real();
      }
      if (nh > 0) out["diag_hd_interference_mean"] = hd_i / nh;
      if (nl > 0) {
        out["diag_ld_interference_mean"] = ld_i / nl;
        out["diag_ld_centering_error"] = ld_c / nl;
      }
      out["diag_self_gain_mean"] = self / static_cast<double>(diagnostics.users.size());
    }
    return out;
  }
};

namespace detail {

inline TrialResult run_trial_impl(const Scenario& sc, std::uint64_t trial_index) {
  sc.system.validate();
  TrialResult result;
  result.trial_index = trial_index;

  // In positions-only mode every stream except user placement reuses the
  // trial-0 substream, so positions are the only quantity redrawn.
  const std::uint64_t fixed = sc.run.positions_only ? 0 : trial_index;

  Rng rng_place(derive_seed(sc.run.seed, trial_index, Stream::placement));
  UserPopulation pop = build_population(sc.plan, sc.placement.min_m, sc.placement.max_m,
                                        sc.system, rng_place, sc.hata);
  if (sc.placement.unit_gain_power) {
    for (User& u : pop.users) {
      u.large_scale_gain = 1.0;
      u.tx_power_watt = 1.0;
    }
    pop.recompute_mean_ld_gain();
  }

  const OrthogonalCodebook book = generate_hadamard(sc.system.spreading_length);
  const ClassCodePartition part = partition_codebook(book, sc.plan);
  Rng rng_comb(derive_seed(sc.run.seed, fixed, Stream::combining));
  std::vector<CombiningMatrix> combiners;
  for (const ClassSpec* ld : sc.plan.ld_levels()) {
    if (ld->user_count == 0)
      combiners.push_back({Eigen::MatrixXd(ld->code_count, 0)});
    else
      combiners.push_back(sample_combining_matrix(ld->code_count, ld->user_count, rng_comb));
  }
  const SpreadingAssignment assignment = assign_codes(part, combiners, pop);

  Rng rng_ch(derive_seed(sc.run.seed, fixed, Stream::channel));
  const ChannelRealization ch =
      sample_small_scale_channel(sc.channel, sc.system, pop.size(), rng_ch);

  if (sc.run.diagnostics || sc.run.diagnostics_only) {
    std::vector<int> targets(pop.size());
    for (int i = 0; i < pop.size(); ++i) targets[i] = i;
    result.diagnostics = theorem_diagnostics(assignment, ch, pop, targets);
  }
  if (sc.run.diagnostics_only) return result;

  Rng rng_sym(derive_seed(sc.run.seed, fixed, Stream::symbols));
  Eigen::VectorXcd symbols(pop.size());
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  for (int k = 0; k < pop.size(); ++k)
    symbols(k) = sc.run.symbols == SymbolKind::qpsk
                     ? cd{rng_sym.sign() * inv_sqrt2, rng_sym.sign() * inv_sqrt2}
                     : rng_sym.complex_gaussian(1.0);

  const TransmitGrid tx = spread(assignment, pop, symbols, sc.system);
  Rng rng_noise(derive_seed(sc.run.seed, fixed, Stream::noise));
  const double noise_var = sc.system.noise_variance();
  const ReceivedGrid rx = superpose(tx, ch, pop, noise_var, rng_noise);

  const std::vector<int> hd_ids = pop.hd_user_ids();
  const std::vector<int> ld_ids = pop.ld_user_ids();
  const DetectorKind hd_kind =
      select_hd_detector(static_cast<int>(hd_ids.size()), sc.system.num_antennas,
                         sc.plan.hd().code_count, sc.run.detector_threshold, sc.run.detector);

  result.reports.reserve(pop.size());
  auto base_report = [&](int id, DetectorKind det) {
    UserReport r;
    const User& u = pop.users[id];
    r.user = id;
    r.kind = u.kind;
    r.level = u.level;
    r.gain = u.large_scale_gain;
    r.distance_m = u.distance_m;
    r.detector = det;
    return r;
  };

  if (!hd_ids.empty() && hd_kind == DetectorKind::mmse_sic) {
    const SicResult sic = detect_hd_mmse_sic(rx, ch, assignment, pop, symbols, sc.run.combiner);
    const std::vector<SinrComponents> sinrs = sinr_hd_sic(sic, pop, noise_var);
    result.sic_order = sic.order;
    for (std::size_t i = 0; i < sic.stages.size(); ++i) {
      UserReport r = base_report(sic.stages[i].user, DetectorKind::mmse_sic);
      r.decision = sic.stages[i].decision;
      r.sinr = sinrs[i];
      r.rate_bps_hz = rate(r.sinr.sinr());
      result.reports.push_back(r);
    }
  } else {
    for (int id : hd_ids) {
      const CombinedSamples comb = combine(rx, ch, pop, id, sc.run.combiner);
      const EffectiveCodeSet eff = effective_codes(ch, comb, assignment, rx);
      UserReport r = base_report(id, DetectorKind::single_user);
      r.decision = detect_hd_su(comb, assignment, pop, id);
      r.sinr = sinr_hd_su(assignment, pop, eff, comb, noise_var);
      r.rate_bps_hz = rate(r.sinr.sinr());
      r.bound_rate_bps_hz = perfect_orthogonality_bound(assignment, pop, eff, comb, noise_var);
      result.reports.push_back(r);
    }
  }
  for (int id : ld_ids) {
    const CombinedSamples comb = combine(rx, ch, pop, id, sc.run.combiner);
    const EffectiveCodeSet eff = effective_codes(ch, comb, assignment, rx);
    UserReport r = base_report(id, DetectorKind::single_user);
    r.decision = detect_ld(comb, assignment, pop, id);
    r.sinr = sinr_ld(assignment, pop, eff, comb, noise_var);
    r.rate_bps_hz = rate(r.sinr.sinr());
    result.reports.push_back(r);
  }

  if (result.reports.size() != static_cast<std::size_t>(pop.size()))
    throw std::logic_error("run_trial: report count does not match the population");
  for (const UserReport& r : result.reports)
    if (!std::isfinite(r.rate_bps_hz) || !std::isfinite(r.sinr.sinr()))
      throw std::runtime_error("run_trial: non-finite metric");
  return result;
}

}  // namespace detail

// One deterministic pass through population -> codes -> channel -> detection.
// Module errors are re-raised with the trial context attached.
inline TrialResult run_trial(const Scenario& sc, std::uint64_t trial_index) {
  try {
    return detail::run_trial_impl(sc, trial_index);
  } catch (const std::exception& e) {
    throw std::runtime_error("trial " + std::to_string(trial_index) + " (seed " +
                             std::to_string(sc.run.seed) + ", profile " + sc.channel.name +
                             "): " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Monte Carlo

namespace detail {

// Runs f(0..trials-1), possibly on several threads; results keep trial order.
template <typename T, typename F>
std::vector<T> map_trials(int trials, int threads, F&& f) {
  std::vector<T> results(trials);
  threads = std::max(1, std::min(threads, trials));
  if (threads == 1) {
    for (int i = 0; i < trials; ++i) results[i] = f(i);
    return results;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int i = next.fetch_add(1); i < trials; i = next.fetch_add(1)) results[i] = f(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace detail

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;
  double ci95_half = 0.0;
  int n = 0;
};

inline Aggregate aggregate(const std::vector<double>& xs) {
  Aggregate a;
  a.n = static_cast<int>(xs.size());
  if (a.n == 0) return a;
  double sum = 0.0;
  for (double x : xs) sum += x;
  a.mean = sum / a.n;
  if (a.n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - a.mean) * (x - a.mean);
    a.stddev = std::sqrt(ss / (a.n - 1));
    a.ci95_half = 1.96 * a.stddev / std::sqrt(static_cast<double>(a.n));
  }
  return a;
}

struct MonteCarloSummary {
  std::map<std::string, Aggregate> metrics;
  std::map<std::string, std::vector<double>> samples;  // per-trial values
  std::uint64_t seed = 0;
  int trials = 0;
};

inline MonteCarloSummary run_monte_carlo(const Scenario& sc) {
  if (sc.run.trials < 1) throw std::invalid_argument("run_monte_carlo: trials must be >= 1");
  const auto rows = detail::map_trials<std::map<std::string, double>>(
      sc.run.trials, sc.run.threads,
      [&](int i) { return run_trial(sc, static_cast<std::uint64_t>(i)).scalars(); });

  MonteCarloSummary out;
  out.seed = sc.run.seed;
  out.trials = sc.run.trials;
  for (const auto& [key, value] : rows[0]) {
    std::vector<double> xs;
    xs.reserve(rows.size());
    for (const auto& row : rows) {
      const auto it = row.find(key);
      if (it == row.end())
        throw std::logic_error("run_monte_carlo: inconsistent metric keys across trials");
      xs.push_back(it->second);
    }
    out.metrics[key] = aggregate(xs);
    out.samples[key] = std::move(xs);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepTable {
  std::string x_name;
  std::vector<std::string> columns;
  std::vector<double> x;
  std::vector<std::vector<double>> cells;  // rows x columns
};

namespace detail {

// E[g] over distances uniform on [lo, hi], midpoint quadrature.
inline double mean_gain_uniform(double lo, double hi, double carrier_hz, const HataParams& hata) {
  const int steps = 20000;
  double acc = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double d = lo + (hi - lo) * (i + 0.5) / steps;
    acc += pathloss_gain(d, carrier_hz, hata);
  }
  return acc / steps;
}

inline int derived_spatial_gain(const ClassPlan& plan) {
  const ClassSpec& hd = plan.hd();
  if (hd.code_count < 1 || hd.user_count < 1) return 1;
  return (hd.user_count + hd.code_count - 1) / hd.code_count;
}

inline const ClassSpec& first_ld_class(const ClassPlan& plan) {
  for (const ClassSpec& c : plan.classes)
    if (c.kind == UserClass::ld && c.level == 1) return c;
  throw std::invalid_argument("sweep: scenario has no level-1 LD class");
}

inline Scenario with_ld_users(const Scenario& base, int users) {
  Scenario sc = base;
  for (ClassSpec& c : sc.plan.classes)
    if (c.kind == UserClass::ld && c.level == 1) {
      c.user_count = users;
      return sc;
    }
  throw std::invalid_argument("sweep: scenario has no level-1 LD class");
}

}  // namespace detail

// Served-LD-users capacity versus the granted rate, next to the LoRa and
// narrow-band reference capacities. Closed-form path; per-OFDM-symbol totals
// multiply by the instance count.
inline SweepTable sweep_ld_capacity(const Scenario& sc, const std::vector<double>& rates) {
  if (rates.empty()) throw std::invalid_argument("sweep_ld_capacity: empty rate grid");
  for (std::size_t i = 1; i < rates.size(); ++i)
    if (!(rates[i] > rates[i - 1]))
      throw std::invalid_argument("sweep_ld_capacity: rate grid must be increasing");

  const ClassSpec& ld = detail::first_ld_class(sc.plan);
  const double p_ld = sc.placement.unit_gain_power ? 1.0 : ld.tx_power_watt();
  const double g_min = sc.placement.unit_gain_power
                           ? 1.0
                           : pathloss_gain(sc.placement.max_m, sc.system.carrier_freq_hz, sc.hata);
  const double g_mean =
      sc.placement.unit_gain_power
          ? 1.0
          : detail::mean_gain_uniform(sc.placement.min_m, sc.placement.max_m,
                                      sc.system.carrier_freq_hz, sc.hata);
  const int m = sc.system.num_antennas;
  const int instances = sc.system.num_instances();
  const int sg = sc.sweep.spatial_gain > 0 ? sc.sweep.spatial_gain
                                           : detail::derived_spatial_gain(sc.plan);
  const double noise = sc.system.noise_variance();
  const double per_sc_snr = std::isnan(sc.sweep.per_sc_snr_db)
                                ? m * g_min * p_ld / noise
                                : db_to_linear(sc.sweep.per_sc_snr_db);
  const double instance_bw_hz = sc.system.spreading_length * sc.system.subcarrier_spacing_hz;

  SweepTable table;
  table.x_name = "rate_bps_hz";
  table.columns = {"rate_kbps", "moma_users", "lora_users", "narrowband_users"};
  const bool verify = sc.sweep.verify_by_simulation;
  if (verify) table.columns.push_back("sim_min_ld_rate");
  for (double r : rates) {
    const long per_instance =
        ld_capacity(r, ld.code_count, m, p_ld, g_mean, g_min, noise);
    std::vector<double> row = {
        r * instance_bw_hz / 1e3, static_cast<double>(per_instance * instances),
        static_cast<double>(baseline_lora(sg)),
        static_cast<double>(baseline_narrowband(r, sc.sweep.reserved_scs, sg, per_sc_snr))};
    if (verify) {
      double sim_min = std::numeric_limits<double>::quiet_NaN();
      if (per_instance >= 1 && per_instance <= 512) {
        Scenario probe = detail::with_ld_users(sc, static_cast<int>(per_instance));
        probe.run.trials = std::min(sc.run.trials, 8);
        probe.sweep = {};
        const MonteCarloSummary mc = run_monte_carlo(probe);
        const auto it = mc.metrics.find("ld_rate_min");
        if (it != mc.metrics.end()) {
          sim_min = std::numeric_limits<double>::infinity();
          for (double v : mc.samples.at("ld_rate_min")) sim_min = std::min(sim_min, v);
        }
      }
      row.push_back(sim_min);
    }
    table.x.push_back(r);
    table.cells.push_back(std::move(row));
  }
  return table;
}

// Mean achieved HD rate (single-user detection, optionally MMSE-SIC) and the
// perfect-orthogonality bound versus the number of served LD users.
inline SweepTable sweep_hd_rate(const Scenario& sc, const std::vector<int>& ld_user_grid) {
  if (ld_user_grid.empty()) throw std::invalid_argument("sweep_hd_rate: empty grid");
  SweepTable table;
  table.x_name = "ld_users";
  table.columns = {"hd_rate_su", "hd_rate_su_std", "hd_rate_bound", "su_over_bound"};
  if (sc.sweep.include_sic) table.columns.push_back("hd_rate_sic");
  for (int k_ld : ld_user_grid) {
    Scenario su = detail::with_ld_users(sc, k_ld);
    su.run.detector = DetectorPolicy::force_su;
    su.sweep = {};
    const MonteCarloSummary mc = run_monte_carlo(su);
    const Aggregate rate_su = mc.metrics.at("hd_rate_mean");
    const Aggregate bound = mc.metrics.at("hd_bound_rate_mean");
    std::vector<double> row = {rate_su.mean, rate_su.stddev, bound.mean,
                               bound.mean > 0.0 ? rate_su.mean / bound.mean : 0.0};
    if (sc.sweep.include_sic) {
      Scenario sic = detail::with_ld_users(sc, k_ld);
      sic.run.detector = DetectorPolicy::force_sic;
      sic.sweep = {};
      row.push_back(run_monte_carlo(sic).metrics.at("hd_rate_mean").mean);
    }
    table.x.push_back(static_cast<double>(k_ld));
    table.cells.push_back(std::move(row));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Large-M diagnostics campaign

struct TheoremCampaignPoint {
  int m = 0;
  int trials = 0;
  std::vector<double> hd_interference;  // pooled per-target samples
  std::vector<double> ld_interference;
  std::vector<double> ld_centering;     // c K_l / (N_l M) per sample
  std::vector<double> self_gain_re;
};

inline double median(std::vector<double> xs) {
  if (xs.empty()) throw std::invalid_argument("median: empty sample");
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

inline double mean(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean: empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline TheoremCampaignPoint run_theorem_point(const Scenario& base, int m, int trials) {
  Scenario sc = base;
  sc.system.num_antennas = m;
  sc.run.trials = trials;
  sc.run.combiner = Combiner::mrc;
  sc.run.diagnostics = true;
  sc.run.diagnostics_only = true;
  const auto results = detail::map_trials<TrialResult>(
      trials, sc.run.threads, [&](int i) { return run_trial(sc, static_cast<std::uint64_t>(i)); });
  TheoremCampaignPoint point;
  point.m = m;
  point.trials = trials;
  for (const TrialResult& tr : results) {
    for (std::size_t i = 0; i < tr.diagnostics.users.size(); ++i) {
      if (tr.diagnostics.centering[i] > 0.0) {
        point.ld_interference.push_back(tr.diagnostics.interference[i]);
        point.ld_centering.push_back(tr.diagnostics.centering[i]);
      } else {
        point.hd_interference.push_back(tr.diagnostics.interference[i]);
      }
      point.self_gain_re.push_back(tr.diagnostics.self_gain[i].real());
    }
  }
  return point;
}

inline SweepTable theorem_sweep(const Scenario& base, const std::vector<int>& m_grid) {
  if (m_grid.empty()) throw std::invalid_argument("theorem_sweep: empty antenna grid");
  SweepTable table;
  table.x_name = "m";
  table.columns = {"hd_interf_mean",  "hd_interf_median", "ld_interf_mean",
                   "ld_center_mean",  "self_gain_mean",   "trials"};
  for (int m : m_grid) {
    const TheoremCampaignPoint p = run_theorem_point(base, m, base.run.trials);
    std::vector<double> row(6, std::numeric_limits<double>::quiet_NaN());
    if (!p.hd_interference.empty()) {
      row[0] = mean(p.hd_interference);
      row[1] = median(p.hd_interference);
    }
    if (!p.ld_interference.empty()) {
      row[2] = mean(p.ld_interference);
      row[3] = mean(p.ld_centering);
    }
    row[4] = mean(p.self_gain_re);
    row[5] = static_cast<double>(p.trials);
    table.x.push_back(static_cast<double>(m));
    table.cells.push_back(std::move(row));
  }
  return table;
}

}  // namespace moma
