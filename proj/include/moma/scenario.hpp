// SPDX-License-Identifier: Apache-2.0
//
// System-level configuration, user classes, user placement and large-scale
// fading. One HD (high data rate) class shares the cell with L-1 LD (low
// data rate, granted-rate) classes; LD classes are overloaded, i.e. they
// hold more users than spreading codes.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "moma/rng.hpp"

namespace moma {

inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

inline bool is_power_of_two(int n) { return n >= 1 && (n & (n - 1)) == 0; }

struct SystemConfig {
  int n_fft = 1024;                    // subcarriers per OFDM symbol
  int n_used = 600;                    // data subcarriers
  int spreading_length = 32;           // code length N
  double subcarrier_spacing_hz = 15e3;
  int num_antennas = 80;               // BS antennas M
  double noise_psd_dbm_hz = -174.0;
  double carrier_freq_hz = 900e6;

  // Instances of the spreading block that fit in the used band.
  int num_instances() const { return n_used / spreading_length; }

  // Per-subcarrier complex noise variance, watts.
  double noise_variance() const {
    return dbm_to_watt(noise_psd_dbm_hz) * subcarrier_spacing_hz;
  }

  void validate() const {
    if (!is_power_of_two(spreading_length))
      throw std::invalid_argument("SystemConfig: spreading_length must be a power of two");
    if (spreading_length > n_used || n_used > n_fft)
      throw std::invalid_argument("SystemConfig: need spreading_length <= n_used <= n_fft");
    if (num_antennas < 1) throw std::invalid_argument("SystemConfig: num_antennas must be >= 1");
    if (num_instances() < 1) throw std::invalid_argument("SystemConfig: no full instance fits");
    if (!(subcarrier_spacing_hz > 0.0))
      throw std::invalid_argument("SystemConfig: subcarrier spacing must be > 0");
    if (!(carrier_freq_hz > 0.0))
      throw std::invalid_argument("SystemConfig: carrier frequency must be > 0");
  }
};

enum class UserClass { hd, ld };

struct ClassSpec {
  UserClass kind = UserClass::ld;
  int level = 0;         // 0 for the HD class, 1..L-1 for LD classes
  int code_count = 0;    // N^HD or N_l^LD
  int user_count = 0;    // K^HD or K_l^LD
  double tx_power_dbm = 23.0;
  double target_rate_bps_hz = 0.0;  // granted rate, LD classes only

  double tx_power_watt() const { return dbm_to_watt(tx_power_dbm); }
  double overload_ratio() const {
    return code_count > 0 ? static_cast<double>(user_count) / code_count : 0.0;
  }
};

struct ClassPlan {
  std::vector<ClassSpec> classes;

  int total_users() const {
    int k = 0;
    for (const auto& c : classes) k += c.user_count;
    return k;
  }

  int total_codes() const {
    int n = 0;
    for (const auto& c : classes) n += c.code_count;
    return n;
  }

  const ClassSpec& hd() const {
    for (const auto& c : classes)
      if (c.kind == UserClass::hd) return c;
    throw std::invalid_argument("ClassPlan: no HD class");
  }

  // LD classes ordered by level (1..L-1).
  std::vector<const ClassSpec*> ld_levels() const {
    std::vector<const ClassSpec*> out;
    for (const auto& c : classes)
      if (c.kind == UserClass::ld) out.push_back(&c);
    std::sort(out.begin(), out.end(),
              [](const ClassSpec* a, const ClassSpec* b) { return a->level < b->level; });
    return out;
  }

  // Hard violations throw; ordering violations of the granted-rate and
  // overload-ratio conventions are reported as warnings.
  void validate(int spreading_length, std::vector<std::string>* warnings = nullptr) const {
    int hd_count = 0;
    for (const auto& c : classes) {
      if (c.code_count < 0 || c.user_count < 0)
        throw std::invalid_argument("ClassPlan: negative counts");
      if (c.kind == UserClass::hd) {
        ++hd_count;
        if (c.level != 0) throw std::invalid_argument("ClassPlan: HD class must have level 0");
      } else if (c.level < 1) {
        throw std::invalid_argument("ClassPlan: LD class level must be >= 1");
      }
    }
    if (hd_count != 1) throw std::invalid_argument("ClassPlan: exactly one HD class required");
    if (total_codes() != spreading_length)
      throw std::invalid_argument("ClassPlan: class code counts must sum to the spreading length");
    auto lds = ld_levels();
    for (std::size_t i = 0; i < lds.size(); ++i) {
      if (lds[i]->level != static_cast<int>(i) + 1)
        throw std::invalid_argument("ClassPlan: LD levels must be consecutive starting at 1");
      if (lds[i]->code_count < 1)
        throw std::invalid_argument("ClassPlan: LD class needs at least one code");
    }
    if (warnings) {
      for (std::size_t i = 1; i < lds.size(); ++i) {
        if (!(lds[i - 1]->target_rate_bps_hz > lds[i]->target_rate_bps_hz))
          warnings->push_back("LD target rates are not strictly decreasing with level");
        if (!(lds[i]->overload_ratio() > lds[i - 1]->overload_ratio()))
          warnings->push_back("LD overload ratios are not strictly increasing with level");
      }
      const double hd_ratio = hd().overload_ratio();
      for (const auto* l : lds) {
        if (l->user_count > 0 && !(l->overload_ratio() > hd_ratio)) {
          warnings->push_back("an LD class is not overloaded beyond the HD ratio");
          break;
        }
      }
    }
  }
};

struct HataParams {
  double bs_height_m = 30.0;
  double ue_height_m = 1.5;
  double area_correction_db = 0.0;  // 0 dB: medium city / suburban
};

// COST-231 Hata path loss in dB:
//   PL = 46.3 + 33.9 log10(f_MHz) - 13.82 log10(h_b) - a(h_m)
//        + (44.9 - 6.55 log10(h_b)) log10(d_km) + C
//   a(h_m) = (1.1 log10(f_MHz) - 0.7) h_m - (1.56 log10(f_MHz) - 0.8)
// The model's nominal range starts at 1500 MHz and 1 km; values outside are
// extrapolated without clamping.
inline double cost231_hata_db(double distance_m, double carrier_hz, const HataParams& p = {}) {
  if (!(distance_m > 0.0)) throw std::invalid_argument("cost231_hata_db: distance must be > 0");
  if (!(carrier_hz > 0.0)) throw std::invalid_argument("cost231_hata_db: carrier must be > 0");
  if (!(p.bs_height_m > 0.0) || !(p.ue_height_m > 0.0))
    throw std::invalid_argument("cost231_hata_db: antenna heights must be > 0");
  const double lf = std::log10(carrier_hz / 1e6);
  const double a_hm = (1.1 * lf - 0.7) * p.ue_height_m - (1.56 * lf - 0.8);
  return 46.3 + 33.9 * lf - 13.82 * std::log10(p.bs_height_m) - a_hm +
         (44.9 - 6.55 * std::log10(p.bs_height_m)) * std::log10(distance_m / 1e3) +
         p.area_correction_db;
}

// Linear large-scale power gain g = 10^(-PL/10).
inline double pathloss_gain(double distance_m, double carrier_hz, const HataParams& p = {}) {
  return db_to_linear(-cost231_hata_db(distance_m, carrier_hz, p));
}

struct User {
  int id = 0;
  int class_index = 0;  // index into ClassPlan::classes
  UserClass kind = UserClass::ld;
  int level = 0;
  double distance_m = 0.0;
  double large_scale_gain = 0.0;  // g_k, linear power gain
  double tx_power_watt = 0.0;     // P_k
  int code_index = 0;             // column within the class's assigned codes
};

struct UserPopulation {
  std::vector<User> users;
  double mean_ld_gain = 0.0;  // empirical E[g] over LD users

  int size() const { return static_cast<int>(users.size()); }

  std::vector<int> hd_user_ids() const {
    std::vector<int> out;
    for (const auto& u : users)
      if (u.kind == UserClass::hd) out.push_back(u.id);
    return out;
  }

  std::vector<int> ld_user_ids() const {
    std::vector<int> out;
    for (const auto& u : users)
      if (u.kind == UserClass::ld) out.push_back(u.id);
    return out;
  }

  std::vector<int> ld_user_ids(int level) const {
    std::vector<int> out;
    for (const auto& u : users)
      if (u.kind == UserClass::ld && u.level == level) out.push_back(u.id);
    return out;
  }

  // Sum of g_j P_j over LD users (drives the MMSE-SIC loading term).
  double ld_power_sum() const {
    double s = 0.0;
    for (const auto& u : users)
      if (u.kind == UserClass::ld) s += u.large_scale_gain * u.tx_power_watt;
    return s;
  }

  void recompute_mean_ld_gain() {
    double s = 0.0;
    int n = 0;
    for (const auto& u : users)
      if (u.kind == UserClass::ld) {
        s += u.large_scale_gain;
        ++n;
      }
    mean_ld_gain = n > 0 ? s / n : 0.0;
  }
};

// Arithmetic mean of g_k over LD users.
inline double mean_gain(const UserPopulation& pop) {
  double s = 0.0;
  int n = 0;
  for (const auto& u : pop.users)
    if (u.kind == UserClass::ld) {
      s += u.large_scale_gain;
      ++n;
    }
  if (n == 0) throw std::invalid_argument("mean_gain: population has no LD users");
  return s / n;
}

// Draws distances i.i.d. uniform on [placement_min_m, placement_max_m],
// computes large-scale gains from the path-loss model and assigns per-user
// code indices (HD codes are reused round-robin by in-class rank).
inline UserPopulation build_population(const ClassPlan& plan, double placement_min_m,
                                       double placement_max_m, const SystemConfig& sys,
                                       Rng& rng, const HataParams& hata = {}) {
  plan.validate(sys.spreading_length);
  if (plan.total_users() == 0) throw std::invalid_argument("build_population: empty plan");
  if (!(placement_min_m < placement_max_m))
    throw std::invalid_argument("build_population: placement_min must be < placement_max");

  UserPopulation pop;
  pop.users.reserve(plan.total_users());
  int id = 0;
  for (std::size_t ci = 0; ci < plan.classes.size(); ++ci) {
    const ClassSpec& cls = plan.classes[ci];
    for (int rank = 0; rank < cls.user_count; ++rank) {
      User u;
      u.id = id++;
      u.class_index = static_cast<int>(ci);
      u.kind = cls.kind;
      u.level = cls.level;
      u.distance_m = rng.uniform(placement_min_m, placement_max_m);
      u.large_scale_gain = pathloss_gain(u.distance_m, sys.carrier_freq_hz, hata);
      u.tx_power_watt = cls.tx_power_watt();
      u.code_index = cls.kind == UserClass::hd ? rank % cls.code_count : rank;
      pop.users.push_back(u);
    }
  }
  pop.recompute_mean_ld_gain();
  return pop;
}

}  // namespace moma
