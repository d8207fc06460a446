// SPDX-License-Identifier: Apache-2.0
//
// Frequency-domain small-scale fading from tapped-delay-line profiles.
// Standard 3GPP EPA / EVA tap tables are built in, plus two diagnostic
// profiles: FLAT (single tap, frequency-flat) and IID (independent fading
// per subcarrier). Profiles are normalized to unit average power so that
// the large-scale gain g_k alone carries path loss.

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "moma/rng.hpp"
#include "moma/scenario.hpp"

namespace moma {

struct Tap {
  double delay_s = 0.0;
  double power_db = 0.0;
};

struct TapDelayProfile {
  std::string name;
  std::vector<Tap> taps;
  bool per_subcarrier_iid = false;

  void validate() const {
    if (per_subcarrier_iid) return;
    if (taps.empty()) throw std::invalid_argument("TapDelayProfile: no taps");
    double prev = -1.0;
    for (const Tap& t : taps) {
      if (t.delay_s < 0.0) throw std::invalid_argument("TapDelayProfile: negative delay");
      if (t.delay_s <= prev)
        throw std::invalid_argument("TapDelayProfile: delays must be strictly increasing");
      prev = t.delay_s;
    }
  }

  // Linear mean tap powers, normalized to sum 1.
  std::vector<double> normalized_powers() const {
    validate();
    std::vector<double> p;
    double sum = 0.0;
    for (const Tap& t : taps) {
      p.push_back(db_to_linear(t.power_db));
      sum += p.back();
    }
    for (double& v : p) v /= sum;
    return p;
  }

  // Extended Pedestrian A (3GPP TS 36.101 annex B).
  static TapDelayProfile epa() {
    return {"EPA",
            {{0e-9, 0.0},
             {30e-9, -1.0},
             {70e-9, -2.0},
             {90e-9, -3.0},
             {110e-9, -8.0},
             {190e-9, -17.2},
             {410e-9, -20.8}},
            false};
  }

  // Extended Vehicular A (3GPP TS 36.101 annex B).
  static TapDelayProfile eva() {
    return {"EVA",
            {{0e-9, 0.0},
             {30e-9, -1.5},
             {150e-9, -1.4},
             {310e-9, -3.6},
             {370e-9, -0.6},
             {710e-9, -9.1},
             {1090e-9, -7.0},
             {1730e-9, -12.0},
             {2510e-9, -16.9}},
            false};
  }

  // Single tap at zero delay: frequency-flat fading.
  static TapDelayProfile flat() { return {"FLAT", {{0.0, 0.0}}, false}; }

  // Independent fading per subcarrier (diagnostic).
  static TapDelayProfile iid() { return {"IID", {{0.0, 0.0}}, true}; }

  static TapDelayProfile by_name(const std::string& name) {
    if (name == "EPA") return epa();
    if (name == "EVA") return eva();
    if (name == "FLAT") return flat();
    if (name == "IID") return iid();
    throw std::invalid_argument("TapDelayProfile: unknown profile '" + name + "'");
  }
};

struct ChannelRealization {
  // Same gains in two layouts: per_user[k] is M x N (antenna x subcarrier),
  // per_subcarrier[n] is M x K (antenna x user).
  std::vector<Eigen::MatrixXcd> per_user;
  std::vector<Eigen::MatrixXcd> per_subcarrier;
  int first_subcarrier = 0;
  std::string profile;

  int num_users() const { return static_cast<int>(per_user.size()); }
  int num_antennas() const { return per_user.empty() ? 0 : static_cast<int>(per_user[0].rows()); }
  int block_length() const { return per_user.empty() ? 0 : static_cast<int>(per_user[0].cols()); }

  void rebuild_subcarrier_view() {
    const int m = num_antennas();
    const int n = block_length();
    const int k = num_users();
    per_subcarrier.assign(n, Eigen::MatrixXcd(m, k));
    for (int sc = 0; sc < n; ++sc)
      for (int u = 0; u < k; ++u) per_subcarrier[sc].col(u) = per_user[u].col(sc);
  }
};

struct ChannelOptions {
  bool common_across_users = false;  // share one draw across all users
};

// Per user and antenna: one complex Gaussian per tap with the tap's linear
// power, then the frequency response at each block subcarrier via the
// delay-to-phase transform. Draw order is user-major, then antenna, then tap,
// so realizations are a pure function of the seed.
inline ChannelRealization sample_small_scale_channel(const TapDelayProfile& profile,
                                                     const SystemConfig& sys, int num_users,
                                                     Rng& rng,
                                                     const ChannelOptions& opt = {}) {
  profile.validate();
  if (num_users < 0) throw std::invalid_argument("sample_small_scale_channel: negative user count");
  const int m = sys.num_antennas;
  const int n = sys.spreading_length;

  ChannelRealization ch;
  ch.profile = profile.name;
  ch.per_user.reserve(num_users);

  if (profile.per_subcarrier_iid) {
    for (int u = 0; u < num_users; ++u) {
      if (opt.common_across_users && u > 0) {
        ch.per_user.push_back(ch.per_user[0]);
        continue;
      }
      Eigen::MatrixXcd h(m, n);
      for (int a = 0; a < m; ++a)
        for (int sc = 0; sc < n; ++sc) h(a, sc) = rng.complex_gaussian(1.0);
      ch.per_user.push_back(std::move(h));
    }
    ch.rebuild_subcarrier_view();
    return ch;
  }

  const std::vector<double> powers = profile.normalized_powers();
  const int taps = static_cast<int>(powers.size());
  // phase(p, sc) = exp(-i 2 pi delay_p f_sc)
  Eigen::MatrixXcd phase(taps, n);
  for (int p = 0; p < taps; ++p)
    for (int sc = 0; sc < n; ++sc) {
      const double f = (ch.first_subcarrier + sc) * sys.subcarrier_spacing_hz;
      const double arg = -2.0 * std::numbers::pi * profile.taps[p].delay_s * f;
      phase(p, sc) = {std::cos(arg), std::sin(arg)};
    }

  for (int u = 0; u < num_users; ++u) {
    if (opt.common_across_users && u > 0) {
      ch.per_user.push_back(ch.per_user[0]);
      continue;
    }
    Eigen::MatrixXcd amp(m, taps);
    for (int a = 0; a < m; ++a)
      for (int p = 0; p < taps; ++p) amp(a, p) = rng.complex_gaussian(powers[p]);
    ch.per_user.push_back(amp * phase);
  }
  ch.rebuild_subcarrier_view();
  return ch;
}

struct FrequencyAutocorrelation {
  std::vector<std::complex<double>> c;  // lags 0..max_lag

  // Hermitian symmetric: c_{-u} = conj(c_u).
  std::complex<double> at(int lag) const {
    const int a = lag < 0 ? -lag : lag;
    if (a >= static_cast<int>(c.size()))
      throw std::invalid_argument("FrequencyAutocorrelation: lag out of range");
    return lag < 0 ? std::conj(c[a]) : c[a];
  }
};

// c_u = sum_p power_p exp(-i 2 pi delay_p u spacing); c_0 = 1.
inline FrequencyAutocorrelation freq_autocorrelation(const TapDelayProfile& profile,
                                                     double spacing_hz, int max_lag) {
  profile.validate();
  if (max_lag < 0) throw std::invalid_argument("freq_autocorrelation: negative max lag");
  FrequencyAutocorrelation out;
  out.c.reserve(max_lag + 1);
  if (profile.per_subcarrier_iid) {
    out.c.push_back(1.0);
    for (int u = 1; u <= max_lag; ++u) out.c.push_back(0.0);
    return out;
  }
  const std::vector<double> powers = profile.normalized_powers();
  for (int u = 0; u <= max_lag; ++u) {
    std::complex<double> acc = 0.0;
    for (std::size_t p = 0; p < powers.size(); ++p) {
      const double arg = -2.0 * std::numbers::pi * profile.taps[p].delay_s * u * spacing_hz;
      acc += powers[p] * std::complex<double>{std::cos(arg), std::sin(arg)};
    }
    out.c.push_back(acc);
  }
  return out;
}

}  // namespace moma
