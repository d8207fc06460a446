// SPDX-License-Identifier: Apache-2.0
//
// Per-user SINR and instantaneous rate, the large-M closed forms for LD
// users, interference diagnostics used to validate those limits empirically,
// LD capacity inversion, and the LoRa / narrow-band reference capacities.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "moma/phy.hpp"

namespace moma {

struct SinrComponents {
  double signal = 0.0;
  double intra_class = 0.0;  // same-class interference power
  double inter_class = 0.0;  // other classes
  double noise = 0.0;

  double interference() const { return intra_class + inter_class; }
  double sinr() const {
    const double den = interference() + noise;
    return den > 0.0 ? signal / den : std::numeric_limits<double>::infinity();
  }
};

// Instantaneous capacity log2(1 + sinr), bit/s/Hz.
inline double rate(double sinr) {
  if (sinr < 0.0) throw std::invalid_argument("rate: negative SINR");
  return std::log1p(sinr) / std::numbers::ln2;
}

namespace detail {

// sigma^2/M^2 * sum_n |f_n|^2 d_n^H d_n for a despreading vector f
// (the spreading code for single-user detection, delta for MMSE-SIC).
inline double despread_noise_power(const Eigen::VectorXcd& despreader,
                                   const Eigen::MatrixXcd& weights, double noise_variance) {
  const double m = static_cast<double>(weights.rows());
  double acc = 0.0;
  for (Eigen::Index sc = 0; sc < despreader.size(); ++sc)
    acc += std::norm(despreader(sc)) * weights.col(sc).squaredNorm();
  return acc * noise_variance / (m * m);
}

inline SinrComponents despread_sinr(const SpreadingAssignment& assignment,
                                    const UserPopulation& pop, const EffectiveCodeSet& eff,
                                    const CombinedSamples& combined, double noise_variance) {
  const int k = eff.target_user;
  const User& target = pop.users.at(k);
  const Eigen::VectorXcd code = assignment.codes.col(k).cast<cd>();
  // row(j) = c_k^H c~_j
  const Eigen::VectorXcd row = eff.codes.adjoint() * code;
  SinrComponents out;
  for (const User& u : pop.users) {
    const double power = u.large_scale_gain * u.tx_power_watt * std::norm(row(u.id));
    if (u.id == k)
      out.signal = power;
    else if (u.kind == target.kind && u.level == target.level)
      out.intra_class += power;
    else
      out.inter_class += power;
  }
  out.noise = despread_noise_power(code, combined.weights, noise_variance);
  return out;
}

}  // namespace detail

// SINR of an LD user under single-user despreading.
inline SinrComponents sinr_ld(const SpreadingAssignment& assignment, const UserPopulation& pop,
                              const EffectiveCodeSet& eff, const CombinedSamples& combined,
                              double noise_variance) {
  if (pop.users.at(eff.target_user).kind != UserClass::ld)
    throw std::invalid_argument("sinr_ld: target is not an LD user");
  return detail::despread_sinr(assignment, pop, eff, combined, noise_variance);
}

// SINR of an HD user under single-user despreading. The noise term uses the
// spreading code (the filter actually applied by the SU detector).
inline SinrComponents sinr_hd_su(const SpreadingAssignment& assignment, const UserPopulation& pop,
                                 const EffectiveCodeSet& eff, const CombinedSamples& combined,
                                 double noise_variance) {
  if (pop.users.at(eff.target_user).kind != UserClass::hd)
    throw std::invalid_argument("sinr_hd_su: target is not an HD user");
  return detail::despread_sinr(assignment, pop, eff, combined, noise_variance);
}

// Per-stage MMSE-SIC SINR: only not-yet-cancelled HD users and all LD users
// interfere; the noise term uses the stage filter delta.
inline std::vector<SinrComponents> sinr_hd_sic(const SicResult& sic, const UserPopulation& pop,
                                               double noise_variance) {
  std::vector<SinrComponents> out;
  out.reserve(sic.stages.size());
  for (std::size_t i = 0; i < sic.stages.size(); ++i) {
    const SicStage& stage = sic.stages[i];
    const Eigen::VectorXcd row = stage.codes.codes.adjoint() * stage.filter;
    SinrComponents comp;
    for (const User& u : pop.users) {
      const double power = u.large_scale_gain * u.tx_power_watt * std::norm(row(u.id));
      if (u.id == stage.user)
        comp.signal = power;
      else if (u.kind == UserClass::ld)
        comp.inter_class += power;
    }
    for (std::size_t j = i + 1; j < sic.order.size(); ++j) {
      const User& u = pop.users[sic.order[j]];
      comp.intra_class += u.large_scale_gain * u.tx_power_watt * std::norm(row(u.id));
    }
    comp.noise = detail::despread_noise_power(stage.filter, stage.weights, noise_variance);
    out.push_back(comp);
  }
  return out;
}

// Large-M limit of the LD SINR:
//   g_k P^LD / (c K_l / (N_l M) + sigma^2 / M), c = P^LD E[g].
inline double asymptotic_sinr_ld(double gain, double p_ld, double mean_gain, int k_l, int n_l,
                                 int m, double noise_variance) {
  if (k_l < 1 || n_l < 1 || m < 1)
    throw std::invalid_argument("asymptotic_sinr_ld: counts must be >= 1");
  if (!(p_ld > 0.0)) throw std::invalid_argument("asymptotic_sinr_ld: power must be > 0");
  const double c = p_ld * mean_gain;
  const double den = c * k_l / (static_cast<double>(n_l) * m) + noise_variance / m;
  return gain * p_ld / den;
}

struct TheoremDiagnostics {
  std::vector<int> users;
  std::vector<double> interference;  // sum_{j != k} g_j P_j |c_k^H c~_j|^2
  std::vector<double> centering;     // c K_l / (N_l M) for LD targets, 0 for HD
  std::vector<cd> self_gain;         // c_k^H c~_k
};

// Empirical quantities behind the large-M interference limits, evaluated
// under MRC combining.
inline TheoremDiagnostics theorem_diagnostics(const SpreadingAssignment& assignment,
                                              const ChannelRealization& ch,
                                              const UserPopulation& pop,
                                              const std::vector<int>& targets) {
  TheoremDiagnostics out;
  const int m = ch.num_antennas();
  for (int k : targets) {
    const User& target = pop.users.at(k);
    const Eigen::VectorXcd row =
        effective_cross_row(ch, assignment, ch.per_user[k], k);
    double interf = 0.0;
    for (const User& u : pop.users)
      if (u.id != k) interf += u.large_scale_gain * u.tx_power_watt * std::norm(row(u.id));
    double center = 0.0;
    if (target.kind == UserClass::ld) {
      const auto ids = pop.ld_user_ids(target.level);
      int n_l = 0;
      for (std::size_t l = 0; l < assignment.partition.ld.size(); ++l)
        if (static_cast<int>(l) == target.level - 1)
          n_l = static_cast<int>(assignment.partition.ld[l].cols());
      const double c = target.tx_power_watt * pop.mean_ld_gain;
      center = c * static_cast<double>(ids.size()) / (static_cast<double>(n_l) * m);
    }
    out.users.push_back(k);
    out.interference.push_back(interf);
    out.centering.push_back(center);
    out.self_gain.push_back(row(k));
  }
  return out;
}

// Largest LD class size whose worst admitted user still reaches the target
// rate in the large-M limit; 0 when infeasible.
inline long ld_capacity(double target_rate_bps_hz, int n_l, int m, double p_ld, double mean_gain,
                        double worst_gain, double noise_variance) {
  if (!(target_rate_bps_hz > 0.0)) throw std::invalid_argument("ld_capacity: rate must be > 0");
  const double threshold = std::exp2(target_rate_bps_hz) - 1.0;
  const double c = p_ld * mean_gain;
  const double budget = worst_gain * p_ld / threshold - noise_variance / m;
  long k = static_cast<long>(std::floor(static_cast<double>(n_l) * m / c * budget));
  if (k < 0) k = 0;
  // Fix up floating-point boundary cases so the result agrees exactly with a
  // linear feasibility search.
  auto feasible = [&](long cand) {
    return cand >= 1 &&
           asymptotic_sinr_ld(worst_gain, p_ld, mean_gain, static_cast<int>(cand), n_l, m,
                              noise_variance) >= threshold;
  };
  while (feasible(k + 1)) ++k;
  while (k > 0 && !feasible(k)) --k;
  return k;
}

// Concurrent LoRa transmissions: 16 channels x 7 spreading factors, scaled by
// the spatial multiplexing gain; independent of the target rate.
inline long baseline_lora(int spatial_gain) {
  if (spatial_gain < 1) throw std::invalid_argument("baseline_lora: spatial gain must be >= 1");
  return 16L * 7L * spatial_gain;
}

// Orthogonal narrow-band FDMA reference: each user occupies
// ceil(rate / log2(1 + per_sc_snr)) of the reserved subcarriers.
inline long baseline_narrowband(double target_rate_bps_hz, int reserved_scs, int spatial_gain,
                                double per_sc_snr) {
  if (reserved_scs < 1) throw std::invalid_argument("baseline_narrowband: no reserved subcarriers");
  if (spatial_gain < 1)
    throw std::invalid_argument("baseline_narrowband: spatial gain must be >= 1");
  if (!(target_rate_bps_hz > 0.0))
    throw std::invalid_argument("baseline_narrowband: rate must be > 0");
  const double per_sc_rate = rate(per_sc_snr);
  if (!(per_sc_rate > 0.0)) return 0;
  const long need =
      std::max(1L, static_cast<long>(std::ceil(target_rate_bps_hz / per_sc_rate - 1e-9)));
  return spatial_gain * (reserved_scs / need);
}

enum class BoundKind {
  // Zero the interference a re-orthogonalized code set would remove; users
  // reusing the very same code are kept (orthogonality cannot separate them).
  orthogonality_restored,
  // Zero every interference term.
  all_interference_removed,
};

// SINR of an HD user with the interference that perfect code orthogonality
// would eliminate set to zero; signal and noise terms unchanged.
inline SinrComponents bound_sinr_hd_su(const SpreadingAssignment& assignment,
                                       const UserPopulation& pop, const EffectiveCodeSet& eff,
                                       const CombinedSamples& combined, double noise_variance,
                                       BoundKind kind = BoundKind::orthogonality_restored) {
  const int k = eff.target_user;
  const User& target = pop.users.at(k);
  if (target.kind != UserClass::hd)
    throw std::invalid_argument("bound_sinr_hd_su: target is not an HD user");
  const Eigen::VectorXcd code = assignment.codes.col(k).cast<cd>();
  const Eigen::VectorXcd row = eff.codes.adjoint() * code;
  SinrComponents out;
  out.signal = target.large_scale_gain * target.tx_power_watt * std::norm(row(k));
  if (kind == BoundKind::orthogonality_restored) {
    for (const User& u : pop.users)
      if (u.id != k && u.kind == UserClass::hd && u.code_index == target.code_index)
        out.intra_class += u.large_scale_gain * u.tx_power_watt * std::norm(row(u.id));
  }
  out.noise = detail::despread_noise_power(code, combined.weights, noise_variance);
  return out;
}

inline double perfect_orthogonality_bound(const SpreadingAssignment& assignment,
                                          const UserPopulation& pop, const EffectiveCodeSet& eff,
                                          const CombinedSamples& combined, double noise_variance,
                                          BoundKind kind = BoundKind::orthogonality_restored) {
  return rate(bound_sinr_hd_su(assignment, pop, eff, combined, noise_variance, kind).sinr());
}

}  // namespace moma
