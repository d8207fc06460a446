// SPDX-License-Identifier: Apache-2.0
//
// Transmit/receive chain: spreading onto the subcarrier block, uplink
// superposition at the M-antenna array, linear receive combining, effective
// codes after the channel, and the three detectors (LD single-user despread,
// HD single-user despread, HD MMSE-SIC).

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <complex>
#include <stdexcept>
#include <vector>

#include "moma/channel.hpp"
#include "moma/codes.hpp"
#include "moma/scenario.hpp"

namespace moma {

using cd = std::complex<double>;

struct TransmitGrid {
  Eigen::MatrixXcd x;        // N x K: x(n, k) = sqrt(P_k) c_k[n] s_k
  Eigen::VectorXcd symbols;  // s_k, zero-mean unit-variance by contract
};

inline TransmitGrid spread(const SpreadingAssignment& assignment, const UserPopulation& pop,
                           const Eigen::VectorXcd& symbols, const SystemConfig& sys) {
  (void)sys;
  if (symbols.size() != pop.size())
    throw std::invalid_argument("spread: one symbol per user required");
  if (assignment.codes.cols() != pop.size())
    throw std::invalid_argument("spread: assignment does not cover the population");
  TransmitGrid tx;
  tx.symbols = symbols;
  tx.x.resize(assignment.codes.rows(), pop.size());
  for (const User& u : pop.users)
    tx.x.col(u.id) = std::sqrt(u.tx_power_watt) * symbols(u.id) *
                     assignment.codes.col(u.id).cast<cd>();
  return tx;
}

struct ReceivedGrid {
  Eigen::MatrixXcd y;      // M x N
  Eigen::MatrixXcd noise;  // M x N, the noise actually drawn (kept for exact decompositions)
  double noise_variance = 0.0;
};

// y_n = sum_k sqrt(g_k) h_{k,n} x_{k,n} + v_n. The transmit grid already
// carries sqrt(P_k), so powers enter the chain exactly once.
inline ReceivedGrid superpose(const TransmitGrid& tx, const ChannelRealization& ch,
                              const UserPopulation& pop, double noise_variance, Rng& rng) {
  if (noise_variance < 0.0) throw std::invalid_argument("superpose: negative noise variance");
  if (ch.num_users() != pop.size() || tx.x.cols() != pop.size())
    throw std::invalid_argument("superpose: dimension mismatch");
  const int m = ch.num_antennas();
  const int n = ch.block_length();
  if (tx.x.rows() != n) throw std::invalid_argument("superpose: block length mismatch");

  ReceivedGrid rx;
  rx.noise_variance = noise_variance;
  rx.noise.resize(m, n);
  for (int sc = 0; sc < n; ++sc)
    for (int a = 0; a < m; ++a) rx.noise(a, sc) = rng.complex_gaussian(noise_variance);

  Eigen::VectorXd root_gain(pop.size());
  for (const User& u : pop.users) root_gain(u.id) = std::sqrt(u.large_scale_gain);

  rx.y = rx.noise;
  for (int sc = 0; sc < n; ++sc) {
    const Eigen::VectorXcd w = root_gain.cast<cd>().cwiseProduct(tx.x.row(sc).transpose());
    rx.y.col(sc) += ch.per_subcarrier[sc] * w;
  }
  return rx;
}

enum class Combiner { mrc, mmse_spatial };

// Per-subcarrier combining weights d_{k,n} for one target user.
//   MRC:  d = h_{k,n}
//   MMSE: d = M (sum_j g_j P_j h_{j,n} h_{j,n}^H + sigma^2 I)^{-1} h_{k,n}
inline Eigen::MatrixXcd combiner_weights(const ChannelRealization& ch, const UserPopulation& pop,
                                         int target_user, Combiner kind, double noise_variance) {
  if (target_user < 0 || target_user >= ch.num_users())
    throw std::invalid_argument("combiner_weights: unknown target user");
  if (kind == Combiner::mrc) return ch.per_user[target_user];

  const int m = ch.num_antennas();
  const int n = ch.block_length();
  Eigen::VectorXd gp(pop.size());
  for (const User& u : pop.users) gp(u.id) = u.large_scale_gain * u.tx_power_watt;

  Eigen::MatrixXcd d(m, n);
  for (int sc = 0; sc < n; ++sc) {
    const Eigen::MatrixXcd& h = ch.per_subcarrier[sc];
    Eigen::MatrixXcd cov = h * gp.asDiagonal() * h.adjoint();
    cov.diagonal().array() += noise_variance;
    Eigen::LLT<Eigen::MatrixXcd> llt(cov);
    if (llt.info() != Eigen::Success) {
      // Rank-deficient covariance (e.g. noise-free with few users): ridge fallback.
      cov.diagonal().array() += 1e-12 * (1.0 + cov.trace().real() / m);
      llt.compute(cov);
    }
    d.col(sc) = static_cast<double>(m) * llt.solve(ch.per_user[target_user].col(sc));
  }
  return d;
}

struct CombinedSamples {
  int target_user = 0;
  Combiner kind = Combiner::mrc;
  Eigen::MatrixXcd weights;  // M x N: d_{k,n}
  Eigen::VectorXcd r;        // r_{k,n} = (1/M) d_{k,n}^H y_n
};

inline CombinedSamples combine(const ReceivedGrid& rx, const ChannelRealization& ch,
                               const UserPopulation& pop, int target_user, Combiner kind) {
  CombinedSamples out;
  out.target_user = target_user;
  out.kind = kind;
  out.weights = combiner_weights(ch, pop, target_user, kind, rx.noise_variance);
  const int m = ch.num_antennas();
  const int n = ch.block_length();
  out.r.resize(n);
  for (int sc = 0; sc < n; ++sc)
    out.r(sc) = out.weights.col(sc).dot(rx.y.col(sc)) / static_cast<double>(m);
  return out;
}

struct EffectiveCodeSet {
  int target_user = 0;
  Eigen::MatrixXcd codes;  // N x K: column j is c~_j as seen by the target
  Eigen::VectorXcd noise;  // v~_k, combined noise vector
};

// [c~_j]_n = (1/M) d_{k,n}^H h_{j,n} [c_j]_n for every user j;
// [v~_k]_n = (1/M) d_{k,n}^H v_n.
inline EffectiveCodeSet effective_codes(const ChannelRealization& ch,
                                        const CombinedSamples& combined,
                                        const SpreadingAssignment& assignment,
                                        const ReceivedGrid& rx) {
  const int m = ch.num_antennas();
  const int n = ch.block_length();
  const int k = ch.num_users();
  EffectiveCodeSet out;
  out.target_user = combined.target_user;
  out.codes.resize(n, k);
  out.noise.resize(n);
  for (int sc = 0; sc < n; ++sc) {
    const Eigen::RowVectorXcd gains =
        combined.weights.col(sc).adjoint() * ch.per_subcarrier[sc] / static_cast<double>(m);
    out.codes.row(sc) = gains.cwiseProduct(assignment.codes.row(sc).cast<cd>());
    out.noise(sc) = combined.weights.col(sc).dot(rx.noise.col(sc)) / static_cast<double>(m);
  }
  return out;
}

// c_k^H c~_j for all j as seen by target k, without building the grid;
// used for interference diagnostics where no noise enters.
inline Eigen::VectorXcd effective_cross_row(const ChannelRealization& ch,
                                            const SpreadingAssignment& assignment,
                                            const Eigen::MatrixXcd& weights, int target_user) {
  const int m = ch.num_antennas();
  const int n = ch.block_length();
  Eigen::VectorXcd row = Eigen::VectorXcd::Zero(ch.num_users());
  for (int sc = 0; sc < n; ++sc) {
    const Eigen::RowVectorXcd gains =
        weights.col(sc).adjoint() * ch.per_subcarrier[sc] / static_cast<double>(m);
    row += (assignment.codes(sc, target_user) *
            gains.cwiseProduct(assignment.codes.row(sc).cast<cd>()))
               .transpose();
  }
  return row;
}

// LD decision sample r_k = c_k^H r (single-user despreading).
inline cd detect_ld(const CombinedSamples& combined, const SpreadingAssignment& assignment,
                    const UserPopulation& pop, int target_user) {
  if (pop.users.at(target_user).kind != UserClass::ld)
    throw std::invalid_argument("detect_ld: target is not an LD user");
  if (combined.target_user != target_user)
    throw std::invalid_argument("detect_ld: combined samples belong to another user");
  return assignment.codes.col(target_user).cast<cd>().dot(combined.r);
}

// HD single-user decision sample, same despreading as the LD detector.
inline cd detect_hd_su(const CombinedSamples& combined, const SpreadingAssignment& assignment,
                       const UserPopulation& pop, int target_user) {
  if (pop.users.at(target_user).kind != UserClass::hd)
    throw std::invalid_argument("detect_hd_su: target is not an HD user");
  if (combined.target_user != target_user)
    throw std::invalid_argument("detect_hd_su: combined samples belong to another user");
  return assignment.codes.col(target_user).cast<cd>().dot(combined.r);
}

enum class DetectorKind { single_user, mmse_sic };
enum class DetectorPolicy { automatic, force_su, force_sic };

// MMSE-SIC only where the HD load approaches the effective spreading gain
// M N^HD; single-user detection otherwise.
inline DetectorKind select_hd_detector(int k_hd, int m, int n_hd, double rho = 0.5,
                                       DetectorPolicy policy = DetectorPolicy::automatic) {
  if (policy == DetectorPolicy::force_su) return DetectorKind::single_user;
  if (policy == DetectorPolicy::force_sic) return DetectorKind::mmse_sic;
  return k_hd >= rho * static_cast<double>(m) * n_hd ? DetectorKind::mmse_sic
                                                     : DetectorKind::single_user;
}

struct SicStage {
  int user = 0;
  cd decision{};
  Eigen::VectorXcd filter;   // delta for this stage
  EffectiveCodeSet codes;    // effective codes seen by this stage's reference user
  Eigen::MatrixXcd weights;  // d_{k,n} of the reference user
};

struct SicResult {
  std::vector<int> order;  // HD user ids, descending sqrt(g_k P_k)
  std::vector<SicStage> stages;
  bool regularized = false;
};

struct SicOptions {
  bool recompute_filter = true;   // shrink T to the not-yet-cancelled users per stage
  bool decision_directed = false; // default: genie-aided cancellation with true symbols
};

// HD users ordered by descending sqrt(g_k P_k) (ties broken by user id). At
// each stage the reference user's samples are re-combined, already-detected
// users are subtracted, and the MMSE despreading filter
//   delta = (T T^H + (sigma^2 + sum_LD g_j P_j)/M I)^{-1} [T]_k
// is applied. Singular systems fall back to a small ridge instead of failing.
inline SicResult detect_hd_mmse_sic(const ReceivedGrid& rx, const ChannelRealization& ch,
                                    const SpreadingAssignment& assignment,
                                    const UserPopulation& pop, const Eigen::VectorXcd& symbols,
                                    Combiner combiner, const SicOptions& opt = {}) {
  std::vector<int> hd = pop.hd_user_ids();
  if (hd.empty()) throw std::invalid_argument("detect_hd_mmse_sic: no HD users");
  const int m = ch.num_antennas();
  const int n = ch.block_length();

  auto amp = [&](int id) {
    const User& u = pop.users[id];
    return std::sqrt(u.large_scale_gain * u.tx_power_watt);
  };
  std::sort(hd.begin(), hd.end(), [&](int a, int b) {
    const double va = amp(a), vb = amp(b);
    if (va != vb) return va > vb;
    return a < b;
  });

  const double loading = (rx.noise_variance + pop.ld_power_sum()) / m;

  SicResult result;
  result.order = hd;
  std::vector<int> cancelled;
  std::vector<cd> sym_used(pop.size(), cd{0.0, 0.0});

  for (std::size_t stage_i = 0; stage_i < hd.size(); ++stage_i) {
    const int ref = hd[stage_i];
    CombinedSamples comb = combine(rx, ch, pop, ref, combiner);
    EffectiveCodeSet eff = effective_codes(ch, comb, assignment, rx);

    Eigen::VectorXcd samples = comb.r;
    for (int j : cancelled) samples -= amp(j) * sym_used[j] * eff.codes.col(j);

    std::vector<int> active;
    if (opt.recompute_filter)
      active.assign(hd.begin() + stage_i, hd.end());
    else
      active = hd;

    Eigen::MatrixXcd t(n, active.size());
    Eigen::Index ref_col = 0;
    for (std::size_t j = 0; j < active.size(); ++j) {
      t.col(j) = amp(active[j]) * eff.codes.col(active[j]);
      if (active[j] == ref) ref_col = static_cast<Eigen::Index>(j);
    }
    Eigen::MatrixXcd gram = t * t.adjoint();
    gram.diagonal().array() += loading;
    Eigen::LLT<Eigen::MatrixXcd> llt(gram);
    if (llt.info() != Eigen::Success) {
      gram.diagonal().array() += 1e-12 * (1.0 + gram.trace().real() / n);
      llt.compute(gram);
      result.regularized = true;
    }
    Eigen::VectorXcd delta = llt.solve(t.col(ref_col));

    SicStage stage;
    stage.user = ref;
    stage.filter = delta;
    stage.decision = delta.dot(samples);

    if (opt.decision_directed) {
      const cd gain = amp(ref) * delta.dot(eff.codes.col(ref));
      const cd soft = stage.decision / gain;
      const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
      sym_used[ref] = {soft.real() >= 0.0 ? inv_sqrt2 : -inv_sqrt2,
                       soft.imag() >= 0.0 ? inv_sqrt2 : -inv_sqrt2};
    } else {
      sym_used[ref] = symbols(ref);
    }

    stage.codes = std::move(eff);
    stage.weights = std::move(comb.weights);
    result.stages.push_back(std::move(stage));
    cancelled.push_back(ref);
  }
  return result;
}

}  // namespace moma
