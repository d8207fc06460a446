// SPDX-License-Identifier: Apache-2.0
//
// Hierarchical spreading codes. An orthogonal Walsh-Hadamard codebook is
// partitioned into disjoint per-class column blocks; LD users within a class
// share their block through a random combining matrix, so cross-class codes
// stay exactly orthogonal while same-class LD codes are quasi-orthogonal.

#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "moma/scenario.hpp"

namespace moma {

struct OrthogonalCodebook {
  Eigen::MatrixXd u;  // N x N, unit-norm mutually orthogonal columns
  int size() const { return static_cast<int>(u.cols()); }
};

// Sylvester-construction Walsh-Hadamard matrix scaled by 1/sqrt(n).
inline OrthogonalCodebook generate_hadamard(int n) {
  if (!is_power_of_two(n))
    throw std::invalid_argument("generate_hadamard: size must be a power of two");
  Eigen::MatrixXd h(1, 1);
  h(0, 0) = 1.0;
  while (h.rows() < n) {
    const Eigen::Index m = h.rows();
    Eigen::MatrixXd next(2 * m, 2 * m);
    next.topLeftCorner(m, m) = h;
    next.topRightCorner(m, m) = h;
    next.bottomLeftCorner(m, m) = h;
    next.bottomRightCorner(m, m) = -h;
    h = std::move(next);
  }
  return {h / std::sqrt(static_cast<double>(n))};
}

struct ClassCodePartition {
  Eigen::MatrixXd hd;                           // N x N^HD
  std::vector<Eigen::MatrixXd> ld;              // per LD level: N x N_l
  std::vector<int> hd_columns;                  // provenance in the codebook
  std::vector<std::vector<int>> ld_columns;
};

// Deterministic contiguous split: the first N^HD codebook columns go to the
// HD class, then one contiguous block per LD level in level order.
inline ClassCodePartition partition_codebook(const OrthogonalCodebook& book,
                                             const ClassPlan& plan) {
  const int n = book.size();
  if (plan.total_codes() != n)
    throw std::invalid_argument("partition_codebook: class code counts must sum to N");
  ClassCodePartition part;
  int col = 0;
  const ClassSpec& hd = plan.hd();
  part.hd = book.u.middleCols(col, hd.code_count);
  for (int i = 0; i < hd.code_count; ++i) part.hd_columns.push_back(col + i);
  col += hd.code_count;
  for (const ClassSpec* ld : plan.ld_levels()) {
    part.ld.push_back(book.u.middleCols(col, ld->code_count));
    std::vector<int> cols;
    for (int i = 0; i < ld->code_count; ++i) cols.push_back(col + i);
    part.ld_columns.push_back(std::move(cols));
    col += ld->code_count;
  }
  return part;
}

enum class CombiningEntries {
  sign,      // +-1/sqrt(N_l) equiprobable; unit column norm by construction
  gaussian,  // real N(0, 1/N_l) entries; unit column norm in expectation only
};

struct CombiningMatrix {
  Eigen::MatrixXd w;  // N_l x K_l
};

inline CombiningMatrix sample_combining_matrix(int n_ld, int k_ld, Rng& rng,
                                               CombiningEntries entries = CombiningEntries::sign) {
  if (n_ld < 1 || k_ld < 1)
    throw std::invalid_argument("sample_combining_matrix: dimensions must be >= 1");
  Eigen::MatrixXd w(n_ld, k_ld);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n_ld));
  for (int j = 0; j < k_ld; ++j)
    for (int i = 0; i < n_ld; ++i)
      w(i, j) = entries == CombiningEntries::sign ? rng.sign() * scale : rng.gaussian() * scale;
  return {std::move(w)};
}

struct SpreadingAssignment {
  Eigen::MatrixXd codes;  // N x K, column k is user k's final spreading code c_k
  ClassCodePartition partition;
  std::vector<CombiningMatrix> combiners;  // one per LD level
};

// HD user of in-class rank t takes column t mod N^HD of the HD block, so no
// column is reused more than ceil(K^HD / N^HD) times. LD user of rank j takes
// column j of U_l W_l.
inline SpreadingAssignment assign_codes(const ClassCodePartition& part,
                                        const std::vector<CombiningMatrix>& combiners,
                                        const UserPopulation& pop) {
  if (combiners.size() != part.ld.size())
    throw std::invalid_argument("assign_codes: one combining matrix per LD class required");
  std::vector<Eigen::MatrixXd> ld_codes;  // per level: N x K_l
  for (std::size_t l = 0; l < part.ld.size(); ++l) {
    if (combiners[l].w.rows() != part.ld[l].cols())
      throw std::invalid_argument("assign_codes: combining matrix row count mismatch");
    ld_codes.push_back(part.ld[l] * combiners[l].w);
  }
  const int n = static_cast<int>(part.hd.rows());
  SpreadingAssignment out;
  out.codes.resize(n, pop.size());
  for (const User& u : pop.users) {
    if (u.kind == UserClass::hd) {
      if (u.code_index >= part.hd.cols())
        throw std::invalid_argument("assign_codes: HD code index out of range");
      out.codes.col(u.id) = part.hd.col(u.code_index);
    } else {
      const int l = u.level - 1;
      if (l < 0 || l >= static_cast<int>(ld_codes.size()) ||
          u.code_index >= ld_codes[l].cols())
        throw std::invalid_argument("assign_codes: LD code index out of range");
      out.codes.col(u.id) = ld_codes[l].col(u.code_index);
    }
  }
  out.partition = part;
  out.combiners = combiners;
  return out;
}

// K x K matrix of inner products c_i^H c_j. Diagnostic for the
// quasi-orthogonality structure: HD x LD blocks are exactly zero.
inline Eigen::MatrixXd cross_correlation(const SpreadingAssignment& assignment) {
  if (assignment.codes.cols() == 0)
    throw std::invalid_argument("cross_correlation: empty assignment");
  return assignment.codes.transpose() * assignment.codes;
}

}  // namespace moma
