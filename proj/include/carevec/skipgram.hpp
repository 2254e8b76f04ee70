#pragma once

// Code-level co-occurrence objective. Full-softmax skip-gram over the codes
// of a visit, with a single shared embedding table: the "input" and "output"
// vector of a code are the same column of W_c.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "carevec/encoding.hpp"

namespace carevec {

struct CodePair {
  CodeId center = 0;
  CodeId context = 0;
  bool operator==(const CodePair&) const = default;
  auto operator<=>(const CodePair&) const = default;
};

// Every ordered pair of distinct codes in the visit. The context is the whole
// visit, so the result does not depend on any ordering of the codes.
inline std::vector<CodePair> visit_pairs(const VisitEncoding& visit) {
  std::vector<CodePair> out;
  const auto& ids = visit.active_ids;
  out.reserve(ids.size() * (ids.size() > 0 ? ids.size() - 1 : 0));
  for (auto c : ids) {
    for (auto o : ids) {
      if (c != o) out.push_back({c, o});
    }
  }
  return out;
}

namespace detail {

// Numerically stable in-place softmax of a vector.
inline void softmax_inplace(Eigen::Ref<Eigen::VectorXd> z) {
  const double m = z.maxCoeff();
  z = (z.array() - m).exp();
  z /= z.sum();
}

inline double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

}  // namespace detail

// P(context | center) = exp(w_ctx . w_ctr) / sum_j exp(w_j . w_ctr).
inline double softmax_prob(CodeId center, CodeId context, const Eigen::MatrixXd& W_c) {
  Eigen::VectorXd s = W_c.transpose() * W_c.col(center);
  return std::exp(s(context) - detail::log_sum_exp(s));
}

// Negative mean log-likelihood over the pairs. When `grad` is given, adds
// scale * dLoss/dW_c to it (grad must be shaped like W_c).
inline double skipgram_loss_and_grad(std::span<const CodePair> pairs, const Eigen::MatrixXd& W_c,
                                     Eigen::MatrixXd* grad, double scale = 1.0) {
  if (pairs.empty()) throw std::invalid_argument("skipgram_loss_and_grad: empty batch");
  std::vector<CodePair> sorted(pairs.begin(), pairs.end());
  std::sort(sorted.begin(), sorted.end());
  const double inv_n = 1.0 / static_cast<double>(sorted.size());

  double loss = 0.0;
  Eigen::VectorXd s(W_c.cols());
  Eigen::VectorXd ds(W_c.cols());
  for (std::size_t lo = 0; lo < sorted.size();) {
    const CodeId c = sorted[lo].center;
    std::size_t hi = lo;
    while (hi < sorted.size() && sorted[hi].center == c) ++hi;
    const auto m = static_cast<double>(hi - lo);

    s.noalias() = W_c.transpose() * W_c.col(c);
    const double lse = detail::log_sum_exp(s);
    for (std::size_t i = lo; i < hi; ++i) loss += lse - s(sorted[i].context);

    if (grad) {
      ds = (s.array() - lse).exp() * m;
      for (std::size_t i = lo; i < hi; ++i) ds(sorted[i].context) -= 1.0;
      ds *= scale * inv_n;
      // d s_j / d w_j = w_c and d s_j / d w_c = w_j; the self term s_c picks
      // up both contributions.
      grad->noalias() += W_c.col(c) * ds.transpose();
      grad->col(c).noalias() += W_c * ds;
    }
    lo = hi;
  }
  return loss * inv_n;
}

// Sum of -log P over all ordered pairs of one visit, with the centers
// batched into matrix products. Adds scale * gradient when `grad` is given.
// Returns the summed (not averaged) loss.
inline double visit_skipgram_sum(std::span<const CodeId> ids, const Eigen::MatrixXd& W_c, Eigen::MatrixXd* grad,
                                 double scale) {
  const auto n = static_cast<Eigen::Index>(ids.size());
  if (n < 2) return 0.0;
  Eigen::MatrixXd centers(W_c.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) centers.col(i) = W_c.col(ids[static_cast<std::size_t>(i)]);
  Eigen::MatrixXd S = W_c.transpose() * centers;  // |C| x n

  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto col = S.col(i);
    const double lse = detail::log_sum_exp(col);
    for (Eigen::Index o = 0; o < n; ++o) {
      if (o != i) loss += lse - col(ids[static_cast<std::size_t>(o)]);
    }
    if (grad) {
      col = (col.array() - lse).exp() * static_cast<double>(n - 1);
      for (Eigen::Index o = 0; o < n; ++o) {
        if (o != i) col(ids[static_cast<std::size_t>(o)]) -= 1.0;
      }
    }
  }
  if (grad) {
    S *= scale;
    grad->noalias() += centers * S.transpose();
    Eigen::MatrixXd back = W_c * S;  // e x n
    for (Eigen::Index i = 0; i < n; ++i) grad->col(ids[static_cast<std::size_t>(i)]) += back.col(i);
  }
  return loss;
}

}  // namespace carevec
