#pragma once

// Ranking head: negative sampling and the code score.

#include <algorithm>
#include <span>
#include <vector>

#include "carevec/model.hpp"

namespace carevec {

struct RankingConfig {
  int k_negatives = 10;
  double margin = 1.0;  // gamma
};

// Draws k distinct code ids outside `exclude` (sorted). Uniform unless
// `weights` is non-empty, in which case ids are drawn proportionally to their
// weight (rejecting excluded and repeated ids).
inline std::vector<CodeId> sample_negatives(std::span<const CodeId> exclude, std::size_t vocab_size, int k, Rng& rng,
                                            std::span<const double> cumulative_weights = {}) {
  if (k < 1) throw std::invalid_argument("k_negatives must be >= 1");
  const std::size_t pool = vocab_size - std::min(vocab_size, exclude.size());
  if (pool < static_cast<std::size_t>(k)) {
    throw DataError("cannot draw " + std::to_string(k) + " negatives from a pool of " + std::to_string(pool));
  }
  auto excluded = [&](CodeId c) { return std::binary_search(exclude.begin(), exclude.end(), c); };

  std::vector<CodeId> out;
  out.reserve(static_cast<std::size_t>(k));
  if (!cumulative_weights.empty()) {
    const double total = cumulative_weights.back();
    std::size_t attempts = 0;
    while (out.size() < static_cast<std::size_t>(k)) {
      if (++attempts > 1000 * vocab_size) throw DataError("weighted negative sampling did not converge");
      const double r = uniform01(rng) * total;
      auto c = static_cast<CodeId>(std::upper_bound(cumulative_weights.begin(), cumulative_weights.end(), r) -
                                   cumulative_weights.begin());
      c = std::min<CodeId>(c, static_cast<CodeId>(vocab_size - 1));
      if (excluded(c) || std::find(out.begin(), out.end(), c) != out.end()) continue;
      out.push_back(c);
    }
    return out;
  }
  if (static_cast<std::size_t>(k) * 2 <= pool) {
    while (out.size() < static_cast<std::size_t>(k)) {
      auto c = static_cast<CodeId>(uniform_index(rng, vocab_size));
      if (excluded(c) || std::find(out.begin(), out.end(), c) != out.end()) continue;
      out.push_back(c);
    }
    return out;
  }
  // Dense case: partial Fisher-Yates over the explicit candidate list.
  std::vector<CodeId> cand;
  cand.reserve(pool);
  for (std::size_t c = 0; c < vocab_size; ++c) {
    if (!excluded(static_cast<CodeId>(c))) cand.push_back(static_cast<CodeId>(c));
  }
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
    std::swap(cand[i], cand[i + uniform_index(rng, cand.size() - i)]);
    out.push_back(cand[i]);
  }
  return out;
}

// score(c) = W_s . [p, v_t, W_c[:,c]] + b_s  (+ W_c[:,c] . W_x [p, v_t] in the
// bilinear form).
inline double score(const VectorXd& p, const VectorXd& v, CodeId c, const ModelParams& P) {
  const auto hp = p.size();
  const auto hv = v.size();
  const auto e = P.W_c.rows();
  if (P.W_s.size() != hp + hv + e) throw std::invalid_argument("score: W_s does not match [p, v_t, w_c]");
  auto w = P.W_c.col(c);
  double s = P.b_s(0) + P.W_s.head(hp).dot(p) + P.W_s.segment(hp, hv).dot(v) + P.W_s.tail(e).dot(w);
  if (P.W_x.size() > 0) {
    VectorXd h(hp + hv);
    h << p, v;
    s += w.dot(P.W_x * h);
  }
  return s;
}

}  // namespace carevec
