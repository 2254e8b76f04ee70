#pragma once

// Interpretation helpers: per-coordinate top codes, influential coordinates
// of a cost regressor, cosine similarity, planted-group coherence and a PCA
// projection to two dimensions.

#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "carevec/encoding.hpp"
#include "carevec/eval.hpp"
#include "carevec/model.hpp"

namespace carevec {

// The top_n codes with the largest value in row i of W_c (e x |C|),
// descending, ties by code string.
inline std::vector<std::string> top_codes_per_coordinate(const MatrixXd& W_c, const Vocabulary& vocab, Eigen::Index i,
                                                         std::size_t top_n = 8) {
  if (i < 0 || i >= W_c.rows()) throw std::out_of_range("coordinate " + std::to_string(i) + " out of range");
  if (static_cast<std::size_t>(W_c.cols()) != vocab.size()) throw std::invalid_argument("W_c does not match vocabulary");
  std::vector<CodeId> ids(vocab.size());
  std::iota(ids.begin(), ids.end(), 0);
  const auto n = std::min(top_n, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n), ids.end(), [&](CodeId a, CodeId b) {
    if (W_c(i, a) != W_c(i, b)) return W_c(i, a) > W_c(i, b);
    return vocab.code(a) < vocab.code(b);
  });
  std::vector<std::string> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(vocab.code(ids[k]));
  return out;
}

struct Influence {
  Eigen::Index coordinate = 0;
  double score = 0.0;
};

// influence(j) = |sum_m w[m] W_p[m, j]| * max_c (W_c[j, c] + b_c[j]) for each
// code-space coordinate j < e: a linearization that treats the patient ReLU
// as active. `w` holds the regression weights on the h_p patient features.
inline std::vector<Influence> influence_scores(const ModelParams& P, const VectorXd& w) {
  if (P.W_p.rows() == 0) throw std::invalid_argument("model has no patient vector");
  if (w.size() != P.W_p.rows()) {
    throw std::invalid_argument("regression weights have " + std::to_string(w.size()) + " entries, expected " +
                                std::to_string(P.W_p.rows()));
  }
  const auto e = P.W_c.rows();
  const VectorXd through = (w.transpose() * P.W_p.leftCols(e)).transpose();
  std::vector<Influence> out;
  for (Eigen::Index j = 0; j < e; ++j) {
    const double peak = P.W_c.row(j).maxCoeff() + P.b_c(j);
    out.push_back({j, std::abs(through(j)) * peak});
  }
  return out;
}

inline std::vector<Influence> influential_coordinates(const ModelParams& P, const VectorXd& w, std::size_t top_m = 2) {
  auto all = influence_scores(P, w);
  std::stable_sort(all.begin(), all.end(), [](const Influence& a, const Influence& b) { return a.score > b.score; });
  all.resize(std::min(top_m, all.size()));
  return all;
}

// Cosine similarity; a zero vector gives 0 and bumps `zero_vectors`.
inline double cosine_similarity(const Eigen::Ref<const VectorXd>& a, const Eigen::Ref<const VectorXd>& b,
                                std::size_t* zero_vectors = nullptr) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_similarity: length mismatch");
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    if (zero_vectors) ++*zero_vectors;
    return 0.0;
  }
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

inline double patient_similarity(const Representation& rep, const std::string& a, const std::string& b,
                                 std::size_t* zero_vectors = nullptr) {
  auto row = [&](const std::string& m) {
    auto it = std::find(rep.members.begin(), rep.members.end(), m);
    if (it == rep.members.end()) throw std::out_of_range("member '" + m + "' is not in the representation");
    return static_cast<Eigen::Index>(it - rep.members.begin());
  };
  const auto ra = row(a), rb = row(b);
  return cosine_similarity(rep.vectors.row(ra).transpose(), rep.vectors.row(rb).transpose(), zero_vectors);
}

struct Coherence {
  double intra = 0.0;      // mean cosine over same-group pairs
  double inter = 0.0;      // mean cosine over cross-group pairs
  double nn_purity = 0.0;  // share of codes whose nearest neighbour shares their group
  std::size_t codes = 0;
  std::size_t zero_vectors = 0;
};

// Over the vocabulary codes that carry a group label; unlabeled (noise) codes
// take no part. Columns of `vectors` are code vectors.
inline Coherence group_coherence(const MatrixXd& vectors, const Vocabulary& vocab,
                                 const std::map<std::string, int>& code_group) {
  if (static_cast<std::size_t>(vectors.cols()) != vocab.size()) throw std::invalid_argument("vectors do not match vocabulary");
  std::vector<Eigen::Index> cols;
  std::vector<int> group;
  std::map<int, int> sizes;
  for (std::size_t c = 0; c < vocab.size(); ++c) {
    auto it = code_group.find(vocab.code(static_cast<CodeId>(c)));
    if (it == code_group.end()) continue;
    cols.push_back(static_cast<Eigen::Index>(c));
    group.push_back(it->second);
    ++sizes[it->second];
  }
  if (sizes.size() < 2) throw DataError("group coherence needs at least two groups");
  for (auto [g, n] : sizes) {
    if (n < 2) throw DataError("group " + std::to_string(g) + " has fewer than two codes; purity is undefined");
  }
  Coherence out;
  out.codes = cols.size();
  const auto n = static_cast<Eigen::Index>(cols.size());
  MatrixXd U(vectors.rows(), n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double norm = vectors.col(cols[static_cast<std::size_t>(k)]).norm();
    if (norm == 0.0) {
      ++out.zero_vectors;
      U.col(k).setZero();
    } else {
      U.col(k) = vectors.col(cols[static_cast<std::size_t>(k)]) / norm;
    }
  }
  const MatrixXd S = U.transpose() * U;
  double intra = 0.0, inter = 0.0;
  std::size_t n_intra = 0, n_inter = 0, hits = 0;
  for (Eigen::Index a = 0; a < n; ++a) {
    Eigen::Index best = -1;
    for (Eigen::Index b = 0; b < n; ++b) {
      if (a == b) continue;
      if (best < 0 || S(a, b) > S(a, best)) best = b;
      if (b > a) {
        if (group[static_cast<std::size_t>(a)] == group[static_cast<std::size_t>(b)]) {
          intra += S(a, b);
          ++n_intra;
        } else {
          inter += S(a, b);
          ++n_inter;
        }
      }
    }
    hits += group[static_cast<std::size_t>(best)] == group[static_cast<std::size_t>(a)];
  }
  out.intra = intra / static_cast<double>(n_intra);
  out.inter = inter / static_cast<double>(n_inter);
  out.nn_purity = static_cast<double>(hits) / static_cast<double>(n);
  return out;
}

// Rows of X projected on the top two principal components of the centered
// data. Each component's largest-magnitude loading is made positive.
inline MatrixXd project_2d(const MatrixXd& X) {
  if (X.rows() < 1) throw std::invalid_argument("project_2d: no rows");
  const MatrixXd Xc = X.rowwise() - X.colwise().mean();
  MatrixXd out = MatrixXd::Zero(X.rows(), 2);
  if (X.cols() == 0) return out;
  Eigen::BDCSVD<MatrixXd> svd(Xc, Eigen::ComputeThinV);
  const MatrixXd& V = svd.matrixV();
  for (Eigen::Index k = 0; k < std::min<Eigen::Index>(2, V.cols()); ++k) {
    VectorXd v = V.col(k);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    out.col(k) = Xc * v;
  }
  return out;
}

}  // namespace carevec
