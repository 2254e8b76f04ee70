#pragma once

// Patient Vector network: parameters, initialization and the forward
// building blocks shared by the training objectives and the evaluators.

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "carevec/encoding.hpp"
#include "carevec/skipgram.hpp"

namespace carevec {

enum class Mode {
  pv,                 // softmax over the vocabulary for neighboring visits
  pv_plus,            // margin ranking over sampled negatives
  no_patient_vector,  // PV with the patient pathway removed (visit-only)
  skipgram,           // code-level objective only (embedding baseline)
};

// How the ranking head combines [p, v_t] with a code vector.
//   linear:   W_s . [p, v_t, w_c] + b_s
//   bilinear: linear + w_c . (W_x [p, v_t])
// In the linear form the p and v_t terms are the same for the positive and
// the negative code, so they cancel inside every hinge.
enum class ScoreForm { bilinear, linear };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::pv: return "pv";
    case Mode::pv_plus: return "pv_plus";
    case Mode::no_patient_vector: return "no_patient_vector";
    case Mode::skipgram: return "skipgram";
  }
  return "";
}

inline Mode parse_mode(std::string_view s) {
  if (s == "pv") return Mode::pv;
  if (s == "pv_plus") return Mode::pv_plus;
  if (s == "no_patient_vector") return Mode::no_patient_vector;
  if (s == "skipgram") return Mode::skipgram;
  throw std::invalid_argument("unknown mode '" + std::string(s) + "'");
}

inline std::string_view to_string(ScoreForm f) { return f == ScoreForm::bilinear ? "bilinear" : "linear"; }

inline ScoreForm parse_score_form(std::string_view s) {
  if (s == "bilinear") return ScoreForm::bilinear;
  if (s == "linear") return ScoreForm::linear;
  throw std::invalid_argument("unknown score form '" + std::string(s) + "'");
}

struct ModelDims {
  std::size_t codes = 0;         // |C|
  std::size_t code_dim = 100;    // e
  std::size_t visit_dim = 100;   // h_v
  std::size_t patient_dim = 100; // h_p
  std::size_t visit_demo = 0;    // dim(d_t)
  std::size_t patient_demo = kPatientDemoDim;
};

using Eigen::MatrixXd;
using Eigen::VectorXd;

// All trainable tensors. Tensors a mode does not use are empty (0 x 0), so the
// PV+ output head never depends on |C|.
struct ModelParams {
  Mode mode = Mode::pv;
  ScoreForm score_form = ScoreForm::bilinear;
  ModelDims dims;

  MatrixXd W_c;  // e x |C|
  VectorXd b_c;  // e
  MatrixXd W_v;  // h_v x (e + dim d_t)
  VectorXd b_v;  // h_v
  MatrixXd W_p;  // h_p x (e + dim d)
  VectorXd b_p;  // h_p
  MatrixXd W_o;  // |C| x (h_p + h_v)
  VectorXd b_o;  // |C|
  VectorXd W_s;  // h_p + h_v + e
  VectorXd b_s;  // 1
  MatrixXd W_x;  // e x (h_p + h_v)

  std::size_t h_p() const { return static_cast<std::size_t>(W_p.rows()); }
  std::size_t h_v() const { return static_cast<std::size_t>(W_v.rows()); }
  std::size_t e() const { return static_cast<std::size_t>(W_c.rows()); }
  std::size_t codes() const { return static_cast<std::size_t>(W_c.cols()); }

  struct TensorRef {
    std::string_view name;
    double* data;
    Eigen::Index rows;
    Eigen::Index cols;
    Eigen::Index size() const { return rows * cols; }
  };

  // Fixed, named order used by the optimizer and the checkpoint format.
  template <typename F>
  void for_each_tensor(F&& f) {
    f(TensorRef{"W_c", W_c.data(), W_c.rows(), W_c.cols()});
    f(TensorRef{"b_c", b_c.data(), b_c.rows(), 1});
    f(TensorRef{"W_v", W_v.data(), W_v.rows(), W_v.cols()});
    f(TensorRef{"b_v", b_v.data(), b_v.rows(), 1});
    f(TensorRef{"W_p", W_p.data(), W_p.rows(), W_p.cols()});
    f(TensorRef{"b_p", b_p.data(), b_p.rows(), 1});
    f(TensorRef{"W_o", W_o.data(), W_o.rows(), W_o.cols()});
    f(TensorRef{"b_o", b_o.data(), b_o.rows(), 1});
    f(TensorRef{"W_s", W_s.data(), W_s.rows(), 1});
    f(TensorRef{"b_s", b_s.data(), b_s.rows(), 1});
    f(TensorRef{"W_x", W_x.data(), W_x.rows(), W_x.cols()});
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    const_cast<ModelParams*>(this)->for_each_tensor([&](TensorRef t) { f(t); });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_tensor([&](TensorRef t) { n += static_cast<std::size_t>(t.size()); });
    return n;
  }

  // Parameters of the output head that scores or predicts neighbor codes.
  std::size_t output_head_parameter_count() const {
    return static_cast<std::size_t>(W_o.size() + b_o.size() + W_s.size() + b_s.size() + W_x.size());
  }

  ModelParams zeros_like() const {
    ModelParams z = *this;
    z.for_each_tensor([](TensorRef t) { std::fill(t.data, t.data + t.size(), 0.0); });
    return z;
  }

  bool all_finite() const {
    bool ok = true;
    for_each_tensor([&](TensorRef t) {
      for (Eigen::Index i = 0; i < t.size(); ++i) ok = ok && std::isfinite(t.data[i]);
    });
    return ok;
  }
};

// Allocates every tensor for the mode with zero values.
inline ModelParams make_zero_params(Mode mode, const ModelDims& d, ScoreForm form = ScoreForm::bilinear) {
  ModelParams p;
  p.mode = mode;
  p.score_form = form;
  p.dims = d;
  const auto C = static_cast<Eigen::Index>(d.codes);
  const auto e = static_cast<Eigen::Index>(d.code_dim);
  const auto hv = static_cast<Eigen::Index>(mode == Mode::skipgram ? 0 : d.visit_dim);
  const auto hp = static_cast<Eigen::Index>(mode == Mode::skipgram || mode == Mode::no_patient_vector ? 0 : d.patient_dim);
  p.dims.visit_dim = static_cast<std::size_t>(hv);
  p.dims.patient_dim = static_cast<std::size_t>(hp);
  const auto dt = static_cast<Eigen::Index>(d.visit_demo);
  const auto dd = static_cast<Eigen::Index>(d.patient_demo);

  p.W_c = MatrixXd::Zero(e, C);
  p.b_c = VectorXd::Zero(e);
  if (mode != Mode::skipgram) {
    p.W_v = MatrixXd::Zero(hv, e + dt);
    p.b_v = VectorXd::Zero(hv);
    p.W_p = MatrixXd::Zero(hp, e + dd);
    p.b_p = VectorXd::Zero(hp);
  } else {
    p.W_v = MatrixXd::Zero(0, 0);
    p.b_v = VectorXd::Zero(0);
    p.W_p = MatrixXd::Zero(0, 0);
    p.b_p = VectorXd::Zero(0);
  }
  p.W_o = MatrixXd::Zero(0, 0);
  p.b_o = VectorXd::Zero(0);
  p.W_s = VectorXd::Zero(0);
  p.b_s = VectorXd::Zero(0);
  p.W_x = MatrixXd::Zero(0, 0);
  if (mode == Mode::pv || mode == Mode::no_patient_vector) {
    p.W_o = MatrixXd::Zero(C, hp + hv);
    p.b_o = VectorXd::Zero(C);
  } else if (mode == Mode::pv_plus) {
    p.W_s = VectorXd::Zero(hp + hv + e);
    p.b_s = VectorXd::Zero(1);
    if (form == ScoreForm::bilinear) p.W_x = MatrixXd::Zero(e, hp + hv);
  }
  return p;
}

// Weights uniform(-scale, scale), biases zero.
inline ModelParams init_params(Mode mode, const ModelDims& d, std::uint64_t seed, ScoreForm form = ScoreForm::bilinear,
                               double scale = 0.05) {
  ModelParams p = make_zero_params(mode, d, form);
  Rng rng(derive_seed_str(seed, "init"));
  auto fill = [&](MatrixXd& m) {
    // Column-major traversal keeps the stream independent of Eigen internals.
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = (2.0 * uniform01(rng) - 1.0) * scale;
    }
  };
  fill(p.W_c);
  fill(p.W_v);
  fill(p.W_p);
  fill(p.W_o);
  for (Eigen::Index i = 0; i < p.W_s.size(); ++i) p.W_s(i) = (2.0 * uniform01(rng) - 1.0) * scale;
  fill(p.W_x);
  return p;
}

inline Eigen::Map<const VectorXd> as_vector(const std::vector<double>& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

// u_t = W_c x_t + b_c for a multi-hot visit.
inline VectorXd intermediate_visit(const VisitEncoding& x, const ModelParams& P) {
  VectorXd u = P.b_c;
  for (auto j : x.active_ids) u += P.W_c.col(j);
  return u;
}

inline double count_weight(int count, bool log_counts) {
  return log_counts ? std::log1p(static_cast<double>(count)) : static_cast<double>(count);
}

// k = W_c y + b_c for the count vector.
inline VectorXd intermediate_patient(const PatientEncoding& y, const ModelParams& P, bool log_counts = false) {
  VectorXd k = P.b_c;
  for (auto [j, c] : y.counts) k += count_weight(c, log_counts) * P.W_c.col(j);
  return k;
}

namespace detail {

// Pre-activation W [a, b] + bias with the concatenation split into blocks.
inline VectorXd affine_concat(const MatrixXd& W, const VectorXd& bias, const Eigen::Ref<const VectorXd>& a,
                              const Eigen::Ref<const VectorXd>& b) {
  if (W.cols() != a.size() + b.size()) {
    throw std::invalid_argument("dimension mismatch: weight has " + std::to_string(W.cols()) + " columns, input has " +
                                std::to_string(a.size() + b.size()));
  }
  VectorXd z = bias;
  z.noalias() += W.leftCols(a.size()) * a;
  z.noalias() += W.rightCols(b.size()) * b;
  return z;
}

}  // namespace detail

// v_t = ReLU(W_v [u_t, d_t] + b_v)
inline VectorXd visit_repr(const VectorXd& u, const std::vector<double>& d_t, const ModelParams& P) {
  return detail::affine_concat(P.W_v, P.b_v, u, as_vector(d_t)).unaryExpr(&relu);
}

// p = ReLU(W_p [k, d] + b_p)
inline VectorXd patient_repr(const VectorXd& k, const std::vector<double>& d, const ModelParams& P) {
  return detail::affine_concat(P.W_p, P.b_p, k, as_vector(d)).unaryExpr(&relu);
}

// x_hat = softmax(W_o [p, v_t] + b_o)
inline VectorXd predict_visit(const VectorXd& p, const VectorXd& v, const ModelParams& P) {
  VectorXd z = detail::affine_concat(P.W_o, P.b_o, p, v);
  detail::softmax_inplace(z);
  return z;
}

inline constexpr double kProbClamp = 1e-12;

// Multi-hot binary cross-entropy of a target visit against a softmax output,
// log arguments clamped to [1e-12, 1 - 1e-12].
inline double binary_ce(const VisitEncoding& target, const VectorXd& x_hat) {
  double loss = 0.0;
  std::size_t next = 0;
  for (Eigen::Index i = 0; i < x_hat.size(); ++i) {
    const double q = std::clamp(x_hat(i), kProbClamp, 1.0 - kProbClamp);
    const bool on = next < target.active_ids.size() && target.active_ids[next] == i;
    if (on) ++next;
    loss -= on ? std::log(q) : std::log(1.0 - q);
  }
  return loss;
}

// Visit-window neighbors of position t: offsets in [-w, w] \ {0} that stay
// inside [0, T).
inline std::vector<std::size_t> window_neighbors(std::size_t t, std::size_t T, int w) {
  std::vector<std::size_t> out;
  for (int j = -w; j <= w; ++j) {
    if (j == 0) continue;
    const auto tau = static_cast<long long>(t) + j;
    if (tau >= 0 && tau < static_cast<long long>(T)) out.push_back(static_cast<std::size_t>(tau));
  }
  return out;
}

// Cross-entropy over a patient's visit windows: (1/T) sum_t sum_j CE(x_{t+j}, x_hat_t).
// A patient with fewer than two visits has no targets and yields 0.
inline double ce_loss(std::span<const VectorXd> x_hat, std::span<const VisitEncoding> visits, int window) {
  const std::size_t T = visits.size();
  if (T < 2) return 0.0;
  double loss = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    for (auto tau : window_neighbors(t, T, window)) loss += binary_ce(visits[tau], x_hat[t]);
  }
  return loss / static_cast<double>(T);
}

}  // namespace carevec
