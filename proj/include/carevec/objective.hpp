#pragma once

// Unified training objective with exact gradients.
//
//   loss = task + lambda * skipgram
//
// task is the visit-window cross-entropy (pv, no_patient_vector) or the
// margin ranking loss (pv_plus), averaged over the batch patients that have
// at least two visits; each patient contributes (1/T) sum_t sum_j term(t, j).
// skipgram is the mean negative log-likelihood over every within-visit code
// pair in the batch. In skipgram mode only the second term is used, with
// weight 1.

#include <thread>
#include <vector>

#include "carevec/model.hpp"
#include "carevec/ranking.hpp"
#include "carevec/skipgram.hpp"

namespace carevec {

struct ObjectiveConfig {
  int window = 1;
  double lambda = 1.0;
  RankingConfig ranking;
  bool log_counts = false;
  std::vector<double> negative_cumweights;  // empty: uniform negatives
};

struct LossParts {
  double task = 0.0;
  double skipgram = 0.0;
  double total = 0.0;
  std::size_t task_patients = 0;
  std::size_t pairs = 0;
};

// Activations of one patient. Column t of U/A_v/V belongs to visit t.
struct PatientForward {
  VectorXd k, a_p, p;
  MatrixXd U, D_t, A_v, V;
};

inline PatientForward forward_patient(const ModelParams& P, const PatientEncoding& pe, bool log_counts) {
  PatientForward f;
  const auto T = static_cast<Eigen::Index>(pe.visits.size());
  const auto e = P.W_c.rows();
  f.k = intermediate_patient(pe, P, log_counts);
  if (P.W_p.rows() > 0) {
    f.a_p = detail::affine_concat(P.W_p, P.b_p, f.k, as_vector(pe.demo));
    f.p = f.a_p.unaryExpr(&relu);
  } else {
    f.a_p.resize(0);
    f.p.resize(0);
  }
  if (P.W_v.rows() == 0) return f;
  const auto dt = P.W_v.cols() - e;
  f.U.resize(e, T);
  f.D_t.resize(dt, T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto& ve = pe.visits[static_cast<std::size_t>(t)];
    f.U.col(t) = intermediate_visit(ve, P);
    if (static_cast<Eigen::Index>(ve.demo.size()) != dt) {
      throw std::invalid_argument("visit demographics have " + std::to_string(ve.demo.size()) + " entries, model expects " +
                                  std::to_string(dt));
    }
    f.D_t.col(t) = as_vector(ve.demo);
  }
  f.A_v = P.W_v.leftCols(e) * f.U + P.W_v.rightCols(dt) * f.D_t;
  f.A_v.colwise() += P.b_v;
  f.V = f.A_v.unaryExpr(&relu);
  return f;
}

namespace detail {

// dst += a * src over every tensor.
inline void axpy(ModelParams& dst, const ModelParams& src, double a = 1.0) {
  std::vector<ModelParams::TensorRef> s;
  src.for_each_tensor([&](ModelParams::TensorRef t) { s.push_back(t); });
  std::size_t i = 0;
  dst.for_each_tensor([&](ModelParams::TensorRef t) {
    const auto& o = s[i++];
    if (o.size() != t.size()) throw std::logic_error("axpy: shape mismatch on " + std::string(t.name));
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data[k] += a * o.data[k];
  });
}

inline double task_weight(Mode m) { return m == Mode::skipgram ? 0.0 : 1.0; }

// Task loss for one patient (already divided by T). Gradients scaled by
// `scale` are added to G when non-null.
inline double patient_task(const ModelParams& P, const PatientEncoding& pe, const ObjectiveConfig& cfg,
                           std::uint64_t stream_seed, double scale, ModelParams* G) {
  const std::size_t T = pe.visits.size();
  if (T < 2 || P.mode == Mode::skipgram) return 0.0;
  const auto e = P.W_c.rows();
  const auto hp = P.W_p.rows();
  const auto hv = P.W_v.rows();
  const auto C = P.W_c.cols();
  const double s = scale / static_cast<double>(T);

  PatientForward f = forward_patient(P, pe, cfg.log_counts);
  MatrixXd H(hp + hv, static_cast<Eigen::Index>(T));
  if (hp > 0) H.topRows(hp).colwise() = f.p;
  H.bottomRows(hv) = f.V;
  MatrixXd dH;
  if (G) dH = MatrixXd::Zero(H.rows(), H.cols());

  double loss = 0.0;
  if (P.mode == Mode::pv || P.mode == Mode::no_patient_vector) {
    MatrixXd Z = P.W_o * H;
    Z.colwise() += P.b_o;
    MatrixXd dZ;
    if (G) dZ.resize(C, static_cast<Eigen::Index>(T));
    VectorXd base_grad(C), g(C);
    for (std::size_t t = 0; t < T; ++t) {
      auto xh = Z.col(static_cast<Eigen::Index>(t));
      detail::softmax_inplace(xh);
      const auto nbrs = window_neighbors(t, T, cfg.window);
      // All codes as negatives first, then correct the active ones.
      double base = 0.0;
      for (Eigen::Index i = 0; i < C; ++i) {
        const double q = xh(i);
        const bool inside = q > kProbClamp && q < 1.0 - kProbClamp;
        const double qc = std::clamp(q, kProbClamp, 1.0 - kProbClamp);
        base -= std::log(1.0 - qc);
        base_grad(i) = inside ? 1.0 / (1.0 - q) : 0.0;
      }
      g = base_grad * static_cast<double>(nbrs.size());
      for (auto tau : nbrs) {
        loss += base;
        for (auto i : pe.visits[tau].active_ids) {
          const double q = xh(i);
          const bool inside = q > kProbClamp && q < 1.0 - kProbClamp;
          const double qc = std::clamp(q, kProbClamp, 1.0 - kProbClamp);
          loss += -std::log(qc) + std::log(1.0 - qc);
          if (inside) g(i) += -1.0 / q - 1.0 / (1.0 - q);
        }
      }
      if (G) dZ.col(static_cast<Eigen::Index>(t)) = xh.cwiseProduct((g.array() - xh.dot(g)).matrix()) * s;
    }
    if (G) {
      G->W_o.noalias() += dZ * H.transpose();
      G->b_o += dZ.rowwise().sum();
      dH.noalias() += P.W_o.transpose() * dZ;
    }
  } else {  // pv_plus
    Rng rng(stream_seed);
    const double gamma = cfg.ranking.margin;
    const auto k = cfg.ranking.k_negatives;
    for (std::size_t t = 0; t < T; ++t) {
      const auto tt = static_cast<Eigen::Index>(t);
      VectorXd q = P.W_s.tail(e);
      if (P.W_x.size() > 0) q.noalias() += P.W_x * H.col(tt);
      const double shared = P.b_s(0) + P.W_s.head(hp + hv).dot(H.col(tt));
      VectorXd dq = VectorXd::Zero(e);
      for (auto tau : window_neighbors(t, T, cfg.window)) {
        const auto& pos = pe.visits[tau].active_ids;
        const auto neg = sample_negatives(pos, static_cast<std::size_t>(C), k, rng, cfg.negative_cumweights);
        std::vector<double> sp(pos.size()), sn(neg.size());
        for (std::size_t m = 0; m < pos.size(); ++m) sp[m] = shared + P.W_c.col(pos[m]).dot(q);
        for (std::size_t n = 0; n < neg.size(); ++n) sn[n] = shared + P.W_c.col(neg[n]).dot(q);
        std::vector<int> pos_active(pos.size(), 0), neg_active(neg.size(), 0);
        for (std::size_t m = 0; m < pos.size(); ++m) {
          for (std::size_t n = 0; n < neg.size(); ++n) {
            const double h = gamma - sp[m] + sn[n];
            if (h > 0.0) {
              loss += h;
              ++pos_active[m];
              ++neg_active[n];
            }
          }
        }
        if (!G) continue;
        for (std::size_t m = 0; m < pos.size(); ++m) {
          if (pos_active[m] == 0) continue;
          dq.noalias() -= pos_active[m] * P.W_c.col(pos[m]);
          G->W_c.col(pos[m]).noalias() -= (pos_active[m] * s) * q;
        }
        for (std::size_t n = 0; n < neg.size(); ++n) {
          if (neg_active[n] == 0) continue;
          dq.noalias() += neg_active[n] * P.W_c.col(neg[n]);
          G->W_c.col(neg[n]).noalias() += (neg_active[n] * s) * q;
        }
      }
      if (G) {
        dq *= s;
        G->W_s.tail(e) += dq;
        if (P.W_x.size() > 0) {
          G->W_x.noalias() += dq * H.col(tt).transpose();
          dH.col(tt).noalias() += P.W_x.transpose() * dq;
        }
      }
    }
  }
  loss /= static_cast<double>(T);
  if (!G) return loss;

  // Visit pathway.
  const auto dt = P.W_v.cols() - e;
  MatrixXd dA_v = dH.bottomRows(hv).cwiseProduct((f.A_v.array() > 0.0).cast<double>().matrix());
  G->W_v.leftCols(e).noalias() += dA_v * f.U.transpose();
  G->W_v.rightCols(dt).noalias() += dA_v * f.D_t.transpose();
  G->b_v += dA_v.rowwise().sum();
  MatrixXd dU = P.W_v.leftCols(e).transpose() * dA_v;
  for (std::size_t t = 0; t < T; ++t) {
    const auto col = dU.col(static_cast<Eigen::Index>(t));
    for (auto j : pe.visits[t].active_ids) G->W_c.col(j) += col;
  }
  G->b_c += dU.rowwise().sum();

  // Patient pathway.
  if (hp > 0) {
    VectorXd dp = dH.topRows(hp).rowwise().sum();
    VectorXd da_p = dp.cwiseProduct((f.a_p.array() > 0.0).cast<double>().matrix());
    const auto dd = P.W_p.cols() - e;
    G->W_p.leftCols(e).noalias() += da_p * f.k.transpose();
    G->W_p.rightCols(dd).noalias() += da_p * as_vector(pe.demo).transpose();
    G->b_p += da_p;
    VectorXd dk = P.W_p.leftCols(e).transpose() * da_p;
    for (auto [j, c] : pe.counts) G->W_c.col(j) += count_weight(c, cfg.log_counts) * dk;
    G->b_c += dk;
  }
  return loss;
}

}  // namespace detail

// Number of fixed reduction shards. Results are bit-identical for any
// thread count because the shard layout does not depend on it.
inline constexpr std::size_t kGradShards = 4;

inline std::uint64_t patient_stream_seed(std::uint64_t stream_seed, const std::string& member_id) {
  return derive_seed(stream_seed, fnv1a(member_id));
}

// Loss (and, when grad is non-null, its exact gradient) over a batch of
// patients. `grad` is overwritten.
inline LossParts batch_objective(const ModelParams& P, std::span<const PatientEncoding* const> batch,
                                 const ObjectiveConfig& cfg, std::uint64_t stream_seed, ModelParams* grad,
                                 int threads = 1) {
  LossParts parts;
  for (const auto* pe : batch) {
    if (pe->visits.size() >= 2) ++parts.task_patients;
    for (const auto& v : pe->visits) {
      const auto m = v.active_ids.size();
      if (m >= 2) parts.pairs += m * (m - 1);
    }
  }
  const bool has_task = detail::task_weight(P.mode) > 0.0;
  if (!has_task) parts.task_patients = 0;
  const double sg_weight = P.mode == Mode::skipgram ? 1.0 : cfg.lambda;
  const double task_scale = parts.task_patients > 0 ? 1.0 / static_cast<double>(parts.task_patients) : 0.0;
  const double sg_scale = parts.pairs > 0 ? sg_weight / static_cast<double>(parts.pairs) : 0.0;

  struct Shard {
    double task = 0.0, sg = 0.0;
    ModelParams grad;
    std::exception_ptr error;
  };
  std::vector<Shard> shards(kGradShards);
  const std::size_t n = batch.size();
  auto run_shard = [&](std::size_t s) {
    try {
      Shard& sh = shards[s];
      if (grad) sh.grad = P.zeros_like();
      ModelParams* G = grad ? &sh.grad : nullptr;
      for (std::size_t i = s * n / kGradShards; i < (s + 1) * n / kGradShards; ++i) {
        const auto& pe = *batch[i];
        if (has_task && task_scale > 0.0) {
          sh.task += detail::patient_task(P, pe, cfg, patient_stream_seed(stream_seed, pe.member_id), task_scale, G);
        }
        for (const auto& v : pe.visits) {
          sh.sg += visit_skipgram_sum(v.active_ids, P.W_c, G && sg_scale > 0.0 ? &G->W_c : nullptr, sg_scale);
        }
      }
    } catch (...) {
      shards[s].error = std::current_exception();
    }
  };
  const auto workers = static_cast<std::size_t>(std::clamp(threads, 1, static_cast<int>(kGradShards)));
  if (workers == 1) {
    for (std::size_t s = 0; s < kGradShards; ++s) run_shard(s);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t s = w; s < kGradShards; s += workers) run_shard(s);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& sh : shards) {
    if (sh.error) std::rethrow_exception(sh.error);
  }

  if (grad) *grad = P.zeros_like();
  double task_sum = 0.0, sg_sum = 0.0;
  for (auto& sh : shards) {
    task_sum += sh.task;
    sg_sum += sh.sg;
    if (grad) detail::axpy(*grad, sh.grad);
  }
  parts.task = task_scale * task_sum;
  parts.skipgram = parts.pairs > 0 ? sg_sum / static_cast<double>(parts.pairs) : 0.0;
  parts.total = parts.task + sg_weight * parts.skipgram;
  return parts;
}

}  // namespace carevec
