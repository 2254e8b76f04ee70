#pragma once

// Minibatch training of the unified objective with Adam or SGD, global-norm
// clipping and early stopping on validation loss.

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "carevec/encoding.hpp"
#include "carevec/objective.hpp"

namespace carevec {

enum class Optimizer { adam, sgd };

inline std::string_view to_string(Optimizer o) { return o == Optimizer::adam ? "adam" : "sgd"; }

inline Optimizer parse_optimizer(std::string_view s) {
  if (s == "adam") return Optimizer::adam;
  if (s == "sgd") return Optimizer::sgd;
  throw std::invalid_argument("unknown optimizer '" + std::string(s) + "'");
}

struct TrainConfig {
  Mode mode = Mode::pv_plus;
  ScoreForm score_form = ScoreForm::bilinear;
  int minibatch = 100;
  int window = 1;
  double lambda = 1.0;
  int k_negatives = 10;
  double margin = 1.0;
  bool weighted_negatives = false;
  bool log_counts = false;
  std::size_t code_dim = 100;
  std::size_t visit_dim = 100;
  std::size_t patient_dim = 100;
  int epochs = 40;
  Optimizer optimizer = Optimizer::adam;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int patience = 5;        // <= 0 disables early stopping
  double clip_norm = 5.0;  // <= 0 disables clipping
  double init_scale = 0.05;
  std::uint64_t seed = 1;
  int threads = 1;
  bool record_time = false;  // wall time breaks byte-identical logs

  void validate() const {
    if (minibatch < 1) throw std::invalid_argument("minibatch must be >= 1");
    if (window < 1) throw std::invalid_argument("window must be >= 1");
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
    if (code_dim < 1 || visit_dim < 1 || patient_dim < 1) throw std::invalid_argument("dimensions must be >= 1");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (mode == Mode::pv_plus) {
      if (k_negatives < 1) throw std::invalid_argument("k_negatives must be >= 1");
      if (!(margin > 0.0)) throw std::invalid_argument("margin must be positive");
    }
  }

  ObjectiveConfig objective() const {
    ObjectiveConfig o;
    o.window = window;
    o.lambda = lambda;
    o.ranking.k_negatives = k_negatives;
    o.ranking.margin = margin;
    o.log_counts = log_counts;
    return o;
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"mode", to_string(c.mode)},
          {"score_form", to_string(c.score_form)},
          {"minibatch", c.minibatch},
          {"window", c.window},
          {"lambda", c.lambda},
          {"k_negatives", c.k_negatives},
          {"margin", c.margin},
          {"weighted_negatives", c.weighted_negatives},
          {"log_counts", c.log_counts},
          {"code_dim", c.code_dim},
          {"visit_dim", c.visit_dim},
          {"patient_dim", c.patient_dim},
          {"epochs", c.epochs},
          {"optimizer", to_string(c.optimizer)},
          {"learning_rate", c.learning_rate},
          {"patience", c.patience},
          {"clip_norm", c.clip_norm},
          {"init_scale", c.init_scale},
          {"seed", c.seed}};
}

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 1-based; 0 before any epoch
  double best_valid_loss = std::numeric_limits<double>::infinity();

  void write_csv(std::ostream& out) const {
    out << "epoch,train_loss,valid_loss,seconds\n";
    char buf[160];
    for (const auto& e : epochs) {
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.3f\n", e.epoch, e.train_loss, e.valid_loss, e.seconds);
      out << buf;
    }
  }

  void write_csv_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write training log '" + path + "'");
    write_csv(out);
  }
};

struct TrainResult {
  ModelParams params;  // best-validation parameters
  TrainLog log;
};

namespace detail {

inline double global_norm(const ModelParams& g) {
  double s = 0.0;
  g.for_each_tensor([&](ModelParams::TensorRef t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) s += t.data[i] * t.data[i];
  });
  return std::sqrt(s);
}

inline void scale(ModelParams& g, double a) {
  g.for_each_tensor([&](ModelParams::TensorRef t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] *= a;
  });
}

inline std::vector<ModelParams::TensorRef> tensors(ModelParams& P) {
  std::vector<ModelParams::TensorRef> out;
  P.for_each_tensor([&](ModelParams::TensorRef t) { out.push_back(t); });
  return out;
}

}  // namespace detail

class AdamState {
 public:
  explicit AdamState(const ModelParams& like) : m_(like.zeros_like()), v_(like.zeros_like()) {}

  void step(ModelParams& P, ModelParams& g, const TrainConfig& cfg) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
    auto p = detail::tensors(P), gr = detail::tensors(g), m = detail::tensors(m_), v = detail::tensors(v_);
    for (std::size_t k = 0; k < p.size(); ++k) {
      for (Eigen::Index i = 0; i < p[k].size(); ++i) {
        const double gi = gr[k].data[i];
        m[k].data[i] = cfg.beta1 * m[k].data[i] + (1.0 - cfg.beta1) * gi;
        v[k].data[i] = cfg.beta2 * v[k].data[i] + (1.0 - cfg.beta2) * gi * gi;
        p[k].data[i] -= cfg.learning_rate * (m[k].data[i] / c1) / (std::sqrt(v[k].data[i] / c2) + cfg.adam_eps);
      }
    }
  }

 private:
  ModelParams m_, v_;
  long t_ = 0;
};

// Unigram frequencies of the training codes, as a cumulative table.
inline std::vector<double> negative_weights(std::span<const PatientEncoding> train, std::size_t vocab_size) {
  std::vector<double> w(vocab_size, 0.0);
  for (const auto& p : train) {
    for (auto [id, c] : p.counts) w[static_cast<std::size_t>(id)] += c;
  }
  std::partial_sum(w.begin(), w.end(), w.begin());
  return w;
}

inline ModelDims model_dims(const TrainConfig& cfg, const Vocabulary& vocab) {
  ModelDims d;
  d.codes = vocab.size();
  d.code_dim = cfg.code_dim;
  d.visit_dim = cfg.visit_dim;
  d.patient_dim = cfg.patient_dim;
  d.visit_demo = vocab.visit_demo_dim();
  d.patient_demo = kPatientDemoDim;
  return d;
}

// Loss of the whole set in batches of `minibatch`, averaged over batches.
inline double dataset_loss(const ModelParams& P, std::span<const PatientEncoding> data, const ObjectiveConfig& obj,
                           std::size_t minibatch, std::uint64_t stream_seed, int threads) {
  if (data.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<const PatientEncoding*> ptrs;
  for (const auto& p : data) ptrs.push_back(&p);
  double sum = 0.0;
  std::size_t batches = 0;
  for (std::size_t b = 0; b < ptrs.size(); b += minibatch) {
    const auto n = std::min(minibatch, ptrs.size() - b);
    sum += batch_objective(P, std::span(ptrs).subspan(b, n), obj, derive_seed(stream_seed, b), nullptr, threads).total;
    ++batches;
  }
  return sum / static_cast<double>(batches);
}

// Deterministic given cfg.seed: initialization, epoch shuffles and negative
// streams are all derived from it. Returns the parameters of the epoch with
// the lowest validation loss (training loss if there is no validation set).
inline TrainResult train(std::span<const PatientEncoding> train_set, std::span<const PatientEncoding> valid_set,
                         const Vocabulary& vocab, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty()) throw DataError("training split is empty");
  ObjectiveConfig obj = cfg.objective();
  if (cfg.weighted_negatives) obj.negative_cumweights = negative_weights(train_set, vocab.size());

  ModelParams P = init_params(cfg.mode, model_dims(cfg, vocab), cfg.seed, cfg.score_form, cfg.init_scale);
  AdamState adam(P);
  ModelParams grad;
  TrainResult result;
  result.params = P;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const auto mb = static_cast<std::size_t>(cfg.minibatch);
  const std::uint64_t valid_stream = derive_seed_str(cfg.seed, "valid");
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng shuffle(derive_seed(derive_seed_str(cfg.seed, "shuffle"), static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(shuffle, i)]);

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    std::vector<const PatientEncoding*> batch;
    for (std::size_t b = 0; b < order.size(); b += mb) {
      batch.clear();
      for (std::size_t i = b; i < std::min(order.size(), b + mb); ++i) batch.push_back(&train_set[order[i]]);
      const auto stream = derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch), b / mb);
      const LossParts parts = batch_objective(P, batch, obj, stream, &grad, cfg.threads);
      if (!std::isfinite(parts.total) || !grad.all_finite()) {
        std::ostringstream msg;
        msg << "non-finite loss in epoch " << epoch << ", batch " << b / mb << " (first member "
            << batch.front()->member_id << ", task " << parts.task << ", skip-gram " << parts.skipgram << ")";
        throw NumericalError(msg.str());
      }
      if (cfg.clip_norm > 0.0) {
        const double norm = detail::global_norm(grad);
        if (norm > cfg.clip_norm) detail::scale(grad, cfg.clip_norm / norm);
      }
      if (cfg.optimizer == Optimizer::adam) {
        adam.step(P, grad, cfg);
      } else {
        detail::axpy(P, grad, -cfg.learning_rate);
      }
      epoch_loss += parts.total;
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(batches);
    rec.valid_loss = valid_set.empty() ? rec.train_loss : dataset_loss(P, valid_set, obj, mb, valid_stream, cfg.threads);
    if (!std::isfinite(rec.valid_loss)) {
      throw NumericalError("non-finite validation loss after epoch " + std::to_string(epoch));
    }
    if (cfg.record_time) {
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    result.log.epochs.push_back(rec);

    if (rec.valid_loss < result.log.best_valid_loss) {
      result.log.best_valid_loss = rec.valid_loss;
      result.log.best_epoch = epoch;
      result.params = P;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

struct GridResult {
  std::size_t best_index = 0;
  TrainResult best;
  std::vector<double> valid_losses;  // best validation loss per config
};

// Trains every config; the lowest best-validation loss wins, earlier configs
// win ties.
inline GridResult grid_select(std::span<const TrainConfig> configs, std::span<const PatientEncoding> train_set,
                              std::span<const PatientEncoding> valid_set, const Vocabulary& vocab) {
  if (configs.empty()) throw std::invalid_argument("grid_select needs at least one config");
  GridResult out;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    auto r = train(train_set, valid_set, vocab, configs[i]);
    out.valid_losses.push_back(r.log.best_valid_loss);
    if (i == 0 || r.log.best_valid_loss < out.best.log.best_valid_loss) {
      out.best_index = i;
      out.best = std::move(r);
    }
  }
  return out;
}

}  // namespace carevec
