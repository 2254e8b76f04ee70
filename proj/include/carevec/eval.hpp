#pragma once

// Evaluation protocol: representations, ridge regression on log cost,
// R^2 / RMSE over several split seeds, top-p% high-risk selection and the
// visit-level cost tasks.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "carevec/claims.hpp"
#include "carevec/objective.hpp"

namespace carevec {

// Row i belongs to members[i].
struct Representation {
  std::string kind;
  std::vector<std::string> members;
  Eigen::MatrixXd vectors;

  Eigen::Index dim() const { return vectors.cols(); }
};

inline std::vector<std::string> member_ids(std::span<const PatientEncoding> cohort) {
  std::vector<std::string> ids;
  ids.reserve(cohort.size());
  for (const auto& p : cohort) ids.push_back(p.member_id);
  return ids;
}

// p for every patient; the forward pass is deterministic.
inline Representation extract_patient_vectors(const ModelParams& P, std::span<const PatientEncoding> cohort,
                                              bool log_counts = false) {
  if (P.W_p.rows() == 0) throw std::invalid_argument("model has no patient vector");
  Representation r{std::string(to_string(P.mode)), member_ids(cohort), Eigen::MatrixXd(cohort.size(), P.W_p.rows())};
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const VectorXd k = intermediate_patient(cohort[i], P, log_counts);
    r.vectors.row(static_cast<Eigen::Index>(i)) = patient_repr(k, cohort[i].demo, P).transpose();
  }
  return r;
}

inline Representation raw_count_vectors(std::span<const PatientEncoding> cohort, std::size_t vocab_size) {
  Representation r{"raw_count", member_ids(cohort), Eigen::MatrixXd::Zero(cohort.size(), vocab_size)};
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    for (auto [id, c] : cohort[i].counts) r.vectors(static_cast<Eigen::Index>(i), id) = c;
  }
  return r;
}

// Sum of code vectors over every code instance.
inline Representation skipgram_sum_vectors(std::span<const PatientEncoding> cohort, const MatrixXd& W_c) {
  Representation r{"skipgram_sum", member_ids(cohort), Eigen::MatrixXd::Zero(cohort.size(), W_c.rows())};
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    for (auto [id, c] : cohort[i].counts) r.vectors.row(static_cast<Eigen::Index>(i)) += c * W_c.col(id).transpose();
  }
  return r;
}

// Sum of visit vectors v_t.
inline Representation med2vec_like_vectors(const ModelParams& P, std::span<const PatientEncoding> cohort) {
  if (P.W_v.rows() == 0) throw std::invalid_argument("model has no visit pathway");
  Representation r{"med2vec_like", member_ids(cohort), Eigen::MatrixXd::Zero(cohort.size(), P.W_v.rows())};
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    for (const auto& v : cohort[i].visits) {
      r.vectors.row(static_cast<Eigen::Index>(i)) += visit_repr(intermediate_visit(v, P), v.demo, P).transpose();
    }
  }
  return r;
}

// Zero-width representation: Task 2 then reduces to the prior-cost baseline.
inline Representation empty_representation(std::span<const PatientEncoding> cohort) {
  return {"empty", member_ids(cohort), Eigen::MatrixXd(cohort.size(), 0)};
}

inline Representation concat(const Representation& a, const Representation& b) {
  if (a.members != b.members) throw std::invalid_argument("concat: representations cover different members");
  Representation r{a.kind + "+" + b.kind, a.members, Eigen::MatrixXd(a.vectors.rows(), a.dim() + b.dim())};
  r.vectors << a.vectors, b.vectors;
  return r;
}

inline double log_cost(double cost) {
  if (cost < 0.0 || std::isnan(cost)) throw DataError("log_cost: negative cost " + std::to_string(cost));
  return std::log1p(cost);
}

// ---- ridge ------------------------------------------------------------------

struct RidgeModel {
  VectorXd coef;
  double intercept = 0.0;
  double alpha = 0.0;

  VectorXd predict(const MatrixXd& X) const { return (X * coef).array() + intercept; }
};

// Minimizes ||y - X w - b||^2 + alpha ||w||^2 with an unpenalized intercept.
inline RidgeModel ridge_fit(const MatrixXd& X, const VectorXd& y, double alpha) {
  if (X.rows() != y.size()) throw std::invalid_argument("ridge_fit: row count mismatch");
  if (X.rows() < 2) throw std::invalid_argument("ridge_fit: need at least 2 samples");
  if (!(alpha >= 0.0)) throw std::invalid_argument("ridge_fit: alpha must be >= 0");
  RidgeModel m;
  m.alpha = alpha;
  const VectorXd mean = X.colwise().mean();
  const double ybar = y.mean();
  if (X.cols() == 0) {
    m.coef.resize(0);
    m.intercept = ybar;
    return m;
  }
  const MatrixXd Xc = X.rowwise() - mean.transpose();
  const VectorXd yc = y.array() - ybar;
  if (alpha == 0.0) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(Xc);
    if (qr.rank() < Xc.cols()) throw DataError("ridge_fit: singular system at alpha = 0; use alpha > 0");
    m.coef = qr.solve(yc);
  } else {
    MatrixXd A = Xc.transpose() * Xc;
    A.diagonal().array() += alpha;
    m.coef = A.ldlt().solve(Xc.transpose() * yc);
  }
  m.intercept = ybar - mean.dot(m.coef);
  return m;
}

inline double r_squared(const VectorXd& pred, const VectorXd& actual) {
  if (pred.size() != actual.size() || actual.size() < 2) throw std::invalid_argument("r_squared: need equal lengths >= 2");
  const double mean = actual.mean();
  const double ss_tot = (actual.array() - mean).square().sum();
  if (ss_tot == 0.0) throw DataError("r_squared: actual values are all identical");
  return 1.0 - (pred - actual).squaredNorm() / ss_tot;
}

inline double rmse(const VectorXd& pred, const VectorXd& actual) {
  if (pred.size() != actual.size() || actual.size() < 1) throw std::invalid_argument("rmse: need equal non-empty lengths");
  return std::sqrt((pred - actual).squaredNorm() / static_cast<double>(actual.size()));
}

inline const std::vector<double>& default_alpha_grid() {
  static const std::vector<double> grid{0.01, 0.1, 1.0, 10.0};
  return grid;
}

// Per-column z-scoring with training statistics; constant columns get scale 1.
struct Standardizer {
  VectorXd mean, scale;

  static Standardizer fit(const MatrixXd& X) {
    Standardizer s;
    s.mean = X.colwise().mean();
    s.scale.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double var = (X.col(j).array() - s.mean(j)).square().mean();
      s.scale(j) = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
    return s;
  }

  MatrixXd apply(const MatrixXd& X) const {
    return (X.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  }
};

// Ridge over standardized features with alpha picked by validation R^2
// (earlier grid entries win ties).
struct FittedRegressor {
  Standardizer standardizer;
  RidgeModel model;

  VectorXd predict(const MatrixXd& X) const { return model.predict(standardizer.apply(X)); }

  // Coefficients and intercept on the unstandardized feature scale.
  VectorXd raw_coef() const { return model.coef.array() / standardizer.scale.array(); }
  double raw_intercept() const { return model.intercept - standardizer.mean.dot(raw_coef()); }
};

inline FittedRegressor fit_selected(const MatrixXd& Xtr, const VectorXd& ytr, const MatrixXd& Xva, const VectorXd& yva,
                                    const std::vector<double>& grid = default_alpha_grid()) {
  if (grid.empty()) throw std::invalid_argument("alpha grid is empty");
  FittedRegressor out;
  out.standardizer = Standardizer::fit(Xtr);
  const MatrixXd Ztr = out.standardizer.apply(Xtr);
  const MatrixXd Zva = out.standardizer.apply(Xva);
  double best = -std::numeric_limits<double>::infinity();
  for (double a : grid) {
    auto m = ridge_fit(Ztr, ytr, a);
    const double r2 = r_squared(m.predict(Zva), yva);
    if (r2 > best) {
      best = r2;
      out.model = std::move(m);
    }
  }
  return out;
}

// ---- tasks ------------------------------------------------------------------

struct SeedMetrics {
  std::uint64_t seed = 0;
  double r2 = 0.0;
  double rmse = 0.0;
  double alpha = 0.0;
};

struct TaskMetrics {
  std::string task;
  std::string representation;
  std::vector<SeedMetrics> per_seed;
  double r2_mean = 0.0, r2_std = 0.0, rmse_mean = 0.0, rmse_std = 0.0;
};

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

inline MatrixXd take_rows(const MatrixXd& X, const std::vector<std::size_t>& idx) {
  MatrixXd out(static_cast<Eigen::Index>(idx.size()), X.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

inline VectorXd take(const VectorXd& y, const std::vector<std::size_t>& idx) {
  VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(idx[i]));
  return out;
}

// Fits and scores one feature matrix on the 7:1:2 split of every seed.
// `groups` (optional) maps rows to patients so that all rows of one patient
// land in the same split part.
struct RegressionRun {
  TaskMetrics metrics;
  std::vector<FittedRegressor> models;                  // one per seed
  std::vector<std::vector<std::size_t>> test_rows;      // one per seed
  std::vector<VectorXd> test_predictions;               // one per seed
};

inline RegressionRun run_regression(const std::string& task, const std::string& rep_kind, const MatrixXd& X,
                                    const VectorXd& y, std::span<const std::uint64_t> seeds,
                                    const std::vector<std::size_t>& groups = {}, SplitRatios ratios = {}) {
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  RegressionRun run;
  run.metrics.task = task;
  run.metrics.representation = rep_kind;
  const std::size_t n_groups = groups.empty() ? static_cast<std::size_t>(X.rows())
                                              : *std::max_element(groups.begin(), groups.end()) + 1;
  std::vector<double> r2s, rmses;
  for (auto seed : seeds) {
    auto parts = split_indices(n_groups, ratios, seed);
    auto rows = [&](const std::vector<std::size_t>& g) {
      if (groups.empty()) return g;
      std::vector<char> in(n_groups, 0);
      for (auto i : g) in[i] = 1;
      std::vector<std::size_t> out;
      for (std::size_t r = 0; r < groups.size(); ++r) {
        if (in[groups[r]]) out.push_back(r);
      }
      return out;
    };
    const auto tr = rows(parts.train), va = rows(parts.valid), te = rows(parts.test);
    auto fitted = fit_selected(take_rows(X, tr), take(y, tr), take_rows(X, va), take(y, va));
    VectorXd pred = fitted.predict(take_rows(X, te));
    const VectorXd actual = take(y, te);
    SeedMetrics sm{seed, r_squared(pred, actual), rmse(pred, actual), fitted.model.alpha};
    r2s.push_back(sm.r2);
    rmses.push_back(sm.rmse);
    run.metrics.per_seed.push_back(sm);
    run.models.push_back(std::move(fitted));
    run.test_rows.push_back(te);
    run.test_predictions.push_back(std::move(pred));
  }
  std::tie(run.metrics.r2_mean, run.metrics.r2_std) = mean_std(r2s);
  std::tie(run.metrics.rmse_mean, run.metrics.rmse_std) = mean_std(rmses);
  return run;
}

inline void check_aligned(const Representation& rep, std::span<const PatientEncoding> cohort) {
  if (static_cast<std::size_t>(rep.vectors.rows()) != cohort.size()) {
    throw std::invalid_argument("representation and cohort sizes differ");
  }
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    if (rep.members[i] != cohort[i].member_id) throw std::invalid_argument("representation rows are not aligned with the cohort");
  }
}

// Task 1: representation -> log cost of the training window.
inline RegressionRun task_current_cost(const Representation& rep, std::span<const PatientEncoding> cohort,
                                       std::span<const std::uint64_t> seeds) {
  check_aligned(rep, cohort);
  VectorXd y(static_cast<Eigen::Index>(cohort.size()));
  for (std::size_t i = 0; i < cohort.size(); ++i) y(static_cast<Eigen::Index>(i)) = log_cost(cohort[i].window_cost);
  return run_regression("current_cost", rep.kind, rep.vectors, y, seeds);
}

// Task 2: representation + log prior-window cost -> log holdout-year cost.
inline RegressionRun task_next_cost(const Representation& rep, std::span<const PatientEncoding> cohort,
                                    std::span<const std::uint64_t> seeds) {
  check_aligned(rep, cohort);
  MatrixXd X(rep.vectors.rows(), rep.dim() + 1);
  VectorXd y(static_cast<Eigen::Index>(cohort.size()));
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    X.row(r).head(rep.dim()) = rep.vectors.row(r);
    X(r, rep.dim()) = log_cost(cohort[i].window_cost);
    y(r) = log_cost(cohort[i].holdout_cost);
  }
  return run_regression("next_cost", rep.kind, X, y, seeds);
}

struct SelectionRow {
  double percent = 0.0;
  std::size_t selected = 0;
  double mean_actual = 0.0;
};

inline const std::vector<double>& default_percentiles() {
  static const std::vector<double> p{0.5, 1.0, 5.0, 10.0, 50.0};
  return p;
}

// For each p, the mean actual cost of the top p% by predicted cost. Ties in
// the prediction are broken by member id.
inline std::vector<SelectionRow> high_risk_selection(const VectorXd& predicted, const VectorXd& actual,
                                                     const std::vector<std::string>& members,
                                                     const std::vector<double>& percents = default_percentiles()) {
  const auto n = static_cast<std::size_t>(predicted.size());
  if (actual.size() != predicted.size() || members.size() != n) throw std::invalid_argument("high_risk_selection: size mismatch");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
    if (predicted(ia) != predicted(ib)) return predicted(ia) > predicted(ib);
    return members[a] < members[b];
  });
  std::vector<SelectionRow> out;
  for (double p : percents) {
    if (!(p > 0.0) || p > 100.0) throw std::invalid_argument("percentiles must be in (0, 100]");
    const double exact = p / 100.0 * static_cast<double>(n);
    if (exact < 1.0) {
      throw DataError("top " + std::to_string(p) + "% of " + std::to_string(n) + " patients is less than one patient");
    }
    const auto k = static_cast<std::size_t>(std::floor(exact + 0.5));
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += actual(static_cast<Eigen::Index>(order[i]));
    out.push_back({p, k, sum / static_cast<double>(k)});
  }
  return out;
}

// Mean and std (over `rounds` random orderings) of the mean actual cost of a
// randomly selected group of `k` patients.
inline std::pair<double, double> random_selection_bootstrap(const VectorXd& actual, std::size_t k, int rounds,
                                                            std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(actual.size());
  if (k < 1 || k > n) throw std::invalid_argument("random_selection_bootstrap: bad group size");
  Rng rng(derive_seed_str(seed, "bootstrap"));
  std::vector<std::size_t> order(n);
  std::vector<double> means;
  for (int r = 0; r < rounds; ++r) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < k; ++i) std::swap(order[i], order[i + uniform_index(rng, n - i)]);
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += actual(static_cast<Eigen::Index>(order[i]));
    means.push_back(s / static_cast<double>(k));
  }
  return mean_std(means);
}

// Task 3 over the Task-2 regressions: selection table per seed, averaged.
struct HighRiskReport {
  std::vector<double> percents;
  std::vector<std::vector<SelectionRow>> per_seed;
  std::vector<double> mean_actual;      // per percent, mean over seeds
  std::vector<double> population_mean;  // per seed, mean actual test cost
};

inline HighRiskReport high_risk_report(const RegressionRun& next_cost_run, std::span<const PatientEncoding> cohort,
                                       const std::vector<double>& percents = default_percentiles()) {
  HighRiskReport rep;
  rep.percents = percents;
  rep.mean_actual.assign(percents.size(), 0.0);
  for (std::size_t s = 0; s < next_cost_run.test_rows.size(); ++s) {
    const auto& rows = next_cost_run.test_rows[s];
    VectorXd actual(static_cast<Eigen::Index>(rows.size()));
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      actual(static_cast<Eigen::Index>(i)) = cohort[rows[i]].holdout_cost;
      ids.push_back(cohort[rows[i]].member_id);
    }
    auto table = high_risk_selection(next_cost_run.test_predictions[s], actual, ids, percents);
    for (std::size_t p = 0; p < table.size(); ++p) rep.mean_actual[p] += table[p].mean_actual;
    rep.population_mean.push_back(actual.mean());
    rep.per_seed.push_back(std::move(table));
  }
  for (auto& m : rep.mean_actual) m /= static_cast<double>(rep.per_seed.size());
  return rep;
}

// Visit-level tasks on v_t: current visit cost and next visit cost. Splits
// are by patient.
inline std::pair<RegressionRun, RegressionRun> visit_cost_tasks(const ModelParams& P,
                                                                std::span<const PatientEncoding> cohort,
                                                                std::span<const std::uint64_t> seeds) {
  if (P.W_v.rows() == 0) throw std::invalid_argument("model has no visit pathway");
  std::vector<VectorXd> feats;
  std::vector<double> cur;
  std::vector<std::size_t> cur_group;
  std::vector<std::size_t> next_rows, next_group;
  std::vector<double> next;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto& vs = cohort[i].visits;
    for (std::size_t t = 0; t < vs.size(); ++t) {
      feats.push_back(visit_repr(intermediate_visit(vs[t], P), vs[t].demo, P));
      cur.push_back(log_cost(vs[t].cost));
      cur_group.push_back(i);
      if (t + 1 < vs.size()) {
        next_rows.push_back(feats.size() - 1);
        next.push_back(log_cost(vs[t + 1].cost));
        next_group.push_back(i);
      }
    }
  }
  MatrixXd X(static_cast<Eigen::Index>(feats.size()), P.W_v.rows());
  for (std::size_t r = 0; r < feats.size(); ++r) X.row(static_cast<Eigen::Index>(r)) = feats[r].transpose();
  const VectorXd y_cur = Eigen::Map<const VectorXd>(cur.data(), static_cast<Eigen::Index>(cur.size()));
  const VectorXd y_next = Eigen::Map<const VectorXd>(next.data(), static_cast<Eigen::Index>(next.size()));
  auto current = run_regression("visit_current_cost", "visit_vector", X, y_cur, seeds, cur_group);
  auto following = run_regression("visit_next_cost", "visit_vector", take_rows(X, next_rows), y_next, seeds, next_group);
  return {std::move(current), std::move(following)};
}

// ---- reports ----------------------------------------------------------------

inline nlohmann::json to_json(const TaskMetrics& m) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& s : m.per_seed) per.push_back({{"seed", s.seed}, {"r2", s.r2}, {"rmse", s.rmse}, {"alpha", s.alpha}});
  return {{"task", m.task},
          {"representation", m.representation},
          {"r2_mean", m.r2_mean},
          {"r2_std", m.r2_std},
          {"rmse_mean", m.rmse_mean},
          {"rmse_std", m.rmse_std},
          {"per_seed", per}};
}

struct EvalReport {
  std::string representation;
  std::vector<std::uint64_t> seeds;
  std::vector<TaskMetrics> tasks;
  HighRiskReport high_risk;

  nlohmann::json to_json() const {
    nlohmann::json t = nlohmann::json::array();
    for (const auto& m : tasks) t.push_back(carevec::to_json(m));
    nlohmann::json hr = nlohmann::json::array();
    for (std::size_t p = 0; p < high_risk.percents.size(); ++p) {
      nlohmann::json per = nlohmann::json::array();
      for (std::size_t s = 0; s < high_risk.per_seed.size(); ++s) {
        per.push_back({{"seed", seeds[s]},
                       {"selected", high_risk.per_seed[s][p].selected},
                       {"mean_actual_cost", high_risk.per_seed[s][p].mean_actual}});
      }
      hr.push_back({{"percent", high_risk.percents[p]}, {"mean_actual_cost", high_risk.mean_actual[p]}, {"per_seed", per}});
    }
    // Whether the selected-group cost falls as p grows; recorded, not enforced.
    bool monotone = true;
    for (std::size_t p = 1; p < high_risk.mean_actual.size(); ++p) {
      monotone = monotone && high_risk.mean_actual[p] <= high_risk.mean_actual[p - 1];
    }
    return {{"representation", representation},
            {"seeds", seeds},
            {"tasks", t},
            {"high_risk", hr},
            {"high_risk_monotone", monotone},
            {"population_mean_cost", mean_std(high_risk.population_mean).first}};
  }

  void write_metrics_csv(std::ostream& out) const {
    out << "task,representation,seed,r2,rmse,alpha\n";
    char buf[256];
    for (const auto& m : tasks) {
      for (const auto& s : m.per_seed) {
        std::snprintf(buf, sizeof buf, "%s,%s,%llu,%.10g,%.10g,%g\n", m.task.c_str(), m.representation.c_str(),
                      static_cast<unsigned long long>(s.seed), s.r2, s.rmse, s.alpha);
        out << buf;
      }
    }
  }

  void write_high_risk_csv(std::ostream& out) const {
    out << "percent,seed,selected,mean_actual_cost\n";
    char buf[160];
    for (std::size_t p = 0; p < high_risk.percents.size(); ++p) {
      for (std::size_t s = 0; s < high_risk.per_seed.size(); ++s) {
        std::snprintf(buf, sizeof buf, "%g,%llu,%zu,%.10g\n", high_risk.percents[p],
                      static_cast<unsigned long long>(seeds[s]), high_risk.per_seed[s][p].selected,
                      high_risk.per_seed[s][p].mean_actual);
        out << buf;
      }
    }
  }
};

// Linear cost regressor on raw (unstandardized) patient-vector features,
// consumed by the influential-coordinate analysis.
inline nlohmann::json regressor_json(const FittedRegressor& f, const std::string& rep_kind, const std::string& task) {
  const VectorXd w = f.raw_coef();
  return {{"representation", rep_kind},
          {"task", task},
          {"alpha", f.model.alpha},
          {"coef", std::vector<double>(w.data(), w.data() + w.size())},
          {"intercept", f.raw_intercept()}};
}

}  // namespace carevec
