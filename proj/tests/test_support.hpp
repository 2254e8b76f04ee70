#pragma once

// Shared fixtures for the unit tests: tiny hand-built cohorts, random
// parameter fills, and the central finite-difference oracle.

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <unistd.h>

#include "carevec/objective.hpp"

namespace carevec::testing {

inline VisitEncoding visit(std::vector<CodeId> ids, std::vector<double> demo) {
  VisitEncoding v;
  v.active_ids = std::move(ids);
  v.demo = std::move(demo);
  return v;
}

inline PatientEncoding patient(std::string id, std::vector<VisitEncoding> visits, std::vector<double> demo) {
  PatientEncoding p;
  p.member_id = std::move(id);
  p.visits = std::move(visits);
  p.demo = std::move(demo);
  std::map<CodeId, int> counts;
  for (const auto& v : p.visits) {
    for (auto c : v.active_ids) ++counts[c];
  }
  p.counts.assign(counts.begin(), counts.end());
  return p;
}

// Two patients over |C| = 6 with 3-dim visit demographics.
inline std::vector<PatientEncoding> tiny_cohort() {
  return {
      patient("a",
              {visit({0, 1, 2}, {1, 0, 0}), visit({1, 3}, {0, 1, 0}), visit({2, 4, 5}, {0, 0, 1}),
               visit({0, 5}, {1, 0, 0})},
              {0.12, 1, 0, 0}),
      patient("b", {visit({3, 4}, {0, 1, 0}), visit({0, 2, 3}, {0, 0, 1}), visit({1, 5}, {1, 0, 0})},
              {0.07, 0, 1, 0}),
  };
}

inline ModelDims tiny_dims() {
  ModelDims d;
  d.codes = 6;
  d.code_dim = 4;
  d.visit_dim = 3;
  d.patient_dim = 3;
  d.visit_demo = 3;
  d.patient_demo = kPatientDemoDim;
  return d;
}

// Every entry (biases included) uniform in (-scale, scale).
inline void randomize(ModelParams& P, std::uint64_t seed, double scale) {
  Rng rng(seed);
  P.for_each_tensor([&](ModelParams::TensorRef t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] = (2.0 * uniform01(rng) - 1.0) * scale;
  });
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst_tensor;
};

// Central differences of `loss` against `analytic`, tensor by tensor.
// Relative error |a - n| / max(|a|, |n|, floor).
inline GradCheck finite_difference_check(ModelParams P, const ModelParams& analytic,
                                         const std::function<double(const ModelParams&)>& loss, double eps = 1e-5,
                                         double floor = 1e-6) {
  std::vector<ModelParams::TensorRef> grads;
  analytic.for_each_tensor([&](ModelParams::TensorRef t) { grads.push_back(t); });
  std::vector<ModelParams::TensorRef> params;
  P.for_each_tensor([&](ModelParams::TensorRef t) { params.push_back(t); });
  GradCheck out;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (Eigen::Index i = 0; i < params[k].size(); ++i) {
      const double orig = params[k].data[i];
      params[k].data[i] = orig + eps;
      const double up = loss(P);
      params[k].data[i] = orig - eps;
      const double down = loss(P);
      params[k].data[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = grads[k].data[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst_tensor = std::string(params[k].name) + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

inline std::vector<const PatientEncoding*> pointers(const std::vector<PatientEncoding>& v) {
  std::vector<const PatientEncoding*> out;
  for (const auto& p : v) out.push_back(&p);
  return out;
}

// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("carevec_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

}  // namespace carevec::testing
