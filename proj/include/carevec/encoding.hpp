#pragma once

// Vocabulary and sparse encodings: binary visit vectors, patient count
// vectors, and the demographic feature blocks.

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "carevec/claims.hpp"
#include "carevec/core.hpp"

namespace carevec {

using CodeId = std::int32_t;

// Patient demographic layout: [age / 100, F, M, O]. Unknown sex leaves the
// one-hot slots at zero.
inline constexpr std::size_t kPatientDemoDim = 4;

class Vocabulary {
 public:
  Vocabulary() = default;

  // Ids follow lexicographic order of the code strings.
  Vocabulary(std::vector<std::string> codes, std::vector<std::string> places, std::vector<std::string> categories)
      : id_to_code_(std::move(codes)), places_(std::move(places)), categories_(std::move(categories)) {
    std::sort(id_to_code_.begin(), id_to_code_.end());
    id_to_code_.erase(std::unique(id_to_code_.begin(), id_to_code_.end()), id_to_code_.end());
    std::sort(places_.begin(), places_.end());
    places_.erase(std::unique(places_.begin(), places_.end()), places_.end());
    std::sort(categories_.begin(), categories_.end());
    categories_.erase(std::unique(categories_.begin(), categories_.end()), categories_.end());
    for (std::size_t i = 0; i < id_to_code_.size(); ++i) code_to_id_[id_to_code_[i]] = static_cast<CodeId>(i);
  }

  std::size_t size() const { return id_to_code_.size(); }

  std::optional<CodeId> find(const std::string& code) const {
    auto it = code_to_id_.find(code);
    if (it == code_to_id_.end()) return std::nullopt;
    return it->second;
  }

  CodeId id(const std::string& code) const {
    auto found = find(code);
    if (!found) throw DataError("code '" + code + "' is not in the vocabulary");
    return *found;
  }

  const std::string& code(CodeId id) const { return id_to_code_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& codes() const { return id_to_code_; }
  const std::vector<std::string>& places() const { return places_; }
  const std::vector<std::string>& categories() const { return categories_; }

  std::size_t visit_demo_dim() const { return places_.size() + categories_.size(); }

  // Content hash over codes and category lists; checkpoints carry it.
  std::uint64_t hash() const {
    std::uint64_t h = fnv1a("carevec-vocab");
    for (const auto& c : id_to_code_) h = fnv1a(c + '\n', h);
    h = fnv1a("#places\n", h);
    for (const auto& c : places_) h = fnv1a(c + '\n', h);
    h = fnv1a("#categories\n", h);
    for (const auto& c : categories_) h = fnv1a(c + '\n', h);
    return h;
  }

  // One code per line; the line number is the id.
  void save_codes(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write vocabulary '" + path + "'");
    for (const auto& c : id_to_code_) out << c << '\n';
  }

  static std::vector<std::string> load_codes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vocabulary '" + path + "'");
    std::vector<std::string> codes;
    std::string line;
    while (std::getline(in, line)) codes.push_back(line);
    return codes;
  }

 private:
  std::vector<std::string> id_to_code_;
  std::unordered_map<std::string, CodeId> code_to_id_;
  std::vector<std::string> places_;
  std::vector<std::string> categories_;
};

inline Vocabulary build_vocabulary(const std::vector<PatientRecord>& cohort) {
  if (cohort.empty()) throw DataError("cannot build a vocabulary from an empty cohort");
  std::set<std::string> codes, places, categories;
  for (const auto& r : cohort) {
    for (const auto& v : r.visits) {
      codes.insert(v.codes.begin(), v.codes.end());
      if (!v.place_of_service.empty()) places.insert(v.place_of_service);
      if (!v.visit_category.empty()) categories.insert(v.visit_category);
    }
  }
  return Vocabulary({codes.begin(), codes.end()}, {places.begin(), places.end()},
                    {categories.begin(), categories.end()});
}

struct VisitEncoding {
  std::vector<CodeId> active_ids;  // strictly increasing
  std::vector<double> demo;
  double cost = 0.0;
};

struct PatientEncoding {
  std::string member_id;
  std::vector<std::pair<CodeId, int>> counts;  // sorted by id, values >= 1
  std::vector<double> demo;
  std::vector<VisitEncoding> visits;
  double window_cost = 0.0;
  double holdout_cost = 0.0;

  std::size_t total_instances() const {
    std::size_t n = 0;
    for (auto [id, c] : counts) n += static_cast<std::size_t>(c);
    return n;
  }
};

inline std::vector<double> demographics_patient(const PatientRecord& r) {
  std::vector<double> d(kPatientDemoDim, 0.0);
  const int age = std::max(0, r.window.first.year() - r.birth_year);
  d[0] = static_cast<double>(age) / 100.0;
  switch (r.sex) {
    case Sex::female: d[1] = 1.0; break;
    case Sex::male: d[2] = 1.0; break;
    case Sex::other: d[3] = 1.0; break;
    case Sex::unknown: break;
  }
  return d;
}

// One-hot place of service followed by one-hot visit category. Categories
// unseen when the vocabulary was built give an all-zero block.
inline std::vector<double> demographics_visit(const Visit& v, const Vocabulary& vocab) {
  const auto& places = vocab.places();
  const auto& cats = vocab.categories();
  std::vector<double> d(places.size() + cats.size(), 0.0);
  if (auto it = std::lower_bound(places.begin(), places.end(), v.place_of_service);
      it != places.end() && *it == v.place_of_service) {
    d[static_cast<std::size_t>(it - places.begin())] = 1.0;
  }
  if (auto it = std::lower_bound(cats.begin(), cats.end(), v.visit_category);
      it != cats.end() && *it == v.visit_category) {
    d[places.size() + static_cast<std::size_t>(it - cats.begin())] = 1.0;
  }
  return d;
}

enum class UnknownCodes { error, skip };

// With UnknownCodes::skip, codes missing from the vocabulary are dropped and
// tallied in *skipped; visits left empty are dropped too.
inline PatientEncoding encode_patient(const PatientRecord& r, const Vocabulary& vocab,
                                      UnknownCodes policy = UnknownCodes::error, std::size_t* skipped = nullptr) {
  PatientEncoding enc;
  enc.member_id = r.member_id;
  enc.demo = demographics_patient(r);
  enc.window_cost = r.window_cost();
  enc.holdout_cost = r.holdout_cost();
  std::map<CodeId, int> counts;
  for (const auto& v : r.visits) {
    VisitEncoding ve;
    for (const auto& code : v.codes) {
      auto id = vocab.find(code);
      if (!id) {
        if (policy == UnknownCodes::error) throw DataError("unknown code '" + code + "' for member " + r.member_id);
        if (skipped) ++*skipped;
        continue;
      }
      ++counts[*id];
      ve.active_ids.push_back(*id);
    }
    if (ve.active_ids.empty()) continue;
    std::sort(ve.active_ids.begin(), ve.active_ids.end());
    ve.active_ids.erase(std::unique(ve.active_ids.begin(), ve.active_ids.end()), ve.active_ids.end());
    ve.demo = demographics_visit(v, vocab);
    ve.cost = v.cost;
    enc.visits.push_back(std::move(ve));
  }
  enc.counts.assign(counts.begin(), counts.end());
  return enc;
}

inline std::vector<PatientEncoding> encode_cohort(const std::vector<PatientRecord>& cohort, const Vocabulary& vocab,
                                                  UnknownCodes policy = UnknownCodes::error,
                                                  std::size_t* skipped = nullptr) {
  std::vector<PatientEncoding> out;
  out.reserve(cohort.size());
  for (const auto& r : cohort) out.push_back(encode_patient(r, vocab, policy, skipped));
  return out;
}

}  // namespace carevec
