#pragma once

// Claims ingestion: JSONL parsing, code remapping, pharmacy merge, cost
// clamping, cohort filtering and the patient-level train/valid/test split.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "carevec/core.hpp"

namespace carevec {

enum class ClaimKind { medical, pharmacy };
enum class CodeType { diagnosis, procedure, medication };
enum class Sex { female, male, other, unknown };

inline std::string_view to_string(ClaimKind k) { return k == ClaimKind::medical ? "medical" : "pharmacy"; }

inline std::string_view to_string(CodeType t) {
  switch (t) {
    case CodeType::diagnosis: return "diagnosis";
    case CodeType::procedure: return "procedure";
    case CodeType::medication: return "medication";
  }
  return "";
}

inline std::string_view to_string(Sex s) {
  switch (s) {
    case Sex::female: return "F";
    case Sex::male: return "M";
    case Sex::other: return "O";
    case Sex::unknown: return "U";
  }
  return "U";
}

inline Sex parse_sex(std::string_view s) {
  if (s == "F") return Sex::female;
  if (s == "M") return Sex::male;
  if (s == "O") return Sex::other;
  return Sex::unknown;
}

struct ClaimCode {
  std::string code;
  CodeType type = CodeType::diagnosis;
};

// One line of the claims file. Member attributes (sex, birth year,
// eligibility) ride along on every claim; the last value seen wins.
struct RawClaim {
  std::string member_id;
  Date service_date;
  ClaimKind kind = ClaimKind::medical;
  std::vector<ClaimCode> codes;
  double paid_amount = 0.0;
  std::string place_of_service;
  std::string visit_category;
  std::optional<Sex> sex;
  std::optional<int> birth_year;
  std::optional<bool> eligible;
  std::size_t line = 0;
};

// Code instances keep their multiplicity; the binary visit encoding
// deduplicates, the patient count vector does not.
struct Visit {
  Date date;
  std::vector<std::string> codes;  // sorted, duplicates preserved
  double cost = 0.0;
  std::string place_of_service;
  std::string visit_category;
};

struct PatientRecord {
  std::string member_id;
  Sex sex = Sex::unknown;
  int birth_year = 0;
  bool eligible = true;
  DateRange window;
  std::vector<Visit> visits;             // inside `window`, sorted by date
  std::map<int, double> annual_costs;    // all observed years

  // Total cost over the calendar years touched by the window.
  double window_cost() const {
    double total = 0.0;
    for (auto [year, cost] : annual_costs) {
      if (year >= window.first.year() && year <= window.last.year()) total += cost;
    }
    return total;
  }

  int holdout_year() const { return window.last.year() + 1; }

  double holdout_cost() const {
    auto it = annual_costs.find(holdout_year());
    return it == annual_costs.end() ? 0.0 : it->second;
  }
};

// source code -> target code, or nullopt meaning "drop the code".
struct CodeMapTable {
  std::map<std::string, std::optional<std::string>> entries;

  // JSON object {"SRC": "DST", "UNMAPPABLE": null}.
  static CodeMapTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open code map '" + path + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DataError("code map '" + path + "': " + e.what());
    }
    if (!j.is_object()) throw DataError("code map '" + path + "' must be a JSON object");
    CodeMapTable t;
    for (auto& [src, dst] : j.items()) {
      if (dst.is_null()) {
        t.entries[src] = std::nullopt;
      } else if (dst.is_string()) {
        t.entries[src] = dst.get<std::string>();
      } else {
        throw DataError("code map entry '" + src + "' must be a string or null");
      }
    }
    return t;
  }
};

namespace detail {

inline CodeType parse_code_type(std::string_view s) {
  if (s == "diagnosis") return CodeType::diagnosis;
  if (s == "procedure") return CodeType::procedure;
  if (s == "medication") return CodeType::medication;
  throw DataError("unknown code_type '" + std::string(s) + "'");
}

inline RawClaim claim_from_json(const nlohmann::json& j) {
  RawClaim c;
  if (!j.is_object()) throw DataError("record is not a JSON object");
  auto require = [&](const char* key) -> const nlohmann::json& {
    auto it = j.find(key);
    if (it == j.end()) throw DataError(std::string("missing field '") + key + "'");
    return *it;
  };
  const auto& mid = require("member_id");
  if (mid.is_string()) {
    c.member_id = mid.get<std::string>();
  } else if (mid.is_number_integer()) {
    c.member_id = std::to_string(mid.get<long long>());
  } else {
    throw DataError("member_id must be a string");
  }
  const auto& date = require("service_date");
  if (!date.is_string()) throw DataError("service_date must be a string");
  c.service_date = Date::parse(date.get<std::string>());

  const auto& kind = require("claim_kind");
  if (kind == "medical") {
    c.kind = ClaimKind::medical;
  } else if (kind == "pharmacy") {
    c.kind = ClaimKind::pharmacy;
  } else {
    throw DataError("claim_kind must be 'medical' or 'pharmacy'");
  }

  const auto& codes = require("codes");
  if (!codes.is_array() || codes.empty()) throw DataError("codes must be a non-empty array");
  for (const auto& e : codes) {
    if (!e.is_object() || !e.contains("code") || !e.contains("code_type") || !e["code"].is_string() ||
        !e["code_type"].is_string()) {
      throw DataError("each code needs string fields 'code' and 'code_type'");
    }
    c.codes.push_back({e["code"].get<std::string>(), parse_code_type(e["code_type"].get<std::string>())});
  }

  const auto& paid = require("paid_amount");
  if (!paid.is_number()) throw DataError("paid_amount must be a number");
  c.paid_amount = paid.get<double>();
  if (!std::isfinite(c.paid_amount)) throw DataError("paid_amount must be finite");

  auto opt_string = [&](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return {};
    if (!it->is_string()) throw DataError(std::string(key) + " must be a string");
    return it->get<std::string>();
  };
  c.place_of_service = opt_string("place_of_service");
  c.visit_category = opt_string("visit_category");
  if (auto it = j.find("sex"); it != j.end() && !it->is_null()) c.sex = parse_sex(opt_string("sex"));
  if (auto it = j.find("birth_year"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) throw DataError("birth_year must be an integer");
    c.birth_year = it->get<int>();
  }
  if (auto it = j.find("eligible"); it != j.end() && !it->is_null()) {
    if (!it->is_boolean()) throw DataError("eligible must be a boolean");
    c.eligible = it->get<bool>();
  }
  return c;
}

}  // namespace detail

inline nlohmann::json to_json(const RawClaim& c) {
  nlohmann::json codes = nlohmann::json::array();
  for (const auto& cc : c.codes) codes.push_back({{"code", cc.code}, {"code_type", to_string(cc.type)}});
  nlohmann::json j = {{"member_id", c.member_id},
                      {"service_date", c.service_date.str()},
                      {"claim_kind", to_string(c.kind)},
                      {"codes", codes},
                      {"paid_amount", c.paid_amount}};
  if (!c.place_of_service.empty()) j["place_of_service"] = c.place_of_service;
  if (!c.visit_category.empty()) j["visit_category"] = c.visit_category;
  if (c.sex) j["sex"] = to_string(*c.sex);
  if (c.birth_year) j["birth_year"] = *c.birth_year;
  if (c.eligible) j["eligible"] = *c.eligible;
  return j;
}

inline std::vector<RawClaim> parse_claims(std::istream& in, const std::string& source = "<stream>") {
  std::vector<RawClaim> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      RawClaim c = detail::claim_from_json(j);
      c.line = lineno;
      out.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(source + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<RawClaim> parse_claims_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open claims file '" + path + "'");
  return parse_claims(in, path);
}

// Codes found in the table are replaced (or dropped when mapped to nothing);
// codes absent from the table pass through. Claims left without codes are
// removed.
inline std::vector<RawClaim> remap_codes(std::vector<RawClaim> claims, const CodeMapTable& table) {
  std::vector<RawClaim> out;
  out.reserve(claims.size());
  for (auto& c : claims) {
    std::vector<ClaimCode> kept;
    kept.reserve(c.codes.size());
    for (auto& cc : c.codes) {
      auto it = table.entries.find(cc.code);
      if (it == table.entries.end()) {
        kept.push_back(std::move(cc));
      } else if (it->second) {
        kept.push_back({*it->second, cc.type});
      }
    }
    if (kept.empty()) continue;
    c.codes = std::move(kept);
    out.push_back(std::move(c));
  }
  return out;
}

// Claim-level clamping of non-positive paid amounts.
inline std::vector<RawClaim> clamp_claim_amounts(std::vector<RawClaim> claims) {
  for (auto& c : claims) {
    if (c.paid_amount <= 0.0) c.paid_amount = 0.0;
  }
  return claims;
}

inline constexpr int kPharmacyAttachDays = 14;

// Builds one member's visits. Medical claims sharing a service date form a
// visit; a pharmacy claim joins the latest visit dated within the 14 days
// (inclusive) before it, otherwise it is dropped.
inline std::vector<Visit> merge_pharmacy(const std::vector<RawClaim>& claims) {
  std::map<Date, Visit> by_date;
  for (const auto& c : claims) {
    if (c.kind != ClaimKind::medical) continue;
    auto& v = by_date[c.service_date];
    v.date = c.service_date;
    for (const auto& cc : c.codes) v.codes.push_back(cc.code);
    v.cost += c.paid_amount;
    if (v.place_of_service.empty()) v.place_of_service = c.place_of_service;
    if (v.visit_category.empty()) v.visit_category = c.visit_category;
  }
  for (const auto& c : claims) {
    if (c.kind != ClaimKind::pharmacy) continue;
    auto it = by_date.upper_bound(c.service_date);
    if (it == by_date.begin()) continue;
    --it;
    if (c.service_date - it->first > kPharmacyAttachDays) continue;
    for (const auto& cc : c.codes) it->second.codes.push_back(cc.code);
    it->second.cost += c.paid_amount;
  }
  std::vector<Visit> out;
  out.reserve(by_date.size());
  for (auto& [d, v] : by_date) {
    std::sort(v.codes.begin(), v.codes.end());
    out.push_back(std::move(v));
  }
  return out;
}

inline std::vector<Visit> clamp_costs(std::vector<Visit> visits) {
  for (auto& v : visits) {
    if (v.cost <= 0.0) v.cost = 0.0;
  }
  return visits;
}

// Groups claims by member (output sorted by member_id) and runs the merge and
// clamp steps. `visits` keeps only the window; annual costs cover every year.
inline std::vector<PatientRecord> build_records(const std::vector<RawClaim>& claims, const DateRange& window) {
  std::map<std::string, std::vector<const RawClaim*>> by_member;
  for (const auto& c : claims) by_member[c.member_id].push_back(&c);

  std::vector<PatientRecord> out;
  out.reserve(by_member.size());
  for (auto& [id, ptrs] : by_member) {
    PatientRecord r;
    r.member_id = id;
    r.window = window;
    std::vector<RawClaim> mine;
    mine.reserve(ptrs.size());
    for (const RawClaim* c : ptrs) {
      if (c->sex) r.sex = *c->sex;
      if (c->birth_year) r.birth_year = *c->birth_year;
      if (c->eligible) r.eligible = *c->eligible;
      mine.push_back(*c);
    }
    auto visits = clamp_costs(merge_pharmacy(mine));
    for (auto& v : visits) {
      r.annual_costs[v.date.year()] += v.cost;
      if (window.contains(v.date)) r.visits.push_back(std::move(v));
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<PatientRecord> filter_cohort(const std::vector<PatientRecord>& records, const DateRange& window,
                                                int min_visits) {
  if (min_visits < 1) throw std::invalid_argument("min_visits must be >= 1");
  std::vector<PatientRecord> out;
  for (const auto& r : records) {
    if (!r.eligible) continue;
    auto n = std::count_if(r.visits.begin(), r.visits.end(), [&](const Visit& v) { return window.contains(v.date); });
    if (n >= min_visits) out.push_back(r);
  }
  return out;
}

// Full preprocessing pipeline behind the `prep` command.
inline std::vector<PatientRecord> prepare_cohort(std::vector<RawClaim> claims, const CodeMapTable& table,
                                                 const DateRange& window, int min_visits) {
  auto cleaned = clamp_claim_amounts(remap_codes(std::move(claims), table));
  return filter_cohort(build_records(cleaned, window), window, min_visits);
}

struct SplitRatios {
  double train = 0.7;
  double valid = 0.1;
  double test = 0.2;
};

template <typename T>
struct Split {
  std::vector<T> train;
  std::vector<T> valid;
  std::vector<T> test;
};

// Index-level split; each part lists original indices in ascending order.
inline Split<std::size_t> split_indices(std::size_t n, SplitRatios ratios, std::uint64_t seed) {
  if (ratios.train <= 0 || ratios.valid <= 0 || ratios.test <= 0) {
    throw std::invalid_argument("split ratios must be positive");
  }
  if (std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must sum to 1");
  }
  if (n < 3) throw DataError("need at least 3 records to split, got " + std::to_string(n));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed_str(seed, "split"));
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[uniform_index(rng, i + 1)]);

  auto n_train = static_cast<std::size_t>(std::floor(ratios.train * static_cast<double>(n) + 0.5));
  auto n_valid = static_cast<std::size_t>(std::floor(ratios.valid * static_cast<double>(n) + 0.5));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 2);
  n_valid = std::clamp<std::size_t>(n_valid, 1, n - n_train - 1);

  Split<std::size_t> s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.valid.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                 order.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), order.end());
  for (auto* part : {&s.train, &s.valid, &s.test}) std::sort(part->begin(), part->end());
  return s;
}

template <typename T>
Split<T> split_dataset(const std::vector<T>& records, SplitRatios ratios, std::uint64_t seed) {
  auto idx = split_indices(records.size(), ratios, seed);
  Split<T> s;
  for (auto i : idx.train) s.train.push_back(records[i]);
  for (auto i : idx.valid) s.valid.push_back(records[i]);
  for (auto i : idx.test) s.test.push_back(records[i]);
  return s;
}

// ---- cohort JSONL ----------------------------------------------------------

inline nlohmann::json to_json(const PatientRecord& r) {
  nlohmann::json visits = nlohmann::json::array();
  for (const auto& v : r.visits) {
    visits.push_back({{"date", v.date.str()},
                      {"codes", v.codes},
                      {"cost", v.cost},
                      {"place_of_service", v.place_of_service},
                      {"visit_category", v.visit_category}});
  }
  nlohmann::json costs = nlohmann::json::object();
  for (auto [y, c] : r.annual_costs) costs[std::to_string(y)] = c;
  return {{"member_id", r.member_id},
          {"sex", to_string(r.sex)},
          {"birth_year", r.birth_year},
          {"eligible", r.eligible},
          {"window", r.window.first.str() + ":" + r.window.last.str()},
          {"visits", visits},
          {"annual_costs", costs}};
}

inline PatientRecord record_from_json(const nlohmann::json& j) {
  PatientRecord r;
  r.member_id = j.at("member_id").get<std::string>();
  r.sex = parse_sex(j.at("sex").get<std::string>());
  r.birth_year = j.at("birth_year").get<int>();
  r.eligible = j.value("eligible", true);
  r.window = DateRange::parse(j.at("window").get<std::string>());
  for (const auto& v : j.at("visits")) {
    Visit visit;
    visit.date = Date::parse(v.at("date").get<std::string>());
    visit.codes = v.at("codes").get<std::vector<std::string>>();
    visit.cost = v.at("cost").get<double>();
    visit.place_of_service = v.value("place_of_service", "");
    visit.visit_category = v.value("visit_category", "");
    if (visit.codes.empty()) throw DataError("visit without codes for member " + r.member_id);
    r.visits.push_back(std::move(visit));
  }
  if (!std::is_sorted(r.visits.begin(), r.visits.end(),
                      [](const Visit& a, const Visit& b) { return a.date < b.date; })) {
    throw DataError("visits not sorted by date for member " + r.member_id);
  }
  for (auto& [y, c] : j.at("annual_costs").items()) r.annual_costs[std::stoi(y)] = c.get<double>();
  return r;
}

inline void write_cohort(std::ostream& out, const std::vector<PatientRecord>& cohort) {
  for (const auto& r : cohort) out << to_json(r).dump() << '\n';
}

inline void write_cohort_file(const std::string& path, const std::vector<PatientRecord>& cohort) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write cohort '" + path + "'");
  write_cohort(out, cohort);
}

inline std::vector<PatientRecord> read_cohort_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open cohort '" + path + "'");
  std::vector<PatientRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace carevec
