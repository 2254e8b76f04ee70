#pragma once

// Synthetic claims corpus with planted code groups and a cost model.
//
// Each member carries 1-3 conditions (groups). A visit focuses on one of them
// and draws its codes from that group, with a fixed share of uniform noise
// codes. Chronic members also use their groups' chronic-management codes,
// keep their conditions in the holdout year and get costlier there.
// Non-chronic members draw fresh conditions for the holdout year.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "carevec/claims.hpp"

namespace carevec {

struct GenConfig {
  int n_members = 2000;
  int n_groups = 10;
  int codes_per_group = 20;
  int n_noise_codes = 50;
  double visits_per_member_mean = 14.5;  // over the two-year window
  double codes_per_visit_mean = 7.0;     // before truncation to [1, 15]
  std::map<std::string, double> cost_weights;  // empty: drawn from the seed
  double chronic_fraction = 0.2;
  std::uint64_t seed = 1;

  int chronic_codes_per_group = 4;  // leading codes of each group
  double noise_share = 0.1;
  double cost_sigma = 0.5;
  double nonpositive_rate = 0.04;
  int pharmacy_max_delay = 20;
  double alias_rate = 0.0;  // share of diagnosis codes emitted under an alias
  int start_year = 2014;
  int window_years = 2;

  void validate() const {
    if (n_members < 1 || n_groups < 1 || codes_per_group < 1 || n_noise_codes < 0) {
      throw std::invalid_argument("member, group and code counts must be positive");
    }
    if (visits_per_member_mean < 1.0) throw std::invalid_argument("visits_per_member_mean must be >= 1");
    if (codes_per_visit_mean <= 0.0) throw std::invalid_argument("codes_per_visit_mean must be positive");
    if (static_cast<double>(n_groups) * codes_per_group + n_noise_codes < codes_per_visit_mean) {
      throw std::invalid_argument("code pool is smaller than codes_per_visit_mean");
    }
    if (chronic_fraction < 0.0 || chronic_fraction > 1.0) throw std::invalid_argument("chronic_fraction must be in [0,1]");
    if (chronic_codes_per_group < 0 || chronic_codes_per_group >= codes_per_group) {
      throw std::invalid_argument("chronic_codes_per_group must leave acute codes in every group");
    }
    if (noise_share < 0.0 || noise_share >= 1.0) throw std::invalid_argument("noise_share must be in [0,1)");
    if (n_noise_codes == 0 && noise_share > 0.0) throw std::invalid_argument("noise_share > 0 needs noise codes");
    if (window_years < 1) throw std::invalid_argument("window_years must be >= 1");
  }
};

inline void to_json(nlohmann::json& j, const GenConfig& c) {
  j = {{"n_members", c.n_members},
       {"n_groups", c.n_groups},
       {"codes_per_group", c.codes_per_group},
       {"n_noise_codes", c.n_noise_codes},
       {"visits_per_member_mean", c.visits_per_member_mean},
       {"codes_per_visit_mean", c.codes_per_visit_mean},
       {"cost_weights", c.cost_weights},
       {"chronic_fraction", c.chronic_fraction},
       {"seed", c.seed},
       {"chronic_codes_per_group", c.chronic_codes_per_group},
       {"noise_share", c.noise_share},
       {"cost_sigma", c.cost_sigma},
       {"nonpositive_rate", c.nonpositive_rate},
       {"pharmacy_max_delay", c.pharmacy_max_delay},
       {"alias_rate", c.alias_rate},
       {"start_year", c.start_year},
       {"window_years", c.window_years}};
}

// Missing keys keep their defaults; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, GenConfig& c) {
  if (!j.is_object()) throw DataError("generator config must be a JSON object");
  nlohmann::json known;
  to_json(known, GenConfig{});
  for (auto& [k, v] : j.items()) {
    if (!known.contains(k)) throw DataError("unknown generator config key '" + k + "'");
  }
  try {
    auto get = [&](const char* k, auto& field) {
      if (j.contains(k)) j.at(k).get_to(field);
    };
    get("n_members", c.n_members);
    get("n_groups", c.n_groups);
    get("codes_per_group", c.codes_per_group);
    get("n_noise_codes", c.n_noise_codes);
    get("visits_per_member_mean", c.visits_per_member_mean);
    get("codes_per_visit_mean", c.codes_per_visit_mean);
    get("cost_weights", c.cost_weights);
    get("chronic_fraction", c.chronic_fraction);
    get("seed", c.seed);
    get("chronic_codes_per_group", c.chronic_codes_per_group);
    get("noise_share", c.noise_share);
    get("cost_sigma", c.cost_sigma);
    get("nonpositive_rate", c.nonpositive_rate);
    get("pharmacy_max_delay", c.pharmacy_max_delay);
    get("alias_rate", c.alias_rate);
    get("start_year", c.start_year);
    get("window_years", c.window_years);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("generator config: ") + e.what());
  }
}

inline GenConfig load_gen_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open generator config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("generator config '" + path + "': " + e.what());
  }
  return j.get<GenConfig>();
}

struct GroundTruth {
  std::map<std::string, int> code_group;  // noise codes are absent
  std::vector<std::string> noise_codes;
  std::map<std::string, std::vector<int>> member_conditions;  // window conditions
  std::map<std::string, bool> member_chronic;
  std::map<std::string, double> cost_weights;

  nlohmann::json to_json() const {
    return {{"code_group", code_group},
            {"noise_codes", noise_codes},
            {"member_conditions", member_conditions},
            {"member_chronic", member_chronic},
            {"cost_weights", cost_weights}};
  }

  static GroundTruth from_json(const nlohmann::json& j) {
    GroundTruth t;
    try {
      j.at("code_group").get_to(t.code_group);
      if (j.contains("noise_codes")) j.at("noise_codes").get_to(t.noise_codes);
      if (j.contains("member_conditions")) j.at("member_conditions").get_to(t.member_conditions);
      if (j.contains("member_chronic")) j.at("member_chronic").get_to(t.member_chronic);
      if (j.contains("cost_weights")) j.at("cost_weights").get_to(t.cost_weights);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("ground truth: ") + e.what());
    }
    return t;
  }

  static GroundTruth load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open ground truth '" + path + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DataError("ground truth '" + path + "': " + e.what());
    }
    return from_json(j);
  }
};

struct SynthCorpus {
  std::vector<RawClaim> claims;  // sorted by member, date, kind
  GroundTruth truth;
  CodeMapTable codemap;  // alias -> canonical code; empty unless alias_rate > 0
};

namespace synth {

struct CodeInfo {
  std::string name;
  CodeType type;
  int group;  // -1 for noise
  bool chronic;
};

// Group codes cycle medication, procedure, diagnosis x3.
inline CodeType group_code_type(int j) {
  switch (j % 5) {
    case 0: return CodeType::medication;
    case 1: return CodeType::procedure;
    default: return CodeType::diagnosis;
  }
}

inline std::string code_name(CodeType t, int g, int j) {
  char prefix = t == CodeType::diagnosis ? 'D' : t == CodeType::procedure ? 'P' : 'R';
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%02d%02d", prefix, g, j);
  return buf;
}

inline std::vector<CodeInfo> code_table(const GenConfig& cfg) {
  std::vector<CodeInfo> codes;
  for (int g = 0; g < cfg.n_groups; ++g) {
    for (int j = 0; j < cfg.codes_per_group; ++j) {
      const auto t = group_code_type(j);
      codes.push_back({code_name(t, g, j), t, g, j < cfg.chronic_codes_per_group});
    }
  }
  for (int k = 0; k < cfg.n_noise_codes; ++k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "N%03d", k);
    codes.push_back({buf, group_code_type(k), -1, false});
  }
  return codes;
}

// Zero-truncated Poisson capped at `cap`.
inline int truncated_poisson(Rng& rng, double mean, int cap) {
  std::poisson_distribution<int> pois(mean);
  int n = 0;
  do {
    n = pois(rng);
  } while (n == 0);
  return std::min(n, cap);
}

// Mean-one lognormal multiplier.
inline double lognormal_unit(Rng& rng, double sigma) {
  std::normal_distribution<double> z(-0.5 * sigma * sigma, sigma);
  return std::exp(z(rng));
}

// `n` distinct days from [first, first + span).
inline std::vector<Date> distinct_days(Rng& rng, Date first, int span, int n) {
  n = std::min(n, span);
  std::set<int> chosen;
  while (static_cast<int>(chosen.size()) < n) chosen.insert(static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(span))));
  std::vector<Date> out;
  for (int d : chosen) out.push_back(first + d);
  return out;
}

inline std::vector<int> draw_conditions(Rng& rng, int n_groups) {
  const double u = uniform01(rng);
  int n = u < 0.4 ? 1 : u < 0.75 ? 2 : 3;
  n = std::min(n, n_groups);
  std::vector<int> all(static_cast<std::size_t>(n_groups));
  std::iota(all.begin(), all.end(), 0);
  for (int i = 0; i < n; ++i) std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(i) + uniform_index(rng, all.size() - static_cast<std::size_t>(i))]);
  all.resize(static_cast<std::size_t>(n));
  std::sort(all.begin(), all.end());
  return all;
}

struct MemberPlan {
  std::vector<int> conditions;
  bool chronic = false;
  double severity = 1.0;
};

}  // namespace synth

inline SynthCorpus generate(const GenConfig& cfg) {
  cfg.validate();
  using namespace synth;
  const auto codes = code_table(cfg);
  const int G = cfg.n_groups;
  const int K = cfg.codes_per_group;
  const int noise_begin = G * K;

  SynthCorpus out;
  // Cost weights: each group has its own price level, codes scatter around it.
  {
    Rng rng(derive_seed_str(cfg.seed, "weights"));
    std::vector<double> level(static_cast<std::size_t>(G));
    for (auto& l : level) l = std::exp(std::log(40.0) + uniform01(rng) * std::log(400.0 / 40.0));
    std::normal_distribution<double> jitter(0.0, 0.3);
    for (const auto& c : codes) {
      double w;
      if (c.group >= 0) {
        w = level[static_cast<std::size_t>(c.group)] * std::exp(jitter(rng)) * (c.chronic ? 1.5 : 1.0);
      } else {
        w = std::exp(std::log(10.0) + uniform01(rng) * std::log(10.0));
      }
      auto given = cfg.cost_weights.find(c.name);
      out.truth.cost_weights[c.name] = given != cfg.cost_weights.end() ? given->second : std::round(w * 100.0) / 100.0;
      if (c.group >= 0) {
        out.truth.code_group[c.name] = c.group;
      } else {
        out.truth.noise_codes.push_back(c.name);
      }
    }
  }
  std::vector<double> weight(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) weight[i] = out.truth.cost_weights.at(codes[i].name);

  if (cfg.alias_rate > 0.0) {
    for (const auto& c : codes) {
      if (c.type == CodeType::diagnosis) out.codemap.entries["X" + c.name] = c.name;
    }
    out.codemap.entries["XUNMAPPED"] = std::nullopt;
  }

  const Date window_start = Date::from_ymd(cfg.start_year, 1, 1);
  const Date holdout_start = Date::from_ymd(cfg.start_year + cfg.window_years, 1, 1);
  const Date holdout_end = Date::from_ymd(cfg.start_year + cfg.window_years, 12, 31);
  const int window_days = holdout_start - window_start;
  const int holdout_days = holdout_end - holdout_start + 1;
  const double window_rate = cfg.visits_per_member_mean - 1.0;
  const double yearly_rate = window_rate / cfg.window_years;

  for (int m = 0; m < cfg.n_members; ++m) {
    Rng rng(derive_seed(cfg.seed, 0x6d656d626572ULL, static_cast<std::uint64_t>(m)));
    char idbuf[32];
    std::snprintf(idbuf, sizeof idbuf, "M%06d", m + 1);
    const std::string id = idbuf;

    MemberPlan plan;
    plan.conditions = draw_conditions(rng, G);
    plan.chronic = uniform01(rng) < cfg.chronic_fraction;
    plan.severity = plan.chronic ? std::exp(std::normal_distribution<double>(0.0, 0.35)(rng)) : 1.0;
    const double propensity = lognormal_unit(rng, 0.3);
    const Sex sex = uniform01(rng) < 0.5 ? Sex::female : Sex::male;
    const int birth_year = cfg.start_year - static_cast<int>(uniform_index(rng, 18));
    const bool eligible = uniform01(rng) >= 0.03;

    out.truth.member_conditions[id] = plan.conditions;
    out.truth.member_chronic[id] = plan.chronic;

    auto emit_period = [&](Date first, int span, double rate, const std::vector<int>& conds, bool chronic_codes,
                           double cost_scale) {
      std::poisson_distribution<int> pois(rate);
      const int n_visits = 1 + pois(rng);
      for (Date day : distinct_days(rng, first, span, n_visits)) {
        const int focus = conds[uniform_index(rng, conds.size())];
        const int n_codes = truncated_poisson(rng, cfg.codes_per_visit_mean, 15);
        std::set<int> picked;
        int guard = 0;
        while (static_cast<int>(picked.size()) < n_codes && ++guard < 1000) {
          int c;
          if (cfg.n_noise_codes > 0 && uniform01(rng) < cfg.noise_share) {
            c = noise_begin + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.n_noise_codes)));
          } else if (chronic_codes && cfg.chronic_codes_per_group > 0 && uniform01(rng) < 0.5) {
            c = focus * K + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.chronic_codes_per_group)));
          } else {
            const int acute = K - cfg.chronic_codes_per_group;
            c = focus * K + cfg.chronic_codes_per_group + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(acute)));
          }
          picked.insert(c);
        }

        // Split the visit into medical claims (one or two) and a pharmacy claim.
        std::vector<int> medical, pharmacy;
        for (int c : picked) (codes[static_cast<std::size_t>(c)].type == CodeType::medication ? pharmacy : medical).push_back(c);
        if (medical.empty()) {
          medical.push_back(pharmacy.back());
          pharmacy.pop_back();
        }
        const bool inpatient = picked.size() >= 9;
        const bool er = !inpatient && uniform01(rng) < 0.08;
        const bool has_chronic = std::any_of(picked.begin(), picked.end(), [&](int c) { return codes[static_cast<std::size_t>(c)].chronic; });
        const std::string place = inpatient ? "inpatient" : er ? "er" : "office";
        const std::string category = has_chronic ? "chronic" : "acute";

        auto make_claim = [&](ClaimKind kind, Date date, const std::vector<int>& ids) {
          RawClaim rc;
          rc.member_id = id;
          rc.service_date = date;
          rc.kind = kind;
          double amount = 0.0;
          for (int c : ids) {
            std::string name = codes[static_cast<std::size_t>(c)].name;
            if (cfg.alias_rate > 0.0 && codes[static_cast<std::size_t>(c)].type == CodeType::diagnosis &&
                uniform01(rng) < cfg.alias_rate) {
              name = "X" + name;
            }
            rc.codes.push_back({name, codes[static_cast<std::size_t>(c)].type});
            amount += weight[static_cast<std::size_t>(c)];
          }
          amount *= cost_scale * lognormal_unit(rng, cfg.cost_sigma);
          if (uniform01(rng) < cfg.nonpositive_rate) amount = -std::round(uniform01(rng) * amount * 0.5 * 100.0) / 100.0;
          rc.paid_amount = std::round(amount * 100.0) / 100.0;
          if (kind == ClaimKind::medical) {
            rc.place_of_service = place;
            rc.visit_category = category;
          }
          rc.sex = sex;
          rc.birth_year = birth_year;
          rc.eligible = eligible;
          out.claims.push_back(std::move(rc));
        };
        if (medical.size() >= 4 && uniform01(rng) < 0.3) {
          const auto half = medical.begin() + static_cast<std::ptrdiff_t>(medical.size() / 2);
          make_claim(ClaimKind::medical, day, std::vector<int>(medical.begin(), half));
          make_claim(ClaimKind::medical, day, std::vector<int>(half, medical.end()));
        } else {
          make_claim(ClaimKind::medical, day, medical);
        }
        if (!pharmacy.empty()) {
          const int delay = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.pharmacy_max_delay + 1)));
          make_claim(ClaimKind::pharmacy, day + delay, pharmacy);
        }
      }
    };

    emit_period(window_start, window_days, window_rate * propensity * plan.severity, plan.conditions, plan.chronic, 1.0);
    if (cfg.alias_rate > 0.0 && uniform01(rng) < cfg.alias_rate) {
      RawClaim rc;
      rc.member_id = id;
      rc.service_date = window_start + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(window_days)));
      rc.codes.push_back({"XUNMAPPED", CodeType::diagnosis});
      rc.paid_amount = 0.0;
      rc.sex = sex;
      rc.birth_year = birth_year;
      rc.eligible = eligible;
      out.claims.push_back(std::move(rc));
    }

    // Holdout year: chronic members keep their conditions and worsen.
    if (plan.chronic) {
      const double s = 1.5 * plan.severity;
      emit_period(holdout_start, holdout_days, yearly_rate * propensity * s, plan.conditions, true, s);
    } else {
      emit_period(holdout_start, holdout_days, yearly_rate * propensity, draw_conditions(rng, G), false, 1.0);
    }
  }

  std::stable_sort(out.claims.begin(), out.claims.end(), [](const RawClaim& a, const RawClaim& b) {
    if (a.member_id != b.member_id) return a.member_id < b.member_id;
    if (a.service_date != b.service_date) return a.service_date < b.service_date;
    return a.kind < b.kind;
  });
  return out;
}

inline void write_claims(std::ostream& out, const std::vector<RawClaim>& claims) {
  for (const auto& c : claims) out << to_json(c).dump() << '\n';
}

inline void write_claims_file(const std::string& path, const std::vector<RawClaim>& claims) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_claims(out, claims);
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

inline void write_codemap_file(const std::string& path, const CodeMapTable& table) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [src, dst] : table.entries) j[src] = dst ? nlohmann::json(*dst) : nlohmann::json(nullptr);
  write_json_file(path, j);
}

}  // namespace carevec
