#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "carevec/claims.hpp"
#include "test_support.hpp"

using namespace carevec;

namespace {

RawClaim medical(const std::string& member, Date d, std::vector<std::string> codes, double paid) {
  RawClaim c;
  c.member_id = member;
  c.service_date = d;
  c.kind = ClaimKind::medical;
  for (auto& s : codes) c.codes.push_back({s, CodeType::diagnosis});
  c.paid_amount = paid;
  return c;
}

RawClaim pharmacy(const std::string& member, Date d, std::vector<std::string> codes, double paid) {
  RawClaim c = medical(member, d, std::move(codes), paid);
  c.kind = ClaimKind::pharmacy;
  for (auto& cc : c.codes) cc.type = CodeType::medication;
  return c;
}

const Date kDay0 = Date::from_ymd(2014, 3, 1);

std::vector<RawClaim> parse_string(const std::string& s) {
  std::istringstream in(s);
  return parse_claims(in, "mem");
}

}  // namespace

TEST(ParseClaims, EmptyInputGivesEmptyList) { EXPECT_TRUE(parse_string("").empty()); }

TEST(ParseClaims, SingleDiagnosisClaim) {
  auto claims = parse_string(
      R"({"member_id":"m1","service_date":"2014-01-05","claim_kind":"medical",)"
      R"("codes":[{"code":"DX1","code_type":"diagnosis"}],"paid_amount":12.5,"place_of_service":"office"})"
      "\n");
  ASSERT_EQ(claims.size(), 1u);
  EXPECT_EQ(claims[0].member_id, "m1");
  EXPECT_EQ(claims[0].service_date, Date::from_ymd(2014, 1, 5));
  EXPECT_EQ(claims[0].codes[0].code, "DX1");
  EXPECT_DOUBLE_EQ(claims[0].paid_amount, 12.5);
  EXPECT_EQ(claims[0].place_of_service, "office");
  EXPECT_EQ(claims[0].line, 1u);
}

TEST(ParseClaims, BadPaidAmountNamesLine) {
  const std::string good =
      R"({"member_id":"m1","service_date":"2014-01-05","claim_kind":"medical","codes":[{"code":"A","code_type":"diagnosis"}],"paid_amount":1})";
  const std::string bad =
      R"({"member_id":"m1","service_date":"2014-01-05","claim_kind":"medical","codes":[{"code":"A","code_type":"diagnosis"}],"paid_amount":"abc"})";
  try {
    parse_string(good + "\n" + bad + "\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("mem:2"), std::string::npos) << e.what();
  }
}

TEST(ParseClaims, UnknownCodeTypeIsError) {
  EXPECT_THROW(
      parse_string(
          R"({"member_id":"m","service_date":"2014-01-05","claim_kind":"medical","codes":[{"code":"A","code_type":"lab"}],"paid_amount":1})"),
      DataError);
}

TEST(ParseClaims, MalformedJsonAndBadDate) {
  EXPECT_THROW(parse_string("{not json"), DataError);
  EXPECT_THROW(
      parse_string(
          R"({"member_id":"m","service_date":"2014-02-30","claim_kind":"medical","codes":[{"code":"A","code_type":"diagnosis"}],"paid_amount":1})"),
      DataError);
  EXPECT_THROW(
      parse_string(R"({"member_id":"m","service_date":"2014-02-03","claim_kind":"medical","codes":[],"paid_amount":1})"),
      DataError);
}

TEST(ParseClaims, FileRoundTripThroughJson) {
  carevec::testing::TempDir dir;
  RawClaim c = medical("m9", kDay0, {"A", "B"}, 3.25);
  c.sex = Sex::female;
  c.birth_year = 2004;
  c.eligible = true;
  {
    std::ofstream out(dir.file("c.jsonl"));
    out << to_json(c).dump() << "\n";
  }
  auto back = parse_claims_file(dir.file("c.jsonl"));
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].codes.size(), 2u);
  EXPECT_EQ(back[0].sex, Sex::female);
  EXPECT_EQ(back[0].birth_year, 2004);
  EXPECT_THROW(parse_claims_file(dir.file("missing.jsonl")), DataError);
}

TEST(RemapCodes, ReplacesDropsAndPassesThrough) {
  CodeMapTable table;
  table.entries["X"] = "Y";
  table.entries["GONE"] = std::nullopt;
  auto out = remap_codes({medical("m", kDay0, {"X", "GONE", "Z"}, 1.0), medical("m", kDay0 + 1, {"GONE"}, 1.0)},
                         table);
  ASSERT_EQ(out.size(), 1u) << "claim left without codes is dropped";
  ASSERT_EQ(out[0].codes.size(), 2u);
  EXPECT_EQ(out[0].codes[0].code, "Y");
  EXPECT_EQ(out[0].codes[1].code, "Z");
}

TEST(RemapCodes, LoadsJsonTable) {
  carevec::testing::TempDir dir;
  {
    std::ofstream out(dir.file("map.json"));
    out << R"({"ICD10_A": "A", "ICD10_B": null})";
  }
  auto t = CodeMapTable::load(dir.file("map.json"));
  EXPECT_EQ(t.entries.at("ICD10_A"), "A");
  EXPECT_FALSE(t.entries.at("ICD10_B").has_value());
}

TEST(MergePharmacy, WithinTwoWeeksJoinsVisit) {
  auto visits = merge_pharmacy({medical("m", kDay0, {"A"}, 10.0), pharmacy("m", kDay0 + 10, {"RX"}, 5.0)});
  ASSERT_EQ(visits.size(), 1u);
  EXPECT_EQ(visits[0].codes, (std::vector<std::string>{"A", "RX"}));
  EXPECT_DOUBLE_EQ(visits[0].cost, 15.0);
}

TEST(MergePharmacy, BoundaryEnumerationDayZeroToTwenty) {
  // Independent statement of the rule: attach iff 0 <= offset <= 14.
  for (int offset = 0; offset <= 20; ++offset) {
    auto visits = merge_pharmacy({medical("m", kDay0, {"A"}, 1.0), pharmacy("m", kDay0 + offset, {"RX"}, 1.0)});
    ASSERT_EQ(visits.size(), 1u);
    const bool attached = visits[0].codes.size() == 2;
    EXPECT_EQ(attached, offset <= 14) << "offset " << offset;
  }
}

TEST(MergePharmacy, NoPriorVisitDropsClaim) {
  auto visits = merge_pharmacy({pharmacy("m", kDay0, {"RX"}, 1.0), medical("m", kDay0 + 1, {"A"}, 1.0)});
  ASSERT_EQ(visits.size(), 1u);
  EXPECT_EQ(visits[0].codes, (std::vector<std::string>{"A"}));
  EXPECT_TRUE(merge_pharmacy({pharmacy("m", kDay0, {"RX"}, 1.0)}).empty());
}

TEST(MergePharmacy, AttachesToLatestQualifyingVisit) {
  auto visits = merge_pharmacy(
      {medical("m", kDay0, {"A"}, 1.0), medical("m", kDay0 + 5, {"B"}, 1.0), pharmacy("m", kDay0 + 8, {"RX"}, 1.0)});
  ASSERT_EQ(visits.size(), 2u);
  EXPECT_EQ(visits[0].codes.size(), 1u);
  EXPECT_EQ(visits[1].codes, (std::vector<std::string>{"B", "RX"}));
}

TEST(MergePharmacy, SameDateMedicalClaimsFormOneVisit) {
  RawClaim a = medical("m", kDay0, {"A", "B"}, 3.0);
  a.place_of_service = "er";
  RawClaim b = medical("m", kDay0, {"A"}, 4.0);
  b.visit_category = "acute";
  auto visits = merge_pharmacy({a, b});
  ASSERT_EQ(visits.size(), 1u);
  EXPECT_EQ(visits[0].codes, (std::vector<std::string>{"A", "A", "B"}));
  EXPECT_DOUBLE_EQ(visits[0].cost, 7.0);
  EXPECT_EQ(visits[0].place_of_service, "er");
  EXPECT_EQ(visits[0].visit_category, "acute");
}

TEST(MergePharmacy, NeverIncreasesCodeInstances) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RawClaim> claims;
    std::size_t instances = 0;
    const int n = 1 + static_cast<int>(uniform_index(rng, 8));
    for (int i = 0; i < n; ++i) {
      const int day = static_cast<int>(uniform_index(rng, 60));
      const int ncodes = 1 + static_cast<int>(uniform_index(rng, 3));
      std::vector<std::string> codes;
      for (int c = 0; c < ncodes; ++c) codes.push_back("C" + std::to_string(uniform_index(rng, 5)));
      instances += codes.size();
      claims.push_back(uniform01(rng) < 0.4 ? pharmacy("m", kDay0 + day, codes, 1.0)
                                            : medical("m", kDay0 + day, codes, 1.0));
    }
    std::size_t after = 0;
    for (const auto& v : merge_pharmacy(claims)) after += v.codes.size();
    EXPECT_LE(after, instances);
  }
}

TEST(ClampCosts, NonPositiveBecomesZero) {
  std::vector<Visit> v(3);
  v[0].cost = -5.0;
  v[1].cost = 0.0;
  v[2].cost = 12.34;
  auto out = clamp_costs(v);
  EXPECT_EQ(out[0].cost, 0.0);
  EXPECT_EQ(out[1].cost, 0.0);
  EXPECT_EQ(out[2].cost, 12.34);
  for (const auto& x : out) EXPECT_GE(x.cost, 0.0);
}

TEST(ClampCosts, ClaimLevelClampRunsBeforeMerge) {
  auto claims = clamp_claim_amounts({medical("m", kDay0, {"A"}, 100.0), medical("m", kDay0, {"B"}, -30.0)});
  auto visits = merge_pharmacy(claims);
  EXPECT_DOUBLE_EQ(visits[0].cost, 100.0);
}

namespace {

PatientRecord record_with_visits(const std::string& id, int n, bool eligible = true) {
  PatientRecord r;
  r.member_id = id;
  r.eligible = eligible;
  r.window = {Date::from_ymd(2014, 1, 1), Date::from_ymd(2015, 12, 31)};
  for (int i = 0; i < n; ++i) {
    Visit v;
    v.date = kDay0 + i;
    v.codes = {"A"};
    r.visits.push_back(v);
  }
  return r;
}

}  // namespace

TEST(FilterCohort, MinVisitsAndEligibility) {
  DateRange w{Date::from_ymd(2014, 1, 1), Date::from_ymd(2015, 12, 31)};
  auto out = filter_cohort({record_with_visits("one", 1), record_with_visits("two", 2),
                            record_with_visits("inelig", 5, false), record_with_visits("three", 3)},
                           w, 2);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].member_id, "two");
  EXPECT_EQ(out[1].member_id, "three");
  EXPECT_TRUE(filter_cohort({}, w, 2).empty());
  EXPECT_THROW(filter_cohort({}, w, 0), std::invalid_argument);
}

TEST(FilterCohort, CountsOnlyVisitsInsideWindow) {
  auto r = record_with_visits("x", 3);
  DateRange narrow{kDay0, kDay0};
  EXPECT_TRUE(filter_cohort({r}, narrow, 2).empty());
}

TEST(BuildRecords, WindowAndAnnualCosts) {
  DateRange w{Date::from_ymd(2014, 1, 1), Date::from_ymd(2015, 12, 31)};
  std::vector<RawClaim> claims = {medical("b", Date::from_ymd(2014, 5, 1), {"A"}, 10.0),
                                  medical("a", Date::from_ymd(2015, 5, 1), {"A"}, 20.0),
                                  medical("a", Date::from_ymd(2016, 2, 1), {"B"}, 40.0),
                                  medical("a", Date::from_ymd(2014, 2, 1), {"C"}, -3.0)};
  claims[1].sex = Sex::male;
  claims[1].birth_year = 2008;
  auto recs = build_records(claims, w);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].member_id, "a") << "sorted by member id";
  EXPECT_EQ(recs[0].visits.size(), 2u) << "2016 visit outside window";
  EXPECT_DOUBLE_EQ(recs[0].annual_costs.at(2016), 40.0);
  EXPECT_DOUBLE_EQ(recs[0].annual_costs.at(2014), 0.0);
  EXPECT_DOUBLE_EQ(recs[0].window_cost(), 20.0);
  EXPECT_DOUBLE_EQ(recs[0].holdout_cost(), 40.0);
  EXPECT_EQ(recs[0].sex, Sex::male);
  EXPECT_EQ(recs[0].birth_year, 2008);
}

TEST(SplitDataset, SevenOneTwoOnTenRecords) {
  std::vector<int> recs(10);
  for (int i = 0; i < 10; ++i) recs[i] = i;
  auto s = split_dataset(recs, {}, 42);
  EXPECT_EQ(s.train.size(), 7u);
  EXPECT_EQ(s.valid.size(), 1u);
  EXPECT_EQ(s.test.size(), 2u);
}

TEST(SplitDataset, PartitionPropertiesAndSizes) {
  for (std::size_t n : {3u, 7u, 10u, 11u, 99u, 1000u, 2001u}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      auto s = split_indices(n, {}, seed);
      std::set<std::size_t> all;
      for (auto* part : {&s.train, &s.valid, &s.test}) all.insert(part->begin(), part->end());
      EXPECT_EQ(all.size(), n) << "union covers input, parts disjoint";
      EXPECT_EQ(s.train.size() + s.valid.size() + s.test.size(), n);
      if (n >= 10) {
        EXPECT_LE(std::abs(static_cast<double>(s.train.size()) - 0.7 * n), 1.0);
        EXPECT_LE(std::abs(static_cast<double>(s.valid.size()) - 0.1 * n), 1.0);
        EXPECT_LE(std::abs(static_cast<double>(s.test.size()) - 0.2 * n), 1.0);
      }
    }
  }
}

TEST(SplitDataset, DeterministicAndSeedSensitive) {
  auto a = split_indices(100, {}, 5);
  auto b = split_indices(100, {}, 5);
  auto c = split_indices(100, {}, 6);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_NE(a.train, c.train);
}

TEST(SplitDataset, Errors) {
  EXPECT_THROW(split_indices(2, {}, 1), DataError);
  EXPECT_THROW(split_indices(10, {0.5, 0.1, 0.2}, 1), std::invalid_argument);
  EXPECT_THROW(split_indices(10, {0.9, 0.1, 0.0}, 1), std::invalid_argument);
}

TEST(Cohort, JsonlRoundTripIsByteStable) {
  carevec::testing::TempDir dir;
  auto r = record_with_visits("m1", 2);
  r.annual_costs = {{2014, 10.5}, {2016, 3.0}};
  r.sex = Sex::female;
  r.birth_year = 2010;
  write_cohort_file(dir.file("a.jsonl"), {r});
  auto back = read_cohort_file(dir.file("a.jsonl"));
  write_cohort_file(dir.file("b.jsonl"), back);
  std::ifstream a(dir.file("a.jsonl")), b(dir.file("b.jsonl"));
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(back[0].holdout_year(), 2016);
}
