#include <gtest/gtest.h>

#include <cmath>

#include "mchr/error.hpp"
#include "mchr/metrics.hpp"
#include "mchr/session.hpp"
#include "support.hpp"

using namespace mchr;
using mchr::testing::ScriptedItem;
using mchr::testing::TempDir;

namespace {

// Wilson bounds as the roots of (phat - p)^2 = z^2 p (1 - p) / n.
std::pair<double, double> wilson_roots(double k, double n, double z) {
  const double phat = k / n;
  const double a = 1.0 + z * z / n;
  const double b = -(2.0 * phat + z * z / n);
  const double c = phat * phat;
  const double disc = std::sqrt(b * b - 4.0 * a * c);
  return {(-b - disc) / (2.0 * a), (-b + disc) / (2.0 * a)};
}

AnnotationRecord rec(const std::string& item, const std::string& label, RecordSource src = RecordSource::automatic) {
  AnnotationRecord r;
  r.item_id = item;
  r.final_label = label;
  r.source = src;
  return r;
}

std::unique_ptr<RunSession> run_fixture(TempDir& dir, const TaskSpec& task, const std::vector<ScriptedItem>& items) {
  mchr::testing::write_replay_inputs(dir.path(), task, items);
  const LoadedDataset data = load_dataset(dir / "dataset.jsonl");
  const ModelRoster roster = load_models(dir / "models.json");
  auto gateway = make_gateway(roster, task, data.items);
  RunOptions options;
  options.fsync = false;
  auto s = RunSession::create(dir / "run", task, roster, data.manifest, options);
  s->annotate(data.items, *gateway);
  return s;
}

}  // namespace

TEST(CentiPercent, RoundsHalfUp) {
  EXPECT_EQ(centi_ratio(1, 3).hundredths, 3333);
  EXPECT_EQ(centi_ratio(2, 3).hundredths, 6667);
  EXPECT_EQ(centi_ratio(2, 6).hundredths, 3333);
  EXPECT_EQ(centi_ratio(0, 5).hundredths, 0);
  EXPECT_EQ(centi_ratio(5, 5).hundredths, 10000);
  EXPECT_EQ(centi_ratio(1, 8).hundredths, 1250);
  EXPECT_EQ(centi_ratio(1, 80000).hundredths, 0);
  EXPECT_EQ(centi_ratio(1, 20000).hundredths, 1);  // exactly 0.005 rounds up
}

TEST(WorkloadReduction, Identity) {
  EXPECT_EQ(workload_reduction({0}).hundredths, 10000);
  EXPECT_EQ(workload_reduction({3333}).hundredths, 6667);
  EXPECT_EQ(workload_reduction({6720}).hundredths, 3280);
  for (std::uint64_t den = 1; den <= 300; ++den)
    for (std::uint64_t num = 0; num <= den; ++num) {
      const CentiPercent h = centi_ratio(num, den);
      EXPECT_EQ(h.hundredths + workload_reduction(h).hundredths, 10000);
    }
  EXPECT_THROW(workload_reduction({10001}), Error);
}

TEST(Wilson, AgreesWithIndependentRoots) {
  for (std::uint64_t n = 1; n <= 120; ++n)
    for (std::uint64_t k = 0; k <= n; ++k) {
      const auto ci = wilson_ci(k, n);
      ASSERT_TRUE(ci);
      const auto [lo, hi] = wilson_roots(static_cast<double>(k), static_cast<double>(n), 1.96);
      EXPECT_NEAR(ci->first, std::clamp(lo, 0.0, 1.0), 1e-9) << k << "/" << n;
      EXPECT_NEAR(ci->second, std::clamp(hi, 0.0, 1.0), 1e-9) << k << "/" << n;
      const double p = static_cast<double>(k) / static_cast<double>(n);
      EXPECT_LE(0.0, ci->first);
      EXPECT_LE(ci->first, p);
      EXPECT_LE(p, ci->second);
      EXPECT_LE(ci->second, 1.0);
    }
}

TEST(Wilson, NinetyOfHundred) {
  const auto ci = wilson_ci(90, 100);
  ASSERT_TRUE(ci);
  EXPECT_NEAR(ci->first, 0.825633, 1e-6);
  EXPECT_NEAR(ci->second, 0.944771, 1e-6);
}

TEST(Wilson, Boundaries) {
  const auto all = wilson_ci(10, 10);
  EXPECT_EQ(all->second, 1.0);
  EXPECT_GT(all->first, 0.0);
  const auto none = wilson_ci(0, 10);
  EXPECT_EQ(none->first, 0.0);
  EXPECT_LT(none->second, 1.0);
  EXPECT_FALSE(wilson_ci(0, 0));
}

TEST(Accuracy, CountsMatches) {
  std::vector<AnnotationRecord> records;
  std::map<std::string, std::string> gold;
  for (int i = 0; i < 10; ++i) {
    records.push_back(rec("i" + std::to_string(i), i == 3 ? "backend" : "frontend"));
    gold["i" + std::to_string(i)] = "frontend";
  }
  std::vector<const AnnotationRecord*> ptrs;
  for (const auto& r : records) ptrs.push_back(&r);
  const TaskSpec task = mchr::testing::closed_task();
  EXPECT_EQ(accuracy(ptrs, gold, task, Taxonomy{}), (Tally{9, 10}));
  EXPECT_EQ(accuracy({}, gold, task, Taxonomy{}), (Tally{0, 0}));
  gold.erase("i0");
  EXPECT_THROW(accuracy(ptrs, gold, task, Taxonomy{}), Error);
}

TEST(Accuracy, OpenSetResolvesBothSides) {
  const TaskSpec task = mchr::testing::open_task();
  Taxonomy t;
  t.add_count(t.resolve("hardware description", task));
  t.add_count(t.resolve("hdl programming", task));
  t.merge("hardware description", "hdl programming", "r", "ts");
  const AnnotationRecord r = rec("x", "hardware description");
  EXPECT_EQ(accuracy({&r}, {{"x", "HDL Programming"}}, task, t), (Tally{1, 1}));
}

TEST(Report, PerfectModels) {
  TempDir dir;
  std::vector<ScriptedItem> items;
  for (int i = 0; i < 10; ++i) items.push_back({"i" + std::to_string(i), "backend", "g", {{"backend", 0.9}, {"backend", 0.6}}});
  auto s = run_fixture(dir, mchr::testing::closed_task(), items);
  const RunReport rep = build_report({&s->state()});
  ASSERT_EQ(rep.levels.size(), 1u);
  const LevelReport& lr = rep.levels[0];
  EXPECT_DOUBLE_EQ(lr.all->pct, 100.0);
  EXPECT_EQ(lr.hrr.hundredths, 0);
  EXPECT_EQ(lr.reduction.hundredths, 10000);
  EXPECT_FALSE(lr.human);
  EXPECT_FALSE(rep.incomplete);
}

TEST(Report, HandEnumeratedPartition) {
  TempDir dir;
  std::vector<ScriptedItem> items = {
      {"a", "frontend", "g", {{"frontend", 0.9}, {"frontend", 0.9}}},
      {"b", "backend", "g", {{"backend", 0.9}, {"frontend", 0.9}, {"backend", 0.9}}},
      {"c", "database", "g", {{"frontend", 0.9}, {"backend", 0.9}, {"full-stack", 0.9}}},
  };
  auto s = run_fixture(dir, mchr::testing::closed_task(), items);
  try {
    build_report({&s->state()});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::incomplete);
    EXPECT_NE(std::string(e.what()).find("case-1"), std::string::npos);
  }
  s->decide("case-1", "database", "ana", "");
  const LevelReport lr = build_report({&s->state()}).levels.at(0);
  EXPECT_EQ(lr.all->tally, (Tally{3, 3}));
  EXPECT_EQ(lr.automatic->tally, (Tally{2, 2}));
  EXPECT_EQ(lr.human->tally, (Tally{1, 1}));
  EXPECT_EQ(lr.hrr.hundredths, 3333);
}

TEST(Report, AllNoneAgreementIsFullReview) {
  TempDir dir;
  std::vector<ScriptedItem> items;
  for (int i = 0; i < 4; ++i)
    items.push_back({"i" + std::to_string(i), "frontend", "g", {{"frontend", 0.9}, {"backend", 0.9}, {"database", 0.9}}});
  auto s = run_fixture(dir, mchr::testing::closed_task(), items);
  EXPECT_EQ(hrr(s->state()).hundredths, 10000);
}

TEST(Report, CellFormat) {
  AccuracyCell c;
  c.pct = 98.1;
  c.half = 1.8;
  EXPECT_EQ(format_cell(c), "98.1 ±1.8");
  EXPECT_EQ(format_cell(std::nullopt), "-");
}

TEST(Report, JsonMatchesTable) {
  TempDir dir;
  std::vector<ScriptedItem> items;
  for (int i = 0; i < 30; ++i) {
    const bool split = i % 4 == 0;
    items.push_back({"i" + std::to_string(i), "frontend", "g",
                     split ? std::vector<mchr::testing::Answer>{{"frontend", 0.9}, {"backend", 0.9}, {"database", 0.9}}
                           : std::vector<mchr::testing::Answer>{{i % 5 ? "frontend" : "backend", 0.9}, {i % 5 ? "frontend" : "backend", 0.9}}});
  }
  auto s = run_fixture(dir, mchr::testing::closed_task(), items);
  for (const auto& id : s->state().review.pending_ids()) s->decide(id, "frontend", "ana", "");
  const RunReport rep = build_report({&s->state()});
  const nlohmann::json j = report_to_json(rep);
  const std::string table = render_table(rep);
  const auto& lv = j["levels"][0];
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f ±%.1f", lv["all"]["pct"].get<double>(), lv["all"]["half"].get<double>());
  EXPECT_NE(table.find(buf), std::string::npos) << table;
  std::snprintf(buf, sizeof buf, "%.2f", lv["hrr"].get<double>());
  EXPECT_NE(table.find(buf), std::string::npos) << table;
  std::snprintf(buf, sizeof buf, "%.2f", lv["reduction"].get<double>());
  EXPECT_NE(table.find(buf), std::string::npos) << table;
  EXPECT_EQ(lv["all"]["n"].get<int>(), lv["auto"]["n"].get<int>() + lv["human"]["n"].get<int>());
  EXPECT_FALSE(j["incomplete"].get<bool>());
}
