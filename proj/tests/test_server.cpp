#include <gtest/gtest.h>

#include <thread>

#include <httplib.h>

#include "mchr/ingest.hpp"
#include "mchr/server.hpp"
#include "mchr/session.hpp"
#include "support.hpp"

using namespace mchr;
using mchr::testing::ScriptedItem;
using mchr::testing::TempDir;

namespace {

std::vector<ScriptedItem> items() {
  return {
      {"q1", "frontend", "css", {{"frontend", 0.95}, {"frontend", 0.9}}},
      {"q2", "backend", "node", {{"backend", 0.9}, {"backend", 0.88}}},
      {"q5", "full-stack", "node", {{"backend", 0.8}, {"frontend", 0.7}, {"database", 0.6}}},
      {"q6", "frontend", "css", {{"frontend", 0.9}, {"full-stack", 0.85}, {"frontend", 0.7}}},
      {"q7", "database", "sql", {{"database", 0.6}, {"backend", 0.9}, {"database", 0.95}}},
  };
}

struct ReplayRun {
  TempDir dir;
  std::unique_ptr<RunSession> session;

  explicit ReplayRun(const TaskSpec& task, const std::vector<ScriptedItem>& scripted = items()) {
    mchr::testing::write_replay_inputs(dir.path(), task, scripted);
    const LoadedDataset data = load_dataset(dir / "dataset.jsonl");
    const ModelRoster roster = load_models(dir / "models.json");
    auto gateway = make_gateway(roster, task, data.items);
    RunOptions options;
    options.seed = 3;
    options.fsync = false;
    session = RunSession::create(dir / "run", task, roster, data.manifest, options);
    session->annotate(data.items, *gateway);
  }

  std::size_t events() const {
    const std::string text = mchr::testing::read_file(dir / "run/events.jsonl");
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
  }
};

ApiRequest get(std::string path, std::multimap<std::string, std::string> params = {}) {
  return {"GET", std::move(path), std::move(params), "", ""};
}

ApiRequest post(std::string path, const nlohmann::json& body, std::string reviewer = "") {
  return {"POST", std::move(path), {}, body.dump(), std::move(reviewer)};
}

}  // namespace

TEST(Api, ListAndFetch) {
  ReplayRun run(mchr::testing::closed_task());
  ApiServer api(*run.session);
  const ApiResponse all = api.dispatch(get("/api/cases"));
  ASSERT_EQ(all.status, 200);
  ASSERT_EQ(all.body["cases"].size(), 3u);
  EXPECT_TRUE(all.body["next_cursor"].is_null());
  EXPECT_EQ(all.body["cases"][0]["case_id"], "case-1");
  EXPECT_EQ(all.body["cases"][0]["reason"], "disagreement");

  const ApiResponse page = api.dispatch(get("/api/cases", {{"limit", "2"}}));
  ASSERT_EQ(page.body["cases"].size(), 2u);
  const std::string cursor = page.body["next_cursor"];
  const ApiResponse rest = api.dispatch(get("/api/cases", {{"limit", "2"}, {"cursor", cursor}}));
  ASSERT_EQ(rest.body["cases"].size(), 1u);
  EXPECT_EQ(rest.body["cases"][0]["case_id"], "case-3");

  const ApiResponse low = api.dispatch(get("/api/cases", {{"reason", "low-confidence"}}));
  EXPECT_EQ(low.body["cases"].size(), 2u);

  const ApiResponse one = api.dispatch(get("/api/cases/case-1"));
  ASSERT_EQ(one.status, 200);
  EXPECT_EQ(one.body["verdicts"].size(), 3u);
  EXPECT_TRUE(one.body["consensus"].is_null());
  EXPECT_EQ(api.dispatch(get("/api/cases/case-99")).status, 404);
}

TEST(Api, BadQueries) {
  ReplayRun run(mchr::testing::closed_task());
  ApiServer api(*run.session);
  for (const char* limit : {"0", "1001", "x", "-1"}) {
    const ApiResponse r = api.dispatch(get("/api/cases", {{"limit", limit}}));
    EXPECT_EQ(r.status, 400) << limit;
    EXPECT_EQ(r.body["error_code"], "validation");
  }
  const ApiResponse cursor = api.dispatch(get("/api/cases", {{"cursor", "nonsense"}}));
  EXPECT_EQ(cursor.status, 400);
  EXPECT_EQ(cursor.body["error_code"], "bad_cursor");
  EXPECT_EQ(api.dispatch(get("/api/cases", {{"status", "sideways"}})).status, 400);
  EXPECT_EQ(api.dispatch(get("/nowhere")).status, 404);
  EXPECT_EQ(api.dispatch(post("/api/report", nlohmann::json::object())).status, 405);
  EXPECT_EQ(api.dispatch({"POST", "/api/cases/case-1/decision", {}, "not json", "x"}).status, 400);
}

TEST(Api, Decisions) {
  ReplayRun run(mchr::testing::closed_task());
  ApiServer api(*run.session);
  const std::size_t before = run.events();

  const ApiResponse ok = api.dispatch(post("/api/cases/case-1/decision", {{"label", "Full-Stack"}, {"rationale", "both"}}, "dana"));
  ASSERT_EQ(ok.status, 200) << ok.body.dump();
  EXPECT_EQ(ok.body["case_id"], "case-1");
  EXPECT_EQ(ok.body["final"], "full-stack");
  EXPECT_EQ(ok.body["source"], "Human");
  EXPECT_EQ(run.events(), before + 1);

  const ApiResponse again = api.dispatch(post("/api/cases/case-1/decision", {{"label", "frontend"}, {"reviewer", "dana"}}));
  EXPECT_EQ(again.status, 409);
  EXPECT_EQ(again.body["error_code"], "conflict");
  const ApiResponse bogus = api.dispatch(post("/api/cases/case-2/decision", {{"label", "bogus"}, {"reviewer", "dana"}}));
  EXPECT_EQ(bogus.status, 422);
  const ApiResponse nobody = api.dispatch(post("/api/cases/case-2/decision", {{"label", "frontend"}}));
  EXPECT_EQ(nobody.status, 400);
  EXPECT_EQ(api.dispatch(post("/api/cases/case-9/decision", {{"label", "frontend"}, {"reviewer", "d"}})).status, 404);
  EXPECT_EQ(run.events(), before + 1);

  const ApiResponse decided = api.dispatch(get("/api/cases", {{"status", "decided"}}));
  EXPECT_EQ(decided.body["cases"].size(), 1u);
  EXPECT_EQ(api.dispatch(get("/api/cases/case-1")).body["decision"]["reviewer"], "dana");
}

TEST(Api, ReportWhilePending) {
  ReplayRun run(mchr::testing::closed_task());
  ApiServer api(*run.session);
  const ApiResponse r = api.dispatch(get("/api/report"));
  ASSERT_EQ(r.status, 200);
  EXPECT_TRUE(r.body["incomplete"].get<bool>());
  EXPECT_EQ(r.body["levels"][0]["n"], 5);
  EXPECT_DOUBLE_EQ(r.body["levels"][0]["hrr"].get<double>(), 60.0);
}

TEST(Api, TaxonomyMerge) {
  const std::vector<ScriptedItem> open_items = {
      {"o1", "react", "g", {{"React", 0.9}, {"react", 0.9}}},
      {"o2", "react", "g", {{"ReactJS", 0.9}, {"ReactJS", 0.95}}},
      {"o3", "vue", "g", {{"Vue", 0.9}, {"vue", 0.9}}},
  };
  ReplayRun run(mchr::testing::open_task(), open_items);
  ApiServer api(*run.session);
  const ApiResponse tax = api.dispatch(get("/api/taxonomy"));
  ASSERT_EQ(tax.status, 200);
  EXPECT_TRUE(tax.body["open"].get<bool>());

  const std::size_t before = run.events();
  const ApiResponse merged = api.dispatch(post("/api/taxonomy/merge", {{"from", "reactjs"}, {"into", "react"}}, "dana"));
  ASSERT_EQ(merged.status, 200) << merged.body.dump();
  EXPECT_EQ(run.events(), before + 1);
  EXPECT_EQ(api.dispatch(post("/api/taxonomy/merge", {{"from", "reactjs"}, {"into", "react"}})).status, 409);
  EXPECT_EQ(api.dispatch(post("/api/taxonomy/merge", {{"from", "angular"}, {"into", "react"}})).status, 409);
  EXPECT_EQ(run.events(), before + 1);

  ReplayRun closed(mchr::testing::closed_task());
  ApiServer capi(*closed.session);
  EXPECT_EQ(capi.dispatch(post("/api/taxonomy/merge", {{"from", "frontend"}, {"into", "backend"}})).status, 409);
}

// Nothing the reviewer sees carries the reference label.
TEST(Api, Blindness) {
  const std::vector<std::string> labels = {"frontend", "backend", "database", "unspoken-reference"};
  std::vector<ScriptedItem> hidden;
  for (int i = 0; i < 6; ++i)
    hidden.push_back({"h" + std::to_string(i), "unspoken-reference", "g",
                      {{"frontend", 0.9}, {"backend", 0.9}, {i % 2 ? "database" : "frontend", 0.5}}});
  ReplayRun run(mchr::testing::closed_task(labels, 0.8, 1.0), hidden);
  ApiServer api(*run.session);
  const ApiResponse list = api.dispatch(get("/api/cases"));
  ASSERT_EQ(list.body["cases"].size(), 6u);
  auto clean = [](const nlohmann::json& j) {
    const std::string text = j.dump();
    EXPECT_EQ(text.find("unspoken-reference"), std::string::npos) << text;
    EXPECT_EQ(text.find("\"gold\""), std::string::npos) << text;
  };
  clean(list.body);
  for (const auto& c : list.body["cases"]) clean(api.dispatch(get("/api/cases/" + c["case_id"].get<std::string>())).body);
}

TEST(Api, OverHttp) {
  ReplayRun run(mchr::testing::closed_task());
  ApiServer api(*run.session, ServerOptions{true, "*", std::nullopt});
  const int port = api.bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  std::thread t([&] { api.serve(); });
  httplib::Client client("127.0.0.1", port);
  auto listed = client.Get("/api/cases");
  for (int i = 0; !listed && i < 50; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    listed = client.Get("/api/cases");
  }
  ASSERT_TRUE(listed);
  EXPECT_EQ(listed->status, 200);
  EXPECT_EQ(listed->get_header_value("Access-Control-Allow-Origin"), "*");
  EXPECT_EQ(nlohmann::json::parse(listed->body)["cases"].size(), 3u);

  httplib::Headers headers = {{"X-Reviewer-Name", "kim"}};
  auto decided = client.Post("/api/cases/case-2/decision", headers, R"({"label":"frontend"})", "application/json");
  ASSERT_TRUE(decided);
  EXPECT_EQ(decided->status, 200);
  EXPECT_EQ(nlohmann::json::parse(client.Get("/api/cases/case-2")->body)["decision"]["reviewer"], "kim");
  auto busy = client.Post("/api/cases/case-2/decision", headers, R"({"label":"frontend"})", "application/json");
  ASSERT_TRUE(busy);
  EXPECT_EQ(busy->status, 409);

  ApiServer second(*run.session);
  EXPECT_EQ(second.bind("127.0.0.1", port), -1);
  api.stop();
  t.join();
}
