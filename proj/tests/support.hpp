#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mchr/gateway.hpp"
#include "mchr/task.hpp"

namespace mchr::testing {

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "mchr-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline ModelVerdict labeled(const std::string& model, const std::string& label, double conf,
                            const std::string& item = "x") {
  ModelVerdict v;
  v.model_id = model;
  v.item_id = item;
  v.status = VerdictStatus::labeled;
  v.label = label;
  v.confidence = conf;
  v.reasoning = "r";
  return v;
}

inline ModelVerdict abstained(const std::string& model, const std::string& item = "x") {
  ModelVerdict v;
  v.model_id = model;
  v.item_id = item;
  v.status = VerdictStatus::abstained;
  return v;
}

inline TaskSpec closed_task(std::vector<std::string> labels = {"frontend", "backend", "full-stack", "database",
                                                               "supporting tools"},
                            double threshold = 0.8, double qc_rate = 0.0) {
  TaskSpec t;
  t.id = "closed";
  t.level = 3;
  t.labels = std::move(labels);
  t.template_id = "closed-v1";
  t.threshold = threshold;
  t.qc_rate = qc_rate;
  return t;
}

inline TaskSpec open_task(double qc_rate = 0.0) {
  TaskSpec t;
  t.id = "open";
  t.level = 4;
  t.template_id = "open-v1";
  t.qc_rate = qc_rate;
  return t;
}

// One scripted answer; nullopt label means the model abstains (unparseable
// output on every attempt).
struct Answer {
  std::optional<std::string> label;
  double confidence = 0.9;
};

struct ScriptedItem {
  std::string id;
  std::string gold;
  std::string group = "g";
  std::vector<Answer> answers;  // primary-1, primary-2[, tiebreaker]
};

inline const std::vector<std::string>& model_ids() {
  static const std::vector<std::string> ids = {"model-a", "model-b", "model-c"};
  return ids;
}

// Writes task.json, dataset.jsonl, fixtures.jsonl and models.json for a
// replay run into `dir`.
inline void write_replay_inputs(const std::filesystem::path& dir, const TaskSpec& task,
                                const std::vector<ScriptedItem>& items) {
  std::filesystem::create_directories(dir);
  write_file(dir / "task.json", task_to_json(task).dump(2));
  std::string dataset, fixtures;
  for (const auto& it : items) {
    dataset += nlohmann::json{{"id", it.id}, {"content", "content of " + it.id}, {"group", it.group}, {"gold", it.gold}}
                   .dump() +
               "\n";
    for (std::size_t r = 0; r < it.answers.size(); ++r) {
      const Answer& a = it.answers[r];
      for (int attempt = 1; attempt <= 1 + kMaxRepairRetries; ++attempt) {
        std::string response = a.label ? nlohmann::json{{"label", *a.label},
                                                        {"confidence", a.confidence},
                                                        {"reasoning", model_ids()[r] + " on " + it.id}}
                                             .dump()
                                       : std::string("I cannot tell.");
        fixtures += nlohmann::json{{"model", model_ids()[r]}, {"item", it.id}, {"attempt", attempt}, {"response", response}}
                        .dump() +
                    "\n";
        if (a.label) break;
      }
    }
  }
  write_file(dir / "dataset.jsonl", dataset);
  write_file(dir / "fixtures.jsonl", fixtures);
  nlohmann::json models = nlohmann::json::array();
  const char* roles[] = {"primary-1", "primary-2", "tiebreaker"};
  for (int r = 0; r < 3; ++r)
    models.push_back({{"id", model_ids()[r]}, {"kind", "replay"}, {"role", roles[r]}, {"settings", {{"fixture", "fixtures.jsonl"}}}});
  write_file(dir / "models.json", models.dump(2));
}

}  // namespace mchr::testing
