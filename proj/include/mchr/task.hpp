#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace mchr {

// Difficulty levels 1-3 classify into a closed label space; level 4 is
// open-set and may propose new category labels.
struct TaskSpec {
  std::string id;
  int level = 1;
  std::optional<std::vector<std::string>> labels;  // nullopt: open label space
  std::string template_id = "closed-v1";
  std::string instructions;
  std::vector<std::string> known_categories;       // open tasks: shown in the prompt
  std::map<std::string, std::string> templates;    // user-supplied template texts
  double threshold = 0.8;
  double qc_rate = 0.05;

  bool is_open() const { return !labels.has_value(); }

  // Throws Errc::config when an invariant fails.
  void validate() const;

  bool operator==(const TaskSpec&) const = default;
};

inline const std::vector<std::string>& default_closed_labels() {
  static const std::vector<std::string> labels{"frontend", "backend", "full-stack", "database",
                                               "supporting tools"};
  return labels;
}

TaskSpec task_from_json(const nlohmann::json& j);
nlohmann::json task_to_json(const TaskSpec& task);
TaskSpec load_task(const std::filesystem::path& path);

enum class Role { primary1, primary2, tiebreaker };
enum class AdapterKind { http_chat, replay, synthetic };

std::string_view role_name(Role role);
Role parse_role(std::string_view s);
std::string_view adapter_kind_name(AdapterKind kind);
AdapterKind parse_adapter_kind(std::string_view s);

struct ModelSpec {
  std::string id;
  AdapterKind kind = AdapterKind::replay;
  Role role = Role::primary1;
  nlohmann::json settings = nlohmann::json::object();

  bool operator==(const ModelSpec&) const = default;
};

// The three models of a run, indexed by Role.
struct ModelRoster {
  std::array<ModelSpec, 3> models;

  const ModelSpec& operator[](Role r) const { return models[static_cast<std::size_t>(r)]; }
  bool operator==(const ModelRoster&) const = default;

  // Throws Errc::config unless there is exactly one model per role with
  // distinct ids.
  static ModelRoster from_list(std::vector<ModelSpec> specs);
};

ModelSpec model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const ModelSpec& spec);
nlohmann::json roster_to_json(const ModelRoster& roster);

// Relative paths in settings ("fixture") are resolved against the directory
// of the config file.
ModelRoster load_models(const std::filesystem::path& path);

}  // namespace mchr
