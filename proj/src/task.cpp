#include "mchr/task.hpp"

#include <fstream>
#include <set>

#include "mchr/error.hpp"
#include "mchr/taxonomy.hpp"

namespace mchr {

namespace {

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::config, "cannot read " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::config, path.string() + " is not valid JSON");
  return j;
}

}  // namespace

void TaskSpec::validate() const {
  auto fail = [&](const std::string& msg) { throw Error(Errc::config, "task '" + id + "': " + msg); };
  if (id.empty()) throw Error(Errc::config, "task id is empty");
  if (level < 1 || level > 4) fail("level must be 1..4");
  if (level == 4 && labels) fail("level 4 requires an OPEN label space");
  if (level < 4 && !labels) fail("levels 1-3 require a closed label space");
  if (labels) {
    if ((level == 1 || level == 2) && labels->size() != 2) fail("binary levels need exactly 2 labels");
    if (labels->size() < 2) fail("closed label space needs at least 2 labels");
    std::set<std::string> keys;
    for (const auto& l : *labels) {
      if (l.empty() || normalize_label(l) != l) fail("label '" + l + "' is not normalized");
      if (!keys.insert(label_key(l)).second) fail("labels collide after normalization: '" + l + "'");
    }
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) fail("threshold outside [0,1]");
  if (!(qc_rate >= 0.0 && qc_rate <= 1.0)) fail("qc_rate outside [0,1]");
}

TaskSpec task_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::config, "task must be a JSON object");
  TaskSpec t;
  try {
    t.id = j.at("id").get<std::string>();
    t.level = j.at("level").get<int>();
    if (auto it = j.find("labels"); it != j.end()) {
      if (it->is_string()) {
        if (it->get<std::string>() != "OPEN") throw Error(Errc::config, "labels must be a list or \"OPEN\"");
      } else {
        std::vector<std::string> labels;
        for (const auto& l : *it) labels.push_back(normalize_label(l.get<std::string>()));
        t.labels = std::move(labels);
      }
    } else if (t.level == 3) {
      t.labels = default_closed_labels();
    } else if (t.level != 4) {
      throw Error(Errc::config, "task '" + t.id + "' has no labels");
    }
    t.template_id = j.value("template", t.is_open() ? std::string("open-v1") : std::string("closed-v1"));
    t.instructions = j.value("instructions", std::string());
    if (auto it = j.find("known_categories"); it != j.end())
      t.known_categories = it->get<std::vector<std::string>>();
    if (auto it = j.find("templates"); it != j.end())
      t.templates = it->get<std::map<std::string, std::string>>();
    t.threshold = j.value("threshold", 0.8);
    t.qc_rate = j.value("qc_rate", 0.05);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::config, std::string("bad task: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::config) throw;
    throw Error(Errc::config, std::string("bad task: ") + e.what());
  }
  t.validate();
  return t;
}

nlohmann::json task_to_json(const TaskSpec& t) {
  nlohmann::json j;
  j["id"] = t.id;
  j["level"] = t.level;
  if (t.labels) j["labels"] = *t.labels;
  else j["labels"] = "OPEN";
  j["template"] = t.template_id;
  j["instructions"] = t.instructions;
  if (!t.known_categories.empty()) j["known_categories"] = t.known_categories;
  if (!t.templates.empty()) j["templates"] = t.templates;
  j["threshold"] = t.threshold;
  j["qc_rate"] = t.qc_rate;
  return j;
}

TaskSpec load_task(const std::filesystem::path& path) { return task_from_json(read_json_file(path)); }

std::string_view role_name(Role role) {
  switch (role) {
    case Role::primary1: return "primary-1";
    case Role::primary2: return "primary-2";
    case Role::tiebreaker: return "tiebreaker";
  }
  return "?";
}

Role parse_role(std::string_view s) {
  if (s == "primary-1") return Role::primary1;
  if (s == "primary-2") return Role::primary2;
  if (s == "tiebreaker") return Role::tiebreaker;
  throw Error(Errc::config, "unknown role '" + std::string(s) + "'");
}

std::string_view adapter_kind_name(AdapterKind kind) {
  switch (kind) {
    case AdapterKind::http_chat: return "http-chat";
    case AdapterKind::replay: return "replay";
    case AdapterKind::synthetic: return "synthetic";
  }
  return "?";
}

AdapterKind parse_adapter_kind(std::string_view s) {
  if (s == "http-chat") return AdapterKind::http_chat;
  if (s == "replay") return AdapterKind::replay;
  if (s == "synthetic") return AdapterKind::synthetic;
  throw Error(Errc::config, "unknown adapter kind '" + std::string(s) + "'");
}

ModelSpec model_from_json(const nlohmann::json& j) {
  ModelSpec m;
  try {
    m.id = j.at("id").get<std::string>();
    m.kind = parse_adapter_kind(j.at("kind").get<std::string>());
    m.role = parse_role(j.at("role").get<std::string>());
    m.settings = j.value("settings", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::config, std::string("bad model spec: ") + e.what());
  }
  if (m.id.empty()) throw Error(Errc::config, "model id is empty");
  if (!m.settings.is_object()) throw Error(Errc::config, "model settings must be an object");
  return m;
}

nlohmann::json model_to_json(const ModelSpec& m) {
  return {{"id", m.id},
          {"kind", adapter_kind_name(m.kind)},
          {"role", role_name(m.role)},
          {"settings", m.settings}};
}

nlohmann::json roster_to_json(const ModelRoster& roster) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : roster.models) arr.push_back(model_to_json(m));
  return arr;
}

ModelRoster ModelRoster::from_list(std::vector<ModelSpec> specs) {
  std::array<std::optional<ModelSpec>, 3> slots;
  std::set<std::string> ids;
  for (auto& s : specs) {
    auto& slot = slots[static_cast<std::size_t>(s.role)];
    if (slot) throw Error(Errc::config, "more than one model for role " + std::string(role_name(s.role)));
    if (!ids.insert(s.id).second) throw Error(Errc::config, "model id '" + s.id + "' used twice");
    slot = std::move(s);
  }
  ModelRoster roster;
  for (std::size_t i = 0; i < 3; ++i) {
    if (!slots[i]) {
      throw Error(Errc::config, "no model for role " + std::string(role_name(static_cast<Role>(i))));
    }
    roster.models[i] = std::move(*slots[i]);
  }
  return roster;
}

ModelRoster load_models(const std::filesystem::path& path) {
  nlohmann::json j = read_json_file(path);
  if (!j.is_array()) throw Error(Errc::config, "model config must be a JSON array");
  const auto base = path.parent_path();
  std::vector<ModelSpec> specs;
  for (const auto& entry : j) {
    ModelSpec m = model_from_json(entry);
    if (auto it = m.settings.find("fixture"); it != m.settings.end() && it->is_string()) {
      std::filesystem::path p = it->get<std::string>();
      if (p.is_relative()) *it = (base / p).lexically_normal().string();
    }
    specs.push_back(std::move(m));
  }
  return ModelRoster::from_list(std::move(specs));
}

}  // namespace mchr
