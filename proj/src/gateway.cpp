#include "mchr/gateway.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mchr/error.hpp"
#include "mchr/rng.hpp"
#include "mchr/taxonomy.hpp"

namespace mchr {

namespace {

constexpr std::string_view kClosedTemplate =
    R"(You are annotating content for a classification study.

Task: {{instructions}}

Choose exactly one label from this list:
{{labels}}

Content to classify:
<<<
{{content}}
>>>

Respond with a single JSON object and nothing else, in this format:
{{format}}
The confidence is your probability, between 0 and 1, that the label is correct.
)";

constexpr std::string_view kOpenTemplate =
    R"(You are annotating content for an open-set classification study.

Task: {{instructions}}

Known categories (the list may be incomplete):
{{known_categories}}

Prefer a known category when one fits. If none of them fits, propose a new,
concise category label (two to four words) naming what the content is for.

Content to classify:
<<<
{{content}}
>>>

Respond with a single JSON object and nothing else, in this format:
{{format}}
The confidence is your probability, between 0 and 1, that the label is correct.
)";

std::string bullet_list(const std::vector<std::string>& xs) {
  if (xs.empty()) return "(none yet)";
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += '\n';
    out += "- " + xs[i];
  }
  return out;
}

std::string_view find_template(const TaskSpec& task) {
  if (auto it = task.templates.find(task.template_id); it != task.templates.end()) return it->second;
  if (task.template_id == "closed-v1") return kClosedTemplate;
  if (task.template_id == "open-v1") return kOpenTemplate;
  throw Error(Errc::config, "unknown prompt template '" + task.template_id + "'");
}

// End offset (exclusive) of the balanced object starting at `start`, honoring
// JSON string quoting; npos if it never closes.
std::size_t balanced_end(std::string_view s, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = start; i < s.size(); ++i) {
    char c = s[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i + 1;
  }
  return std::string_view::npos;
}

std::string format_conf(double c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", c);
  return buf;
}

}  // namespace

RenderedPrompt render_prompt(const TaskSpec& task, const ContentItem& item) {
  const std::string_view tpl = find_template(task);
  std::string out;
  out.reserve(tpl.size() + item.content.size());
  std::size_t pos = 0;
  while (pos < tpl.size()) {
    const std::size_t open = tpl.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(tpl.substr(pos));
      break;
    }
    const std::size_t close = tpl.find("}}", open + 2);
    if (close == std::string_view::npos) throw Error(Errc::config, "unterminated placeholder in template '" + task.template_id + "'");
    out.append(tpl.substr(pos, open - pos));
    const std::string_view name = tpl.substr(open + 2, close - open - 2);
    if (name == "content") out += item.content;
    else if (name == "instructions") out += task.instructions;
    else if (name == "labels") out += task.labels ? bullet_list(*task.labels) : std::string("(open set)");
    else if (name == "known_categories") out += bullet_list(task.known_categories);
    else if (name == "format") out += kResponseFormat;
    else throw Error(Errc::config, "unknown placeholder {{" + std::string(name) + "}} in template '" + task.template_id + "'");
    pos = close + 2;
  }
  return {task.template_id, std::move(out), item.id};
}

std::string_view format_error_name(FormatErrorKind kind) {
  switch (kind) {
    case FormatErrorKind::unparseable: return "unparseable";
    case FormatErrorKind::schema: return "schema";
    case FormatErrorKind::label_out_of_space: return "label-out-of-space";
  }
  return "?";
}

ParseResult parse_verdict(std::string_view raw, const TaskSpec& task, std::string_view model_id,
                          std::string_view item_id) {
  nlohmann::json obj;
  bool found = false;
  for (std::size_t start = raw.find('{'); start != std::string_view::npos; start = raw.find('{', start + 1)) {
    const std::size_t end = balanced_end(raw, start);
    if (end == std::string_view::npos) continue;
    auto j = nlohmann::json::parse(raw.substr(start, end - start), nullptr, false);
    if (!j.is_discarded() && j.is_object()) {
      obj = std::move(j);
      found = true;
      break;
    }
  }
  if (!found) return FormatError{FormatErrorKind::unparseable, "no JSON object in response"};

  auto schema = [](std::string msg) { return FormatError{FormatErrorKind::schema, std::move(msg)}; };
  auto label = obj.find("label");
  if (label == obj.end() || !label->is_string()) return schema("'label' must be a string");
  auto conf = obj.find("confidence");
  if (conf == obj.end() || !conf->is_number()) return schema("'confidence' must be a number");
  auto reasoning = obj.find("reasoning");
  if (reasoning == obj.end() || !reasoning->is_string()) return schema("'reasoning' must be a string");
  const double c = conf->get<double>();
  if (!(c >= 0.0 && c <= 1.0)) return schema("'confidence' outside [0,1]");

  std::string normalized;
  try {
    normalized = normalize_label(label->get<std::string>());
  } catch (const Error&) {
    return schema("'label' is empty");
  }
  if (task.labels) {
    auto hit = match_closed_label(*task.labels, normalized);
    if (!hit) return FormatError{FormatErrorKind::label_out_of_space, "label '" + normalized + "' is not a task label"};
    normalized = *hit;
  }

  ModelVerdict v;
  v.model_id = model_id;
  v.item_id = item_id;
  v.status = VerdictStatus::labeled;
  v.label = std::move(normalized);
  v.confidence = c;
  v.reasoning = reasoning->get<std::string>();
  v.raw_response = raw;
  return v;
}

std::string repair_suffix(const FormatError& error) {
  std::string s = "\n\nYour previous response was rejected (";
  s += format_error_name(error.kind);
  s += ": " + error.message + "). Reply again with only the JSON object in this format:\n";
  s += kResponseFormat;
  s += '\n';
  return s;
}

ModelVerdict query_with_repair(ModelAdapter& adapter, const ModelSpec& model, const RenderedPrompt& prompt,
                               const TaskSpec& task) {
  RenderedPrompt current = prompt;
  std::string raw;
  for (int attempt = 1; attempt <= 1 + kMaxRepairRetries; ++attempt) {
    raw = adapter.complete(model, current, attempt);
    auto parsed = parse_verdict(raw, task, model.id, prompt.item_id);
    if (auto* v = std::get_if<ModelVerdict>(&parsed)) {
      v->attempts = attempt;
      return std::move(*v);
    }
    current.text = prompt.text + repair_suffix(std::get<FormatError>(parsed));
  }
  ModelVerdict v;
  v.model_id = model.id;
  v.item_id = prompt.item_id;
  v.status = VerdictStatus::abstained;
  v.attempts = 1 + kMaxRepairRetries;
  v.raw_response = std::move(raw);
  return v;
}

ReplayAdapter::ReplayAdapter(const std::filesystem::path& fixture) {
  std::ifstream in(fixture, std::ios::binary);
  if (!in) throw Error(Errc::config, "cannot read replay fixture " + fixture.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    try {
      if (j.is_discarded()) throw std::runtime_error("not JSON");
      responses_[{j.at("model").get<std::string>(), j.at("item").get<std::string>(), j.at("attempt").get<int>()}] =
          j.at("response").get<std::string>();
    } catch (const std::exception& e) {
      throw Error(Errc::config, fixture.string() + ":" + std::to_string(lineno) + ": bad fixture entry (" + e.what() + ")");
    }
  }
}

std::string ReplayAdapter::complete(const ModelSpec& model, const RenderedPrompt& prompt, int attempt) {
  auto it = responses_.find({model.id, prompt.item_id, attempt});
  if (it == responses_.end()) {
    throw Error(Errc::adapter, "no fixture response for model '" + model.id + "', item '" + prompt.item_id +
                                   "', attempt " + std::to_string(attempt));
  }
  return it->second;
}

void SyntheticProfile::validate() const {
  auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in01(accuracy) || !in01(conf_correct_lo) || !in01(conf_wrong_lo) || !in01(conf_wrong_hi) ||
      !in01(correlation) || !in01(novel_rate)) {
    throw Error(Errc::config, "profile '" + id + "': probabilities and confidence bounds must lie in [0,1]");
  }
  if (conf_wrong_lo > conf_wrong_hi) throw Error(Errc::config, "profile '" + id + "': conf_wrong_lo > conf_wrong_hi");
}

SyntheticProfile profile_from_json(const nlohmann::json& j) {
  SyntheticProfile p;
  try {
    p.id = j.value("id", std::string());
    p.accuracy = j.value("accuracy", p.accuracy);
    p.conf_correct_lo = j.value("conf_correct_lo", p.conf_correct_lo);
    p.conf_wrong_lo = j.value("conf_wrong_lo", p.conf_wrong_lo);
    p.conf_wrong_hi = j.value("conf_wrong_hi", p.conf_wrong_hi);
    p.seed = j.value("seed", p.seed);
    p.correlation = j.value("correlation", p.correlation);
    p.shared_seed = j.value("shared_seed", p.shared_seed);
    p.novel_rate = j.value("novel_rate", p.novel_rate);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::config, std::string("bad synthetic profile: ") + e.what());
  }
  p.validate();
  return p;
}

SyntheticDraw synthetic_draw(const SyntheticProfile& p, const std::vector<std::string>& space,
                             const std::string& gold, std::string_view item_id, bool open) {
  std::mt19937_64 own(derive_seed(p.seed ^ hash_string(p.id), item_id));
  std::mt19937_64 shared(derive_seed(p.shared_seed, item_id, 1));
  std::mt19937_64& src = (p.correlation > 0.0 && unit_double(own) < p.correlation) ? shared : own;

  SyntheticDraw d;
  const bool correct = unit_double(src) < p.accuracy;
  if (correct) {
    d.label = gold;
  } else {
    std::vector<const std::string*> wrong;
    for (const auto& l : space)
      if (l != gold) wrong.push_back(&l);
    if (wrong.empty() || (open && unit_double(src) < p.novel_rate)) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "novel-%08llx", static_cast<unsigned long long>(src() >> 32));
      d.label = buf;
    } else {
      d.label = *wrong[bounded(src, wrong.size())];
    }
  }
  const double u = unit_double(own);
  d.confidence = correct ? p.conf_correct_lo + (1.0 - p.conf_correct_lo) * u
                         : p.conf_wrong_lo + (p.conf_wrong_hi - p.conf_wrong_lo) * u;
  return d;
}

SyntheticAdapter::SyntheticAdapter(SyntheticProfile profile, std::vector<std::string> space, bool open,
                                   std::shared_ptr<const std::map<std::string, std::string>> gold)
    : profile_(std::move(profile)), space_(std::move(space)), open_(open), gold_(std::move(gold)) {}

std::string SyntheticAdapter::complete(const ModelSpec&, const RenderedPrompt& prompt, int) {
  auto it = gold_->find(prompt.item_id);
  if (it == gold_->end()) throw Error(Errc::adapter, "synthetic model '" + profile_.id + "' needs a gold label for item '" + prompt.item_id + "'");
  const SyntheticDraw d = synthetic_draw(profile_, space_, it->second, prompt.item_id, open_);
  nlohmann::json j = {{"label", d.label}, {"confidence", std::stod(format_conf(d.confidence))}, {"reasoning", "synthetic"}};
  return j.dump();
}


Gateway::Gateway(ModelRoster roster, std::array<std::shared_ptr<ModelAdapter>, 3> adapters,
                 std::ptrdiff_t max_in_flight)
    : roster_(std::move(roster)), adapters_(std::move(adapters)), in_flight_(std::max<std::ptrdiff_t>(1, max_in_flight)) {
  for (const auto& a : adapters_)
    if (!a) throw Error(Errc::config, "gateway needs an adapter for every role");
}

ModelVerdict Gateway::query(Role role, const RenderedPrompt& prompt, const TaskSpec& task) {
  const auto i = static_cast<std::size_t>(role);
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{in_flight_};
  ModelVerdict v = query_with_repair(*adapters_[i], roster_.models[i], prompt, task);
  calls_[i].fetch_add(1, std::memory_order_relaxed);
  return v;
}

std::uint64_t Gateway::calls(Role role) const {
  return calls_[static_cast<std::size_t>(role)].load(std::memory_order_relaxed);
}

std::unique_ptr<Gateway> make_gateway(const ModelRoster& roster, const TaskSpec& task,
                                      std::span<const ContentItem> items, std::ptrdiff_t max_in_flight) {
  auto gold = std::make_shared<std::map<std::string, std::string>>();
  std::vector<std::string> gold_labels;
  for (const auto& item : items) {
    if (!item.gold) continue;
    (*gold)[item.id] = *item.gold;
    gold_labels.push_back(*item.gold);
  }
  std::sort(gold_labels.begin(), gold_labels.end());
  gold_labels.erase(std::unique(gold_labels.begin(), gold_labels.end()), gold_labels.end());

  std::map<std::string, std::shared_ptr<ReplayAdapter>> replays;
  std::array<std::shared_ptr<ModelAdapter>, 3> adapters;
  for (std::size_t i = 0; i < 3; ++i) {
    const ModelSpec& m = roster.models[i];
    switch (m.kind) {
      case AdapterKind::replay: {
        auto it = m.settings.find("fixture");
        if (it == m.settings.end() || !it->is_string())
          throw Error(Errc::config, "replay model '" + m.id + "' needs settings.fixture");
        auto& slot = replays[it->get<std::string>()];
        if (!slot) slot = std::make_shared<ReplayAdapter>(it->get<std::string>());
        adapters[i] = slot;
        break;
      }
      case AdapterKind::synthetic: {
        nlohmann::json settings = m.settings;
        settings["id"] = m.id;
        std::vector<std::string> space = task.labels ? *task.labels : gold_labels;
        if (!task.labels && settings.contains("pool")) space = settings["pool"].get<std::vector<std::string>>();
        adapters[i] = std::make_shared<SyntheticAdapter>(profile_from_json(settings), std::move(space),
                                                         task.is_open(), gold);
        break;
      }
      case AdapterKind::http_chat:
        adapters[i] = std::make_shared<HttpChatAdapter>(m);
        break;
    }
  }
  return std::make_unique<Gateway>(roster, std::move(adapters), max_in_flight);
}

}  // namespace mchr
