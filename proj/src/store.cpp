#include "mchr/store.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "mchr/codec.hpp"
#include "mchr/error.hpp"

namespace mchr {

namespace {

struct KindName {
  EventKind kind;
  std::string_view name;
};

constexpr std::array<KindName, 11> kKindNames{{
    {EventKind::run_started, "run-started"},
    {EventKind::item_loaded, "item-loaded"},
    {EventKind::verdict, "verdict"},
    {EventKind::consensus, "consensus"},
    {EventKind::routed, "routed"},
    {EventKind::case_enqueued, "case-enqueued"},
    {EventKind::case_decided, "case-decided"},
    {EventKind::qc_audited, "qc-audited"},
    {EventKind::taxonomy_merged, "taxonomy-merged"},
    {EventKind::item_failed, "item-failed"},
    {EventKind::run_completed, "run-completed"},
}};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::input, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Splits into complete lines; `torn` receives a trailing fragment without a
// newline.
std::vector<std::string_view> complete_lines(std::string_view text, std::string_view* torn) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      *torn = text.substr(pos);
      break;
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

}  // namespace

std::string_view event_kind_name(EventKind k) {
  for (const auto& kn : kKindNames)
    if (kn.kind == k) return kn.name;
  return "?";
}

EventKind parse_event_kind(std::string_view s) {
  for (const auto& kn : kKindNames)
    if (kn.name == s) return kn.kind;
  throw Error(Errc::corruption, "unknown event kind '" + std::string(s) + "'");
}

bool allowed_after_completion(EventKind k) {
  return k == EventKind::case_decided || k == EventKind::qc_audited || k == EventKind::taxonomy_merged;
}

std::string EventRecord::to_line() const {
  // Fixed key order keeps lines diffable; payload keys are sorted by nlohmann.
  return R"({"seq":)" + std::to_string(seq) + R"(,"ts":)" + nlohmann::json(ts).dump() + R"(,"kind":")" +
         std::string(event_kind_name(kind)) + R"(","payload":)" + payload.dump() + "}";
}

EventRecord EventRecord::from_line(std::string_view line) {
  auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::corruption, "malformed event line");
  EventRecord e;
  try {
    e.seq = j.at("seq").get<std::uint64_t>();
    e.ts = j.at("ts").get<std::string>();
    e.kind = parse_event_kind(j.at("kind").get<std::string>());
    e.payload = j.at("payload");
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::corruption, std::string("malformed event: ") + ex.what());
  }
  return e;
}

std::string now_rfc3339() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const std::time_t t = system_clock::to_time_t(now);
  const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char date[32];
  std::strftime(date, sizeof date, "%Y-%m-%dT%H:%M:%S", &tm);
  char frac[8];
  std::snprintf(frac, sizeof frac, ".%03dZ", static_cast<int>(ms));
  return std::string(date) + frac;
}

EventLog::EventLog(const std::filesystem::path& path, Options options) : path_(path), options_(options) {
  if (std::filesystem::exists(path_)) {
    const std::string text = read_file(path_);
    std::string_view torn;
    const auto lines = complete_lines(text, &torn);
    for (auto line : lines) {
      if (line.empty()) continue;
      EventRecord e = EventRecord::from_line(line);
      if (e.seq != last_seq_ + 1) throw Error(Errc::corruption, "event log " + path_.string() + " has a seq gap");
      last_seq_ = e.seq;
      if (e.kind == EventKind::run_completed) completed_ = true;
    }
    if (!torn.empty()) std::filesystem::resize_file(path_, text.size() - torn.size());
  }
  written_seq_ = last_seq_;
  file_ = std::fopen(path_.c_str(), "ab");
  if (!file_) throw Error(Errc::storage, "cannot open " + path_.string() + " for appending");
}

EventLog::~EventLog() {
  if (file_) std::fclose(file_);
}

EventRecord EventLog::stamp(EventKind kind, nlohmann::json payload) {
  std::lock_guard lock(mu_);
  if (completed_ && !allowed_after_completion(kind)) {
    throw Error(Errc::contract, "cannot append " + std::string(event_kind_name(kind)) + " after run-completed");
  }
  EventRecord e;
  e.seq = ++last_seq_;
  e.ts = clock_();
  e.kind = kind;
  e.payload = std::move(payload);
  if (kind == EventKind::run_completed) completed_ = true;
  return e;
}

void EventLog::write(const EventRecord& record) {
  std::lock_guard lock(mu_);
  if (record.seq != written_seq_ + 1) throw Error(Errc::contract, "events must be written in stamp order");
  if (file_) {
    const std::string line = record.to_line() + "\n";
    if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0 ||
        (options_.fsync && ::fsync(fileno(file_)) != 0)) {
      throw Error(Errc::storage, "failed to write " + path_.string());
    }
  }
  written_seq_ = record.seq;
}

void EventLog::cancel(const EventRecord& record) {
  std::lock_guard lock(mu_);
  if (record.seq != last_seq_ || record.seq != written_seq_ + 1) throw Error(Errc::contract, "can only cancel the latest unwritten stamp");
  --last_seq_;
  if (record.kind == EventKind::run_completed) completed_ = false;
}

EventRecord EventLog::append(EventKind kind, nlohmann::json payload) {
  EventRecord e = stamp(kind, std::move(payload));
  write(e);
  return e;
}

const ContentItem& RunState::item(const std::string& id) const {
  auto it = item_index.find(id);
  if (it == item_index.end()) throw Error(Errc::not_found, "unknown item '" + id + "'");
  return items[it->second];
}

void RunState::apply(const EventRecord& e) {
  if (e.seq != last_seq + 1) {
    throw Error(Errc::corruption, "expected seq " + std::to_string(last_seq + 1) + ", got " + std::to_string(e.seq));
  }
  if (!started && e.kind != EventKind::run_started) throw Error(Errc::corruption, "log does not begin with run-started");
  if (completed && !allowed_after_completion(e.kind)) {
    throw Error(Errc::contract, std::string(event_kind_name(e.kind)) + " after run-completed");
  }
  const auto& p = e.payload;
  auto item_id = [&] { return p.at("item").get<std::string>(); };
  auto outcome_of = [&](const std::string& id) -> ConsensusOutcome& {
    auto it = outcomes.find(id);
    if (it == outcomes.end()) throw Error(Errc::contract, "no consensus for item '" + id + "'");
    return it->second;
  };

  switch (e.kind) {
    case EventKind::run_started: {
      if (started) throw Error(Errc::corruption, "second run-started");
      TaskSpec t = task_from_json(p.at("task"));
      std::vector<ModelSpec> specs;
      for (const auto& m : p.at("models")) specs.push_back(model_from_json(m));
      ModelRoster r = ModelRoster::from_list(std::move(specs));
      DatasetManifest mf = manifest_from_json(p.at("manifest"));
      task = std::move(t);
      models = std::move(r);
      manifest = std::move(mf);
      seed = p.at("seed").get<std::uint64_t>();
      config = p.value("config", nlohmann::json::object());
      started = true;
      break;
    }
    case EventKind::item_loaded: {
      ContentItem it = item_from_json(p.at("item"));
      if (item_index.contains(it.id)) throw Error(Errc::validation, "item '" + it.id + "' loaded twice");
      item_index[it.id] = items.size();
      items.push_back(std::move(it));
      break;
    }
    case EventKind::verdict: {
      const std::string id = item_id();
      item(id);
      const Role role = parse_role(p.at("role").get<std::string>());
      ModelVerdict v = verdict_from_json(p.at("verdict"));
      auto& list = verdicts[id];
      if (static_cast<std::size_t>(role) != list.size()) {
        if (list.empty()) verdicts.erase(id);
        throw Error(Errc::contract, "verdicts for item '" + id + "' out of role order");
      }
      if (v.model_id != models[role].id) throw Error(Errc::contract, "verdict model does not match role");
      list.push_back(std::move(v));
      break;
    }
    case EventKind::consensus: {
      const std::string id = item_id();
      if (outcomes.contains(id)) throw Error(Errc::conflict, "second consensus for item '" + id + "'");
      ConsensusOutcome o;
      o.item_id = id;
      o.agreement = parse_agreement(p.at("agreement").get<std::string>());
      if (auto c = p.find("consensus"); c != p.end() && !c->is_null()) o.consensus = c->get<std::string>();
      o.canonical = p.at("canonical").get<std::vector<std::string>>();
      o.divergence = divergence_from_json(p.at("divergence"));
      auto vit = verdicts.find(id);
      if (vit == verdicts.end() || vit->second.size() != o.canonical.size()) {
        throw Error(Errc::contract, "consensus for item '" + id + "' does not match its verdicts");
      }
      o.verdicts = vit->second;
      if (!outcome_invariants_hold(o, false)) throw Error(Errc::contract, "consensus for item '" + id + "' is inconsistent");
      if (task.is_open()) {
        for (std::size_t i = 0; i < o.verdicts.size(); ++i)
          if (o.verdicts[i].labeled()) taxonomy.resolve(o.canonical[i], task);
      }
      outcomes.emplace(id, std::move(o));
      break;
    }
    case EventKind::routed: {
      const std::string id = item_id();
      if (routes.contains(id)) throw Error(Errc::conflict, "item '" + id + "' routed twice");
      ConsensusOutcome candidate = outcome_of(id);
      candidate.route = route_from_json(p);
      if (!outcome_invariants_hold(candidate)) throw Error(Errc::contract, "route inconsistent for item '" + id + "'");
      if (candidate.route.kind != RouteKind::human_review) review.auto_finalize(candidate, task, taxonomy);
      outcome_of(id).route = candidate.route;
      routes[id] = candidate.route;
      break;
    }
    case EventKind::case_enqueued: {
      const std::string id = item_id();
      const ReviewReason reason = parse_reason(p.at("reason").get<std::string>());
      const std::string expected = "case-" + std::to_string(review.cases().size() + 1);
      if (p.at("case_id").get<std::string>() != expected) throw Error(Errc::corruption, "case ids out of sequence");
      review.enqueue(item(id), outcome_of(id), reason);
      break;
    }
    case EventKind::case_decided:
    case EventKind::qc_audited: {
      const std::string case_id = p.at("case_id").get<std::string>();
      const ReviewCase* c = review.find(case_id);
      if (!c) throw Error(Errc::not_found, "unknown case '" + case_id + "'");
      if ((c->reason == ReviewReason::qc) != (e.kind == EventKind::qc_audited)) {
        throw Error(Errc::contract, "event kind does not match case reason for '" + case_id + "'");
      }
      ReviewDecision d = decision_from_json(p.at("decision"));
      review.apply_decision(case_id, d, task, taxonomy);
      break;
    }
    case EventKind::taxonomy_merged: {
      if (!task.is_open()) throw Error(Errc::conflict, "taxonomy merges need an open-set task");
      taxonomy.merge(p.at("from").get<std::string>(), p.at("into").get<std::string>(),
                     p.value("actor", std::string()), e.ts);
      break;
    }
    case EventKind::item_failed: {
      const std::string id = item_id();
      item(id);
      failed[id] = p.value("error", std::string());
      break;
    }
    case EventKind::run_completed:
      completed = true;
      break;
  }
  last_seq = e.seq;
}

ReplayResult replay(const std::filesystem::path& log_path) {
  if (!std::filesystem::exists(log_path)) throw Error(Errc::input, "no event log at " + log_path.string());
  const std::string text = read_file(log_path);
  std::string_view torn;
  const auto lines = complete_lines(text, &torn);

  ReplayResult out;
  std::size_t lineno = 0;
  for (auto line : lines) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.state.apply(EventRecord::from_line(line));
    } catch (const Error& ex) {
      throw Error(Errc::corruption, log_path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    } catch (const nlohmann::json::exception& ex) {
      throw Error(Errc::corruption, log_path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  if (!torn.empty()) {
    out.warnings.push_back(log_path.string() + ": dropped a partial final line (" + std::to_string(torn.size()) +
                           " bytes)");
  }
  return out;
}

}  // namespace mchr
