#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mchr/consensus.hpp"
#include "mchr/ingest.hpp"
#include "mchr/review.hpp"
#include "mchr/task.hpp"
#include "mchr/taxonomy.hpp"

namespace mchr {

enum class EventKind {
  run_started,
  item_loaded,
  verdict,
  consensus,
  routed,
  case_enqueued,
  case_decided,
  qc_audited,
  taxonomy_merged,
  item_failed,
  run_completed,
};

std::string_view event_kind_name(EventKind k);
// Errc::corruption for an unknown name.
EventKind parse_event_kind(std::string_view s);

// Kinds that may still be appended once run-completed is in the log: the
// human side of the workflow continues after routing has finished.
bool allowed_after_completion(EventKind k);

struct EventRecord {
  std::uint64_t seq = 0;
  std::string ts;  // RFC 3339, informational only
  EventKind kind = EventKind::run_started;
  nlohmann::json payload = nlohmann::json::object();

  std::string to_line() const;  // no trailing newline
  static EventRecord from_line(std::string_view line);
};

std::string now_rfc3339();

// Append-only line-delimited event log. Without a path the log only numbers
// events (in-memory runs).
class EventLog {
 public:
  struct Options {
    bool fsync = true;
  };

  EventLog() = default;
  // Opens for appending. An existing file is scanned to continue its
  // numbering; a torn final line is cut off first.
  explicit EventLog(const std::filesystem::path& path, Options options);
  explicit EventLog(const std::filesystem::path& path) : EventLog(path, Options{}) {}
  ~EventLog();

  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;

  // Assigns seq and ts without writing; `write` must follow in the same
  // order. Errc::contract once run-completed is logged, for kinds that
  // cannot follow it.
  EventRecord stamp(EventKind kind, nlohmann::json payload);
  // Errc::storage on failure.
  void write(const EventRecord& record);
  // Gives back the most recent stamp when it will not be written.
  void cancel(const EventRecord& record);

  EventRecord append(EventKind kind, nlohmann::json payload);

  std::uint64_t last_seq() const { return last_seq_; }
  bool completed() const { return completed_; }
  const std::filesystem::path& path() const { return path_; }

  // Test hook: replaces the clock used by stamp().
  void set_clock(std::function<std::string()> clock) { clock_ = std::move(clock); }

 private:
  std::filesystem::path path_;
  std::FILE* file_ = nullptr;
  Options options_;
  std::uint64_t last_seq_ = 0;
  std::uint64_t written_seq_ = 0;
  bool completed_ = false;
  std::function<std::string()> clock_ = now_rfc3339;
  std::mutex mu_;
};

// Everything a run knows, as a fold over its events.
struct RunState {
  TaskSpec task;
  ModelRoster models;
  std::uint64_t seed = 0;
  DatasetManifest manifest;
  nlohmann::json config = nlohmann::json::object();

  std::vector<ContentItem> items;  // load order
  std::map<std::string, std::size_t> item_index;
  std::map<std::string, std::vector<ModelVerdict>> verdicts;  // role order
  std::map<std::string, ConsensusOutcome> outcomes;
  std::map<std::string, Route> routes;                        // routed items
  std::map<std::string, std::string> failed;                  // item -> error
  ReviewQueue review;
  Taxonomy taxonomy;
  bool started = false;
  bool completed = false;
  std::uint64_t last_seq = 0;

  // Applies one event. Throws (leaving the state unchanged) when the event is
  // not valid against the current state.
  void apply(const EventRecord& event);

  const ContentItem& item(const std::string& id) const;

  bool operator==(const RunState&) const = default;
};

struct ReplayResult {
  RunState state;
  std::vector<std::string> warnings;
};

// Errc::input when the file is missing, Errc::corruption on a seq gap,
// a malformed interior line or an unknown kind. A torn final line is dropped
// with a warning.
ReplayResult replay(const std::filesystem::path& log_path);

}  // namespace mchr
