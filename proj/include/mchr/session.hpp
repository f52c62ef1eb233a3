#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "mchr/consensus.hpp"
#include "mchr/gateway.hpp"
#include "mchr/store.hpp"

namespace mchr {

enum class OnAdapterError { abort, skip };

struct RunOptions {
  std::uint64_t seed = 0;
  unsigned workers = 1;
  OnAdapterError on_error = OnAdapterError::abort;
  bool fsync = true;
  nlohmann::json config = nlohmann::json::object();  // echoed into run-started
};

struct RunSummary {
  std::size_t items = 0;
  std::size_t auto_accepted = 0;  // includes QC-sampled items
  std::size_t queued = 0;         // disagreement + low-confidence cases
  std::size_t qc_sampled = 0;
  std::size_t failed = 0;
};

// One annotation run: an event log plus the state folded from it. Every
// mutation is stamped, applied to the state, then written, under one lock,
// so the in-memory state always equals replay(log).
class RunSession {
 public:
  // Creates `dir` with run.json and a fresh events.jsonl.
  static std::unique_ptr<RunSession> create(const std::filesystem::path& dir, const TaskSpec& task,
                                            const ModelRoster& models, const DatasetManifest& manifest,
                                            const RunOptions& options);
  // No files; events are numbered and applied only.
  static std::unique_ptr<RunSession> create_in_memory(const TaskSpec& task, const ModelRoster& models,
                                                      const DatasetManifest& manifest, const RunOptions& options);
  // Replays dir/events.jsonl and reopens it for appending.
  static std::unique_ptr<RunSession> open(const std::filesystem::path& dir, bool fsync = true);

  // Loads, annotates and routes every item, then writes run-completed.
  // Adapter errors propagate under OnAdapterError::abort.
  RunSummary annotate(std::span<const ContentItem> items, Gateway& gateway);

  DecisionResult decide(const std::string& case_id, const std::string& label, const std::string& reviewer,
                        const std::string& rationale);

  // Errc::conflict on a closed-set task.
  void merge(const std::string& from, const std::string& into, const std::string& actor);

  template <class F>
  auto read(F&& f) const {
    std::shared_lock lock(mu_);
    return f(static_cast<const RunState&>(state_));
  }

  // Only safe when no other thread uses the session.
  const RunState& state() const { return state_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  EventLog& log() { return *log_; }

 private:
  RunSession() = default;

  EventRecord commit(EventKind kind, nlohmann::json payload);  // caller holds mu_

  RunOptions options_;
  std::unique_ptr<EventLog> log_;
  RunState state_;
  std::vector<std::string> warnings_;
  mutable std::shared_mutex mu_;
};

}  // namespace mchr
