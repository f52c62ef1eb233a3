#include "mchr/session.hpp"

#include <atomic>
#include <condition_variable>
#include <exception>
#include <fstream>
#include <optional>
#include <thread>

#include "mchr/codec.hpp"
#include "mchr/error.hpp"

namespace mchr {

namespace {

nlohmann::json run_header(const TaskSpec& task, const ModelRoster& models, const DatasetManifest& manifest,
                          const RunOptions& options) {
  return {{"task", task_to_json(task)},
          {"models", roster_to_json(models)},
          {"seed", options.seed},
          {"manifest", manifest_to_json(manifest)},
          {"config", options.config}};
}

// Outcome of the parallel part of one item: model queries and agreement.
struct ItemWork {
  std::optional<ConsensusOutcome> outcome;
  std::string failure;
  std::exception_ptr fatal;
};

}  // namespace

std::unique_ptr<RunSession> RunSession::create(const std::filesystem::path& dir, const TaskSpec& task,
                                               const ModelRoster& models, const DatasetManifest& manifest,
                                               const RunOptions& options) {
  task.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::input, "cannot create run directory " + dir.string() + ": " + ec.message());
  const auto log_path = dir / "events.jsonl";
  if (std::filesystem::exists(log_path) && std::filesystem::file_size(log_path) > 0) {
    throw Error(Errc::input, "run directory " + dir.string() + " already holds a run");
  }

  const nlohmann::json header = run_header(task, models, manifest, options);
  {
    std::ofstream out(dir / "run.json");
    out << header.dump(2) << '\n';
    if (!out) throw Error(Errc::input, "cannot write " + (dir / "run.json").string());
  }

  std::unique_ptr<RunSession> s(new RunSession());
  s->options_ = options;
  s->log_ = std::make_unique<EventLog>(log_path, EventLog::Options{options.fsync});
  std::unique_lock lock(s->mu_);
  s->commit(EventKind::run_started, header);
  return s;
}

std::unique_ptr<RunSession> RunSession::create_in_memory(const TaskSpec& task, const ModelRoster& models,
                                                         const DatasetManifest& manifest, const RunOptions& options) {
  task.validate();
  std::unique_ptr<RunSession> s(new RunSession());
  s->options_ = options;
  s->log_ = std::make_unique<EventLog>();
  std::unique_lock lock(s->mu_);
  s->commit(EventKind::run_started, run_header(task, models, manifest, options));
  return s;
}

std::unique_ptr<RunSession> RunSession::open(const std::filesystem::path& dir, bool fsync) {
  const auto log_path = dir / "events.jsonl";
  ReplayResult r = replay(log_path);
  std::unique_ptr<RunSession> s(new RunSession());
  s->options_.seed = r.state.seed;
  s->options_.fsync = fsync;
  s->state_ = std::move(r.state);
  s->warnings_ = std::move(r.warnings);
  s->log_ = std::make_unique<EventLog>(log_path, EventLog::Options{fsync});
  return s;
}

EventRecord RunSession::commit(EventKind kind, nlohmann::json payload) {
  EventRecord e = log_->stamp(kind, std::move(payload));
  try {
    state_.apply(e);
  } catch (...) {
    log_->cancel(e);
    throw;
  }
  log_->write(e);
  return e;
}

RunSummary RunSession::annotate(std::span<const ContentItem> items, Gateway& gateway) {
  {
    std::unique_lock lock(mu_);
    if (!state_.items.empty() || state_.completed) throw Error(Errc::contract, "run already annotated");
    for (const auto& item : items) commit(EventKind::item_loaded, {{"item", item_to_json(item, true)}});
  }

  const TaskSpec task = state_.task;
  LabelResolver resolver;
  if (task.is_open()) {
    resolver = [this](const std::string& label) {
      std::shared_lock lock(mu_);
      return state_.taxonomy.lookup(label);
    };
  }

  std::vector<ItemWork> work(items.size());
  std::vector<char> ready(items.size(), 0);
  std::mutex ready_mu;
  std::condition_variable ready_cv;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= items.size() || stop.load()) return;
      ItemWork w;
      try {
        const RenderedPrompt prompt = render_prompt(task, items[i]);
        VerdictSource source = [&](Role role) { return gateway.query(role, prompt, task); };
        w.outcome = assess(items[i].id, source, resolver);
      } catch (const Error& e) {
        if (e.code() == Errc::adapter && options_.on_error == OnAdapterError::skip) w.failure = e.what();
        else w.fatal = std::current_exception();
      } catch (...) {
        w.fatal = std::current_exception();
      }
      {
        std::lock_guard lock(ready_mu);
        work[i] = std::move(w);
        ready[i] = 1;
      }
      ready_cv.notify_all();
    }
  };

  const unsigned n_workers = std::max(1u, options_.workers);
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < n_workers; ++t) pool.emplace_back(worker);

  RunSummary summary;
  summary.items = items.size();
  QcSampler qc(task.qc_rate, state_.seed);
  try {
    for (std::size_t i = 0; i < items.size(); ++i) {
      ItemWork w;
      {
        std::unique_lock lock(ready_mu);
        ready_cv.wait(lock, [&] { return ready[i] != 0; });
        w = std::move(work[i]);
      }
      if (w.fatal) std::rethrow_exception(w.fatal);

      std::unique_lock lock(mu_);
      const std::string& id = items[i].id;
      if (!w.outcome) {
        commit(EventKind::item_failed, {{"item", id}, {"error", w.failure}});
        ++summary.failed;
        continue;
      }
      ConsensusOutcome& o = *w.outcome;
      for (std::size_t r = 0; r < o.verdicts.size(); ++r) {
        commit(EventKind::verdict, {{"item", id},
                                    {"role", role_name(static_cast<Role>(r))},
                                    {"verdict", verdict_to_json(o.verdicts[r])}});
      }
      nlohmann::json consensus = {{"item", id},
                                  {"agreement", agreement_name(o.agreement)},
                                  {"canonical", o.canonical},
                                  {"divergence", divergence_to_json(o.divergence)}};
      consensus["consensus"] = o.consensus ? nlohmann::json(*o.consensus) : nlohmann::json(nullptr);
      commit(EventKind::consensus, std::move(consensus));

      o.route = route(o, task.threshold, qc);
      nlohmann::json routed = route_to_json(o.route);
      routed["item"] = id;
      commit(EventKind::routed, std::move(routed));

      if (o.route.kind == RouteKind::auto_accept) {
        ++summary.auto_accepted;
      } else {
        const ReviewReason reason = o.route.kind == RouteKind::qc_sample ? ReviewReason::qc : *o.route.reason;
        if (reason == ReviewReason::qc) {
          ++summary.auto_accepted;
          ++summary.qc_sampled;
        } else {
          ++summary.queued;
        }
        commit(EventKind::case_enqueued, {{"case_id", "case-" + std::to_string(state_.review.cases().size() + 1)},
                                          {"item", id},
                                          {"reason", reason_name(reason)}});
      }
    }
  } catch (...) {
    stop = true;
    throw;
  }

  std::unique_lock lock(mu_);
  commit(EventKind::run_completed, {{"items", summary.items},
                                    {"auto_accepted", summary.auto_accepted},
                                    {"queued", summary.queued},
                                    {"qc_sampled", summary.qc_sampled},
                                    {"failed", summary.failed}});
  return summary;
}

DecisionResult RunSession::decide(const std::string& case_id, const std::string& label, const std::string& reviewer,
                                  const std::string& rationale) {
  std::unique_lock lock(mu_);
  const ReviewCase* c = state_.review.find(case_id);
  if (!c) throw Error(Errc::not_found, "unknown case '" + case_id + "'");
  const bool qc = c->reason == ReviewReason::qc;
  nlohmann::json payload = {{"case_id", case_id},
                            {"decision", {{"label", label}, {"reviewer", reviewer}, {"rationale", rationale}}}};

  EventRecord e = log_->stamp(qc ? EventKind::qc_audited : EventKind::case_decided, std::move(payload));
  e.payload["decision"]["decided_at"] = e.ts;
  try {
    state_.apply(e);
  } catch (...) {
    log_->cancel(e);
    throw;
  }
  c = state_.review.find(case_id);
  DecisionResult result;
  result.record = state_.review.records().at(c->item.id);
  result.qc_match = c->qc_match;
  if (qc) e.payload["match"] = *c->qc_match;
  log_->write(e);
  return result;
}

void RunSession::merge(const std::string& from, const std::string& into, const std::string& actor) {
  std::unique_lock lock(mu_);
  if (!state_.task.is_open()) throw Error(Errc::conflict, "taxonomy merges need an open-set task");
  commit(EventKind::taxonomy_merged,
         {{"from", normalize_label(from)}, {"into", normalize_label(into)}, {"actor", actor}});
}

}  // namespace mchr
