#include "mchr/cli.hpp"

#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "mchr/error.hpp"
#include "mchr/ingest.hpp"
#include "mchr/metrics.hpp"
#include "mchr/server.hpp"
#include "mchr/session.hpp"
#include "mchr/simulate.hpp"
#include "mchr/task.hpp"

namespace mchr {

namespace {

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::adapter: return kExitAdapter;
    case Errc::input:
    case Errc::storage:
    case Errc::corruption: return kExitIo;
    case Errc::incomplete: return kExitIncomplete;
    default: return kExitConfig;
  }
}

ApiServer* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

void check_unit(const std::optional<double>& v, const char* flag) {
  if (v && !(*v >= 0.0 && *v <= 1.0)) throw Error(Errc::config, std::string(flag) + " must be within [0,1]");
}

struct RunArgs {
  std::string task, input, models, out;
  std::uint64_t seed = 0;
  std::optional<double> threshold, qc_rate;
  std::string on_error = "abort";
  unsigned workers = 0;
  std::size_t per_group = 0;
  bool no_fsync = false;
};

int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
  check_unit(a.threshold, "--threshold");
  check_unit(a.qc_rate, "--qc-rate");
  TaskSpec task = load_task(a.task);
  if (a.threshold) task.threshold = *a.threshold;
  if (a.qc_rate) task.qc_rate = *a.qc_rate;
  task.validate();
  const ModelRoster models = load_models(a.models);

  LoadedDataset data = load_dataset(a.input);
  for (const auto& e : data.errors) err << a.input << ":" << e.line << ": " << e.message << '\n';
  std::vector<ContentItem> items = std::move(data.items);
  DatasetManifest manifest = data.manifest;
  if (a.per_group > 0) {
    items = stratified_sample(items, a.per_group, a.seed);
    manifest = make_manifest(items, a.input, a.seed);
  }

  RunOptions options;
  options.seed = a.seed;
  options.workers = a.workers ? a.workers : default_workers();
  options.on_error = a.on_error == "skip" ? OnAdapterError::skip : OnAdapterError::abort;
  options.fsync = !a.no_fsync;
  options.config = {{"task_file", a.task},
                    {"input", a.input},
                    {"models_file", a.models},
                    {"on_error", a.on_error},
                    {"per_group", a.per_group}};

  auto gateway = make_gateway(models, task, items, static_cast<std::ptrdiff_t>(options.workers) * 3);
  auto session = RunSession::create(a.out, task, models, manifest, options);
  const RunSummary s = session->annotate(items, *gateway);
  const CentiPercent rate = hrr(session->state());
  char hrr_text[32];
  std::snprintf(hrr_text, sizeof hrr_text, "%lld.%02lld", static_cast<long long>(rate.hundredths / 100),
                static_cast<long long>(rate.hundredths % 100));
  out << "items: " << s.items << '\n'
      << "auto-accepted: " << s.auto_accepted << '\n'
      << "queued: " << s.queued << '\n'
      << "qc-sampled: " << s.qc_sampled << '\n'
      << "failed: " << s.failed << '\n'
      << "HRR: " << hrr_text << '\n'
      << "events: " << (std::filesystem::path(a.out) / "events.jsonl").string() << '\n';
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& runs, const std::string& format, std::ostream& out) {
  std::vector<RunState> states;
  states.reserve(runs.size());
  for (const auto& dir : runs) states.push_back(replay(std::filesystem::path(dir) / "events.jsonl").state);
  std::vector<const RunState*> ptrs;
  for (const auto& s : states) ptrs.push_back(&s);
  const RunReport report = build_report(ptrs, true);
  if (format == "json") out << report_to_json(report).dump(2) << '\n';
  else out << render_table(report);
  return report.incomplete ? kExitIncomplete : kExitOk;
}

int cmd_serve(const std::string& run, const std::string& host, int port, const std::optional<std::string>& ui_dir,
              bool cors, const std::string& cors_origin, std::ostream& out, std::ostream& err) {
  auto session = RunSession::open(run);
  for (const auto& w : session->warnings()) err << "warning: " << w << '\n';
  ServerOptions options;
  options.cors = cors;
  options.cors_origin = cors_origin;
  if (ui_dir) options.ui_dir = *ui_dir;
  ApiServer server(*session, options);
  const int bound = server.bind(host, port);
  if (bound < 0) {
    err << "error: cannot bind " << host << ":" << port << " (address in use?)\n";
    return kExitPortBusy;
  }
  out << "listening on http://" << host << ":" << bound << '\n' << std::flush;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.serve();
  g_server = nullptr;
  return kExitOk;
}

int cmd_simulate(const std::string& profiles, const std::string& task_path, std::size_t n, std::uint64_t seed,
                 double human_accuracy, unsigned workers, const std::string& format, std::ostream& out) {
  SimulationConfig c;
  c.profiles = load_profiles(profiles);
  c.task = load_task(task_path);
  c.n = n;
  c.seed = seed;
  c.human_accuracy = human_accuracy;
  c.workers = workers ? workers : default_workers();
  const RunReport report = simulate_run(c);
  if (format == "json") out << report_to_json(report).dump(2) << '\n';
  else out << render_table(report);
  return kExitOk;
}

int cmd_taxonomy(const std::string& run, const std::vector<std::string>& merge, const std::string& actor,
                 std::ostream& out) {
  if (!merge.empty()) {
    auto session = RunSession::open(run);
    session->merge(merge[0], merge[1], actor);
    out << "merged " << normalize_label(merge[0]) << " -> " << normalize_label(merge[1]) << '\n';
    return kExitOk;
  }
  const RunState state = replay(std::filesystem::path(run) / "events.jsonl").state;
  const auto& t = state.taxonomy;
  for (const auto& [label, count] : t.counts()) out << label << '\t' << count << '\n';
  for (const auto& [from, into] : t.aliases()) out << from << " -> " << into << '\n';
  return kExitOk;
}

int cmd_sample(const std::string& input, std::size_t per_group, std::uint64_t seed, std::ostream& out,
               std::ostream& err) {
  LoadedDataset data = load_dataset(input);
  for (const auto& e : data.errors) err << input << ":" << e.line << ": " << e.message << '\n';
  for (const auto& item : stratified_sample(data.items, per_group, seed)) {
    nlohmann::json j = {{"id", item.id}, {"content", item.content}, {"group", item.group}};
    if (item.gold) j["gold"] = *item.gold;
    out << j.dump() << '\n';
  }
  return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-model annotation with consensus routing and human review"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Annotate a dataset and route every item");
  run_cmd->add_option("--task", run.task, "Task file")->required();
  run_cmd->add_option("--input", run.input, "Dataset (JSONL)")->required();
  run_cmd->add_option("--models", run.models, "Model roster")->required();
  run_cmd->add_option("--out", run.out, "Run directory")->required();
  run_cmd->add_option("--seed", run.seed, "Seed for QC sampling and --per-group");
  run_cmd->add_option("--threshold", run.threshold, "Confidence threshold override");
  run_cmd->add_option("--qc-rate", run.qc_rate, "QC sampling rate override");
  run_cmd->add_option("--on-error", run.on_error, "Adapter failure policy")
      ->check(CLI::IsMember({"abort", "skip"}));
  run_cmd->add_option("--workers", run.workers, "Worker threads (default: processors)");
  run_cmd->add_option("--per-group", run.per_group, "Stratified sample size per group");
  run_cmd->add_flag("--no-fsync", run.no_fsync, "Skip fsync after each event");

  std::string serve_run, host = "127.0.0.1", cors_origin = "*";
  int port = 8080;
  std::optional<std::string> ui_dir;
  bool cors = false;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the review API for a run");
  serve_cmd->add_option("--run", serve_run, "Run directory")->required();
  serve_cmd->add_option("--port", port, "Port");
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--ui-dir", ui_dir, "Static UI assets");
  serve_cmd->add_flag("--cors", cors, "Send CORS headers");
  serve_cmd->add_option("--cors-origin", cors_origin, "Allowed origin with --cors");

  std::vector<std::string> report_runs;
  std::string format = "table";
  auto* report_cmd = app.add_subcommand("report", "Print the per-level report");
  report_cmd->add_option("--run", report_runs, "Run directory, one per level")->required();
  report_cmd->add_option("--format", format, "table or json")->check(CLI::IsMember({"table", "json"}));

  std::string profiles, sim_task;
  std::size_t sim_n = 1000;
  std::uint64_t sim_seed = 0;
  double human_accuracy = 1.0;
  unsigned sim_workers = 0;
  std::string sim_format = "table";
  auto* sim_cmd = app.add_subcommand("simulate", "Run synthetic models through the pipeline");
  sim_cmd->add_option("--profiles", profiles, "Profile file")->required();
  sim_cmd->add_option("--task", sim_task, "Task file")->required();
  sim_cmd->add_option("--n", sim_n, "Items");
  sim_cmd->add_option("--seed", sim_seed, "Seed");
  sim_cmd->add_option("--human-accuracy", human_accuracy, "Simulated reviewer accuracy");
  sim_cmd->add_option("--workers", sim_workers, "Worker threads");
  sim_cmd->add_option("--format", sim_format, "table or json")->check(CLI::IsMember({"table", "json"}));

  std::string tax_run, actor = "cli";
  std::vector<std::string> merge_args;
  auto* tax_cmd = app.add_subcommand("taxonomy", "List or merge open-set categories");
  tax_cmd->add_option("--run", tax_run, "Run directory")->required();
  tax_cmd->require_subcommand(1);
  tax_cmd->add_subcommand("list", "Categories with counts, then aliases");
  auto* merge_cmd = tax_cmd->add_subcommand("merge", "Fold FROM into INTO");
  merge_cmd->add_option("pair", merge_args, "FROM INTO")->required()->expected(2);
  merge_cmd->add_option("--actor", actor, "Recorded actor");

  std::string sample_input;
  std::size_t sample_per_group = 10;
  std::uint64_t sample_seed = 0;
  auto* sample_cmd = app.add_subcommand("sample", "Stratified sample of a dataset to stdout");
  sample_cmd->add_option("--input", sample_input, "Dataset (JSONL)")->required();
  sample_cmd->add_option("--per-group", sample_per_group, "Items per group");
  sample_cmd->add_option("--seed", sample_seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run, out, err);
    if (serve_cmd->parsed()) return cmd_serve(serve_run, host, port, ui_dir, cors, cors_origin, out, err);
    if (report_cmd->parsed()) return cmd_report(report_runs, format, out);
    if (sim_cmd->parsed())
      return cmd_simulate(profiles, sim_task, sim_n, sim_seed, human_accuracy, sim_workers, sim_format, out);
    if (tax_cmd->parsed()) return cmd_taxonomy(tax_run, merge_args, actor, out);
    if (sample_cmd->parsed()) return cmd_sample(sample_input, sample_per_group, sample_seed, out, err);
  } catch (const Error& e) {
    err << "error (" << errc_name(e.code()) << "): " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitConfig;
}

}  // namespace mchr
