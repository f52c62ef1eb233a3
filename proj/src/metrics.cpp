#include "mchr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mchr/error.hpp"

namespace mchr {

namespace {

double round1(double x) { return std::round(x * 10.0) / 10.0; }

std::string gold_key(const std::string& label, const TaskSpec& task, const Taxonomy& taxonomy) {
  std::string normalized;
  try {
    normalized = normalize_label(label);
  } catch (const Error&) {
    return label;
  }
  if (task.is_open()) return taxonomy.lookup(normalized);
  if (auto hit = match_closed_label(*task.labels, normalized)) return *hit;
  return normalized;
}

nlohmann::json cell_json(const std::optional<AccuracyCell>& c) {
  if (!c) return nullptr;
  return {{"pct", round1(c->pct)},
          {"half", round1(c->half)},
          {"k", c->tally.correct},
          {"n", c->tally.total},
          {"ci_low", c->ci_low},
          {"ci_high", c->ci_high}};
}

std::string fmt1(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", round1(x));
  return buf;
}

std::string fmt2(CentiPercent p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%02lld", static_cast<long long>(p.hundredths / 100),
                static_cast<long long>(p.hundredths % 100));
  return buf;
}

}  // namespace

CentiPercent centi_ratio(std::uint64_t num, std::uint64_t den) {
  // round(10000 * num / den), halves up, in integers.
  return {static_cast<std::int64_t>((20000 * num + den) / (2 * den))};
}

Tally accuracy(const std::vector<const AnnotationRecord*>& records, const std::map<std::string, std::string>& gold,
               const TaskSpec& task, const Taxonomy& taxonomy) {
  Tally t;
  for (const AnnotationRecord* r : records) {
    auto g = gold.find(r->item_id);
    if (g == gold.end()) throw Error(Errc::validation, "item '" + r->item_id + "' has no gold label");
    const std::string predicted = task.is_open() ? taxonomy.lookup(r->final_label) : r->final_label;
    t.correct += predicted == gold_key(g->second, task, taxonomy) ? 1 : 0;
    ++t.total;
  }
  return t;
}

std::optional<std::pair<double, double>> wilson_ci(std::uint64_t k, std::uint64_t n, double z) {
  if (n == 0) return std::nullopt;
  if (k > n) throw Error(Errc::contract, "wilson_ci: k > n");
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  double lo = std::clamp(center - half, 0.0, 1.0);
  double hi = std::clamp(center + half, 0.0, 1.0);
  if (k == 0) lo = 0.0;
  if (k == n) hi = 1.0;
  return std::pair{std::min(lo, p), std::max(hi, p)};
}

std::optional<AccuracyCell> accuracy_cell(const Tally& t, double z) {
  auto ci = wilson_ci(t.correct, t.total, z);
  if (!ci) return std::nullopt;
  AccuracyCell c;
  c.tally = t;
  c.pct = 100.0 * static_cast<double>(t.correct) / static_cast<double>(t.total);
  c.ci_low = 100.0 * ci->first;
  c.ci_high = 100.0 * ci->second;
  c.half = std::max(c.pct - c.ci_low, c.ci_high - c.pct);
  return c;
}

CentiPercent hrr(const RunState& state) {
  if (state.routes.empty()) return {};
  std::uint64_t reviewed = 0;
  for (const auto& [id, r] : state.routes) reviewed += r.kind == RouteKind::human_review ? 1 : 0;
  return centi_ratio(reviewed, state.routes.size());
}

CentiPercent workload_reduction(CentiPercent h) {
  if (h.hundredths < 0 || h.hundredths > 10000) throw Error(Errc::contract, "hrr outside [0,100]");
  return {10000 - h.hundredths};
}

LevelReport build_level(const RunState& s) {
  LevelReport lr;
  lr.level = s.task.level;
  lr.task_id = s.task.id;
  lr.n = s.routes.size();
  lr.failed = s.failed.size();

  std::map<std::string, std::string> gold;
  for (const auto& item : s.items)
    if (item.gold) gold[item.id] = *item.gold;

  std::vector<const AnnotationRecord*> all, automatic, human;
  for (const auto& [id, r] : s.review.records()) {
    all.push_back(&r);
    (r.source == RecordSource::automatic ? automatic : human).push_back(&r);
  }
  lr.all = accuracy_cell(accuracy(all, gold, s.task, s.taxonomy));
  lr.automatic = accuracy_cell(accuracy(automatic, gold, s.task, s.taxonomy));
  lr.human = accuracy_cell(accuracy(human, gold, s.task, s.taxonomy));

  for (const auto& [id, r] : s.routes) lr.reviewed += r.kind == RouteKind::human_review ? 1 : 0;
  lr.hrr = hrr(s);
  lr.reduction = workload_reduction(lr.hrr);
  for (const auto& c : s.review.cases()) {
    if (c.reason != ReviewReason::qc) continue;
    ++lr.qc_cases;
    if (c.qc_match && !*c.qc_match) ++lr.qc_mismatch;
  }
  lr.pending = s.review.pending_ids();
  if (s.task.is_open()) lr.sparsity = sparsity_stats(s.taxonomy);
  return lr;
}

RunReport build_report(const std::vector<const RunState*>& states, bool allow_incomplete) {
  RunReport rep;
  std::vector<std::string> pending;
  for (const RunState* s : states) {
    LevelReport lr = build_level(*s);
    for (const auto& id : lr.pending) pending.push_back(s->task.id + "/" + id);
    if (!s->completed) rep.incomplete = true;

    std::vector<std::string> model_ids;
    for (const auto& m : s->models.models) model_ids.push_back(m.id);
    rep.config.push_back({{"task", s->task.id},
                          {"level", s->task.level},
                          {"threshold", s->task.threshold},
                          {"qc_rate", s->task.qc_rate},
                          {"seed", s->seed},
                          {"models", model_ids}});
    rep.levels.push_back(std::move(lr));
  }
  if (!pending.empty()) rep.incomplete = true;
  if (!pending.empty() && !allow_incomplete) {
    std::string msg = "review cases pending:";
    for (const auto& id : pending) msg += " " + id;
    throw Error(Errc::incomplete, msg);
  }
  return rep;
}

nlohmann::json report_to_json(const RunReport& rep) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& lr : rep.levels) {
    nlohmann::json j = {{"level", lr.level},
                        {"task", lr.task_id},
                        {"n", lr.n},
                        {"failed", lr.failed},
                        {"all", cell_json(lr.all)},
                        {"auto", cell_json(lr.automatic)},
                        {"human", cell_json(lr.human)},
                        {"hrr", lr.hrr.value()},
                        {"reduction", lr.reduction.value()},
                        {"reviewed", lr.reviewed},
                        {"qc_cases", lr.qc_cases},
                        {"qc_mismatch", lr.qc_mismatch},
                        {"pending", lr.pending.size()}};
    if (lr.sparsity) {
      j["sparsity"] = {{"categories", lr.sparsity->categories},
                       {"sparse_fraction", lr.sparsity->sparse_fraction},
                       {"mean_count", lr.sparsity->mean_count}};
    }
    levels.push_back(std::move(j));
  }
  nlohmann::json out = {{"levels", std::move(levels)}, {"config", rep.config}, {"incomplete", rep.incomplete}};
  if (!rep.singles.empty()) {
    nlohmann::json singles = nlohmann::json::object();
    for (const auto& [id, pct] : rep.singles) singles[id] = round1(pct);
    out["singles"] = std::move(singles);
  }
  return out;
}

std::string format_cell(const std::optional<AccuracyCell>& cell) {
  if (!cell) return "-";
  return fmt1(cell->pct) + " ±" + fmt1(cell->half);
}

std::string render_table(const RunReport& rep) {
  constexpr int kLabelWidth = 22;
  constexpr int kColWidth = 16;
  std::ostringstream out;
  auto pad = [](std::string s, int width) {
    // Counts UTF-8 code points so "±" occupies one column.
    int cols = 0;
    for (unsigned char c : s) cols += (c & 0xC0) != 0x80;
    if (cols < width) s.append(static_cast<std::size_t>(width - cols), ' ');
    return s;
  };
  auto row = [&](const std::string& label, auto&& cell) {
    out << pad(label, kLabelWidth);
    for (const auto& lr : rep.levels) out << pad(cell(lr), kColWidth);
    out << '\n';
  };

  row("Approach", [](const LevelReport& lr) { return "Level " + std::to_string(lr.level); });
  row("Task", [](const LevelReport& lr) { return lr.task_id; });
  row("Items", [](const LevelReport& lr) { return std::to_string(lr.n); });
  for (const auto& [id, pct] : rep.singles) {
    row(id, [&](const LevelReport&) { return fmt1(pct); });
  }
  row("MCHR (All)", [](const LevelReport& lr) { return format_cell(lr.all); });
  row("MCHR (Auto-part)", [](const LevelReport& lr) { return format_cell(lr.automatic); });
  row("MCHR (Human-part)", [](const LevelReport& lr) { return format_cell(lr.human); });
  row("Human Review Rate", [](const LevelReport& lr) { return fmt2(lr.hrr); });
  row("Workload Reduction", [](const LevelReport& lr) { return fmt2(lr.reduction); });
  row("QC mismatches", [](const LevelReport& lr) {
    return std::to_string(lr.qc_mismatch) + "/" + std::to_string(lr.qc_cases);
  });
  bool any_sparsity = false;
  for (const auto& lr : rep.levels) any_sparsity |= lr.sparsity.has_value();
  if (any_sparsity) {
    row("Categories (<3, mean)", [](const LevelReport& lr) -> std::string {
      if (!lr.sparsity) return "-";
      char buf[64];
      std::snprintf(buf, sizeof buf, "%zu (%.2f, %.2f)", lr.sparsity->categories, lr.sparsity->sparse_fraction,
                    lr.sparsity->mean_count);
      return buf;
    });
  }
  if (rep.incomplete) out << "incomplete: review cases pending\n";
  return out.str();
}

}  // namespace mchr
