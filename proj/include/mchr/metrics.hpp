#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mchr/review.hpp"
#include "mchr/store.hpp"
#include "mchr/taxonomy.hpp"

namespace mchr {

// A percentage held in hundredths so that identities such as
// reduction + hrr == 100 hold exactly.
struct CentiPercent {
  std::int64_t hundredths = 0;

  double value() const { return static_cast<double>(hundredths) / 100.0; }
  auto operator<=>(const CentiPercent&) const = default;
};

// Half-up rounding of 100 * num / den to two decimals; den > 0.
CentiPercent centi_ratio(std::uint64_t num, std::uint64_t den);

struct Tally {
  std::uint64_t correct = 0;
  std::uint64_t total = 0;

  Tally& operator+=(const Tally& o) {
    correct += o.correct;
    total += o.total;
    return *this;
  }
  bool operator==(const Tally&) const = default;
};

// Counts records whose final label matches the item's gold label, both sides
// resolved through the taxonomy on open tasks. Errc::validation when a
// scored item has no gold label.
Tally accuracy(const std::vector<const AnnotationRecord*>& records, const std::map<std::string, std::string>& gold,
               const TaskSpec& task, const Taxonomy& taxonomy);

// Wilson score interval on the proportion scale; nullopt when n == 0.
std::optional<std::pair<double, double>> wilson_ci(std::uint64_t k, std::uint64_t n, double z = 1.96);

struct AccuracyCell {
  Tally tally;
  double pct = 0.0;      // point estimate, percent
  double ci_low = 0.0;   // percent
  double ci_high = 0.0;  // percent
  double half = 0.0;     // max(pct - low, high - pct)
};

std::optional<AccuracyCell> accuracy_cell(const Tally& t, double z = 1.96);

// 100 * |items routed to human review| / |routed items|; QC samples excluded.
CentiPercent hrr(const RunState& state);

CentiPercent workload_reduction(CentiPercent hrr);

struct LevelReport {
  int level = 0;
  std::string task_id;
  std::size_t n = 0;  // routed items
  std::size_t failed = 0;
  std::optional<AccuracyCell> all, automatic, human;
  CentiPercent hrr, reduction;
  std::size_t reviewed = 0;
  std::size_t qc_cases = 0;
  std::size_t qc_mismatch = 0;
  std::vector<std::string> pending;
  std::optional<SparsityStats> sparsity;  // open tasks
};

struct RunReport {
  std::vector<LevelReport> levels;
  nlohmann::json config = nlohmann::json::array();
  std::map<std::string, double> singles;  // simulate only: model id -> percent
  bool incomplete = false;
};

LevelReport build_level(const RunState& state);

// One state per level. Errc::incomplete listing case ids when reviews are
// pending, unless allow_incomplete.
RunReport build_report(const std::vector<const RunState*>& states, bool allow_incomplete = false);

nlohmann::json report_to_json(const RunReport& report);
std::string render_table(const RunReport& report);

// "98.1 ±1.8" or "-" for an empty partition.
std::string format_cell(const std::optional<AccuracyCell>& cell);

}  // namespace mchr
