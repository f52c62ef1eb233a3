#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mchr/gateway.hpp"
#include "mchr/metrics.hpp"
#include "mchr/task.hpp"

namespace mchr {

// Profiles indexed by role.
using ProfileSet = std::array<SyntheticProfile, 3>;

// [{"id","role","accuracy","conf_correct_lo","conf_wrong_lo","conf_wrong_hi","seed"}, ...]
// with every role exactly once. Errc::config otherwise.
ProfileSet profiles_from_json(const nlohmann::json& j);
ProfileSet load_profiles(const std::filesystem::path& path);

struct SimulationConfig {
  ProfileSet profiles;
  TaskSpec task;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  double human_accuracy = 1.0;  // 1.0 is the oracle reviewer
  unsigned workers = 1;
  // Open tasks: gold categories. Empty falls back to the task's known
  // categories, then to cat-01..cat-10.
  std::vector<std::string> open_pool;
};

// Gold labels are uniform over the label space. Every queued case (QC
// included) is decided by the simulated reviewer. report.singles holds each
// model's standalone accuracy over all n items.
RunReport simulate_run(const SimulationConfig& config);

struct ExpectedOutcome {
  double hrr = 0.0;            // probability an item goes to human review
  double auto_accuracy = 0.0;  // P(correct | not reviewed); 0 when nothing is automatic
  double auto_share = 0.0;     // probability an item is finalized automatically
};

// Exact expectations for a closed task with `labels` labels, independent
// errors spread uniformly over the wrong labels. Errc::unsupported for an
// open label space or correlated profiles.
ExpectedOutcome expected_outcome_oracle(const ProfileSet& profiles, const TaskSpec& task);
ExpectedOutcome expected_outcome_oracle(const ProfileSet& profiles, std::size_t labels, double threshold);

}  // namespace mchr
