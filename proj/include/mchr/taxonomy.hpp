#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mchr/task.hpp"

namespace mchr {

// Trim, lowercase, collapse internal whitespace, strip trailing sentence
// punctuation (.,;:!) and surrounding quotes. Idempotent.
// Throws Errc::invalid_label when nothing is left.
std::string normalize_label(std::string_view raw);

// Comparison key for closed label spaces: the normalized label with spaces,
// hyphens and underscores removed, so "front-end" matches "frontend".
std::string label_key(std::string_view normalized);

// The task label whose key equals the key of `normalized`, if any.
std::optional<std::string> match_closed_label(const std::vector<std::string>& labels,
                                              std::string_view normalized);

struct MergeEntry {
  std::string from;
  std::string into;
  std::string ts;
  std::string actor;

  bool operator==(const MergeEntry&) const = default;
};

struct SparsityStats {
  std::size_t categories = 0;
  double sparse_fraction = 0.0;  // share of categories with count < 3, 4 dp
  double mean_count = 0.0;       // 4 dp
};

// Open-set category space. Merges only add aliases; nothing stored upstream
// is rewritten, and resolution chases aliases at read time.
class Taxonomy {
 public:
  // Canonical target of `normalized` without registering anything.
  std::string lookup(std::string_view normalized) const;

  // Closed tasks: the matching task label or Errc::label_out_of_space.
  // Open tasks: alias target, or `normalized` registered as a new category.
  std::string resolve(std::string_view normalized, const TaskSpec& task);

  void add_count(const std::string& canonical, std::uint64_t n = 1);

  // Throws Errc::not_found for an unknown category, Errc::conflict when
  // from == into.
  void merge(const std::string& from, const std::string& into, const std::string& actor,
             const std::string& ts);

  bool contains(const std::string& canonical) const { return counts_.contains(canonical); }
  const std::map<std::string, std::uint64_t>& counts() const { return counts_; }
  const std::map<std::string, std::string>& aliases() const { return aliases_; }
  const std::vector<MergeEntry>& merges() const { return merges_; }

  nlohmann::json to_json() const;

  bool operator==(const Taxonomy&) const = default;

 private:
  std::map<std::string, std::uint64_t> counts_;  // keys are the canonical set
  std::map<std::string, std::string> aliases_;
  std::vector<MergeEntry> merges_;
};

// Over categories with count >= 1; nullopt when there are none.
std::optional<SparsityStats> sparsity_stats(const Taxonomy& taxonomy);

}  // namespace mchr
