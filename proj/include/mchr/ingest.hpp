#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mchr {

// One unit of content to annotate.
struct ContentItem {
  std::string id;
  std::string content;
  std::string group;
  std::optional<std::string> gold;

  bool operator==(const ContentItem&) const = default;
};

struct DatasetManifest {
  std::string source;
  std::size_t item_count = 0;
  std::map<std::string, std::size_t> group_counts;
  std::optional<std::uint64_t> sample_seed;

  bool operator==(const DatasetManifest&) const = default;
};

struct LineError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct LoadedDataset {
  std::vector<ContentItem> items;
  DatasetManifest manifest;
  std::vector<LineError> errors;
};

// Reads one JSON record per line: {"id","content","group","gold"}.
// Malformed lines are skipped and reported in `errors`; an unreadable file
// throws Errc::input and a duplicate id throws Errc::validation.
LoadedDataset load_dataset(const std::filesystem::path& path);

// Parses a single record. Throws Errc::validation with a description.
ContentItem parse_item(std::string_view line);

DatasetManifest make_manifest(std::span<const ContentItem> items, std::string source,
                              std::optional<std::uint64_t> seed = std::nullopt);

// Draws min(per_group, |group|) items per group without replacement. Groups
// are emitted in order of first appearance; within a group, in draw order.
std::vector<ContentItem> stratified_sample(std::span<const ContentItem> items,
                                           std::size_t per_group, std::uint64_t seed);

}  // namespace mchr
