#include "mchr/ingest.hpp"

#include <fstream>
#include <random>
#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "mchr/error.hpp"
#include "mchr/rng.hpp"

namespace mchr {

namespace {

std::string required_string(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(Errc::validation, std::string("missing field '") + key + "'");
  if (!it->is_string()) throw Error(Errc::validation, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace

ContentItem parse_item(std::string_view line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw Error(Errc::validation, "not valid JSON");
  if (!j.is_object()) throw Error(Errc::validation, "record is not a JSON object");

  ContentItem item;
  item.id = required_string(j, "id");
  item.content = required_string(j, "content");
  item.group = required_string(j, "group");
  if (auto it = j.find("gold"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw Error(Errc::validation, "field 'gold' must be a string or null");
    item.gold = it->get<std::string>();
  }
  if (item.id.empty()) throw Error(Errc::validation, "empty id");
  if (item.content.empty()) throw Error(Errc::validation, "empty content");
  return item;
}

DatasetManifest make_manifest(std::span<const ContentItem> items, std::string source,
                              std::optional<std::uint64_t> seed) {
  DatasetManifest m;
  m.source = std::move(source);
  m.item_count = items.size();
  for (const auto& item : items) ++m.group_counts[item.group];
  m.sample_seed = seed;
  return m;
}

LoadedDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::input, "cannot read dataset " + path.string());

  LoadedDataset out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ContentItem item;
    try {
      item = parse_item(line);
    } catch (const Error& e) {
      out.errors.push_back({lineno, e.what()});
      continue;
    }
    if (!seen.insert(item.id).second) {
      throw Error(Errc::validation,
                  "duplicate id '" + item.id + "' at line " + std::to_string(lineno));
    }
    out.items.push_back(std::move(item));
  }
  if (in.bad()) throw Error(Errc::input, "read error in " + path.string());
  out.manifest = make_manifest(out.items, path.string());
  return out;
}

std::vector<ContentItem> stratified_sample(std::span<const ContentItem> items,
                                           std::size_t per_group, std::uint64_t seed) {
  if (per_group == 0) throw Error(Errc::contract, "per_group must be >= 1");

  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto [it, inserted] = members.try_emplace(items[i].group);
    if (inserted) order.push_back(items[i].group);
    it->second.push_back(i);
  }

  std::vector<ContentItem> out;
  for (const auto& group : order) {
    auto& idx = members[group];
    // One stream per group so adding a group elsewhere leaves this draw alone.
    std::mt19937_64 gen(derive_seed(seed, group));
    const std::size_t take = std::min(per_group, idx.size());
    // Partial Fisher-Yates.
    for (std::size_t k = 0; k < take; ++k) {
      const std::size_t j = k + static_cast<std::size_t>(bounded(gen, idx.size() - k));
      std::swap(idx[k], idx[j]);
      out.push_back(items[idx[k]]);
    }
  }
  return out;
}

}  // namespace mchr
