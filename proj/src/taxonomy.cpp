#include "mchr/taxonomy.hpp"

#include <cmath>

#include "mchr/error.hpp"

namespace mchr {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_quote(char c) { return c == '"' || c == '\'' || c == '`'; }
bool is_trailing_punct(char c) {
  return c == '.' || c == ',' || c == ';' || c == ':' || c == '!';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

double round4(double x) { return std::round(x * 10000.0) / 10000.0; }

}  // namespace

std::string normalize_label(std::string_view raw) {
  std::string_view s = trim(raw);
  for (bool changed = true; changed && !s.empty();) {
    changed = false;
    while (!s.empty() && is_trailing_punct(s.back())) {
      s.remove_suffix(1);
      changed = true;
    }
    if (s.size() >= 2 && is_quote(s.front()) && s.front() == s.back()) {
      s = s.substr(1, s.size() - 2);
      changed = true;
    }
    s = trim(s);
  }

  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
  }
  if (out.empty()) throw Error(Errc::invalid_label, "label '" + std::string(raw) + "' is empty after normalization");
  return out;
}

std::string label_key(std::string_view normalized) {
  std::string key;
  for (char c : normalized)
    if (c != ' ' && c != '-' && c != '_') key.push_back(c);
  return key;
}

std::optional<std::string> match_closed_label(const std::vector<std::string>& labels,
                                              std::string_view normalized) {
  const std::string key = label_key(normalized);
  for (const auto& l : labels)
    if (label_key(l) == key) return l;
  return std::nullopt;
}

std::string Taxonomy::lookup(std::string_view normalized) const {
  std::string cur(normalized);
  // Merges keep aliases one hop deep; the bound guards a corrupted state.
  for (std::size_t steps = 0; steps <= aliases_.size(); ++steps) {
    auto it = aliases_.find(cur);
    if (it == aliases_.end()) return cur;
    cur = it->second;
  }
  throw Error(Errc::corruption, "alias cycle at '" + std::string(normalized) + "'");
}

std::string Taxonomy::resolve(std::string_view normalized, const TaskSpec& task) {
  if (normalized.empty()) throw Error(Errc::invalid_label, "empty label");
  if (!task.is_open()) {
    if (auto hit = match_closed_label(*task.labels, normalized)) return *hit;
    throw Error(Errc::label_out_of_space,
                "label '" + std::string(normalized) + "' is not in the label space of task '" + task.id + "'");
  }
  std::string canonical = lookup(normalized);
  counts_.try_emplace(canonical, 0);
  return canonical;
}

void Taxonomy::add_count(const std::string& canonical, std::uint64_t n) { counts_[canonical] += n; }

void Taxonomy::merge(const std::string& from, const std::string& into, const std::string& actor,
                     const std::string& ts) {
  if (from == into) throw Error(Errc::conflict, "cannot merge '" + from + "' into itself");
  auto src = counts_.find(from);
  if (src == counts_.end()) throw Error(Errc::not_found, "unknown category '" + from + "'");
  if (!counts_.contains(into)) throw Error(Errc::not_found, "unknown category '" + into + "'");

  counts_[into] += src->second;
  counts_.erase(src);
  for (auto& [alias, target] : aliases_)
    if (target == from) target = into;
  aliases_[from] = into;
  merges_.push_back({from, into, ts, actor});
}

nlohmann::json Taxonomy::to_json() const {
  nlohmann::json merges = nlohmann::json::array();
  for (const auto& m : merges_)
    merges.push_back({{"from", m.from}, {"into", m.into}, {"ts", m.ts}, {"actor", m.actor}});
  return {{"categories", counts_}, {"aliases", aliases_}, {"merges", merges}};
}

std::optional<SparsityStats> sparsity_stats(const Taxonomy& taxonomy) {
  std::size_t n = 0, sparse = 0;
  std::uint64_t total = 0;
  for (const auto& [name, count] : taxonomy.counts()) {
    if (count == 0) continue;
    ++n;
    total += count;
    if (count < 3) ++sparse;
  }
  if (n == 0) return std::nullopt;
  return SparsityStats{n, round4(static_cast<double>(sparse) / static_cast<double>(n)),
                       round4(static_cast<double>(total) / static_cast<double>(n))};
}

}  // namespace mchr
