#include "mchr/codec.hpp"

#include "mchr/error.hpp"

namespace mchr {

namespace {

nlohmann::json nullable(const std::optional<std::string>& s) {
  return s ? nlohmann::json(*s) : nlohmann::json(nullptr);
}

std::optional<std::string> opt_string(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

}  // namespace

nlohmann::json item_to_json(const ContentItem& item, bool with_gold) {
  nlohmann::json j = {{"id", item.id}, {"content", item.content}, {"group", item.group}};
  if (with_gold) j["gold"] = nullable(item.gold);
  return j;
}

ContentItem item_from_json(const nlohmann::json& j) {
  return {j.at("id").get<std::string>(), j.at("content").get<std::string>(), j.at("group").get<std::string>(),
          opt_string(j, "gold")};
}

nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json j = {{"source", m.source}, {"item_count", m.item_count}, {"group_counts", m.group_counts}};
  j["sample_seed"] = m.sample_seed ? nlohmann::json(*m.sample_seed) : nlohmann::json(nullptr);
  return j;
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.source = j.at("source").get<std::string>();
  m.item_count = j.at("item_count").get<std::size_t>();
  m.group_counts = j.at("group_counts").get<std::map<std::string, std::size_t>>();
  if (auto it = j.find("sample_seed"); it != j.end() && !it->is_null()) m.sample_seed = it->get<std::uint64_t>();
  return m;
}

nlohmann::json verdict_to_json(const ModelVerdict& v) {
  nlohmann::json j = {{"model", v.model_id},
                      {"item", v.item_id},
                      {"status", v.labeled() ? "labeled" : "abstained"},
                      {"reasoning", v.reasoning},
                      {"attempts", v.attempts},
                      {"raw", v.raw_response}};
  j["label"] = v.labeled() ? nlohmann::json(v.label) : nlohmann::json(nullptr);
  j["confidence"] = v.labeled() ? nlohmann::json(v.confidence) : nlohmann::json(nullptr);
  return j;
}

ModelVerdict verdict_from_json(const nlohmann::json& j) {
  ModelVerdict v;
  v.model_id = j.at("model").get<std::string>();
  v.item_id = j.at("item").get<std::string>();
  const std::string status = j.at("status").get<std::string>();
  if (status == "labeled") {
    v.status = VerdictStatus::labeled;
    v.label = j.at("label").get<std::string>();
    v.confidence = j.at("confidence").get<double>();
  } else if (status == "abstained") {
    v.status = VerdictStatus::abstained;
  } else {
    throw Error(Errc::validation, "unknown verdict status '" + status + "'");
  }
  v.reasoning = j.at("reasoning").get<std::string>();
  v.attempts = j.at("attempts").get<int>();
  v.raw_response = j.at("raw").get<std::string>();
  return v;
}

nlohmann::json divergence_to_json(const std::vector<DivergencePoint>& points) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& d : points)
    arr.push_back({{"label", d.label}, {"holders", d.holders}, {"conf_min", d.conf_min}, {"conf_max", d.conf_max}});
  return arr;
}

std::vector<DivergencePoint> divergence_from_json(const nlohmann::json& j) {
  std::vector<DivergencePoint> out;
  for (const auto& d : j)
    out.push_back({d.at("label").get<std::string>(), d.at("holders").get<std::vector<std::string>>(),
                   d.at("conf_min").get<double>(), d.at("conf_max").get<double>()});
  return out;
}

nlohmann::json route_to_json(const Route& r) {
  nlohmann::json j = {{"route", route_kind_name(r.kind)}};
  j["reason"] = r.reason ? nlohmann::json(reason_name(*r.reason)) : nlohmann::json(nullptr);
  return j;
}

Route route_from_json(const nlohmann::json& j) {
  Route r;
  r.kind = parse_route_kind(j.at("route").get<std::string>());
  if (auto reason = opt_string(j, "reason")) r.reason = parse_reason(*reason);
  return r;
}

nlohmann::json decision_to_json(const ReviewDecision& d) {
  return {{"label", d.label}, {"reviewer", d.reviewer}, {"rationale", d.rationale}, {"decided_at", d.decided_at}};
}

ReviewDecision decision_from_json(const nlohmann::json& j) {
  return {j.at("label").get<std::string>(), j.value("reviewer", std::string()), j.value("rationale", std::string()),
          j.value("decided_at", std::string())};
}

nlohmann::json record_to_json(const AnnotationRecord& r) {
  nlohmann::json j = {{"item", r.item_id},
                      {"final", r.final_label},
                      {"source", record_source_name(r.source)},
                      {"agreement", agreement_name(r.agreement)},
                      {"confidences", r.confidences}};
  j["reason"] = r.reason ? nlohmann::json(reason_name(*r.reason)) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json case_payload(const ReviewCase& c) {
  nlohmann::json verdicts = nlohmann::json::array();
  for (const auto& v : c.outcome.verdicts) {
    nlohmann::json e = {{"model", v.model_id}, {"status", v.labeled() ? "labeled" : "abstained"}, {"reasoning", v.reasoning}};
    e["label"] = v.labeled() ? nlohmann::json(v.label) : nlohmann::json(nullptr);
    e["confidence"] = v.labeled() ? nlohmann::json(v.confidence) : nlohmann::json(nullptr);
    verdicts.push_back(std::move(e));
  }
  nlohmann::json j = {{"case_id", c.case_id},
                      {"seq", c.seq},
                      {"reason", reason_name(c.reason)},
                      {"item", item_to_json(c.item, /*with_gold=*/false)},
                      {"verdicts", std::move(verdicts)},
                      {"divergence", divergence_to_json(c.outcome.divergence)},
                      {"agreement", agreement_name(c.outcome.agreement)},
                      {"status", case_status_name(c.status)}};
  j["consensus"] = nullable(c.outcome.consensus);
  j["decision"] = c.decision ? decision_to_json(*c.decision) : nlohmann::json(nullptr);
  if (c.qc_match) j["qc_match"] = *c.qc_match;
  return j;
}

nlohmann::json case_summary(const ReviewCase& c) {
  nlohmann::json j = {{"case_id", c.case_id},
                      {"seq", c.seq},
                      {"item_id", c.item.id},
                      {"reason", reason_name(c.reason)},
                      {"group", c.item.group},
                      {"status", case_status_name(c.status)}};
  j["consensus"] = nullable(c.outcome.consensus);
  return j;
}

}  // namespace mchr
