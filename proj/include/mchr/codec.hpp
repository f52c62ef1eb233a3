#pragma once

// JSON forms of the domain types, shared by the event log, the HTTP API and
// the Python bindings.

#include <nlohmann/json.hpp>

#include "mchr/consensus.hpp"
#include "mchr/ingest.hpp"
#include "mchr/review.hpp"

namespace mchr {

nlohmann::json item_to_json(const ContentItem& item, bool with_gold);
ContentItem item_from_json(const nlohmann::json& j);

nlohmann::json manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

nlohmann::json verdict_to_json(const ModelVerdict& v);
ModelVerdict verdict_from_json(const nlohmann::json& j);

nlohmann::json divergence_to_json(const std::vector<DivergencePoint>& points);
std::vector<DivergencePoint> divergence_from_json(const nlohmann::json& j);

nlohmann::json route_to_json(const Route& r);
Route route_from_json(const nlohmann::json& j);

nlohmann::json decision_to_json(const ReviewDecision& d);
ReviewDecision decision_from_json(const nlohmann::json& j);

nlohmann::json record_to_json(const AnnotationRecord& r);

// Reviewer-facing case payload. Never carries the gold label.
nlohmann::json case_payload(const ReviewCase& c);
nlohmann::json case_summary(const ReviewCase& c);

}  // namespace mchr
