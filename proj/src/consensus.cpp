#include "mchr/consensus.hpp"

#include <algorithm>

#include "mchr/error.hpp"
#include "mchr/rng.hpp"

namespace mchr {

namespace {

constexpr std::string_view kSentinelPrefix = "\x1f" "abstain:";

constexpr std::array<Role, 3> kRoles{Role::primary1, Role::primary2, Role::tiebreaker};

}  // namespace

std::string_view agreement_name(Agreement a) {
  switch (a) {
    case Agreement::full: return "full";
    case Agreement::partial: return "partial";
    case Agreement::none: return "none";
  }
  return "?";
}

Agreement parse_agreement(std::string_view s) {
  if (s == "full") return Agreement::full;
  if (s == "partial") return Agreement::partial;
  if (s == "none") return Agreement::none;
  throw Error(Errc::validation, "unknown agreement '" + std::string(s) + "'");
}

std::string_view reason_name(ReviewReason r) {
  switch (r) {
    case ReviewReason::disagreement: return "disagreement";
    case ReviewReason::low_confidence: return "low-confidence";
    case ReviewReason::qc: return "qc";
  }
  return "?";
}

ReviewReason parse_reason(std::string_view s) {
  if (s == "disagreement") return ReviewReason::disagreement;
  if (s == "low-confidence") return ReviewReason::low_confidence;
  if (s == "qc") return ReviewReason::qc;
  throw Error(Errc::validation, "unknown review reason '" + std::string(s) + "'");
}

std::string_view route_kind_name(RouteKind k) {
  switch (k) {
    case RouteKind::auto_accept: return "auto-accept";
    case RouteKind::human_review: return "human-review";
    case RouteKind::qc_sample: return "qc-sample";
  }
  return "?";
}

RouteKind parse_route_kind(std::string_view s) {
  if (s == "auto-accept") return RouteKind::auto_accept;
  if (s == "human-review") return RouteKind::human_review;
  if (s == "qc-sample") return RouteKind::qc_sample;
  throw Error(Errc::validation, "unknown route '" + std::string(s) + "'");
}

std::string canonical_label(const ModelVerdict& v, Role role, const LabelResolver& resolve) {
  if (!v.labeled()) return std::string(kSentinelPrefix) + std::string(role_name(role));
  return resolve ? resolve(v.label) : v.label;
}

bool is_abstention_sentinel(std::string_view label) { return label.starts_with(kSentinelPrefix); }

Agreement agreement_level(std::string_view c1, std::string_view c2, std::optional<std::string_view> c3) {
  if (c1 == c2) {
    if (c3) throw Error(Errc::contract, "tiebreaker verdict supplied although the primaries agree");
    return Agreement::full;
  }
  if (!c3) throw Error(Errc::contract, "primaries disagree but no tiebreaker verdict was supplied");
  return (*c3 == c1 || *c3 == c2) ? Agreement::partial : Agreement::none;
}

Agreement agreement_level(const ModelVerdict& v1, const ModelVerdict& v2, const ModelVerdict* v3) {
  const std::string c1 = canonical_label(v1, Role::primary1, {});
  const std::string c2 = canonical_label(v2, Role::primary2, {});
  if (!v3) return agreement_level(c1, c2, std::nullopt);
  const std::string c3 = canonical_label(*v3, Role::tiebreaker, {});
  return agreement_level(c1, c2, std::optional<std::string_view>(c3));
}

QcSampler::QcSampler(double rate, std::uint64_t seed) : rate_(rate), gen_(mix64(seed ^ 0x51c0ffeeULL)) {}

bool QcSampler::draw() {
  if (rate_ <= 0.0) return false;
  if (rate_ >= 1.0) return true;
  std::lock_guard lock(mu_);
  return unit_double(gen_) < rate_;
}

ConsensusOutcome assess(std::string_view item_id, const VerdictSource& source, const LabelResolver& resolve) {
  ConsensusOutcome out;
  out.item_id = item_id;
  out.verdicts.push_back(source(Role::primary1));
  out.verdicts.push_back(source(Role::primary2));
  out.canonical.push_back(canonical_label(out.verdicts[0], Role::primary1, resolve));
  out.canonical.push_back(canonical_label(out.verdicts[1], Role::primary2, resolve));

  if (out.canonical[0] == out.canonical[1]) {
    out.agreement = Agreement::full;
    out.consensus = out.canonical[0];
  } else {
    out.verdicts.push_back(source(Role::tiebreaker));
    out.canonical.push_back(canonical_label(out.verdicts[2], Role::tiebreaker, resolve));
    out.agreement = agreement_level(out.canonical[0], out.canonical[1], std::optional<std::string_view>(out.canonical[2]));
    if (out.agreement == Agreement::partial) out.consensus = out.canonical[2];
  }

  for (std::size_t i = 0; i < out.verdicts.size(); ++i) {
    const ModelVerdict& v = out.verdicts[i];
    if (!v.labeled()) continue;
    auto it = std::find_if(out.divergence.begin(), out.divergence.end(),
                           [&](const DivergencePoint& d) { return d.label == out.canonical[i]; });
    if (it == out.divergence.end()) {
      out.divergence.push_back({out.canonical[i], {v.model_id}, v.confidence, v.confidence});
    } else {
      it->holders.push_back(v.model_id);
      it->conf_min = std::min(it->conf_min, v.confidence);
      it->conf_max = std::max(it->conf_max, v.confidence);
    }
  }
  return out;
}

Route route(const ConsensusOutcome& outcome, double threshold, QcSampler& qc) {
  switch (outcome.agreement) {
    case Agreement::none:
      return Route::review(ReviewReason::disagreement);
    case Agreement::partial: {
      double weakest = 1.0;
      for (std::size_t i = 0; i < outcome.verdicts.size(); ++i)
        if (outcome.canonical[i] == *outcome.consensus) weakest = std::min(weakest, outcome.verdicts[i].confidence);
      return weakest < threshold ? Route::review(ReviewReason::low_confidence) : Route::auto_accept();
    }
    case Agreement::full:
      return qc.draw() ? Route::qc_sample() : Route::auto_accept();
  }
  return Route::auto_accept();
}

ConsensusOutcome decide(std::string_view item_id, const VerdictSource& source, const LabelResolver& resolve,
                        double threshold, QcSampler& qc) {
  ConsensusOutcome out = assess(item_id, source, resolve);
  out.route = route(out, threshold, qc);
  return out;
}

bool outcome_invariants_hold(const ConsensusOutcome& o, bool check_route) {
  const bool has_consensus = o.consensus.has_value();
  if ((o.agreement == Agreement::none) == has_consensus) return false;
  if ((o.agreement == Agreement::full) != (o.verdicts.size() == 2)) return false;
  if (o.verdicts.size() != o.canonical.size()) return false;
  if (o.verdicts.size() != 2 && o.verdicts.size() != 3) return false;
  const Route& r = o.route;
  if (check_route) switch (r.kind) {
    case RouteKind::auto_accept:
      if (r.reason || o.agreement == Agreement::none) return false;
      break;
    case RouteKind::qc_sample:
      if (r.reason || o.agreement != Agreement::full) return false;
      break;
    case RouteKind::human_review:
      if (!r.reason) return false;
      if (*r.reason == ReviewReason::disagreement && o.agreement != Agreement::none) return false;
      if (*r.reason == ReviewReason::low_confidence && o.agreement != Agreement::partial) return false;
      if (*r.reason == ReviewReason::qc) return false;
      break;
  }
  // Holders partition the labeled models.
  std::size_t labeled = 0, held = 0;
  for (const auto& v : o.verdicts) labeled += v.labeled() ? 1 : 0;
  for (const auto& d : o.divergence) held += d.holders.size();
  return labeled == held;
}

}  // namespace mchr
