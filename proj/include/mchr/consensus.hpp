#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mchr/gateway.hpp"

namespace mchr {

enum class Agreement { full, partial, none };

enum class ReviewReason { disagreement, low_confidence, qc };

enum class RouteKind { auto_accept, human_review, qc_sample };

struct Route {
  RouteKind kind = RouteKind::auto_accept;
  // Set iff kind == human_review: disagreement or low_confidence.
  std::optional<ReviewReason> reason;

  static Route auto_accept() { return {}; }
  static Route review(ReviewReason r) { return {RouteKind::human_review, r}; }
  static Route qc_sample() { return {RouteKind::qc_sample, std::nullopt}; }

  bool operator==(const Route&) const = default;
};

struct DivergencePoint {
  std::string label;
  std::vector<std::string> holders;
  double conf_min = 0.0;
  double conf_max = 0.0;

  bool operator==(const DivergencePoint&) const = default;
};

struct ConsensusOutcome {
  std::string item_id;
  Agreement agreement = Agreement::none;
  std::optional<std::string> consensus;
  std::vector<ModelVerdict> verdicts;    // primary-1, primary-2[, tiebreaker]
  std::vector<std::string> canonical;    // parallel to verdicts; abstentions carry sentinels
  std::vector<DivergencePoint> divergence;
  Route route;

  bool operator==(const ConsensusOutcome&) const = default;
};

std::string_view agreement_name(Agreement a);
Agreement parse_agreement(std::string_view s);
std::string_view reason_name(ReviewReason r);
ReviewReason parse_reason(std::string_view s);
std::string_view route_kind_name(RouteKind k);
RouteKind parse_route_kind(std::string_view s);

// Maps a normalized label to its canonical form (alias resolution on open
// tasks, identity on closed ones).
using LabelResolver = std::function<std::string(const std::string&)>;

// Canonical comparison label of a verdict. An abstention yields a sentinel
// unique to its role, so it never matches anything.
std::string canonical_label(const ModelVerdict& v, Role role, const LabelResolver& resolve);

bool is_abstention_sentinel(std::string_view label);

// Throws Errc::contract when c3 is supplied although c1 == c2, or missing
// although they differ.
Agreement agreement_level(std::string_view c1, std::string_view c2, std::optional<std::string_view> c3);

// Overload on verdicts with identity resolution.
Agreement agreement_level(const ModelVerdict& v1, const ModelVerdict& v2, const ModelVerdict* v3);

// Seeded Bernoulli stream picking full-agreement items for QC audits.
// Draws are serialized so their order follows the caller's call order.
class QcSampler {
 public:
  QcSampler(double rate, std::uint64_t seed);

  bool draw();
  double rate() const { return rate_; }

 private:
  double rate_;
  std::mutex mu_;
  std::mt19937_64 gen_;
};

using VerdictSource = std::function<ModelVerdict(Role)>;

// Stages one and two: both primaries, then the tiebreaker only when their
// canonical labels differ. The returned outcome has a default route.
ConsensusOutcome assess(std::string_view item_id, const VerdictSource& source, const LabelResolver& resolve);

// Stage three: routing. Threshold applies to the weaker of the two agreeing
// verdicts on partial agreement.
Route route(const ConsensusOutcome& outcome, double threshold, QcSampler& qc);

ConsensusOutcome decide(std::string_view item_id, const VerdictSource& source, const LabelResolver& resolve,
                        double threshold, QcSampler& qc);

// True when the agreement/route/consensus/verdict-count couplings hold.
// check_route = false skips the route, for outcomes not yet routed.
bool outcome_invariants_hold(const ConsensusOutcome& outcome, bool check_route = true);

}  // namespace mchr
