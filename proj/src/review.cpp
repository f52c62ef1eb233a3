#include "mchr/review.hpp"

#include <charconv>

#include "mchr/error.hpp"

namespace mchr {

namespace {

std::vector<double> confidences_of(const ConsensusOutcome& o) {
  std::vector<double> out;
  for (const auto& v : o.verdicts) out.push_back(v.labeled() ? v.confidence : 0.0);
  return out;
}

std::string encode_cursor(std::uint64_t seq) {
  char buf[24];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, seq, 16);
  return "p" + std::string(buf, end);
}

std::uint64_t decode_cursor(const std::string& cursor) {
  std::uint64_t seq = 0;
  if (cursor.size() < 2 || cursor[0] != 'p') throw Error(Errc::bad_cursor, "bad cursor");
  auto [end, ec] = std::from_chars(cursor.data() + 1, cursor.data() + cursor.size(), seq, 16);
  if (ec != std::errc() || end != cursor.data() + cursor.size()) throw Error(Errc::bad_cursor, "bad cursor");
  return seq;
}

}  // namespace

std::string_view case_status_name(CaseStatus s) { return s == CaseStatus::pending ? "pending" : "decided"; }

CaseStatus parse_case_status(std::string_view s) {
  if (s == "pending") return CaseStatus::pending;
  if (s == "decided") return CaseStatus::decided;
  throw Error(Errc::validation, "unknown case status '" + std::string(s) + "'");
}

std::string_view record_source_name(RecordSource s) { return s == RecordSource::automatic ? "Auto" : "Human"; }

const ReviewCase& ReviewQueue::enqueue(const ContentItem& item, const ConsensusOutcome& outcome, ReviewReason reason) {
  const bool matches_route = reason == ReviewReason::qc
                                 ? outcome.route.kind == RouteKind::qc_sample
                                 : outcome.route.kind == RouteKind::human_review && outcome.route.reason == reason;
  if (!matches_route) throw Error(Errc::contract, "outcome for item '" + item.id + "' is not routed to this review");
  if (by_item_.contains(item.id)) throw Error(Errc::conflict, "item '" + item.id + "' already has a review case");

  ReviewCase c;
  c.seq = cases_.size() + 1;
  c.case_id = "case-" + std::to_string(c.seq);
  c.item = item;
  c.item.gold.reset();
  c.outcome = outcome;
  c.reason = reason;
  by_case_id_[c.case_id] = cases_.size();
  by_item_[item.id] = cases_.size();
  cases_.push_back(std::move(c));
  return cases_.back();
}

const AnnotationRecord& ReviewQueue::auto_finalize(const ConsensusOutcome& outcome, const TaskSpec& task,
                                                   Taxonomy& taxonomy) {
  if (outcome.route.kind == RouteKind::human_review || !outcome.consensus) {
    throw Error(Errc::contract, "item '" + outcome.item_id + "' is not eligible for automatic acceptance");
  }
  if (records_.contains(outcome.item_id)) throw Error(Errc::conflict, "item '" + outcome.item_id + "' already has a record");

  AnnotationRecord r;
  r.item_id = outcome.item_id;
  r.final_label = *outcome.consensus;
  r.source = RecordSource::automatic;
  r.agreement = outcome.agreement;
  r.confidences = confidences_of(outcome);
  if (task.is_open()) taxonomy.add_count(taxonomy.resolve(r.final_label, task));
  return records_.emplace(r.item_id, std::move(r)).first->second;
}

DecisionResult ReviewQueue::apply_decision(const std::string& case_id, const ReviewDecision& decision,
                                           const TaskSpec& task, Taxonomy& taxonomy) {
  auto it = by_case_id_.find(case_id);
  if (it == by_case_id_.end()) throw Error(Errc::not_found, "unknown case '" + case_id + "'");
  ReviewCase& c = cases_[it->second];
  if (c.status == CaseStatus::decided) throw Error(Errc::conflict, "case '" + case_id + "' is already decided");

  const std::string normalized = normalize_label(decision.label);
  std::string final_label;
  if (task.is_open()) {
    final_label = taxonomy.lookup(normalized);
  } else {
    auto hit = match_closed_label(*task.labels, normalized);
    if (!hit) throw Error(Errc::label_out_of_space, "label '" + normalized + "' is not in the task label space");
    final_label = *hit;
  }

  DecisionResult result;
  if (c.reason == ReviewReason::qc) {
    auto rec = records_.find(c.item.id);
    if (rec == records_.end()) throw Error(Errc::contract, "QC case '" + case_id + "' has no automatic record");
    const std::string consensus = task.is_open() ? taxonomy.lookup(*c.outcome.consensus) : *c.outcome.consensus;
    result.record = rec->second;
    result.qc_match = final_label == consensus;
  } else {
    if (records_.contains(c.item.id)) throw Error(Errc::conflict, "item '" + c.item.id + "' already has a record");
    AnnotationRecord r;
    r.item_id = c.item.id;
    r.final_label = final_label;
    r.source = RecordSource::human;
    r.agreement = c.outcome.agreement;
    r.reason = c.reason;
    r.confidences = confidences_of(c.outcome);
    result.record = r;
    records_.emplace(r.item_id, std::move(r));
  }

  // Past this point nothing throws.
  if (task.is_open()) {
    taxonomy.resolve(final_label, task);
    if (c.reason != ReviewReason::qc) taxonomy.add_count(final_label);
  }
  c.status = CaseStatus::decided;
  c.decision = decision;
  c.qc_match = result.qc_match;
  return result;
}

CasePage ReviewQueue::list(const CaseQuery& query) const {
  if (query.limit == 0) throw Error(Errc::validation, "limit must be >= 1");
  const std::uint64_t after = query.cursor.empty() ? 0 : decode_cursor(query.cursor);
  if (after > cases_.size()) throw Error(Errc::bad_cursor, "bad cursor");

  CasePage page;
  for (std::size_t i = after; i < cases_.size(); ++i) {
    const ReviewCase& c = cases_[i];
    if (query.status && c.status != *query.status) continue;
    if (query.reason && c.reason != *query.reason) continue;
    if (page.cases.size() == query.limit) {
      page.next_cursor = encode_cursor(page.cases.back()->seq);
      break;
    }
    page.cases.push_back(&c);
  }
  return page;
}

const ReviewCase* ReviewQueue::find(const std::string& case_id) const {
  auto it = by_case_id_.find(case_id);
  return it == by_case_id_.end() ? nullptr : &cases_[it->second];
}

std::vector<std::string> ReviewQueue::pending_ids() const {
  std::vector<std::string> out;
  for (const auto& c : cases_)
    if (c.status == CaseStatus::pending) out.push_back(c.case_id);
  return out;
}

}  // namespace mchr
