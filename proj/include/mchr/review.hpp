#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mchr/consensus.hpp"
#include "mchr/ingest.hpp"
#include "mchr/taxonomy.hpp"

namespace mchr {

enum class CaseStatus { pending, decided };
enum class RecordSource { automatic, human };

std::string_view case_status_name(CaseStatus s);
CaseStatus parse_case_status(std::string_view s);
std::string_view record_source_name(RecordSource s);

struct ReviewDecision {
  std::string label;
  std::string reviewer;
  std::string rationale;
  std::string decided_at;

  bool operator==(const ReviewDecision&) const = default;
};

struct ReviewCase {
  std::string case_id;
  std::uint64_t seq = 0;  // enqueue order, 1-based
  ContentItem item;       // gold always stripped
  ConsensusOutcome outcome;
  ReviewReason reason = ReviewReason::disagreement;
  CaseStatus status = CaseStatus::pending;
  std::optional<ReviewDecision> decision;
  std::optional<bool> qc_match;  // QC cases only, once decided

  bool operator==(const ReviewCase&) const = default;
};

struct AnnotationRecord {
  std::string item_id;
  std::string final_label;
  RecordSource source = RecordSource::automatic;
  Agreement agreement = Agreement::full;
  std::optional<ReviewReason> reason;  // human records only
  std::vector<double> confidences;

  bool operator==(const AnnotationRecord&) const = default;
};

struct DecisionResult {
  AnnotationRecord record;       // for QC cases: the unchanged automatic record
  std::optional<bool> qc_match;  // set for QC cases
};

struct CaseQuery {
  std::optional<CaseStatus> status;
  std::optional<ReviewReason> reason;
  std::size_t limit = 50;
  std::string cursor;  // empty: first page
};

struct CasePage {
  std::vector<const ReviewCase*> cases;
  std::optional<std::string> next_cursor;
};

class ReviewQueue {
 public:
  // Precondition: the outcome routes to human review with this reason, or is
  // a QC sample and reason == qc. Errc::conflict on a second case for an item.
  const ReviewCase& enqueue(const ContentItem& item, const ConsensusOutcome& outcome, ReviewReason reason);

  // Automatic record for an auto-accepted (or QC-sampled) outcome; open-set
  // categories gain a count.
  const AnnotationRecord& auto_finalize(const ConsensusOutcome& outcome, const TaskSpec& task,
                                        Taxonomy& taxonomy);

  // Errc::not_found, Errc::conflict (already decided), Errc::invalid_label or
  // Errc::label_out_of_space. State is untouched when it throws.
  DecisionResult apply_decision(const std::string& case_id, const ReviewDecision& decision,
                                const TaskSpec& task, Taxonomy& taxonomy);

  // Errc::bad_cursor for a cursor this queue did not hand out,
  // Errc::validation for limit 0.
  CasePage list(const CaseQuery& query) const;

  const ReviewCase* find(const std::string& case_id) const;
  const std::vector<ReviewCase>& cases() const { return cases_; }
  const std::map<std::string, AnnotationRecord>& records() const { return records_; }
  std::vector<std::string> pending_ids() const;

  bool operator==(const ReviewQueue&) const = default;

 private:
  std::vector<ReviewCase> cases_;
  std::map<std::string, std::size_t> by_case_id_;
  std::map<std::string, std::size_t> by_item_;
  std::map<std::string, AnnotationRecord> records_;
};

}  // namespace mchr
