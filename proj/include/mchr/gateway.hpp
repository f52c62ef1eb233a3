#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <variant>
#include <vector>

#include "mchr/ingest.hpp"
#include "mchr/task.hpp"

namespace mchr {

enum class VerdictStatus { labeled, abstained };

struct ModelVerdict {
  std::string model_id;
  std::string item_id;
  VerdictStatus status = VerdictStatus::abstained;
  std::string label;        // normalized; closed tasks: a task label
  double confidence = 0.0;  // meaningful iff labeled
  std::string reasoning;
  int attempts = 1;
  std::string raw_response;

  bool labeled() const { return status == VerdictStatus::labeled; }
  bool operator==(const ModelVerdict&) const = default;
};

struct RenderedPrompt {
  std::string template_id;
  std::string text;
  std::string item_id;
};

// Instructions line placed after the content; part of every bundled template.
inline constexpr std::string_view kResponseFormat =
    R"({"label": "<string>", "confidence": <number 0..1>, "reasoning": "<string>"})";

// Looks up the template in the task's own templates first, then the bundled
// set ("closed-v1", "open-v1"). Throws Errc::config for an unknown id or an
// unknown {{placeholder}}.
RenderedPrompt render_prompt(const TaskSpec& task, const ContentItem& item);

enum class FormatErrorKind { unparseable, schema, label_out_of_space };

struct FormatError {
  FormatErrorKind kind;
  std::string message;
};

std::string_view format_error_name(FormatErrorKind kind);

using ParseResult = std::variant<ModelVerdict, FormatError>;

// Finds the first balanced JSON object in `raw` (prose and code fences around
// it are ignored) and validates label/confidence/reasoning.
ParseResult parse_verdict(std::string_view raw, const TaskSpec& task, std::string_view model_id,
                          std::string_view item_id);

// A model endpoint. Implementations must be safe for concurrent calls.
class ModelAdapter {
 public:
  virtual ~ModelAdapter() = default;

  // Returns the raw response text. `attempt` is 1-based. Throws Errc::adapter
  // on transport failure.
  virtual std::string complete(const ModelSpec& model, const RenderedPrompt& prompt, int attempt) = 0;
};

// Serves (model, item, attempt) -> response from a line-delimited fixture.
class ReplayAdapter : public ModelAdapter {
 public:
  explicit ReplayAdapter(const std::filesystem::path& fixture);

  std::string complete(const ModelSpec& model, const RenderedPrompt& prompt, int attempt) override;

  std::size_t size() const { return responses_.size(); }

 private:
  std::map<std::tuple<std::string, std::string, int>, std::string> responses_;
};

// Settings accepted by the synthetic adapter (also the simulate profile).
struct SyntheticProfile {
  std::string id;
  double accuracy = 1.0;
  double conf_correct_lo = 0.75;
  double conf_wrong_lo = 0.4;
  double conf_wrong_hi = 0.9;
  std::uint64_t seed = 0;
  // Probability that a model reuses the item's shared draw instead of its own,
  // coupling the errors of all models with correlation > 0.
  double correlation = 0.0;
  std::uint64_t shared_seed = 0;
  // Open tasks: share of wrong answers that are fresh, never-seen labels
  // rather than another label from the pool.
  double novel_rate = 0.5;

  void validate() const;
};

SyntheticProfile profile_from_json(const nlohmann::json& j);

struct SyntheticDraw {
  std::string label;
  double confidence = 0.0;
};

// Label and confidence the synthetic model produces for one item. `space`
// is the closed label space or, when `open`, the category pool that wrong
// answers are drawn from alongside fresh "novel-*" labels.
SyntheticDraw synthetic_draw(const SyntheticProfile& profile, const std::vector<std::string>& space,
                             const std::string& gold, std::string_view item_id, bool open = false);

// Answers with the gold label with probability `accuracy`; gold comes from
// the dataset. Deterministic per (seed, item id).
class SyntheticAdapter : public ModelAdapter {
 public:
  SyntheticAdapter(SyntheticProfile profile, std::vector<std::string> space, bool open,
                   std::shared_ptr<const std::map<std::string, std::string>> gold);

  std::string complete(const ModelSpec& model, const RenderedPrompt& prompt, int attempt) override;

 private:
  SyntheticProfile profile_;
  std::vector<std::string> space_;
  bool open_;
  std::shared_ptr<const std::map<std::string, std::string>> gold_;
};

// OpenAI-style chat completions endpoint. Settings: url (http[s]://host[:port]/path),
// model, api_key_env (optional), temperature (optional), timeout_ms (optional,
// default MCHR_HTTP_TIMEOUT_MS or 60000), retries (optional, default 2).
class HttpChatAdapter : public ModelAdapter {
 public:
  explicit HttpChatAdapter(const ModelSpec& spec);

  std::string complete(const ModelSpec& model, const RenderedPrompt& prompt, int attempt) override;

 private:
  std::string scheme_host_port_;
  std::string path_;
  std::string model_name_;
  std::string api_key_;
  double temperature_ = 0.0;
  int timeout_ms_ = 60000;
  int retries_ = 2;
};

inline constexpr int kMaxRepairRetries = 2;

// Queries the adapter; on a format error re-queries with a repair
// instruction, at most kMaxRepairRetries times, then abstains.
ModelVerdict query_with_repair(ModelAdapter& adapter, const ModelSpec& model,
                               const RenderedPrompt& prompt, const TaskSpec& task);

// Appended to the prompt text on repair attempts.
std::string repair_suffix(const FormatError& error);

// The three role adapters of a run plus a global in-flight request cap.
class Gateway {
 public:
  Gateway(ModelRoster roster, std::array<std::shared_ptr<ModelAdapter>, 3> adapters,
          std::ptrdiff_t max_in_flight = 8);

  ModelVerdict query(Role role, const RenderedPrompt& prompt, const TaskSpec& task);

  const ModelRoster& roster() const { return roster_; }

  // Number of completed query() calls per role.
  std::uint64_t calls(Role role) const;

 private:
  ModelRoster roster_;
  std::array<std::shared_ptr<ModelAdapter>, 3> adapters_;
  std::counting_semaphore<> in_flight_;
  std::array<std::atomic<std::uint64_t>, 3> calls_{};
};

// Builds adapters for a roster. Synthetic adapters draw gold from `items`;
// on open tasks their wrong-answer pool is settings.pool or, failing that,
// the distinct gold labels of `items`.
std::unique_ptr<Gateway> make_gateway(const ModelRoster& roster, const TaskSpec& task,
                     std::span<const ContentItem> items, std::ptrdiff_t max_in_flight = 8);

}  // namespace mchr
