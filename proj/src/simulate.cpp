#include "mchr/simulate.hpp"

#include <algorithm>
#include <fstream>
#include <thread>

#include "mchr/error.hpp"
#include "mchr/rng.hpp"
#include "mchr/session.hpp"

namespace mchr {

namespace {

nlohmann::json profile_settings(const SyntheticProfile& p) {
  return {{"accuracy", p.accuracy},
          {"conf_correct_lo", p.conf_correct_lo},
          {"conf_wrong_lo", p.conf_wrong_lo},
          {"conf_wrong_hi", p.conf_wrong_hi},
          {"seed", p.seed},
          {"correlation", p.correlation},
          {"shared_seed", p.shared_seed},
          {"novel_rate", p.novel_rate}};
}

std::vector<std::string> gold_space(const SimulationConfig& c) {
  if (c.task.labels) return *c.task.labels;
  if (!c.open_pool.empty()) return c.open_pool;
  if (!c.task.known_categories.empty()) return c.task.known_categories;
  std::vector<std::string> pool;
  for (int i = 1; i <= 10; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "cat-%02d", i);
    pool.emplace_back(buf);
  }
  return pool;
}

// P(conf >= threshold) for conf uniform on [lo, hi).
double p_confident(double lo, double hi, double threshold) {
  if (hi <= lo) return lo >= threshold ? 1.0 : 0.0;
  return std::clamp((hi - threshold) / (hi - lo), 0.0, 1.0);
}

}  // namespace

ProfileSet profiles_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(Errc::config, "profiles must be a JSON array");
  ProfileSet out;
  std::array<bool, 3> seen{};
  for (const auto& entry : j) {
    if (!entry.is_object() || !entry.contains("role") || !entry["role"].is_string())
      throw Error(Errc::config, "each profile needs a role");
    const Role role = parse_role(entry["role"].get<std::string>());
    const auto i = static_cast<std::size_t>(role);
    if (seen[i]) throw Error(Errc::config, "duplicate profile for role " + std::string(role_name(role)));
    seen[i] = true;
    out[i] = profile_from_json(entry);
    if (out[i].id.empty()) throw Error(Errc::config, "profile without id");
  }
  for (std::size_t i = 0; i < 3; ++i)
    if (!seen[i]) throw Error(Errc::config, "no profile for role " + std::string(role_name(static_cast<Role>(i))));
  if (out[0].id == out[1].id || out[0].id == out[2].id || out[1].id == out[2].id)
    throw Error(Errc::config, "profile ids must be distinct");
  return out;
}

ProfileSet load_profiles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::input, "cannot read " + path.string());
  try {
    return profiles_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::config, path.string() + ": " + e.what());
  }
}

RunReport simulate_run(const SimulationConfig& config) {
  config.task.validate();
  if (config.n == 0) throw Error(Errc::config, "simulation needs n > 0");
  if (!(config.human_accuracy >= 0.0 && config.human_accuracy <= 1.0))
    throw Error(Errc::config, "human accuracy outside [0,1]");

  const std::vector<std::string> space = gold_space(config);
  const bool open = config.task.is_open();

  // Per-run streams for every model.
  ProfileSet profiles = config.profiles;
  for (auto& p : profiles) {
    p.validate();
    p.seed = derive_seed(config.seed, p.id, p.seed);
    p.shared_seed = derive_seed(config.seed, "shared");
  }

  std::vector<ContentItem> items(config.n);
  auto gold = std::make_shared<std::map<std::string, std::string>>();
  {
    std::mt19937_64 gen(derive_seed(config.seed, "gold"));
    for (std::size_t i = 0; i < config.n; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "sim-%07zu", i);
      items[i].id = id;
      items[i].content = "synthetic item " + std::to_string(i);
      items[i].group = "sim";
      items[i].gold = space[bounded(gen, space.size())];
      (*gold)[items[i].id] = *items[i].gold;
    }
  }

  std::vector<ModelSpec> specs;
  std::array<std::shared_ptr<ModelAdapter>, 3> adapters;
  for (std::size_t r = 0; r < 3; ++r) {
    specs.push_back({profiles[r].id, AdapterKind::synthetic, static_cast<Role>(r), profile_settings(profiles[r])});
    adapters[r] = std::make_shared<SyntheticAdapter>(profiles[r], space, open, gold);
  }
  const ModelRoster roster = ModelRoster::from_list(specs);
  const unsigned workers = config.workers ? config.workers : std::max(1u, std::thread::hardware_concurrency());
  Gateway gateway(roster, adapters, static_cast<std::ptrdiff_t>(workers) * 3);

  RunOptions options;
  options.seed = config.seed;
  options.workers = workers;
  options.fsync = false;
  options.config = {{"simulation", true}, {"n", config.n}, {"human_accuracy", config.human_accuracy}};
  DatasetManifest manifest = make_manifest(items, "simulation");
  auto session = RunSession::create_in_memory(config.task, roster, manifest, options);
  session->log().set_clock([] { return std::string("1970-01-01T00:00:00.000Z"); });
  session->annotate(items, gateway);

  std::mt19937_64 human(derive_seed(config.seed, "human"));
  const auto pending = session->state().review.pending_ids();
  for (const auto& case_id : pending) {
    const ReviewCase* c = session->state().review.find(case_id);
    std::string answer = gold->at(c->item.id);
    if (unit_double(human) >= config.human_accuracy) {
      std::vector<const std::string*> wrong;
      for (const auto& l : space)
        if (l != answer) wrong.push_back(&l);
      if (!wrong.empty()) answer = *wrong[bounded(human, wrong.size())];
    }
    session->decide(case_id, answer, "simulated-reviewer", "");
  }

  RunReport report = build_report({&session->state()});
  for (const auto& p : profiles) {
    std::size_t correct = 0;
    for (const auto& item : items) correct += synthetic_draw(p, space, *item.gold, item.id, open).label == *item.gold;
    report.singles[p.id] = 100.0 * static_cast<double>(correct) / static_cast<double>(items.size());
  }
  return report;
}

ExpectedOutcome expected_outcome_oracle(const ProfileSet& profiles, const TaskSpec& task) {
  if (task.is_open()) throw Error(Errc::unsupported, "expected outcomes need a closed label space");
  return expected_outcome_oracle(profiles, task.labels->size(), task.threshold);
}

ExpectedOutcome expected_outcome_oracle(const ProfileSet& profiles, std::size_t labels, double threshold) {
  if (labels < 2) throw Error(Errc::config, "need at least two labels");
  for (const auto& p : profiles) {
    p.validate();
    if (p.correlation > 0.0) throw Error(Errc::unsupported, "expected outcomes assume independent errors");
  }
  // Label 0 is gold. Each model says gold with its accuracy, otherwise one
  // of the K-1 wrong labels uniformly.
  const std::size_t k = labels;
  auto p_label = [&](std::size_t model, std::size_t label) {
    const double a = profiles[model].accuracy;
    return label == 0 ? a : (1.0 - a) / static_cast<double>(k - 1);
  };
  auto p_sure = [&](std::size_t model, bool correct) {
    const auto& p = profiles[model];
    return correct ? p_confident(p.conf_correct_lo, 1.0, threshold)
                   : p_confident(p.conf_wrong_lo, p.conf_wrong_hi, threshold);
  };

  double review = 0.0, auto_correct = 0.0, auto_total = 0.0;
  for (std::size_t l1 = 0; l1 < k; ++l1) {
    for (std::size_t l2 = 0; l2 < k; ++l2) {
      const double p12 = p_label(0, l1) * p_label(1, l2);
      if (p12 == 0.0) continue;
      if (l1 == l2) {
        auto_total += p12;
        if (l1 == 0) auto_correct += p12;
        continue;
      }
      for (std::size_t l3 = 0; l3 < k; ++l3) {
        const double p = p12 * p_label(2, l3);
        if (p == 0.0) continue;
        if (l3 != l1 && l3 != l2) {
          review += p;
          continue;
        }
        const std::size_t holder = l3 == l1 ? 0 : 1;
        const bool correct = l3 == 0;
        const double sure = p_sure(holder, correct) * p_sure(2, correct);
        review += p * (1.0 - sure);
        auto_total += p * sure;
        if (correct) auto_correct += p * sure;
      }
    }
  }
  ExpectedOutcome out;
  out.hrr = review;
  out.auto_share = auto_total;
  out.auto_accuracy = auto_total > 0.0 ? auto_correct / auto_total : 0.0;
  return out;
}

}  // namespace mchr
