#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "isg/achievable_subsets.hpp"
#include "isg/bottleneck.hpp"
#include "isg/environments.hpp"
#include "isg/query_strategy.hpp"

namespace isg {

enum class StrategyKind { kStrategic, kQueryAll };

std::string to_string(StrategyKind k);
/// "strategic", "query-all" (or query_all); "both" expands to both.
std::vector<StrategyKind> parse_strategies(const std::string& name);

struct ExperimentConfig {
  std::vector<Domain> domains{Domain::kMaze};
  std::vector<std::pair<std::size_t, std::size_t>> grid_sizes{{4, 4}};  // (width, height)
  std::vector<double> obstacle_densities{0.1};
  std::vector<std::size_t> human_model_counts{20};
  std::size_t trials_per_config = 3;
  std::size_t query_budget = 1000;
  std::uint64_t master_seed = 0;
  double gamma = 0.95;
  double tolerance = 1e-8;
  std::vector<StrategyKind> strategies{StrategyKind::kStrategic, StrategyKind::kQueryAll};
  double slip_probability = 0.0;
  double subgoal_inclusion_prob = 0.5;
  double query_cost = -1000.0;
  double prior = 0.5;
  std::size_t max_candidates = kDefaultMaxSubgoals;
  std::size_t threads = 1;

  /// Throws std::invalid_argument describing the first bad field.
  void validate() const;
};

/// Flat JSON object; every key is optional. Lists also accept a single value,
/// grid sizes are written "WxH". Unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path);

/// "6x4" -> (6, 4).
std::pair<std::size_t, std::size_t> parse_grid_size(const std::string& text);

struct TrialKey {
  Domain domain = Domain::kMaze;
  std::size_t width = 4;
  std::size_t height = 4;
  double density = 0.1;
  std::size_t humans = 20;
  std::size_t trial = 0;
};

struct TrialResult {
  TrialKey key;
  StrategyKind strategy = StrategyKind::kStrategic;
  std::size_t queries = 0;
  std::string outcome;  // session result, or "error"
  double t_bottleneck_ms = 0.0;
  double t_subsets_ms = 0.0;
  double t_query_ms = 0.0;
  double t_total_ms = 0.0;
  std::size_t human_bottleneck_count = 0;  // |B|
  std::size_t unachievable_count = 0;      // |B^0|
  std::string error;
};

/// Everything one paired trial produced; kept for soundness checks.
struct TrialRecord {
  TrialKey key;
  std::uint64_t seed = 0;
  Ensemble ensemble;
  BottleneckHypothesis hypothesis;
  AchievableFamily family;
  std::vector<std::pair<StrategyKind, SessionOutcome>> sessions;
  std::vector<TrialResult> results;  // one per strategy, config order
};

/// Seed of one trial; depends only on the master seed and the key.
std::uint64_t trial_seed(std::uint64_t master_seed, const TrialKey& key);

/// Runs one paired trial. Failures are reported in the results, not thrown.
TrialRecord run_trial(const ExperimentConfig& config, const TrialKey& key);

std::vector<TrialKey> expand_trials(const ExperimentConfig& config);

struct SummaryRow {
  TrialKey cell;  // trial field unused
  StrategyKind strategy = StrategyKind::kStrategic;
  std::size_t samples = 0;
  std::size_t failures = 0;
  bool single_sample = false;
  double mean_queries = 0.0;
  double std_queries = 0.0;
  double mean_reduction = 0.0;  // against query-all, per trial; 0 for query-all itself
  double std_reduction = 0.0;
  double mean_bottleneck_ms = 0.0;
  double mean_subsets_ms = 0.0;
  double mean_query_ms = 0.0;
  double mean_total_ms = 0.0;
  double mean_human_bottlenecks = 0.0;
};

struct ExperimentOutput {
  std::vector<TrialResult> results;
  std::vector<SummaryRow> summary;
};

/// Trials run on config.threads workers; results keep trial order.
ExperimentOutput run_experiment(const ExperimentConfig& config, std::vector<TrialRecord>* records = nullptr);

/// Rows per (domain, size, density, humans, strategy) in first-seen order.
/// Throws std::invalid_argument on empty input.
std::vector<SummaryRow> summarize(const std::vector<TrialResult>& results);

/// Sample mean and standard deviation (n - 1); the deviation is 0 for n < 2.
std::pair<double, double> mean_std(const std::vector<double>& values);

inline constexpr const char* kCsvHeader =
    "domain,width,height,density,humans,trial,strategy,queries,outcome,t_bottleneck_ms,t_subsets_ms,t_query_ms,"
    "t_total_ms";

void write_csv(std::ostream& out, const std::vector<TrialResult>& results);
nlohmann::json results_to_json(const ExperimentOutput& output);
/// Summary as aligned text, one line per row.
void write_summary(std::ostream& out, const std::vector<SummaryRow>& summary);
/// "strategic / query-all / reduction%" per cell, e.g. "2.6±0.9 / 3.9±1.8 / 22.0±30.1".
void write_comparison(std::ostream& out, const std::vector<SummaryRow>& summary);
std::string format_mean_std(double mean, double std_dev);

}  // namespace isg
