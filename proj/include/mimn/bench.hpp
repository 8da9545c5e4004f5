#pragma once

#include "mimn/uic_store.hpp"

namespace mimn::bench {

struct ScoreRequest {
  std::string user_id;
  std::vector<std::pair<std::string, std::string>> candidates;  // (item_id, category_id)
  std::vector<double> profile;
};

enum class ServeMode { kUic, kRecompute };

inline const char* mode_name(ServeMode m) {
  return m == ServeMode::kUic ? "uic" : "recompute";
}

struct LoadProfile {
  ServeMode mode = ServeMode::kUic;
  double request_rate = 2000.0;  // target pacing, requests/sec
  double event_rate = 0.0;       // concurrent behavior events/sec (0 = none)
  double duration_s = 5.0;
  long requests = 0;  // overrides rate*duration when > 0
  int history_len = 100;
  int candidates_per_request = 1;
  std::uint64_t seed = 1;
};

struct BenchReport {
  std::string mode;
  int history_len = 0;
  long requests = 0;
  double p50_ms = 0.0, p90_ms = 0.0, p99_ms = 0.0, mean_ms = 0.0;
  double achieved_qps = 0.0;
  bool saturated = false;  // could not keep up with the requested rate
  std::size_t state_bytes_per_user = 0;
  long events_applied = 0;

  std::string csv_row() const;
  static std::string csv_header();
};

// Scores candidates from the fixed-size stored state only: one state fetch,
// then the prediction head per candidate. Never touches behavior history.
// The scorer model is passed explicitly so it may run a different parameter
// version than the store (deployment skew).
std::vector<double> handle_request(const ScoreRequest& req, const uic::StateStore& store,
                                   const ModelParams& params, const Vocabulary& vocab);

// Reference path: reprocesses the user's entire history inside the request.
std::vector<double> handle_request_recompute(const ScoreRequest& req,
                                             const std::vector<BehaviorEvent>& history,
                                             const ModelParams& params,
                                             const Vocabulary& vocab);

// Self-contained benchmark world: users with fixed-length histories plus a
// stream of extra live events.
struct BenchDataset {
  std::shared_ptr<const ModelParams> params;
  std::shared_ptr<const Vocabulary> vocab;
  std::vector<std::string> users;
  std::unordered_map<std::string, std::vector<BehaviorEvent>> histories;
  std::vector<BehaviorEvent> live_events;
};

BenchDataset make_bench_dataset(int n_users, int history_len, int n_items, int n_cats,
                                std::uint64_t seed);

// Drives a paced request stream (and optional concurrent event stream)
// against the chosen serving path and reports wall-clock latency
// percentiles. The request schedule is deterministic under profile.seed;
// timings naturally are not.
BenchReport run_bench(const LoadProfile& profile, const BenchDataset& dataset);

struct StorageRow {
  int history_len = 0;
  std::size_t state_bytes = 0;  // fixed-size interest state
  std::size_t raw_bytes = 0;    // stored behavior history
};

// Per-user storage of interest state vs raw history for each length, plus
// the crossover length where the fixed state becomes smaller.
std::vector<StorageRow> storage_report(const HyperParams& hyper,
                                       const BenchDataset& dataset,
                                       const std::vector<int>& history_lengths);
int storage_crossover_length(const HyperParams& hyper, std::size_t bytes_per_event);

}  // namespace mimn::bench
