#pragma once

#include "mimn/data.hpp"

namespace mimn::synth {

// Interest-drift behavior generator. Users move through a ring of interest
// clusters (groups of categories) with geometric dwell times; most events
// come from the current cluster, a share is globally popular noise. The
// final event is drawn from the last cluster (or its ring successor), so the
// signal that predicts the target is concentrated in the recent part of the
// sequence and in the order of cluster visits.
struct DriftConfig {
  int n_users = 5000;
  int n_clusters = 12;
  int cats_per_cluster = 5;
  int items_per_cat = 80;
  int n_hot_items = 60;       // popular noise items on top of cluster items
  double hot_prob = 0.15;     // chance an event is popular noise
  double zipf_exponent = 1.05;  // within-category item popularity
  int min_events = 21;        // total events per user (history + target)
  int max_events = 110;
  double dwell_mean = 12.0;   // mean events per cluster visit
  double ring_step_prob = 0.85;   // cluster transition: successor vs jump
  double target_successor_prob = 0.25;  // target from successor vs final cluster
  std::uint64_t seed = 7;
};

// Flat event stream (timestamps increase per user; users interleaved).
std::vector<BehaviorEvent> drift_events(const DriftConfig& cfg);

// Amazon-format files: reviews as JSON lines (reviewerID/asin/unixReviewTime)
// plus item metadata (asin -> categories) for the category join.
void write_amazon_files(const DriftConfig& cfg, const std::string& reviews_path,
                        const std::string& meta_path);

// Taobao-format CSV: user,item,category,behavior_type,timestamp.
void write_taobao_file(const std::vector<BehaviorEvent>& events, const std::string& path);

// Heavily skewed stream: items drawn Zipf(exponent) over the whole catalog,
// so a handful of hot items dominates every user's sequence.
struct SkewConfig {
  int n_users = 400;
  int events_per_user = 40;
  int n_items = 2000;
  int n_cats = 40;
  double exponent = 1.1;
  std::uint64_t seed = 11;
};
std::vector<BehaviorEvent> skewed_events(const SkewConfig& cfg);
// Leave-last-out dataset over the skewed stream (positives only).
Dataset skewed_dataset(const SkewConfig& cfg);

// Uniform random stream for equivalence/stress tests.
std::vector<BehaviorEvent> uniform_events(int n_users, int events_per_user, int n_items,
                                          int n_cats, std::uint64_t seed);

// Linearly separable toy task: label = history contains the marker category.
std::pair<std::vector<Sample>, Vocabulary> marker_task(int n_samples, int n_items, int n_cats,
                                                       int hist_len, std::uint64_t seed);

}  // namespace mimn::synth
