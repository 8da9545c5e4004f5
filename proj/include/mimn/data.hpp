#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mimn/model_math.hpp"

namespace mimn {

// One user interaction; the unit of incremental state update.
struct BehaviorEvent {
  std::string user_id;
  std::string item_id;
  std::string category_id;
  std::int64_t timestamp = 0;
};

// Labeled training instance over vocabulary indices.
struct Sample {
  std::string user_id;
  std::vector<std::pair<int, int>> history;  // (item, category) indices, time order
  int target_item = 0;
  int target_cat = 0;
  int label = 1;

  SampleView view() const {
    return SampleView{history, target_item, target_cat, label, {}};
  }
};

// Dense id maps. Index 0 of both tables is the reserved out-of-vocabulary
// id; real ids start at 1 in first-appearance order, which keeps indices
// stable across runs for identical input order.
class Vocabulary {
 public:
  Vocabulary();

  int add_item(const std::string& id, int cat_index);
  int add_category(const std::string& id);

  int item_index(const std::string& id) const;      // 0 when unknown
  int category_index(const std::string& id) const;  // 0 when unknown
  int item_category(int item_index) const { return item_cat_[static_cast<size_t>(item_index)]; }

  const std::string& item_id(int index) const { return items_[static_cast<size_t>(index)]; }
  const std::string& category_id(int index) const { return cats_[static_cast<size_t>(index)]; }

  int item_count() const { return static_cast<int>(items_.size()); }      // OOV included
  int category_count() const { return static_cast<int>(cats_.size()); }

  bool operator==(const Vocabulary& o) const {
    return items_ == o.items_ && cats_ == o.cats_ && item_cat_ == o.item_cat_;
  }

 private:
  std::vector<std::string> items_, cats_;
  std::vector<int> item_cat_;  // item index -> category index
  std::unordered_map<std::string, int> item_idx_, cat_idx_;
};

enum class LogFormat { kAmazon, kTaobao };

struct IngestOptions {
  LogFormat format = LogFormat::kTaobao;
  int min_len = 20;   // users with fewer events are dropped
  int max_len = 100;  // history keeps the most recent max_len pre-target events
  std::string meta_path;  // amazon: item metadata for the category join
};

struct IngestStats {
  long rows_read = 0;
  long rows_skipped = 0;    // malformed / filtered rows
  long users_seen = 0;
  long users_dropped = 0;   // below min_len
};

struct Dataset {
  std::vector<Sample> samples;
  Vocabulary vocab;
  IngestStats stats;
};

// Parse a behavior log into leave-last-out positive samples plus the
// vocabulary. Events are ordered per user by timestamp (ties keep file
// order); the most recent event becomes the positive target.
Dataset ingest(const std::string& path, const IngestOptions& opts);

// Raw event readers, shared with the event-driven store. Malformed rows are
// skipped and counted.
std::vector<BehaviorEvent> read_events(const std::string& path, LogFormat format,
                                       const std::string& meta_path, IngestStats* stats);

// For each positive sample append one negative with the same history and a
// target item drawn uniformly from the real-item vocabulary, excluding the
// user's history and the positive target. Deterministic under seed.
std::vector<Sample> negative_sample(const std::vector<Sample>& positives,
                                    const Vocabulary& vocab, std::uint64_t seed);

struct SplitPolicy {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

// Hash-based user split: every sample of one user lands on the same side.
std::pair<std::vector<Sample>, std::vector<Sample>> split(const std::vector<Sample>& samples,
                                                          const SplitPolicy& policy);

// Line-delimited sample file with embedded vocabulary header; byte-exact
// round-trip.
void save_samples(const std::string& path, const std::vector<Sample>& samples,
                  const Vocabulary& vocab);
std::pair<std::vector<Sample>, Vocabulary> load_samples(const std::string& path);

}  // namespace mimn
