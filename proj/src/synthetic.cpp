#include "mimn/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <unordered_set>

namespace mimn::synth {

namespace {

// Inverse-CDF sampler over 1/k^s weights.
class ZipfSampler {
 public:
  ZipfSampler(int n, double exponent) : cdf_(static_cast<size_t>(n)) {
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
      acc += 1.0 / std::pow(static_cast<double>(k + 1), exponent);
      cdf_[static_cast<size_t>(k)] = acc;
    }
    for (double& v : cdf_) v /= acc;
  }
  int draw(Rng& rng) const {
    double u = uniform(rng, 0.0, 1.0);
    auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<int>(it - cdf_.begin());
  }

 private:
  std::vector<double> cdf_;
};

struct DriftWorld {
  DriftConfig cfg;
  int n_cluster_items;
  ZipfSampler item_zipf;
  ZipfSampler hot_zipf;

  explicit DriftWorld(const DriftConfig& c)
      : cfg(c),
        n_cluster_items(c.items_per_cat * c.cats_per_cluster * c.n_clusters),
        item_zipf(c.items_per_cat, c.zipf_exponent),
        hot_zipf(std::max(1, c.n_hot_items), 1.2) {}

  std::string cat_name(int cat) const { return "c" + std::to_string(cat); }
  std::string item_name(int item) const { return "i" + std::to_string(item); }

  int cat_of_item(int item) const {
    if (item >= n_cluster_items) {  // hot items spread over categories round-robin
      return (item - n_cluster_items) % (cfg.n_clusters * cfg.cats_per_cluster);
    }
    return item / cfg.items_per_cat;
  }

  // Draw an item from the given cluster (uniform category, Zipf item rank).
  int cluster_item(int cluster, Rng& rng) const {
    int cat = cluster * cfg.cats_per_cluster +
              static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.cats_per_cluster));
    return cat * cfg.items_per_cat + item_zipf.draw(rng);
  }

  int hot_item(Rng& rng) const { return n_cluster_items + hot_zipf.draw(rng); }
};

}  // namespace

std::vector<BehaviorEvent> drift_events(const DriftConfig& cfg) {
  MIMN_CHECK(cfg.n_users > 0 && cfg.n_clusters > 1 && cfg.cats_per_cluster > 0 &&
                 cfg.items_per_cat > 1 && cfg.min_events >= 2 &&
                 cfg.max_events >= cfg.min_events,
             "bad drift config");
  DriftWorld world(cfg);
  Rng rng(cfg.seed);
  std::vector<BehaviorEvent> events;

  for (int u = 0; u < cfg.n_users; ++u) {
    std::string user = "u" + std::to_string(u);
    int total = cfg.min_events +
                static_cast<int>(rng() % static_cast<std::uint64_t>(
                                     cfg.max_events - cfg.min_events + 1));
    int cluster = static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.n_clusters));
    std::geometric_distribution<int> dwell(1.0 / cfg.dwell_mean);
    int remaining = 1 + dwell(rng);
    std::unordered_set<int> used;

    auto emit = [&](int item, int step) {
      events.push_back({user, world.item_name(item), world.cat_name(world.cat_of_item(item)),
                        1000000 + step});
    };

    for (int t = 0; t + 1 < total; ++t) {
      if (remaining == 0) {
        if (uniform(rng, 0.0, 1.0) < cfg.ring_step_prob)
          cluster = (cluster + 1) % cfg.n_clusters;
        else
          cluster = static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.n_clusters));
        remaining = 1 + dwell(rng);
      }
      --remaining;
      int item;
      int tries = 0;
      do {
        item = (uniform(rng, 0.0, 1.0) < cfg.hot_prob && cfg.n_hot_items > 0)
                   ? world.hot_item(rng)
                   : world.cluster_item(cluster, rng);
      } while (used.count(item) && ++tries < 20);
      used.insert(item);
      emit(item, t);
    }

    // Target event: final cluster, or its ring successor, always unseen.
    int tgt_cluster = (uniform(rng, 0.0, 1.0) < cfg.target_successor_prob)
                          ? (cluster + 1) % cfg.n_clusters
                          : cluster;
    int target = world.cluster_item(tgt_cluster, rng);
    while (used.count(target)) target = world.cluster_item(tgt_cluster, rng);
    emit(target, total - 1);
  }
  return events;
}

void write_amazon_files(const DriftConfig& cfg, const std::string& reviews_path,
                        const std::string& meta_path) {
  std::vector<BehaviorEvent> events = drift_events(cfg);

  std::ofstream reviews(reviews_path, std::ios::binary);
  MIMN_CHECK(reviews.good(), "cannot write " + reviews_path);
  for (const BehaviorEvent& e : events)
    reviews << "{\"reviewerID\": \"" << e.user_id << "\", \"asin\": \"" << e.item_id
            << "\", \"overall\": 5.0, \"unixReviewTime\": " << e.timestamp << "}\n";
  MIMN_CHECK(reviews.good(), "write failed: " + reviews_path);

  // One metadata record per distinct asin, first-appearance order.
  std::ofstream meta(meta_path, std::ios::binary);
  MIMN_CHECK(meta.good(), "cannot write " + meta_path);
  std::unordered_set<std::string> seen;
  for (const BehaviorEvent& e : events) {
    if (!seen.insert(e.item_id).second) continue;
    meta << "{\"asin\": \"" << e.item_id << "\", \"categories\": [[\"books\", \""
         << e.category_id << "\"]]}\n";
  }
  MIMN_CHECK(meta.good(), "write failed: " + meta_path);
}

void write_taobao_file(const std::vector<BehaviorEvent>& events, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  MIMN_CHECK(out.good(), "cannot write " + path);
  for (const BehaviorEvent& e : events)
    out << e.user_id << ',' << e.item_id << ',' << e.category_id << ",pv," << e.timestamp
        << "\n";
  MIMN_CHECK(out.good(), "write failed: " + path);
}

std::vector<BehaviorEvent> skewed_events(const SkewConfig& cfg) {
  MIMN_CHECK(cfg.n_users > 0 && cfg.events_per_user >= 2 && cfg.n_items > 1 && cfg.n_cats > 0,
             "bad skew config");
  ZipfSampler zipf(cfg.n_items, cfg.exponent);
  Rng rng(cfg.seed);
  std::vector<BehaviorEvent> events;
  events.reserve(static_cast<size_t>(cfg.n_users) * cfg.events_per_user);
  for (int u = 0; u < cfg.n_users; ++u) {
    std::string user = "u" + std::to_string(u);
    for (int t = 0; t < cfg.events_per_user; ++t) {
      int item = zipf.draw(rng);
      int cat = item % cfg.n_cats;
      events.push_back({user, "i" + std::to_string(item), "c" + std::to_string(cat),
                        1000000 + t});
    }
  }
  return events;
}

Dataset skewed_dataset(const SkewConfig& cfg) {
  std::vector<BehaviorEvent> events = skewed_events(cfg);
  Dataset ds;
  std::vector<std::string> user_order;
  std::unordered_map<std::string, std::vector<const BehaviorEvent*>> by_user;
  for (const BehaviorEvent& e : events) {
    auto [it, fresh] = by_user.try_emplace(e.user_id);
    if (fresh) user_order.push_back(e.user_id);
    it->second.push_back(&e);
  }
  for (const std::string& user : user_order) {
    const auto& evs = by_user[user];
    Sample s;
    s.user_id = user;
    for (size_t k = 0; k + 1 < evs.size(); ++k) {
      int c = ds.vocab.add_category(evs[k]->category_id);
      int i = ds.vocab.add_item(evs[k]->item_id, c);
      s.history.emplace_back(i, c);
    }
    int tc = ds.vocab.add_category(evs.back()->category_id);
    s.target_item = ds.vocab.add_item(evs.back()->item_id, tc);
    s.target_cat = tc;
    s.label = 1;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

std::vector<BehaviorEvent> uniform_events(int n_users, int events_per_user, int n_items,
                                          int n_cats, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<BehaviorEvent> events;
  events.reserve(static_cast<size_t>(n_users) * events_per_user);
  for (int u = 0; u < n_users; ++u) {
    std::string user = "u" + std::to_string(u);
    for (int t = 0; t < events_per_user; ++t) {
      int item = static_cast<int>(rng() % static_cast<std::uint64_t>(n_items));
      events.push_back({user, "i" + std::to_string(item),
                        "c" + std::to_string(item % n_cats), 1000000 + t});
    }
  }
  return events;
}

std::pair<std::vector<Sample>, Vocabulary> marker_task(int n_samples, int n_items, int n_cats,
                                                       int hist_len, std::uint64_t seed) {
  MIMN_CHECK(n_cats >= 2 && n_items >= n_cats, "marker task needs at least two categories");
  Vocabulary vocab;
  for (int c = 0; c < n_cats; ++c) vocab.add_category("c" + std::to_string(c));
  for (int i = 0; i < n_items; ++i)
    vocab.add_item("i" + std::to_string(i), 1 + (i % n_cats));

  Rng rng(seed);
  std::vector<Sample> samples;
  const int marker_cat = 1;
  for (int k = 0; k < n_samples; ++k) {
    Sample s;
    s.user_id = "u" + std::to_string(k);
    bool positive = (k % 2 == 0);
    bool planted = false;
    for (int t = 0; t < hist_len; ++t) {
      int item;
      do {
        item = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(n_items));
      } while (!positive && vocab.item_category(item) == marker_cat);
      if (vocab.item_category(item) == marker_cat) planted = true;
      s.history.emplace_back(item, vocab.item_category(item));
    }
    if (positive && !planted) {
      // Force the marker into a random slot.
      int item;
      do {
        item = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(n_items));
      } while (vocab.item_category(item) != marker_cat);
      size_t pos = rng() % s.history.size();
      s.history[pos] = {item, marker_cat};
    }
    int target = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(n_items));
    s.target_item = target;
    s.target_cat = vocab.item_category(target);
    s.label = positive ? 1 : 0;
    samples.push_back(std::move(s));
  }
  return {std::move(samples), std::move(vocab)};
}

}  // namespace mimn::synth
