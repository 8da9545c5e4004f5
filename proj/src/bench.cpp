#include "mimn/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

namespace mimn::bench {

using Clock = std::chrono::steady_clock;

std::string BenchReport::csv_header() {
  return "mode,history_len,p50,p90,p99,qps,bytes_per_user";
}

std::string BenchReport::csv_row() const {
  std::ostringstream os;
  os << mode << ',' << history_len << ',' << p50_ms << ',' << p90_ms << ',' << p99_ms << ','
     << achieved_qps << ',' << state_bytes_per_user;
  return os.str();
}

std::vector<double> handle_request(const ScoreRequest& req, const uic::StateStore& store,
                                   const ModelParams& params, const Vocabulary& vocab) {
  MIMN_CHECK(!req.candidates.empty(), "score request has no candidates");
  UserInterestState state = store.get_state(req.user_id);
  std::vector<double> scores;
  scores.reserve(req.candidates.size());
  for (const auto& [item, cat] : req.candidates)
    scores.push_back(predict(params, state, vocab.item_index(item), vocab.category_index(cat),
                             req.profile));
  return scores;
}

std::vector<double> handle_request_recompute(const ScoreRequest& req,
                                             const std::vector<BehaviorEvent>& history,
                                             const ModelParams& params,
                                             const Vocabulary& vocab) {
  MIMN_CHECK(!req.candidates.empty(), "score request has no candidates");
  UserInterestState state;
  if (history.empty()) {
    state = cold_start_state(params);
  } else {
    std::vector<std::pair<int, int>> seq;
    seq.reserve(history.size());
    for (const BehaviorEvent& e : history)
      seq.emplace_back(vocab.item_index(e.item_id), vocab.category_index(e.category_id));
    state = process_sequence(params, seq).state;
  }
  std::vector<double> scores;
  scores.reserve(req.candidates.size());
  for (const auto& [item, cat] : req.candidates)
    scores.push_back(predict(params, state, vocab.item_index(item), vocab.category_index(cat),
                             req.profile));
  return scores;
}

BenchDataset make_bench_dataset(int n_users, int history_len, int n_items, int n_cats,
                                std::uint64_t seed) {
  MIMN_CHECK(n_users > 0 && history_len >= 0, "bad bench dataset dimensions");
  Rng rng(seed);
  auto vocab = std::make_shared<Vocabulary>();
  std::vector<int> item_cat(static_cast<size_t>(n_items));
  for (int c = 0; c < n_cats; ++c) vocab->add_category("c" + std::to_string(c));
  for (int i = 0; i < n_items; ++i) {
    int c = static_cast<int>(rng() % static_cast<std::uint64_t>(n_cats));
    item_cat[static_cast<size_t>(i)] = c;
    vocab->add_item("i" + std::to_string(i), c + 1);
  }

  HyperParams hyper;  // serving defaults
  Rng prng(seed ^ 0xabcdef);
  auto params = std::make_shared<ModelParams>(
      ModelParams::init(hyper, vocab->item_count(), vocab->category_count(), prng));

  BenchDataset ds;
  ds.params = params;
  ds.vocab = vocab;
  auto draw_event = [&](const std::string& user, std::int64_t ts) {
    int i = static_cast<int>(rng() % static_cast<std::uint64_t>(n_items));
    return BehaviorEvent{user, "i" + std::to_string(i),
                         "c" + std::to_string(item_cat[static_cast<size_t>(i)]), ts};
  };
  for (int u = 0; u < n_users; ++u) {
    std::string user = "u" + std::to_string(u);
    ds.users.push_back(user);
    auto& hist = ds.histories[user];
    hist.reserve(static_cast<size_t>(history_len));
    for (int t = 0; t < history_len; ++t) hist.push_back(draw_event(user, t));
  }
  // A modest stream of extra events to race against requests.
  for (int k = 0; k < n_users * 4; ++k) {
    std::string user = ds.users[rng() % ds.users.size()];
    ds.live_events.push_back(draw_event(user, 1000000 + k));
  }
  return ds;
}

BenchReport run_bench(const LoadProfile& profile, const BenchDataset& dataset) {
  MIMN_CHECK(profile.event_rate >= 0, "event_rate must be nonnegative");
  const bool paced = profile.request_rate > 0;
  const HyperParams& hyper = dataset.params->hyper;
  BenchReport rep;
  rep.mode = mode_name(profile.mode);
  rep.history_len = profile.history_len;
  rep.state_bytes_per_user = UserInterestState::byte_size(hyper);

  long total = profile.requests > 0
                   ? profile.requests
                   : (paced ? static_cast<long>(profile.request_rate * profile.duration_s) : 0);
  if (total <= 0) return rep;  // zero-duration profile: empty report
  MIMN_CHECK(!dataset.users.empty(), "bench dataset has no users");

  uic::VersionedModel model{dataset.params, dataset.vocab, 1};
  uic::StateStore store(model, "", /*retention=*/7);
  if (profile.mode == ServeMode::kUic) {
    std::vector<BehaviorEvent> all;
    for (const std::string& u : dataset.users) {
      const auto& h = dataset.histories.at(u);
      all.insert(all.end(), h.begin(), h.end());
    }
    store.warm_up(all);
  }

  // Deterministic request schedule.
  Rng rng(profile.seed);
  struct Slot {
    const std::string* user;
    ScoreRequest req;
  };
  std::vector<ScoreRequest> schedule;
  schedule.reserve(static_cast<size_t>(total));
  for (long i = 0; i < total; ++i) {
    ScoreRequest rq;
    rq.user_id = dataset.users[rng() % dataset.users.size()];
    for (int c = 0; c < profile.candidates_per_request; ++c) {
      int idx = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(
                                         dataset.vocab->item_count() - 1));
      rq.candidates.emplace_back(dataset.vocab->item_id(idx),
                                 dataset.vocab->category_id(dataset.vocab->item_category(idx)));
    }
    schedule.push_back(std::move(rq));
  }

  std::atomic<bool> stop{false};
  std::atomic<long> events_applied{0};
  std::thread event_thread;
  if (profile.event_rate > 0 && !dataset.live_events.empty()) {
    event_thread = std::thread([&] {
      auto start = Clock::now();
      size_t i = 0;
      while (!stop.load(std::memory_order_relaxed)) {
        auto due = start + std::chrono::duration_cast<Clock::duration>(
                               std::chrono::duration<double>(
                                   static_cast<double>(i) / profile.event_rate));
        std::this_thread::sleep_until(due);
        if (stop.load(std::memory_order_relaxed)) break;
        store.apply_event(dataset.live_events[i % dataset.live_events.size()]);
        events_applied.fetch_add(1, std::memory_order_relaxed);
        ++i;
      }
    });
  }

  std::vector<double> lat_ms;
  lat_ms.reserve(static_cast<size_t>(total));
  auto start = Clock::now();
  for (long i = 0; i < total; ++i) {
    if (paced) {
      auto due = start + std::chrono::duration_cast<Clock::duration>(
                             std::chrono::duration<double>(static_cast<double>(i) /
                                                           profile.request_rate));
      if (Clock::now() < due) std::this_thread::sleep_until(due);
    }
    auto t0 = Clock::now();
    if (profile.mode == ServeMode::kUic) {
      handle_request(schedule[static_cast<size_t>(i)], store, *dataset.params, *dataset.vocab);
    } else {
      const auto& hist = dataset.histories.at(schedule[static_cast<size_t>(i)].user_id);
      handle_request_recompute(schedule[static_cast<size_t>(i)], hist, *dataset.params,
                               *dataset.vocab);
    }
    auto t1 = Clock::now();
    lat_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  auto end = Clock::now();
  stop.store(true);
  if (event_thread.joinable()) event_thread.join();

  double wall_s = std::chrono::duration<double>(end - start).count();
  rep.requests = total;
  rep.events_applied = events_applied.load();
  rep.achieved_qps = wall_s > 0 ? static_cast<double>(total) / wall_s : 0.0;
  // Saturation: the paced schedule fell measurably behind the target rate.
  rep.saturated = paced && rep.achieved_qps < 0.9 * profile.request_rate;

  std::sort(lat_ms.begin(), lat_ms.end());
  auto pct = [&](double q) {
    size_t idx = static_cast<size_t>(std::ceil(q * static_cast<double>(lat_ms.size())));
    idx = std::min(lat_ms.size() - 1, std::max<size_t>(1, idx) - 1);
    return lat_ms[idx];
  };
  rep.p50_ms = pct(0.50);
  rep.p90_ms = pct(0.90);
  rep.p99_ms = pct(0.99);
  double sum = 0;
  for (double v : lat_ms) sum += v;
  rep.mean_ms = sum / static_cast<double>(lat_ms.size());
  return rep;
}

namespace {

std::size_t event_bytes(const BehaviorEvent& e) {
  // What a history store must hold per event: item id, category id, and a
  // 64-bit timestamp.
  return e.item_id.size() + e.category_id.size() + sizeof(std::int64_t);
}

}  // namespace

std::vector<StorageRow> storage_report(const HyperParams& hyper, const BenchDataset& dataset,
                                       const std::vector<int>& history_lengths) {
  // Average per-event payload measured from the dataset itself.
  std::size_t total = 0;
  std::size_t count = 0;
  for (const auto& [user, hist] : dataset.histories)
    for (const BehaviorEvent& e : hist) {
      total += event_bytes(e);
      ++count;
    }
  std::size_t per_event = count ? total / count : 0;

  std::vector<StorageRow> rows;
  for (int len : history_lengths) {
    StorageRow r;
    r.history_len = len;
    r.state_bytes = UserInterestState::byte_size(hyper);
    r.raw_bytes = per_event * static_cast<std::size_t>(len);
    rows.push_back(r);
  }
  return rows;
}

int storage_crossover_length(const HyperParams& hyper, std::size_t bytes_per_event) {
  MIMN_CHECK(bytes_per_event > 0, "bytes_per_event must be positive");
  std::size_t state = UserInterestState::byte_size(hyper);
  return static_cast<int>((state + bytes_per_event - 1) / bytes_per_event);
}

}  // namespace mimn::bench
