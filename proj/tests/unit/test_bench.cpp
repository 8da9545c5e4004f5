#include <doctest.h>

#include "mimn/bench.hpp"

using namespace mimn;
using namespace mimn::bench;

namespace {

BenchDataset tiny_world(int history_len, std::uint64_t seed = 44) {
  return make_bench_dataset(/*n_users=*/20, history_len, /*n_items=*/50, /*n_cats=*/8, seed);
}

}  // namespace

TEST_CASE("uic scoring equals offline prediction on the same state") {
  BenchDataset ds = tiny_world(30);
  uic::StateStore store({ds.params, ds.vocab, 1}, "");
  std::vector<BehaviorEvent> all;
  for (const auto& [user, hist] : ds.histories)
    all.insert(all.end(), hist.begin(), hist.end());
  store.warm_up(all);

  ScoreRequest req;
  req.user_id = ds.users[3];
  req.candidates = {{"i5", "c1"}, {"i9", "c3"}};
  auto scores = handle_request(req, store, *ds.params, *ds.vocab);
  REQUIRE(scores.size() == 2);
  UserInterestState st = store.get_state(req.user_id);
  for (size_t c = 0; c < req.candidates.size(); ++c) {
    double direct = predict(*ds.params, st, ds.vocab->item_index(req.candidates[c].first),
                            ds.vocab->category_index(req.candidates[c].second));
    CHECK(scores[c] == direct);
  }
  for (double s : scores) {
    CHECK(s > 0.0);
    CHECK(s < 1.0);
  }
}

TEST_CASE("unknown users score from the cold-start state") {
  BenchDataset ds = tiny_world(10);
  uic::StateStore store({ds.params, ds.vocab, 1}, "");
  ScoreRequest req;
  req.user_id = "total-stranger";
  req.candidates = {{"i1", "c1"}};
  auto scores = handle_request(req, store, *ds.params, *ds.vocab);
  double direct = predict(*ds.params, cold_start_state(*ds.params), ds.vocab->item_index("i1"),
                          ds.vocab->category_index("c1"));
  CHECK(scores[0] == direct);
}

TEST_CASE("recompute path equals the uic path when the store is caught up") {
  BenchDataset ds = tiny_world(40);
  uic::StateStore store({ds.params, ds.vocab, 1}, "");
  std::vector<BehaviorEvent> all;
  for (const auto& [user, hist] : ds.histories)
    all.insert(all.end(), hist.begin(), hist.end());
  store.warm_up(all);

  for (const std::string& user : ds.users) {
    ScoreRequest req;
    req.user_id = user;
    req.candidates = {{"i7", "c2"}};
    auto via_store = handle_request(req, store, *ds.params, *ds.vocab);
    auto via_replay = handle_request_recompute(req, ds.histories.at(user), *ds.params, *ds.vocab);
    CHECK(via_store[0] == via_replay[0]);  // identical, not just close
  }
}

TEST_CASE("recompute on an empty history equals cold start") {
  BenchDataset ds = tiny_world(5);
  ScoreRequest req;
  req.user_id = "u0";
  req.candidates = {{"i2", "c1"}};
  auto scores = handle_request_recompute(req, {}, *ds.params, *ds.vocab);
  double direct = predict(*ds.params, cold_start_state(*ds.params), ds.vocab->item_index("i2"),
                          ds.vocab->category_index("c1"));
  CHECK(scores[0] == direct);
}

TEST_CASE("zero-duration profiles produce an empty report") {
  BenchDataset ds = tiny_world(5);
  LoadProfile p;
  p.duration_s = 0.0;
  BenchReport rep = run_bench(p, ds);
  CHECK(rep.requests == 0);
  CHECK(rep.p99_ms == 0.0);
  CHECK(rep.achieved_qps == 0.0);
}

TEST_CASE("a short bench run reports ordered percentiles and state size") {
  BenchDataset ds = tiny_world(20);
  LoadProfile p;
  p.mode = ServeMode::kUic;
  p.history_len = 20;
  p.requests = 500;
  p.request_rate = 1e9;  // as fast as possible
  p.event_rate = 500;
  BenchReport rep = run_bench(p, ds);
  CHECK(rep.requests == 500);
  CHECK(rep.p50_ms <= rep.p90_ms);
  CHECK(rep.p90_ms <= rep.p99_ms);
  CHECK(rep.achieved_qps > 0.0);
  CHECK(rep.state_bytes_per_user == UserInterestState::byte_size(ds.params->hyper));
  CHECK(rep.events_applied > 0);
  CHECK(rep.csv_row().find("uic,20,") == 0);
}

TEST_CASE("recompute cost grows with history length") {
  LoadProfile p;
  p.mode = ServeMode::kRecompute;
  p.requests = 60;
  p.request_rate = 1e9;
  BenchDataset short_ds = tiny_world(10, 91);
  BenchDataset long_ds = tiny_world(200, 92);
  BenchReport a = run_bench(p, short_ds);
  BenchReport b = run_bench(p, long_ds);
  CHECK(b.mean_ms > a.mean_ms);
}

TEST_CASE("storage report: constant state bytes, linear raw bytes, crossover") {
  BenchDataset ds = tiny_world(50);
  auto rows = storage_report(ds.params->hyper, ds, {10, 100, 10000});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].state_bytes == rows[1].state_bytes);
  CHECK(rows[1].state_bytes == rows[2].state_bytes);
  CHECK(rows[1].raw_bytes == 10 * rows[0].raw_bytes);
  CHECK(rows[2].raw_bytes == 1000 * rows[0].raw_bytes);

  std::size_t per_event = rows[0].raw_bytes / 10;
  int crossover = storage_crossover_length(ds.params->hyper, per_event);
  // State is smaller exactly from the crossover length onwards.
  CHECK(per_event * static_cast<std::size_t>(crossover) >= rows[0].state_bytes);
  CHECK(per_event * static_cast<std::size_t>(crossover - 1) < rows[0].state_bytes);
}
