#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "mimn/synthetic.hpp"
#include "mimn/uic_store.hpp"

using namespace mimn;
using uic::StateStore;
using uic::VersionedModel;

namespace {

struct World {
  std::shared_ptr<Vocabulary> vocab;
  std::shared_ptr<ModelParams> params;
  std::string dir;

  VersionedModel model(std::int64_t version = 1) const { return {params, vocab, version}; }
};

World make_world(std::uint64_t seed = 1, int n_items = 40, int n_cats = 8) {
  World w;
  w.vocab = std::make_shared<Vocabulary>();
  for (int c = 0; c < n_cats; ++c) w.vocab->add_category("c" + std::to_string(c));
  for (int i = 0; i < n_items; ++i) w.vocab->add_item("i" + std::to_string(i), 1 + (i % n_cats));
  HyperParams h;
  h.slots = 4;
  h.width = 8;
  h.miu_width = 6;
  h.mlp_widths = {10, 6, 2};
  Rng rng(seed);
  w.params = std::make_shared<ModelParams>(
      ModelParams::init(h, w.vocab->item_count(), w.vocab->category_count(), rng));
  auto dir = std::filesystem::temp_directory_path() /
             ("mimn_uic_" + std::to_string(seed) + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  w.dir = dir.string();
  return w;
}

std::vector<std::pair<int, int>> to_indices(const World& w,
                                            const std::vector<BehaviorEvent>& events) {
  std::vector<std::pair<int, int>> out;
  for (const BehaviorEvent& e : events)
    out.emplace_back(w.vocab->item_index(e.item_id), w.vocab->category_index(e.category_id));
  return out;
}

}  // namespace

TEST_CASE("one event on a new user equals a length-1 offline sequence") {
  World w = make_world(2);
  StateStore store(w.model(), w.dir);
  BehaviorEvent e{"alice", "i3", "c4", 100};
  store.apply_event(e);
  UserInterestState got = store.get_state("alice");
  SequenceResult expect = process_sequence(*w.params, to_indices(w, {e}), 1);
  expect.state.version = 1;
  CHECK(got == expect.state);
}

TEST_CASE("unknown users read the canonical cold-start state") {
  World w = make_world(3);
  StateStore store(w.model(), w.dir);
  UserInterestState st = store.get_state("nobody");
  CHECK(st == cold_start_state(*w.params, 1));
  CHECK(store.user_count() == 0);  // reads never materialize state
}

TEST_CASE("unknown ids fall back to the out-of-vocabulary embedding") {
  World w = make_world(4);
  StateStore store(w.model(), w.dir);
  store.apply_event({"bob", "never-seen-item", "nor-this-category", 5});
  SequenceResult expect = process_sequence(*w.params, {{{0, 0}}}, 1);
  expect.state.version = 1;
  CHECK(store.get_state("bob") == expect.state);
}

TEST_CASE("event-by-event replay equals offline sequence processing exactly") {
  World w = make_world(5);
  StateStore store(w.model(), w.dir);
  auto events = synth::uniform_events(20, 60, 39, 7, 77);
  for (const BehaviorEvent& e : events) store.apply_event(e);

  std::unordered_map<std::string, std::vector<BehaviorEvent>> by_user;
  for (const BehaviorEvent& e : events) by_user[e.user_id].push_back(e);
  for (const auto& [user, evs] : by_user) {
    SequenceResult expect = process_sequence(*w.params, to_indices(w, evs), 1);
    expect.state.version = 1;
    CHECK(store.get_state(user) == expect.state);  // bit-identical
  }
}

TEST_CASE("warm_up equals replay and is idempotent") {
  World w = make_world(6);
  auto events = synth::uniform_events(15, 25, 39, 7, 78);

  StateStore warm(w.model(), w.dir + "/warm");
  CHECK(warm.warm_up({}) == 0);
  CHECK(warm.warm_up(events) == 15);
  CHECK(warm.warm_up(events) == 15);  // overwrites identically

  StateStore replayed(w.model(), w.dir + "/replay");
  for (const BehaviorEvent& e : events) replayed.apply_event(e);
  for (int u = 0; u < 15; ++u) {
    std::string user = "u" + std::to_string(u);
    CHECK(warm.get_state(user) == replayed.get_state(user));
  }

  // warm_up then one live event == full replay including that event
  BehaviorEvent extra{"u3", "i9", "c2", 999999};
  warm.apply_event(extra);
  replayed.apply_event(extra);
  CHECK(warm.get_state("u3") == replayed.get_state("u3"));
}

TEST_CASE("snapshot and rollback round-trip bit-exactly") {
  World w = make_world(7);
  StateStore store(w.model(), w.dir);
  auto events = synth::uniform_events(12, 30, 39, 7, 79);
  store.warm_up(events);

  auto snap = store.snapshot();
  CHECK(snap.user_count == 12);
  std::vector<UserInterestState> before;
  for (int u = 0; u < 12; ++u) before.push_back(store.get_state("u" + std::to_string(u)));

  // rollback to the snapshot just taken is a no-op
  store.rollback(snap.id);
  for (int u = 0; u < 12; ++u)
    CHECK(store.get_state("u" + std::to_string(u)) == before[static_cast<size_t>(u)]);

  // apply 10 events, roll back, re-apply: deterministic
  std::vector<BehaviorEvent> extra = synth::uniform_events(3, 4, 39, 7, 80);
  extra.resize(10);
  for (const auto& e : extra) store.apply_event(e);
  std::vector<UserInterestState> after;
  for (int u = 0; u < 3; ++u) after.push_back(store.get_state("u" + std::to_string(u)));
  store.rollback(snap.id);
  for (const auto& e : extra) store.apply_event(e);
  for (int u = 0; u < 3; ++u)
    CHECK(store.get_state("u" + std::to_string(u)) == after[static_cast<size_t>(u)]);

  CHECK_THROWS_WITH_AS(store.rollback("snap-404"), doctest::Contains("unknown snapshot"),
                       Error);
}

TEST_CASE("snapshot catalog retention evicts the oldest") {
  World w = make_world(8);
  StateStore store(w.model(), w.dir, /*retention=*/7);
  store.apply_event({"u", "i1", "c1", 1});
  std::vector<std::string> paths;
  for (int i = 0; i < 8; ++i) {
    auto s = store.snapshot();
    paths.push_back(s.path);
  }
  auto cat = store.catalog();
  REQUIRE(cat.size() == 7);
  CHECK(cat.front().id == "snap-2");  // snap-1 evicted
  CHECK(!std::filesystem::exists(paths.front()));
  CHECK(std::filesystem::exists(paths.back()));
}

TEST_CASE("corrupt snapshots are rejected and leave the store untouched") {
  World w = make_world(9);
  StateStore store(w.model(), w.dir);
  store.apply_event({"u1", "i1", "c1", 1});
  auto snap = store.snapshot();
  store.apply_event({"u1", "i2", "c1", 2});
  UserInterestState current = store.get_state("u1");

  // flip one byte in the middle of the file
  std::string bytes;
  {
    std::ifstream in(snap.path, std::ios::binary);
    bytes.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  }
  bytes[bytes.size() / 2] ^= 0x01;
  {
    std::ofstream out(snap.path, std::ios::binary | std::ios::trunc);
    out << bytes;
  }
  CHECK_THROWS_WITH_AS(store.rollback(snap.id), doctest::Contains("checksum"), Error);
  CHECK(store.get_state("u1") == current);
}

TEST_CASE("deploy_params swaps atomically between events and stamps versions") {
  World w = make_world(10);
  StateStore store(w.model(1), w.dir);
  store.apply_event({"u", "i1", "c1", 1});
  CHECK(store.get_state("u").version == 1);

  // second model with different parameter values, same shapes
  Rng rng(999);
  auto params2 = std::make_shared<ModelParams>(ModelParams::init(
      w.params->hyper, w.vocab->item_count(), w.vocab->category_count(), rng));
  store.deploy_params({params2, w.vocab, 2});
  store.apply_event({"u", "i2", "c1", 2});
  CHECK(store.get_state("u").version == 2);

  // the second event must have used the new parameters
  SequenceResult s1 = process_sequence(*w.params, to_indices(w, {{"u", "i1", "c1", 1}}), 1);
  UserInterestState expect = s1.state;
  step_event(*params2, expect, w.vocab->item_index("i2"), w.vocab->category_index("c1"));
  expect.version = 2;
  CHECK(store.get_state("u") == expect);

  CHECK_THROWS_WITH_AS(store.deploy_params({params2, w.vocab, 2}),
                       doctest::Contains("not greater"), Error);
}

TEST_CASE("architecture mismatch quarantines the state instead of reshaping") {
  World w = make_world(11);
  StateStore store(w.model(1), w.dir);
  store.apply_event({"u", "i1", "c1", 1});

  HyperParams bigger = w.params->hyper;
  bigger.slots = 6;  // different slot count
  Rng rng(1000);
  auto params2 = std::make_shared<ModelParams>(
      ModelParams::init(bigger, w.vocab->item_count(), w.vocab->category_count(), rng));
  store.deploy_params({params2, w.vocab, 2});

  CHECK_THROWS_WITH_AS(store.apply_event({"u", "i2", "c1", 2}),
                       doctest::Contains("quarantined"), Error);
  CHECK(store.quarantined_count() == 1);
  // the user now reads as cold-start under the new architecture
  CHECK(store.get_state("u") == cold_start_state(*params2, 2));
  // and fresh events apply cleanly
  store.apply_event({"u", "i2", "c1", 2});
  CHECK(store.get_state("u").events == 1);
}

TEST_CASE("concurrent cross-user events with readers and deploys keep per-user order") {
  World w = make_world(12);
  StateStore store(w.model(1), w.dir);
  const int n_users = 8, per_user = 50;

  // Per-user event sequences; threads interleave users arbitrarily.
  std::vector<std::vector<BehaviorEvent>> seqs;
  for (int u = 0; u < n_users; ++u) {
    std::vector<BehaviorEvent> evs;
    Rng rng(200 + static_cast<unsigned>(u));
    for (int t = 0; t < per_user; ++t) {
      int item = static_cast<int>(rng() % 39);
      evs.push_back({"u" + std::to_string(u), "i" + std::to_string(item),
                     "c" + std::to_string(item % 7), t});
    }
    seqs.push_back(std::move(evs));
  }

  std::atomic<bool> stop{false};
  std::thread reader([&] {
    while (!stop) {
      for (int u = 0; u < n_users; ++u) {
        UserInterestState st = store.get_state("u" + std::to_string(u));
        // shapes are always consistent, never torn
        if (st.memory.rank() != 2) std::abort();
      }
    }
  });

  std::vector<std::thread> writers;
  for (int t = 0; t < 4; ++t)
    writers.emplace_back([&, t] {
      for (int u = t; u < n_users; u += 4)
        for (const BehaviorEvent& e : seqs[static_cast<size_t>(u)]) store.apply_event(e);
    });
  for (auto& th : writers) th.join();
  stop = true;
  reader.join();

  // Final states equal the single-threaded fold regardless of interleaving.
  for (int u = 0; u < n_users; ++u) {
    SequenceResult expect =
        process_sequence(*w.params, to_indices(w, seqs[static_cast<size_t>(u)]), 1);
    expect.state.version = 1;
    CHECK(store.get_state("u" + std::to_string(u)) == expect.state);
  }
}

TEST_CASE("per-user state size is independent of history length") {
  World w = make_world(13);
  const HyperParams& h = w.params->hyper;
  std::size_t bytes = UserInterestState::byte_size(h);
  StateStore store(w.model(), w.dir);
  auto short_events = synth::uniform_events(1, 10, 39, 7, 81);
  auto long_events = synth::uniform_events(1, 10000, 39, 7, 82);
  for (auto& e : long_events) e.user_id = "u-long";
  store.warm_up(short_events);
  store.warm_up(long_events);
  auto measure = [&](const std::string& user) {
    UserInterestState st = store.get_state(user);
    return sizeof(double) * (st.memory.data().size() + st.channels.data().size() +
                             st.usage.data().size()) +
           2 * sizeof(std::int64_t);
  };
  CHECK(measure("u0") == bytes);
  CHECK(measure("u-long") == bytes);
}
