#include "mimn/uic_store.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>

#include "mimn/crc64.hpp"

namespace mimn::uic {

namespace {

void put_bytes(std::string& buf, const void* p, std::size_t n) {
  buf.append(static_cast<const char*>(p), n);
}
template <class T>
void put(std::string& buf, T v) {
  put_bytes(buf, &v, sizeof(v));
}

struct Reader {
  const char* p;
  const char* end;
  void read(void* out, std::size_t n) {
    MIMN_CHECK(p + n <= end, "snapshot file truncated");
    std::memcpy(out, p, n);
    p += n;
  }
  template <class T>
  T get() {
    T v;
    read(&v, sizeof(v));
    return v;
  }
};

constexpr char kMagic[8] = {'M', 'I', 'M', 'N', 'S', 'N', 'A', 'P'};
constexpr std::uint32_t kFormat = 1;

}  // namespace

void write_snapshot_file(const std::string& path, std::int64_t param_version,
                         const HyperParams& hyper,
                         const std::vector<std::pair<std::string, UserInterestState>>& states,
                         std::uint64_t* checksum_out) {
  std::string buf;
  put_bytes(buf, kMagic, sizeof(kMagic));
  put(buf, kFormat);
  put(buf, param_version);
  put(buf, static_cast<std::uint32_t>(hyper.slots));
  put(buf, static_cast<std::uint32_t>(hyper.width));
  put(buf, static_cast<std::uint32_t>(hyper.miu_width));
  put(buf, static_cast<std::uint64_t>(states.size()));
  for (const auto& [user, st] : states) {
    put(buf, static_cast<std::uint32_t>(user.size()));
    put_bytes(buf, user.data(), user.size());
    put_bytes(buf, st.memory.data().data(), st.memory.data().size() * sizeof(double));
    put_bytes(buf, st.channels.data().data(), st.channels.data().size() * sizeof(double));
    put_bytes(buf, st.usage.data().data(), st.usage.data().size() * sizeof(double));
    put(buf, st.events);
    put(buf, st.version);
  }
  std::uint64_t crc = crc64(buf.data(), buf.size());
  put(buf, crc);
  if (checksum_out) *checksum_out = crc;

  // Write to a temp name first so a failed write never leaves a readable
  // half-snapshot at the target path.
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    MIMN_CHECK(out.good(), "cannot write snapshot: " + tmp);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    MIMN_CHECK(out.good(), "snapshot write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

SnapshotData read_snapshot_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  MIMN_CHECK(in.good(), "cannot open snapshot: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  MIMN_CHECK(buf.size() >= sizeof(kMagic) + sizeof(std::uint64_t), "snapshot too short");

  std::uint64_t stored_crc;
  std::memcpy(&stored_crc, buf.data() + buf.size() - sizeof(stored_crc), sizeof(stored_crc));
  std::uint64_t actual = crc64(buf.data(), buf.size() - sizeof(stored_crc));
  MIMN_CHECK(actual == stored_crc, "snapshot checksum mismatch: " + path);

  Reader r{buf.data(), buf.data() + buf.size() - sizeof(stored_crc)};
  char magic[8];
  r.read(magic, sizeof(magic));
  MIMN_CHECK(std::memcmp(magic, kMagic, sizeof(kMagic)) == 0, "not a snapshot file: " + path);
  MIMN_CHECK(r.get<std::uint32_t>() == kFormat, "unsupported snapshot format: " + path);

  SnapshotData data;
  data.param_version = r.get<std::int64_t>();
  data.slots = static_cast<int>(r.get<std::uint32_t>());
  data.width = static_cast<int>(r.get<std::uint32_t>());
  data.miu_width = static_cast<int>(r.get<std::uint32_t>());
  std::uint64_t users = r.get<std::uint64_t>();
  data.states.reserve(users);
  for (std::uint64_t i = 0; i < users; ++i) {
    std::uint32_t len = r.get<std::uint32_t>();
    std::string user(len, '\0');
    r.read(user.data(), len);
    UserInterestState st;
    st.memory = Tensor({data.slots, data.width});
    st.channels = Tensor({data.slots, data.miu_width});
    st.usage = Tensor({data.slots});
    r.read(st.memory.data().data(), st.memory.data().size() * sizeof(double));
    r.read(st.channels.data().data(), st.channels.data().size() * sizeof(double));
    r.read(st.usage.data().data(), st.usage.data().size() * sizeof(double));
    st.events = r.get<std::int64_t>();
    st.version = r.get<std::int64_t>();
    data.states.emplace_back(std::move(user), std::move(st));
  }
  MIMN_CHECK(r.p == r.end, "snapshot has trailing bytes: " + path);
  return data;
}

StateStore::StateStore(VersionedModel model, std::string snapshot_dir, int retention,
                       int shard_count)
    : model_(std::move(model)), snapshot_dir_(std::move(snapshot_dir)), retention_(retention) {
  MIMN_CHECK(model_.params && model_.vocab, "store needs a deployed model");
  MIMN_CHECK(retention_ >= 1, "retention must be >= 1");
  MIMN_CHECK(shard_count >= 1, "shard_count must be >= 1");
  shards_.reserve(static_cast<size_t>(shard_count));
  for (int i = 0; i < shard_count; ++i) shards_.push_back(std::make_unique<Shard>());
  if (snapshot_dir_.empty()) return;
  std::filesystem::create_directories(snapshot_dir_);

  // Rebuild the catalog from files left by earlier runs so retention and
  // rollback-by-id work across process restarts.
  std::vector<std::pair<long, std::filesystem::path>> found;
  for (const auto& entry : std::filesystem::directory_iterator(snapshot_dir_)) {
    std::string name = entry.path().filename().string();
    if (name.rfind("snap-", 0) != 0 || entry.path().extension() != ".snap") continue;
    try {
      found.emplace_back(std::stol(name.substr(5)), entry.path());
    } catch (...) {
    }
  }
  std::sort(found.begin(), found.end());
  for (const auto& [seq, path] : found) {
    SnapshotInfo info;
    info.id = "snap-" + std::to_string(seq);
    info.path = path.string();
    try {
      SnapshotData data = read_snapshot_file(info.path);
      info.param_version = data.param_version;
      info.user_count = data.states.size();
    } catch (const std::exception&) {
      continue;  // unreadable leftovers are not cataloged
    }
    catalog_.push_back(std::move(info));
    snapshot_seq_ = std::max(snapshot_seq_, seq);
  }
  while (static_cast<int>(catalog_.size()) > retention_) {
    std::error_code ec;
    std::filesystem::remove(catalog_.front().path, ec);
    catalog_.erase(catalog_.begin());
  }
}

StateStore::Shard& StateStore::shard_for(const std::string& user_id) {
  return *shards_[fnv1a64(user_id) % shards_.size()];
}
const StateStore::Shard& StateStore::shard_for(const std::string& user_id) const {
  return *shards_[fnv1a64(user_id) % shards_.size()];
}

VersionedModel StateStore::model() const {
  std::lock_guard lk(model_mu_);
  return model_;
}

void StateStore::deploy_params(VersionedModel next) {
  MIMN_CHECK(next.params && next.vocab, "deploy_params: empty model");
  std::lock_guard lk(model_mu_);
  MIMN_CHECK(next.version > model_.version,
             "deploy_params: version " + std::to_string(next.version) +
                 " not greater than current " + std::to_string(model_.version));
  model_ = std::move(next);
}

void StateStore::apply_event(const BehaviorEvent& event) {
  MIMN_CHECK(!event.user_id.empty(), "apply_event: empty user id");
  VersionedModel m = model();
  const ModelParams& p = *m.params;

  Shard& shard = shard_for(event.user_id);
  std::unique_lock lk(shard.mu);
  auto [it, fresh] = shard.states.try_emplace(event.user_id);
  if (fresh) {
    it->second = cold_start_state(p, m.version);
  } else {
    const UserInterestState& st = it->second;
    bool ok = st.memory.rank() == 2 && st.memory.rows() == p.hyper.slots &&
              st.memory.cols() == p.hyper.width && st.channels.cols() == p.hyper.miu_width;
    if (!ok) {
      UserInterestState bad = std::move(it->second);
      shard.states.erase(it);
      lk.unlock();
      {
        std::lock_guard qk(quarantine_mu_);
        quarantine_.emplace(event.user_id, std::move(bad));
      }
      fail("apply_event: state for user '" + event.user_id +
           "' does not match the deployed architecture; state quarantined");
    }
  }
  int item = m.vocab->item_index(event.item_id);
  int cat = m.vocab->category_index(event.category_id);
  step_event(p, it->second, item, cat);
  it->second.version = m.version;
}

UserInterestState StateStore::get_state(const std::string& user_id) const {
  const Shard& shard = shard_for(user_id);
  {
    std::shared_lock lk(shard.mu);
    auto it = shard.states.find(user_id);
    if (it != shard.states.end()) return it->second;
  }
  VersionedModel m = model();
  return cold_start_state(*m.params, m.version);
}

bool StateStore::has_user(const std::string& user_id) const {
  const Shard& shard = shard_for(user_id);
  std::shared_lock lk(shard.mu);
  return shard.states.count(user_id) > 0;
}

std::size_t StateStore::user_count() const {
  std::size_t n = 0;
  for (const auto& s : shards_) {
    std::shared_lock lk(s->mu);
    n += s->states.size();
  }
  return n;
}

long StateStore::quarantined_count() const {
  std::lock_guard lk(quarantine_mu_);
  return static_cast<long>(quarantine_.size());
}

long StateStore::warm_up(const std::vector<BehaviorEvent>& events) {
  VersionedModel m = model();
  const ModelParams& p = *m.params;

  std::vector<std::string> user_order;
  std::unordered_map<std::string, std::vector<size_t>> by_user;
  for (size_t i = 0; i < events.size(); ++i) {
    auto [it, fresh] = by_user.try_emplace(events[i].user_id);
    if (fresh) user_order.push_back(events[i].user_id);
    it->second.push_back(i);
  }

  long initialized = 0;
  for (const std::string& user : user_order) {
    try {
      auto& idx = by_user[user];
      std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
        return events[a].timestamp < events[b].timestamp;
      });
      std::vector<std::pair<int, int>> seq;
      seq.reserve(idx.size());
      for (size_t i : idx)
        seq.emplace_back(m.vocab->item_index(events[i].item_id),
                         m.vocab->category_index(events[i].category_id));
      SequenceResult res = process_sequence(p, seq, m.version);
      res.state.version = m.version;
      Shard& shard = shard_for(user);
      std::unique_lock lk(shard.mu);
      shard.states[user] = std::move(res.state);
      ++initialized;
    } catch (const std::exception&) {
      ++warmup_failures_;
    }
  }
  return initialized;
}

SnapshotInfo StateStore::snapshot() {
  MIMN_CHECK(!snapshot_dir_.empty(), "store was created without a snapshot directory");
  VersionedModel m = model();

  // Consistent point-in-time view: hold every shard lock while copying.
  std::vector<std::unique_lock<std::shared_mutex>> locks;
  locks.reserve(shards_.size());
  for (auto& s : shards_) locks.emplace_back(s->mu);
  std::vector<std::pair<std::string, UserInterestState>> states;
  for (auto& s : shards_)
    for (const auto& [user, st] : s->states) states.emplace_back(user, st);
  locks.clear();
  // Deterministic file layout regardless of hash-map iteration order.
  std::sort(states.begin(), states.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  SnapshotInfo info;
  {
    std::lock_guard lk(catalog_mu_);
    info.id = "snap-" + std::to_string(++snapshot_seq_);
  }
  info.created_unix_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::system_clock::now().time_since_epoch())
                             .count();
  info.param_version = m.version;
  info.user_count = states.size();
  info.path = (std::filesystem::path(snapshot_dir_) / (info.id + ".snap")).string();
  write_snapshot_file(info.path, m.version, m.params->hyper, states, &info.checksum);

  std::lock_guard lk(catalog_mu_);
  catalog_.push_back(info);
  while (static_cast<int>(catalog_.size()) > retention_) {
    std::error_code ec;
    std::filesystem::remove(catalog_.front().path, ec);
    catalog_.erase(catalog_.begin());
  }
  return info;
}

std::vector<SnapshotInfo> StateStore::catalog() const {
  std::lock_guard lk(catalog_mu_);
  return catalog_;
}

void StateStore::rollback(const std::string& snapshot_id) {
  std::string path;
  {
    std::lock_guard lk(catalog_mu_);
    for (const SnapshotInfo& s : catalog_)
      if (s.id == snapshot_id) path = s.path;
  }
  MIMN_CHECK(!path.empty(), "rollback: unknown snapshot id '" + snapshot_id + "'");
  rollback_file(path);
}

void StateStore::rollback_file(const std::string& path) {
  // Parse + verify fully before mutating anything.
  SnapshotData data = read_snapshot_file(path);
  VersionedModel m = model();
  MIMN_CHECK(data.slots == m.params->hyper.slots && data.width == m.params->hyper.width &&
                 data.miu_width == m.params->hyper.miu_width,
             "rollback: snapshot architecture does not match the deployed model");
  replace_all_states(std::move(data.states));
}

void StateStore::replace_all_states(
    std::vector<std::pair<std::string, UserInterestState>> states) {
  std::vector<std::unique_lock<std::shared_mutex>> locks;
  locks.reserve(shards_.size());
  for (auto& s : shards_) locks.emplace_back(s->mu);
  for (auto& s : shards_) s->states.clear();
  for (auto& [user, st] : states)
    shards_[fnv1a64(user) % shards_.size()]->states.emplace(std::move(user), std::move(st));
}

}  // namespace mimn::uic
