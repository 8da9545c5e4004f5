#pragma once

#include <memory>
#include <shared_mutex>
#include <unordered_map>

#include "mimn/data.hpp"
#include "mimn/model.hpp"

namespace mimn::uic {

// Parameter set + vocabulary deployed under a version id. Swapped atomically;
// in-flight updates finish under the version they started with.
struct VersionedModel {
  std::shared_ptr<const ModelParams> params;
  std::shared_ptr<const Vocabulary> vocab;
  std::int64_t version = 0;
};

struct SnapshotInfo {
  std::string id;
  std::int64_t created_unix_ms = 0;
  std::int64_t param_version = 0;
  std::string path;
  std::uint64_t checksum = 0;
  std::size_t user_count = 0;
};

// Event-driven store of per-user interest state.
//
// Concurrency: reads take shared shard locks; writes take the exclusive lock
// of the user's shard, so per-user updates are serialized while distinct
// users proceed in parallel. Parameter deployment swaps a shared pointer
// under its own mutex; an update uses whichever model it captured first.
class StateStore {
 public:
  StateStore(VersionedModel model, std::string snapshot_dir, int retention = 7,
             int shard_count = 64);

  // Advance one user's state by exactly one event. Unknown users start from
  // the cold-start state. A stored state whose shapes do not match the
  // active architecture is quarantined (moved aside, never reshaped) and the
  // call fails.
  void apply_event(const BehaviorEvent& event);

  // Stored state, or the canonical cold-start state for unknown users.
  UserInterestState get_state(const std::string& user_id) const;
  bool has_user(const std::string& user_id) const;
  std::size_t user_count() const;

  // Initialize states by offline sequence processing of historical logs;
  // equivalent to replaying every event through apply_event. Re-running
  // overwrites idempotently. Per-user failures are counted, not fatal.
  // Returns the number of users initialized.
  long warm_up(const std::vector<BehaviorEvent>& events);

  // Point-in-time durable copy of all states. The catalog keeps at most
  // `retention` snapshots; older files are deleted. Nothing is recorded if
  // serialization fails.
  SnapshotInfo snapshot();
  // Restore states bit-identically from a cataloged snapshot (by id) or any
  // snapshot file. The store is untouched on checksum/format failure.
  void rollback(const std::string& snapshot_id);
  void rollback_file(const std::string& path);
  std::vector<SnapshotInfo> catalog() const;

  // Strictly increasing version required.
  void deploy_params(VersionedModel next);
  VersionedModel model() const;

  long quarantined_count() const;
  long warmup_failures() const { return warmup_failures_; }

 private:
  struct Shard {
    mutable std::shared_mutex mu;
    std::unordered_map<std::string, UserInterestState> states;
  };

  Shard& shard_for(const std::string& user_id);
  const Shard& shard_for(const std::string& user_id) const;
  void replace_all_states(std::vector<std::pair<std::string, UserInterestState>> states);

  std::vector<std::unique_ptr<Shard>> shards_;
  mutable std::mutex model_mu_;
  VersionedModel model_;

  std::string snapshot_dir_;
  int retention_;
  mutable std::mutex catalog_mu_;
  std::vector<SnapshotInfo> catalog_;
  long snapshot_seq_ = 0;

  mutable std::mutex quarantine_mu_;
  std::unordered_map<std::string, UserInterestState> quarantine_;
  long warmup_failures_ = 0;
};

// Snapshot file layout (little-endian):
//   "MIMNSNAP" | u32 format | i64 param_version | u32 slots,width,miu_width |
//   u64 user_count | per user: u32 id_len, id bytes, f64 memory[m*d],
//   f64 channels[m*h], f64 usage[m], i64 events, i64 version | u64 crc64
// The trailing checksum covers every preceding byte.
void write_snapshot_file(const std::string& path, std::int64_t param_version,
                         const HyperParams& hyper,
                         const std::vector<std::pair<std::string, UserInterestState>>& states,
                         std::uint64_t* checksum_out);
struct SnapshotData {
  std::int64_t param_version = 0;
  int slots = 0, width = 0, miu_width = 0;
  std::vector<std::pair<std::string, UserInterestState>> states;
};
SnapshotData read_snapshot_file(const std::string& path);

}  // namespace mimn::uic
