#pragma once

#include <cstdint>

#include "mimn/params.hpp"

namespace mimn {

// Fixed-size per-user interest state. This is everything serving needs;
// raw behavior history is never stored.
struct UserInterestState {
  Tensor memory;    // {m,d} slot memory
  Tensor channels;  // {m,h} induction-unit memory
  Tensor usage;     // {m} accumulated (rebalanced) write weight
  std::int64_t events = 0;   // behavior events applied
  std::int64_t version = 0;  // parameter version of the latest update

  bool operator==(const UserInterestState& o) const {
    return memory == o.memory && channels == o.channels && usage == o.usage &&
           events == o.events && version == o.version;
  }

  // Serialized size in bytes per user, excluding the user id.
  static std::size_t byte_size(const HyperParams& h) {
    return sizeof(double) * static_cast<std::size_t>(h.slots) *
               static_cast<std::size_t>(h.width + h.miu_width + 1) +
           2 * sizeof(std::int64_t);
  }
};

inline UserInterestState cold_start_state(const ModelParams& p, std::int64_t version = 0) {
  UserInterestState s;
  s.memory = p.mem_init;
  s.channels = p.miu_init;
  s.usage = Tensor({p.hyper.slots});
  s.events = 0;
  s.version = version;
  return s;
}

}  // namespace mimn
