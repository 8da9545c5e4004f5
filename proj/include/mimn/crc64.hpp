#pragma once

#include <cstddef>
#include <cstdint>

namespace mimn {

// CRC-64/ECMA-182, bit-reflected (the XZ variant). Used as the snapshot
// integrity check.
std::uint64_t crc64(const void* data, std::size_t len, std::uint64_t seed = 0);

}  // namespace mimn
