#include "mimn/crc64.hpp"

namespace mimn {

namespace {

constexpr std::uint64_t kPoly = 0xC96C5795D7870F42ull;  // reflected ECMA-182

struct Table {
  std::uint64_t t[256];
  Table() {
    for (int i = 0; i < 256; ++i) {
      std::uint64_t c = static_cast<std::uint64_t>(i);
      for (int k = 0; k < 8; ++k) c = (c & 1) ? (c >> 1) ^ kPoly : c >> 1;
      t[i] = c;
    }
  }
};

const Table kTable;

}  // namespace

std::uint64_t crc64(const void* data, std::size_t len, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t crc = ~seed;
  for (std::size_t i = 0; i < len; ++i) crc = kTable.t[(crc ^ p[i]) & 0xff] ^ (crc >> 8);
  return ~crc;
}

}  // namespace mimn
