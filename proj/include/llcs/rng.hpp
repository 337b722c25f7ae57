#pragma once

#include <cstdint>
#include <random>

namespace llcs {

using Engine = std::mt19937_64;

/// Purpose tags that keep derived streams disjoint.
enum class StreamTag : std::uint64_t {
  conditioning = 1,
  chain = 2,
  normalization = 3,
  conditions = 4,
  reevaluation = 5,
  restart = 6,
  probe = 7,
};

namespace detail {
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

/// Engine for the stream addressed by (master, tag, i, j). The address is
/// hashed, not drawn from a shared generator, so streams are independent of
/// the order in which workers request them.
inline Engine make_stream(std::uint64_t master, StreamTag tag, std::uint64_t i = 0, std::uint64_t j = 0) {
  const std::uint64_t a = detail::splitmix64(master);
  const std::uint64_t b = detail::splitmix64(a ^ static_cast<std::uint64_t>(tag));
  const std::uint64_t c = detail::splitmix64(b ^ detail::splitmix64(i + 0x632be59bd9b4e019ULL));
  const std::uint64_t d = detail::splitmix64(c ^ detail::splitmix64(j + 0x8cb92ba72f3d8dd7ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32),
                    static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(d >> 32)};
  return Engine(seq);
}

/// A fresh master seed derived from another (independent re-evaluation).
inline std::uint64_t derive_seed(std::uint64_t master, StreamTag tag, std::uint64_t i = 0) {
  return detail::splitmix64(detail::splitmix64(master ^ (static_cast<std::uint64_t>(tag) << 56)) + i);
}

}  // namespace llcs
