#pragma once

#include <cstdint>
#include <random>

namespace readmit {

// splitmix64 finalizer; used to derive independent seed streams from a root
// seed and an index so that per-patient / per-repeat work is reproducible
// regardless of execution order.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
  return splitmix64(splitmix64(root) ^ splitmix64(index + 0x51ed2701ULL));
}

inline std::mt19937_64 make_engine(std::uint64_t root, std::uint64_t index) {
  return std::mt19937_64{derive_seed(root, index)};
}

}  // namespace readmit
