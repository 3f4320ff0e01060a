#pragma once

#include <cstdint>
#include <initializer_list>

#include "multidag/types.hpp"

namespace multidag {

// splitmix64 finalizer; stable across platforms and releases.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a parent seed and a tag.
constexpr Seed derive_seed(Seed parent, std::uint64_t tag) noexcept {
  return splitmix64(parent ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
}

constexpr Seed hash_seed(Seed base, std::initializer_list<std::uint64_t> parts) noexcept {
  Seed h = splitmix64(base);
  for (auto v : parts) h = splitmix64(h ^ splitmix64(v));
  return h;
}

}  // namespace multidag
