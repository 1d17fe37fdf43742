#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace qsat {

/// Derives an independent stream seed from a master seed and a path of
/// counters (tree index, stage, fold, ...). Each step is a splitmix64
/// finalizer, so `derive_seed(s, {a, b})` never depends on how many other
/// streams were derived before it. This is what keeps parallel and serial
/// fits bit-identical.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(master, path));
}

}  // namespace qsat
