#include "qsat/random.hpp"

namespace qsat {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t state = splitmix64(master);
  for (auto step : path) state = splitmix64(state ^ splitmix64(step + 0x632be59bd9b4e019ULL));
  return state;
}

}  // namespace qsat
