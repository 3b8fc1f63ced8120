#include "vqacoin/rng.hpp"

#include <cmath>

namespace vqacoin {

namespace {

// splitmix64 finalizer, used only to mix derivation paths into seeds
uint64_t mix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Rng Rng::derive(uint64_t seed, std::initializer_list<uint64_t> path) {
  return Rng(derive_seed(seed, path));
}

uint64_t Rng::derive_seed(uint64_t seed, std::initializer_list<uint64_t> path) {
  uint64_t s = mix(seed);
  for (uint64_t p : path) s = mix(s ^ mix(p));
  return s;
}

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
  uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<int64_t>(next_u64());  // full range
  uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return lo + static_cast<int64_t>(x % span);
}

double Rng::normal(double mu, double sigma) {
  double u1 = uniform01();
  double u2 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  double r = std::sqrt(-2.0 * std::log(u1));
  return mu + sigma * r * std::cos(2.0 * M_PI * u2);
}

std::vector<size_t> Rng::permutation(size_t n) {
  std::vector<size_t> p(n);
  for (size_t i = 0; i < n; ++i) p[i] = i;
  for (size_t i = n; i > 1; --i) {
    size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

}  // namespace vqacoin
