#include "fedsim/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace fedsim::rng {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive(std::uint64_t master, Purpose purpose, std::uint64_t a,
                     std::uint64_t b) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  return h;
}

std::uint64_t uniform_below(Engine& eng, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
  // Rejection sampling over the largest multiple of n.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = eng();
  } while (x >= limit);
  return x % n;
}

double uniform01(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

double normal(Engine& eng) {
  // Box-Muller; u1 in (0,1] so the log is finite.
  const double u1 = (static_cast<double>(eng() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform01(eng);
  const double r = std::sqrt(-2.0 * std::log(u1));
  return r * std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::vector<std::uint32_t> sample_without_replacement(std::uint64_t n,
                                                      std::uint64_t k,
                                                      Engine& eng) {
  if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
  std::vector<std::uint32_t> pool(n);
  for (std::uint64_t i = 0; i < n; ++i) pool[i] = static_cast<std::uint32_t>(i);
  std::vector<std::uint32_t> out;
  out.reserve(k);
  for (std::uint64_t i = 0; i < k; ++i) {
    const std::uint64_t j = i + uniform_below(eng, n - i);
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  return out;
}

}  // namespace fedsim::rng
