#pragma once

#include "tabdiff/hash.hpp"

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <vector>

namespace tabdiff {

// Counter-based deterministic RNG (splitmix64 finalizer over key + counter).
// Every random stream in the toolkit is keyed by the run seed plus a label
// and coordinate tuple (e.g. seed, "eps", epoch, batch, item), so draws are
// independent of evaluation order.
class CounterRng {
 public:
  explicit CounterRng(uint64_t key) : key_(key) {}

  CounterRng(uint64_t seed, std::initializer_list<uint64_t> stream) : key_(mix(seed)) {
    for (uint64_t s : stream) key_ = mix(key_ ^ s);
  }

  static uint64_t mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  static uint64_t label(std::string_view name) { return fnv1a64(name); }

  uint64_t next_u64() { return mix(key_ + 0x632be59bd9b4e019ull * ++counter_); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n)
  uint64_t uniform_index(uint64_t n) {
    return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  // standard normal via Box-Muller; second value of each pair is cached
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t key_ = 0;
  uint64_t counter_ = 0;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace tabdiff
