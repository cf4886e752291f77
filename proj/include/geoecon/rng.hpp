#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace geoecon {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Child streams derived from (seed, tags...) are independent of each other,
// so parallel jobs can own a stream without any cross-thread draw order.
inline uint64_t derive_seed(uint64_t base, uint64_t tag) {
  uint64_t s = base ^ (0xd1342543de82ef95ULL * (tag + 0x632be59bd9b4e019ULL));
  splitmix64(s);
  return splitmix64(s);
}

inline uint64_t derive_seed(uint64_t base, uint64_t tag1, uint64_t tag2) {
  return derive_seed(derive_seed(base, tag1), tag2);
}

inline uint64_t derive_seed(uint64_t base, uint64_t tag1, uint64_t tag2,
                            uint64_t tag3) {
  return derive_seed(derive_seed(base, tag1, tag2), tag3);
}

// xoshiro256++ with explicit helpers; std:: distributions are not pinned by
// the standard, everything here is reproducible bit-for-bit.
class Rng {
public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& w : state_) w = splitmix64(sm);
  }

  uint64_t next() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // uniform in [0, 1)
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  // unbiased integer in [0, n); Lemire's method
  uint64_t below(uint64_t n) {
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
    auto lo = static_cast<uint64_t>(m);
    if (lo < n) {
      const uint64_t t = (0 - n) % n;
      while (lo < t) {
        m = static_cast<unsigned __int128>(next()) * n;
        lo = static_cast<uint64_t>(m);
      }
    }
    return static_cast<uint64_t>(m >> 64);
  }

  // standard normal, Box-Muller (two draws per value)
  double normal() {
    const double u1 = unit();
    const double u2 = unit();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    return r * std::cos(6.283185307179586 * u2);
  }

  template <class T>
  void shuffle(std::span<T> v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct values from [0, n), in draw order
  std::vector<uint32_t> sample_without_replacement(uint32_t n, uint32_t k);

private:
  static uint64_t rotl(uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  uint64_t state_[4];
};

inline std::vector<uint32_t> Rng::sample_without_replacement(uint32_t n,
                                                             uint32_t k) {
  // partial Fisher-Yates over a sparse map of displaced slots
  std::vector<uint32_t> out;
  out.reserve(k);
  std::vector<std::pair<uint32_t, uint32_t>> moved;  // (slot, value), small k
  auto slot_value = [&](uint32_t s) {
    for (auto& [slot, val] : moved)
      if (slot == s) return val;
    return s;
  };
  auto set_slot = [&](uint32_t s, uint32_t v) {
    for (auto& [slot, val] : moved)
      if (slot == s) {
        val = v;
        return;
      }
    moved.emplace_back(s, v);
  };
  for (uint32_t i = 0; i < k; ++i) {
    const auto j = static_cast<uint32_t>(i + below(n - i));
    out.push_back(slot_value(j));
    set_slot(j, slot_value(i));
  }
  return out;
}

}  // namespace geoecon
