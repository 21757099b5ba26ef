#pragma once

#include <gmpxx.h>

#include <cmath>
#include <cstdint>
#include <memory>

#include "aerisai/common.hpp"

namespace aerisai {

namespace detail {
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

// Deterministic randomness source. Every protocol component that consumes
// randomness takes one of these explicitly; reruns with the same seed are
// bit-identical. fork(label) derives an independent child stream from the
// original seed and the label only, so forking is order-independent.
class SeededRng {
 public:
  explicit SeededRng(uint64_t seed) : seed_(seed) {
    gmp_randinit_mt(state_);
    gmp_randseed_ui(state_, static_cast<unsigned long>(seed));
  }
  ~SeededRng() { gmp_randclear(state_); }

  SeededRng(const SeededRng&) = delete;
  SeededRng& operator=(const SeededRng&) = delete;
  SeededRng(SeededRng&&) = delete;
  SeededRng& operator=(SeededRng&&) = delete;

  uint64_t seed() const { return seed_; }

  SeededRng fork(uint64_t label) const {
    return SeededRng(detail::splitmix64(seed_ ^ detail::splitmix64(label ^ 0xa5a5a5a5a5a5a5a5ULL)));
  }

  std::unique_ptr<SeededRng> fork_ptr(uint64_t label) const {
    return std::make_unique<SeededRng>(
        detail::splitmix64(seed_ ^ detail::splitmix64(label ^ 0xa5a5a5a5a5a5a5a5ULL)));
  }

  uint64_t next_u64() {
    mpz_class v;
    mpz_urandomb(v.get_mpz_t(), state_, 64);
    static_assert(sizeof(unsigned long) == 8, "64-bit unsigned long expected");
    return static_cast<uint64_t>(mpz_get_ui(v.get_mpz_t()));
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller (explicit, so draws are identical across
  // standard libraries).
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_unit();
    double u2 = next_unit();
    while (u1 <= 0.0) u1 = next_unit();
    double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return mag * std::cos(2.0 * M_PI * u2);
  }

  mpz_class bits(unsigned n) {
    mpz_class v;
    mpz_urandomb(v.get_mpz_t(), state_, n);
    return v;
  }

  // Uniform in [0, bound).
  mpz_class below(const mpz_class& bound) {
    mpz_class v;
    mpz_urandomm(v.get_mpz_t(), state_, bound.get_mpz_t());
    return v;
  }

  // Uniform in [1, bound).
  mpz_class nonzero_below(const mpz_class& bound) {
    for (;;) {
      mpz_class v = below(bound);
      if (v != 0) return v;
    }
  }

  Bytes bytes(size_t n) {
    Bytes out(n);
    for (auto& b : out) b = static_cast<uint8_t>(next_u64() & 0xff);
    return out;
  }

 private:
  explicit SeededRng(uint64_t seed, int) : SeededRng(seed) {}

  uint64_t seed_;
  gmp_randstate_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace aerisai
