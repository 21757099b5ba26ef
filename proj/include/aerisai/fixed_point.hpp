#pragma once

#include <gmpxx.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "aerisai/common.hpp"

namespace aerisai::paillier {

// Maps real-valued model parameters into the plaintext ring Z_n.
//
// Signed convention: encoded values in (modulus/2, modulus) decode as
// negative. Values must keep |x|*scale < modulus/4 so one sum over the
// roster plus one scalar multiply cannot wrap past the sign boundary.
class FixedPointCodec {
 public:
  static constexpr unsigned kDefaultScaleBits = 24;
  // Extra factor carried by the contract's mean scalar Q = round(2^16 / N).
  static constexpr unsigned kDivisionScaleBits = 16;

  FixedPointCodec(unsigned scale_bits, mpz_class modulus)
      : scale_bits_(scale_bits), modulus_(std::move(modulus)) {
    half_ = modulus_ / 2;
    quarter_ = modulus_ / 4;
  }

  unsigned scale_bits() const { return scale_bits_; }
  const mpz_class& modulus() const { return modulus_; }

  FixedPointCodec with_scale_bits(unsigned scale_bits) const {
    return FixedPointCodec(scale_bits, modulus_);
  }

  mpz_class encode(double x) const {
    if (!std::isfinite(x)) fail(Err::kOverflow, "cannot encode non-finite value");
    double scaled = std::ldexp(x, static_cast<int>(scale_bits_));
    // llround is exact below 2^62; protocol values stay far under that.
    if (std::fabs(scaled) >= 0x1.0p62)
      fail(Err::kOverflow, "value exceeds fixed-point range");
    long long units = std::llround(scaled);
    mpz_class v(static_cast<long>(units));
    if (cmp(abs(v), quarter_) >= 0)
      fail(Err::kOverflow, "encoded value exceeds modulus/4 headroom");
    if (v < 0) v += modulus_;
    return v;
  }

  // Signed representative in (-modulus/2, modulus/2].
  mpz_class to_signed(const mpz_class& v) const {
    if (v > half_) return v - modulus_;
    return v;
  }

  double decode(const mpz_class& v) const { return decode_at(v, scale_bits_); }

  double decode_at(const mpz_class& v, unsigned scale_bits) const {
    mpz_class s = to_signed(v);
    return std::ldexp(mpz_get_d(s.get_mpz_t()), -static_cast<int>(scale_bits));
  }

  std::vector<mpz_class> encode_vector(const std::vector<double>& xs) const {
    std::vector<mpz_class> out;
    out.reserve(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) {
      try {
        out.push_back(encode(xs[i]));
      } catch (const Error& e) {
        fail(e.code(), "encode failed at index " + std::to_string(i) + ": " + e.what());
      }
    }
    return out;
  }

 private:
  unsigned scale_bits_;
  mpz_class modulus_;
  mpz_class half_;
  mpz_class quarter_;
};

}  // namespace aerisai::paillier
