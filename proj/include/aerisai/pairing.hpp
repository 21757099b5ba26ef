#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <string>
#include <utility>

#include "aerisai/common.hpp"
#include "aerisai/paillier.hpp"  // mpz byte helpers
#include "aerisai/rng.hpp"

// Symmetric bilinear pairing e : G1 x G1 -> GT over the supersingular curve
//   E : y^2 = x^3 + x  over F_p,  p = h*r - 1,  p ≡ 3 (mod 4)
// G1 is the order-r subgroup of E(F_p); GT is the order-r subgroup of F_p2^*
// with F_p2 = F_p[i], i^2 = -1. The pairing is the Tate pairing composed with
// the distortion map phi(x, y) = (-x, i*y):
//   e(P, Q) = f_{r,P}(phi(Q)) ^ ((p^2 - 1) / r)
// Embedding degree 2, so the final exponent factors as (p - 1) * h and the
// p-power Frobenius on F_p2 is conjugation; denominators of Miller lines lie
// in F_p and vanish under the (p - 1) part, so vertical lines are skipped.

namespace aerisai::pairing {

using paillier::mpz_from_bytes;
using paillier::mpz_from_hex;
using paillier::mpz_to_bytes;

// Element a + b*i of F_p2.
struct Fp2 {
  mpz_class a;
  mpz_class b;

  bool operator==(const Fp2& o) const { return a == o.a && b == o.b; }
};

struct G1Point {
  mpz_class x;
  mpz_class y;
  bool infinity = true;

  bool operator==(const G1Point& o) const {
    if (infinity || o.infinity) return infinity == o.infinity;
    return x == o.x && y == o.y;
  }
};

class Curve {
 public:
  // ~80-bit security; unit tests and desk-scale experiments.
  static const Curve& fast() {
    static const Curve c(
        "ss512",
        "8cf5c3df908aa3071e169bb1a3296a0a7f39acfd17668119c5b8fe28d17463d9c2a03720b903e9b79536dc"
        "107b0ebde90aa717cb1fa784b4d99ab7912b4ccee7",
        "c29f12fbc2b9546e0f0220f3edb7f1d5cbf15197",
        "b96a4b5afa0aeb683c291564e6ee9cd46adc54acbd1887473686db6e5b7cf7ddcb99586f9edf9ae53ebfb5"
        "58");
    return c;
  }

  // ~128-bit security (3072-bit extension field DLP).
  static const Curve& standard() {
    static const Curve c(
        "ss1536",
        "949f7ee52d6c8efa3b4399795f8452837c1b13cb45afba9e06c9e503c26d25f66a691399ca72708cc43465"
        "b72485545ec1ef59cb5a885d0b835923f559815e7621085093f7b26d0265ccc9cd2f800ba338bf8c417330"
        "c7ff746866e208957f5b6d1c531640ab4aef2cf749727c84dac2df7769c508e8380b2b64cac48fe7cdece5"
        "198a6bccb11b3b09664a791f8ea1e505d6f05b27c99eb222d9aec1665791979ff5538d67b77b513a485450"
        "96aabf72445df7076c88334e4e9c6f701154c593",
        "9d04bc6f90660e59a4112626c70a70ef52d65a1b8012934e001b19e6ba3cdc41",
        "f24feb44d45ec871b595140c974e2ac625e12bf81472d8a3a0ce202f2727b487e9207b3a43ab7a29fcaa39"
        "54d4ec0454d2a38844f5ad56c1ed6ceba8672bcdaf2b181ae291f1bc47f38289bb070545ad7d8573ecdebf"
        "24ea3b4b7200328febae145e47f2ef75e32ad5c6297be90cb3ec956c539cabbde7bb39ddffcfe736aa2807"
        "1a08d017cece2198bc14856c6436825a9ff9059ec4ac0f76af9ff227897094");
    return c;
  }

  static const Curve& by_name(const std::string& name) {
    if (name == fast().name()) return fast();
    if (name == standard().name()) return standard();
    fail(Err::kFormat, "unknown curve: " + name);
  }

  const std::string& name() const { return name_; }
  const mpz_class& p() const { return p_; }
  const mpz_class& order() const { return r_; }
  const mpz_class& cofactor() const { return h_; }
  size_t field_bytes() const { return field_bytes_; }
  const G1Point& generator() const { return g_; }

  // ---- F_p ----

  mpz_class fp_mul(const mpz_class& x, const mpz_class& y) const { return x * y % p_; }
  mpz_class fp_sub(const mpz_class& x, const mpz_class& y) const {
    mpz_class v = (x - y) % p_;
    if (v < 0) v += p_;
    return v;
  }
  mpz_class fp_add(const mpz_class& x, const mpz_class& y) const { return (x + y) % p_; }
  mpz_class fp_inv(const mpz_class& x) const {
    mpz_class out;
    if (mpz_invert(out.get_mpz_t(), x.get_mpz_t(), p_.get_mpz_t()) == 0)
      fail(Err::kSetupFailure, "non-invertible field element");
    return out;
  }

  // ---- F_p2 = F_p[i], i^2 = -1 ----

  Fp2 fp2_one() const { return Fp2{1, 0}; }

  Fp2 fp2_mul(const Fp2& u, const Fp2& v) const {
    // (a+bi)(c+di) = (ac - bd) + (ad + bc)i
    mpz_class ac = u.a * v.a;
    mpz_class bd = u.b * v.b;
    mpz_class ad_bc = (u.a + u.b) * (v.a + v.b) - ac - bd;
    mpz_class re = (ac - bd) % p_;
    if (re < 0) re += p_;
    return Fp2{re, ad_bc % p_};
  }

  Fp2 fp2_sqr(const Fp2& u) const {
    // (a+bi)^2 = (a+b)(a-b) + 2ab i
    mpz_class re = (u.a + u.b) * (u.a - u.b) % p_;
    if (re < 0) re += p_;
    return Fp2{re, (u.a * u.b << 1) % p_};
  }

  Fp2 fp2_conj(const Fp2& u) const {
    mpz_class nb = u.b == 0 ? mpz_class(0) : p_ - u.b;
    return Fp2{u.a, nb};
  }

  Fp2 fp2_inv(const Fp2& u) const {
    mpz_class norm = (u.a * u.a + u.b * u.b) % p_;
    mpz_class ninv = fp_inv(norm);
    Fp2 c = fp2_conj(u);
    return Fp2{c.a * ninv % p_, c.b * ninv % p_};
  }

  Fp2 fp2_div(const Fp2& u, const Fp2& v) const { return fp2_mul(u, fp2_inv(v)); }

  Fp2 fp2_pow(const Fp2& base, const mpz_class& e) const {
    Fp2 acc = fp2_one();
    long top = static_cast<long>(mpz_sizeinbase(e.get_mpz_t(), 2));
    if (e == 0) return acc;
    for (long i = top - 1; i >= 0; --i) {
      acc = fp2_sqr(acc);
      if (mpz_tstbit(e.get_mpz_t(), static_cast<mp_bitcnt_t>(i))) acc = fp2_mul(acc, base);
    }
    return acc;
  }

  // ---- G1 ----

  bool on_curve(const G1Point& pt) const {
    if (pt.infinity) return true;
    mpz_class lhs = pt.y * pt.y % p_;
    mpz_class rhs = (pt.x * pt.x % p_ * pt.x + pt.x) % p_;
    return lhs == rhs;
  }

  G1Point g1_neg(const G1Point& pt) const {
    if (pt.infinity) return pt;
    return G1Point{pt.x, pt.y == 0 ? mpz_class(0) : p_ - pt.y, false};
  }

  G1Point g1_add(const G1Point& u, const G1Point& v) const {
    if (u.infinity) return v;
    if (v.infinity) return u;
    mpz_class lambda;
    if (u.x == v.x) {
      if ((u.y + v.y) % p_ == 0) return G1Point{};  // u = -v
      // tangent: (3x^2 + 1) / 2y
      mpz_class num = (3 * u.x * u.x + 1) % p_;
      lambda = num * fp_inv(2 * u.y % p_) % p_;
    } else {
      lambda = fp_sub(v.y, u.y) * fp_inv(fp_sub(v.x, u.x)) % p_;
    }
    mpz_class x3 = fp_sub(fp_sub(lambda * lambda % p_, u.x), v.x);
    mpz_class y3 = fp_sub(lambda * fp_sub(u.x, x3) % p_, u.y);
    return G1Point{x3, y3, false};
  }

  G1Point g1_mul(const G1Point& pt, const mpz_class& k) const {
    mpz_class e = k % r_;
    if (e < 0) e += r_;
    G1Point acc{};
    long top = static_cast<long>(mpz_sizeinbase(e.get_mpz_t(), 2));
    if (e == 0) return acc;
    for (long i = top - 1; i >= 0; --i) {
      acc = g1_add(acc, acc);
      if (mpz_tstbit(e.get_mpz_t(), static_cast<mp_bitcnt_t>(i))) acc = g1_add(acc, pt);
    }
    return acc;
  }

  // Hash-to-field then try-and-increment, with cofactor clearing into the
  // order-r subgroup. Deterministic in (dst, msg).
  G1Point hash_to_group(const std::string& dst, const std::string& msg) const {
    for (uint32_t ctr = 0; ctr < 4096; ++ctr) {
      Bytes seed_input;
      put_string(seed_input, dst);
      put_string(seed_input, msg);
      put_u32_be(seed_input, ctr);
      Bytes seed = sha256(seed_input);
      Bytes wide;
      uint32_t block = 0;
      while (wide.size() < field_bytes_ + 16) {
        Bytes block_input = seed;
        put_u32_be(block_input, block++);
        Bytes d = sha256(block_input);
        wide.insert(wide.end(), d.begin(), d.end());
      }
      mpz_class x = mpz_from_bytes(wide) % p_;
      mpz_class t = (x * x % p_ * x + x) % p_;
      if (t == 0) continue;
      if (mpz_legendre(t.get_mpz_t(), p_.get_mpz_t()) != 1) continue;
      mpz_class y;
      mpz_powm(y.get_mpz_t(), t.get_mpz_t(), sqrt_exp_.get_mpz_t(), p_.get_mpz_t());
      if (y * y % p_ != t) continue;
      if (mpz_tstbit(y.get_mpz_t(), 0)) y = p_ - y;  // canonical even y
      G1Point pt = cofactor_mul(G1Point{x, y, false});
      if (!pt.infinity) return pt;
    }
    fail(Err::kSetupFailure, "hash_to_group exhausted counter space");
  }

  // ---- pairing ----

  Fp2 pairing(const G1Point& P, const G1Point& Q) const {
    if (P.infinity || Q.infinity) return fp2_one();
    // phi(Q) = (-x, iy); a line y - (lambda (x - xt) + yt) through T with
    // slope lambda evaluates at phi(Q) to (lambda (xq + xt) - yt) + yq * i.
    mpz_class xq = Q.x;
    mpz_class yq = Q.y;
    Fp2 f = fp2_one();
    G1Point T = P;
    long top = static_cast<long>(mpz_sizeinbase(r_.get_mpz_t(), 2));
    for (long i = top - 2; i >= 0; --i) {
      f = fp2_sqr(f);
      f = fp2_mul(f, line_value(T, T, xq, yq));
      T = g1_add(T, T);
      if (mpz_tstbit(r_.get_mpz_t(), static_cast<mp_bitcnt_t>(i))) {
        f = fp2_mul(f, line_value(T, P, xq, yq));
        T = g1_add(T, P);
      }
    }
    return final_exponentiation(f);
  }

  Fp2 gt_pow(const Fp2& g, const mpz_class& e) const {
    mpz_class k = e % r_;
    if (k < 0) k += r_;
    return fp2_pow(g, k);
  }

  // e(g, g), cached.
  const Fp2& gt_generator() const { return egg_; }

  // ---- serialization ----

  Bytes g1_to_bytes(const G1Point& pt) const {
    Bytes out;
    out.push_back(pt.infinity ? 0 : 1);
    if (!pt.infinity) {
      Bytes xb = mpz_to_bytes(pt.x, field_bytes_);
      Bytes yb = mpz_to_bytes(pt.y, field_bytes_);
      out.insert(out.end(), xb.begin(), xb.end());
      out.insert(out.end(), yb.begin(), yb.end());
    }
    return out;
  }

  G1Point g1_from_bytes(ByteReader& r) const {
    uint8_t tag = r.u8();
    if (tag == 0) return G1Point{};
    G1Point pt;
    pt.x = mpz_from_bytes(r.take(field_bytes_));
    pt.y = mpz_from_bytes(r.take(field_bytes_));
    pt.infinity = false;
    if (!on_curve(pt)) fail(Err::kFormat, "point not on curve");
    return pt;
  }

  Bytes gt_to_bytes(const Fp2& v) const {
    Bytes out = mpz_to_bytes(v.a, field_bytes_);
    Bytes bb = mpz_to_bytes(v.b, field_bytes_);
    out.insert(out.end(), bb.begin(), bb.end());
    return out;
  }

  Fp2 gt_from_bytes(ByteReader& r) const {
    Fp2 v;
    v.a = mpz_from_bytes(r.take(field_bytes_));
    v.b = mpz_from_bytes(r.take(field_bytes_));
    if (v.a >= p_ || v.b >= p_) fail(Err::kFormat, "GT element out of range");
    return v;
  }

  mpz_class random_scalar(SeededRng& rng) const { return rng.nonzero_below(r_); }

 private:
  Curve(std::string name, const char* p_hex, const char* r_hex, const char* h_hex)
      : name_(std::move(name)),
        p_(mpz_from_hex(p_hex)),
        r_(mpz_from_hex(r_hex)),
        h_(mpz_from_hex(h_hex)) {
    field_bytes_ = (mpz_sizeinbase(p_.get_mpz_t(), 2) + 7) / 8;
    sqrt_exp_ = (p_ + 1) / 4;
    g_ = hash_to_group("aerisai/generator", name_);
    egg_ = pairing(g_, g_);
  }

  G1Point cofactor_mul(const G1Point& pt) const {
    G1Point acc{};
    long top = static_cast<long>(mpz_sizeinbase(h_.get_mpz_t(), 2));
    for (long i = top - 1; i >= 0; --i) {
      acc = g1_add(acc, acc);
      if (mpz_tstbit(h_.get_mpz_t(), static_cast<mp_bitcnt_t>(i))) acc = g1_add(acc, pt);
    }
    return acc;
  }

  // Line through U, V (tangent if U == V) evaluated at phi(Q); vertical lines
  // land in F_p and are killed by final exponentiation, so return 1.
  Fp2 line_value(const G1Point& U, const G1Point& V, const mpz_class& xq,
                 const mpz_class& yq) const {
    if (U.infinity || V.infinity) return fp2_one();
    mpz_class lambda;
    if (U.x == V.x) {
      if ((U.y + V.y) % p_ == 0) return fp2_one();  // vertical
      mpz_class num = (3 * U.x * U.x + 1) % p_;
      lambda = num * fp_inv(2 * U.y % p_) % p_;
    } else {
      lambda = fp_sub(V.y, U.y) * fp_inv(fp_sub(V.x, U.x)) % p_;
    }
    mpz_class re = fp_sub(lambda * ((xq + U.x) % p_) % p_, U.y);
    return Fp2{re, yq};
  }

  Fp2 final_exponentiation(const Fp2& f) const {
    // f^(p-1) = conj(f) / f, then raise to h = (p+1)/r.
    Fp2 t = fp2_mul(fp2_conj(f), fp2_inv(f));
    return fp2_pow(t, h_);
  }

  std::string name_;
  mpz_class p_;
  mpz_class r_;
  mpz_class h_;
  mpz_class sqrt_exp_;
  size_t field_bytes_ = 0;
  G1Point g_;
  Fp2 egg_;
};

}  // namespace aerisai::pairing
