#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aerisai/common.hpp"
#include "aerisai/fixed_point.hpp"
#include "aerisai/rng.hpp"

// Paillier cryptosystem over n = p1*p2 with h = n + 1:
//   Enc(m)        = rho^n * h^m  mod n^2
//   Dec(c)        = L(c^tau mod n^2) * mu  mod n,  L(x) = (x-1)/n
//   Add(c1, c2)   = c1 * c2      mod n^2   (plaintexts add)
//   Multiply(c,k) = c^k          mod n^2   (plaintext times k)
// tau = lcm(p1-1, p2-1), mu = L(h^tau mod n^2)^-1 mod n.

namespace aerisai::paillier {

inline Bytes mpz_to_bytes(const mpz_class& v, size_t width) {
  Bytes out(width, 0);
  size_t count = 0;
  mpz_export(out.data() + (width - (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8), &count, 1, 1, 1,
             0, v.get_mpz_t());
  return out;
}

inline mpz_class mpz_from_bytes(const Bytes& b) {
  mpz_class v;
  mpz_import(v.get_mpz_t(), b.size(), 1, 1, 1, 0, b.data());
  return v;
}

inline mpz_class mpz_from_hex(const std::string& hex) {
  mpz_class v;
  if (v.set_str(hex, 16) != 0) fail(Err::kFormat, "bad hex integer");
  return v;
}

// How encryption samples the randomizer rho.
//   kFull: rho uniform in Z_n^* and raised to the n-th power per encryption.
//   kFixedBase: rho = u^e for a per-key base u = rho0^n and a short random
//     exponent e; same ciphertext form, subgroup-sampled randomness. Much
//     cheaper, used by the experiment harness where millions of encryptions
//     occur per run.
enum class RandomizerMode : uint8_t { kFull = 0, kFixedBase = 1 };

namespace detail {

// Precomputed radix-256 table for fixed-base exponentiation mod n^2.
struct FixedBaseTable {
  // table[w][d-1] = base^(d * 256^w) for d in 1..255.
  std::vector<std::array<mpz_class, 255>> windows;
  mpz_class modulus;

  static FixedBaseTable build(const mpz_class& base, const mpz_class& modulus,
                              unsigned exponent_bits) {
    FixedBaseTable t;
    t.modulus = modulus;
    unsigned n_windows = (exponent_bits + 7) / 8;
    t.windows.resize(n_windows);
    mpz_class cur = base % modulus;
    for (unsigned w = 0; w < n_windows; ++w) {
      mpz_class acc = 1;
      for (int d = 0; d < 255; ++d) {
        acc = acc * cur % modulus;
        t.windows[w][static_cast<size_t>(d)] = acc;
      }
      // advance cur to base^(256^(w+1))
      cur = t.windows[w][254] * cur % modulus;
    }
    return t;
  }

  mpz_class pow(const mpz_class& e) const {
    mpz_class acc = 1;
    size_t nlimbs = mpz_size(e.get_mpz_t());
    const mp_limb_t* limbs = mpz_limbs_read(e.get_mpz_t());
    size_t w = 0;
    for (size_t limb = 0; limb < nlimbs; ++limb) {
      mp_limb_t v = limbs[limb];
      for (int shift = 0; shift < 64; shift += 8, ++w) {
        unsigned d = (v >> shift) & 0xff;
        if (d != 0) {
          if (w >= windows.size()) fail(Err::kOverflow, "exponent exceeds table");
          acc = acc * windows[w][d - 1] % modulus;
        }
      }
    }
    return acc;
  }
};

}  // namespace detail

class PaillierPublicKey {
 public:
  PaillierPublicKey() = default;
  PaillierPublicKey(mpz_class n, unsigned key_bits, RandomizerMode mode = RandomizerMode::kFull)
      : n_(std::move(n)),
        n_squared_(n_ * n_),
        h_(n_ + 1),
        key_bits_(key_bits),
        mode_(mode),
        key_id_(fingerprint64(mpz_to_bytes(n_, ciphertext_width()))) {}

  const mpz_class& n() const { return n_; }
  const mpz_class& n_squared() const { return n_squared_; }
  const mpz_class& h() const { return h_; }
  unsigned key_bits() const { return key_bits_; }
  uint64_t key_id() const { return key_id_; }
  RandomizerMode randomizer_mode() const { return mode_; }

  // Fixed-width big-endian ciphertext serialization, ceil(2*key_bits/8) bytes.
  size_t ciphertext_width() const { return (2 * key_bits_ + 7) / 8; }

  // Installs the fixed-base randomizer table; base_seed feeds rho0.
  void enable_fixed_base(SeededRng& rng) {
    mpz_class rho0 = sample_unit(rng);
    mpz_class u;
    mpz_powm(u.get_mpz_t(), rho0.get_mpz_t(), n_.get_mpz_t(), n_squared_.get_mpz_t());
    fixed_base_ = std::make_shared<detail::FixedBaseTable>(
        detail::FixedBaseTable::build(u, n_squared_, kShortExponentBits));
    mode_ = RandomizerMode::kFixedBase;
  }

  mpz_class sample_unit(SeededRng& rng) const {
    for (;;) {
      mpz_class rho = rng.nonzero_below(n_);
      mpz_class g;
      mpz_gcd(g.get_mpz_t(), rho.get_mpz_t(), n_.get_mpz_t());
      if (g == 1) return rho;
    }
  }

  // rho^n mod n^2 (or the fixed-base equivalent).
  mpz_class randomizer(SeededRng& rng) const {
    if (mode_ == RandomizerMode::kFixedBase && fixed_base_) {
      mpz_class e = rng.bits(kShortExponentBits);
      return fixed_base_->pow(e);
    }
    mpz_class rho = sample_unit(rng);
    mpz_class out;
    mpz_powm(out.get_mpz_t(), rho.get_mpz_t(), n_.get_mpz_t(), n_squared_.get_mpz_t());
    return out;
  }

  static constexpr unsigned kShortExponentBits = 272;

 private:
  mpz_class n_;
  mpz_class n_squared_;
  mpz_class h_;
  unsigned key_bits_ = 0;
  RandomizerMode mode_ = RandomizerMode::kFull;
  uint64_t key_id_ = 0;
  std::shared_ptr<detail::FixedBaseTable> fixed_base_;
};

class PaillierPrivateKey {
 public:
  PaillierPrivateKey() = default;
  PaillierPrivateKey(mpz_class tau, mpz_class mu, mpz_class n)
      : tau_(std::move(tau)), mu_(std::move(mu)), n_(std::move(n)), n_squared_(n_ * n_) {}

  const mpz_class& tau() const { return tau_; }
  const mpz_class& mu() const { return mu_; }
  const mpz_class& n() const { return n_; }
  const mpz_class& n_squared() const { return n_squared_; }

  // CRT residues speed decryption up ~3x; they are an in-memory acceleration
  // only and are never serialized (the key file stays {tau, mu, n}).
  void enable_crt(const mpz_class& p1, const mpz_class& p2) {
    p_ = p1;
    q_ = p2;
    p2_ = p1 * p1;
    q2_ = p2 * p2;
    // hp = L_p(h^(p-1) mod p^2)^-1 mod p with L_p(x) = (x-1)/p, and likewise q.
    mpz_class h = n_ + 1;
    mpz_class tp;
    mpz_class pm1 = p_ - 1;
    mpz_powm(tp.get_mpz_t(), h.get_mpz_t(), pm1.get_mpz_t(), p2_.get_mpz_t());
    mpz_class lp = (tp - 1) / p_;
    mpz_invert(hp_.get_mpz_t(), lp.get_mpz_t(), p_.get_mpz_t());
    mpz_class tq;
    mpz_class qm1 = q_ - 1;
    mpz_powm(tq.get_mpz_t(), h.get_mpz_t(), qm1.get_mpz_t(), q2_.get_mpz_t());
    mpz_class lq = (tq - 1) / q_;
    mpz_invert(hq_.get_mpz_t(), lq.get_mpz_t(), q_.get_mpz_t());
    mpz_invert(p_inv_q_.get_mpz_t(), p_.get_mpz_t(), q_.get_mpz_t());
    crt_ = true;
  }

  bool has_crt() const { return crt_; }

  mpz_class decrypt_value(const mpz_class& c) const {
    if (crt_) {
      mpz_class mp = half_decrypt(c, p_, p2_, hp_);
      mpz_class mq = half_decrypt(c, q_, q2_, hq_);
      // Garner recombination.
      mpz_class diff = (mq - mp) % q_;
      if (diff < 0) diff += q_;
      mpz_class t = diff * p_inv_q_ % q_;
      return mp + t * p_;
    }
    mpz_class x;
    mpz_powm(x.get_mpz_t(), c.get_mpz_t(), tau_.get_mpz_t(), n_squared_.get_mpz_t());
    mpz_class l = (x - 1) / n_;
    return l * mu_ % n_;
  }

 private:
  static mpz_class half_decrypt(const mpz_class& c, const mpz_class& p, const mpz_class& p2,
                                const mpz_class& hp) {
    mpz_class x;
    mpz_class e = p - 1;
    mpz_class cr = c % p2;
    mpz_powm(x.get_mpz_t(), cr.get_mpz_t(), e.get_mpz_t(), p2.get_mpz_t());
    mpz_class l = (x - 1) / p;
    return l * hp % p;
  }

  mpz_class tau_;
  mpz_class mu_;
  mpz_class n_;
  mpz_class n_squared_;
  bool crt_ = false;
  mpz_class p_, q_, p2_, q2_, hp_, hq_, p_inv_q_;
};

struct PaillierCiphertext {
  mpz_class value;
  uint64_t key_id = 0;
};

struct PaillierKeypair {
  PaillierPublicKey pk;
  PaillierPrivateKey sk;
};

namespace detail {

// 64-round Miller-Rabin with bases drawn from the caller's rng.
inline bool probably_prime(const mpz_class& n, SeededRng& rng, int rounds = 64) {
  if (n < 2) return false;
  for (unsigned long sp : {2ul, 3ul, 5ul, 7ul, 11ul, 13ul, 17ul, 19ul, 23ul, 29ul, 31ul, 37ul}) {
    if (mpz_cmp_ui(n.get_mpz_t(), sp) == 0) return true;
    if (mpz_divisible_ui_p(n.get_mpz_t(), sp)) return false;
  }
  mpz_class d = n - 1;
  unsigned long r = mpz_scan1(d.get_mpz_t(), 0);
  mpz_tdiv_q_2exp(d.get_mpz_t(), d.get_mpz_t(), r);
  mpz_class nm1 = n - 1;
  for (int i = 0; i < rounds; ++i) {
    mpz_class a = 2 + rng.below(n - 3);
    mpz_class x;
    mpz_powm(x.get_mpz_t(), a.get_mpz_t(), d.get_mpz_t(), n.get_mpz_t());
    if (x == 1 || x == nm1) continue;
    bool witness = true;
    for (unsigned long j = 1; j < r; ++j) {
      x = x * x % n;
      if (x == nm1) {
        witness = false;
        break;
      }
    }
    if (witness) return false;
  }
  return true;
}

inline mpz_class random_prime(unsigned bits, SeededRng& rng, int max_tries = 100000) {
  for (int t = 0; t < max_tries; ++t) {
    mpz_class cand = rng.bits(bits);
    mpz_setbit(cand.get_mpz_t(), bits - 1);
    mpz_setbit(cand.get_mpz_t(), bits - 2);  // top two bits: product has full width
    mpz_setbit(cand.get_mpz_t(), 0);
    if (probably_prime(cand, rng)) return cand;
  }
  fail(Err::kSetupFailure, "prime generation exceeded retry budget");
}

}  // namespace detail

inline bool valid_key_bits(unsigned key_bits) {
  return key_bits == 1024 || key_bits == 2048 || key_bits == 3072;
}

inline PaillierKeypair keypair_from_primes(const mpz_class& p1, const mpz_class& p2,
                                           unsigned key_bits,
                                           RandomizerMode mode = RandomizerMode::kFull) {
  mpz_class n = p1 * p2;
  mpz_class n2 = n * n;
  mpz_class h = n + 1;
  mpz_class tau;
  mpz_class pm1 = p1 - 1, qm1 = p2 - 1;
  mpz_lcm(tau.get_mpz_t(), pm1.get_mpz_t(), qm1.get_mpz_t());
  mpz_class ht;
  mpz_powm(ht.get_mpz_t(), h.get_mpz_t(), tau.get_mpz_t(), n2.get_mpz_t());
  mpz_class l = (ht - 1) / n;
  mpz_class mu;
  if (mpz_invert(mu.get_mpz_t(), l.get_mpz_t(), n.get_mpz_t()) == 0)
    fail(Err::kSetupFailure, "L(h^tau) not invertible mod n");
  PaillierKeypair kp;
  kp.pk = PaillierPublicKey(n, key_bits, mode);
  kp.sk = PaillierPrivateKey(tau, mu, n);
  kp.sk.enable_crt(p1, p2);
  return kp;
}

inline PaillierKeypair paillier_setup(unsigned key_bits, SeededRng& rng,
                                      RandomizerMode mode = RandomizerMode::kFull) {
  if (!valid_key_bits(key_bits)) fail(Err::kSetupFailure, "key_bits must be 1024, 2048 or 3072");
  mpz_class p1 = detail::random_prime(key_bits / 2, rng);
  mpz_class p2;
  do {
    p2 = detail::random_prime(key_bits / 2, rng);
  } while (p2 == p1);
  PaillierKeypair kp = keypair_from_primes(p1, p2, key_bits, mode);
  if (mpz_sizeinbase(kp.pk.n().get_mpz_t(), 2) != key_bits)
    fail(Err::kSetupFailure, "modulus width mismatch");
  if (mode == RandomizerMode::kFixedBase) {
    SeededRng base_rng = rng.fork(0x66697862617365ULL);  // per-key randomizer base
    kp.pk.enable_fixed_base(base_rng);
  }
  return kp;
}

// Test-only toy keys (e.g. p1=5, p2=7) for hand-checkable vectors; key_bits
// records the modulus width so serialization stays consistent.
inline PaillierKeypair toy_keypair(unsigned long p1, unsigned long p2) {
  mpz_class a(static_cast<long>(p1)), b(static_cast<long>(p2));
  mpz_class n = a * b;
  return keypair_from_primes(a, b, static_cast<unsigned>(mpz_sizeinbase(n.get_mpz_t(), 2)));
}

inline PaillierCiphertext encrypt(const PaillierPublicKey& pk, const mpz_class& m,
                                  SeededRng& rng) {
  if (m < 0 || m >= pk.n()) fail(Err::kPlaintextRange, "plaintext outside [0, n)");
  // h^m = (1+n)^m = 1 + m*n mod n^2.
  mpz_class hm = (1 + m * pk.n()) % pk.n_squared();
  mpz_class c = pk.randomizer(rng) * hm % pk.n_squared();
  return PaillierCiphertext{c, pk.key_id()};
}

inline mpz_class decrypt_value(const PaillierPrivateKey& sk, const mpz_class& value) {
  return sk.decrypt_value(value);
}

inline mpz_class decrypt(const PaillierPublicKey& pk, const PaillierPrivateKey& sk,
                         const PaillierCiphertext& ct) {
  if (ct.key_id != pk.key_id()) fail(Err::kKeyMismatch, "ciphertext bound to a different key");
  if (sk.n() != pk.n()) fail(Err::kKeyMismatch, "private key does not match public key");
  return sk.decrypt_value(ct.value);
}

inline PaillierCiphertext add(const PaillierPublicKey& pk, const PaillierCiphertext& a,
                              const PaillierCiphertext& b) {
  if (a.key_id != b.key_id || a.key_id != pk.key_id())
    fail(Err::kKeyMismatch, "cannot add ciphertexts under different keys");
  return PaillierCiphertext{a.value * b.value % pk.n_squared(), a.key_id};
}

inline PaillierCiphertext scalar_mul(const PaillierPublicKey& pk, const PaillierCiphertext& ct,
                                     const mpz_class& k) {
  if (ct.key_id != pk.key_id()) fail(Err::kKeyMismatch, "ciphertext bound to a different key");
  if (k < 0 || k >= pk.n()) fail(Err::kPlaintextRange, "scalar outside [0, n)");
  mpz_class out;
  mpz_powm(out.get_mpz_t(), ct.value.get_mpz_t(), k.get_mpz_t(), pk.n_squared().get_mpz_t());
  return PaillierCiphertext{out, ct.key_id};
}

inline PaillierCiphertext scalar_mul(const PaillierPublicKey& pk, const PaillierCiphertext& ct,
                                     uint64_t k) {
  return scalar_mul(pk, ct, mpz_class(static_cast<unsigned long>(k)));
}

// ---- vector lifts (encode ∘ encrypt, decrypt ∘ decode) ----

using CiphertextVector = std::vector<PaillierCiphertext>;

inline CiphertextVector encrypt_vector(const PaillierPublicKey& pk,
                                       const std::vector<double>& xs,
                                       const FixedPointCodec& codec, SeededRng& rng) {
  std::vector<mpz_class> encoded(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    try {
      encoded[i] = codec.encode(xs[i]);
    } catch (const Error& e) {
      fail(e.code(), "element " + std::to_string(i) + ": " + e.what());
    }
  }
  // Pre-fork per-element rngs so the parallel map is order-independent.
  std::vector<uint64_t> seeds(xs.size());
  for (size_t i = 0; i < seeds.size(); ++i) seeds[i] = rng.next_u64();
  CiphertextVector out(xs.size());
  parallel_for(xs.size(), [&](size_t i) {
    SeededRng r(seeds[i]);
    out[i] = encrypt(pk, encoded[i], r);
  });
  return out;
}

inline std::vector<mpz_class> decrypt_vector_raw(const PaillierPublicKey& pk,
                                                 const PaillierPrivateKey& sk,
                                                 const CiphertextVector& cts) {
  std::vector<mpz_class> out(cts.size());
  parallel_for(cts.size(), [&](size_t i) { out[i] = decrypt(pk, sk, cts[i]); });
  return out;
}

inline std::vector<double> decrypt_vector(const PaillierPublicKey& pk,
                                          const PaillierPrivateKey& sk,
                                          const CiphertextVector& cts,
                                          const FixedPointCodec& codec,
                                          unsigned scale_bits) {
  std::vector<mpz_class> raw = decrypt_vector_raw(pk, sk, cts);
  std::vector<double> out(raw.size());
  for (size_t i = 0; i < raw.size(); ++i) out[i] = codec.decode_at(raw[i], scale_bits);
  return out;
}

inline std::vector<double> decrypt_vector(const PaillierPublicKey& pk,
                                          const PaillierPrivateKey& sk,
                                          const CiphertextVector& cts,
                                          const FixedPointCodec& codec) {
  return decrypt_vector(pk, sk, cts, codec, codec.scale_bits());
}

// ---- serialization ----

// Ciphertext vector wire format: key_id(8) | count(4) | fixed-width values.
inline Bytes serialize_ciphertext_vector(const PaillierPublicKey& pk,
                                         const CiphertextVector& cts) {
  Bytes out;
  size_t width = pk.ciphertext_width();
  out.reserve(12 + cts.size() * width);
  put_u64_be(out, pk.key_id());
  put_u32_be(out, static_cast<uint32_t>(cts.size()));
  for (const auto& ct : cts) {
    if (ct.key_id != pk.key_id()) fail(Err::kKeyMismatch, "vector element under different key");
    Bytes v = mpz_to_bytes(ct.value, width);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

inline CiphertextVector parse_ciphertext_vector(const PaillierPublicKey& pk, const Bytes& data) {
  ByteReader r(data);
  uint64_t key_id = r.u64_be();
  if (key_id != pk.key_id()) fail(Err::kKeyMismatch, "serialized vector under different key");
  uint32_t count = r.u32_be();
  size_t width = pk.ciphertext_width();
  if (r.remaining() != static_cast<size_t>(count) * width)
    fail(Err::kFormat, "ciphertext vector length mismatch");
  CiphertextVector out(count);
  for (uint32_t i = 0; i < count; ++i) {
    out[i].value = mpz_from_bytes(r.take(width));
    out[i].key_id = key_id;
    if (out[i].value >= pk.n_squared()) fail(Err::kFormat, "ciphertext out of range");
  }
  return out;
}

inline uint64_t peek_vector_key_id(const Bytes& data) {
  ByteReader r(data);
  return r.u64_be();
}

// Key files: public {n, key_bits, key_id}, private {tau, mu, n}; private keys
// never enter ledger storage.
inline std::string public_key_json(const PaillierPublicKey& pk) {
  return std::string("{\n  \"n\": \"") + pk.n().get_str(16) +
         "\",\n  \"key_bits\": " + std::to_string(pk.key_bits()) +
         ",\n  \"key_id\": \"" + to_hex([&] {
           Bytes b;
           put_u64_be(b, pk.key_id());
           return b;
         }()) +
         "\"\n}\n";
}

inline std::string private_key_json(const PaillierPrivateKey& sk) {
  return std::string("{\n  \"tau\": \"") + sk.tau().get_str(16) + "\",\n  \"mu\": \"" +
         sk.mu().get_str(16) + "\",\n  \"n\": \"" + sk.n().get_str(16) + "\"\n}\n";
}

}  // namespace aerisai::paillier
