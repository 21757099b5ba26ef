#pragma once

#include <openssl/crypto.h>
#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <vector>

#include "aerisai/common.hpp"
#include "aerisai/rng.hpp"

// Session-key generation and authenticated sealing of the aggregated noise
// vector. AEAD (AES-256-GCM) rather than bare AES: an unauthenticated mode
// would let a relay corrupt the broadcast noise and silently break exact
// cancellation. Nonce = round counter (8 bytes) || 4 random bytes.

namespace aerisai::symwrap {

class SessionKey {
 public:
  static constexpr size_t kBytes = 32;

  SessionKey() : bytes_{} {}
  explicit SessionKey(const std::array<uint8_t, kBytes>& bytes) : bytes_(bytes) {}

  ~SessionKey() { OPENSSL_cleanse(bytes_.data(), bytes_.size()); }

  SessionKey(const SessionKey&) = default;
  SessionKey& operator=(const SessionKey&) = default;

  const std::array<uint8_t, kBytes>& bytes() const { return bytes_; }

  bool operator==(const SessionKey& o) const {
    return CRYPTO_memcmp(bytes_.data(), o.bytes_.data(), kBytes) == 0;
  }

 private:
  std::array<uint8_t, kBytes> bytes_;
};

inline SessionKey gen_session_key(SeededRng& rng) {
  std::array<uint8_t, SessionKey::kBytes> b{};
  Bytes raw = rng.bytes(SessionKey::kBytes);
  if (raw.size() != SessionKey::kBytes) fail(Err::kEntropyFailure, "short key material");
  std::copy(raw.begin(), raw.end(), b.begin());
  return SessionKey(b);
}

struct SealedNoise {
  uint64_t round = 0;
  std::array<uint8_t, 12> nonce{};
  Bytes ciphertext;
  std::array<uint8_t, 16> auth_tag{};
};

namespace detail {

// Canonical plaintext: count (u32 LE) then little-endian 64-bit floats.
inline Bytes serialize_doubles(const std::vector<double>& xs) {
  Bytes out(4 + xs.size() * 8);
  uint32_t count = static_cast<uint32_t>(xs.size());
  std::memcpy(out.data(), &count, 4);
  std::memcpy(out.data() + 4, xs.data(), xs.size() * 8);
  return out;
}

inline std::vector<double> parse_doubles(const Bytes& data) {
  if (data.size() < 4) fail(Err::kFormat, "short noise plaintext");
  uint32_t count = 0;
  std::memcpy(&count, data.data(), 4);
  if (data.size() != 4 + static_cast<size_t>(count) * 8)
    fail(Err::kFormat, "noise plaintext length mismatch");
  std::vector<double> out(count);
  std::memcpy(out.data(), data.data() + 4, static_cast<size_t>(count) * 8);
  return out;
}

struct EvpCtx {
  EVP_CIPHER_CTX* ctx;
  EvpCtx() : ctx(EVP_CIPHER_CTX_new()) {
    if (!ctx) fail(Err::kEntropyFailure, "EVP context allocation failed");
  }
  ~EvpCtx() { EVP_CIPHER_CTX_free(ctx); }
};

}  // namespace detail

inline SealedNoise seal(const SessionKey& key, const std::vector<double>& noise,
                        uint64_t round, SeededRng& rng) {
  SealedNoise out;
  out.round = round;
  for (int i = 0; i < 8; ++i)
    out.nonce[static_cast<size_t>(i)] = static_cast<uint8_t>(round >> (8 * (7 - i)));
  Bytes tail = rng.bytes(4);
  std::copy(tail.begin(), tail.end(), out.nonce.begin() + 8);

  Bytes plain = detail::serialize_doubles(noise);
  out.ciphertext.resize(plain.size());
  detail::EvpCtx c;
  if (EVP_EncryptInit_ex(c.ctx, EVP_aes_256_gcm(), nullptr, key.bytes().data(),
                         out.nonce.data()) != 1)
    fail(Err::kIntegrityFailure, "AEAD init failed");
  int len = 0;
  if (EVP_EncryptUpdate(c.ctx, out.ciphertext.data(), &len, plain.data(),
                        static_cast<int>(plain.size())) != 1)
    fail(Err::kIntegrityFailure, "AEAD encrypt failed");
  int fin = 0;
  if (EVP_EncryptFinal_ex(c.ctx, out.ciphertext.data() + len, &fin) != 1)
    fail(Err::kIntegrityFailure, "AEAD finalize failed");
  if (EVP_CIPHER_CTX_ctrl(c.ctx, EVP_CTRL_GCM_GET_TAG, 16, out.auth_tag.data()) != 1)
    fail(Err::kIntegrityFailure, "AEAD tag extraction failed");
  return out;
}

inline std::vector<double> open(const SessionKey& key, const SealedNoise& sealed) {
  detail::EvpCtx c;
  if (EVP_DecryptInit_ex(c.ctx, EVP_aes_256_gcm(), nullptr, key.bytes().data(),
                         sealed.nonce.data()) != 1)
    fail(Err::kIntegrityFailure, "AEAD init failed");
  Bytes plain(sealed.ciphertext.size());
  int len = 0;
  if (EVP_DecryptUpdate(c.ctx, plain.data(), &len, sealed.ciphertext.data(),
                        static_cast<int>(sealed.ciphertext.size())) != 1)
    fail(Err::kIntegrityFailure, "AEAD decrypt failed");
  std::array<uint8_t, 16> tag = sealed.auth_tag;
  if (EVP_CIPHER_CTX_ctrl(c.ctx, EVP_CTRL_GCM_SET_TAG, 16, tag.data()) != 1)
    fail(Err::kIntegrityFailure, "AEAD tag set failed");
  int fin = 0;
  if (EVP_DecryptFinal_ex(c.ctx, plain.data() + len, &fin) != 1)
    fail(Err::kIntegrityFailure, "authentication tag mismatch");
  return detail::parse_doubles(plain);
}

// Wire format: version(1) | round(8) | nonce(12) | len(4) | ciphertext |
// tag(16), integers big-endian.
inline constexpr uint8_t kSealedWireVersion = 1;

inline Bytes serialize_sealed(const SealedNoise& sealed) {
  Bytes out;
  out.push_back(kSealedWireVersion);
  put_u64_be(out, sealed.round);
  out.insert(out.end(), sealed.nonce.begin(), sealed.nonce.end());
  put_u32_be(out, static_cast<uint32_t>(sealed.ciphertext.size()));
  out.insert(out.end(), sealed.ciphertext.begin(), sealed.ciphertext.end());
  out.insert(out.end(), sealed.auth_tag.begin(), sealed.auth_tag.end());
  return out;
}

inline SealedNoise parse_sealed(ByteReader& r) {
  if (r.u8() != kSealedWireVersion) fail(Err::kFormat, "unknown sealed-noise version");
  SealedNoise out;
  out.round = r.u64_be();
  Bytes nonce = r.take(12);
  std::copy(nonce.begin(), nonce.end(), out.nonce.begin());
  out.ciphertext = r.take(r.u32_be());
  Bytes tag = r.take(16);
  std::copy(tag.begin(), tag.end(), out.auth_tag.begin());
  return out;
}

inline SealedNoise parse_sealed(const Bytes& data) {
  ByteReader r(data);
  SealedNoise out = parse_sealed(r);
  if (!r.done()) fail(Err::kFormat, "trailing bytes after sealed noise");
  return out;
}

}  // namespace aerisai::symwrap
