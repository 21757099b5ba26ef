#pragma once

#include <openssl/sha.h>

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace aerisai {

using Bytes = std::vector<uint8_t>;

enum class Err {
  kSetupFailure,
  kPlaintextRange,
  kKeyMismatch,
  kOverflow,
  kDimensionMismatch,
  kInvalidAttributes,
  kPolicySyntax,
  kPolicyUnsatisfied,
  kIntegrityFailure,
  kEntropyFailure,
  kTxTooLarge,
  kDuplicateUpload,
  kUnauthorized,
  kNotReady,
  kAuditFailure,
  kFormat,
  kAccessDenied,
  kEmptyDataset,
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Err code() const { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& what) { throw Error(code, what); }

// ---- byte/hex helpers ----

inline std::string to_hex(const Bytes& b) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(b.size() * 2);
  for (uint8_t v : b) {
    out.push_back(digits[v >> 4]);
    out.push_back(digits[v & 0xf]);
  }
  return out;
}

inline Bytes from_hex(const std::string& s) {
  if (s.size() % 2 != 0) fail(Err::kFormat, "hex string has odd length");
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    fail(Err::kFormat, "bad hex digit");
  };
  Bytes out(s.size() / 2);
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<uint8_t>((nib(s[2 * i]) << 4) | nib(s[2 * i + 1]));
  return out;
}

inline void put_u32_be(Bytes& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

inline void put_u64_be(Bytes& out, uint64_t v) {
  for (int i = 7; i >= 0; --i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

// Cursor over a serialized buffer; all reads bounds-checked.
class ByteReader {
 public:
  explicit ByteReader(const Bytes& data) : data_(data) {}
  size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

  uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  uint32_t u32_be() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_++];
    return v;
  }
  uint64_t u64_be() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | data_[pos_++];
    return v;
  }
  Bytes take(size_t n) {
    need(n);
    Bytes out(data_.begin() + static_cast<long>(pos_), data_.begin() + static_cast<long>(pos_ + n));
    pos_ += n;
    return out;
  }

 private:
  void need(size_t n) const {
    if (pos_ + n > data_.size()) fail(Err::kFormat, "truncated buffer");
  }
  const Bytes& data_;
  size_t pos_ = 0;
};

inline void put_blob(Bytes& out, const Bytes& blob) {
  put_u32_be(out, static_cast<uint32_t>(blob.size()));
  out.insert(out.end(), blob.begin(), blob.end());
}

inline Bytes take_blob(ByteReader& r) { return r.take(r.u32_be()); }

inline void put_string(Bytes& out, const std::string& s) {
  put_u32_be(out, static_cast<uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

inline std::string take_string(ByteReader& r) {
  Bytes b = r.take(r.u32_be());
  return std::string(b.begin(), b.end());
}

// ---- hashing ----

inline Bytes sha256(const uint8_t* data, size_t len) {
  Bytes digest(SHA256_DIGEST_LENGTH);
  SHA256(data, len, digest.data());
  return digest;
}

inline Bytes sha256(const Bytes& data) { return sha256(data.data(), data.size()); }

inline Bytes sha256(const std::string& data) {
  return sha256(reinterpret_cast<const uint8_t*>(data.data()), data.size());
}

inline uint64_t fingerprint64(const Bytes& data) {
  Bytes d = sha256(data);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | d[static_cast<size_t>(i)];
  return v;
}

// ---- parallel map ----

// Runs fn(i) for i in [0, n) across worker threads. Callers must make fn(i)
// independent of execution order (pre-derive any per-item randomness).
inline void parallel_for(size_t n, const std::function<void(size_t)>& fn) {
  unsigned workers = std::thread::hardware_concurrency();
  if (workers < 2 || n < 2) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  workers = std::min<unsigned>(workers, static_cast<unsigned>(n));
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failed.load()) std::rethrow_exception(first_error);
}

}  // namespace aerisai
