#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "aerisai/common.hpp"
#include "aerisai/cpabe.hpp"
#include "aerisai/paillier.hpp"
#include "aerisai/rng.hpp"
#include "aerisai/symwrap.hpp"

// The blockchain-oracle role (workflow S5): decrypt the aggregated noise with
// SK_o, seal it under a fresh session key, wrap that key under a CP-ABE
// policy, and broadcast one message that serves every authorized client. The
// oracle holds SK_o and the CP-ABE public parameters only; SK_c never enters
// this type.

namespace aerisai::oracle {

struct NoiseBroadcast {
  uint64_t round = 0;
  symwrap::SealedNoise sealed;
  cpabe::CpabeCiphertext wrapped_key;
  std::string policy_text;
};

// Wire format: version | round | policy_text (length-prefixed UTF-8) |
// wrapped_key | sealed.
inline constexpr uint8_t kBroadcastWireVersion = 1;

inline Bytes serialize_broadcast(const pairing::Curve& curve, const NoiseBroadcast& b) {
  Bytes out;
  out.push_back(kBroadcastWireVersion);
  put_u64_be(out, b.round);
  put_string(out, b.policy_text);
  put_blob(out, cpabe::serialize_ciphertext(curve, b.wrapped_key));
  put_blob(out, symwrap::serialize_sealed(b.sealed));
  return out;
}

inline NoiseBroadcast parse_broadcast(const Bytes& data) {
  ByteReader r(data);
  if (r.u8() != kBroadcastWireVersion) fail(Err::kFormat, "unknown broadcast version");
  NoiseBroadcast b;
  b.round = r.u64_be();
  b.policy_text = take_string(r);
  b.wrapped_key = cpabe::parse_ciphertext(take_blob(r));
  b.sealed = symwrap::parse_sealed(take_blob(r));
  if (!r.done()) fail(Err::kFormat, "trailing bytes after broadcast");
  return b;
}

class Oracle {
 public:
  Oracle(paillier::PaillierPublicKey ppk_o, paillier::PaillierPrivateKey sk_o,
         cpabe::CpabePublicParams abe_pk, uint64_t rng_seed)
      : ppk_o_(std::move(ppk_o)), sk_o_(std::move(sk_o)), abe_pk_(std::move(abe_pk)),
        rng_(rng_seed) {
    if (sk_o_.n() != ppk_o_.n()) fail(Err::kKeyMismatch, "oracle keypair mismatch");
  }

  const paillier::PaillierPublicKey& ppk_o() const { return ppk_o_; }
  const paillier::PaillierPrivateKey& sk_o() const { return sk_o_; }
  const cpabe::CpabePublicParams& abe_pk() const { return abe_pk_; }

  // zeta_G = decode(Dec_SKo(ct_noise)); SEK fresh per round; one broadcast
  // serves the whole roster.
  NoiseBroadcast process_noise_request(const paillier::CiphertextVector& ct_noise,
                                       const paillier::FixedPointCodec& codec,
                                       unsigned scale_bits, const std::string& policy_text,
                                       uint64_t round) {
    for (const auto& ct : ct_noise)
      if (ct.key_id != ppk_o_.key_id())
        fail(Err::kKeyMismatch, "noise ciphertext not under the oracle key");
    cpabe::AccessTree policy = cpabe::parse_policy(policy_text);
    std::vector<double> noise =
        paillier::decrypt_vector(ppk_o_, sk_o_, ct_noise, codec, scale_bits);
    SeededRng round_rng = rng_.fork(round);
    auto [wrapped, sek_bytes] = cpabe::encrypt(abe_pk_, policy, round_rng);
    symwrap::SessionKey sek(sek_bytes);
    NoiseBroadcast b;
    b.round = round;
    b.sealed = symwrap::seal(sek, noise, round, round_rng);
    b.wrapped_key = std::move(wrapped);
    b.policy_text = policy_text;
    return b;
  }

 private:
  paillier::PaillierPublicKey ppk_o_;
  paillier::PaillierPrivateKey sk_o_;
  cpabe::CpabePublicParams abe_pk_;
  SeededRng rng_;
};

// One CP-ABE broadcast serves any roster size; the unicast alternative sends
// one sealed copy per client. The harness reports the delta.
inline size_t broadcast_cost_model(size_t /*n_clients*/) { return 1; }
inline size_t unicast_cost_model(size_t n_clients) { return n_clients; }

}  // namespace aerisai::oracle
