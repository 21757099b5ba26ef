#pragma once

#include <gmpxx.h>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "aerisai/common.hpp"
#include "aerisai/pairing.hpp"
#include "aerisai/policy.hpp"
#include "aerisai/rng.hpp"

// Ciphertext-policy ABE over the symmetric pairing:
//   Setup:   PK = (g, Q = g^beta, e(g,g)^alpha),  MK = (beta, g^alpha)
//   KeyGen:  S = g^((alpha + r) / beta);  per attribute i:
//            S_i = g^r * H(i)^(r_i),  S'_i = g^(r_i)
//   Encrypt: secret s shared down the policy tree (l_R(0) = s, node
//            polynomials of degree q_x - 1, child share l_parent(index));
//            C~ = M * e(g,g)^(alpha s),  C = Q^s,  per leaf f:
//            C_f = g^(l_f(0)),  C'_f = H(attr(f))^(l_f(0))
//   Decrypt: leaf: e(S_j, C_f) / e(S'_j, C'_f) = e(g,g)^(r l_f(0));
//            gates interpolate q_x child values with Lagrange coefficients;
//            root yields e(g,g)^(rs) and C~ * e(g,g)^(rs) / e(C, S) = M.
// Key material is KEM-style: M is a random GT element and the session key is
// a hash of its canonical serialization.

namespace aerisai::cpabe {

using pairing::Curve;
using pairing::Fp2;
using pairing::G1Point;

inline constexpr const char* kAttributeHashDst = "aerisai/attr";
inline constexpr const char* kKemDst = "aerisai/kem";

struct CpabePublicParams {
  const Curve* curve = nullptr;
  G1Point g;
  G1Point Q;          // g^beta
  Fp2 egg_alpha;      // e(g,g)^alpha
};

struct CpabeMasterKey {
  mpz_class beta;
  G1Point g_alpha;  // g^alpha
};

struct CpabeUserKey {
  G1Point S;  // g^((alpha + r) / beta)
  struct AttrKey {
    G1Point S_i;        // g^r * H(i)^(r_i)
    G1Point S_i_prime;  // g^(r_i)
  };
  std::map<std::string, AttrKey> per_attribute;
  std::unordered_set<std::string> attribute_set;
};

struct CpabeCiphertext {
  AccessTree policy;
  Fp2 c_tilde;  // M * e(g,g)^(alpha s)
  G1Point c;    // Q^s
  struct LeafCt {
    G1Point c_f;        // g^(l_f(0))
    G1Point c_f_prime;  // H(attr)^(l_f(0))
  };
  std::vector<LeafCt> leaves;  // preorder leaf order of `policy`
};

using SessionKeyBytes = std::array<uint8_t, 32>;

// Delta_{k,S}(0) = prod_{j in S, j != k} (0 - j) / (k - j)  mod order.
inline mpz_class lagrange_coeff(unsigned k, const std::vector<unsigned>& index_set,
                                const mpz_class& order) {
  bool found = false;
  for (unsigned j : index_set) found |= (j == k);
  if (!found) fail(Err::kInvalidAttributes, "k not in index set");
  mpz_class num = 1, den = 1;
  for (unsigned j : index_set) {
    if (j == k) continue;
    mpz_class mj = order - (mpz_class(j) % order);     // -j mod order
    num = num * mj % order;
    mpz_class d = (mpz_class(k) - mpz_class(j)) % order;
    if (d < 0) d += order;
    den = den * d % order;
  }
  mpz_class den_inv;
  if (mpz_invert(den_inv.get_mpz_t(), den.get_mpz_t(), order.get_mpz_t()) == 0)
    fail(Err::kInvalidAttributes, "repeated index in set");
  return num * den_inv % order;
}

inline std::pair<CpabePublicParams, CpabeMasterKey> cpabe_setup(const Curve& curve,
                                                                SeededRng& rng) {
  mpz_class alpha = curve.random_scalar(rng);
  mpz_class beta = curve.random_scalar(rng);
  CpabePublicParams pk;
  pk.curve = &curve;
  pk.g = curve.generator();
  pk.Q = curve.g1_mul(pk.g, beta);
  pk.egg_alpha = curve.gt_pow(curve.gt_generator(), alpha);
  CpabeMasterKey mk;
  mk.beta = beta;
  mk.g_alpha = curve.g1_mul(pk.g, alpha);
  return {pk, mk};
}

namespace detail {

inline G1Point hash_attribute(const Curve& curve, const std::string& attr) {
  return curve.hash_to_group(kAttributeHashDst, attr);
}

inline SessionKeyBytes derive_session_key(const Curve& curve, const Fp2& m) {
  Bytes input;
  put_string(input, kKemDst);
  Bytes gt = curve.gt_to_bytes(m);
  input.insert(input.end(), gt.begin(), gt.end());
  Bytes d = sha256(input);
  SessionKeyBytes out{};
  std::copy(d.begin(), d.end(), out.begin());
  return out;
}

// Top-down secret sharing; records each leaf's share l_f(0) in preorder and,
// when trace is non-null, every node's share (preorder node numbering).
inline void share_secret(const Curve& curve, const PolicyNode& node, const mpz_class& share,
                         SeededRng& rng, std::vector<mpz_class>& leaf_shares,
                         std::vector<mpz_class>* trace) {
  if (trace) trace->push_back(share);
  if (node.is_leaf()) {
    leaf_shares.push_back(share);
    return;
  }
  // Polynomial of degree q_x - 1 with constant term `share`.
  std::vector<mpz_class> coeffs;
  coeffs.push_back(share);
  for (unsigned d = 1; d < node.threshold; ++d) coeffs.push_back(rng.below(curve.order()));
  for (const auto& child : node.children) {
    mpz_class x(child.index);
    mpz_class acc = 0;
    mpz_class xp = 1;
    for (const auto& c : coeffs) {
      acc = (acc + c * xp) % curve.order();
      xp = xp * x % curve.order();
    }
    share_secret(curve, child, acc, rng, leaf_shares, trace);
  }
}

struct EncryptTrace {
  mpz_class s;
  Fp2 m;
  std::vector<mpz_class> node_shares;  // preorder over all nodes
};

inline CpabeCiphertext encrypt_traced(const CpabePublicParams& pk, const Fp2& m,
                                      const AccessTree& policy, SeededRng& rng,
                                      EncryptTrace* trace) {
  const Curve& curve = *pk.curve;
  mpz_class s = curve.random_scalar(rng);
  CpabeCiphertext ct;
  ct.policy = policy;
  ct.c_tilde = curve.fp2_mul(m, curve.gt_pow(pk.egg_alpha, s));
  ct.c = curve.g1_mul(pk.Q, s);
  std::vector<mpz_class> leaf_shares;
  share_secret(curve, policy.root, s, rng, leaf_shares,
               trace ? &trace->node_shares : nullptr);
  std::vector<std::string> leaf_attrs;
  AccessTree::walk_leaves(policy.root,
                          [&](const PolicyNode& n) { leaf_attrs.push_back(n.attribute); });
  for (size_t i = 0; i < leaf_shares.size(); ++i) {
    CpabeCiphertext::LeafCt leaf;
    leaf.c_f = curve.g1_mul(pk.g, leaf_shares[i]);
    leaf.c_f_prime = curve.g1_mul(hash_attribute(curve, leaf_attrs[i]), leaf_shares[i]);
    ct.leaves.push_back(std::move(leaf));
  }
  if (trace) {
    trace->s = s;
    trace->m = m;
  }
  return ct;
}

// Recursive NodeDecryption. `leaf_cursor` indexes ct.leaves in preorder.
// Returns e(g,g)^(r * l_x(0)) for satisfied subtrees, nullopt otherwise.
inline std::optional<Fp2> node_decrypt(const Curve& curve, const CpabeCiphertext& ct,
                                       const CpabeUserKey& key, const PolicyNode& node,
                                       size_t& leaf_cursor) {
  if (node.is_leaf()) {
    size_t idx = leaf_cursor++;
    auto it = key.per_attribute.find(node.attribute);
    if (it == key.per_attribute.end()) return std::nullopt;
    const auto& leaf = ct.leaves.at(idx);
    Fp2 num = curve.pairing(it->second.S_i, leaf.c_f);
    Fp2 den = curve.pairing(it->second.S_i_prime, leaf.c_f_prime);
    return curve.fp2_div(num, den);
  }
  std::vector<std::pair<unsigned, Fp2>> satisfied;
  for (const auto& child : node.children) {
    auto d = node_decrypt(curve, ct, key, child, leaf_cursor);
    if (d) satisfied.emplace_back(child.index, std::move(*d));
  }
  if (satisfied.size() < node.threshold) return std::nullopt;
  // Deterministic choice: the q_x smallest satisfiable child indices.
  satisfied.resize(node.threshold);
  std::vector<unsigned> index_set;
  for (const auto& [idx, d] : satisfied) index_set.push_back(idx);
  Fp2 acc = curve.fp2_one();
  for (const auto& [idx, d] : satisfied) {
    mpz_class coeff = lagrange_coeff(idx, index_set, curve.order());
    acc = curve.fp2_mul(acc, curve.fp2_pow(d, coeff));
  }
  return acc;
}

// Unblinding step shared by decrypt and the collusion harness.
inline Fp2 unblind(const Curve& curve, const CpabeCiphertext& ct, const G1Point& S,
                   const Fp2& root_value) {
  // C~ / (e(C, S) / e(g,g)^(rs)) = C~ * e(g,g)^(rs) / e(C, S)
  Fp2 ecs = curve.pairing(ct.c, S);
  return curve.fp2_div(curve.fp2_mul(ct.c_tilde, root_value), ecs);
}

}  // namespace detail

namespace detail {

inline CpabeUserKey keygen_traced(const CpabePublicParams& pk, const CpabeMasterKey& mk,
                                  const std::set<std::string>& attrs, SeededRng& rng,
                                  mpz_class* r_out);

}  // namespace detail

inline CpabeUserKey keygen(const CpabePublicParams& pk, const CpabeMasterKey& mk,
                           const std::set<std::string>& attrs, SeededRng& rng) {
  return detail::keygen_traced(pk, mk, attrs, rng, nullptr);
}

inline CpabeUserKey detail::keygen_traced(const CpabePublicParams& pk, const CpabeMasterKey& mk,
                                          const std::set<std::string>& attrs, SeededRng& rng,
                                          mpz_class* r_out) {
  if (attrs.empty()) fail(Err::kInvalidAttributes, "attribute set is empty");
  for (const auto& a : attrs)
    if (a.empty()) fail(Err::kInvalidAttributes, "empty attribute string");
  const Curve& curve = *pk.curve;
  mpz_class r = curve.random_scalar(rng);
  if (r_out) *r_out = r;
  mpz_class beta_inv;
  if (mpz_invert(beta_inv.get_mpz_t(), mk.beta.get_mpz_t(), curve.order().get_mpz_t()) == 0)
    fail(Err::kSetupFailure, "beta not invertible");
  CpabeUserKey key;
  G1Point g_r = curve.g1_mul(curve.generator(), r);
  // S = (g^alpha * g^r)^(1/beta)
  key.S = curve.g1_mul(curve.g1_add(mk.g_alpha, g_r), beta_inv);
  for (const auto& attr : attrs) {
    mpz_class r_i = curve.random_scalar(rng);
    CpabeUserKey::AttrKey ak;
    G1Point h_attr = detail::hash_attribute(curve, attr);
    ak.S_i = curve.g1_add(g_r, curve.g1_mul(h_attr, r_i));
    ak.S_i_prime = curve.g1_mul(curve.generator(), r_i);
    key.per_attribute.emplace(attr, std::move(ak));
    key.attribute_set.insert(attr);
  }
  return key;
}

// Wraps fresh 32-byte key material under the policy; returns the ciphertext
// and the derived session key.
inline std::pair<CpabeCiphertext, SessionKeyBytes> encrypt(const CpabePublicParams& pk,
                                                           const AccessTree& policy,
                                                           SeededRng& rng) {
  const Curve& curve = *pk.curve;
  Fp2 m = curve.gt_pow(curve.gt_generator(), curve.random_scalar(rng));
  CpabeCiphertext ct = detail::encrypt_traced(pk, m, policy, rng, nullptr);
  return {std::move(ct), detail::derive_session_key(curve, m)};
}

// Decryption failure carries one uniform error whether the structural check
// or the recursive reconstruction rejected; callers cannot tell which subtree
// failed from the error, and timing differences are best-effort only.
inline SessionKeyBytes decrypt(const Curve& curve, const CpabeCiphertext& ct,
                               const CpabeUserKey& key) {
  static constexpr const char* kUnsatisfied = "attributes do not satisfy the policy";
  if (!satisfies(ct.policy, key.attribute_set)) fail(Err::kPolicyUnsatisfied, kUnsatisfied);
  size_t cursor = 0;
  auto root = detail::node_decrypt(curve, ct, key, ct.policy.root, cursor);
  if (!root) fail(Err::kPolicyUnsatisfied, kUnsatisfied);
  Fp2 m = detail::unblind(curve, ct, key.S, *root);
  return detail::derive_session_key(curve, m);
}

// ---- serialization (version byte + length-prefixed canonical encodings) ----

inline constexpr uint8_t kCpabeWireVersion = 1;

inline Bytes serialize_ciphertext(const Curve& curve, const CpabeCiphertext& ct) {
  Bytes out;
  out.push_back(kCpabeWireVersion);
  put_string(out, curve.name());
  put_string(out, print_policy(ct.policy));
  put_blob(out, curve.gt_to_bytes(ct.c_tilde));
  put_blob(out, curve.g1_to_bytes(ct.c));
  put_u32_be(out, static_cast<uint32_t>(ct.leaves.size()));
  for (const auto& leaf : ct.leaves) {
    put_blob(out, curve.g1_to_bytes(leaf.c_f));
    put_blob(out, curve.g1_to_bytes(leaf.c_f_prime));
  }
  return out;
}

inline CpabeCiphertext parse_ciphertext(ByteReader& r) {
  if (r.u8() != kCpabeWireVersion) fail(Err::kFormat, "unknown CP-ABE wire version");
  const Curve& curve = Curve::by_name(take_string(r));
  CpabeCiphertext ct;
  ct.policy = parse_policy(take_string(r));
  {
    Bytes b = take_blob(r);
    ByteReader br(b);
    ct.c_tilde = curve.gt_from_bytes(br);
  }
  {
    Bytes b = take_blob(r);
    ByteReader br(b);
    ct.c = curve.g1_from_bytes(br);
  }
  uint32_t n_leaves = r.u32_be();
  if (n_leaves != ct.policy.leaf_count()) fail(Err::kFormat, "leaf count mismatch");
  for (uint32_t i = 0; i < n_leaves; ++i) {
    CpabeCiphertext::LeafCt leaf;
    {
      Bytes b = take_blob(r);
      ByteReader br(b);
      leaf.c_f = curve.g1_from_bytes(br);
    }
    {
      Bytes b = take_blob(r);
      ByteReader br(b);
      leaf.c_f_prime = curve.g1_from_bytes(br);
    }
    ct.leaves.push_back(std::move(leaf));
  }
  return ct;
}

inline CpabeCiphertext parse_ciphertext(const Bytes& data) {
  ByteReader r(data);
  CpabeCiphertext ct = parse_ciphertext(r);
  if (!r.done()) fail(Err::kFormat, "trailing bytes after CP-ABE ciphertext");
  return ct;
}

inline Bytes serialize_user_key(const Curve& curve, const CpabeUserKey& key) {
  Bytes out;
  out.push_back(kCpabeWireVersion);
  put_string(out, curve.name());
  put_blob(out, curve.g1_to_bytes(key.S));
  put_u32_be(out, static_cast<uint32_t>(key.per_attribute.size()));
  for (const auto& [attr, ak] : key.per_attribute) {
    put_string(out, attr);
    put_blob(out, curve.g1_to_bytes(ak.S_i));
    put_blob(out, curve.g1_to_bytes(ak.S_i_prime));
  }
  return out;
}

inline CpabeUserKey parse_user_key(const Bytes& data) {
  ByteReader r(data);
  if (r.u8() != kCpabeWireVersion) fail(Err::kFormat, "unknown CP-ABE wire version");
  const Curve& curve = Curve::by_name(take_string(r));
  CpabeUserKey key;
  {
    Bytes b = take_blob(r);
    ByteReader br(b);
    key.S = curve.g1_from_bytes(br);
  }
  uint32_t n = r.u32_be();
  for (uint32_t i = 0; i < n; ++i) {
    std::string attr = take_string(r);
    CpabeUserKey::AttrKey ak;
    {
      Bytes b = take_blob(r);
      ByteReader br(b);
      ak.S_i = curve.g1_from_bytes(br);
    }
    {
      Bytes b = take_blob(r);
      ByteReader br(b);
      ak.S_i_prime = curve.g1_from_bytes(br);
    }
    key.attribute_set.insert(attr);
    key.per_attribute.emplace(std::move(attr), std::move(ak));
  }
  if (!r.done()) fail(Err::kFormat, "trailing bytes after user key");
  return key;
}

}  // namespace aerisai::cpabe
