#include "aerisai/cpabe.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <functional>

#include "aerisai/rng.hpp"

namespace aerisai::cpabe {
namespace {

using pairing::Curve;
using pairing::Fp2;

struct Fixture {
  Fixture() : rng(99) {
    auto [p, m] = cpabe_setup(Curve::fast(), rng);
    pk = p;
    mk = m;
  }
  SeededRng rng;
  CpabePublicParams pk;
  CpabeMasterKey mk;
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

TEST(CpabeSetup, PairingSanity) {
  auto& f = fixture();
  const Curve& c = *f.pk.curve;
  // e(g,g) != 1 (non-degeneracy)
  EXPECT_FALSE(c.gt_generator() == c.fp2_one());
  // PK/MK cross-check: e(g, g^alpha) == e(g,g)^alpha
  EXPECT_TRUE(c.pairing(f.pk.g, f.mk.g_alpha) == f.pk.egg_alpha);
  // Q = g^beta
  EXPECT_TRUE(c.g1_mul(f.pk.g, f.mk.beta) == f.pk.Q);
}

TEST(Lagrange, KnownCoefficients) {
  const mpz_class& order = Curve::fast().order();
  EXPECT_EQ(lagrange_coeff(1, {1}, order), 1);
  // Delta_{1,{1,2}}(0) = (0-2)/(1-2) = 2
  EXPECT_EQ(lagrange_coeff(1, {1, 2}, order), 2);
  // Delta_{2,{1,2}}(0) = (0-1)/(2-1) = -1
  EXPECT_EQ(lagrange_coeff(2, {1, 2}, order), order - 1);
  EXPECT_THROW(lagrange_coeff(3, {1, 2}, order), Error);
}

TEST(Lagrange, ReconstructsPolynomialAtZero) {
  const mpz_class& order = Curve::fast().order();
  SeededRng rng(17);
  for (unsigned degree = 0; degree <= 4; ++degree) {
    std::vector<mpz_class> coeffs;
    for (unsigned i = 0; i <= degree; ++i) coeffs.push_back(rng.below(order));
    auto eval = [&](unsigned x) {
      mpz_class acc = 0, xp = 1;
      for (const auto& c : coeffs) {
        acc = (acc + c * xp) % order;
        xp = xp * x % order;
      }
      return acc;
    };
    const unsigned pool[5] = {1, 3, 4, 7, 9};
    std::vector<unsigned> index_set(pool, pool + degree + 1);
    mpz_class sum = 0;
    for (unsigned k : index_set)
      sum = (sum + eval(k) * lagrange_coeff(k, index_set, order)) % order;
    EXPECT_EQ(sum, coeffs[0]) << "degree " << degree;
  }
}

TEST(Keygen, RejectsEmptyAttributes) {
  auto& f = fixture();
  SeededRng rng(1);
  EXPECT_THROW(keygen(f.pk, f.mk, {}, rng), Error);
  EXPECT_THROW(keygen(f.pk, f.mk, {""}, rng), Error);
}

TEST(Keygen, FreshBlindingPerCall) {
  auto& f = fixture();
  SeededRng rng(2);
  CpabeUserKey k1 = keygen(f.pk, f.mk, {"a"}, rng);
  CpabeUserKey k2 = keygen(f.pk, f.mk, {"a"}, rng);
  EXPECT_FALSE(k1.S == k2.S);
  EXPECT_FALSE(k1.per_attribute.at("a").S_i == k2.per_attribute.at("a").S_i);
}

TEST(EncryptDecrypt, SingleLeafRoundTrip) {
  auto& f = fixture();
  SeededRng rng(3);
  auto [ct, sek] = encrypt(f.pk, parse_policy("a"), rng);
  EXPECT_EQ(ct.leaves.size(), 1u);
  CpabeUserKey good = keygen(f.pk, f.mk, {"a"}, rng);
  CpabeUserKey bad = keygen(f.pk, f.mk, {"b"}, rng);
  EXPECT_EQ(decrypt(*f.pk.curve, ct, good), sek);
  EXPECT_THROW(decrypt(*f.pk.curve, ct, bad), Error);
}

TEST(EncryptDecrypt, AndGateNeedsBothAttributes) {
  auto& f = fixture();
  SeededRng rng(4);
  auto [ct, sek] = encrypt(f.pk, parse_policy("a AND b"), rng);
  CpabeUserKey both = keygen(f.pk, f.mk, {"a", "b"}, rng);
  CpabeUserKey onlya = keygen(f.pk, f.mk, {"a"}, rng);
  EXPECT_EQ(decrypt(*f.pk.curve, ct, both), sek);
  EXPECT_THROW(decrypt(*f.pk.curve, ct, onlya), Error);
}

TEST(EncryptDecrypt, OrBranchSuffices) {
  auto& f = fixture();
  SeededRng rng(5);
  auto [ct, sek] = encrypt(f.pk, parse_policy("(a AND b) OR c"), rng);
  CpabeUserKey c_only = keygen(f.pk, f.mk, {"c"}, rng);
  EXPECT_EQ(decrypt(*f.pk.curve, ct, c_only), sek);
}

TEST(EncryptDecrypt, TwoOfThreeAllSubsets) {
  auto& f = fixture();
  SeededRng rng(6);
  auto [ct, sek] = encrypt(f.pk, parse_policy("2 of (a, b, c)"), rng);
  const char* names[3] = {"a", "b", "c"};
  for (unsigned mask = 1; mask < 8; ++mask) {
    std::set<std::string> attrs;
    for (int i = 0; i < 3; ++i)
      if (mask & (1u << i)) attrs.insert(names[i]);
    CpabeUserKey key = keygen(f.pk, f.mk, attrs, rng);
    bool should = __builtin_popcount(mask) >= 2;
    if (should) {
      EXPECT_EQ(decrypt(*f.pk.curve, ct, key), sek) << "mask=" << mask;
    } else {
      EXPECT_THROW(decrypt(*f.pk.curve, ct, key), Error) << "mask=" << mask;
    }
  }
}

// Random policy generator over a fixed attribute universe.
PolicyNode random_policy(SeededRng& rng, const std::vector<std::string>& universe, int depth) {
  if (depth == 0 || rng.next_u64() % 3 == 0)
    return PolicyNode::leaf(universe[rng.next_u64() % universe.size()]);
  unsigned n_children = 2 + static_cast<unsigned>(rng.next_u64() % 2);
  std::vector<PolicyNode> kids;
  for (unsigned i = 0; i < n_children; ++i)
    kids.push_back(random_policy(rng, universe, depth - 1));
  unsigned threshold = 1 + static_cast<unsigned>(rng.next_u64() % kids.size());
  return PolicyNode::gate(threshold, std::move(kids));
}

TEST(EncryptDecrypt, AgreesWithSatisfiesOracle) {
  auto& f = fixture();
  SeededRng rng(7);
  std::vector<std::string> universe = {"a", "b", "c", "d", "e"};
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    AccessTree policy{random_policy(rng, universe, 2)};
    auto [ct, sek] = encrypt(f.pk, policy, rng);
    std::set<std::string> attrs;
    for (const auto& a : universe)
      if (rng.next_u64() % 2) attrs.insert(a);
    if (attrs.empty()) attrs.insert(universe[0]);
    CpabeUserKey key = keygen(f.pk, f.mk, attrs, rng);
    bool expected = satisfies(policy, key.attribute_set);
    if (expected) {
      EXPECT_EQ(decrypt(*f.pk.curve, ct, key), sek) << print_policy(policy);
    } else {
      EXPECT_THROW(decrypt(*f.pk.curve, ct, key), Error) << print_policy(policy);
    }
    ++checked;
  }
  EXPECT_EQ(checked, 200);
}

// Theorem 3: components from two different user keys cannot be interleaved.
// Mixed keys recover garbage because each key carries its own blinding r.
TEST(Collusion, MixedKeysNeverRecoverSessionKey) {
  auto& f = fixture();
  const Curve& curve = *f.pk.curve;
  SeededRng rng(8);
  auto [ct, sek] = encrypt(f.pk, parse_policy("a AND b"), rng);
  CpabeUserKey alice = keygen(f.pk, f.mk, {"a"}, rng);
  CpabeUserKey bob = keygen(f.pk, f.mk, {"b"}, rng);

  int successes = 0;
  int attempts = 0;
  // All ways to source the leaf components and the unblinding S component.
  for (int leaf_a_from_alice = 0; leaf_a_from_alice <= 1; ++leaf_a_from_alice) {
    for (int leaf_b_from_alice = 0; leaf_b_from_alice <= 1; ++leaf_b_from_alice) {
      for (int s_from_alice = 0; s_from_alice <= 1; ++s_from_alice) {
        CpabeUserKey franken;
        franken.S = s_from_alice ? alice.S : bob.S;
        if (leaf_a_from_alice && alice.per_attribute.count("a"))
          franken.per_attribute["a"] = alice.per_attribute.at("a");
        else if (!leaf_a_from_alice && bob.per_attribute.count("a"))
          franken.per_attribute["a"] = bob.per_attribute.at("a");
        if (leaf_b_from_alice && alice.per_attribute.count("b"))
          franken.per_attribute["b"] = alice.per_attribute.at("b");
        else if (!leaf_b_from_alice && bob.per_attribute.count("b"))
          franken.per_attribute["b"] = bob.per_attribute.at("b");
        if (franken.per_attribute.size() < 2) continue;  // attribute unavailable
        for (const auto& [attr, ak] : franken.per_attribute)
          franken.attribute_set.insert(attr);
        ++attempts;
        size_t cursor = 0;
        auto root = detail::node_decrypt(curve, ct, franken, ct.policy.root, cursor);
        if (!root) continue;
        Fp2 m = detail::unblind(curve, ct, franken.S, *root);
        if (detail::derive_session_key(curve, m) == sek) ++successes;
      }
    }
  }
  EXPECT_GT(attempts, 0);
  EXPECT_EQ(successes, 0);
}

// NodeDecryption algebra: at every satisfied node the recovered element is
// e(g,g)^(r * l_x(0)) for the key's blinding r and the recorded share.
TEST(NodeDecryption, MatchesSharesAlgebra) {
  auto& f = fixture();
  const Curve& curve = *f.pk.curve;
  SeededRng rng(9);
  AccessTree policy = parse_policy("2 of (a, b AND c, d)");
  Fp2 m = curve.gt_pow(curve.gt_generator(), curve.random_scalar(rng));
  detail::EncryptTrace trace;
  CpabeCiphertext ct = detail::encrypt_traced(f.pk, m, policy, rng, &trace);

  mpz_class r;
  CpabeUserKey key = detail::keygen_traced(f.pk, f.mk, {"a", "b", "c", "d"}, rng, &r);

  // Walk nodes in the same preorder as the share trace.
  size_t node_idx = 0;
  size_t leaf_cursor_outer = 0;
  std::function<void(const PolicyNode&)> visit = [&](const PolicyNode& node) {
    mpz_class share = trace.node_shares.at(node_idx++);
    size_t cursor = leaf_cursor_outer;
    auto got = detail::node_decrypt(curve, ct, key, node, cursor);
    ASSERT_TRUE(got.has_value());
    Fp2 expected = curve.gt_pow(curve.gt_generator(), r * share % curve.order());
    EXPECT_TRUE(*got == expected);
    if (node.is_leaf()) {
      ++leaf_cursor_outer;
      return;
    }
    for (const auto& child : node.children) visit(child);
  };
  visit(policy.root);
  EXPECT_EQ(trace.node_shares.size(), node_idx);

  // Root share is s itself.
  EXPECT_EQ(trace.node_shares.front(), trace.s);
}

TEST(Serialization, CiphertextAndKeyRoundTrip) {
  auto& f = fixture();
  const Curve& curve = *f.pk.curve;
  SeededRng rng(10);
  auto [ct, sek] = encrypt(f.pk, parse_policy("(a AND b) OR c"), rng);
  Bytes wire = serialize_ciphertext(curve, ct);
  CpabeCiphertext parsed = parse_ciphertext(wire);
  EXPECT_EQ(print_policy(parsed.policy), print_policy(ct.policy));
  CpabeUserKey key = keygen(f.pk, f.mk, {"c"}, rng);
  EXPECT_EQ(decrypt(curve, parsed, key), sek);

  Bytes kw = serialize_user_key(curve, key);
  CpabeUserKey kparsed = parse_user_key(kw);
  EXPECT_EQ(decrypt(curve, parsed, kparsed), sek);
  EXPECT_EQ(kparsed.attribute_set, key.attribute_set);
}

}  // namespace
}  // namespace aerisai::cpabe
