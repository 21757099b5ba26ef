#include "aerisai/ledger.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "aerisai/paillier.hpp"
#include "aerisai/rng.hpp"

namespace aerisai::ledger {
namespace {

using paillier::FixedPointCodec;
using paillier::PaillierKeypair;

struct Keys {
  PaillierKeypair client;
  PaillierKeypair oracle;
};

Keys& keys() {
  static Keys k = [] {
    SeededRng rng(505);
    Keys out;
    out.client = paillier::paillier_setup(1024, rng, paillier::RandomizerMode::kFixedBase);
    out.oracle = paillier::paillier_setup(1024, rng, paillier::RandomizerMode::kFixedBase);
    return out;
  }();
  return k;
}

FixedPointCodec codec_c() { return FixedPointCodec(24, keys().client.pk.n()); }
FixedPointCodec codec_o() { return FixedPointCodec(24, keys().oracle.pk.n()); }

std::vector<std::string> roster_of(size_t n) {
  std::vector<std::string> r;
  for (size_t i = 0; i < n; ++i) r.push_back("client_" + std::to_string(i));
  return r;
}

Transaction upload_tx(TxKind kind, uint64_t round, const std::string& sender,
                      const std::vector<double>& values, SeededRng& rng) {
  const auto& pk = kind == TxKind::kUploadGradient ? keys().client.pk : keys().oracle.pk;
  FixedPointCodec codec(24, pk.n());
  auto cts = paillier::encrypt_vector(pk, values, codec, rng);
  return make_transaction(kind, round, sender, paillier::serialize_ciphertext_vector(pk, cts));
}

// Independent plaintext re-computation of the contract pipeline: integers via
// its own encode (llround), floats via the same Q-scaled mean.
struct PlainTwin {
  std::vector<mpz_class> model_int;
  std::vector<mpz_class> noise_int;
  std::vector<double> fedavg_float;
  uint64_t q;
  bool lifted = false;

  PlainTwin(const std::vector<double>& init, uint64_t q_) : q(q_) {
    for (double x : init) model_int.push_back(encode24(x));
    noise_int.assign(init.size(), 0);
    fedavg_float = init;
  }

  static mpz_class encode24(double x) {
    return mpz_class(static_cast<long>(std::llround(std::ldexp(x, 24))));
  }

  void apply_round(const std::vector<std::vector<double>>& delta_hats,
                   const std::vector<std::vector<double>>& zetas) {
    if (!lifted) {
      for (auto& v : model_int) v <<= 16;
      for (auto& v : noise_int) v <<= 16;
      lifted = true;
    }
    for (size_t i = 0; i < model_int.size(); ++i) {
      mpz_class gsum = 0, zsum = 0;
      double fsum = 0.0;
      for (size_t c = 0; c < delta_hats.size(); ++c) {
        gsum += encode24(delta_hats[c][i]);
        zsum += encode24(zetas[c][i]);
        fsum += delta_hats[c][i] - zetas[c][i];
      }
      model_int[i] += gsum * q;
      noise_int[i] += zsum * q;
      fedavg_float[i] += fsum * (static_cast<double>(q) / 65536.0);
    }
  }
};

TEST(Genesis, MeanScalarAndZeroNoise) {
  SeededRng rng(1);
  std::vector<double> init = {0.25, -0.5, 1.0};
  Ledger l = Ledger::genesis(init, roster_of(5), keys().client.pk, keys().oracle.pk,
                             codec_c(), rng);
  EXPECT_EQ(l.state().mean_scalar_q, 13107u);  // round(65536 / 5)
  EXPECT_EQ(l.state().model_scale_bits, 24u);
  EXPECT_EQ(l.state().round, 0u);
  auto noise =
      paillier::decrypt_vector(keys().oracle.pk, keys().oracle.sk, l.state().ct_global_noise,
                               codec_o());
  for (double z : noise) EXPECT_EQ(z, 0.0);
  auto model = paillier::decrypt_vector(keys().client.pk, keys().client.sk,
                                        l.state().ct_global_model, codec_c());
  for (size_t i = 0; i < init.size(); ++i) EXPECT_NEAR(model[i], init[i], 1.0 / (1 << 24));
}

TEST(Genesis, DeterministicStateHash) {
  SeededRng r1(77), r2(77);
  Ledger a = Ledger::genesis(size_t(4), roster_of(3), keys().client.pk, keys().oracle.pk,
                             codec_c(), r1);
  Ledger b = Ledger::genesis(size_t(4), roster_of(3), keys().client.pk, keys().oracle.pk,
                             codec_c(), r2);
  ASSERT_EQ(a.chain().size(), 1u);
  EXPECT_EQ(a.chain()[0].state_hash, b.chain()[0].state_hash);
  EXPECT_EQ(a.chain()[0].txs.size(), 1u);
  EXPECT_EQ(a.chain()[0].txs[0].kind, TxKind::kGenesis);
}

TEST(Genesis, RejectsDegenerateInputs) {
  SeededRng rng(2);
  EXPECT_THROW(Ledger::genesis(size_t(0), roster_of(2), keys().client.pk, keys().oracle.pk,
                               codec_c(), rng),
               Error);
  EXPECT_THROW(Ledger::genesis(size_t(4), {}, keys().client.pk, keys().oracle.pk, codec_c(),
                               rng),
               Error);
}

TEST(Submit, ValidatesSenderRoundDuplicateAndKeys) {
  SeededRng rng(3);
  Ledger l = Ledger::genesis(std::vector<double>{0.0, 0.0}, roster_of(2), keys().client.pk,
                             keys().oracle.pk, codec_c(), rng);
  std::vector<double> v = {0.5, -0.5};

  EXPECT_THROW(l.submit(upload_tx(TxKind::kUploadGradient, 0, "mallory", v, rng)), Error);
  EXPECT_THROW(l.submit(upload_tx(TxKind::kUploadGradient, 3, "client_0", v, rng)), Error);

  l.submit(upload_tx(TxKind::kUploadGradient, 0, "client_0", v, rng));
  try {
    l.submit(upload_tx(TxKind::kUploadGradient, 0, "client_0", v, rng));
    FAIL() << "duplicate upload accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Err::kDuplicateUpload);
  }

  // Gradient ciphertext under the oracle key is rejected as a key mismatch.
  Transaction wrong_key = upload_tx(TxKind::kUploadNoise, 0, "client_1", v, rng);
  wrong_key.kind = TxKind::kUploadGradient;
  wrong_key.tx_id = tx_digest(wrong_key);
  try {
    l.submit(wrong_key);
    FAIL() << "key-mismatched upload accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Err::kKeyMismatch);
  }

  // Dimension mismatch.
  EXPECT_THROW(
      l.submit(upload_tx(TxKind::kUploadGradient, 0, "client_1", {1.0, 2.0, 3.0}, rng)),
      Error);
}

TEST(Submit, EnforcesBlockSizeCap) {
  // 98 MB payload accepted, 101 MB rejected. The vectors are fabricated by
  // repeating one honest Enc(0) so construction stays cheap.
  SeededRng rng(4);
  const auto& pk_c = keys().client.pk;
  const auto& pk_o = keys().oracle.pk;
  size_t width = pk_c.ciphertext_width();  // 256 bytes at 1024-bit keys
  size_t dim98 = (98ull << 20) / width;    // ~98 MB of ciphertext

  auto repeat_vector = [&](const paillier::PaillierPublicKey& pk, size_t dim) {
    paillier::PaillierCiphertext zero = paillier::encrypt(pk, 0, rng);
    paillier::CiphertextVector v(dim, zero);
    return paillier::serialize_ciphertext_vector(pk, v);
  };

  Bytes model_payload = repeat_vector(pk_c, dim98);
  Bytes noise_payload = repeat_vector(pk_o, dim98);
  Ledger l = Ledger::genesis_preencrypted(paillier::parse_ciphertext_vector(pk_c, model_payload),
                                          paillier::parse_ciphertext_vector(pk_o, noise_payload),
                                          {"client_0"}, pk_c, pk_o, 24);

  Transaction ok = make_transaction(TxKind::kUploadGradient, 0, "client_0", model_payload);
  EXPECT_LE(ok.size_bytes(), 100ull << 20);
  l.submit(ok);  // ~98 MB accepted

  size_t dim101 = (101ull << 20) / width + 1;
  Bytes big = repeat_vector(pk_o, dim101);
  Transaction too_big = make_transaction(TxKind::kUploadNoise, 0, "client_0", big);
  EXPECT_GT(too_big.size_bytes(), 100ull << 20);
  try {
    l.submit(too_big);
    FAIL() << "oversized transaction accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Err::kTxTooLarge);
  }
}

TEST(Aggregate, MeanOfTwoClients) {
  SeededRng rng(5);
  Ledger l = Ledger::genesis(std::vector<double>{0.0}, roster_of(2), keys().client.pk,
                             keys().oracle.pk, codec_c(), rng);
  l.submit(upload_tx(TxKind::kUploadGradient, 0, "client_0", {1.0}, rng));
  l.submit(upload_tx(TxKind::kUploadGradient, 0, "client_1", {3.0}, rng));
  l.submit(upload_tx(TxKind::kUploadNoise, 0, "client_0", {0.0}, rng));
  l.submit(upload_tx(TxKind::kUploadNoise, 0, "client_1", {0.0}, rng));
  ASSERT_TRUE(l.round_complete());
  l.aggregate();
  EXPECT_EQ(l.state().round, 1u);
  EXPECT_EQ(l.state().model_scale_bits, 40u);
  auto model = paillier::decrypt_vector(keys().client.pk, keys().client.sk,
                                        l.state().ct_global_model, codec_c(), 40);
  // mean of {1, 3} = 2, up to the Q = round(2^16/2) division scale
  EXPECT_NEAR(model[0], 2.0, std::ldexp(1.0, -16));
}

TEST(Aggregate, ZeroUploadsLeaveModelFixed) {
  SeededRng rng(6);
  std::vector<double> init = {0.75, -0.125};
  Ledger l = Ledger::genesis(init, roster_of(3), keys().client.pk, keys().oracle.pk,
                             codec_c(), rng);
  for (const auto& c : l.state().roster) {
    l.submit(upload_tx(TxKind::kUploadGradient, 0, c, {0.0, 0.0}, rng));
    l.submit(upload_tx(TxKind::kUploadNoise, 0, c, {0.0, 0.0}, rng));
  }
  l.aggregate();
  auto model = paillier::decrypt_vector(keys().client.pk, keys().client.sk,
                                        l.state().ct_global_model, codec_c(), 40);
  for (size_t i = 0; i < init.size(); ++i)
    EXPECT_NEAR(model[i], init[i], std::ldexp(1.0, -16));
}

TEST(Aggregate, RequiresFullRoster) {
  SeededRng rng(7);
  Ledger l = Ledger::genesis(std::vector<double>{0.0}, roster_of(2), keys().client.pk,
                             keys().oracle.pk, codec_c(), rng);
  l.submit(upload_tx(TxKind::kUploadGradient, 0, "client_0", {1.0}, rng));
  try {
    l.aggregate();
    FAIL() << "aggregate fired without the full roster";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Err::kNotReady);
  }
}

// The module's central identity: decrypted model minus decrypted noise equals
// the plaintext pipeline exactly in the integer domain, every round.
TEST(Aggregate, ExactCancellationAgainstPlainTwin) {
  SeededRng rng(8);
  const size_t dim = 32, n_clients = 5;
  const uint64_t rounds = 4;
  std::vector<double> init(dim);
  for (auto& x : init) x = (rng.next_unit() - 0.5) * 0.2;
  Ledger l = Ledger::genesis(init, roster_of(n_clients), keys().client.pk, keys().oracle.pk,
                             codec_c(), rng);
  PlainTwin twin(init, l.state().mean_scalar_q);
  FixedPointCodec cc = codec_c(), co = codec_o();

  for (uint64_t round = 0; round < rounds; ++round) {
    std::vector<std::vector<double>> dhats, zetas;
    for (size_t c = 0; c < n_clients; ++c) {
      std::vector<double> delta(dim), zeta(dim), dhat(dim);
      for (size_t i = 0; i < dim; ++i) {
        delta[i] = (rng.next_unit() - 0.5) * 2.0;
        zeta[i] = rng.next_gaussian() * 3.0;
        dhat[i] = delta[i] + zeta[i];
      }
      l.submit(upload_tx(TxKind::kUploadGradient, round, "client_" + std::to_string(c), dhat,
                         rng));
      l.submit(upload_tx(TxKind::kUploadNoise, round, "client_" + std::to_string(c), zeta,
                         rng));
      dhats.push_back(std::move(dhat));
      zetas.push_back(std::move(zeta));
    }
    l.aggregate();
    twin.apply_round(dhats, zetas);

    auto model_raw = paillier::decrypt_vector_raw(keys().client.pk, keys().client.sk,
                                                  l.state().ct_global_model);
    auto noise_raw = paillier::decrypt_vector_raw(keys().oracle.pk, keys().oracle.sk,
                                                  l.state().ct_global_noise);
    for (size_t i = 0; i < dim; ++i) {
      mpz_class m = cc.to_signed(model_raw[i]);
      mpz_class z = co.to_signed(noise_raw[i]);
      ASSERT_EQ(m, twin.model_int[i]) << "round " << round << " i " << i;
      ASSERT_EQ(z, twin.noise_int[i]) << "round " << round << " i " << i;
      double denoised = cc.decode_at(model_raw[i], 40) - co.decode_at(noise_raw[i], 40);
      ASSERT_NEAR(denoised, twin.fedavg_float[i], std::ldexp(1.0, -16));
    }
  }
}

TEST(Query, RecordedOnChainAndStateless) {
  SeededRng rng(9);
  std::vector<double> init = {0.5};
  Ledger l = Ledger::genesis(init, roster_of(2), keys().client.pk, keys().oracle.pk,
                             codec_c(), rng);
  QueryResult qm = l.query_model("client_0");
  EXPECT_EQ(qm.scale_bits, 24u);
  auto model = paillier::decrypt_vector(keys().client.pk, keys().client.sk, qm.cts, codec_c());
  EXPECT_NEAR(model[0], 0.5, 1.0 / (1 << 24));
  QueryResult qn = l.query_noise("client_1");
  auto noise = paillier::decrypt_vector(keys().oracle.pk, keys().oracle.sk, qn.cts, codec_o());
  EXPECT_EQ(noise[0], 0.0);

  l.submit(upload_tx(TxKind::kUploadGradient, 0, "client_0", {0.0}, rng));
  l.submit(upload_tx(TxKind::kUploadGradient, 0, "client_1", {0.0}, rng));
  l.submit(upload_tx(TxKind::kUploadNoise, 0, "client_0", {0.0}, rng));
  l.submit(upload_tx(TxKind::kUploadNoise, 0, "client_1", {0.0}, rng));
  l.aggregate();
  ASSERT_EQ(l.chain().size(), 2u);
  const Block& b = l.chain()[1];
  size_t queries = 0;
  for (const auto& tx : b.txs)
    if (tx.kind == TxKind::kQueryModel || tx.kind == TxKind::kQueryNoise) ++queries;
  EXPECT_EQ(queries, 2u);
}

Ledger run_small_chain(uint64_t rounds, SeededRng& rng) {
  Ledger l = Ledger::genesis(std::vector<double>{0.1, -0.1}, roster_of(2), keys().client.pk,
                             keys().oracle.pk, codec_c(), rng);
  for (uint64_t round = 0; round < rounds; ++round) {
    for (const auto& c : l.state().roster) {
      l.submit(upload_tx(TxKind::kUploadGradient, round, c, {0.25, -0.25}, rng));
      l.submit(upload_tx(TxKind::kUploadNoise, round, c, {1.5, -0.5}, rng));
    }
    l.aggregate();
  }
  return l;
}

TEST(Audit, ReplayReproducesEveryStateHash) {
  SeededRng rng(10);
  Ledger l = run_small_chain(10, rng);
  Ledger::ReplayResult r = Ledger::audit_replay(l.chain());
  EXPECT_EQ(r.blocks_checked, l.chain().size());
  EXPECT_EQ(state_digest(l.pk_c(), l.pk_o(), r.state),
            state_digest(l.pk_c(), l.pk_o(), l.state()));
}

TEST(Audit, DetectsTamperedPayloadWithHeight) {
  SeededRng rng(11);
  Ledger l = run_small_chain(5, rng);
  std::vector<Block> chain = l.chain();
  // Flip one payload byte in block 3; the tx digest no longer matches.
  for (auto& tx : chain[3].txs) {
    if (tx.kind == TxKind::kUploadGradient) {
      tx.payload[20] ^= 0x01;
      break;
    }
  }
  try {
    Ledger::audit_replay(chain);
    FAIL() << "tampering not detected";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Err::kAuditFailure);
    EXPECT_NE(std::string(e.what()).find("height 3"), std::string::npos) << e.what();
  }
}

TEST(Audit, DetectsBrokenHashChain) {
  SeededRng rng(12);
  Ledger l = run_small_chain(4, rng);
  std::vector<Block> chain = l.chain();
  chain[2].prev_hash[0] ^= 0xff;
  try {
    Ledger::audit_replay(chain);
    FAIL() << "broken chain not detected";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Err::kAuditFailure);
    EXPECT_NE(std::string(e.what()).find("height 2"), std::string::npos);
  }
}

TEST(Persistence, WriteReadRoundTrip) {
  SeededRng rng(13);
  Ledger l = run_small_chain(3, rng);
  std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "aerisai_ledger_test_chain";
  std::filesystem::remove_all(dir);
  write_chain(dir, l.chain());
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));
  std::vector<Block> loaded = read_chain(dir);
  ASSERT_EQ(loaded.size(), l.chain().size());
  for (size_t i = 0; i < loaded.size(); ++i) {
    EXPECT_EQ(loaded[i].state_hash, l.chain()[i].state_hash);
    EXPECT_EQ(block_digest(loaded[i]), block_digest(l.chain()[i]));
  }
  Ledger::ReplayResult r = Ledger::audit_replay(loaded);
  EXPECT_EQ(r.blocks_checked, loaded.size());
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace aerisai::ledger
