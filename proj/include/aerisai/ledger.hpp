#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "aerisai/common.hpp"
#include "aerisai/paillier.hpp"
#include "aerisai/rng.hpp"

// Deterministic in-process consortium-ledger simulation. The smart contract
// aggregates encrypted perturbed gradients (under the clients' shared key)
// and encrypted noise (under the oracle's key) without ever decrypting:
//   CT_sum  = fold of Add over the roster's uploads
//   CT_mean = Multiply(CT_sum, Q),  Q = round(2^16 / N)
//   model  <- Add(model, CT_mean)   (model lifted once by 2^16 at round 0)
// The identical pipeline runs on the noise, so decrypted-model minus
// decrypted-noise reproduces the plaintext trajectory exactly in the integer
// plaintext domain.
//
// The ledger is a single-writer state machine; one block per round. Blocks
// chain by digest and carry the post-state hash, so an audit replay from
// genesis re-derives and checks every block.

namespace aerisai::ledger {

using paillier::CiphertextVector;
using paillier::FixedPointCodec;
using paillier::PaillierPublicKey;

inline constexpr uint64_t kDefaultMaxTxBytes = 100ull << 20;  // 100 MB block cap

enum class TxKind : uint8_t {
  kGenesis = 0,
  kUploadGradient = 1,
  kUploadNoise = 2,
  kAggregate = 3,
  kQueryModel = 4,
  kQueryNoise = 5,
};

inline const char* tx_kind_name(TxKind k) {
  switch (k) {
    case TxKind::kGenesis: return "Genesis";
    case TxKind::kUploadGradient: return "UploadGradient";
    case TxKind::kUploadNoise: return "UploadNoise";
    case TxKind::kAggregate: return "Aggregate";
    case TxKind::kQueryModel: return "QueryModel";
    case TxKind::kQueryNoise: return "QueryNoise";
  }
  return "?";
}

struct Transaction {
  Bytes tx_id;  // digest of the canonical serialization
  uint64_t round = 0;
  TxKind kind = TxKind::kGenesis;
  std::string sender;
  Bytes payload;

  size_t size_bytes() const { return payload.size(); }
};

inline Bytes tx_digest(const Transaction& tx) {
  Bytes buf;
  buf.push_back(static_cast<uint8_t>(tx.kind));
  put_u64_be(buf, tx.round);
  put_string(buf, tx.sender);
  put_blob(buf, tx.payload);
  return sha256(buf);
}

inline Transaction make_transaction(TxKind kind, uint64_t round, std::string sender,
                                    Bytes payload) {
  Transaction tx;
  tx.kind = kind;
  tx.round = round;
  tx.sender = std::move(sender);
  tx.payload = std::move(payload);
  tx.tx_id = tx_digest(tx);
  return tx;
}

struct Block {
  uint64_t height = 0;
  Bytes prev_hash;
  std::vector<Transaction> txs;
  Bytes state_hash;
};

inline Bytes block_digest(const Block& b) {
  Bytes buf;
  put_u64_be(buf, b.height);
  put_blob(buf, b.prev_hash);
  put_u32_be(buf, static_cast<uint32_t>(b.txs.size()));
  for (const auto& tx : b.txs) put_blob(buf, tx.tx_id);
  put_blob(buf, b.state_hash);
  return sha256(buf);
}

struct ContractState {
  uint64_t round = 0;
  uint64_t mean_scalar_q = 0;  // Q = round(2^16 / N)
  unsigned model_scale_bits = 0;
  std::vector<std::string> roster;  // sorted
  CiphertextVector ct_global_model;  // under PPK_c
  CiphertextVector ct_global_noise;  // under PPK_o
  std::map<std::string, CiphertextVector> pending_gradients;
  std::map<std::string, CiphertextVector> pending_noise;

  size_t model_dim() const { return ct_global_model.size(); }

  bool in_roster(const std::string& id) const {
    return std::binary_search(roster.begin(), roster.end(), id);
  }
};

inline uint64_t mean_scalar_for(size_t n_clients) {
  return (65536 + n_clients / 2) / n_clients;  // round(2^16 / N)
}

inline Bytes state_digest(const PaillierPublicKey& pk_c, const PaillierPublicKey& pk_o,
                          const ContractState& s) {
  Bytes buf;
  put_u64_be(buf, s.round);
  put_u64_be(buf, s.mean_scalar_q);
  put_u32_be(buf, s.model_scale_bits);
  put_u32_be(buf, static_cast<uint32_t>(s.roster.size()));
  for (const auto& c : s.roster) put_string(buf, c);
  put_blob(buf, paillier::serialize_ciphertext_vector(pk_c, s.ct_global_model));
  put_blob(buf, paillier::serialize_ciphertext_vector(pk_o, s.ct_global_noise));
  put_u32_be(buf, static_cast<uint32_t>(s.pending_gradients.size()));
  for (const auto& [id, v] : s.pending_gradients) {
    put_string(buf, id);
    put_blob(buf, paillier::serialize_ciphertext_vector(pk_c, v));
  }
  put_u32_be(buf, static_cast<uint32_t>(s.pending_noise.size()));
  for (const auto& [id, v] : s.pending_noise) {
    put_string(buf, id);
    put_blob(buf, paillier::serialize_ciphertext_vector(pk_o, v));
  }
  return sha256(buf);
}

struct QueryResult {
  CiphertextVector cts;
  unsigned scale_bits = 0;
  uint64_t round = 0;
};

class Ledger {
 public:
  // Genesis from pre-encrypted vectors; the convenience overload below
  // encrypts a plaintext initial model.
  static Ledger genesis_preencrypted(CiphertextVector model_cts, CiphertextVector noise_cts,
                                     std::vector<std::string> roster, PaillierPublicKey pk_c,
                                     PaillierPublicKey pk_o, unsigned scale_bits,
                                     uint64_t max_tx_bytes = kDefaultMaxTxBytes) {
    if (roster.empty()) fail(Err::kFormat, "roster is empty");
    if (model_cts.empty()) fail(Err::kDimensionMismatch, "model dimension is zero");
    if (model_cts.size() != noise_cts.size())
      fail(Err::kDimensionMismatch, "model/noise dimension mismatch");
    Ledger l(std::move(pk_c), std::move(pk_o), max_tx_bytes);
    std::sort(roster.begin(), roster.end());
    l.state_.roster = std::move(roster);
    l.state_.round = 0;
    l.state_.mean_scalar_q = mean_scalar_for(l.state_.roster.size());
    l.state_.model_scale_bits = scale_bits;
    l.state_.ct_global_model = std::move(model_cts);
    l.state_.ct_global_noise = std::move(noise_cts);
    Transaction genesis_tx =
        make_transaction(TxKind::kGenesis, 0, "trusted-authority", l.genesis_payload());
    l.open_txs_.push_back(std::move(genesis_tx));
    l.seal_block();
    return l;
  }

  // S0: encrypt the initial model under PPK_c and an all-zero noise vector
  // under PPK_o.
  static Ledger genesis(const std::vector<double>& initial_model,
                        std::vector<std::string> roster, const PaillierPublicKey& pk_c,
                        const PaillierPublicKey& pk_o, const FixedPointCodec& codec,
                        SeededRng& rng, uint64_t max_tx_bytes = kDefaultMaxTxBytes) {
    CiphertextVector model_cts = paillier::encrypt_vector(pk_c, initial_model, codec, rng);
    std::vector<double> zeros(initial_model.size(), 0.0);
    FixedPointCodec codec_o(codec.scale_bits(), pk_o.n());
    CiphertextVector noise_cts = paillier::encrypt_vector(pk_o, zeros, codec_o, rng);
    return genesis_preencrypted(std::move(model_cts), std::move(noise_cts), std::move(roster),
                                pk_c, pk_o, codec.scale_bits(), max_tx_bytes);
  }

  // Spec-shaped genesis: the contract draws the random initial model itself.
  static Ledger genesis(size_t model_dim, std::vector<std::string> roster,
                        const PaillierPublicKey& pk_c, const PaillierPublicKey& pk_o,
                        const FixedPointCodec& codec, SeededRng& rng,
                        uint64_t max_tx_bytes = kDefaultMaxTxBytes) {
    if (model_dim == 0) fail(Err::kDimensionMismatch, "model dimension is zero");
    std::vector<double> init(model_dim);
    for (auto& x : init) x = rng.next_gaussian() * 0.05;
    return genesis(init, std::move(roster), pk_c, pk_o, codec, rng, max_tx_bytes);
  }

  const ContractState& state() const { return state_; }
  const std::vector<Block>& chain() const { return chain_; }
  const PaillierPublicKey& pk_c() const { return pk_c_; }
  const PaillierPublicKey& pk_o() const { return pk_o_; }
  uint64_t max_tx_bytes() const { return max_tx_bytes_; }

  // S3: validate and stage an upload; duplicates within a round are rejected.
  Bytes submit(const Transaction& tx) {
    if (tx.kind != TxKind::kUploadGradient && tx.kind != TxKind::kUploadNoise)
      fail(Err::kFormat, "submit only accepts upload transactions");
    if (!state_.in_roster(tx.sender)) fail(Err::kUnauthorized, "unknown sender: " + tx.sender);
    if (tx.round != state_.round)
      fail(Err::kFormat, "upload for round " + std::to_string(tx.round) + " but contract is at " +
                             std::to_string(state_.round));
    if (tx.payload.size() > max_tx_bytes_)
      fail(Err::kTxTooLarge, "transaction of " + std::to_string(tx.payload.size()) +
                                 " bytes exceeds limit " + std::to_string(max_tx_bytes_));
    if (tx.tx_id != tx_digest(tx)) fail(Err::kFormat, "tx_id does not match payload digest");
    apply_upload(tx);
    open_txs_.push_back(tx);
    return tx.tx_id;
  }

  // S4: aggregate once the full roster has uploaded both vectors.
  void aggregate() {
    Transaction tx = make_transaction(TxKind::kAggregate, state_.round, "smart-contract", {});
    apply_aggregate();
    open_txs_.push_back(std::move(tx));
    seal_block();
  }

  // S5 reads; recorded as audit transactions.
  QueryResult query_model(const std::string& sender) {
    open_txs_.push_back(make_transaction(TxKind::kQueryModel, state_.round, sender, {}));
    return QueryResult{state_.ct_global_model, state_.model_scale_bits, state_.round};
  }

  QueryResult query_noise(const std::string& sender) {
    open_txs_.push_back(make_transaction(TxKind::kQueryNoise, state_.round, sender, {}));
    return QueryResult{state_.ct_global_noise, state_.model_scale_bits, state_.round};
  }

  // Off-chain broadcast artifact, digest on-chain.
  void record_broadcast_digest(const Bytes& digest) {
    open_txs_.push_back(
        make_transaction(TxKind::kQueryNoise, state_.round, "oracle", digest));
  }

  bool round_complete() const {
    return state_.pending_gradients.size() == state_.roster.size() &&
           state_.pending_noise.size() == state_.roster.size();
  }

  // ---- audit ----

  struct ReplayResult {
    ContractState state;
    uint64_t blocks_checked = 0;
  };

  // Recomputes the whole state trajectory from the chain, checking tx digests,
  // the block hash chain, and every block's state hash. Any tampering fails
  // with the offending height in the message.
  static ReplayResult audit_replay(const std::vector<Block>& blocks) {
    if (blocks.empty()) fail(Err::kAuditFailure, "empty chain");
    const Block& genesis_block = blocks[0];
    if (genesis_block.height != 0 || genesis_block.txs.empty() ||
        genesis_block.txs[0].kind != TxKind::kGenesis)
      fail(Err::kAuditFailure, "chain does not start at genesis (height 0)");
    Ledger l = from_genesis_payload(genesis_block.txs[0].payload);
    Bytes prev;
    for (const auto& block : blocks) {
      uint64_t h = block.height;
      if (h != 0 && block.prev_hash != prev)
        fail(Err::kAuditFailure, "hash chain broken at height " + std::to_string(h));
      for (const auto& tx : block.txs) {
        if (tx.tx_id != tx_digest(tx))
          fail(Err::kAuditFailure,
               "transaction digest mismatch at height " + std::to_string(h));
        switch (tx.kind) {
          case TxKind::kGenesis:
            if (h != 0) fail(Err::kAuditFailure, "genesis tx beyond height 0");
            break;
          case TxKind::kUploadGradient:
          case TxKind::kUploadNoise:
            try {
              l.replay_validate_upload(tx);
              l.apply_upload(tx);
            } catch (const Error& e) {
              fail(Err::kAuditFailure, "invalid upload at height " + std::to_string(h) + ": " +
                                           e.what());
            }
            break;
          case TxKind::kAggregate:
            try {
              l.apply_aggregate();
            } catch (const Error& e) {
              fail(Err::kAuditFailure,
                   "invalid aggregate at height " + std::to_string(h) + ": " + e.what());
            }
            break;
          case TxKind::kQueryModel:
          case TxKind::kQueryNoise:
            break;  // reads do not change state
        }
      }
      Bytes recomputed = state_digest(l.pk_c_, l.pk_o_, l.state_);
      if (recomputed != block.state_hash)
        fail(Err::kAuditFailure, "state hash divergence at height " + std::to_string(h));
      prev = block_digest(block);
    }
    return ReplayResult{l.state_, blocks.size()};
  }

 private:
  Ledger(PaillierPublicKey pk_c, PaillierPublicKey pk_o, uint64_t max_tx_bytes)
      : pk_c_(std::move(pk_c)), pk_o_(std::move(pk_o)), max_tx_bytes_(max_tx_bytes) {}

  void apply_upload(const Transaction& tx) {
    bool is_gradient = tx.kind == TxKind::kUploadGradient;
    const PaillierPublicKey& pk = is_gradient ? pk_c_ : pk_o_;
    auto& pending = is_gradient ? state_.pending_gradients : state_.pending_noise;
    if (pending.count(tx.sender) != 0)
      fail(Err::kDuplicateUpload, tx.sender + " already uploaded this round");
    uint64_t payload_key = paillier::peek_vector_key_id(tx.payload);
    if (payload_key != pk.key_id())
      fail(Err::kKeyMismatch, std::string(is_gradient ? "gradient" : "noise") +
                                  " upload not under the expected public key");
    CiphertextVector v = paillier::parse_ciphertext_vector(pk, tx.payload);
    if (v.size() != state_.model_dim())
      fail(Err::kDimensionMismatch, "upload dimension " + std::to_string(v.size()) +
                                        " != model dimension " +
                                        std::to_string(state_.model_dim()));
    pending.emplace(tx.sender, std::move(v));
  }

  // Same checks submit() performs before apply (roster, round, size).
  void replay_validate_upload(const Transaction& tx) const {
    if (!state_.in_roster(tx.sender)) fail(Err::kUnauthorized, "unknown sender");
    if (tx.round != state_.round) fail(Err::kFormat, "round mismatch");
    if (tx.payload.size() > max_tx_bytes_) fail(Err::kTxTooLarge, "oversized payload");
  }

  void apply_aggregate() {
    if (!round_complete())
      fail(Err::kNotReady, "aggregate requires the full roster: " +
                               std::to_string(state_.pending_gradients.size()) + "/" +
                               std::to_string(state_.pending_noise.size()) + " of " +
                               std::to_string(state_.roster.size()));
    bool first_round = state_.round == 0;
    fold_into(state_.ct_global_model, state_.pending_gradients, pk_c_, first_round);
    fold_into(state_.ct_global_noise, state_.pending_noise, pk_o_, first_round);
    if (first_round) state_.model_scale_bits += FixedPointCodec::kDivisionScaleBits;
    state_.pending_gradients.clear();
    state_.pending_noise.clear();
    state_.round += 1;
  }

  // CT_sum = fold Add; CT_mean = Multiply(CT_sum, Q); global <- Add(global', CT_mean)
  // where global' carries the one-time 2^16 lift at round 0.
  void fold_into(CiphertextVector& global, const std::map<std::string, CiphertextVector>& uploads,
                 const PaillierPublicKey& pk, bool lift_scale) {
    size_t dim = global.size();
    const uint64_t q = state_.mean_scalar_q;
    const uint64_t lift = 1ull << FixedPointCodec::kDivisionScaleBits;
    std::vector<const CiphertextVector*> vecs;
    vecs.reserve(uploads.size());
    for (const auto& [id, v] : uploads) vecs.push_back(&v);
    parallel_for(dim, [&](size_t i) {
      paillier::PaillierCiphertext sum = (*vecs[0])[i];
      for (size_t c = 1; c < vecs.size(); ++c) sum = paillier::add(pk, sum, (*vecs[c])[i]);
      paillier::PaillierCiphertext mean = paillier::scalar_mul(pk, sum, q);
      paillier::PaillierCiphertext base =
          lift_scale ? paillier::scalar_mul(pk, global[i], lift) : global[i];
      global[i] = paillier::add(pk, base, mean);
    });
  }

  void seal_block() {
    Block b;
    b.height = chain_.size();
    b.prev_hash = chain_.empty() ? Bytes(32, 0) : block_digest(chain_.back());
    b.txs = std::move(open_txs_);
    open_txs_.clear();
    b.state_hash = state_digest(pk_c_, pk_o_, state_);
    chain_.push_back(std::move(b));
  }

  Bytes genesis_payload() const {
    Bytes buf;
    buf.push_back(1);  // payload version
    put_u32_be(buf, pk_c_.key_bits());
    put_string(buf, pk_c_.n().get_str(16));
    put_u32_be(buf, pk_o_.key_bits());
    put_string(buf, pk_o_.n().get_str(16));
    put_u64_be(buf, max_tx_bytes_);
    put_u64_be(buf, state_.mean_scalar_q);
    put_u32_be(buf, state_.model_scale_bits);
    put_u32_be(buf, static_cast<uint32_t>(state_.roster.size()));
    for (const auto& c : state_.roster) put_string(buf, c);
    put_blob(buf, paillier::serialize_ciphertext_vector(pk_c_, state_.ct_global_model));
    put_blob(buf, paillier::serialize_ciphertext_vector(pk_o_, state_.ct_global_noise));
    return buf;
  }

  static Ledger from_genesis_payload(const Bytes& payload) {
    ByteReader r(payload);
    if (r.u8() != 1) fail(Err::kAuditFailure, "unknown genesis payload version");
    uint32_t bits_c = r.u32_be();
    PaillierPublicKey pk_c(paillier::mpz_from_hex(take_string(r)), bits_c);
    uint32_t bits_o = r.u32_be();
    PaillierPublicKey pk_o(paillier::mpz_from_hex(take_string(r)), bits_o);
    uint64_t max_tx = r.u64_be();
    Ledger l(std::move(pk_c), std::move(pk_o), max_tx);
    l.state_.mean_scalar_q = r.u64_be();
    l.state_.model_scale_bits = r.u32_be();
    uint32_t n = r.u32_be();
    for (uint32_t i = 0; i < n; ++i) l.state_.roster.push_back(take_string(r));
    l.state_.ct_global_model = paillier::parse_ciphertext_vector(l.pk_c_, take_blob(r));
    l.state_.ct_global_noise = paillier::parse_ciphertext_vector(l.pk_o_, take_blob(r));
    if (!r.done()) fail(Err::kAuditFailure, "trailing bytes in genesis payload");
    return l;
  }

  PaillierPublicKey pk_c_;
  PaillierPublicKey pk_o_;
  uint64_t max_tx_bytes_;
  ContractState state_;
  std::vector<Block> chain_;
  std::vector<Transaction> open_txs_;
};

// ---- persistence: one length-prefixed block file each + a JSON manifest ----

inline Bytes serialize_block(const Block& b) {
  Bytes buf;
  buf.push_back(1);  // block version
  put_u64_be(buf, b.height);
  put_blob(buf, b.prev_hash);
  put_u32_be(buf, static_cast<uint32_t>(b.txs.size()));
  for (const auto& tx : b.txs) {
    put_blob(buf, tx.tx_id);
    buf.push_back(static_cast<uint8_t>(tx.kind));
    put_u64_be(buf, tx.round);
    put_string(buf, tx.sender);
    put_blob(buf, tx.payload);
  }
  put_blob(buf, b.state_hash);
  return buf;
}

inline Block parse_block(const Bytes& data) {
  ByteReader r(data);
  if (r.u8() != 1) fail(Err::kFormat, "unknown block version");
  Block b;
  b.height = r.u64_be();
  b.prev_hash = take_blob(r);
  uint32_t n = r.u32_be();
  for (uint32_t i = 0; i < n; ++i) {
    Transaction tx;
    tx.tx_id = take_blob(r);
    tx.kind = static_cast<TxKind>(r.u8());
    tx.round = r.u64_be();
    tx.sender = take_string(r);
    tx.payload = take_blob(r);
    b.txs.push_back(std::move(tx));
  }
  b.state_hash = take_blob(r);
  if (!r.done()) fail(Err::kFormat, "trailing bytes in block");
  return b;
}

inline std::string block_file_name(uint64_t height) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "block_%06llu.bin", static_cast<unsigned long long>(height));
  return buf;
}

inline void write_chain(const std::filesystem::path& dir, const std::vector<Block>& blocks) {
  std::filesystem::create_directories(dir);
  for (const auto& b : blocks) {
    Bytes body = serialize_block(b);
    Bytes framed;
    put_u32_be(framed, static_cast<uint32_t>(body.size()));
    framed.insert(framed.end(), body.begin(), body.end());
    std::ofstream out(dir / block_file_name(b.height), std::ios::binary | std::ios::trunc);
    if (!out) fail(Err::kIo, "cannot write block file");
    out.write(reinterpret_cast<const char*>(framed.data()),
              static_cast<std::streamsize>(framed.size()));
  }
  const Block& tip = blocks.back();
  std::ofstream manifest(dir / "manifest.json", std::ios::trunc);
  if (!manifest) fail(Err::kIo, "cannot write manifest");
  manifest << "{\n  \"height\": " << tip.height << ",\n  \"state_hash\": \""
           << to_hex(tip.state_hash) << "\"\n}\n";
}

inline std::vector<Block> read_chain(const std::filesystem::path& dir) {
  std::vector<Block> blocks;
  for (uint64_t h = 0;; ++h) {
    std::filesystem::path file = dir / block_file_name(h);
    if (!std::filesystem::exists(file)) break;
    std::ifstream in(file, std::ios::binary);
    if (!in) fail(Err::kIo, "cannot read block file " + file.string());
    Bytes framed((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    ByteReader r(framed);
    uint32_t len = r.u32_be();
    Bytes body = r.take(len);
    if (!r.done()) fail(Err::kFormat, "trailing bytes in block file");
    blocks.push_back(parse_block(body));
  }
  if (blocks.empty()) fail(Err::kIo, "no blocks found in " + dir.string());
  return blocks;
}

}  // namespace aerisai::ledger
