#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aerisai/common.hpp"
#include "aerisai/cpabe.hpp"
#include "aerisai/ledger.hpp"
#include "aerisai/mlkit.hpp"
#include "aerisai/oracle.hpp"
#include "aerisai/paillier.hpp"
#include "aerisai/rng.hpp"
#include "aerisai/symwrap.hpp"

// The honest-but-curious participant: local training (S1), Gaussian
// perturbation (S2), dual encryption and upload (S3) — gradients under the
// clients' shared key, noise under the oracle's key — and download / unwrap /
// noise removal / model replacement (S5-S7).

namespace aerisai::client {

struct DpConfig {
  double epsilon = 0.0;  // informational once sigma is fixed
  double sigma = 0.0;
  double mu = 0.0;
  double clip_c = 1.0;

  // Gaussian-mechanism calibration sigma = clip * sqrt(2 ln(1.25/delta)) / eps
  // with delta = 1e-5.
  static double sigma_for_epsilon(double epsilon, double clip_c, double delta = 1e-5) {
    if (epsilon <= 0.0) fail(Err::kFormat, "privacy budget must be positive");
    return clip_c * std::sqrt(2.0 * std::log(1.25 / delta)) / epsilon;
  }

  static DpConfig from_epsilon(double epsilon, double clip_c = 1.0) {
    DpConfig dp;
    dp.epsilon = epsilon;
    dp.clip_c = clip_c;
    dp.sigma = sigma_for_epsilon(epsilon, clip_c);
    return dp;
  }

  static DpConfig from_sigma(double sigma, double clip_c = 1.0) {
    DpConfig dp;
    dp.sigma = sigma;
    dp.clip_c = clip_c;
    return dp;
  }
};

// Which model the gradient is measured against (S1 reads both ways; see the
// workflow docs). kDenoised keeps the on-ledger noise accumulator and the
// model's noise content aligned and is the default.
enum class DeltaBase { kDenoised, kNoisy };

// delta = clip_inf(theta_new - theta_base)
inline std::vector<double> compute_delta(const std::vector<double>& theta_new,
                                         const std::vector<double>& theta_base,
                                         double clip_c) {
  if (theta_new.size() != theta_base.size())
    fail(Err::kDimensionMismatch, "parameter dimension mismatch");
  std::vector<double> delta(theta_new.size());
  for (size_t i = 0; i < delta.size(); ++i) {
    double d = theta_new[i] - theta_base[i];
    if (d > clip_c) d = clip_c;
    if (d < -clip_c) d = -clip_c;
    delta[i] = d;
  }
  return delta;
}

struct Perturbed {
  std::vector<double> delta_hat;  // delta + zeta, exact in float
  std::vector<double> zeta;
};

inline Perturbed perturb(const std::vector<double>& delta, const DpConfig& dp, SeededRng& rng) {
  Perturbed out;
  out.delta_hat.resize(delta.size());
  out.zeta.resize(delta.size());
  for (size_t i = 0; i < delta.size(); ++i) {
    double z = dp.sigma > 0.0 ? dp.mu + dp.sigma * rng.next_gaussian() : dp.mu;
    out.zeta[i] = z;
    out.delta_hat[i] = delta[i] + z;
  }
  return out;
}

struct UploadReceipts {
  Bytes gradient_tx;
  Bytes noise_tx;
};

class Client {
 public:
  struct Init {
    std::string id;
    mlkit::Dataset shard;
    mlkit::MlpSpec arch;
    paillier::PaillierPublicKey ppk_c;
    paillier::PaillierPrivateKey sk_c;
    paillier::PaillierPublicKey ppk_o;
    const pairing::Curve* curve = nullptr;
    cpabe::CpabeUserKey abe_key;
    DpConfig dp;
    DeltaBase delta_base = DeltaBase::kDenoised;
    mlkit::TrainConfig train;
    uint64_t train_seed = 0;
    uint64_t noise_seed = 0;
    uint64_t crypto_seed = 0;
  };

  explicit Client(Init init)
      : id_(std::move(init.id)),
        shard_(std::move(init.shard)),
        arch_(std::move(init.arch)),
        ppk_c_(std::move(init.ppk_c)),
        sk_c_(std::move(init.sk_c)),
        ppk_o_(std::move(init.ppk_o)),
        curve_(init.curve),
        abe_key_(std::move(init.abe_key)),
        dp_(init.dp),
        delta_base_(init.delta_base),
        train_cfg_(init.train),
        codec_c_(paillier::FixedPointCodec::kDefaultScaleBits, ppk_c_.n()),
        codec_o_(paillier::FixedPointCodec::kDefaultScaleBits, ppk_o_.n()),
        train_seed_(init.train_seed),
        noise_seed_(init.noise_seed),
        crypto_seed_(init.crypto_seed) {
    if (sk_c_.n() != ppk_c_.n()) fail(Err::kKeyMismatch, "client keypair mismatch");
  }

  const std::string& id() const { return id_; }
  const std::vector<double>& local_model() const { return local_model_; }
  const std::vector<double>& last_noise() const { return last_noise_; }
  const DpConfig& dp() const { return dp_; }
  const cpabe::CpabeUserKey& abe_key() const { return abe_key_; }
  const mlkit::Dataset& shard() const { return shard_; }
  bool degraded() const { return degraded_; }

  // S1: local epochs from theta_start; deterministic in (seed, round).
  std::vector<double> local_train(const std::vector<double>& theta_start, uint64_t round) {
    if (shard_.size() == 0) fail(Err::kEmptyDataset, "client shard is empty");
    if (theta_start.size() != arch_.param_count())
      fail(Err::kDimensionMismatch, "global parameter dimension mismatch");
    if (train_cfg_.epochs == 0) return theta_start;
    SeededRng rng = SeededRng(train_seed_).fork(round);
    return mlkit::train(arch_, theta_start, shard_, train_cfg_, rng);
  }

  // S2: zeta ~ N(mu, sigma^2) per coordinate; the very same zeta is retained
  // for the encrypted noise upload.
  Perturbed perturb_delta(const std::vector<double>& delta, uint64_t round) {
    SeededRng rng = SeededRng(noise_seed_).fork(round);
    Perturbed p = perturb(delta, dp_, rng);
    last_noise_ = p.zeta;
    return p;
  }

  // S3: gradients under PPK_c, noise under PPK_o.
  UploadReceipts encrypt_and_upload(ledger::Ledger& ledger, const std::vector<double>& delta_hat,
                                    const std::vector<double>& zeta, uint64_t round) {
    SeededRng rng = SeededRng(crypto_seed_).fork(round);
    SeededRng rng_grad = rng.fork(1);
    SeededRng rng_noise = rng.fork(2);
    paillier::CiphertextVector grad_cts =
        paillier::encrypt_vector(ppk_c_, delta_hat, codec_c_, rng_grad);
    paillier::CiphertextVector noise_cts =
        paillier::encrypt_vector(ppk_o_, zeta, codec_o_, rng_noise);
    UploadReceipts r;
    r.gradient_tx = ledger.submit(ledger::make_transaction(
        ledger::TxKind::kUploadGradient, round, id_,
        paillier::serialize_ciphertext_vector(ppk_c_, grad_cts)));
    r.noise_tx = ledger.submit(ledger::make_transaction(
        ledger::TxKind::kUploadNoise, round, id_,
        paillier::serialize_ciphertext_vector(ppk_o_, noise_cts)));
    return r;
  }

  // S6 model half: theta_G (still noisy) from the contract.
  std::vector<double> download_model(ledger::Ledger& ledger) {
    ledger::QueryResult q = ledger.query_model(id_);
    last_model_scale_bits_ = q.scale_bits;
    return paillier::decrypt_vector(ppk_c_, sk_c_, q.cts, codec_c_, q.scale_bits);
  }

  // S6/S7 noise half: unwrap SEK via CP-ABE, open the sealed noise, subtract.
  // On access denial the client keeps the noisy model (degraded mode).
  std::vector<double> restore(const std::vector<double>& theta_noisy,
                              const oracle::NoiseBroadcast* broadcast) {
    if (broadcast == nullptr) {  // noise removal disabled (SPDL-like mode)
      local_model_ = theta_noisy;
      return local_model_;
    }
    cpabe::SessionKeyBytes sek_bytes;
    try {
      sek_bytes = cpabe::decrypt(*curve_, broadcast->wrapped_key, abe_key_);
    } catch (const Error& e) {
      if (e.code() == Err::kPolicyUnsatisfied) {
        degraded_ = true;
        local_model_ = theta_noisy;
        throw Error(Err::kAccessDenied, "attributes do not grant noise access; keeping noisy model");
      }
      throw;
    }
    symwrap::SessionKey sek(sek_bytes);
    std::vector<double> zeta_g = symwrap::open(sek, broadcast->sealed);
    if (zeta_g.size() != theta_noisy.size())
      fail(Err::kDimensionMismatch, "broadcast noise dimension mismatch");
    std::vector<double> restored(theta_noisy.size());
    for (size_t i = 0; i < restored.size(); ++i) restored[i] = theta_noisy[i] - zeta_g[i];
    degraded_ = false;
    local_model_ = restored;
    return restored;
  }

  std::vector<double> download_and_restore(ledger::Ledger& ledger,
                                           const oracle::NoiseBroadcast* broadcast) {
    std::vector<double> noisy = download_model(ledger);
    return restore(noisy, broadcast);
  }

  DeltaBase delta_base() const { return delta_base_; }
  const paillier::FixedPointCodec& codec_c() const { return codec_c_; }
  const paillier::PaillierPrivateKey& sk_c() const { return sk_c_; }
  const paillier::PaillierPublicKey& ppk_c() const { return ppk_c_; }
  unsigned last_model_scale_bits() const { return last_model_scale_bits_; }

 private:
  std::string id_;
  mlkit::Dataset shard_;
  mlkit::MlpSpec arch_;
  paillier::PaillierPublicKey ppk_c_;
  paillier::PaillierPrivateKey sk_c_;
  paillier::PaillierPublicKey ppk_o_;
  const pairing::Curve* curve_;
  cpabe::CpabeUserKey abe_key_;
  DpConfig dp_;
  DeltaBase delta_base_;
  mlkit::TrainConfig train_cfg_;
  paillier::FixedPointCodec codec_c_;
  paillier::FixedPointCodec codec_o_;
  uint64_t train_seed_;
  uint64_t noise_seed_;
  uint64_t crypto_seed_;
  std::vector<double> local_model_;
  std::vector<double> last_noise_;
  unsigned last_model_scale_bits_ = 0;
  bool degraded_ = false;
};

}  // namespace aerisai::client
