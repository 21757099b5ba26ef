#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "aerisai/client.hpp"
#include "aerisai/common.hpp"
#include "aerisai/cpabe.hpp"
#include "aerisai/ledger.hpp"
#include "aerisai/mlkit.hpp"
#include "aerisai/oracle.hpp"
#include "aerisai/paillier.hpp"
#include "aerisai/rng.hpp"

// Trusted-authority key ceremony (S0), experiment orchestration, baselines,
// metrics and timing emission. Schemes:
//   aerisai     - full pipeline S0-S7
//   safl        - plaintext federated averaging, same training trajectory
//   local       - each client trains alone; accuracy is the client average
//   centralized - one model on the merged data (accuracy upper bound)
//   spdl_like   - aerisai pipeline with noise removal disabled

namespace aerisai::harness {

enum class Scheme { kAerisai, kSafl, kLocal, kCentralized, kSpdlLike };
enum class DatasetKind { kSynthetic, kMnist };

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::kAerisai: return "aerisai";
    case Scheme::kSafl: return "safl";
    case Scheme::kLocal: return "local";
    case Scheme::kCentralized: return "centralized";
    case Scheme::kSpdlLike: return "spdl_like";
  }
  return "?";
}

inline Scheme scheme_from_name(const std::string& s) {
  if (s == "aerisai") return Scheme::kAerisai;
  if (s == "safl") return Scheme::kSafl;
  if (s == "local") return Scheme::kLocal;
  if (s == "centralized") return Scheme::kCentralized;
  if (s == "spdl_like") return Scheme::kSpdlLike;
  fail(Err::kFormat, "unknown scheme: " + s);
}

struct ExperimentConfig {
  Scheme scheme = Scheme::kAerisai;
  size_t n_clients = 5;
  unsigned rounds = 30;
  DatasetKind dataset = DatasetKind::kSynthetic;
  unsigned key_bits = 1024;
  double budget = 0.0;  // epsilon; when 0, sigma is taken directly
  double sigma = 0.0;
  double clip_c = 1.0;
  std::string policy_text = "role:client AND sla:gold";
  std::set<std::string> default_attrs = {"role:client", "sla:gold"};
  std::map<std::string, std::set<std::string>> client_attrs;  // per-id override
  uint64_t seed_data = 1;
  uint64_t seed_crypto = 2;
  uint64_t seed_noise = 3;
  std::vector<size_t> layers;  // empty: dataset default
  unsigned local_epochs = 1;
  size_t batch_size = 64;
  double lr = 0.001;
  client::DeltaBase delta_base = client::DeltaBase::kDenoised;
  std::string curve = "ss512";
  paillier::RandomizerMode randomizer = paillier::RandomizerMode::kFixedBase;
  size_t synth_train = 2000;
  size_t synth_test = 4000;
  size_t synth_dim = 16;
  size_t synth_classes = 4;
  std::string mnist_dir;
  size_t train_cap = 0;  // 0 = use everything
  std::string out_dir;
  uint64_t max_tx_bytes = ledger::kDefaultMaxTxBytes;

  std::string client_id(size_t i) const { return "client_" + std::to_string(i); }

  std::set<std::string> attrs_for(const std::string& id) const {
    auto it = client_attrs.find(id);
    return it == client_attrs.end() ? default_attrs : it->second;
  }

  client::DpConfig dp() const {
    if (budget > 0.0) {
      client::DpConfig d = client::DpConfig::from_epsilon(budget, clip_c);
      return d;
    }
    client::DpConfig d = client::DpConfig::from_sigma(sigma, clip_c);
    return d;
  }

  mlkit::MlpSpec arch() const {
    if (!layers.empty()) return mlkit::MlpSpec{layers};
    return dataset == DatasetKind::kMnist ? mlkit::MlpSpec::mnist()
                                          : mlkit::MlpSpec{{synth_dim, 32, 16, synth_classes}};
  }

  std::string canonical_string() const {
    std::ostringstream os;
    os << "scheme=" << scheme_name(scheme) << ";clients=" << n_clients << ";rounds=" << rounds
       << ";dataset=" << (dataset == DatasetKind::kMnist ? "mnist" : "synthetic")
       << ";key_bits=" << key_bits << ";budget=" << budget << ";sigma=" << sigma
       << ";clip=" << clip_c << ";policy=" << policy_text << ";seed_data=" << seed_data
       << ";seed_crypto=" << seed_crypto << ";seed_noise=" << seed_noise << ";layers=";
    for (size_t d : arch().dims) os << d << ",";
    os << ";epochs=" << local_epochs << ";batch=" << batch_size << ";lr=" << lr
       << ";delta_base=" << (delta_base == client::DeltaBase::kDenoised ? "denoised" : "noisy")
       << ";curve=" << curve << ";randomizer="
       << (randomizer == paillier::RandomizerMode::kFull ? "full" : "fixed_base")
       << ";synth=" << synth_train << "/" << synth_test << "/" << synth_dim << "/"
       << synth_classes << ";train_cap=" << train_cap;
    return os.str();
  }

  Bytes config_hash() const { return sha256(canonical_string()); }

  void validate() const {
    if (n_clients == 0) fail(Err::kFormat, "clients must be positive");
    if (rounds == 0) fail(Err::kFormat, "rounds must be positive");
    if (!paillier::valid_key_bits(key_bits)) fail(Err::kFormat, "key_bits must be 1024/2048/3072");
    if (budget < 0.0 || sigma < 0.0) fail(Err::kFormat, "negative privacy parameter");
    if (clip_c <= 0.0) fail(Err::kFormat, "clip bound must be positive");
    cpabe::parse_policy(policy_text);  // throws with position on bad grammar
    pairing::Curve::by_name(curve);
    if (dataset == DatasetKind::kMnist && mnist_dir.empty())
      fail(Err::kFormat, "mnist dataset requires mnist_dir");
  }
};

struct RoundMetrics {
  unsigned round = 0;  // 1-based
  double accuracy = 0.0;
  double t_upload_ms = 0.0;
  double t_update_ms = 0.0;
  double t_model_dl_ms = 0.0;
  double t_noise_dl_ms = 0.0;
  uint64_t ledger_bytes = 0;
};

struct ExperimentResult {
  std::vector<RoundMetrics> metrics;
  double final_accuracy = 0.0;
  std::vector<ledger::Block> chain;  // aerisai / spdl_like only
  std::string config_hash_hex;
};

// ---- key ceremony (S0) ----

struct CeremonyKeys {
  paillier::PaillierKeypair client_kp;  // (PPK_c, SK_c), shared by the roster
  paillier::PaillierKeypair oracle_kp;  // (PPK_o, SK_o)
  cpabe::CpabePublicParams abe_pk;
  std::map<std::string, cpabe::CpabeUserKey> user_keys;
  std::map<std::string, std::set<std::string>> attrs;
};

// The CP-ABE master key lives only inside this call and is dropped on return.
inline CeremonyKeys key_ceremony(const ExperimentConfig& cfg, SeededRng& rng) {
  CeremonyKeys out;
  SeededRng rng_c = rng.fork(0x636c69656e74);  // "client"
  SeededRng rng_o = rng.fork(0x6f7261636c65);  // "oracle"
  out.client_kp = paillier::paillier_setup(cfg.key_bits, rng_c, cfg.randomizer);
  out.oracle_kp = paillier::paillier_setup(cfg.key_bits, rng_o, cfg.randomizer);
  const pairing::Curve& curve = pairing::Curve::by_name(cfg.curve);
  SeededRng rng_abe = rng.fork(0x616265);
  auto [abe_pk, abe_mk] = cpabe::cpabe_setup(curve, rng_abe);
  out.abe_pk = abe_pk;
  for (size_t i = 0; i < cfg.n_clients; ++i) {
    std::string id = cfg.client_id(i);
    std::set<std::string> attrs = cfg.attrs_for(id);
    SeededRng rng_key = rng.fork(0x757365726b * (i + 1));
    out.user_keys.emplace(id, cpabe::keygen(out.abe_pk, abe_mk, attrs, rng_key));
    out.attrs.emplace(id, std::move(attrs));
  }
  return out;
}

inline void write_key_files(const std::filesystem::path& dir, const CeremonyKeys& keys) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "clients");
  fs::create_directories(dir / "oracle");
  auto write = [](const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::trunc);
    if (!out) fail(Err::kIo, "cannot write " + p.string());
    out << text;
  };
  auto write_bytes = [](const fs::path& p, const Bytes& b) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) fail(Err::kIo, "cannot write " + p.string());
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  };
  // Every client holds the shared keypair; the oracle bundle holds SK_o and
  // never SK_c.
  write(dir / "clients" / "ppk_c.json", paillier::public_key_json(keys.client_kp.pk));
  write(dir / "clients" / "sk_c.json", paillier::private_key_json(keys.client_kp.sk));
  write(dir / "clients" / "ppk_o.json", paillier::public_key_json(keys.oracle_kp.pk));
  write(dir / "oracle" / "ppk_o.json", paillier::public_key_json(keys.oracle_kp.pk));
  write(dir / "oracle" / "sk_o.json", paillier::private_key_json(keys.oracle_kp.sk));
  write(dir / "oracle" / "ppk_c.json", paillier::public_key_json(keys.client_kp.pk));
  const pairing::Curve& curve = *keys.abe_pk.curve;
  for (const auto& [id, key] : keys.user_keys)
    write_bytes(dir / "clients" / (id + ".abekey"), cpabe::serialize_user_key(curve, key));
}

// ---- experiment driver ----

namespace detail {

inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

struct DataSplit {
  mlkit::Dataset train;
  mlkit::Dataset test;
};

inline DataSplit load_data(const ExperimentConfig& cfg) {
  DataSplit out;
  if (cfg.dataset == DatasetKind::kSynthetic) {
    mlkit::Dataset all = mlkit::make_synthetic(cfg.synth_train + cfg.synth_test, cfg.synth_dim,
                                               cfg.synth_classes, cfg.seed_data);
    out.train = mlkit::head(all, cfg.synth_train);
    out.test = mlkit::tail_from(all, cfg.synth_train);
  } else {
    namespace fs = std::filesystem;
    fs::path dir = cfg.mnist_dir;
    out.train = mlkit::load_mnist(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
    out.test = mlkit::load_mnist(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
  }
  if (cfg.train_cap > 0 && out.train.size() > cfg.train_cap)
    out.train = mlkit::head(out.train, cfg.train_cap);
  return out;
}

inline uint64_t train_seed_for(const ExperimentConfig& cfg, size_t i) {
  return aerisai::detail::splitmix64(cfg.seed_data ^ (0x747261696eULL + i * 1315423911ULL));
}

inline std::vector<double> initial_model(const ExperimentConfig& cfg) {
  SeededRng rng = SeededRng(cfg.seed_data).fork(0x696e6974);  // "init"
  return mlkit::init_params(cfg.arch(), rng);
}

// Shared local-training step so aerisai, safl and the baselines follow
// bit-identical trajectories given the same seeds.
inline std::vector<double> train_step(const ExperimentConfig& cfg, const mlkit::MlpSpec& arch,
                                      const std::vector<double>& start,
                                      const mlkit::Dataset& shard, size_t client_index,
                                      uint64_t round) {
  mlkit::TrainConfig tc;
  tc.epochs = cfg.local_epochs;
  tc.batch_size = cfg.batch_size;
  tc.lr = cfg.lr;
  SeededRng rng = SeededRng(train_seed_for(cfg, client_index)).fork(round);
  return mlkit::train(arch, start, shard, tc, rng);
}

}  // namespace detail

inline ExperimentResult run_protocol(const ExperimentConfig& cfg, const detail::DataSplit& data,
                                     bool remove_noise) {
  const mlkit::MlpSpec arch = cfg.arch();
  const client::DpConfig dp = cfg.dp();
  std::vector<double> theta0 = detail::initial_model(cfg);

  SeededRng crypto_rng(cfg.seed_crypto);
  CeremonyKeys keys = key_ceremony(cfg, crypto_rng);
  const pairing::Curve& curve = pairing::Curve::by_name(cfg.curve);

  std::vector<std::string> roster;
  for (size_t i = 0; i < cfg.n_clients; ++i) roster.push_back(cfg.client_id(i));
  auto shards = mlkit::partition(data.train, cfg.n_clients,
                                 SeededRng(cfg.seed_data).fork(0x7368617264).seed());

  std::vector<client::Client> clients;
  clients.reserve(cfg.n_clients);
  for (size_t i = 0; i < cfg.n_clients; ++i) {
    client::Client::Init init;
    init.id = roster[i];
    init.shard = std::move(shards[i]);
    init.arch = arch;
    init.ppk_c = keys.client_kp.pk;
    init.sk_c = keys.client_kp.sk;
    init.ppk_o = keys.oracle_kp.pk;
    init.curve = &curve;
    init.abe_key = keys.user_keys.at(roster[i]);
    init.dp = dp;
    init.delta_base = cfg.delta_base;
    init.train.epochs = cfg.local_epochs;
    init.train.batch_size = cfg.batch_size;
    init.train.lr = cfg.lr;
    init.train_seed = detail::train_seed_for(cfg, i);
    init.noise_seed = aerisai::detail::splitmix64(cfg.seed_noise ^ (0x6e6f697365ULL + i));
    init.crypto_seed = aerisai::detail::splitmix64(cfg.seed_crypto ^ (0x656e63ULL + i * 7919));
    clients.emplace_back(std::move(init));
  }

  SeededRng genesis_rng = SeededRng(cfg.seed_crypto).fork(0x67656e);
  paillier::FixedPointCodec codec_c(paillier::FixedPointCodec::kDefaultScaleBits,
                                    keys.client_kp.pk.n());
  paillier::FixedPointCodec codec_o(paillier::FixedPointCodec::kDefaultScaleBits,
                                    keys.oracle_kp.pk.n());
  ledger::Ledger chain_ledger = ledger::Ledger::genesis(
      theta0, roster, keys.client_kp.pk, keys.oracle_kp.pk, codec_c, genesis_rng,
      cfg.max_tx_bytes);
  oracle::Oracle noise_oracle(keys.oracle_kp.pk, keys.oracle_kp.sk, keys.abe_pk,
                              SeededRng(cfg.seed_crypto).fork(0x6f72).seed());

  ExperimentResult result;
  result.metrics.resize(cfg.rounds);
  result.config_hash_hex = to_hex(cfg.config_hash());

  std::filesystem::path broadcast_dir;
  if (!cfg.out_dir.empty() && remove_noise) {
    broadcast_dir = std::filesystem::path(cfg.out_dir) /
                    (std::string("broadcasts_") + scheme_name(cfg.scheme));
    std::filesystem::create_directories(broadcast_dir);
  }

  auto run_downloads = [&](uint64_t round, double* t_model, double* t_noise) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<std::vector<double>> noisy(cfg.n_clients);
    for (size_t i = 0; i < cfg.n_clients; ++i) noisy[i] = clients[i].download_model(chain_ledger);
    if (t_model) *t_model = detail::ms_since(t0);

    auto t1 = std::chrono::steady_clock::now();
    if (remove_noise) {
      ledger::QueryResult qn = chain_ledger.query_noise("oracle");
      oracle::NoiseBroadcast broadcast = noise_oracle.process_noise_request(
          qn.cts, codec_o, qn.scale_bits, cfg.policy_text, round);
      Bytes wire = serialize_broadcast(curve, broadcast);
      // Artifact off-chain, digest on-chain.
      chain_ledger.record_broadcast_digest(sha256(wire));
      if (!broadcast_dir.empty()) {
        std::ofstream out(broadcast_dir / ("round_" + std::to_string(round) + ".bin"),
                          std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(wire.data()),
                  static_cast<std::streamsize>(wire.size()));
      }
      for (size_t i = 0; i < cfg.n_clients; ++i) clients[i].restore(noisy[i], &broadcast);
    } else {
      for (size_t i = 0; i < cfg.n_clients; ++i) clients[i].restore(noisy[i], nullptr);
    }
    if (t_noise) *t_noise = detail::ms_since(t1);
    return noisy;
  };

  for (unsigned k = 0; k < cfg.rounds; ++k) {
    try {
      RoundMetrics& m = result.metrics[k];
      m.round = k + 1;
      auto noisy = run_downloads(k, &m.t_model_dl_ms, &m.t_noise_dl_ms);
      if (k > 0) result.metrics[k - 1].accuracy =
          mlkit::evaluate(arch, clients[0].local_model(), data.test);

      auto t2 = std::chrono::steady_clock::now();
      for (size_t i = 0; i < cfg.n_clients; ++i) {
        std::vector<double> trained = clients[i].local_train(clients[i].local_model(), k);
        const std::vector<double>& base =
            cfg.delta_base == client::DeltaBase::kNoisy ? noisy[i] : clients[i].local_model();
        std::vector<double> delta = client::compute_delta(trained, base, dp.clip_c);
        client::Perturbed p = clients[i].perturb_delta(delta, k);
        clients[i].encrypt_and_upload(chain_ledger, p.delta_hat, p.zeta, k);
      }
      m.t_upload_ms = detail::ms_since(t2);

      auto t3 = std::chrono::steady_clock::now();
      chain_ledger.aggregate();
      m.t_update_ms = detail::ms_since(t3);
      m.ledger_bytes = 0;
      for (const auto& tx : chain_ledger.chain().back().txs) m.ledger_bytes += tx.size_bytes();
    } catch (const Error& e) {
      fail(e.code(), "round " + std::to_string(k + 1) + ": " + e.what());
    }
  }

  run_downloads(cfg.rounds, nullptr, nullptr);
  result.metrics.back().accuracy =
      mlkit::evaluate(arch, clients[0].local_model(), data.test);
  result.final_accuracy = result.metrics.back().accuracy;
  result.chain = chain_ledger.chain();
  return result;
}

inline ExperimentResult run_safl(const ExperimentConfig& cfg, const detail::DataSplit& data) {
  const mlkit::MlpSpec arch = cfg.arch();
  std::vector<double> model = detail::initial_model(cfg);
  auto shards = mlkit::partition(data.train, cfg.n_clients,
                                 SeededRng(cfg.seed_data).fork(0x7368617264).seed());
  ExperimentResult result;
  result.config_hash_hex = to_hex(cfg.config_hash());
  for (unsigned k = 0; k < cfg.rounds; ++k) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<double> mean(model.size(), 0.0);
    for (size_t i = 0; i < cfg.n_clients; ++i) {
      std::vector<double> trained = detail::train_step(cfg, arch, model, shards[i], i, k);
      std::vector<double> delta = client::compute_delta(trained, model, cfg.clip_c);
      for (size_t j = 0; j < mean.size(); ++j) mean[j] += delta[j];
    }
    for (auto& v : mean) v /= static_cast<double>(cfg.n_clients);
    for (size_t j = 0; j < model.size(); ++j) model[j] += mean[j];
    RoundMetrics m;
    m.round = k + 1;
    m.t_update_ms = detail::ms_since(t0);
    m.accuracy = mlkit::evaluate(arch, model, data.test);
    result.metrics.push_back(m);
  }
  result.final_accuracy = result.metrics.back().accuracy;
  return result;
}

inline ExperimentResult run_local(const ExperimentConfig& cfg, const detail::DataSplit& data) {
  const mlkit::MlpSpec arch = cfg.arch();
  auto shards = mlkit::partition(data.train, cfg.n_clients,
                                 SeededRng(cfg.seed_data).fork(0x7368617264).seed());
  std::vector<std::vector<double>> models(cfg.n_clients, detail::initial_model(cfg));
  ExperimentResult result;
  result.config_hash_hex = to_hex(cfg.config_hash());
  for (unsigned k = 0; k < cfg.rounds; ++k) {
    auto t0 = std::chrono::steady_clock::now();
    double acc_sum = 0.0;
    for (size_t i = 0; i < cfg.n_clients; ++i) {
      models[i] = detail::train_step(cfg, arch, models[i], shards[i], i, k);
      acc_sum += mlkit::evaluate(arch, models[i], data.test);
    }
    RoundMetrics m;
    m.round = k + 1;
    m.t_update_ms = detail::ms_since(t0);
    m.accuracy = acc_sum / static_cast<double>(cfg.n_clients);
    result.metrics.push_back(m);
  }
  result.final_accuracy = result.metrics.back().accuracy;
  return result;
}

inline ExperimentResult run_centralized(const ExperimentConfig& cfg,
                                        const detail::DataSplit& data) {
  const mlkit::MlpSpec arch = cfg.arch();
  std::vector<double> model = detail::initial_model(cfg);
  ExperimentResult result;
  result.config_hash_hex = to_hex(cfg.config_hash());
  for (unsigned k = 0; k < cfg.rounds; ++k) {
    auto t0 = std::chrono::steady_clock::now();
    model = detail::train_step(cfg, arch, model, data.train, 0, k);
    RoundMetrics m;
    m.round = k + 1;
    m.t_update_ms = detail::ms_since(t0);
    m.accuracy = mlkit::evaluate(arch, model, data.test);
    result.metrics.push_back(m);
  }
  result.final_accuracy = result.metrics.back().accuracy;
  return result;
}

// ---- metrics emission ----

inline std::string metrics_csv(Scheme scheme, const std::vector<RoundMetrics>& metrics) {
  std::ostringstream os;
  os << "scheme,round,accuracy,t_upload_ms,t_update_ms,t_model_dl_ms,t_noise_dl_ms,"
        "ledger_bytes\n";
  os.setf(std::ios::fixed);
  for (const auto& m : metrics) {
    os.precision(6);
    os << scheme_name(scheme) << ',' << m.round << ',' << m.accuracy << ',';
    os.precision(3);
    os << m.t_upload_ms << ',' << m.t_update_ms << ',' << m.t_model_dl_ms << ','
       << m.t_noise_dl_ms << ',' << m.ledger_bytes << '\n';
  }
  return os.str();
}

inline void persist_result(const ExperimentConfig& cfg, const ExperimentResult& result) {
  if (cfg.out_dir.empty()) return;
  namespace fs = std::filesystem;
  fs::path dir = cfg.out_dir;
  fs::create_directories(dir);
  {
    std::ofstream csv(dir / (std::string("metrics_") + scheme_name(cfg.scheme) + ".csv"),
                      std::ios::trunc);
    if (!csv) fail(Err::kIo, "cannot write metrics CSV");
    csv << metrics_csv(cfg.scheme, result.metrics);
  }
  {
    std::ofstream meta(dir / (std::string("run_") + scheme_name(cfg.scheme) + ".json"),
                       std::ios::trunc);
    meta << "{\n  \"scheme\": \"" << scheme_name(cfg.scheme) << "\",\n  \"config_hash\": \""
         << result.config_hash_hex << "\",\n  \"final_accuracy\": " << result.final_accuracy
         << ",\n  \"rounds\": " << result.metrics.size() << "\n}\n";
  }
  {
    std::ofstream conf(dir / (std::string("config_") + scheme_name(cfg.scheme) + ".txt"),
                       std::ios::trunc);
    conf << cfg.canonical_string() << '\n';
  }
  if (!result.chain.empty())
    ledger::write_chain(dir / (std::string("chain_") + scheme_name(cfg.scheme)), result.chain);
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  detail::DataSplit data = detail::load_data(cfg);
  if (!cfg.out_dir.empty() && cfg.dataset == DatasetKind::kSynthetic) {
    std::filesystem::create_directories(cfg.out_dir);
    mlkit::write_synthetic_csv(data.train,
                               std::filesystem::path(cfg.out_dir) / "synthetic_train.csv");
  }
  ExperimentResult result;
  switch (cfg.scheme) {
    case Scheme::kAerisai:
      result = run_protocol(cfg, data, /*remove_noise=*/true);
      break;
    case Scheme::kSpdlLike:
      result = run_protocol(cfg, data, /*remove_noise=*/false);
      break;
    case Scheme::kSafl:
      result = run_safl(cfg, data);
      break;
    case Scheme::kLocal:
      result = run_local(cfg, data);
      break;
    case Scheme::kCentralized:
      result = run_centralized(cfg, data);
      break;
  }
  persist_result(cfg, result);
  return result;
}

// ---- timing report ----

struct TimingRow {
  unsigned key_bits = 0;
  size_t n_clients = 0;
  double median_round_ms = 0.0;
  double median_upload_ms = 0.0;
  double median_update_ms = 0.0;
  double median_model_dl_ms = 0.0;
  double median_noise_dl_ms = 0.0;
};

namespace detail {
inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}
}  // namespace detail

inline TimingRow timing_row(unsigned key_bits, size_t n_clients,
                            const std::vector<RoundMetrics>& metrics) {
  TimingRow row;
  row.key_bits = key_bits;
  row.n_clients = n_clients;
  std::vector<double> total, up, upd, mdl, ndl;
  for (const auto& m : metrics) {
    up.push_back(m.t_upload_ms);
    upd.push_back(m.t_update_ms);
    mdl.push_back(m.t_model_dl_ms);
    ndl.push_back(m.t_noise_dl_ms);
    total.push_back(m.t_upload_ms + m.t_update_ms + m.t_model_dl_ms + m.t_noise_dl_ms);
  }
  row.median_round_ms = detail::median(total);
  row.median_upload_ms = detail::median(up);
  row.median_update_ms = detail::median(upd);
  row.median_model_dl_ms = detail::median(mdl);
  row.median_noise_dl_ms = detail::median(ndl);
  return row;
}

inline std::string format_timing_table(const std::vector<TimingRow>& rows) {
  std::ostringstream os;
  os << "key_bits  clients  round_ms  upload_ms  update_ms  model_dl_ms  noise_dl_ms\n";
  os.setf(std::ios::fixed);
  os.precision(2);
  for (const auto& r : rows)
    os << r.key_bits << "  " << r.n_clients << "  " << r.median_round_ms << "  "
       << r.median_upload_ms << "  " << r.median_update_ms << "  " << r.median_model_dl_ms
       << "  " << r.median_noise_dl_ms << '\n';
  return os.str();
}

// ---- audit entry point ----

struct AuditReport {
  bool ok = false;
  uint64_t blocks = 0;
  std::string message;
};

inline AuditReport audit(const std::filesystem::path& chain_dir) {
  AuditReport report;
  try {
    std::vector<ledger::Block> blocks = ledger::read_chain(chain_dir);
    ledger::Ledger::ReplayResult r = ledger::Ledger::audit_replay(blocks);
    report.ok = true;
    report.blocks = r.blocks_checked;
    report.message = "replay of " + std::to_string(r.blocks_checked) +
                     " blocks reproduced every state hash";
  } catch (const Error& e) {
    report.ok = false;
    report.message = e.what();
  }
  return report;
}

}  // namespace aerisai::harness
