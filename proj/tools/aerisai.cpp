// aerisai — decentralized collaborative learning over a simulated auditable
// ledger: homomorphically aggregated, differentially private federated
// learning with oracle-mediated exact noise removal under CP-ABE group keys.
//
// Subcommands: keygen, run, audit, report.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "aerisai/harness.hpp"

namespace {

using aerisai::harness::ExperimentConfig;

std::map<std::string, std::set<std::string>> parse_attrs_file(const std::string& path) {
  // One client per line: "<client_id>: attr1 attr2 ...".
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--attrs", "cannot open " + path);
  std::map<std::string, std::set<std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    size_t colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::string id = line.substr(0, colon);
    id.erase(id.find_last_not_of(" \t") + 1);
    std::istringstream rest(line.substr(colon + 1));
    std::set<std::string> attrs;
    std::string tok;
    while (rest >> tok) attrs.insert(tok);
    if (!attrs.empty()) out[id] = attrs;
  }
  return out;
}

struct RunStrings {
  std::string scheme = "aerisai";
  std::string dataset = "synthetic";
  std::string delta = "denoised";
  std::string randomizer = "fixed_base";
  std::string layers;
  std::string attrs;
};

// Flat key=value config; keys are the run flags without the leading dashes.
// Values loaded here act as defaults, so command-line flags override them.
void apply_config_file(const std::string& path, ExperimentConfig& cfg, RunStrings& s) {
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    size_t b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    size_t e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--config",
                                 "line " + std::to_string(lineno) + ": expected key=value");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    if (key == "scheme") s.scheme = value;
    else if (key == "clients") cfg.n_clients = std::stoul(value);
    else if (key == "rounds") cfg.rounds = static_cast<unsigned>(std::stoul(value));
    else if (key == "dataset") s.dataset = value;
    else if (key == "key-bits") cfg.key_bits = static_cast<unsigned>(std::stoul(value));
    else if (key == "budget") cfg.budget = std::stod(value);
    else if (key == "sigma") cfg.sigma = std::stod(value);
    else if (key == "clip") cfg.clip_c = std::stod(value);
    else if (key == "policy") cfg.policy_text = value;
    else if (key == "seed-data") cfg.seed_data = std::stoull(value);
    else if (key == "seed-crypto") cfg.seed_crypto = std::stoull(value);
    else if (key == "seed-noise") cfg.seed_noise = std::stoull(value);
    else if (key == "epochs") cfg.local_epochs = static_cast<unsigned>(std::stoul(value));
    else if (key == "batch") cfg.batch_size = std::stoul(value);
    else if (key == "lr") cfg.lr = std::stod(value);
    else if (key == "delta-base") s.delta = value;
    else if (key == "curve") cfg.curve = value;
    else if (key == "randomizer") s.randomizer = value;
    else if (key == "layers") s.layers = value;
    else if (key == "synth-train") cfg.synth_train = std::stoul(value);
    else if (key == "synth-test") cfg.synth_test = std::stoul(value);
    else if (key == "synth-dim") cfg.synth_dim = std::stoul(value);
    else if (key == "synth-classes") cfg.synth_classes = std::stoul(value);
    else if (key == "mnist-dir") cfg.mnist_dir = value;
    else if (key == "train-cap") cfg.train_cap = std::stoul(value);
    else if (key == "attrs") s.attrs = value;
    else if (key == "out") cfg.out_dir = value;
    else
      throw CLI::ValidationError("--config",
                                 "line " + std::to_string(lineno) + ": unknown key " + key);
  }
}

int cmd_keygen(const std::string& attrs_path, ExperimentConfig cfg, const std::string& out) {
  if (!attrs_path.empty()) cfg.client_attrs = parse_attrs_file(attrs_path);
  aerisai::SeededRng rng(cfg.seed_crypto);
  aerisai::harness::CeremonyKeys keys = aerisai::harness::key_ceremony(cfg, rng);
  aerisai::harness::write_key_files(out, keys);
  std::cout << "wrote key material for " << cfg.n_clients << " clients to " << out << "\n"
            << "  shared client key: " << cfg.key_bits << "-bit Paillier\n"
            << "  oracle key:        " << cfg.key_bits << "-bit Paillier\n"
            << "  CP-ABE curve:      " << cfg.curve << "\n";
  return 0;
}

int cmd_run(const ExperimentConfig& cfg) {
  cfg.validate();
  auto t0 = std::chrono::steady_clock::now();
  aerisai::harness::ExperimentResult result = aerisai::harness::run_experiment(cfg);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << aerisai::harness::metrics_csv(cfg.scheme, result.metrics);
  std::cerr << "# scheme=" << aerisai::harness::scheme_name(cfg.scheme)
            << " final_accuracy=" << result.final_accuracy
            << " config_hash=" << result.config_hash_hex.substr(0, 16) << " wall_s=" << secs
            << "\n";
  if (!cfg.out_dir.empty()) std::cerr << "# outputs under " << cfg.out_dir << "\n";
  return 0;
}

int cmd_audit(const std::string& chain_dir) {
  aerisai::harness::AuditReport report = aerisai::harness::audit(chain_dir);
  std::cout << (report.ok ? "AUDIT OK: " : "AUDIT FAILED: ") << report.message << "\n";
  return report.ok ? 0 : 1;
}

int cmd_report(const std::string& metrics_dir) {
  namespace fs = std::filesystem;
  bool any = false;
  std::cout << "scheme        rounds  final_acc  med_round_ms  med_noise_dl_ms\n";
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(metrics_dir))
    if (entry.path().extension() == ".csv") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    std::ifstream in(file);
    std::string line;
    std::getline(in, line);  // header
    std::string scheme;
    std::vector<aerisai::harness::RoundMetrics> metrics;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string tok;
      aerisai::harness::RoundMetrics m;
      std::getline(ls, scheme, ',');
      std::getline(ls, tok, ',');
      m.round = static_cast<unsigned>(std::stoul(tok));
      std::getline(ls, tok, ',');
      m.accuracy = std::stod(tok);
      std::getline(ls, tok, ',');
      m.t_upload_ms = std::stod(tok);
      std::getline(ls, tok, ',');
      m.t_update_ms = std::stod(tok);
      std::getline(ls, tok, ',');
      m.t_model_dl_ms = std::stod(tok);
      std::getline(ls, tok, ',');
      m.t_noise_dl_ms = std::stod(tok);
      std::getline(ls, tok, ',');
      m.ledger_bytes = std::stoull(tok);
      metrics.push_back(m);
    }
    if (metrics.empty()) continue;
    any = true;
    aerisai::harness::TimingRow row = aerisai::harness::timing_row(0, 0, metrics);
    std::cout.setf(std::ios::fixed);
    std::cout.precision(4);
    std::cout << scheme;
    for (size_t pad = scheme.size(); pad < 14; ++pad) std::cout << ' ';
    std::cout << metrics.size() << "      " << metrics.back().accuracy << "     ";
    std::cout.precision(2);
    std::cout << row.median_round_ms << "        " << row.median_noise_dl_ms << "\n";
  }
  if (!any) {
    std::cerr << "no metrics CSV files under " << metrics_dir << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AerisAI: auditable homomorphic collaborative learning (desk-scale simulation)"};
  app.require_subcommand(1);

  // keygen
  auto* keygen = app.add_subcommand("keygen", "run the trusted-authority key ceremony");
  ExperimentConfig kcfg;
  std::string k_attrs, k_out;
  keygen->add_option("--clients", kcfg.n_clients, "number of client keys");
  keygen->add_option("--attrs", k_attrs, "attribute file: '<client_id>: attr1 attr2 ...'");
  keygen->add_option("--key-bits", kcfg.key_bits, "Paillier modulus bits (1024/2048/3072)");
  keygen->add_option("--curve", kcfg.curve, "pairing curve: ss512|ss1536");
  keygen->add_option("--seed-crypto", kcfg.seed_crypto, "ceremony seed");
  keygen->add_option("--out", k_out, "output directory")->required();

  // run
  auto* run = app.add_subcommand("run", "run an experiment and emit per-round metrics");
  ExperimentConfig cfg;
  RunStrings rs;
  std::string config_path;
  // The config file seeds the defaults below before CLI11 parses the command
  // line, so explicit flags override it.
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      apply_config_file(argv[i + 1], cfg, rs);
      break;
    }
  }
  std::string &r_scheme = rs.scheme, &r_dataset = rs.dataset, &r_delta = rs.delta,
              &r_rand = rs.randomizer, &r_layers = rs.layers, &r_attrs = rs.attrs;
  run->add_option("--config", config_path, "config file (key=value lines mirroring these flags)");
  run->add_option("--scheme", r_scheme, "aerisai|safl|local|centralized|spdl_like");
  run->add_option("--clients", cfg.n_clients, "roster size");
  run->add_option("--rounds", cfg.rounds, "global rounds");
  run->add_option("--dataset", r_dataset, "synthetic|mnist");
  run->add_option("--key-bits", cfg.key_bits, "Paillier modulus bits (1024/2048/3072)");
  run->add_option("--budget", cfg.budget, "privacy budget epsilon (maps to sigma)");
  run->add_option("--sigma", cfg.sigma, "Gaussian noise std (used when budget=0)");
  run->add_option("--clip", cfg.clip_c, "l-inf gradient clip bound");
  run->add_option("--policy", cfg.policy_text, "CP-ABE policy for the noise broadcast");
  run->add_option("--seed-data", cfg.seed_data, "dataset/partition/training seed");
  run->add_option("--seed-crypto", cfg.seed_crypto, "key and encryption seed");
  run->add_option("--seed-noise", cfg.seed_noise, "DP noise seed");
  run->add_option("--epochs", cfg.local_epochs, "local epochs per round");
  run->add_option("--batch", cfg.batch_size, "mini-batch size");
  run->add_option("--lr", cfg.lr, "Adam learning rate");
  run->add_option("--delta-base", r_delta, "denoised|noisy gradient base");
  run->add_option("--curve", cfg.curve, "pairing curve: ss512|ss1536");
  run->add_option("--randomizer", r_rand, "paillier randomizer: fixed_base|full");
  run->add_option("--layers", r_layers, "comma-separated MLP widths");
  run->add_option("--synth-train", cfg.synth_train, "synthetic training rows");
  run->add_option("--synth-test", cfg.synth_test, "synthetic test rows");
  run->add_option("--synth-dim", cfg.synth_dim, "synthetic feature dimension");
  run->add_option("--synth-classes", cfg.synth_classes, "synthetic class count");
  run->add_option("--mnist-dir", cfg.mnist_dir, "directory with MNIST IDX files");
  run->add_option("--train-cap", cfg.train_cap, "cap training rows (0 = all)");
  run->add_option("--attrs", r_attrs, "attribute file for the roster");
  run->add_option("--out", cfg.out_dir, "output directory (metrics, chain)");

  // audit
  auto* audit = app.add_subcommand("audit", "replay a persisted chain and verify every hash");
  std::string a_chain;
  audit->add_option("--chain", a_chain, "chain directory")->required();

  // report
  auto* report = app.add_subcommand("report", "summarize metrics CSV files");
  std::string p_metrics;
  report->add_option("--metrics", p_metrics, "directory with metrics_*.csv")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (keygen->parsed()) return cmd_keygen(k_attrs, kcfg, k_out);
    if (run->parsed()) {
      using aerisai::harness::DatasetKind;
      cfg.scheme = aerisai::harness::scheme_from_name(r_scheme);
      cfg.dataset = r_dataset == "mnist" ? DatasetKind::kMnist : DatasetKind::kSynthetic;
      cfg.delta_base = r_delta == "noisy" ? aerisai::client::DeltaBase::kNoisy
                                          : aerisai::client::DeltaBase::kDenoised;
      cfg.randomizer = r_rand == "full" ? aerisai::paillier::RandomizerMode::kFull
                                        : aerisai::paillier::RandomizerMode::kFixedBase;
      if (!r_layers.empty()) {
        cfg.layers.clear();
        std::istringstream ls(r_layers);
        std::string tok;
        while (std::getline(ls, tok, ',')) cfg.layers.push_back(std::stoul(tok));
      }
      if (!r_attrs.empty()) cfg.client_attrs = parse_attrs_file(r_attrs);
      return cmd_run(cfg);
    }
    if (audit->parsed()) return cmd_audit(a_chain);
    if (report->parsed()) return cmd_report(p_metrics);
  } catch (const aerisai::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
