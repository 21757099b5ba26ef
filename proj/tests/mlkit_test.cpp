#include "aerisai/mlkit.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "aerisai/rng.hpp"

namespace aerisai::mlkit {
namespace {

TEST(MlpSpec, ParameterCount) {
  EXPECT_EQ(MlpSpec({{4, 5, 3}}).param_count(), 4u * 5 + 5 + 5 * 3 + 3);
  EXPECT_EQ(MlpSpec::mnist().param_count(), 784u * 128 + 128 + 128 * 64 + 64 + 64 * 10 + 10);
  EXPECT_EQ(MlpSpec::synthetic_default().param_count(),
            16u * 32 + 32 + 32 * 16 + 16 + 16 * 4 + 4);
}

TEST(MlpSpec, FlattenUnflattenAreInverse) {
  MlpSpec spec{{4, 5, 3}};
  SeededRng rng(41);
  std::vector<double> params = init_params(spec, rng);
  auto layers = unflatten(spec, params);
  ASSERT_EQ(layers.size(), 2u);
  EXPECT_EQ(layers[0].weights.size(), 20u);
  EXPECT_EQ(layers[0].biases.size(), 5u);
  EXPECT_EQ(layers[1].weights.size(), 15u);
  EXPECT_EQ(flatten(spec, layers), params);
  EXPECT_THROW(unflatten(spec, std::vector<double>(3, 0.0)), Error);
}

TEST(Forward, ZeroWeightsGiveUniformProbabilities) {
  MlpSpec spec{{6, 4, 3}};
  std::vector<double> params(spec.param_count(), 0.0);
  Dataset ds;
  ds.dim = 6;
  ds.n_classes = 3;
  std::vector<double> x = {1.0, -2.0, 0.5, 0.0, 3.0, -1.0};
  ds.push(x.data(), 1);
  auto logits = forward(spec, params, ds.row(0));
  for (double l : logits) EXPECT_EQ(l, 0.0);
  LossGrad lg = loss_and_grad(spec, params, ds);
  EXPECT_NEAR(lg.loss, std::log(3.0), 1e-12);
}

TEST(Forward, RejectsDimensionMismatch) {
  MlpSpec spec{{6, 4, 3}};
  std::vector<double> params(spec.param_count() + 1, 0.0);
  Dataset ds;
  ds.dim = 6;
  ds.n_classes = 3;
  std::vector<double> x(6, 0.0);
  ds.push(x.data(), 0);
  EXPECT_THROW(loss_and_grad(spec, params, ds), Error);
}

// Analytic gradient vs central finite differences on a [4,5,3] fixture.
TEST(Gradients, MatchCentralFiniteDifferences) {
  MlpSpec spec{{4, 5, 3}};
  SeededRng rng(42);
  std::vector<double> params = init_params(spec, rng);
  Dataset ds;
  ds.dim = 4;
  ds.n_classes = 3;
  for (int i = 0; i < 10; ++i) {
    std::vector<double> x(4);
    for (auto& v : x) v = rng.next_gaussian();
    ds.push(x.data(), static_cast<int>(rng.next_u64() % 3));
  }
  LossGrad lg = loss_and_grad(spec, params, ds);
  const double h = 1e-6;
  double max_rel = 0.0;
  for (size_t i = 0; i < params.size(); ++i) {
    std::vector<double> up = params, down = params;
    up[i] += h;
    down[i] -= h;
    double fd = (loss_and_grad(spec, up, ds).loss - loss_and_grad(spec, down, ds).loss) /
                (2.0 * h);
    double denom = std::max({std::fabs(fd), std::fabs(lg.grad[i]), 1e-4});
    max_rel = std::max(max_rel, std::fabs(fd - lg.grad[i]) / denom);
  }
  EXPECT_LT(max_rel, 1e-4);
}

TEST(Gradients, DuplicatingSamplesKeepsMeanLoss) {
  MlpSpec spec{{4, 5, 3}};
  SeededRng rng(43);
  std::vector<double> params = init_params(spec, rng);
  Dataset ds;
  ds.dim = 4;
  ds.n_classes = 3;
  for (int i = 0; i < 5; ++i) {
    std::vector<double> x(4);
    for (auto& v : x) v = rng.next_gaussian();
    ds.push(x.data(), static_cast<int>(rng.next_u64() % 3));
  }
  Dataset doubled = ds;
  for (size_t i = 0; i < ds.size(); ++i) doubled.push(ds.row(i), ds.labels[i]);
  EXPECT_NEAR(loss_and_grad(spec, params, ds).loss, loss_and_grad(spec, params, doubled).loss,
              1e-12);
}

TEST(Adam, ZeroGradientLeavesParamsFixed) {
  std::vector<double> params = {1.0, -2.0, 3.0};
  AdamState st(3, 0.1);
  adam_step(st, params, {0.0, 0.0, 0.0});
  EXPECT_EQ(params[0], 1.0);
  EXPECT_EQ(params[1], -2.0);
  EXPECT_EQ(params[2], 3.0);
}

TEST(Adam, MinimizesQuadratic) {
  // f(x) = x^2 from x=1, lr=0.1, 200 steps -> |x| < 0.05
  std::vector<double> x = {1.0};
  AdamState st(1, 0.1);
  for (int i = 0; i < 200; ++i) adam_step(st, x, {2.0 * x[0]});
  EXPECT_LT(std::fabs(x[0]), 0.05);
}

TEST(Adam, Deterministic) {
  SeededRng rng(44);
  MlpSpec spec{{4, 5, 3}};
  Dataset ds = make_synthetic(50, 4, 3, 7);
  std::vector<double> p0 = init_params(spec, rng);
  TrainConfig cfg;
  cfg.epochs = 2;
  SeededRng r1(9), r2(9);
  std::vector<double> a = train(spec, p0, ds, cfg, r1);
  std::vector<double> b = train(spec, p0, ds, cfg, r2);
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i], b[i]) << i;
}

TEST(Train, LossNonIncreasingOnSeparableShard) {
  // Well-separated blobs are linearly separable for practical purposes.
  Dataset ds = make_synthetic(200, 8, 3, 11, /*center_spread=*/6.0, /*within_std=*/0.5);
  MlpSpec spec{{8, 16, 3}};
  SeededRng rng(45);
  std::vector<double> params = init_params(spec, rng);
  TrainConfig cfg;
  cfg.epochs = 1;
  double prev = loss_and_grad(spec, params, ds).loss;
  for (int epoch = 0; epoch < 3; ++epoch) {
    SeededRng er(100 + epoch);
    params = train(spec, params, ds, cfg, er);
    double cur = loss_and_grad(spec, params, ds).loss;
    EXPECT_LE(cur, prev + 1e-9) << "epoch " << epoch;
    prev = cur;
  }
}

TEST(Train, ZeroEpochsIsIdentity) {
  Dataset ds = make_synthetic(20, 4, 2, 12);
  MlpSpec spec{{4, 4, 2}};
  SeededRng rng(46);
  std::vector<double> p0 = init_params(spec, rng);
  TrainConfig cfg;
  cfg.epochs = 0;
  SeededRng tr(1);
  std::vector<double> p1 = train(spec, p0, ds, cfg, tr);
  EXPECT_EQ(p0, p1);
}

TEST(Evaluate, PerfectModelScoresOne) {
  // Hand-built linear classifier on sign(x0): class 1 iff x0 > 0.
  MlpSpec spec{{2, 2}};
  std::vector<double> params(spec.param_count(), 0.0);
  params[0] = -1.0;  // W[0] = (-1, 0)
  params[2] = 1.0;   // W[1] = (+1, 0)
  Dataset ds;
  ds.dim = 2;
  ds.n_classes = 2;
  SeededRng rng(47);
  for (int i = 0; i < 100; ++i) {
    double x0 = rng.next_gaussian();
    if (x0 == 0.0) x0 = 1.0;
    std::vector<double> x = {x0, rng.next_gaussian()};
    ds.push(x.data(), x0 > 0 ? 1 : 0);
  }
  EXPECT_EQ(evaluate(spec, params, ds), 1.0);
}

TEST(Evaluate, RandomModelNearChance) {
  MlpSpec spec{{16, 10}};
  SeededRng rng(48);
  std::vector<double> params = init_params(spec, rng);
  // Features carry no label information, so any fixed model is at chance.
  Dataset ds;
  ds.dim = 16;
  ds.n_classes = 10;
  for (int i = 0; i < 5000; ++i) {
    std::vector<double> x(16);
    for (auto& v : x) v = rng.next_gaussian();
    ds.push(x.data(), i % 10);
  }
  double acc = evaluate(spec, params, ds);
  EXPECT_NEAR(acc, 0.1, 0.03);
}

TEST(Evaluate, InvariantToPermutation) {
  Dataset ds = make_synthetic(100, 4, 3, 13);
  MlpSpec spec{{4, 8, 3}};
  SeededRng rng(49);
  std::vector<double> params = init_params(spec, rng);
  double base = evaluate(spec, params, ds);
  Dataset shuffled;
  shuffled.dim = ds.dim;
  shuffled.n_classes = ds.n_classes;
  for (size_t i = ds.size(); i-- > 0;) shuffled.push(ds.row(i), ds.labels[i]);
  EXPECT_EQ(evaluate(spec, params, shuffled), base);
  Dataset empty;
  empty.dim = 4;
  EXPECT_THROW(evaluate(spec, params, empty), Error);
}

TEST(Synthetic, DeterministicAndBalanced) {
  Dataset a = make_synthetic(1000, 16, 4, 99);
  Dataset b = make_synthetic(1000, 16, 4, 99);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.labels, b.labels);
  std::vector<int> counts(4, 0);
  for (int l : a.labels) counts[static_cast<size_t>(l)]++;
  for (int c : counts) EXPECT_EQ(c, 250);
  Dataset c = make_synthetic(1000, 16, 4, 100);
  EXPECT_NE(a.features, c.features);
}

TEST(Partition, NearEqualDisjointCovering) {
  Dataset ds = make_synthetic(1003, 4, 4, 21);
  auto shards = partition(ds, 5, 31);
  ASSERT_EQ(shards.size(), 5u);
  size_t total = 0;
  for (const auto& s : shards) {
    EXPECT_TRUE(s.size() == 200 || s.size() == 201);
    total += s.size();
  }
  EXPECT_EQ(total, 1003u);

  // Disjoint and covering: multiset of (features, label) rows matches.
  std::multiset<std::string> original, pieces;
  auto row_key = [](const Dataset& d, size_t i) {
    std::string k = std::to_string(d.labels[i]);
    for (size_t j = 0; j < d.dim; ++j) k += "," + std::to_string(d.row(i)[j]);
    return k;
  };
  for (size_t i = 0; i < ds.size(); ++i) original.insert(row_key(ds, i));
  for (const auto& s : shards)
    for (size_t i = 0; i < s.size(); ++i) pieces.insert(row_key(s, i));
  EXPECT_EQ(original, pieces);
}

TEST(Partition, EqualSplitFor60000) {
  Dataset ds;
  ds.dim = 1;
  ds.n_classes = 2;
  for (int i = 0; i < 60000; ++i) {
    double x = i;
    ds.push(&x, i % 2);
  }
  auto shards = partition(ds, 5, 1);
  for (const auto& s : shards) EXPECT_EQ(s.size(), 12000u);
}

TEST(Mnist, ParsesIdxFixture) {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "aerisai_mnist_fixture";
  fs::create_directories(dir);
  // Two 2x2 images with labels 3 and 7.
  const uint8_t images[] = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2,
                            0, 51, 102, 255, 10, 20, 30, 40};
  const uint8_t labels[] = {0, 0, 8, 1, 0, 0, 0, 2, 3, 7};
  {
    std::ofstream img(dir / "images.idx", std::ios::binary);
    img.write(reinterpret_cast<const char*>(images), sizeof(images));
    std::ofstream lab(dir / "labels.idx", std::ios::binary);
    lab.write(reinterpret_cast<const char*>(labels), sizeof(labels));
  }
  Dataset ds = load_mnist(dir / "images.idx", dir / "labels.idx");
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.dim, 4u);
  EXPECT_EQ(ds.labels[0], 3);
  EXPECT_EQ(ds.labels[1], 7);
  EXPECT_DOUBLE_EQ(ds.row(0)[1], 51.0 / 255.0);
  EXPECT_DOUBLE_EQ(ds.row(0)[3], 1.0);

  // Bad magic is rejected.
  {
    std::ofstream img(dir / "bad.idx", std::ios::binary);
    uint8_t bad[] = {0, 0, 9, 9};
    img.write(reinterpret_cast<const char*>(bad), sizeof(bad));
  }
  EXPECT_THROW(load_mnist(dir / "bad.idx", dir / "labels.idx"), Error);
  fs::remove_all(dir);
}

TEST(Synthetic, CsvExportWrites) {
  namespace fs = std::filesystem;
  Dataset ds = make_synthetic(10, 3, 2, 5);
  fs::path path = fs::temp_directory_path() / "aerisai_synth.csv";
  write_synthetic_csv(ds, path);
  std::ifstream in(path);
  std::string line;
  size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 10u);
  fs::remove(path);
}

}  // namespace
}  // namespace aerisai::mlkit
