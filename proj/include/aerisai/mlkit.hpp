#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "aerisai/common.hpp"
#include "aerisai/rng.hpp"

// Dependency-light training substrate: MLP with ReLU hidden layers and
// softmax cross-entropy, Adam, dataset loaders and partitioning. Everything
// is a pure function of (params, data, seed) so protocol runs replay
// bit-for-bit.

namespace aerisai::mlkit {

struct Dataset {
  size_t dim = 0;
  size_t n_classes = 0;
  std::vector<double> features;  // row-major, size() x dim
  std::vector<int> labels;

  size_t size() const { return labels.size(); }
  const double* row(size_t i) const { return features.data() + i * dim; }

  void push(const double* x, int label) {
    features.insert(features.end(), x, x + dim);
    labels.push_back(label);
  }
};

// Layer widths, e.g. {784, 128, 64, 10}; parameters live in one flat vector
// (per layer: row-major weight matrix, then biases).
struct MlpSpec {
  std::vector<size_t> dims;

  size_t n_layers() const { return dims.size() - 1; }

  size_t param_count() const {
    size_t n = 0;
    for (size_t l = 0; l + 1 < dims.size(); ++l) n += dims[l] * dims[l + 1] + dims[l + 1];
    return n;
  }

  static MlpSpec mnist() { return MlpSpec{{784, 128, 64, 10}}; }
  static MlpSpec synthetic_default() { return MlpSpec{{16, 32, 16, 4}}; }
};

struct LayerParams {
  std::vector<double> weights;  // row-major, dims[l+1] x dims[l]
  std::vector<double> biases;
};

inline std::vector<LayerParams> unflatten(const MlpSpec& spec,
                                          const std::vector<double>& params) {
  if (params.size() != spec.param_count()) fail(Err::kDimensionMismatch, "bad parameter count");
  std::vector<LayerParams> out;
  size_t off = 0;
  for (size_t l = 0; l + 1 < spec.dims.size(); ++l) {
    size_t in = spec.dims[l], width = spec.dims[l + 1];
    LayerParams lp;
    lp.weights.assign(params.begin() + static_cast<long>(off),
                      params.begin() + static_cast<long>(off + in * width));
    off += in * width;
    lp.biases.assign(params.begin() + static_cast<long>(off),
                     params.begin() + static_cast<long>(off + width));
    off += width;
    out.push_back(std::move(lp));
  }
  return out;
}

inline std::vector<double> flatten(const MlpSpec& spec, const std::vector<LayerParams>& layers) {
  std::vector<double> out;
  out.reserve(spec.param_count());
  for (const auto& lp : layers) {
    out.insert(out.end(), lp.weights.begin(), lp.weights.end());
    out.insert(out.end(), lp.biases.begin(), lp.biases.end());
  }
  if (out.size() != spec.param_count()) fail(Err::kDimensionMismatch, "bad layer shapes");
  return out;
}

inline std::vector<double> init_params(const MlpSpec& spec, SeededRng& rng) {
  std::vector<double> params(spec.param_count());
  size_t off = 0;
  for (size_t l = 0; l + 1 < spec.dims.size(); ++l) {
    size_t fan_in = spec.dims[l], fan_out = spec.dims[l + 1];
    double std = std::sqrt(2.0 / static_cast<double>(fan_in));  // He init for ReLU
    for (size_t i = 0; i < fan_in * fan_out; ++i) params[off + i] = rng.next_gaussian() * std;
    off += fan_in * fan_out + fan_out;  // biases stay zero
  }
  return params;
}

namespace detail {

struct Workspace {
  std::vector<std::vector<double>> acts;  // acts[0] = input copy, acts[l+1] = layer l output
  std::vector<std::vector<double>> deltas;
};

inline void forward_into(const MlpSpec& spec, const std::vector<double>& params,
                         const double* x, Workspace& ws) {
  size_t n_layers = spec.n_layers();
  ws.acts.resize(n_layers + 1);
  ws.acts[0].assign(x, x + spec.dims[0]);
  size_t off = 0;
  for (size_t l = 0; l < n_layers; ++l) {
    size_t in = spec.dims[l], out = spec.dims[l + 1];
    const double* W = params.data() + off;
    const double* b = params.data() + off + in * out;
    ws.acts[l + 1].assign(out, 0.0);
    for (size_t o = 0; o < out; ++o) {
      double acc = b[o];
      const double* wrow = W + o * in;
      const double* a = ws.acts[l].data();
      for (size_t i = 0; i < in; ++i) acc += wrow[i] * a[i];
      ws.acts[l + 1][o] = (l + 1 < n_layers && acc < 0.0) ? 0.0 : acc;  // ReLU on hidden
    }
    off += in * out + out;
  }
}

inline double softmax_ce(const std::vector<double>& logits, int label,
                         std::vector<double>& dlogits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  dlogits.resize(logits.size());
  for (size_t j = 0; j < logits.size(); ++j) {
    dlogits[j] = std::exp(logits[j] - mx);
    sum += dlogits[j];
  }
  for (auto& d : dlogits) d /= sum;
  double loss = -std::log(std::max(dlogits[static_cast<size_t>(label)], 1e-300));
  dlogits[static_cast<size_t>(label)] -= 1.0;
  return loss;
}

}  // namespace detail

inline std::vector<double> forward(const MlpSpec& spec, const std::vector<double>& params,
                                   const double* x) {
  if (params.size() != spec.param_count()) fail(Err::kDimensionMismatch, "bad parameter count");
  detail::Workspace ws;
  detail::forward_into(spec, params, x, ws);
  return ws.acts.back();
}

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// Mean softmax cross-entropy and its gradient over rows [begin, end) of ds
// restricted to `index` (all rows when index is empty).
inline LossGrad loss_and_grad(const MlpSpec& spec, const std::vector<double>& params,
                              const Dataset& ds, const std::vector<size_t>& index) {
  if (params.size() != spec.param_count()) fail(Err::kDimensionMismatch, "bad parameter count");
  if (ds.dim != spec.dims.front()) fail(Err::kDimensionMismatch, "feature width mismatch");
  size_t count = index.empty() ? ds.size() : index.size();
  if (count == 0) fail(Err::kEmptyDataset, "empty batch");
  LossGrad out;
  out.grad.assign(params.size(), 0.0);
  detail::Workspace ws;
  std::vector<double> dlogits;
  size_t n_layers = spec.n_layers();
  ws.deltas.resize(n_layers);
  for (size_t s = 0; s < count; ++s) {
    size_t rowi = index.empty() ? s : index[s];
    detail::forward_into(spec, params, ds.row(rowi), ws);
    out.loss += detail::softmax_ce(ws.acts.back(), ds.labels[rowi], dlogits);
    ws.deltas[n_layers - 1] = dlogits;
    // Backpropagate through layers.
    size_t off_end = params.size();
    for (size_t l = n_layers; l-- > 0;) {
      size_t in = spec.dims[l], out_w = spec.dims[l + 1];
      off_end -= in * out_w + out_w;
      const double* W = params.data() + off_end;
      double* gW = out.grad.data() + off_end;
      double* gb = out.grad.data() + off_end + in * out_w;
      const std::vector<double>& delta = ws.deltas[l];
      const std::vector<double>& a_prev = ws.acts[l];
      for (size_t o = 0; o < out_w; ++o) {
        double d = delta[o];
        gb[o] += d;
        double* grow = gW + o * in;
        for (size_t i = 0; i < in; ++i) grow[i] += d * a_prev[i];
      }
      if (l > 0) {
        std::vector<double>& dprev = ws.deltas[l - 1];
        dprev.assign(in, 0.0);
        for (size_t o = 0; o < out_w; ++o) {
          double d = delta[o];
          const double* wrow = W + o * in;
          for (size_t i = 0; i < in; ++i) dprev[i] += d * wrow[i];
        }
        for (size_t i = 0; i < in; ++i)
          if (ws.acts[l][i] <= 0.0) dprev[i] = 0.0;  // ReLU mask
      }
    }
  }
  double inv = 1.0 / static_cast<double>(count);
  out.loss *= inv;
  for (auto& g : out.grad) g *= inv;
  return out;
}

inline LossGrad loss_and_grad(const MlpSpec& spec, const std::vector<double>& params,
                              const Dataset& ds) {
  return loss_and_grad(spec, params, ds, {});
}

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  uint64_t step = 0;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(size_t dim, double lr_ = 0.001)
      : m(dim, 0.0), v(dim, 0.0), lr(lr_) {}
};

inline void adam_step(AdamState& st, std::vector<double>& params,
                      const std::vector<double>& grad) {
  if (st.m.size() != params.size() || grad.size() != params.size())
    fail(Err::kDimensionMismatch, "adam state dimension mismatch");
  st.step += 1;
  double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (size_t i = 0; i < params.size(); ++i) {
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grad[i];
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grad[i] * grad[i];
    double mhat = st.m[i] / bc1;
    double vhat = st.v[i] / bc2;
    params[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
  }
}

struct TrainConfig {
  unsigned epochs = 1;
  size_t batch_size = 64;
  double lr = 0.001;
};

// Mini-batch Adam from `start`, fresh optimizer state, seeded shuffling.
inline std::vector<double> train(const MlpSpec& spec, const std::vector<double>& start,
                                 const Dataset& shard, const TrainConfig& cfg, SeededRng& rng) {
  if (shard.size() == 0) fail(Err::kEmptyDataset, "cannot train on an empty shard");
  std::vector<double> params = start;
  AdamState adam(params.size(), cfg.lr);
  std::vector<size_t> order(shard.size());
  std::iota(order.begin(), order.end(), 0);
  for (unsigned e = 0; e < cfg.epochs; ++e) {
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.next_u64() % i]);
    for (size_t start_i = 0; start_i < order.size(); start_i += cfg.batch_size) {
      size_t end_i = std::min(order.size(), start_i + cfg.batch_size);
      std::vector<size_t> batch(order.begin() + static_cast<long>(start_i),
                                order.begin() + static_cast<long>(end_i));
      LossGrad lg = loss_and_grad(spec, params, shard, batch);
      adam_step(adam, params, lg.grad);
    }
  }
  return params;
}

inline double evaluate(const MlpSpec& spec, const std::vector<double>& params,
                       const Dataset& test) {
  if (test.size() == 0) fail(Err::kEmptyDataset, "empty test set");
  size_t hits = 0;
  detail::Workspace ws;
  for (size_t i = 0; i < test.size(); ++i) {
    detail::forward_into(spec, params, test.row(i), ws);
    const auto& logits = ws.acts.back();
    size_t best = 0;
    for (size_t j = 1; j < logits.size(); ++j)
      if (logits[j] > logits[best]) best = j;  // ties resolve to the lowest index
    if (static_cast<int>(best) == test.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

// ---- data ----

// Gaussian class blobs: several cluster centers per class, drawn once from
// the seed; draws interleave classes so the label distribution is balanced.
// The default mixture overlaps enough that small shards visibly underfit.
inline Dataset make_synthetic(size_t n, size_t dim, size_t classes, uint64_t seed,
                              double center_spread = 1.0, double within_std = 1.0,
                              size_t clusters_per_class = 4) {
  Dataset ds;
  ds.dim = dim;
  ds.n_classes = classes;
  SeededRng centers_rng = SeededRng(seed).fork(1);
  std::vector<double> centers(classes * clusters_per_class * dim);
  for (auto& c : centers) c = centers_rng.next_gaussian() * center_spread;
  SeededRng draw(SeededRng(seed).fork(2).seed());
  std::vector<double> x(dim);
  for (size_t i = 0; i < n; ++i) {
    size_t label = i % classes;
    size_t cluster = draw.next_u64() % clusters_per_class;
    const double* c = centers.data() + (label * clusters_per_class + cluster) * dim;
    for (size_t d = 0; d < dim; ++d) x[d] = c[d] + draw.next_gaussian() * within_std;
    ds.push(x.data(), static_cast<int>(label));
  }
  // Shuffle rows so partitions are random across classes.
  SeededRng shuffle = SeededRng(seed).fork(3);
  for (size_t i = n; i > 1; --i) {
    size_t j = shuffle.next_u64() % i;
    for (size_t d = 0; d < dim; ++d) std::swap(ds.features[(i - 1) * dim + d], ds.features[j * dim + d]);
    std::swap(ds.labels[i - 1], ds.labels[j]);
  }
  return ds;
}

// Near-equal random split: sizes differ by at most one, shards are disjoint
// and cover the dataset.
inline std::vector<Dataset> partition(const Dataset& ds, size_t n_clients, uint64_t seed) {
  if (n_clients == 0 || ds.size() < n_clients)
    fail(Err::kFormat, "cannot partition " + std::to_string(ds.size()) + " rows into " +
                           std::to_string(n_clients) + " shards");
  std::vector<size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  SeededRng rng(seed);
  for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.next_u64() % i]);
  std::vector<Dataset> shards(n_clients);
  for (auto& s : shards) {
    s.dim = ds.dim;
    s.n_classes = ds.n_classes;
  }
  for (size_t i = 0; i < order.size(); ++i)
    shards[i % n_clients].push(ds.row(order[i]), ds.labels[order[i]]);
  return shards;
}

inline Dataset head(const Dataset& ds, size_t n) {
  Dataset out;
  out.dim = ds.dim;
  out.n_classes = ds.n_classes;
  for (size_t i = 0; i < n && i < ds.size(); ++i) out.push(ds.row(i), ds.labels[i]);
  return out;
}

inline Dataset tail_from(const Dataset& ds, size_t start) {
  Dataset out;
  out.dim = ds.dim;
  out.n_classes = ds.n_classes;
  for (size_t i = start; i < ds.size(); ++i) out.push(ds.row(i), ds.labels[i]);
  return out;
}

// ---- MNIST IDX loaders (big-endian magic 0x803 images / 0x801 labels) ----

namespace detail {

inline uint32_t read_u32_be(std::istream& in) {
  uint8_t b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) fail(Err::kFormat, "truncated IDX header");
  return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) | b[3];
}

}  // namespace detail

inline Dataset load_mnist(const std::filesystem::path& images_path,
                          const std::filesystem::path& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) fail(Err::kIo, "cannot open " + images_path.string());
  if (detail::read_u32_be(img) != 0x00000803u)
    fail(Err::kFormat, "bad magic in " + images_path.string());
  uint32_t count = detail::read_u32_be(img);
  uint32_t rows = detail::read_u32_be(img);
  uint32_t cols = detail::read_u32_be(img);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) fail(Err::kIo, "cannot open " + labels_path.string());
  if (detail::read_u32_be(lab) != 0x00000801u)
    fail(Err::kFormat, "bad magic in " + labels_path.string());
  uint32_t lcount = detail::read_u32_be(lab);
  if (lcount != count) fail(Err::kFormat, "image/label count mismatch");

  Dataset ds;
  ds.dim = static_cast<size_t>(rows) * cols;
  ds.n_classes = 10;
  std::vector<uint8_t> pix(ds.dim);
  std::vector<double> x(ds.dim);
  for (uint32_t i = 0; i < count; ++i) {
    img.read(reinterpret_cast<char*>(pix.data()), static_cast<std::streamsize>(pix.size()));
    int label = lab.get();
    if (!img || label < 0) fail(Err::kFormat, "truncated IDX payload");
    if (label > 9) fail(Err::kFormat, "label out of range");
    for (size_t d = 0; d < ds.dim; ++d) x[d] = pix[d] / 255.0;
    ds.push(x.data(), label);
  }
  return ds;
}

inline void write_synthetic_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Err::kIo, "cannot write " + path.string());
  for (size_t i = 0; i < ds.size(); ++i) {
    out << ds.labels[i];
    for (size_t d = 0; d < ds.dim; ++d) out << ',' << ds.row(i)[d];
    out << '\n';
  }
}

}  // namespace aerisai::mlkit
