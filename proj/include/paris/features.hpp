#pragma once

// Fully connected ReLU network used as the feature map. The penultimate
// activations, with a constant 1 appended, are the features phi(x); the
// output unit is then exactly phi(x)^T [w_nn; b_nn].

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <future>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "paris/data.hpp"
#include "paris/error.hpp"
#include "paris/linalg.hpp"

namespace paris::features {

using linalg::DenseMatrix;
using linalg::Vector;

class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(std::size_t epoch, double loss)
      : Error("training diverged at epoch " + std::to_string(epoch) + " (loss " + std::to_string(loss) +
              "); lower the learning rate"),
        epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

struct MlpConfig {
  std::vector<std::size_t> hidden_sizes{100, 100, 50};
  std::size_t max_epochs = 500;
  std::size_t patience = 20;
  double learning_rate = 1e-3;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;

  void validate() const {
    if (hidden_sizes.empty()) throw InvalidArgument("MlpConfig: hidden_sizes must be non-empty");
    for (auto h : hidden_sizes)
      if (h == 0) throw InvalidArgument("MlpConfig: zero-width hidden layer");
    if (patience >= max_epochs) throw InvalidArgument("MlpConfig: patience must be < max_epochs");
    if (!(learning_rate > 0.0)) throw InvalidArgument("MlpConfig: learning_rate must be positive");
    if (batch_size == 0) throw InvalidArgument("MlpConfig: batch_size must be positive");
  }
};

// weights are out x in, row-major.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

namespace detail {

// Row-major copy of a column-major matrix.
inline std::vector<double> to_row_major(const DenseMatrix& m) {
  std::vector<double> out(m.rows() * m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j) {
    auto c = m.col(j);
    for (std::size_t i = 0; i < m.rows(); ++i) out[i * m.cols() + j] = c[i];
  }
  return out;
}

// y[b, o] = sum_i W[o, i] x[b, i] + bias[o], bias added last.
inline void affine(const DenseLayer& layer, const double* x, std::size_t batch, double* y) {
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = x + b * layer.in;
    double* yb = y + b * layer.out;
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double* w = layer.weights.data() + o * layer.in;
      double s = 0.0;
      for (std::size_t i = 0; i < layer.in; ++i) s += w[i] * xb[i];
      yb[o] = s + layer.bias[o];
    }
  }
}

}  // namespace detail

class Mlp {
 public:
  Mlp() = default;

  // Fan-in scaled uniform initialization U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static Mlp initialize(std::size_t input_dim, std::span<const std::size_t> hidden, std::uint64_t seed) {
    if (input_dim == 0 || hidden.empty()) throw InvalidArgument("Mlp::initialize: empty architecture");
    std::mt19937_64 rng(seed);
    Mlp m;
    std::size_t in = input_dim;
    auto add = [&](std::size_t out) {
      DenseLayer l{in, out, std::vector<double>(in * out), std::vector<double>(out)};
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (double& w : l.weights) w = u(rng);
      for (double& b : l.bias) b = u(rng);
      m.layers_.push_back(std::move(l));
      in = out;
    };
    for (auto h : hidden) add(h);
    add(1);
    return m;
  }

  static Mlp from_layers(std::vector<DenseLayer> layers) {
    if (layers.size() < 2) throw InvalidArgument("Mlp: need at least one hidden layer");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& L = layers[l];
      if (L.weights.size() != L.in * L.out || L.bias.size() != L.out)
        throw DimensionMismatch("Mlp: layer parameter sizes");
      if (l > 0 && layers[l - 1].out != L.in) throw DimensionMismatch("Mlp: layer widths do not chain");
    }
    if (layers.back().out != 1) throw DimensionMismatch("Mlp: output layer must have one unit");
    Mlp m;
    m.layers_ = std::move(layers);
    return m;
  }

  std::size_t input_dim() const { return layers_.front().in; }
  std::size_t hidden_width() const { return layers_.back().in; }
  // Width of phi(x), including the appended constant column.
  std::size_t feature_dim() const { return hidden_width() + 1; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  Vector w_nn() const { return layers_.back().weights; }
  double b_nn() const { return layers_.back().bias[0]; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
  }

  // Flattened as [W_0, b_0, W_1, b_1, ...].
  Vector parameters() const {
    Vector p;
    p.reserve(parameter_count());
    for (const auto& l : layers_) {
      p.insert(p.end(), l.weights.begin(), l.weights.end());
      p.insert(p.end(), l.bias.begin(), l.bias.end());
    }
    return p;
  }

  void set_parameters(std::span<const double> p) {
    if (p.size() != parameter_count()) throw DimensionMismatch("Mlp::set_parameters: length");
    std::size_t k = 0;
    for (auto& l : layers_) {
      for (double& w : l.weights) w = p[k++];
      for (double& b : l.bias) b = p[k++];
    }
  }

  // Penultimate activations with a trailing column of ones (N x feature_dim).
  DenseMatrix extract_features(const DenseMatrix& inputs) const {
    check_inputs(inputs);
    const auto x = detail::to_row_major(inputs);
    const std::size_t n = inputs.rows();
    std::vector<double> h = hidden_forward(x.data(), n);
    const std::size_t w = hidden_width();
    DenseMatrix phi(n, w + 1);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < w; ++j) phi(i, j) = h[i * w + j];
      phi(i, w) = 1.0;
    }
    return phi;
  }

  Vector predict(const DenseMatrix& inputs) const {
    check_inputs(inputs);
    const auto x = detail::to_row_major(inputs);
    return predict_row_major(x.data(), inputs.rows());
  }

  // Mean squared error over the given rows and, if `grad` is non-null, its
  // gradient with respect to parameters() (same layout).
  double loss_and_gradient(const DenseMatrix& inputs, std::span<const double> targets, Vector* grad) const {
    check_inputs(inputs);
    if (targets.size() != inputs.rows()) throw DimensionMismatch("loss_and_gradient: target length");
    const auto x = detail::to_row_major(inputs);
    Workspace ws;
    return batch_loss_and_gradient(x.data(), targets.data(), inputs.rows(), ws, grad);
  }

  void save(std::ostream& out) const;
  static Mlp load(std::istream& in);

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  friend struct Trainer;

  struct Workspace {
    std::vector<std::vector<double>> acts;  // acts[0] = input copy not stored; acts[l] = output of layer l
    std::vector<double> delta;
    std::vector<double> delta_prev;
  };

  void check_inputs(const DenseMatrix& inputs) const {
    if (layers_.empty()) throw InvalidArgument("Mlp: uninitialized network");
    if (inputs.cols() != input_dim()) throw DimensionMismatch("Mlp: input dimension mismatch");
  }

  std::vector<double> hidden_forward(const double* x, std::size_t n) const {
    std::vector<double> cur(x, x + n * input_dim());
    std::vector<double> next;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
      next.assign(n * layers_[l].out, 0.0);
      detail::affine(layers_[l], cur.data(), n, next.data());
      for (double& v : next) v = v > 0.0 ? v : 0.0;
      cur.swap(next);
    }
    return cur;
  }

  // phi(x)^T [w; b], summed in feature order so it matches extract_features
  // followed by a dot product bit for bit.
  Vector predict_row_major(const double* x, std::size_t n) const {
    const std::vector<double> h = hidden_forward(x, n);
    const DenseLayer& outl = layers_.back();
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < outl.in; ++j) s += h[i * outl.in + j] * outl.weights[j];
      s += 1.0 * outl.bias[0];
      y[i] = s;
    }
    return y;
  }

  double batch_loss_and_gradient(const double* x, const double* y, std::size_t n, Workspace& ws,
                                 Vector* grad) const {
    const std::size_t L = layers_.size();
    ws.acts.resize(L);
    const double* in = x;
    for (std::size_t l = 0; l < L; ++l) {
      ws.acts[l].resize(n * layers_[l].out);
      if (l + 1 < L) {
        detail::affine(layers_[l], in, n, ws.acts[l].data());
        for (double& v : ws.acts[l]) v = v > 0.0 ? v : 0.0;
      } else {
        const DenseLayer& outl = layers_.back();
        for (std::size_t i = 0; i < n; ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < outl.in; ++j) s += in[i * outl.in + j] * outl.weights[j];
          ws.acts[l][i] = s + 1.0 * outl.bias[0];
        }
      }
      in = ws.acts[l].data();
    }
    const std::vector<double>& pred = ws.acts.back();
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) loss += (pred[i] - y[i]) * (pred[i] - y[i]);
    loss /= static_cast<double>(n);
    if (grad == nullptr) return loss;

    grad->assign(parameter_count(), 0.0);
    // Parameter offsets per layer.
    std::vector<std::size_t> offset(L);
    for (std::size_t l = 0, k = 0; l < L; ++l) {
      offset[l] = k;
      k += layers_[l].weights.size() + layers_[l].bias.size();
    }
    ws.delta.resize(n);
    for (std::size_t i = 0; i < n; ++i) ws.delta[i] = 2.0 * (pred[i] - y[i]) / static_cast<double>(n);

    for (std::size_t l = L; l-- > 0;) {
      const DenseLayer& layer = layers_[l];
      const double* a_in = l == 0 ? x : ws.acts[l - 1].data();
      double* gw = grad->data() + offset[l];
      double* gb = gw + layer.weights.size();
      for (std::size_t b = 0; b < n; ++b) {
        const double* ab = a_in + b * layer.in;
        const double* db = ws.delta.data() + b * layer.out;
        for (std::size_t o = 0; o < layer.out; ++o) {
          const double d = db[o];
          if (d == 0.0) continue;
          double* g = gw + o * layer.in;
          for (std::size_t i = 0; i < layer.in; ++i) g[i] += d * ab[i];
          gb[o] += d;
        }
      }
      if (l == 0) break;
      ws.delta_prev.assign(n * layer.in, 0.0);
      for (std::size_t b = 0; b < n; ++b) {
        const double* db = ws.delta.data() + b * layer.out;
        double* dp = ws.delta_prev.data() + b * layer.in;
        for (std::size_t o = 0; o < layer.out; ++o) {
          const double d = db[o];
          if (d == 0.0) continue;
          const double* w = layer.weights.data() + o * layer.in;
          for (std::size_t i = 0; i < layer.in; ++i) dp[i] += d * w[i];
        }
        const double* ab = a_in + b * layer.in;
        for (std::size_t i = 0; i < layer.in; ++i)
          if (!(ab[i] > 0.0)) dp[i] = 0.0;
      }
      ws.delta.swap(ws.delta_prev);
    }
    return loss;
  }

  std::vector<DenseLayer> layers_;
};

using FeatureExtractor = Mlp;

// ---------------------------------------------------------------------------
// Checkpoints.
//
// Little-endian layout:
//   8 bytes  magic "PARISMLP"
//   u32      format version (1)
//   u32      layer count
//   per layer: u32 out, u32 in, out*in f64 weights (row-major), out f64 biases

namespace detail {

inline constexpr char kMagic[8] = {'P', 'A', 'R', 'I', 'S', 'M', 'L', 'P'};
static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian host");

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CheckpointError("truncated checkpoint");
  return v;
}

}  // namespace detail

inline void Mlp::save(std::ostream& out) const {
  out.write(detail::kMagic, sizeof(detail::kMagic));
  detail::put<std::uint32_t>(out, 1);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(layers_.size()));
  for (const auto& l : layers_) {
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(l.out));
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(l.in));
    out.write(reinterpret_cast<const char*>(l.weights.data()),
              static_cast<std::streamsize>(l.weights.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(l.bias.data()),
              static_cast<std::streamsize>(l.bias.size() * sizeof(double)));
  }
  if (!out) throw CheckpointError("failed to write checkpoint");
}

inline Mlp Mlp::load(std::istream& in) {
  char magic[sizeof(detail::kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, detail::kMagic, sizeof(magic)) != 0) throw CheckpointError("bad magic");
  if (detail::get<std::uint32_t>(in) != 1) throw CheckpointError("unsupported checkpoint version");
  const auto n_layers = detail::get<std::uint32_t>(in);
  if (n_layers < 2 || n_layers > 1024) throw CheckpointError("implausible layer count");
  std::vector<DenseLayer> layers;
  for (std::uint32_t k = 0; k < n_layers; ++k) {
    DenseLayer l;
    l.out = detail::get<std::uint32_t>(in);
    l.in = detail::get<std::uint32_t>(in);
    if (l.out == 0 || l.in == 0 || l.out > (1u << 20) || l.in > (1u << 20))
      throw CheckpointError("implausible layer shape");
    l.weights.resize(l.out * l.in);
    l.bias.resize(l.out);
    in.read(reinterpret_cast<char*>(l.weights.data()), static_cast<std::streamsize>(l.weights.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(l.bias.data()), static_cast<std::streamsize>(l.bias.size() * sizeof(double)));
    if (!in) throw CheckpointError("truncated checkpoint");
    layers.push_back(std::move(l));
  }
  try {
    return Mlp::from_layers(std::move(layers));
  } catch (const Error& e) {
    throw CheckpointError(std::string("inconsistent checkpoint: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Training.

struct TrainedMlp {
  Mlp model;
  std::size_t best_epoch = 0;  // 0 is the initialization
  std::size_t epochs_run = 0;
  double best_val_mse = 0.0;
  double initial_train_mse = 0.0;
  double final_train_mse = 0.0;
};

struct Trainer {
  // Adam with the usual moment decay rates; early stopping on validation MSE.
  static TrainedMlp train(const data::GroupedDataset& train, const data::GroupedDataset& val,
                          const MlpConfig& config, const Mlp* warm_start) {
    config.validate();
    if (train.size() == 0) throw InvalidArgument("train_mlp: empty training set");
    if (val.size() > 0 && val.input_dim() != train.input_dim())
      throw DimensionMismatch("train_mlp: train/val input dimension");

    std::mt19937_64 rng(config.seed);
    TrainedMlp out;
    if (warm_start != nullptr) {
      if (warm_start->input_dim() != train.input_dim()) throw DimensionMismatch("warm start input dim");
      out.model = *warm_start;
    } else {
      out.model = Mlp::initialize(train.input_dim(), config.hidden_sizes, rng());
    }
    Mlp& net = out.model;

    const std::size_t n = train.size();
    const std::size_t d = train.input_dim();
    const auto x = detail::to_row_major(train.inputs);
    const auto xv = detail::to_row_major(val.inputs);
    const bool has_val = val.size() > 0;

    Mlp::Workspace ws;
    auto val_loss = [&]() {
      return has_val ? net.batch_loss_and_gradient(xv.data(), val.targets.data(), val.size(), ws, nullptr)
                     : net.batch_loss_and_gradient(x.data(), train.targets.data(), n, ws, nullptr);
    };
    out.initial_train_mse = net.batch_loss_and_gradient(x.data(), train.targets.data(), n, ws, nullptr);
    double best = val_loss();
    if (!std::isfinite(best)) throw NonFiniteLoss(0, best);
    Mlp best_model = net;
    std::size_t since_best = 0;

    const std::size_t np = net.parameter_count();
    Vector m(np, 0.0), v(np, 0.0), grad, params;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> bx;
    std::vector<double> by;
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::uint64_t step = 0;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < n; start += config.batch_size) {
        const std::size_t bsz = std::min(config.batch_size, n - start);
        bx.resize(bsz * d);
        by.resize(bsz);
        for (std::size_t b = 0; b < bsz; ++b) {
          const std::size_t r = order[start + b];
          std::copy_n(x.data() + r * d, d, bx.data() + b * d);
          by[b] = train.targets[r];
        }
        const double loss = net.batch_loss_and_gradient(bx.data(), by.data(), bsz, ws, &grad);
        if (!std::isfinite(loss)) throw NonFiniteLoss(epoch, loss);
        ++step;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        params = net.parameters();
        for (std::size_t k = 0; k < np; ++k) {
          m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
          v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
          params[k] -= config.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
        }
        net.set_parameters(params);
      }
      out.epochs_run = epoch;
      const double vl = val_loss();
      if (!std::isfinite(vl)) throw NonFiniteLoss(epoch, vl);
      if (vl < best) {
        best = vl;
        best_model = net;
        out.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= config.patience) {
        break;
      }
    }
    out.model = std::move(best_model);
    out.best_val_mse = best;
    out.final_train_mse = out.model.batch_loss_and_gradient(x.data(), train.targets.data(), n, ws, nullptr);
    return out;
  }
};

// Trains on `train`, early-stopping on `val` (or on the training loss when val
// is empty). Returns the snapshot with the best validation MSE; epoch 0 is the
// initialization itself.
inline TrainedMlp train_mlp(const data::GroupedDataset& train, const data::GroupedDataset& val,
                            const MlpConfig& config, const Mlp* warm_start = nullptr) {
  return Trainer::train(train, val, config, warm_start);
}

// Members use seeds config.seed + 0 .. n_members - 1. Up to `jobs` members
// train concurrently; the result does not depend on `jobs`.
inline std::vector<TrainedMlp> train_ensemble(const data::GroupedDataset& train, const data::GroupedDataset& val,
                                              const MlpConfig& config, std::size_t n_members,
                                              std::size_t jobs = 1) {
  if (n_members == 0) throw InvalidArgument("train_ensemble: n_members must be >= 1");
  std::vector<TrainedMlp> members(n_members);
  auto member_config = [&](std::size_t k) {
    MlpConfig c = config;
    c.seed = config.seed + k;
    return c;
  };
  jobs = std::max<std::size_t>(1, jobs);
  for (std::size_t start = 0; start < n_members; start += jobs) {
    const std::size_t stop = std::min(n_members, start + jobs);
    std::vector<std::future<TrainedMlp>> pending;
    for (std::size_t k = start; k < stop; ++k)
      pending.push_back(std::async(jobs == 1 ? std::launch::deferred : std::launch::async,
                                   [&, k] { return train_mlp(train, val, member_config(k)); }));
    for (std::size_t k = start; k < stop; ++k) members[k] = pending[k - start].get();
  }
  return members;
}

inline Vector ensemble_predict(std::span<const TrainedMlp> members, const DenseMatrix& inputs) {
  if (members.empty()) throw InvalidArgument("ensemble_predict: empty ensemble");
  Vector mean(inputs.rows(), 0.0);
  for (const auto& m : members) {
    const Vector p = m.model.predict(inputs);
    for (std::size_t i = 0; i < p.size(); ++i) mean[i] += p[i];
  }
  for (double& v : mean) v /= static_cast<double>(members.size());
  return mean;
}

}  // namespace paris::features
