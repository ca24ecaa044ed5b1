#include "uai/nn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <string>

#include "uai/error.hpp"

namespace uai::nn {
namespace {

std::atomic<std::uint64_t> g_next_net_id{1};

std::uint64_t NextNetId() { return g_next_net_id.fetch_add(1); }

void ApplyActivation(Activation act, Matrix& z) {
  switch (act) {
    case Activation::kLinear:
      break;
    case Activation::kRelu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::kSoftmax:
      z = Softmax(z);
      break;
    case Activation::kTanh:
      z = z.array().tanh().matrix();
      break;
  }
}

// Converts dLoss/d(post-activation) into dLoss/d(pre-activation), in place.
void ActivationBackward(Activation act, const Matrix& out, Matrix& grad) {
  switch (act) {
    case Activation::kLinear:
      break;
    case Activation::kRelu:
      grad = (out.array() > 0.0).select(grad, 0.0);
      break;
    case Activation::kSoftmax: {
      Eigen::VectorXd dots = (grad.array() * out.array()).rowwise().sum();
      grad = out.array() * (grad.colwise() - dots).array();
      break;
    }
    case Activation::kTanh:
      grad = grad.array() * (1.0 - out.array().square());
      break;
  }
}

}  // namespace

DenseLayer MakeDenseLayer(std::size_t in_dim, std::size_t out_dim,
                          Activation activation, Rng& rng) {
  if (in_dim == 0 || out_dim == 0) {
    throw ConfigError("dense layer dimensions must be positive");
  }
  DenseLayer layer;
  layer.activation = activation;
  layer.weight.resize(static_cast<Eigen::Index>(in_dim),
                      static_cast<Eigen::Index>(out_dim));
  layer.bias = RowVector::Zero(static_cast<Eigen::Index>(out_dim));
  const double limit =
      std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  double* w = layer.weight.data();
  for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
    w[i] = (2.0 * UniformUnit(rng) - 1.0) * limit;
  }
  return layer;
}

std::vector<std::span<const double>> MlpGradients::Views() const {
  std::vector<std::span<const double>> views;
  views.reserve(2 * weight.size());
  for (std::size_t i = 0; i < weight.size(); ++i) {
    views.emplace_back(weight[i].data(), weight[i].size());
    views.emplace_back(bias[i].data(), bias[i].size());
  }
  return views;
}

Mlp::Mlp() : id_(NextNetId()) {}

Mlp::Mlp(std::vector<DenseLayer> layers)
    : layers_(std::move(layers)), id_(NextNetId()) {
  Validate();
}

Mlp::Mlp(const Mlp& other) : layers_(other.layers_), id_(NextNetId()) {}

Mlp& Mlp::operator=(const Mlp& other) {
  if (this != &other) {
    layers_ = other.layers_;
    id_ = NextNetId();
    generation_ = 0;
  }
  return *this;
}

Mlp Mlp::Create(std::span<const std::size_t> dims, Activation hidden,
                Activation output, Rng& rng) {
  if (dims.size() < 2) {
    throw ConfigError("an Mlp needs at least input and output dimensions");
  }
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const bool last = i + 2 == dims.size();
    layers.push_back(
        MakeDenseLayer(dims[i], dims[i + 1], last ? output : hidden, rng));
  }
  return Mlp(std::move(layers));
}

void Mlp::Validate() const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const DenseLayer& l = layers_[i];
    if (l.weight.rows() == 0 || l.weight.cols() == 0) {
      throw ConfigError("layer " + std::to_string(i) + " has an empty weight");
    }
    if (l.bias.size() != l.weight.cols()) {
      throw ConfigError("layer " + std::to_string(i) +
                        ": bias size does not match out_dim");
    }
    if (i > 0 && layers_[i - 1].out_dim() != l.in_dim()) {
      throw ConfigError("layers " + std::to_string(i - 1) + " and " +
                        std::to_string(i) + " are not dimension-compatible");
    }
  }
}

std::size_t Mlp::in_dim() const {
  return layers_.empty() ? 0 : layers_.front().in_dim();
}

std::size_t Mlp::out_dim() const {
  return layers_.empty() ? 0 : layers_.back().out_dim();
}

std::size_t Mlp::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers_) {
    n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  }
  return n;
}

DenseLayer& Mlp::mutable_layer(std::size_t i) {
  ++generation_;
  return layers_.at(i);
}

std::vector<std::span<double>> Mlp::Parameters() {
  ++generation_;
  std::vector<std::span<double>> views;
  views.reserve(2 * layers_.size());
  for (auto& l : layers_) {
    views.emplace_back(l.weight.data(), l.weight.size());
    views.emplace_back(l.bias.data(), l.bias.size());
  }
  return views;
}

std::vector<std::span<const double>> Mlp::Parameters() const {
  std::vector<std::span<const double>> views;
  views.reserve(2 * layers_.size());
  for (const auto& l : layers_) {
    views.emplace_back(l.weight.data(), l.weight.size());
    views.emplace_back(l.bias.data(), l.bias.size());
  }
  return views;
}

ForwardCache Forward(const Mlp& net, const Matrix& input) {
  if (net.num_layers() == 0) throw ConfigError("forward through an empty Mlp");
  if (static_cast<std::size_t>(input.cols()) != net.in_dim()) {
    throw ConfigError("input has " + std::to_string(input.cols()) +
                      " columns, network expects " +
                      std::to_string(net.in_dim()));
  }
  ForwardCache cache;
  cache.net_id = net.id();
  cache.net_generation = net.generation();
  cache.input = input;
  cache.outputs.reserve(net.num_layers());
  const Matrix* x = &cache.input;
  for (const DenseLayer& layer : net.layers()) {
    Matrix z(x->rows(), layer.weight.cols());
    z.noalias() = *x * layer.weight;
    z.rowwise() += layer.bias;
    ApplyActivation(layer.activation, z);
    cache.outputs.push_back(std::move(z));
    x = &cache.outputs.back();
  }
  return cache;
}

Matrix Predict(const Mlp& net, const Matrix& input) {
  if (net.num_layers() == 0) throw ConfigError("forward through an empty Mlp");
  if (static_cast<std::size_t>(input.cols()) != net.in_dim()) {
    throw ConfigError("input has " + std::to_string(input.cols()) +
                      " columns, network expects " +
                      std::to_string(net.in_dim()));
  }
  Matrix x = input;
  for (const DenseLayer& layer : net.layers()) {
    Matrix z(x.rows(), layer.weight.cols());
    z.noalias() = x * layer.weight;
    z.rowwise() += layer.bias;
    ApplyActivation(layer.activation, z);
    x = std::move(z);
  }
  return x;
}

BackwardResult Backward(const Mlp& net, const ForwardCache& cache,
                        const Matrix& output_gradient) {
  if (cache.net_id != net.id() || cache.net_generation != net.generation() ||
      cache.outputs.size() != net.num_layers()) {
    throw ContractError("forward cache is stale or belongs to another network");
  }
  const Matrix& out = cache.output();
  if (output_gradient.rows() != out.rows() ||
      output_gradient.cols() != out.cols()) {
    throw ContractError("output gradient shape does not match forward output");
  }
  const std::size_t n = net.num_layers();
  BackwardResult result;
  result.gradients.weight.resize(n);
  result.gradients.bias.resize(n);
  Matrix grad = output_gradient;
  for (std::size_t k = n; k-- > 0;) {
    const DenseLayer& layer = net.layer(k);
    ActivationBackward(layer.activation, cache.outputs[k], grad);
    result.gradients.weight[k].noalias() = cache.layer_input(k).transpose() * grad;
    result.gradients.bias[k] = grad.colwise().sum();
    Matrix next(grad.rows(), layer.weight.rows());
    next.noalias() = grad * layer.weight.transpose();
    grad = std::move(next);
  }
  result.input_gradient = std::move(grad);
  return result;
}

Matrix Softmax(const Matrix& logits) {
  Matrix s = logits;
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    auto row = s.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
  return s;
}

LossResult CrossEntropy(const Matrix& logits, std::span<const Label> labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw InputError("cross entropy: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(logits.rows()) + " rows");
  }
  if (logits.rows() == 0) throw InputError("cross entropy on an empty batch");
  LossResult r;
  r.gradient = Softmax(logits);
  const double inv_n = 1.0 / static_cast<double>(logits.rows());
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Label y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.cols()) {
      throw InputError("cross entropy: label " + std::to_string(y) +
                       " out of range for " + std::to_string(logits.cols()) +
                       " classes");
    }
    // log-sum-exp form keeps the loss finite when a probability underflows.
    auto row = logits.row(i);
    const double m = row.maxCoeff();
    const double lse = m + std::log((row.array() - m).exp().sum());
    total += lse - row(y);
    r.gradient(i, y) -= 1.0;
  }
  r.loss = total * inv_n;
  r.gradient *= inv_n;
  return r;
}

LossResult MeanSquaredError(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw InputError("mse: shape mismatch");
  }
  if (pred.size() == 0) throw InputError("mse on an empty matrix");
  LossResult r;
  r.gradient = pred - target;
  const double n = static_cast<double>(pred.size());
  r.loss = r.gradient.squaredNorm() / n;
  r.gradient *= 2.0 / n;
  return r;
}

AdamState::AdamState(const AdamOptions& opts,
                     std::span<const std::size_t> sizes)
    : options(opts) {
  first_moment.reserve(sizes.size());
  second_moment.reserve(sizes.size());
  for (std::size_t s : sizes) {
    first_moment.emplace_back(s, 0.0);
    second_moment.emplace_back(s, 0.0);
  }
}

std::vector<std::size_t> ParameterSizes(
    std::span<const std::span<double>> params) {
  std::vector<std::size_t> sizes;
  sizes.reserve(params.size());
  for (const auto& p : params) sizes.push_back(p.size());
  return sizes;
}

void AdamStep(AdamState& state, std::span<const std::span<double>> params,
              std::span<const std::span<const double>> grads) {
  if (params.size() != grads.size() ||
      params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size()) {
    throw InputError("adam: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size() ||
        params[i].size() != state.first_moment[i].size() ||
        params[i].size() != state.second_moment[i].size()) {
      throw InputError("adam: shape mismatch in tensor " + std::to_string(i));
    }
  }
  const AdamOptions& o = state.options;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* theta = params[i].data();
    const double* g = grads[i].data();
    double* m = state.first_moment[i].data();
    double* v = state.second_moment[i].data();
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      const double gj = g[j] + o.weight_decay * theta[j];
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * gj;
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * gj * gj;
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      theta[j] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

Dropout::Dropout(double p, bool allow_drop_all) : p_(p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ConfigError("dropout probability must lie in [0, 1]");
  }
  if (p == 1.0 && !allow_drop_all) {
    throw ConfigError(
        "dropout probability 1 zeroes every unit; pass allow_drop_all to "
        "force it");
  }
}

RowVector Dropout::Mask(std::size_t dim, Rng& rng) const {
  if (dim == 0) throw ConfigError("dropout mask dimension must be positive");
  RowVector mask(static_cast<Eigen::Index>(dim));
  if (p_ == 0.0) {
    mask.setOnes();
    return mask;
  }
  if (p_ == 1.0) {
    mask.setZero();
    return mask;
  }
  const double scale = 1.0 / (1.0 - p_);
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask(i) = UniformUnit(rng) < p_ ? 0.0 : scale;
  }
  return mask;
}

Matrix Dropout::MaskBatch(std::size_t rows, std::size_t dim, Rng& rng) const {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r) = Mask(dim, rng);
  return m;
}

double UniformUnit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t HashParameters(std::span<const std::span<const double>> params,
                             std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (const auto& p : params) {
    for (double d : p) {
      std::uint64_t bits;
      std::memcpy(&bits, &d, sizeof bits);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xffU;
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

}  // namespace uai::nn
