#ifndef UAI_NN_HPP_
#define UAI_NN_HPP_

// Minimal dense-network engine: layers, exact backprop, losses, Adam and the
// inverted-dropout mask. All training math is double precision.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "uai/rng.hpp"

namespace uai {

// Rows are batch items.
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Label = std::int32_t;

namespace nn {

enum class Activation : std::uint8_t {
  kLinear = 0,
  kRelu = 1,
  kSoftmax = 2,
  kTanh = 3,
};

struct DenseLayer {
  Matrix weight;  // in_dim x out_dim
  RowVector bias;  // out_dim
  Activation activation = Activation::kLinear;

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.rows()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.cols()); }
};

// Uniform fan-in/fan-out scaled initialization, zero biases.
DenseLayer MakeDenseLayer(std::size_t in_dim, std::size_t out_dim,
                          Activation activation, Rng& rng);

// Network input and per-layer post-activation outputs of one forward pass,
// tagged with the identity and parameter generation of the network that made
// it.
struct ForwardCache {
  Matrix input;
  std::vector<Matrix> outputs;
  std::uint64_t net_id = 0;
  std::uint64_t net_generation = 0;

  const Matrix& output() const { return outputs.back(); }
  const Matrix& layer_input(std::size_t k) const {
    return k == 0 ? input : outputs[k - 1];
  }
};

struct MlpGradients {
  std::vector<Matrix> weight;
  std::vector<RowVector> bias;

  // Same order as Mlp::Parameters(): w0, b0, w1, b1, ...
  std::vector<std::span<const double>> Views() const;
};

class Mlp {
 public:
  Mlp();
  explicit Mlp(std::vector<DenseLayer> layers);
  Mlp(const Mlp& other);
  Mlp& operator=(const Mlp& other);
  Mlp(Mlp&& other) noexcept = default;
  Mlp& operator=(Mlp&& other) noexcept = default;

  // dims = {in, hidden..., out}. Hidden layers use `hidden`, the last layer
  // uses `output`.
  static Mlp Create(std::span<const std::size_t> dims, Activation hidden,
                    Activation output, Rng& rng);

  std::size_t in_dim() const;
  std::size_t out_dim() const;
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t num_parameters() const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }
  // Mutable access invalidates outstanding forward caches.
  DenseLayer& mutable_layer(std::size_t i);

  // Views over w0, b0, w1, b1, ...; invalidates outstanding forward caches.
  std::vector<std::span<double>> Parameters();
  std::vector<std::span<const double>> Parameters() const;

  std::uint64_t id() const { return id_; }
  std::uint64_t generation() const { return generation_; }

 private:
  void Validate() const;

  std::vector<DenseLayer> layers_;
  std::uint64_t id_;
  std::uint64_t generation_ = 0;
};

ForwardCache Forward(const Mlp& net, const Matrix& input);

// Output only; no cache.
Matrix Predict(const Mlp& net, const Matrix& input);

struct BackwardResult {
  MlpGradients gradients;
  Matrix input_gradient;
};

// `output_gradient` is dLoss/d(output of the last layer, post-activation).
BackwardResult Backward(const Mlp& net, const ForwardCache& cache,
                        const Matrix& output_gradient);

// Row-wise softmax.
Matrix Softmax(const Matrix& logits);

struct LossResult {
  double loss = 0.0;
  Matrix gradient;
};

// Mean over the batch of -log softmax(logits)[label].
LossResult CrossEntropy(const Matrix& logits, std::span<const Label> labels);

// Mean over all elements of (pred - target)^2.
LossResult MeanSquaredError(const Matrix& pred, const Matrix& target);

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // L2 coefficient added to the gradient before the moment updates.
  double weight_decay = 0.0;
};

struct AdamState {
  AdamOptions options;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  AdamState() = default;
  AdamState(const AdamOptions& opts, std::span<const std::size_t> sizes);
};

std::vector<std::size_t> ParameterSizes(
    std::span<const std::span<double>> params);

// One bias-corrected Adam update; increments state.step exactly once.
void AdamStep(AdamState& state, std::span<const std::span<double>> params,
              std::span<const std::span<const double>> grads);

// Inverted dropout: each unit is zeroed with probability p and survivors are
// scaled by 1/(1-p).
class Dropout {
 public:
  // p == 1 is rejected unless `allow_drop_all` is set, in which case every
  // mask is all zeros.
  explicit Dropout(double p, bool allow_drop_all = false);

  double p() const { return p_; }

  RowVector Mask(std::size_t dim, Rng& rng) const;
  // One independent mask per row.
  Matrix MaskBatch(std::size_t rows, std::size_t dim, Rng& rng) const;

 private:
  double p_;
};

// Uniform double in [0, 1) from the top 53 bits of one draw.
double UniformUnit(Rng& rng);

// Hash over parameter bytes; used to audit which groups an update touched.
std::uint64_t HashParameters(std::span<const std::span<const double>> params,
                             std::uint64_t seed = 0);

}  // namespace nn
}  // namespace uai

#endif  // UAI_NN_HPP_
