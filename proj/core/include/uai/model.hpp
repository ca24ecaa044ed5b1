#ifndef UAI_MODEL_HPP_
#define UAI_MODEL_HPP_

// Encoder, decoder, predictor and the two disentanglers, plus the forward
// passes and gradients of the main and adversarial objectives.
//
// Main objective (minimized over encoder, decoder and predictor):
//   alpha * l_pred + beta * l_recon - gamma * (l_dis1 + l_dis2)
// Adversarial objective (minimized over the disentanglers):
//   l_dis1 + l_dis2

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "uai/nn.hpp"
#include "uai/rng.hpp"

namespace uai {

enum class EncoderTopology : std::uint8_t {
  // One trunk whose linear output is split into [h1 | h2].
  kSharedTrunk = 0,
  // Two independent encoders, one per latent.
  kDisjoint = 1,
};

// How the encoder heads bound the latent scale. Unbounded heads let the main
// step inflate the disentanglers' error by scaling the latents up.
enum class LatentBound : std::uint8_t {
  kNone = 0,    // linear heads
  kTanh = 1,    // elementwise tanh on the heads
  kSphere = 2,  // each row rescaled to norm sqrt(dim)
};

struct UaiConfig {
  std::size_t input_dim = 512;
  std::size_t h1_dim = 128;
  std::size_t h2_dim = 32;
  std::size_t num_speakers = 0;
  double alpha = 100.0;
  double beta = 5.0;
  double gamma = 50.0;
  double dropout_p = 0.75;
  std::size_t epochs = 350;
  std::size_t batch_size = 128;
  std::size_t adv_steps_per_main = 10;
  double lr_main = 1e-3;
  double lr_adv = 1e-4;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;

  std::vector<std::size_t> enc_hidden{512, 512};
  std::vector<std::size_t> dec_hidden{512, 512};
  std::vector<std::size_t> pred_hidden{256, 512};
  std::vector<std::size_t> dis_hidden{128, 128};
  EncoderTopology encoder_topology = EncoderTopology::kSharedTrunk;
  LatentBound latent_bound = LatentBound::kSphere;

  void Validate() const;
  bool operator==(const UaiConfig&) const = default;
};

// Rows of h1 (speaker part) and h2 (everything else).
struct EmbeddingPairs {
  Matrix h1;
  Matrix h2;
};

struct LossReport {
  double l_pred = 0.0;
  double l_recon = 0.0;
  double l_dis1 = 0.0;
  double l_dis2 = 0.0;
  double l_main = 0.0;
  double l_adv = 0.0;

  bool operator==(const LossReport&) const = default;
};

struct UaiModel {
  UaiConfig config;
  std::vector<nn::Mlp> encoders;  // one (shared trunk) or two (disjoint)
  nn::Mlp decoder;
  nn::Mlp predictor;
  nn::Mlp dis1;  // h1 -> h2
  nn::Mlp dis2;  // h2 -> h1
  nn::AdamState main_optimizer;
  nn::AdamState adv_optimizer;
  std::uint64_t epochs_completed = 0;
  std::vector<LossReport> history;

  // Randomly initialized from config.seed.
  static UaiModel Create(const UaiConfig& config);

  // Declaration order: encoder(s), decoder, predictor, dis1, dis2.
  std::vector<nn::Mlp*> Networks();
  std::vector<const nn::Mlp*> Networks() const;

  std::vector<std::span<double>> MainParameters();
  std::vector<std::span<const double>> MainParameters() const;
  std::vector<std::span<double>> AdversarialParameters();
  std::vector<std::span<const double>> AdversarialParameters() const;

  std::uint64_t MainHash() const;
  std::uint64_t AdversarialHash() const;

  // Cross-checks every network shape against config.
  void CheckShapes() const;
};

// Dropout-free extraction.
EmbeddingPairs Encode(const UaiModel& model, const Matrix& x);

struct EncoderPass {
  std::vector<nn::ForwardCache> caches;
  Matrix z1;  // head outputs before the sphere projection
  Matrix z2;
  Matrix h1;
  Matrix h2;
};

// Rows of z rescaled to norm sqrt(cols); zero rows stay zero.
Matrix SphereProject(const Matrix& z);
// Gradient w.r.t. z given the gradient w.r.t. SphereProject(z).
Matrix SphereProjectBackward(const Matrix& z, const Matrix& grad);

EncoderPass ForwardEncoder(const UaiModel& model, const Matrix& x);

// Disentangler half of a pass: dis1(h1) vs h2 and dis2(h2) vs h1.
struct AdversarialPass {
  nn::ForwardCache dis1_cache;
  nn::ForwardCache dis2_cache;
  nn::LossResult dis1_loss;  // gradient w.r.t. dis1 output
  nn::LossResult dis2_loss;
};

AdversarialPass ForwardDisentanglers(const UaiModel& model,
                                     const EmbeddingPairs& h);

struct MainPass {
  EncoderPass encoder;
  nn::ForwardCache predictor_cache;
  nn::ForwardCache decoder_cache;
  Matrix dropout_mask;
  nn::LossResult pred_loss;
  nn::LossResult recon_loss;
  LossReport report;  // l_pred, l_recon, l_main
};

// Predictor on clean h1; decoder on [mask .* h1 | h2].
MainPass ForwardMain(const UaiModel& model, const Matrix& x,
                     std::span<const Label> y, Rng& rng);
// Same with a caller-supplied mask (rows x h1_dim).
MainPass ForwardMain(const UaiModel& model, const Matrix& x,
                     std::span<const Label> y, const Matrix& dropout_mask);

struct AdvForward {
  EmbeddingPairs latents;
  AdversarialPass pass;
  LossReport report;  // l_dis1, l_dis2, l_adv
};

// No dropout anywhere on this path.
AdvForward ForwardAdv(const UaiModel& model, const Matrix& x);
// Same, on latents already produced by Encode.
AdvForward ForwardAdv(const UaiModel& model, EmbeddingPairs latents);

struct Gradients {
  std::vector<nn::MlpGradients> networks;

  std::vector<std::span<const double>> Views() const;
};

// d(l_dis1 + l_dis2) w.r.t. dis1 then dis2 parameters.
Gradients AdversarialGradients(const UaiModel& model, const AdvForward& adv);

// Rows `indices` of both latents.
EmbeddingPairs GatherRows(const EmbeddingPairs& h,
                          std::span<const std::size_t> indices);

// alpha * l_pred + beta * l_recon
double MainObjective(const UaiConfig& config, double l_pred, double l_recon);

// Full report for a main step: main-pass losses plus the disentangler losses
// evaluated on the same latents.
LossReport CombineReports(const MainPass& main, const AdversarialPass& adv);

// d(alpha*l_pred + beta*l_recon - gamma*l_adv) w.r.t. encoder(s), decoder and
// predictor parameters, in MainParameters() order.
Gradients MainGradients(const UaiModel& model, const MainPass& main,
                        const AdversarialPass& adv);

}  // namespace uai

#endif  // UAI_MODEL_HPP_
