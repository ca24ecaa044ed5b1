#include "uai/model.hpp"

#include <cmath>
#include <string>

#include "uai/error.hpp"

namespace uai {
namespace {

std::vector<std::size_t> Dims(std::size_t in,
                              const std::vector<std::size_t>& hidden,
                              std::size_t out) {
  std::vector<std::size_t> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

void CheckNet(const nn::Mlp& net, std::size_t in, std::size_t out,
              const char* name) {
  if (net.num_layers() == 0 || net.in_dim() != in || net.out_dim() != out) {
    throw ConfigError(std::string(name) + " expected " + std::to_string(in) +
                      " -> " + std::to_string(out) + ", has " +
                      std::to_string(net.in_dim()) + " -> " +
                      std::to_string(net.out_dim()));
  }
}

template <typename Span, typename Net>
void Append(std::vector<Span>& out, Net& net) {
  auto p = net.Parameters();
  out.insert(out.end(), p.begin(), p.end());
}

Matrix Concat(const Matrix& a, const Matrix& b) {
  Matrix z(a.rows(), a.cols() + b.cols());
  z.leftCols(a.cols()) = a;
  z.rightCols(b.cols()) = b;
  return z;
}

}  // namespace

void UaiConfig::Validate() const {
  if (input_dim == 0 || h1_dim == 0 || h2_dim == 0 || num_speakers == 0) {
    throw ConfigError(
        "input_dim, h1_dim, h2_dim and num_speakers must all be positive");
  }
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(gamma >= 0.0)) {
    throw ConfigError("alpha, beta and gamma must be >= 0");
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw ConfigError("dropout_p must lie in [0, 1)");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (latent_bound != LatentBound::kNone && latent_bound != LatentBound::kTanh &&
      latent_bound != LatentBound::kSphere) {
    throw ConfigError("unknown latent_bound");
  }
  if (!(lr_main > 0.0) || !(lr_adv > 0.0) || !(weight_decay >= 0.0)) {
    throw ConfigError("learning rates must be > 0 and weight_decay >= 0");
  }
  for (const auto* widths : {&enc_hidden, &dec_hidden, &pred_hidden, &dis_hidden}) {
    for (std::size_t w : *widths) {
      if (w == 0) throw ConfigError("hidden layer widths must be positive");
    }
  }
}

UaiModel UaiModel::Create(const UaiConfig& config) {
  config.Validate();
  UaiModel m;
  m.config = config;
  Rng rng(DeriveSeed(config.seed, "init"));
  using nn::Activation;
  const auto relu = Activation::kRelu;
  const auto linear = Activation::kLinear;
  const auto latent =
      config.latent_bound == LatentBound::kTanh ? Activation::kTanh : linear;
  if (config.encoder_topology == EncoderTopology::kSharedTrunk) {
    m.encoders.push_back(nn::Mlp::Create(
        Dims(config.input_dim, config.enc_hidden, config.h1_dim + config.h2_dim),
        relu, latent, rng));
  } else {
    m.encoders.push_back(nn::Mlp::Create(
        Dims(config.input_dim, config.enc_hidden, config.h1_dim), relu, latent,
        rng));
    m.encoders.push_back(nn::Mlp::Create(
        Dims(config.input_dim, config.enc_hidden, config.h2_dim), relu, latent,
        rng));
  }
  m.decoder = nn::Mlp::Create(
      Dims(config.h1_dim + config.h2_dim, config.dec_hidden, config.input_dim),
      relu, linear, rng);
  m.predictor = nn::Mlp::Create(
      Dims(config.h1_dim, config.pred_hidden, config.num_speakers), relu,
      linear, rng);
  m.dis1 = nn::Mlp::Create(Dims(config.h1_dim, config.dis_hidden, config.h2_dim),
                           relu, linear, rng);
  m.dis2 = nn::Mlp::Create(Dims(config.h2_dim, config.dis_hidden, config.h1_dim),
                           relu, linear, rng);

  nn::AdamOptions main_opts;
  main_opts.learning_rate = config.lr_main;
  main_opts.weight_decay = config.weight_decay;
  nn::AdamOptions adv_opts;
  adv_opts.learning_rate = config.lr_adv;
  adv_opts.weight_decay = config.weight_decay;
  auto main_params = m.MainParameters();
  auto adv_params = m.AdversarialParameters();
  const auto main_sizes = nn::ParameterSizes(main_params);
  const auto adv_sizes = nn::ParameterSizes(adv_params);
  m.main_optimizer = nn::AdamState(main_opts, main_sizes);
  m.adv_optimizer = nn::AdamState(adv_opts, adv_sizes);
  return m;
}

std::vector<nn::Mlp*> UaiModel::Networks() {
  std::vector<nn::Mlp*> nets;
  for (auto& e : encoders) nets.push_back(&e);
  nets.insert(nets.end(), {&decoder, &predictor, &dis1, &dis2});
  return nets;
}

std::vector<const nn::Mlp*> UaiModel::Networks() const {
  std::vector<const nn::Mlp*> nets;
  for (const auto& e : encoders) nets.push_back(&e);
  nets.insert(nets.end(), {&decoder, &predictor, &dis1, &dis2});
  return nets;
}

std::vector<std::span<double>> UaiModel::MainParameters() {
  std::vector<std::span<double>> p;
  for (auto& e : encoders) Append(p, e);
  Append(p, decoder);
  Append(p, predictor);
  return p;
}

std::vector<std::span<const double>> UaiModel::MainParameters() const {
  std::vector<std::span<const double>> p;
  for (const auto& e : encoders) Append(p, e);
  Append(p, decoder);
  Append(p, predictor);
  return p;
}

std::vector<std::span<double>> UaiModel::AdversarialParameters() {
  std::vector<std::span<double>> p;
  Append(p, dis1);
  Append(p, dis2);
  return p;
}

std::vector<std::span<const double>> UaiModel::AdversarialParameters() const {
  std::vector<std::span<const double>> p;
  Append(p, dis1);
  Append(p, dis2);
  return p;
}

std::uint64_t UaiModel::MainHash() const {
  return nn::HashParameters(MainParameters());
}

std::uint64_t UaiModel::AdversarialHash() const {
  return nn::HashParameters(AdversarialParameters());
}

void UaiModel::CheckShapes() const {
  config.Validate();
  const std::size_t h = config.h1_dim + config.h2_dim;
  if (config.encoder_topology == EncoderTopology::kSharedTrunk) {
    if (encoders.size() != 1) throw ConfigError("shared trunk needs one encoder");
    CheckNet(encoders[0], config.input_dim, h, "encoder");
  } else {
    if (encoders.size() != 2) throw ConfigError("disjoint topology needs two encoders");
    CheckNet(encoders[0], config.input_dim, config.h1_dim, "h1 encoder");
    CheckNet(encoders[1], config.input_dim, config.h2_dim, "h2 encoder");
  }
  CheckNet(decoder, h, config.input_dim, "decoder");
  CheckNet(predictor, config.h1_dim, config.num_speakers, "predictor");
  CheckNet(dis1, config.h1_dim, config.h2_dim, "dis1");
  CheckNet(dis2, config.h2_dim, config.h1_dim, "dis2");
}

namespace {

void CheckInput(const UaiConfig& c, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != c.input_dim) {
    throw InputError("input has " + std::to_string(x.cols()) +
                     " columns, model expects " + std::to_string(c.input_dim));
  }
}

Matrix Bound(const UaiConfig& c, const Matrix& z) {
  return c.latent_bound == LatentBound::kSphere ? SphereProject(z) : z;
}

}  // namespace

Matrix SphereProject(const Matrix& z) {
  const double radius = std::sqrt(static_cast<double>(z.cols()));
  Matrix h = z;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double norm = z.row(r).norm();
    if (norm > 0.0) h.row(r) *= radius / norm;
  }
  return h;
}

Matrix SphereProjectBackward(const Matrix& z, const Matrix& grad) {
  const double radius = std::sqrt(static_cast<double>(z.cols()));
  Matrix out = grad;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double norm = z.row(r).norm();
    if (norm == 0.0) continue;
    const RowVector u = z.row(r) / norm;
    out.row(r) = (radius / norm) * (grad.row(r) - u * u.dot(grad.row(r)));
  }
  return out;
}

EncoderPass ForwardEncoder(const UaiModel& model, const Matrix& x) {
  const UaiConfig& c = model.config;
  CheckInput(c, x);
  EncoderPass pass;
  if (model.encoders.size() == 1) {
    pass.caches.push_back(nn::Forward(model.encoders[0], x));
    const Matrix& out = pass.caches[0].output();
    pass.z1 = out.leftCols(static_cast<Eigen::Index>(c.h1_dim));
    pass.z2 = out.rightCols(static_cast<Eigen::Index>(c.h2_dim));
  } else {
    pass.caches.push_back(nn::Forward(model.encoders[0], x));
    pass.caches.push_back(nn::Forward(model.encoders[1], x));
    pass.z1 = pass.caches[0].output();
    pass.z2 = pass.caches[1].output();
  }
  pass.h1 = Bound(c, pass.z1);
  pass.h2 = Bound(c, pass.z2);
  return pass;
}

EmbeddingPairs Encode(const UaiModel& model, const Matrix& x) {
  const UaiConfig& c = model.config;
  CheckInput(c, x);
  EmbeddingPairs h;
  if (model.encoders.size() == 1) {
    const Matrix out = nn::Predict(model.encoders[0], x);
    h.h1 = Bound(c, out.leftCols(static_cast<Eigen::Index>(c.h1_dim)));
    h.h2 = Bound(c, out.rightCols(static_cast<Eigen::Index>(c.h2_dim)));
  } else {
    h.h1 = Bound(c, nn::Predict(model.encoders[0], x));
    h.h2 = Bound(c, nn::Predict(model.encoders[1], x));
  }
  return h;
}

AdversarialPass ForwardDisentanglers(const UaiModel& model,
                                     const EmbeddingPairs& h) {
  AdversarialPass pass;
  pass.dis1_cache = nn::Forward(model.dis1, h.h1);
  pass.dis2_cache = nn::Forward(model.dis2, h.h2);
  pass.dis1_loss = nn::MeanSquaredError(pass.dis1_cache.output(), h.h2);
  pass.dis2_loss = nn::MeanSquaredError(pass.dis2_cache.output(), h.h1);
  return pass;
}

MainPass ForwardMain(const UaiModel& model, const Matrix& x,
                     std::span<const Label> y, Rng& rng) {
  const nn::Dropout dropout(model.config.dropout_p);
  const Matrix mask = dropout.MaskBatch(static_cast<std::size_t>(x.rows()),
                                        model.config.h1_dim, rng);
  return ForwardMain(model, x, y, mask);
}

MainPass ForwardMain(const UaiModel& model, const Matrix& x,
                     std::span<const Label> y, const Matrix& dropout_mask) {
  const UaiConfig& c = model.config;
  if (dropout_mask.rows() != x.rows() ||
      static_cast<std::size_t>(dropout_mask.cols()) != c.h1_dim) {
    throw InputError("dropout mask must be batch x h1_dim");
  }
  MainPass pass;
  pass.encoder = ForwardEncoder(model, x);
  pass.predictor_cache = nn::Forward(model.predictor, pass.encoder.h1);
  pass.pred_loss = nn::CrossEntropy(pass.predictor_cache.output(), y);
  pass.dropout_mask = dropout_mask;
  const Matrix noisy_h1 = pass.encoder.h1.cwiseProduct(dropout_mask);
  pass.decoder_cache =
      nn::Forward(model.decoder, Concat(noisy_h1, pass.encoder.h2));
  pass.recon_loss = nn::MeanSquaredError(pass.decoder_cache.output(), x);
  pass.report.l_pred = pass.pred_loss.loss;
  pass.report.l_recon = pass.recon_loss.loss;
  pass.report.l_main = MainObjective(c, pass.report.l_pred, pass.report.l_recon);
  return pass;
}

AdvForward ForwardAdv(const UaiModel& model, const Matrix& x) {
  return ForwardAdv(model, Encode(model, x));
}

AdvForward ForwardAdv(const UaiModel& model, EmbeddingPairs latents) {
  AdvForward adv;
  adv.latents = std::move(latents);
  adv.pass = ForwardDisentanglers(model, adv.latents);
  adv.report.l_dis1 = adv.pass.dis1_loss.loss;
  adv.report.l_dis2 = adv.pass.dis2_loss.loss;
  adv.report.l_adv = adv.report.l_dis1 + adv.report.l_dis2;
  return adv;
}

std::vector<std::span<const double>> Gradients::Views() const {
  std::vector<std::span<const double>> v;
  for (const auto& g : networks) {
    auto w = g.Views();
    v.insert(v.end(), w.begin(), w.end());
  }
  return v;
}

Gradients AdversarialGradients(const UaiModel& model, const AdvForward& adv) {
  Gradients g;
  g.networks.push_back(nn::Backward(model.dis1, adv.pass.dis1_cache,
                                    adv.pass.dis1_loss.gradient)
                           .gradients);
  g.networks.push_back(nn::Backward(model.dis2, adv.pass.dis2_cache,
                                    adv.pass.dis2_loss.gradient)
                           .gradients);
  return g;
}

EmbeddingPairs GatherRows(const EmbeddingPairs& h,
                          std::span<const std::size_t> indices) {
  EmbeddingPairs out;
  out.h1.resize(static_cast<Eigen::Index>(indices.size()), h.h1.cols());
  out.h2.resize(static_cast<Eigen::Index>(indices.size()), h.h2.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(indices[r]);
    out.h1.row(static_cast<Eigen::Index>(r)) = h.h1.row(i);
    out.h2.row(static_cast<Eigen::Index>(r)) = h.h2.row(i);
  }
  return out;
}

double MainObjective(const UaiConfig& config, double l_pred, double l_recon) {
  return config.alpha * l_pred + config.beta * l_recon;
}

LossReport CombineReports(const MainPass& main, const AdversarialPass& adv) {
  LossReport r = main.report;
  r.l_dis1 = adv.dis1_loss.loss;
  r.l_dis2 = adv.dis2_loss.loss;
  r.l_adv = r.l_dis1 + r.l_dis2;
  return r;
}

Gradients MainGradients(const UaiModel& model, const MainPass& main,
                        const AdversarialPass& adv) {
  const UaiConfig& c = model.config;
  const auto h1 = static_cast<Eigen::Index>(c.h1_dim);
  const auto h2 = static_cast<Eigen::Index>(c.h2_dim);

  nn::BackwardResult pred = nn::Backward(
      model.predictor, main.predictor_cache, c.alpha * main.pred_loss.gradient);
  nn::BackwardResult dec = nn::Backward(model.decoder, main.decoder_cache,
                                        c.beta * main.recon_loss.gradient);
  Matrix dh1 = pred.input_gradient;
  dh1 += dec.input_gradient.leftCols(h1).cwiseProduct(main.dropout_mask);
  Matrix dh2 = dec.input_gradient.rightCols(h2);

  if (c.gamma != 0.0) {
    // l_dis1 = mse(dis1(h1), h2), l_dis2 = mse(dis2(h2), h1); both latents
    // receive gradient as disentangler inputs and as regression targets.
    const double g = c.gamma;
    nn::BackwardResult b1 =
        nn::Backward(model.dis1, adv.dis1_cache, -g * adv.dis1_loss.gradient);
    nn::BackwardResult b2 =
        nn::Backward(model.dis2, adv.dis2_cache, -g * adv.dis2_loss.gradient);
    dh1 += b1.input_gradient;
    dh2 += g * adv.dis1_loss.gradient;
    dh2 += b2.input_gradient;
    dh1 += g * adv.dis2_loss.gradient;
  }

  if (c.latent_bound == LatentBound::kSphere) {
    dh1 = SphereProjectBackward(main.encoder.z1, dh1);
    dh2 = SphereProjectBackward(main.encoder.z2, dh2);
  }

  Gradients grads;
  if (model.encoders.size() == 1) {
    grads.networks.push_back(nn::Backward(model.encoders[0],
                                          main.encoder.caches[0],
                                          Concat(dh1, dh2))
                                 .gradients);
  } else {
    grads.networks.push_back(
        nn::Backward(model.encoders[0], main.encoder.caches[0], dh1).gradients);
    grads.networks.push_back(
        nn::Backward(model.encoders[1], main.encoder.caches[1], dh2).gradients);
  }
  grads.networks.push_back(std::move(dec.gradients));
  grads.networks.push_back(std::move(pred.gradients));
  return grads;
}

}  // namespace uai
