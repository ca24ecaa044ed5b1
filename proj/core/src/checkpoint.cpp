#include "uai/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <limits>

#include "binary_io.hpp"
#include "uai/error.hpp"

namespace uai {
namespace {

using detail::ByteReader;
using detail::ByteWriter;

void PutWidths(ByteWriter& w, const std::vector<std::size_t>& widths) {
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(widths.size()));
  for (std::size_t v : widths) w.Put<std::uint64_t>(v);
}

std::vector<std::size_t> GetWidths(ByteReader& r) {
  const auto n = r.Get<std::uint32_t>();
  r.Need(static_cast<std::size_t>(n) * 8);
  std::vector<std::size_t> widths(n);
  for (auto& v : widths) v = static_cast<std::size_t>(r.Get<std::uint64_t>());
  return widths;
}

void PutTensor(ByteWriter& w, std::uint32_t rows, std::uint32_t cols,
               const double* data) {
  w.Put<std::uint32_t>(rows);
  w.Put<std::uint32_t>(cols);
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  for (std::size_t i = 0; i < n; ++i) w.Put<double>(data[i]);
}

// Reads a tensor whose shape must equal (rows, cols).
void GetTensor(ByteReader& r, std::uint32_t rows, std::uint32_t cols,
               double* out, const std::string& what) {
  const auto got_rows = r.Get<std::uint32_t>();
  const auto got_cols = r.Get<std::uint32_t>();
  if (got_rows != rows || got_cols != cols) {
    throw IoError("checkpoint: " + what + " has shape " +
                  std::to_string(got_rows) + "x" + std::to_string(got_cols) +
                  ", config implies " + std::to_string(rows) + "x" +
                  std::to_string(cols));
  }
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  r.Need(n * 8);
  for (std::size_t i = 0; i < n; ++i) out[i] = r.Get<double>();
}

struct Shape {
  std::uint32_t rows;
  std::uint32_t cols;
};

// Shapes of every parameter tensor of a network: w0, b0, w1, b1, ...
std::vector<Shape> Shapes(const nn::Mlp& net) {
  std::vector<Shape> s;
  for (const auto& l : net.layers()) {
    s.push_back({static_cast<std::uint32_t>(l.weight.rows()),
                 static_cast<std::uint32_t>(l.weight.cols())});
    s.push_back({1, static_cast<std::uint32_t>(l.bias.size())});
  }
  return s;
}

std::vector<Shape> GroupShapes(const std::vector<const nn::Mlp*>& nets) {
  std::vector<Shape> all;
  for (const auto* n : nets) {
    auto s = Shapes(*n);
    all.insert(all.end(), s.begin(), s.end());
  }
  return all;
}

void PutAdam(ByteWriter& w, const nn::AdamState& s,
             const std::vector<Shape>& shapes) {
  w.Put<std::uint64_t>(s.step);
  w.Put<double>(s.options.learning_rate);
  w.Put<double>(s.options.beta1);
  w.Put<double>(s.options.beta2);
  w.Put<double>(s.options.epsilon);
  w.Put<double>(s.options.weight_decay);
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(shapes.size()));
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    PutTensor(w, shapes[i].rows, shapes[i].cols, s.first_moment[i].data());
    PutTensor(w, shapes[i].rows, shapes[i].cols, s.second_moment[i].data());
  }
}

void GetAdam(ByteReader& r, nn::AdamState& s, const std::vector<Shape>& shapes,
             const std::string& group) {
  s.step = r.Get<std::uint64_t>();
  s.options.learning_rate = r.Get<double>();
  s.options.beta1 = r.Get<double>();
  s.options.beta2 = r.Get<double>();
  s.options.epsilon = r.Get<double>();
  s.options.weight_decay = r.Get<double>();
  const auto n = r.Get<std::uint32_t>();
  if (n != shapes.size()) {
    throw IoError("checkpoint: " + group + " optimizer holds " +
                  std::to_string(n) + " tensors, expected " +
                  std::to_string(shapes.size()));
  }
  s.first_moment.assign(n, {});
  s.second_moment.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t size = static_cast<std::size_t>(shapes[i].rows) * shapes[i].cols;
    s.first_moment[i].resize(size);
    s.second_moment[i].resize(size);
    const std::string what = group + " moment " + std::to_string(i);
    GetTensor(r, shapes[i].rows, shapes[i].cols, s.first_moment[i].data(), what);
    GetTensor(r, shapes[i].rows, shapes[i].cols, s.second_moment[i].data(), what);
  }
}

std::vector<const nn::Mlp*> MainNets(const UaiModel& m) {
  std::vector<const nn::Mlp*> nets;
  for (const auto& e : m.encoders) nets.push_back(&e);
  nets.push_back(&m.decoder);
  nets.push_back(&m.predictor);
  return nets;
}

long double NetParameterCount(std::size_t in,
                              const std::vector<std::size_t>& hidden,
                              std::size_t out) {
  long double total = 0;
  long double prev = static_cast<long double>(in);
  for (std::size_t h : hidden) {
    total += prev * h + h;
    prev = static_cast<long double>(h);
  }
  return total + prev * out + out;
}

long double ImpliedParameterCount(const UaiConfig& c) {
  const std::size_t h = c.h1_dim + c.h2_dim;
  long double n = c.encoder_topology == EncoderTopology::kSharedTrunk
                      ? NetParameterCount(c.input_dim, c.enc_hidden, h)
                      : NetParameterCount(c.input_dim, c.enc_hidden, c.h1_dim) +
                            NetParameterCount(c.input_dim, c.enc_hidden, c.h2_dim);
  n += NetParameterCount(h, c.dec_hidden, c.input_dim);
  n += NetParameterCount(c.h1_dim, c.pred_hidden, c.num_speakers);
  n += NetParameterCount(c.h1_dim, c.dis_hidden, c.h2_dim);
  n += NetParameterCount(c.h2_dim, c.dis_hidden, c.h1_dim);
  return n;
}

}  // namespace

std::string SaveCheckpoint(const UaiModel& model) {
  model.CheckShapes();
  const UaiConfig& c = model.config;
  ByteWriter w;
  w.PutRaw(std::string_view(kCheckpointMagic, 4));
  w.Put<std::uint32_t>(kCheckpointVersion);

  for (std::size_t v : {c.input_dim, c.h1_dim, c.h2_dim, c.num_speakers,
                        c.epochs, c.batch_size, c.adv_steps_per_main}) {
    w.Put<std::uint64_t>(v);
  }
  for (double v : {c.alpha, c.beta, c.gamma, c.dropout_p, c.lr_main, c.lr_adv,
                   c.weight_decay}) {
    w.Put<double>(v);
  }
  w.Put<std::uint64_t>(c.seed);
  w.Put<std::uint8_t>(static_cast<std::uint8_t>(c.encoder_topology));
  w.Put<std::uint8_t>(static_cast<std::uint8_t>(c.latent_bound));
  PutWidths(w, c.enc_hidden);
  PutWidths(w, c.dec_hidden);
  PutWidths(w, c.pred_hidden);
  PutWidths(w, c.dis_hidden);
  w.Put<std::uint64_t>(model.epochs_completed);

  const auto nets = model.Networks();
  std::uint32_t n_tensors = 0;
  for (const auto* n : nets) n_tensors += static_cast<std::uint32_t>(2 * n->num_layers());
  w.Put<std::uint32_t>(n_tensors);
  for (const auto* n : nets) {
    for (const auto& l : n->layers()) {
      PutTensor(w, static_cast<std::uint32_t>(l.weight.rows()),
                static_cast<std::uint32_t>(l.weight.cols()), l.weight.data());
      PutTensor(w, 1, static_cast<std::uint32_t>(l.bias.size()), l.bias.data());
    }
  }
  PutAdam(w, model.main_optimizer, GroupShapes(MainNets(model)));
  PutAdam(w, model.adv_optimizer, GroupShapes({&model.dis1, &model.dis2}));

  w.Put<std::uint32_t>(static_cast<std::uint32_t>(model.history.size()));
  for (const LossReport& h : model.history) {
    for (double v : {h.l_pred, h.l_recon, h.l_dis1, h.l_dis2, h.l_main, h.l_adv}) {
      w.Put<double>(v);
    }
  }
  return w.Take();
}

UaiModel LoadCheckpoint(std::string_view bytes) {
  ByteReader r(bytes, "checkpoint");
  if (r.remaining() < 4 ||
      r.GetRaw(4) != std::string_view(kCheckpointMagic, 4)) {
    throw IoError("checkpoint: bad magic, expected \"UAI1\"");
  }
  const auto version = r.Get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  }
  UaiConfig c;
  for (std::size_t* v : {&c.input_dim, &c.h1_dim, &c.h2_dim, &c.num_speakers,
                         &c.epochs, &c.batch_size, &c.adv_steps_per_main}) {
    *v = static_cast<std::size_t>(r.Get<std::uint64_t>());
  }
  for (double* v : {&c.alpha, &c.beta, &c.gamma, &c.dropout_p, &c.lr_main,
                    &c.lr_adv, &c.weight_decay}) {
    *v = r.Get<double>();
  }
  c.seed = r.Get<std::uint64_t>();
  const auto topology = r.Get<std::uint8_t>();
  if (topology > 1) {
    throw IoError("checkpoint: unknown encoder topology " +
                  std::to_string(topology));
  }
  c.encoder_topology = static_cast<EncoderTopology>(topology);
  const auto bound = r.Get<std::uint8_t>();
  if (bound > static_cast<std::uint8_t>(LatentBound::kSphere)) {
    throw IoError("checkpoint: unknown latent bound " + std::to_string(bound));
  }
  c.latent_bound = static_cast<LatentBound>(bound);
  c.enc_hidden = GetWidths(r);
  c.dec_hidden = GetWidths(r);
  c.pred_hidden = GetWidths(r);
  c.dis_hidden = GetWidths(r);
  const std::uint64_t epochs_completed = r.Get<std::uint64_t>();

  // Parameters plus two Adam moments, 8 bytes each, must fit in what is left;
  // this rejects corrupted dims before anything is allocated.
  const long double implied = 3.0L * 8.0L * ImpliedParameterCount(c);
  if (implied > static_cast<long double>(r.remaining())) {
    throw IoError("checkpoint: config implies " +
                  std::to_string(static_cast<double>(implied)) +
                  " bytes of tensors but only " +
                  std::to_string(r.remaining()) + " remain");
  }
  UaiModel model;
  try {
    model = UaiModel::Create(c);
  } catch (const ConfigError& e) {
    throw IoError(std::string("checkpoint: invalid config block: ") + e.what());
  }
  model.epochs_completed = epochs_completed;

  auto nets = model.Networks();
  std::uint32_t expected = 0;
  for (const auto* n : nets) expected += static_cast<std::uint32_t>(2 * n->num_layers());
  const auto n_tensors = r.Get<std::uint32_t>();
  if (n_tensors != expected) {
    throw IoError("checkpoint: " + std::to_string(n_tensors) +
                  " parameter tensors, config implies " +
                  std::to_string(expected));
  }
  std::size_t index = 0;
  for (auto* n : nets) {
    for (std::size_t k = 0; k < n->num_layers(); ++k) {
      nn::DenseLayer& l = n->mutable_layer(k);
      GetTensor(r, static_cast<std::uint32_t>(l.weight.rows()),
                static_cast<std::uint32_t>(l.weight.cols()), l.weight.data(),
                "tensor " + std::to_string(index++));
      GetTensor(r, 1, static_cast<std::uint32_t>(l.bias.size()), l.bias.data(),
                "tensor " + std::to_string(index++));
    }
  }
  GetAdam(r, model.main_optimizer, GroupShapes(MainNets(model)), "main");
  GetAdam(r, model.adv_optimizer, GroupShapes({&model.dis1, &model.dis2}),
          "adversarial");

  const auto n_history = r.Get<std::uint32_t>();
  r.Need(static_cast<std::size_t>(n_history) * 6 * 8);
  model.history.resize(n_history);
  for (LossReport& h : model.history) {
    for (double* v : {&h.l_pred, &h.l_recon, &h.l_dis1, &h.l_dis2, &h.l_main,
                      &h.l_adv}) {
      *v = r.Get<double>();
    }
  }
  r.ExpectEnd();
  return model;
}

void SaveCheckpointFile(const UaiModel& model,
                        const std::filesystem::path& path) {
  const std::string bytes = SaveCheckpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

UaiModel LoadCheckpointFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  try {
    return LoadCheckpoint(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace uai
