#include <cstdio>
#include <map>
#include <ostream>

#include "common.hpp"
#include "uai/checkpoint.hpp"
#include "uai/error.hpp"
#include "uai/trainer.hpp"

namespace uai::cli {

namespace {

struct TrainOptions {
  std::string data;
  std::string out;
  std::string resume;
  bool print_config = false;
  UaiConfig config;
  CommonOptions common;
};

// Hyperparameter options, in the order they are echoed. Each entry copies
// its field from one config into another.
struct Field {
  const char* key;
  void (*copy)(UaiConfig& dst, const UaiConfig& src);
};

constexpr Field kFields[] = {
    {"alpha", [](UaiConfig& d, const UaiConfig& s) { d.alpha = s.alpha; }},
    {"beta", [](UaiConfig& d, const UaiConfig& s) { d.beta = s.beta; }},
    {"gamma", [](UaiConfig& d, const UaiConfig& s) { d.gamma = s.gamma; }},
    {"dropout", [](UaiConfig& d, const UaiConfig& s) { d.dropout_p = s.dropout_p; }},
    {"epochs", [](UaiConfig& d, const UaiConfig& s) { d.epochs = s.epochs; }},
    {"batch", [](UaiConfig& d, const UaiConfig& s) { d.batch_size = s.batch_size; }},
    {"adv-steps",
     [](UaiConfig& d, const UaiConfig& s) { d.adv_steps_per_main = s.adv_steps_per_main; }},
    {"lr-main", [](UaiConfig& d, const UaiConfig& s) { d.lr_main = s.lr_main; }},
    {"lr-adv", [](UaiConfig& d, const UaiConfig& s) { d.lr_adv = s.lr_adv; }},
    {"weight-decay", [](UaiConfig& d, const UaiConfig& s) { d.weight_decay = s.weight_decay; }},
    {"seed", [](UaiConfig& d, const UaiConfig& s) { d.seed = s.seed; }},
    {"h1-dim", [](UaiConfig& d, const UaiConfig& s) { d.h1_dim = s.h1_dim; }},
    {"h2-dim", [](UaiConfig& d, const UaiConfig& s) { d.h2_dim = s.h2_dim; }},
    {"enc-hidden", [](UaiConfig& d, const UaiConfig& s) { d.enc_hidden = s.enc_hidden; }},
    {"dec-hidden", [](UaiConfig& d, const UaiConfig& s) { d.dec_hidden = s.dec_hidden; }},
    {"pred-hidden", [](UaiConfig& d, const UaiConfig& s) { d.pred_hidden = s.pred_hidden; }},
    {"dis-hidden", [](UaiConfig& d, const UaiConfig& s) { d.dis_hidden = s.dis_hidden; }},
    {"topology",
     [](UaiConfig& d, const UaiConfig& s) { d.encoder_topology = s.encoder_topology; }},
    {"latent-bound",
     [](UaiConfig& d, const UaiConfig& s) { d.latent_bound = s.latent_bound; }},
};

const std::map<std::string, EncoderTopology> kTopologies{
    {"shared", EncoderTopology::kSharedTrunk}, {"disjoint", EncoderTopology::kDisjoint}};
const std::map<std::string, LatentBound> kBounds{
    {"none", LatentBound::kNone}, {"tanh", LatentBound::kTanh}, {"sphere", LatentBound::kSphere}};

std::string Join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string ValueOf(const UaiConfig& c, std::string_view key) {
  if (key == "alpha") return FormatDouble(c.alpha);
  if (key == "beta") return FormatDouble(c.beta);
  if (key == "gamma") return FormatDouble(c.gamma);
  if (key == "dropout") return FormatDouble(c.dropout_p);
  if (key == "epochs") return std::to_string(c.epochs);
  if (key == "batch") return std::to_string(c.batch_size);
  if (key == "adv-steps") return std::to_string(c.adv_steps_per_main);
  if (key == "lr-main") return FormatDouble(c.lr_main);
  if (key == "lr-adv") return FormatDouble(c.lr_adv);
  if (key == "weight-decay") return FormatDouble(c.weight_decay);
  if (key == "seed") return std::to_string(c.seed);
  if (key == "h1-dim") return std::to_string(c.h1_dim);
  if (key == "h2-dim") return std::to_string(c.h2_dim);
  if (key == "enc-hidden") return Join(c.enc_hidden);
  if (key == "dec-hidden") return Join(c.dec_hidden);
  if (key == "pred-hidden") return Join(c.pred_hidden);
  if (key == "dis-hidden") return Join(c.dis_hidden);
  if (key == "topology") {
    return c.encoder_topology == EncoderTopology::kSharedTrunk ? "shared" : "disjoint";
  }
  for (const auto& [name, bound] : kBounds) {
    if (bound == c.latent_bound) return name;
  }
  return "?";
}

void PrintConfig(std::ostream& out, const UaiConfig& c, bool with_data) {
  for (const Field& f : kFields) out << f.key << '=' << ValueOf(c, f.key) << '\n';
  if (with_data) {
    out << "# from the data: input-dim=" << c.input_dim << " speakers=" << c.num_speakers
        << '\n';
  }
}

void LogReport(MetricsLog& log, const std::string& stage, const LossReport& r) {
  log.Record(stage, "l_pred", r.l_pred);
  log.Record(stage, "l_recon", r.l_recon);
  log.Record(stage, "l_dis1", r.l_dis1);
  log.Record(stage, "l_dis2", r.l_dis2);
  log.Record(stage, "l_main", r.l_main);
  log.Record(stage, "l_adv", r.l_adv);
}

void Execute(const TrainOptions& o, const CLI::App& app, const Io& io) {
  if (o.print_config) {
    // Input size and speaker count come from the data.
    UaiConfig probe = o.config;
    probe.input_dim = 1;
    probe.num_speakers = 2;
    probe.Validate();
    PrintConfig(io.out, o.config, false);
    return;
  }
  if (o.data.empty() || o.out.empty()) throw ConfigError("--data and --out are required");
  RequireDataset(o.data, "training data");
  RequireOutputPath(o.out, "checkpoint");
  std::vector<fs::path> outputs{o.out};
  std::vector<fs::path> inputs{Prefix(o.data).embeddings, Prefix(o.data).labels};
  if (!o.resume.empty()) {
    RequireInputFile(o.resume, "resume checkpoint");
    inputs.push_back(o.resume);
  }
  if (!o.common.log.empty()) {
    RequireOutputPath(o.common.log, "metrics log");
    outputs.push_back(o.common.log);
  }
  RequireDistinct(outputs, inputs);

  const data::EmbeddingDataset ds = data::LoadDataset(Prefix(o.data));
  UaiModel model;
  if (o.resume.empty()) {
    UaiConfig c = o.config;
    c.input_dim = ds.dim();
    c.num_speakers = ds.num_speakers;
    model = UaiModel::Create(c);
  } else {
    model = LoadCheckpointFile(o.resume);
    // Explicit hyperparameters must agree with the checkpoint; only the
    // epoch target may change.
    std::string differing;
    for (const Field& f : kFields) {
      if (std::string_view(f.key) == "epochs" || app.count(std::string("--") + f.key) == 0) {
        continue;
      }
      UaiConfig probe = model.config;
      f.copy(probe, o.config);
      if (!(probe == model.config)) differing += (differing.empty() ? "" : ", ") + std::string(f.key);
    }
    if (!differing.empty()) {
      throw ConfigError("cannot change " + differing + " when resuming from " + o.resume);
    }
    if (app.count("--epochs")) model.config.epochs = o.config.epochs;
    model.config.Validate();
    if (model.epochs_completed > model.config.epochs) {
      throw ConfigError("checkpoint has " + std::to_string(model.epochs_completed) +
                        " epochs, more than the requested " +
                        std::to_string(model.config.epochs));
    }
  }
  if (ds.dim() != model.config.input_dim) {
    throw InputError("data dimension " + std::to_string(ds.dim()) +
                     " differs from the model input " + std::to_string(model.config.input_dim));
  }
  if (ds.size() < model.config.batch_size) {
    throw ConfigError("batch " + std::to_string(model.config.batch_size) + " exceeds the " +
                      std::to_string(ds.size()) + " training items");
  }

  io.out << "uai train: configuration\n";
  PrintConfig(io.out, model.config, true);
  if (!o.resume.empty()) {
    io.out << "resuming after epoch " << model.epochs_completed << '\n';
  }

  MetricsLog log = OpenLog(o.common, "train-" + std::to_string(model.config.seed));
  TrainObserver obs;
  obs.on_epoch = [&](std::size_t epoch, const LossReport& r) {
    const std::string stage = "epoch " + std::to_string(epoch + 1);
    LogReport(log, stage, r);
    char line[200];
    std::snprintf(line, sizeof line,
                  "epoch %zu/%zu  l_pred %.5f  l_recon %.5f  l_dis1 %.5f  l_dis2 %.5f\n",
                  epoch + 1, model.config.epochs, r.l_pred, r.l_recon, r.l_dis1, r.l_dis2);
    io.out << line << std::flush;
  };
  Train(model, ds, obs);

  StagedOutputs staged;
  staged.Open(o.out) << SaveCheckpoint(model);
  staged.Commit();
  io.out << "wrote " << o.out << '\n';
}

}  // namespace

Action SetupTrain(CLI::App& app, const Io& io) {
  auto o = std::make_shared<TrainOptions>();
  UaiConfig& c = o->config;
  app.add_option("--data", o->data, "Training dataset prefix (<data>.uaie, <data>.tsv)");
  app.add_option("--out", o->out, "Checkpoint path");
  app.add_option("--resume", o->resume,
                 "Continue from this checkpoint; --epochs sets the new total");
  app.add_flag("--print-config", o->print_config, "Print the resolved configuration and exit");
  app.add_option("--alpha", c.alpha, "Weight of the prediction loss")->capture_default_str();
  app.add_option("--beta", c.beta, "Weight of the reconstruction loss")->capture_default_str();
  app.add_option("--gamma", c.gamma, "Weight of the disentanglement term")
      ->capture_default_str();
  app.add_option("--dropout", c.dropout_p, "Drop probability on h1 before the decoder")
      ->capture_default_str();
  app.add_option("--epochs", c.epochs, "Total epochs")->capture_default_str();
  app.add_option("--batch", c.batch_size, "Minibatch size")->capture_default_str();
  app.add_option("--adv-steps", c.adv_steps_per_main,
                 "Disentangler updates before each main update")
      ->capture_default_str();
  app.add_option("--lr-main", c.lr_main, "Adam step size for encoder, decoder, predictor")
      ->capture_default_str();
  app.add_option("--lr-adv", c.lr_adv, "Adam step size for the disentanglers")
      ->capture_default_str();
  app.add_option("--weight-decay", c.weight_decay, "L2 weight decay")->capture_default_str();
  app.add_option("--seed", c.seed, "Run seed")->capture_default_str();
  app.add_option("--h1-dim", c.h1_dim, "Speaker embedding size")->capture_default_str();
  app.add_option("--h2-dim", c.h2_dim, "Nuisance embedding size")->capture_default_str();
  app.add_option("--enc-hidden", c.enc_hidden, "Encoder hidden widths, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--dec-hidden", c.dec_hidden, "Decoder hidden widths")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--pred-hidden", c.pred_hidden, "Predictor hidden widths")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--dis-hidden", c.dis_hidden, "Disentangler hidden widths")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--topology", c.encoder_topology, "Encoder layout: shared or disjoint")
      ->transform(CLI::CheckedTransformer(kTopologies));
  app.add_option("--latent-bound", c.latent_bound, "Latent head bound: sphere, tanh or none")
      ->transform(CLI::CheckedTransformer(kBounds));
  AddCommonOptions(app, o->common);
  return [o, &app, &io] { Execute(*o, app, io); };
}

}  // namespace uai::cli
