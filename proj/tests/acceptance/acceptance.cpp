// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "test_util.hpp"
#include "uai/checkpoint.hpp"
#include "uai/dataset.hpp"
#include "uai/diarization.hpp"
#include "uai/kmeans.hpp"
#include "uai/metrics.hpp"
#include "uai/plda.hpp"
#include "uai/trainer.hpp"
#include "uai/verification.hpp"

namespace {

using namespace uai;
using testing::CompareGradients;
using testing::JitterParameters;
using testing::NumericGradients;
using testing::RandomMatrix;

struct Outcome {
  bool pass = true;
  std::string detail;

  void Require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

std::string Fmt(const char* format, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c, d);
  return buf;
}

// ---- 1: gradients ------------------------------------------------------------

Outcome GradientExactness() {
  Outcome out;
  const auto start = std::chrono::steady_clock::now();
  constexpr int kNets = 24;
  double worst = 0.0;
  std::size_t checked = 0;
  for (int trial = 0; trial < kNets; ++trial) {
    Rng rng(DeriveSeed(2718, "acceptance-grad", static_cast<std::uint64_t>(trial)));
    std::uniform_int_distribution<std::size_t> width(2, 8);
    std::uniform_int_distribution<std::size_t> depth(1, 3);
    std::vector<std::size_t> dims{width(rng)};
    const std::size_t layers = depth(rng);
    for (std::size_t i = 0; i < layers; ++i) dims.push_back(width(rng));
    const auto hidden = trial % 2 ? nn::Activation::kRelu : nn::Activation::kTanh;
    nn::Mlp net = nn::Mlp::Create(dims, hidden, nn::Activation::kLinear, rng);
    JitterParameters(net.Parameters(), rng);

    const Eigen::Index batch = 6;
    const Matrix x = RandomMatrix(batch, static_cast<Eigen::Index>(dims.front()), rng);
    const Matrix target = RandomMatrix(batch, static_cast<Eigen::Index>(dims.back()), rng);
    std::vector<Label> labels;
    std::uniform_int_distribution<Label> cls(0, static_cast<Label>(dims.back()) - 1);
    for (Eigen::Index i = 0; i < batch; ++i) labels.push_back(cls(rng));

    for (bool classify : {true, false}) {
      auto head = [&](const Matrix& o) {
        return classify ? nn::CrossEntropy(o, labels) : nn::MeanSquaredError(o, target);
      };
      const nn::ForwardCache cache = nn::Forward(net, x);
      const nn::BackwardResult analytic =
          nn::Backward(net, cache, head(cache.output()).gradient);
      const auto numeric = NumericGradients(
          net.Parameters(), [&] { return head(nn::Predict(net, x)).loss; });
      const auto check = CompareGradients(analytic.gradients.Views(), numeric);
      worst = std::max(worst, check.max_relative_error);
      checked += check.checked;
    }
  }
  const double elapsed = Seconds(start);
  out.Require(worst < 1e-4, Fmt("max relative error %.3g", worst));
  out.Require(elapsed < 10.0, Fmt("took %.2f s", elapsed));
  out.detail = Fmt("%.0f nets x 2 heads, %.0f partials, max rel err %.2e, %.2f s", kNets,
                   static_cast<double>(checked), worst, elapsed) +
               (out.pass ? "" : " | " + out.detail);
  return out;
}

// ---- 2: loss identities and schedule ----------------------------------------

UaiConfig TinyConfig() {
  UaiConfig c;
  c.input_dim = 16;
  c.h1_dim = 6;
  c.h2_dim = 4;
  c.num_speakers = 4;
  c.enc_hidden = {12};
  c.dec_hidden = {12};
  c.pred_hidden = {8};
  c.dis_hidden = {6};
  c.batch_size = 8;
  c.epochs = 5;
  c.seed = 5;
  return c;
}

data::EmbeddingDataset TinyData(std::uint64_t seed) {
  data::SynthConfig s;
  s.n_speakers = 4;
  s.n_per_speaker = 10;
  s.n_nuisance = 2;
  s.dim = 16;
  s.speaker_subspace_dim = 4;
  s.nuisance_subspace_dim = 3;
  s.seed = seed;
  return data::GenerateSynthetic(s).dataset;
}

Outcome LossIdentities() {
  Outcome out;
  const UaiConfig c = TinyConfig();
  UaiModel m = UaiModel::Create(c);
  const auto ds = TinyData(1);
  std::size_t identity_violations = 0;
  std::size_t hash_violations = 0;
  std::size_t schedule_violations = 0;
  std::size_t events = 0;
  std::uint64_t main_hash = m.MainHash();
  std::uint64_t adv_hash = m.AdversarialHash();
  std::size_t run = 0;  // adversarial updates since the last main update
  TrainObserver obs;
  obs.on_update = [&](const UpdateEvent& e, const UaiModel& model) {
    ++events;
    const LossReport& r = e.report;
    if (r.l_adv != r.l_dis1 + r.l_dis2) ++identity_violations;
    if (r.l_main != c.alpha * r.l_pred + c.beta * r.l_recon) ++identity_violations;
    if (e.kind == UpdateKind::kAdversarial) {
      if (model.MainHash() != main_hash) ++hash_violations;
      if (model.AdversarialHash() == adv_hash) ++hash_violations;
      if (e.adv_step != run) ++schedule_violations;
      ++run;
    } else {
      if (model.AdversarialHash() != adv_hash) ++hash_violations;
      if (model.MainHash() == main_hash) ++hash_violations;
      if (run != c.adv_steps_per_main) ++schedule_violations;
      run = 0;
    }
    main_hash = model.MainHash();
    adv_hash = model.AdversarialHash();
  };
  Train(m, ds, obs);
  const std::size_t main_steps = c.epochs * (ds.size() / c.batch_size);
  out.Require(identity_violations == 0, Fmt("%.0f identity violations", identity_violations));
  out.Require(hash_violations == 0, Fmt("%.0f hash violations", hash_violations));
  out.Require(schedule_violations == 0 && run == 0 &&
                  events == main_steps * (c.adv_steps_per_main + 1),
              Fmt("schedule: %.0f events for %.0f main steps", events, main_steps));
  out.detail = Fmt("%.0f updates (%.0f main), ratio %.0f:1", events, main_steps,
                   c.adv_steps_per_main) +
               (out.pass ? "" : " | " + out.detail);
  return out;
}

// ---- 3 and 4: synthetic end-to-end --------------------------------------------

struct SyntheticRun {
  data::EmbeddingDataset train;
  data::EmbeddingDataset held;
  UaiModel model;
  double seconds = 0.0;
};

SyntheticRun TrainSynthetic(std::uint64_t seed) {
  data::SynthConfig sc;  // 20 x 50, 4 nuisance classes, dim 512, sigma 0.5
  sc.seed = seed;
  auto data = data::GenerateSynthetic(sc);
  auto [train, held] = data::SplitStratified(data.dataset, 0.8, 7);
  UaiConfig c;
  c.input_dim = sc.dim;
  c.num_speakers = sc.n_speakers;
  c.epochs = 100;
  c.seed = seed;
  SyntheticRun run{std::move(train), std::move(held), UaiModel::Create(c), 0.0};
  const auto start = std::chrono::steady_clock::now();
  Train(run.model, run.train);
  run.seconds = Seconds(start);
  return run;
}

double ClusterNmi(const Matrix& x, std::size_t k, const std::vector<Label>& truth) {
  eval::KMeansOptions opts;
  opts.seed = 3;
  return eval::Nmi(eval::KMeans(x, k, opts).assignment.labels, truth);
}

Outcome Disentanglement(const SyntheticRun& run) {
  Outcome out;
  const EmbeddingPairs h = Encode(run.model, run.held.AllRows());
  const auto& spk = run.held.speaker_labels;
  const auto nui = run.held.LabelsFor("nuisance");
  const double h1_spk = ClusterNmi(h.h1, 20, spk);
  const double h1_nui = ClusterNmi(h.h1, 4, nui);
  const double h2_nui = ClusterNmi(h.h2, 4, nui);
  const double h2_spk = ClusterNmi(h.h2, 20, spk);
  out.Require(h1_spk >= 0.80, "NMI(h1, speaker) < 0.80");
  out.Require(h1_nui <= 0.15, "NMI(h1, nuisance) > 0.15");
  out.Require(h2_nui >= h1_nui + 0.10, "NMI(h2, nuisance) < NMI(h1, nuisance) + 0.10");
  out.Require(h1_spk >= h2_spk, "NMI(h1, speaker) < NMI(h2, speaker)");
  out.Require(run.seconds < 600.0, Fmt("training took %.0f s", run.seconds));
  out.detail = Fmt("h1/spk %.3f, h1/nui %.3f, h2/nui %.3f, h2/spk ", h1_spk, h1_nui, h2_nui) +
               Fmt("%.3f, train %.0f s", h2_spk, run.seconds) +
               (out.pass ? "" : " | " + out.detail);
  return out;
}

struct VerifySeed {
  double raw = 0.0;
  double h1 = 0.0;
  bool pass = false;
};

VerifySeed VerifyOneSeed(const SyntheticRun& run, std::uint64_t seed) {
  const eval::TrialList trials = eval::MakeTrials(run.held, 2000, 0.5, seed);
  VerifySeed v;
  eval::VerifyOptions raw_opts;
  raw_opts.source = eval::EmbeddingSource::kRaw;
  v.raw = eval::VerifyPipeline(run.train, run.held, trials, raw_opts).eer;

  const data::EmbeddingDataset train_h1 =
      data::WithEmbeddings(run.train, Encode(run.model, run.train.AllRows()).h1);
  const data::EmbeddingDataset held_h1 =
      data::WithEmbeddings(run.held, Encode(run.model, run.held.AllRows()).h1);
  eval::VerifyOptions h1_opts;
  h1_opts.source = eval::EmbeddingSource::kH1;
  v.h1 = eval::VerifyPipeline(train_h1, held_h1, trials, h1_opts).eer;
  v.pass = v.h1 <= v.raw + 0.01 && v.h1 < 0.10 && v.raw < 0.10;
  return v;
}

// ---- 5: metric oracles ----------------------------------------------------------

eval::DiarSession Session(const std::vector<double>& durations,
                          const std::vector<int>& speakers) {
  eval::DiarSession s;
  s.session_id = "s";
  double t = 0.0;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    s.segments.push_back({t, t + durations[i], "spk" + std::to_string(speakers[i]),
                          "u" + std::to_string(i)});
    t += durations[i];
  }
  std::vector<int> distinct(speakers);
  std::sort(distinct.begin(), distinct.end());
  s.n_speakers = static_cast<std::size_t>(
      std::unique(distinct.begin(), distinct.end()) - distinct.begin());
  return s;
}

Outcome MetricOracles() {
  Outcome out;
  Rng rng(1234);
  std::normal_distribution<double> normal;

  double eer_err = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    std::uniform_int_distribution<int> size(1, 60);
    std::uniform_int_distribution<int> grid(0, 8);
    std::vector<double> tar(static_cast<std::size_t>(size(rng)));
    std::vector<double> non(static_cast<std::size_t>(size(rng)));
    const bool tied = rep % 4 == 0;
    for (double& s : tar) s = tied ? grid(rng) + 1.0 : normal(rng) + 1.0;
    for (double& s : non) s = tied ? grid(rng) : normal(rng);
    eer_err = std::max(eer_err, std::abs(eval::Eer(tar, non) - testing::EerOracle(tar, non)));
  }
  out.Require(eer_err <= 1e-9, Fmt("EER off by %.3g", eer_err));

  std::size_t nmi_mismatch = 0;
  for (int rep = 0; rep < 500; ++rep) {
    std::uniform_int_distribution<Label> ka(0, 1 + rep % 9);
    std::uniform_int_distribution<Label> kb(0, 1 + rep % 6);
    std::vector<Label> a(100), b(100);
    for (auto& x : a) x = ka(rng);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = rep % 2 ? kb(rng) : a[i] / 2;
    if (eval::Nmi(a, b) != testing::NmiOracle(a, b)) ++nmi_mismatch;
  }
  out.Require(nmi_mismatch == 0, Fmt("%.0f NMI mismatches", nmi_mismatch));

  const eval::DiarSession hand = Session({10, 10, 10}, {0, 0, 1});
  const double hand_der = eval::Der(hand, {0, 1, 1});
  out.Require(hand_der == 10.0 / 30.0, Fmt("hand DER %.17g", hand_der));
  std::size_t der_mismatch = 0;
  std::uniform_int_distribution<int> duration(1, 20);
  for (int rep = 0; rep < 500; ++rep) {
    const int k_ref = 1 + rep % 6;
    const int k_hyp = 1 + (rep / 6) % 6;
    const int n = std::max(k_ref, k_hyp) + rep % 7;
    std::uniform_int_distribution<int> ref(0, k_ref - 1);
    std::uniform_int_distribution<Label> hyp(0, k_hyp - 1);
    std::vector<double> d;
    std::vector<int> r;
    std::vector<Label> h;
    for (int i = 0; i < n; ++i) {
      d.push_back(duration(rng));
      r.push_back(ref(rng));
      h.push_back(hyp(rng));
    }
    const eval::DiarSession s = Session(d, r);
    if (eval::Der(s, h) != testing::DerOracle(s, h)) ++der_mismatch;
  }
  out.Require(der_mismatch == 0, Fmt("%.0f DER mismatches", der_mismatch));
  out.detail = Fmt("EER max err %.2e over 1000 sets, NMI %.0f/500 exact, DER %.0f/500 exact, "
                   "hand DER %.6f",
                   eer_err, 500.0 - static_cast<double>(nmi_mismatch),
                   500.0 - static_cast<double>(der_mismatch), hand_der) +
               (out.pass ? "" : " | " + out.detail);
  return out;
}

// ---- 6: PLDA ----------------------------------------------------------------

Outcome PldaRecovery() {
  Outcome out;
  Eigen::Matrix2d b_true, w_true;
  b_true << 2.0, 0.6, 0.6, 1.0;
  w_true << 0.8, -0.2, -0.2, 0.5;
  const Eigen::Matrix2d lb = b_true.llt().matrixL();
  const Eigen::Matrix2d lw = w_true.llt().matrixL();
  Rng rng(77);
  std::normal_distribution<double> normal;
  const std::size_t speakers = 500, sessions = 8;
  Matrix x(static_cast<Eigen::Index>(speakers * sessions), 2);
  std::vector<Label> labels;
  for (std::size_t s = 0; s < speakers; ++s) {
    const Eigen::Vector2d y = lb * Eigen::Vector2d(normal(rng), normal(rng));
    for (std::size_t j = 0; j < sessions; ++j) {
      const Eigen::Vector2d e = lw * Eigen::Vector2d(normal(rng), normal(rng));
      x.row(static_cast<Eigen::Index>(labels.size())) = (y + e).transpose();
      labels.push_back(static_cast<Label>(s));
    }
  }
  eval::PldaOptions opts;
  opts.em_iters = 100;
  const eval::PldaFitResult fit = eval::PldaFit(x, labels, opts);
  const double b_err = (fit.model.between - b_true).norm() / b_true.norm();
  const double w_err = (fit.model.within - w_true).norm() / w_true.norm();
  out.Require(b_err <= 0.15, Fmt("B error %.3f", b_err));
  out.Require(w_err <= 0.15, Fmt("W error %.3f", w_err));
  const auto& ll = fit.diagnostics.log_likelihood;
  double worst_drop = 0.0;
  for (std::size_t i = 1; i < ll.size(); ++i) worst_drop = std::max(worst_drop, ll[i - 1] - ll[i]);
  out.Require(worst_drop <= 1e-8, Fmt("log-likelihood dropped by %.3g", worst_drop));

  eval::PldaModel unit;
  unit.mean = RowVector::Zero(1);
  unit.between = Eigen::MatrixXd::Ones(1, 1);
  unit.within = Eigen::MatrixXd::Ones(1, 1);
  const double llr = eval::PldaScore(unit, RowVector::Zero(1), RowVector::Zero(1));
  const double llr_err = std::abs(llr - 0.5 * std::log(4.0 / 3.0));
  out.Require(llr_err <= 1e-9, Fmt("1-D LLR off by %.3g", llr_err));
  out.detail = Fmt("B rel err %.3f, W rel err %.3f, max LL drop %.2e, ", b_err, w_err,
                   worst_drop) +
               Fmt("LLR err %.2e", llr_err) + (out.pass ? "" : " | " + out.detail);
  return out;
}

// ---- 7: determinism and round-trips --------------------------------------------

std::string UaieBytes(const data::FloatMatrix& m) {
  std::ostringstream out;
  data::WriteEmbeddings(out, m);
  return out.str();
}

std::string ScoreText(const data::EmbeddingDataset& ds) {
  const auto [train, eval_side] = data::SplitStratified(ds, 0.5, 9);
  const auto trials = eval::MakeTrials(eval_side, 300, 0.5, 9);
  const auto r = eval::VerifyPipeline(train, eval_side, trials, {});
  std::ostringstream out;
  eval::WriteScores(out, r.scores);
  return out.str();
}

Outcome Determinism() {
  Outcome out;
  const auto ds_a = TinyData(4);
  const auto ds_b = TinyData(4);
  out.Require(UaieBytes(ds_a.embeddings) == UaieBytes(ds_b.embeddings) && ds_a == ds_b,
              "datasets differ");

  UaiModel a = UaiModel::Create(TinyConfig());
  UaiModel b = UaiModel::Create(TinyConfig());
  Train(a, ds_a);
  Train(b, ds_b);
  const std::string ckpt = SaveCheckpoint(a);
  out.Require(ckpt == SaveCheckpoint(b), "checkpoints differ");
  out.Require(SaveCheckpoint(LoadCheckpoint(ckpt)) == ckpt, "checkpoint round-trip not exact");

  out.Require(ScoreText(ds_a) == ScoreText(ds_b), "scores differ");

  const std::string bytes = UaieBytes(ds_a.embeddings);
  std::istringstream in(bytes);
  const data::FloatMatrix back = data::ReadEmbeddings(in);
  out.Require(back == ds_a.embeddings && UaieBytes(back) == bytes,
              "UAIE round-trip not exact");
  out.detail = Fmt("checkpoint %.0f bytes, UAIE %.0f bytes", static_cast<double>(ckpt.size()),
                   static_cast<double>(bytes.size())) +
               (out.pass ? "" : " | " + out.detail);
  return out;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&failures](int id, const char* name, const Outcome& o) {
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, name,
                o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  };
  auto guarded = [](const std::function<Outcome()>& fn) {
    try {
      return fn();
    } catch (const std::exception& e) {
      Outcome o;
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
      return o;
    }
  };

  report(1, "gradient exactness", guarded(GradientExactness));
  report(2, "loss identities and schedule", guarded(LossIdentities));

  std::vector<VerifySeed> seeds;
  Outcome disentangle;
  Outcome verify;
  try {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const SyntheticRun run = TrainSynthetic(seed);
      if (seed == 1) disentangle = guarded([&] { return Disentanglement(run); });
      seeds.push_back(VerifyOneSeed(run, seed));
    }
    int passing = 0;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      passing += seeds[i].pass;
      verify.detail += (i ? "; " : "") + Fmt("seed %.0f raw %.4f h1 %.4f",
                                             static_cast<double>(i + 1), seeds[i].raw,
                                             seeds[i].h1);
    }
    verify.pass = passing >= 4;
    verify.detail = Fmt("%.0f/5 seeds pass: ", passing) + verify.detail;
  } catch (const std::exception& e) {
    if (seeds.empty()) {
      disentangle.pass = false;
      disentangle.detail = std::string("exception: ") + e.what();
    }
    verify.pass = false;
    verify.detail = std::string("exception: ") + e.what();
  }
  report(3, "disentanglement", disentangle);
  report(4, "verification", verify);

  report(5, "metric oracles", guarded(MetricOracles));
  report(6, "PLDA recovery", guarded(PldaRecovery));
  report(7, "determinism and round-trips", guarded(Determinism));

  std::printf("%d of 7 criteria passed\n", 7 - failures);
  return failures == 0 ? 0 : 1;
}
