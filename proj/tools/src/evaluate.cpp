#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "common.hpp"
#include "uai/diarization.hpp"
#include "uai/error.hpp"
#include "uai/kmeans.hpp"
#include "uai/rng.hpp"
#include "uai/verification.hpp"

namespace uai::cli {

namespace {

// ---- eval-verify ---------------------------------------------------------------

struct VerifyCliOptions {
  std::string train;
  std::string eval;
  std::string trials;
  std::string scores;
  eval::VerifyOptions verify;
  bool no_clamp = false;
  CommonOptions common;
};

void ExecuteVerify(const VerifyCliOptions& o, const Io& io) {
  RequireDataset(o.train, "training data");
  RequireDataset(o.eval, "evaluation data");
  RequireInputFile(o.trials, "trials");
  RequireOutputPath(o.scores, "scores");
  RequireDistinct({o.scores}, {o.trials, Prefix(o.train).embeddings, Prefix(o.train).labels,
                               Prefix(o.eval).embeddings, Prefix(o.eval).labels});

  const data::EmbeddingDataset train = data::LoadDataset(Prefix(o.train));
  const data::EmbeddingDataset held = data::LoadDataset(Prefix(o.eval));
  std::ifstream trials_in(o.trials);
  const eval::TrialList trials = eval::ReadTrials(trials_in);
  eval::VerifyOptions opts = o.verify;
  opts.clamp_lda_dim = !o.no_clamp;
  const eval::VerifyResult r = eval::VerifyPipeline(train, held, trials, opts);

  StagedOutputs staged;
  eval::WriteScores(staged.Open(o.scores), r.scores);
  staged.Commit();

  MetricsLog log = OpenLog(o.common, "eval-verify");
  log.Record("eval-verify", "eer", r.eer);
  log.Record("eval-verify", "lda_dim", static_cast<double>(r.lda_dim));
  char line[96];
  std::snprintf(line, sizeof line, "EER %.4f%% over %zu trials (lda dim %zu)\n", 100.0 * r.eer,
                trials.size(), r.lda_dim);
  io.out << line << "wrote " << o.scores << '\n';
}

// ---- eval-cluster --------------------------------------------------------------

struct ClusterCliOptions {
  std::string data;
  std::vector<std::string> factors;
  std::string report;
  std::uint64_t seed = 0;
  std::size_t max_iters = 300;
  CommonOptions common;
};

struct FactorRequest {
  std::string name;
  std::size_t k = 0;
};

std::vector<FactorRequest> ResolveFactors(const ClusterCliOptions& o,
                                          const data::EmbeddingDataset& ds) {
  std::vector<FactorRequest> out;
  if (o.factors.empty()) {
    out.push_back({"speaker", ds.num_speakers});
    for (const data::Factor& f : ds.nuisance) out.push_back({f.name, f.num_classes});
    return out;
  }
  for (const std::string& spec : o.factors) {
    FactorRequest r;
    const auto colon = spec.rfind(':');
    r.name = spec.substr(0, colon);
    if (colon == std::string::npos) {
      r.k = ds.ClassCountFor(r.name);
    } else {
      try {
        std::size_t pos = 0;
        r.k = std::stoul(spec.substr(colon + 1), &pos);
        if (pos != spec.size() - colon - 1) throw std::invalid_argument(spec);
      } catch (const std::exception&) {
        throw ConfigError("factor '" + spec + "': expected name or name:k");
      }
      ds.ClassCountFor(r.name);  // throws on an unknown factor
    }
    if (r.k == 0 || r.k > ds.size()) {
      throw ConfigError("factor '" + spec + "': k must lie in [1, " +
                        std::to_string(ds.size()) + "]");
    }
    out.push_back(r);
  }
  return out;
}

void ExecuteCluster(const ClusterCliOptions& o, const Io& io) {
  RequireDataset(o.data, "input data");
  RequireOutputPath(o.report, "report");
  RequireDistinct({o.report}, {Prefix(o.data).embeddings, Prefix(o.data).labels});
  const data::EmbeddingDataset ds = data::LoadDataset(Prefix(o.data));
  const std::vector<FactorRequest> factors = ResolveFactors(o, ds);

  const Matrix x = ds.AllRows();
  MetricsLog log = OpenLog(o.common, "eval-cluster");
  std::ostringstream report;
  report << "factor\tk\tnmi\n";
  for (const FactorRequest& f : factors) {
    eval::KMeansOptions km;
    km.seed = DeriveSeed(o.seed, f.name);
    km.max_iters = o.max_iters;
    const auto labels = eval::KMeans(x, f.k, km).assignment.labels;
    const double nmi = eval::Nmi(labels, ds.LabelsFor(f.name));
    report << f.name << '\t' << f.k << '\t' << FormatDouble(nmi) << '\n';
    log.Record("eval-cluster " + f.name, "nmi", nmi);
    char line[128];
    std::snprintf(line, sizeof line, "%-16s k=%-4zu NMI %.4f\n", f.name.c_str(), f.k, nmi);
    io.out << line;
  }
  StagedOutputs staged;
  staged.Open(o.report) << report.str();
  staged.Commit();
  io.out << "wrote " << o.report << '\n';
}

// ---- eval-diar -----------------------------------------------------------------

struct DiarCliOptions {
  std::string sessions;
  std::string data;
  std::string report;
  std::string hyp_rttm;
  std::uint64_t seed = 0;
  CommonOptions common;
};

void ExecuteDiar(const DiarCliOptions& o, const Io& io) {
  RequireInputFile(o.sessions, "sessions");
  RequireDataset(o.data, "embeddings");
  RequireOutputPath(o.report, "report");
  std::vector<fs::path> outputs{o.report};
  if (!o.hyp_rttm.empty()) {
    RequireOutputPath(o.hyp_rttm, "hypothesis RTTM");
    outputs.push_back(o.hyp_rttm);
  }
  RequireDistinct(outputs, {o.sessions, Prefix(o.data).embeddings, Prefix(o.data).labels});

  std::ifstream in(o.sessions);
  const std::vector<eval::DiarSession> sessions = eval::ReadRttm(in);
  if (sessions.empty()) throw InputError(o.sessions + ": no SPEAKER records");
  const data::EmbeddingDataset ds = data::LoadDataset(Prefix(o.data));

  MetricsLog log = OpenLog(o.common, "eval-diar");
  std::ostringstream report, hyp;
  report << "session\tsegments\tspeakers\tder\n";
  double sum = 0.0;
  std::size_t segments = 0;
  for (const eval::DiarSession& s : sessions) {
    const Matrix emb = eval::SegmentEmbeddings(s, ds);
    const auto labels = eval::DiarizeOracle(s, emb, DeriveSeed(o.seed, s.session_id));
    const double der = eval::Der(s, labels);
    sum += der;
    segments += s.segments.size();
    report << s.session_id << '\t' << s.segments.size() << '\t' << s.n_speakers << '\t'
           << FormatDouble(der) << '\n';
    eval::WriteRttm(hyp, s, labels);
    log.Record("eval-diar " + s.session_id, "der", der);
    char line[128];
    std::snprintf(line, sizeof line, "%-16s DER %6.2f%%\n", s.session_id.c_str(), 100.0 * der);
    io.out << line;
  }
  const double average = sum / static_cast<double>(sessions.size());
  report << "average\t" << segments << "\t-\t" << FormatDouble(average) << '\n';
  log.Record("eval-diar", "average_der", average);

  StagedOutputs staged;
  staged.Open(o.report) << report.str();
  if (!o.hyp_rttm.empty()) staged.Open(o.hyp_rttm) << hyp.str();
  staged.Commit();
  char line[96];
  std::snprintf(line, sizeof line, "average DER %.2f%% over %zu sessions\n", 100.0 * average,
                sessions.size());
  io.out << line << "wrote " << o.report << '\n';
}

}  // namespace

Action SetupEvalVerify(CLI::App& app, const Io& io) {
  auto o = std::make_shared<VerifyCliOptions>();
  const std::map<std::string, eval::EmbeddingSource> sources{
      {"raw", eval::EmbeddingSource::kRaw}, {"h1", eval::EmbeddingSource::kH1}};
  app.add_option("--train", o->train, "Dataset prefix for fitting LDA and PLDA")->required();
  app.add_option("--eval", o->eval, "Dataset prefix holding the trial utterances")->required();
  app.add_option("--trials", o->trials, "Trial list (enroll, test, target|nontarget)")
      ->required();
  app.add_option("--scores", o->scores, "Output per-trial scores")->required();
  app.add_option("--source", o->verify.source, "Embedding kind, sets the default LDA size")
      ->transform(CLI::CheckedTransformer(sources));
  app.add_option("--lda-dim", o->verify.lda_dim, "LDA output size (0: 150 raw, 96 h1)")
      ->capture_default_str();
  app.add_flag("--no-clamp-lda", o->no_clamp,
               "Fail instead of capping the LDA size at speakers - 1");
  app.add_option("--lda-ridge", o->verify.lda.within_ridge,
                 "Ridge on the within-class scatter, relative to its mean eigenvalue")
      ->capture_default_str();
  app.add_option("--plda-iters", o->verify.plda.em_iters, "PLDA EM iterations")
      ->capture_default_str();
  AddCommonOptions(app, o->common);
  return [o, &io] { ExecuteVerify(*o, io); };
}

Action SetupEvalCluster(CLI::App& app, const Io& io) {
  auto o = std::make_shared<ClusterCliOptions>();
  app.add_option("--data", o->data, "Dataset prefix (embeddings and labels)")->required();
  app.add_option("--factor", o->factors,
                 "Factor to score, as name or name:k (repeatable; default: all, k = classes)");
  app.add_option("--report", o->report, "Output TSV: factor, k, nmi")->required();
  app.add_option("--seed", o->seed, "k-means seed")->capture_default_str();
  app.add_option("--max-iters", o->max_iters, "Lloyd iteration cap")->capture_default_str();
  AddCommonOptions(app, o->common);
  return [o, &io] { ExecuteCluster(*o, io); };
}

Action SetupEvalDiar(CLI::App& app, const Io& io) {
  auto o = std::make_shared<DiarCliOptions>();
  app.add_option("--sessions", o->sessions, "Reference RTTM with oracle segments")->required();
  app.add_option("--data", o->data, "Dataset prefix holding the segment embeddings")
      ->required();
  app.add_option("--report", o->report, "Output TSV: per-session DER and the average")
      ->required();
  app.add_option("--hyp-rttm", o->hyp_rttm, "Also write the hypothesis as RTTM");
  app.add_option("--seed", o->seed, "k-means seed")->capture_default_str();
  AddCommonOptions(app, o->common);
  return [o, &io] { ExecuteDiar(*o, io); };
}

}  // namespace uai::cli
