#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>
#include <random>

#include "common.hpp"
#include "uai/diarization.hpp"
#include "uai/error.hpp"
#include "uai/rng.hpp"
#include "uai/verification.hpp"

namespace uai::cli {

namespace {

struct GenSynthOptions {
  std::string out;
  data::SynthConfig synth;
  double split = 0.0;
  std::size_t trials = 0;
  double target_fraction = 0.5;
  std::size_t sessions = 0;
  std::size_t session_speakers = 3;
  std::size_t session_segments = 12;
  std::size_t max_segment_seconds = 8;
  CommonOptions common;
};

// Each session draws `speakers` distinct speakers and `segments` abutting
// segments with whole-second durations; every segment is a distinct
// utterance of its speaker. The first `speakers` segments cover every
// speaker once.
std::vector<eval::DiarSession> MakeSessions(const data::EmbeddingDataset& ds,
                                            const GenSynthOptions& o) {
  std::map<Label, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < ds.size(); ++i) by_speaker[ds.speaker_labels[i]].push_back(i);
  std::vector<Label> speakers;
  for (const auto& [spk, items] : by_speaker) speakers.push_back(spk);

  std::vector<eval::DiarSession> sessions;
  for (std::size_t s = 0; s < o.sessions; ++s) {
    Rng rng(DeriveSeed(o.synth.seed, "sessions", s));
    std::vector<Label> pool(speakers);
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(o.session_speakers);

    std::vector<Label> order(pool);
    std::uniform_int_distribution<std::size_t> any(0, pool.size() - 1);
    while (order.size() < o.session_segments) order.push_back(pool[any(rng)]);
    std::shuffle(order.begin() + static_cast<std::ptrdiff_t>(pool.size()), order.end(), rng);

    std::map<Label, std::vector<std::size_t>> unused;
    for (Label spk : pool) {
      unused[spk] = by_speaker[spk];
      std::shuffle(unused[spk].begin(), unused[spk].end(), rng);
    }
    eval::DiarSession session;
    char id[32];
    std::snprintf(id, sizeof id, "sess%03zu", s);
    session.session_id = id;
    std::uniform_int_distribution<std::size_t> seconds(1, o.max_segment_seconds);
    double t = 0.0;
    for (Label spk : order) {
      auto& items = unused[spk];
      if (items.empty()) {
        throw InputError("speaker " + std::to_string(spk) +
                         " has too few utterances for " +
                         std::to_string(o.session_segments) + " segments per session");
      }
      const std::size_t item = items.back();
      items.pop_back();
      const double d = static_cast<double>(seconds(rng));
      session.segments.push_back(
          {t, t + d, "spk" + std::to_string(spk), ds.utterance_ids[item]});
      t += d;
    }
    session.n_speakers = pool.size();
    sessions.push_back(std::move(session));
  }
  return sessions;
}

void Execute(const GenSynthOptions& o, const Io& io) {
  o.synth.Validate();
  if (o.split != 0.0 && !(o.split > 0.0 && o.split < 1.0)) {
    throw ConfigError("split must be 0 (none) or lie in (0, 1)");
  }
  if (o.trials > 0 && o.split == 0.0) {
    throw ConfigError("trials are drawn from the evaluation side: set split");
  }
  if (o.sessions > 0) {
    if (o.session_speakers < 1 || o.session_speakers > o.synth.n_speakers) {
      throw ConfigError("session-speakers must lie in [1, speakers]");
    }
    if (o.session_segments < o.session_speakers) {
      throw ConfigError("session-segments must be at least session-speakers");
    }
    if (o.max_segment_seconds < 1) throw ConfigError("max-segment-seconds must be positive");
  }

  const data::DatasetPaths main_paths = Prefix(o.out);
  const data::DatasetPaths train_paths = Prefix(o.out + ".train");
  const data::DatasetPaths eval_paths = Prefix(o.out + ".eval");
  const fs::path trials_path = o.out + ".trials";
  const fs::path rttm_path = o.out + ".rttm";
  RequireOutputPath(main_paths.embeddings, "output");

  data::SyntheticData synth = data::GenerateSynthetic(o.synth);
  StagedOutputs staged;
  SaveStaged(staged, synth.dataset, main_paths);
  const data::EmbeddingDataset* session_source = &synth.dataset;
  std::pair<data::EmbeddingDataset, data::EmbeddingDataset> halves;
  if (o.split > 0.0) {
    halves = data::SplitStratified(synth.dataset, o.split, o.synth.seed);
    SaveStaged(staged, halves.first, train_paths);
    SaveStaged(staged, halves.second, eval_paths);
    session_source = &halves.second;
  }
  if (o.trials > 0) {
    const eval::TrialList trials = eval::MakeTrials(halves.second, o.trials, o.target_fraction,
                                                    o.synth.seed);
    eval::WriteTrials(staged.Open(trials_path), trials);
  }
  if (o.sessions > 0) {
    std::ofstream& rttm = staged.Open(rttm_path);
    for (const auto& s : MakeSessions(*session_source, o)) eval::WriteRttmReference(rttm, s);
  }
  staged.Commit();

  MetricsLog log = OpenLog(o.common, "gen-synth-" + std::to_string(o.synth.seed));
  log.Record("gen-synth", "items", static_cast<double>(synth.dataset.size()));
  io.out << "wrote " << main_paths.embeddings.string() << " (" << synth.dataset.size()
         << " x " << synth.dataset.dim() << ")\n";
  if (o.split > 0.0) {
    io.out << "wrote " << train_paths.embeddings.string() << " (" << halves.first.size()
           << ") and " << eval_paths.embeddings.string() << " (" << halves.second.size()
           << ")\n";
  }
  if (o.trials > 0) io.out << "wrote " << trials_path.string() << '\n';
  if (o.sessions > 0) io.out << "wrote " << rttm_path.string() << '\n';
}

}  // namespace

Action SetupGenSynth(CLI::App& app, const Io& io) {
  auto o = std::make_shared<GenSynthOptions>();
  data::SynthConfig& s = o->synth;
  app.add_option("--out", o->out, "Output prefix: writes <out>.uaie and <out>.tsv")
      ->required();
  app.add_option("--speakers", s.n_speakers, "Number of speakers")->capture_default_str();
  app.add_option("--per-speaker", s.n_per_speaker, "Utterances per speaker")
      ->capture_default_str();
  app.add_option("--nuisance", s.n_nuisance, "Nuisance classes")->capture_default_str();
  app.add_option("--dim", s.dim, "Embedding dimension")->capture_default_str();
  app.add_option("--speaker-subspace", s.speaker_subspace_dim, "Speaker subspace dimension")
      ->capture_default_str();
  app.add_option("--nuisance-subspace", s.nuisance_subspace_dim,
                 "Nuisance subspace dimension")
      ->capture_default_str();
  app.add_option("--sigma", s.noise_sigma, "Isotropic noise standard deviation")
      ->capture_default_str();
  app.add_option("--seed", s.seed, "Run seed")->capture_default_str();
  app.add_option("--nuisance-name", s.nuisance_name, "Name of the nuisance factor")
      ->capture_default_str();
  app.add_option("--split", o->split,
                 "Training fraction for a stratified split into <out>.train and <out>.eval "
                 "(0: none)")
      ->capture_default_str();
  app.add_option("--trials", o->trials, "Write this many trials over <out>.eval to <out>.trials")
      ->capture_default_str();
  app.add_option("--target-fraction", o->target_fraction, "Target share of the trials")
      ->capture_default_str();
  app.add_option("--sessions", o->sessions, "Write this many diarization sessions to <out>.rttm")
      ->capture_default_str();
  app.add_option("--session-speakers", o->session_speakers, "Speakers per session")
      ->capture_default_str();
  app.add_option("--session-segments", o->session_segments, "Segments per session")
      ->capture_default_str();
  app.add_option("--max-segment-seconds", o->max_segment_seconds,
                 "Segment durations are whole seconds in [1, this]")
      ->capture_default_str();
  AddCommonOptions(app, o->common);
  return [o, &io] { Execute(*o, io); };
}

}  // namespace uai::cli
