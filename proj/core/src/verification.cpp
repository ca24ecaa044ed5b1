#include "uai/verification.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "uai/error.hpp"
#include "uai/metrics.hpp"
#include "uai/rng.hpp"

namespace uai::eval {

TrialList ReadTrials(std::istream& in) {
  TrialList trials;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
      throw IoError("trial line " + std::to_string(line_no) +
                    ": expected enroll<TAB>test<TAB>target|nontarget");
    }
    const std::string kind = line.substr(t2 + 1);
    if (kind != "target" && kind != "nontarget") {
      throw IoError("trial line " + std::to_string(line_no) +
                    ": third field must be target or nontarget, got '" + kind + "'");
    }
    trials.push_back(Trial{line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1),
                           kind == "target"});
  }
  return trials;
}

void WriteTrials(std::ostream& out, const TrialList& trials) {
  for (const Trial& t : trials) {
    out << t.enroll_id << '\t' << t.test_id << '\t'
        << (t.is_target ? "target" : "nontarget") << '\n';
  }
}

void WriteScores(std::ostream& out, const std::vector<TrialScore>& scores) {
  char buf[40];
  for (const TrialScore& s : scores) {
    std::snprintf(buf, sizeof buf, "%.17g", s.score);
    out << s.enroll_id << '\t' << s.test_id << '\t' << buf << '\n';
  }
}

TrialList MakeTrials(const data::EmbeddingDataset& ds, std::size_t n_trials,
                     double target_fraction, std::uint64_t seed) {
  if (!(target_fraction > 0.0 && target_fraction < 1.0)) {
    throw ConfigError("target fraction must lie in (0, 1)");
  }
  std::map<Label, std::vector<std::size_t>> by;
  for (std::size_t i = 0; i < ds.size(); ++i) by[ds.speaker_labels[i]].push_back(i);
  std::vector<Label> speakers;
  std::map<Label, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> halves;
  for (auto& [spk, items] : by) {
    if (items.size() < 2) continue;
    const std::size_t half = items.size() / 2;
    halves[spk] = {std::vector<std::size_t>(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(half)),
                   std::vector<std::size_t>(items.begin() + static_cast<std::ptrdiff_t>(half), items.end())};
    speakers.push_back(spk);
  }
  if (speakers.size() < 2) {
    throw InputError("trial generation needs 2 speakers with 2 or more items each");
  }
  Rng rng(DeriveSeed(seed, "trials"));
  auto pick = [&rng](std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(nn::UniformUnit(rng) * static_cast<double>(n)));
  };
  const auto n_target = static_cast<std::size_t>(
      std::llround(target_fraction * static_cast<double>(n_trials)));
  TrialList trials;
  trials.reserve(n_trials);
  for (std::size_t t = 0; t < n_trials; ++t) {
    const bool target = t < n_target;
    const Label a = speakers[pick(speakers.size())];
    Label b = a;
    if (!target) {
      while (b == a) b = speakers[pick(speakers.size())];
    }
    const auto& enroll = halves[a].first;
    const auto& test = halves[b].second;
    trials.push_back(Trial{ds.utterance_ids[enroll[pick(enroll.size())]],
                           ds.utterance_ids[test[pick(test.size())]], target});
  }
  return trials;
}

std::size_t DefaultLdaDim(EmbeddingSource source) {
  return source == EmbeddingSource::kH1 ? 96 : 150;
}

Matrix LengthNormalize(const Matrix& x) {
  Matrix out = x;
  const double target = std::sqrt(static_cast<double>(x.cols()));
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm > 0.0) out.row(i) *= target / norm;
  }
  return out;
}

VerifyResult VerifyPipeline(const data::EmbeddingDataset& train,
                            const data::EmbeddingDataset& eval,
                            const TrialList& trials, const VerifyOptions& opts) {
  train.Validate();
  eval.Validate();
  if (train.dim() != eval.dim()) {
    throw InputError("train and eval embeddings differ in dimension");
  }
  std::unordered_map<std::string, Eigen::Index> ids;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    ids.emplace(eval.utterance_ids[i], static_cast<Eigen::Index>(i));
  }
  std::set<std::string> missing;
  for (const Trial& t : trials) {
    if (!ids.count(t.enroll_id)) missing.insert(t.enroll_id);
    if (!ids.count(t.test_id)) missing.insert(t.test_id);
  }
  if (!missing.empty()) {
    std::string list;
    std::size_t shown = 0;
    for (const auto& id : missing) {
      if (shown++ == 20) {
        list += ", ...";
        break;
      }
      list += (shown > 1 ? ", " : "") + id;
    }
    throw InputError(std::to_string(missing.size()) +
                     " trial ids not found in the evaluation set: " + list);
  }

  std::set<Label> train_speakers(train.speaker_labels.begin(),
                                 train.speaker_labels.end());
  std::size_t lda_dim = opts.lda_dim ? opts.lda_dim : DefaultLdaDim(opts.source);
  if (opts.clamp_lda_dim) {
    lda_dim = std::min({lda_dim, train.dim(),
                        train_speakers.size() > 1 ? train_speakers.size() - 1 : 1});
  }

  const Matrix x_train = train.AllRows();
  const RowVector center = x_train.colwise().mean();
  const Matrix train_centered = x_train.rowwise() - center;
  const LdaProjection lda =
      LdaFit(train_centered, train.speaker_labels, lda_dim, opts.lda);
  const Matrix train_proj = LengthNormalize(lda.Apply(train_centered));
  PldaFitResult plda = PldaFit(train_proj, train.speaker_labels, opts.plda);
  const PldaScorer scorer(plda.model);

  const Matrix eval_proj =
      LengthNormalize(lda.Apply(eval.AllRows().rowwise() - center));

  VerifyResult result;
  result.lda_dim = lda_dim;
  result.plda_diagnostics = std::move(plda.diagnostics);
  result.scores.reserve(trials.size());
  std::vector<double> tar, non;
  for (const Trial& t : trials) {
    const double s = scorer.Score(eval_proj.row(ids[t.enroll_id]),
                                  eval_proj.row(ids[t.test_id]));
    result.scores.push_back(TrialScore{t.enroll_id, t.test_id, s});
    (t.is_target ? tar : non).push_back(s);
  }
  result.eer = Eer(tar, non);
  return result;
}

}  // namespace uai::eval
