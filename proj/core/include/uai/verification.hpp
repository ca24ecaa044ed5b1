#ifndef UAI_VERIFICATION_HPP_
#define UAI_VERIFICATION_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "uai/dataset.hpp"
#include "uai/lda.hpp"
#include "uai/plda.hpp"

namespace uai::eval {

struct Trial {
  std::string enroll_id;
  std::string test_id;
  bool is_target = false;

  bool operator==(const Trial&) const = default;
};

using TrialList = std::vector<Trial>;

// "enroll_id<TAB>test_id<TAB>target|nontarget" per line.
TrialList ReadTrials(std::istream& in);
void WriteTrials(std::ostream& out, const TrialList& trials);

struct TrialScore {
  std::string enroll_id;
  std::string test_id;
  double score = 0.0;
};

// "enroll_id<TAB>test_id<TAB>score" per line, scores with 17 significant
// digits so they round-trip.
void WriteScores(std::ostream& out, const std::vector<TrialScore>& scores);

// Splits each speaker's items into an enrollment half and a test half and
// samples `n_trials` pairs (enroll from the first half, test from the
// second), a `target_fraction` of them same-speaker.
TrialList MakeTrials(const data::EmbeddingDataset& ds, std::size_t n_trials,
                     double target_fraction, std::uint64_t seed);

enum class EmbeddingSource { kRaw, kH1 };

// 150 for raw embeddings, 96 for h1.
std::size_t DefaultLdaDim(EmbeddingSource source);

struct VerifyOptions {
  // 0 selects DefaultLdaDim(source).
  std::size_t lda_dim = 0;
  EmbeddingSource source = EmbeddingSource::kRaw;
  // Caps lda_dim at min(dim, n_train_speakers - 1) instead of failing.
  bool clamp_lda_dim = true;
  LdaOptions lda;
  PldaOptions plda;
};

struct VerifyResult {
  double eer = 0.0;
  std::vector<TrialScore> scores;
  std::size_t lda_dim = 0;  // dimension actually used
  PldaDiagnostics plda_diagnostics;
};

// Center on the training mean, LDA, length-normalize to sqrt(dim), PLDA fit
// on the training side, score every trial against `eval`, EER.
VerifyResult VerifyPipeline(const data::EmbeddingDataset& train,
                            const data::EmbeddingDataset& eval,
                            const TrialList& trials, const VerifyOptions& opts);

// Rows scaled to norm sqrt(dim).
Matrix LengthNormalize(const Matrix& x);

}  // namespace uai::eval

#endif  // UAI_VERIFICATION_HPP_
