#ifndef UAI_DIARIZATION_HPP_
#define UAI_DIARIZATION_HPP_

// Clustering-only diarization with oracle speaker-homogeneous segments, and
// DER under the optimal one-to-one speaker mapping.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "uai/dataset.hpp"
#include "uai/metrics.hpp"
#include "uai/nn.hpp"

namespace uai::eval {

struct Segment {
  double start = 0.0;  // seconds
  double end = 0.0;
  std::string speaker;       // reference speaker
  std::string embedding_id;  // utterance id of this segment's embedding
};

struct DiarSession {
  std::string session_id;
  std::vector<Segment> segments;
  std::size_t n_speakers = 0;  // distinct reference speakers

  // end > start for every segment and no two segments overlap.
  void Validate() const;
  double TotalDuration() const;
};

// k-means (k = n_speakers) over the per-segment embedding rows.
std::vector<Label> DiarizeOracle(const DiarSession& session,
                                 const Matrix& segment_embeddings,
                                 std::uint64_t seed);

// Wrong-speaker time over total time. With oracle boundaries there is no
// missed or false-alarm speech.
double Der(const DiarSession& session, const std::vector<Label>& hypothesis);

// ---- RTTM ----------------------------------------------------------------
//
// SPEAKER <session> <channel> <start> <duration> <ortho> <stype> <name> ...
// The ortho field (6th) carries the segment's embedding id; "<NA>" falls
// back to "<session>-<index>", index counting the session's segments in
// file order from 0. Non-SPEAKER records are ignored. Six-field lines
// (type session channel start duration speaker) are also accepted.
std::vector<DiarSession> ReadRttm(std::istream& in);
// Hypothesis in the same shape; speaker names are "spk<label>".
void WriteRttm(std::ostream& out, const DiarSession& session,
               const std::vector<Label>& hypothesis);
void WriteRttmReference(std::ostream& out, const DiarSession& session);

// Looks up each segment's embedding row by id in `ds`.
Matrix SegmentEmbeddings(const DiarSession& session,
                         const data::EmbeddingDataset& ds);

}  // namespace uai::eval

#endif  // UAI_DIARIZATION_HPP_
