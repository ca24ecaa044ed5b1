#ifndef UAI_DATASET_HPP_
#define UAI_DATASET_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "uai/nn.hpp"
#include "uai/rng.hpp"

namespace uai::data {

using FloatMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A named categorical annotation (noise type, microphone, ...).
struct Factor {
  std::string name;
  std::size_t num_classes = 0;
  std::vector<Label> labels;

  bool operator==(const Factor&) const = default;
};

// N embeddings with speaker labels and optional nuisance annotations.
// Embeddings are stored in single precision, which is also the on-disk
// precision, so file round-trips are exact.
struct EmbeddingDataset {
  FloatMatrix embeddings;
  std::vector<std::string> utterance_ids;
  std::vector<Label> speaker_labels;
  std::size_t num_speakers = 0;
  std::vector<Factor> nuisance;

  std::size_t size() const {
    return static_cast<std::size_t>(embeddings.rows());
  }
  std::size_t dim() const {
    return static_cast<std::size_t>(embeddings.cols());
  }

  // Throws InputError when label arrays disagree with N or exceed their
  // declared class counts.
  void Validate() const;

  const Factor* FindFactor(const std::string& name) const;
  // "speaker" or a nuisance factor name.
  std::vector<Label> LabelsFor(const std::string& factor) const;
  std::size_t ClassCountFor(const std::string& factor) const;

  // Row subset in the given order.
  EmbeddingDataset Subset(const std::vector<std::size_t>& indices) const;
  // Rows converted to double.
  Matrix Rows(const std::vector<std::size_t>& indices) const;
  Matrix AllRows() const;

  bool operator==(const EmbeddingDataset& other) const;
};

// Builds a dataset from double-precision rows, rounding to float. Labels and
// ids are copied from `like`.
EmbeddingDataset WithEmbeddings(const EmbeddingDataset& like,
                                const Matrix& rows);

// ---- "UAIE" container --------------------------------------------------
//
//   offset 0   4 bytes  magic "UAIE"
//   offset 4   u32      version (1)
//   offset 8   u32      N (rows)
//   offset 12  u32      dim
//   offset 16  N*dim    float32, row-major
//
// All integers and floats little-endian. No trailing bytes.
inline constexpr char kEmbeddingMagic[4] = {'U', 'A', 'I', 'E'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;

void WriteEmbeddings(std::ostream& out, const FloatMatrix& embeddings);
FloatMatrix ReadEmbeddings(std::istream& in);

// ---- label sidecar (TSV) -----------------------------------------------
//
// Header: utt_id<TAB>speaker:<num_speakers>[<TAB><factor>:<num_classes>]...
// Rows:   <utt_id><TAB><speaker index>[<TAB><factor index>]...
void WriteLabels(std::ostream& out, const EmbeddingDataset& ds);
// Fills ids, speaker labels and factors of `ds`.
void ReadLabels(std::istream& in, EmbeddingDataset& ds);

struct DatasetPaths {
  std::filesystem::path embeddings;
  std::filesystem::path labels;

  // "<prefix>.uaie" and "<prefix>.tsv".
  static DatasetPaths FromPrefix(const std::filesystem::path& prefix);
};

void SaveDataset(const EmbeddingDataset& ds, const DatasetPaths& paths);
EmbeddingDataset LoadDataset(const DatasetPaths& paths);

// ---- batching ------------------------------------------------------------

struct Batch {
  std::vector<std::size_t> indices;
  Matrix x;
  std::vector<Label> y;
};

// Per-epoch seeded permutation; the partial final batch is dropped.
class BatchIterator {
 public:
  BatchIterator(const EmbeddingDataset& ds, std::size_t batch_size,
                std::uint64_t seed);

  // Resets the cursor onto the permutation for `epoch`.
  void StartEpoch(std::uint64_t epoch);
  // False once the epoch's full batches are exhausted.
  bool Next(Batch& out);
  // Same, yielding only the item indices.
  bool NextIndices(std::vector<std::size_t>& out);

  std::size_t batches_per_epoch() const;
  std::size_t batch_size() const { return batch_size_; }

 private:
  const EmbeddingDataset* ds_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

// Stratified by speaker: each speaker contributes round(fraction * n_s)
// items (clamped to [1, n_s - 1]) to the training side.
std::pair<EmbeddingDataset, EmbeddingDataset> SplitStratified(
    const EmbeddingDataset& ds, double train_fraction, std::uint64_t seed);

// ---- synthetic factor generator -----------------------------------------

struct SynthConfig {
  std::size_t n_speakers = 20;
  std::size_t n_per_speaker = 50;
  std::size_t n_nuisance = 4;
  std::size_t dim = 512;
  std::size_t speaker_subspace_dim = 64;
  std::size_t nuisance_subspace_dim = 32;
  double noise_sigma = 0.5;
  std::uint64_t seed = 0;
  std::string nuisance_name = "nuisance";

  void Validate() const;
};

// Ground truth behind a synthetic dataset.
struct SynthTruth {
  Matrix speaker_basis;     // dim x speaker_subspace_dim, orthonormal columns
  Matrix nuisance_basis;    // dim x nuisance_subspace_dim, orthogonal to above
  Matrix speaker_latents;   // n_speakers x speaker_subspace_dim
  Matrix nuisance_latents;  // n_nuisance x nuisance_subspace_dim

  // A*u_s + B*v_k as a row.
  RowVector Mean(Label speaker, Label nuisance) const;
};

struct SyntheticData {
  EmbeddingDataset dataset;
  SynthTruth truth;
};

// x = A u_s + B v_k + sigma * eps. Item i belongs to speaker
// i / n_per_speaker; nuisance classes are drawn uniformly per item.
SyntheticData GenerateSynthetic(const SynthConfig& cfg);

}  // namespace uai::data

#endif  // UAI_DATASET_HPP_
