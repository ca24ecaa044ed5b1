#include "uai/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "binary_io.hpp"
#include "uai/error.hpp"

namespace uai::data {
namespace {

void CheckLabels(const std::vector<Label>& labels, std::size_t n,
                 std::size_t num_classes, const std::string& name) {
  if (labels.size() != n) {
    throw InputError("factor '" + name + "' has " +
                     std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " items");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw InputError("factor '" + name + "': label " +
                       std::to_string(labels[i]) + " at item " +
                       std::to_string(i) + " is outside [0, " +
                       std::to_string(num_classes) + ")");
    }
  }
}

std::vector<std::string> SplitTabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::size_t ParseCount(const std::string& s, const std::string& context) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size() || s.front() == '-') {
    throw IoError(context + ": expected a non-negative integer, got '" + s +
                  "'");
  }
  return static_cast<std::size_t>(v);
}

std::pair<std::string, std::size_t> ParseHeaderColumn(const std::string& col) {
  const auto colon = col.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    throw IoError("label header column '" + col +
                  "' must have the form name:num_classes");
  }
  return {col.substr(0, colon),
          ParseCount(col.substr(colon + 1), "label header column '" + col + "'")};
}

}  // namespace

void EmbeddingDataset::Validate() const {
  const std::size_t n = size();
  if (utterance_ids.size() != n) {
    throw InputError("dataset has " + std::to_string(utterance_ids.size()) +
                     " utterance ids for " + std::to_string(n) + " items");
  }
  CheckLabels(speaker_labels, n, num_speakers, "speaker");
  for (const Factor& f : nuisance) {
    if (f.name == "speaker" || f.name == "utt_id") {
      throw InputError("factor name '" + f.name + "' is reserved");
    }
    CheckLabels(f.labels, n, f.num_classes, f.name);
  }
}

const Factor* EmbeddingDataset::FindFactor(const std::string& name) const {
  for (const Factor& f : nuisance) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::vector<Label> EmbeddingDataset::LabelsFor(const std::string& factor) const {
  if (factor == "speaker") return speaker_labels;
  if (const Factor* f = FindFactor(factor)) return f->labels;
  throw InputError("dataset has no factor named '" + factor + "'");
}

std::size_t EmbeddingDataset::ClassCountFor(const std::string& factor) const {
  if (factor == "speaker") return num_speakers;
  if (const Factor* f = FindFactor(factor)) return f->num_classes;
  throw InputError("dataset has no factor named '" + factor + "'");
}

EmbeddingDataset EmbeddingDataset::Subset(
    const std::vector<std::size_t>& indices) const {
  EmbeddingDataset out;
  out.num_speakers = num_speakers;
  out.embeddings.resize(static_cast<Eigen::Index>(indices.size()),
                        embeddings.cols());
  out.utterance_ids.reserve(indices.size());
  out.speaker_labels.reserve(indices.size());
  for (const Factor& f : nuisance) {
    out.nuisance.push_back(Factor{f.name, f.num_classes, {}});
  }
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t i = indices[r];
    if (i >= size()) throw InputError("subset index out of range");
    out.embeddings.row(static_cast<Eigen::Index>(r)) =
        embeddings.row(static_cast<Eigen::Index>(i));
    out.utterance_ids.push_back(utterance_ids[i]);
    out.speaker_labels.push_back(speaker_labels[i]);
    for (std::size_t f = 0; f < nuisance.size(); ++f) {
      out.nuisance[f].labels.push_back(nuisance[f].labels[i]);
    }
  }
  return out;
}

Matrix EmbeddingDataset::Rows(const std::vector<std::size_t>& indices) const {
  Matrix m(static_cast<Eigen::Index>(indices.size()), embeddings.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    m.row(static_cast<Eigen::Index>(r)) =
        embeddings.row(static_cast<Eigen::Index>(indices[r])).cast<double>();
  }
  return m;
}

Matrix EmbeddingDataset::AllRows() const { return embeddings.cast<double>(); }

bool EmbeddingDataset::operator==(const EmbeddingDataset& other) const {
  if (embeddings.rows() != other.embeddings.rows() ||
      embeddings.cols() != other.embeddings.cols()) {
    return false;
  }
  // Bitwise, so NaN payloads and signed zeros count.
  if (embeddings.size() > 0 &&
      std::memcmp(embeddings.data(), other.embeddings.data(),
                  sizeof(float) * static_cast<std::size_t>(embeddings.size())) !=
          0) {
    return false;
  }
  return utterance_ids == other.utterance_ids &&
         speaker_labels == other.speaker_labels &&
         num_speakers == other.num_speakers && nuisance == other.nuisance;
}

EmbeddingDataset WithEmbeddings(const EmbeddingDataset& like,
                                const Matrix& rows) {
  if (static_cast<std::size_t>(rows.rows()) != like.size()) {
    throw InputError("embedding rows do not match dataset size");
  }
  EmbeddingDataset out;
  out.embeddings = rows.cast<float>();
  out.utterance_ids = like.utterance_ids;
  out.speaker_labels = like.speaker_labels;
  out.num_speakers = like.num_speakers;
  out.nuisance = like.nuisance;
  return out;
}

void WriteEmbeddings(std::ostream& out, const FloatMatrix& embeddings) {
  if (embeddings.rows() > std::numeric_limits<std::uint32_t>::max() ||
      embeddings.cols() > std::numeric_limits<std::uint32_t>::max()) {
    throw IoError("embedding matrix too large for the UAIE container");
  }
  detail::ByteWriter w;
  w.PutRaw(std::string_view(kEmbeddingMagic, 4));
  w.Put<std::uint32_t>(kEmbeddingVersion);
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(embeddings.rows()));
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(embeddings.cols()));
  const float* d = embeddings.data();
  for (Eigen::Index i = 0; i < embeddings.size(); ++i) w.Put<float>(d[i]);
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw IoError("failed writing UAIE stream");
}

FloatMatrix ReadEmbeddings(std::istream& in) {
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  detail::ByteReader r(bytes, "UAIE");
  if (r.remaining() < 4 ||
      r.GetRaw(4) != std::string_view(kEmbeddingMagic, 4)) {
    throw IoError("UAIE: bad magic, expected \"UAIE\"");
  }
  const auto version = r.Get<std::uint32_t>();
  if (version != kEmbeddingVersion) {
    throw IoError("UAIE: unsupported version " + std::to_string(version));
  }
  const std::uint64_t n = r.Get<std::uint32_t>();
  const std::uint64_t dim = r.Get<std::uint32_t>();
  const std::uint64_t payload = n * dim * sizeof(float);
  if (payload != r.remaining()) {
    throw IoError("UAIE: header declares " + std::to_string(n) + " x " +
                  std::to_string(dim) + " floats (" + std::to_string(payload) +
                  " bytes) but " + std::to_string(r.remaining()) +
                  " bytes follow");
  }
  FloatMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  float* d = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) d[i] = r.Get<float>();
  r.ExpectEnd();
  return m;
}

void WriteLabels(std::ostream& out, const EmbeddingDataset& ds) {
  ds.Validate();
  out << "utt_id\tspeaker:" << ds.num_speakers;
  for (const Factor& f : ds.nuisance) out << '\t' << f.name << ':' << f.num_classes;
  out << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.utterance_ids[i] << '\t' << ds.speaker_labels[i];
    for (const Factor& f : ds.nuisance) out << '\t' << f.labels[i];
    out << '\n';
  }
  if (!out) throw IoError("failed writing label TSV");
}

void ReadLabels(std::istream& in, EmbeddingDataset& ds) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("label TSV: missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = SplitTabs(line);
  if (header.size() < 2 || header[0] != "utt_id") {
    throw IoError("label TSV: header must start with utt_id<TAB>speaker:<n>");
  }
  auto [spk_name, spk_count] = ParseHeaderColumn(header[1]);
  if (spk_name != "speaker") {
    throw IoError("label TSV: second column must be speaker:<n>");
  }
  ds.num_speakers = spk_count;
  ds.utterance_ids.clear();
  ds.speaker_labels.clear();
  ds.nuisance.clear();
  for (std::size_t c = 2; c < header.size(); ++c) {
    auto [name, count] = ParseHeaderColumn(header[c]);
    ds.nuisance.push_back(Factor{name, count, {}});
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = SplitTabs(line);
    if (fields.size() != header.size()) {
      throw IoError("label TSV line " + std::to_string(line_no) + ": " +
                    std::to_string(fields.size()) + " fields, header has " +
                    std::to_string(header.size()));
    }
    const std::string ctx = "label TSV line " + std::to_string(line_no);
    ds.utterance_ids.push_back(fields[0]);
    ds.speaker_labels.push_back(static_cast<Label>(ParseCount(fields[1], ctx)));
    for (std::size_t c = 2; c < fields.size(); ++c) {
      ds.nuisance[c - 2].labels.push_back(
          static_cast<Label>(ParseCount(fields[c], ctx)));
    }
  }
}

DatasetPaths DatasetPaths::FromPrefix(const std::filesystem::path& prefix) {
  return {std::filesystem::path(prefix.string() + ".uaie"),
          std::filesystem::path(prefix.string() + ".tsv")};
}

void SaveDataset(const EmbeddingDataset& ds, const DatasetPaths& paths) {
  ds.Validate();
  {
    std::ofstream out(paths.embeddings, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + paths.embeddings.string());
    WriteEmbeddings(out, ds.embeddings);
  }
  std::ofstream out(paths.labels, std::ios::trunc);
  if (!out) throw IoError("cannot open " + paths.labels.string());
  WriteLabels(out, ds);
}

EmbeddingDataset LoadDataset(const DatasetPaths& paths) {
  EmbeddingDataset ds;
  {
    std::ifstream in(paths.embeddings, std::ios::binary);
    if (!in) throw IoError("cannot open " + paths.embeddings.string());
    try {
      ds.embeddings = ReadEmbeddings(in);
    } catch (const IoError& e) {
      throw IoError(paths.embeddings.string() + ": " + e.what());
    }
  }
  std::ifstream in(paths.labels);
  if (!in) throw IoError("cannot open " + paths.labels.string());
  ReadLabels(in, ds);
  try {
    ds.Validate();
  } catch (const InputError& e) {
    throw IoError(paths.labels.string() + ": " + e.what());
  }
  return ds;
}

BatchIterator::BatchIterator(const EmbeddingDataset& ds, std::size_t batch_size,
                             std::uint64_t seed)
    : ds_(&ds), batch_size_(batch_size), seed_(seed) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (batch_size > ds.size()) {
    throw ConfigError("batch size " + std::to_string(batch_size) +
                      " exceeds dataset size " + std::to_string(ds.size()));
  }
  StartEpoch(0);
}

void BatchIterator::StartEpoch(std::uint64_t epoch) {
  order_.resize(ds_->size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  Rng rng(DeriveSeed(seed_, "batch-epoch", epoch));
  // Fisher-Yates with our own uniform draw so the order does not depend on
  // the standard library's shuffle.
  for (std::size_t i = order_.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(nn::UniformUnit(rng) *
                                            static_cast<double>(i));
    std::swap(order_[i - 1], order_[std::min(j, i - 1)]);
  }
  cursor_ = 0;
}

bool BatchIterator::NextIndices(std::vector<std::size_t>& out) {
  if (cursor_ + batch_size_ > order_.size()) return false;
  out.assign(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
             order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + batch_size_));
  cursor_ += batch_size_;
  return true;
}

bool BatchIterator::Next(Batch& out) {
  if (!NextIndices(out.indices)) return false;
  out.x = ds_->Rows(out.indices);
  out.y.resize(batch_size_);
  for (std::size_t i = 0; i < batch_size_; ++i) {
    out.y[i] = ds_->speaker_labels[out.indices[i]];
  }
  return true;
}

std::size_t BatchIterator::batches_per_epoch() const {
  return ds_->size() / batch_size_;
}

std::pair<EmbeddingDataset, EmbeddingDataset> SplitStratified(
    const EmbeddingDataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1)");
  }
  ds.Validate();
  std::map<Label, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_speaker[ds.speaker_labels[i]].push_back(i);
  }
  Rng rng(DeriveSeed(seed, "split"));
  std::vector<std::size_t> train, held;
  for (auto& [speaker, items] : by_speaker) {
    if (items.size() < 2) {
      throw ConfigError("speaker " + std::to_string(speaker) +
                        " has a single item; a stratified split needs >= 2");
    }
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(nn::UniformUnit(rng) *
                                              static_cast<double>(i));
      std::swap(items[i - 1], items[std::min(j, i - 1)]);
    }
    auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(items.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, items.size() - 1);
    train.insert(train.end(), items.begin(),
                 items.begin() + static_cast<std::ptrdiff_t>(n_train));
    held.insert(held.end(),
                items.begin() + static_cast<std::ptrdiff_t>(n_train),
                items.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(held.begin(), held.end());
  return {ds.Subset(train), ds.Subset(held)};
}

void SynthConfig::Validate() const {
  if (n_speakers == 0 || n_per_speaker == 0 || n_nuisance == 0 || dim == 0) {
    throw ConfigError("synthetic counts and dim must be positive");
  }
  if (speaker_subspace_dim == 0 || nuisance_subspace_dim == 0) {
    throw ConfigError("subspace dimensions must be positive");
  }
  if (speaker_subspace_dim + nuisance_subspace_dim > dim) {
    throw ConfigError(
        "speaker_subspace_dim + nuisance_subspace_dim must not exceed dim (" +
        std::to_string(speaker_subspace_dim) + " + " +
        std::to_string(nuisance_subspace_dim) + " > " + std::to_string(dim) +
        ")");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ConfigError("noise_sigma must be finite and >= 0");
  }
  if (nuisance_name.empty() || nuisance_name == "speaker" ||
      nuisance_name == "utt_id" ||
      nuisance_name.find_first_of("\t\n:") != std::string::npos) {
    throw ConfigError("invalid nuisance factor name '" + nuisance_name + "'");
  }
}

RowVector SynthTruth::Mean(Label speaker, Label nuisance) const {
  RowVector m = speaker_latents.row(speaker) * speaker_basis.transpose();
  m.noalias() += nuisance_latents.row(nuisance) * nuisance_basis.transpose();
  return m;
}

SyntheticData GenerateSynthetic(const SynthConfig& cfg) {
  cfg.Validate();
  const auto dim = static_cast<Eigen::Index>(cfg.dim);
  const auto ds = static_cast<Eigen::Index>(cfg.speaker_subspace_dim);
  const auto dn = static_cast<Eigen::Index>(cfg.nuisance_subspace_dim);
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticData out;
  SynthTruth& t = out.truth;
  {
    Rng rng(DeriveSeed(cfg.seed, "synth-basis"));
    Eigen::MatrixXd g(dim, ds + dn);
    for (Eigen::Index c = 0; c < g.cols(); ++c) {
      for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = normal(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q =
        qr.householderQ() * Eigen::MatrixXd::Identity(dim, ds + dn);
    t.speaker_basis = q.leftCols(ds);
    t.nuisance_basis = q.rightCols(dn);
  }
  auto draw = [&](Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
  };
  {
    Rng rng(DeriveSeed(cfg.seed, "synth-speakers"));
    t.speaker_latents = draw(rng, static_cast<Eigen::Index>(cfg.n_speakers), ds);
  }
  {
    Rng rng(DeriveSeed(cfg.seed, "synth-nuisance"));
    t.nuisance_latents = draw(rng, static_cast<Eigen::Index>(cfg.n_nuisance), dn);
  }

  const std::size_t n = cfg.n_speakers * cfg.n_per_speaker;
  EmbeddingDataset& d = out.dataset;
  d.num_speakers = cfg.n_speakers;
  d.nuisance.push_back(Factor{cfg.nuisance_name, cfg.n_nuisance, {}});
  d.embeddings.resize(static_cast<Eigen::Index>(n), dim);
  d.utterance_ids.reserve(n);
  d.speaker_labels.reserve(n);

  Rng assign_rng(DeriveSeed(cfg.seed, "synth-assign"));
  Rng noise_rng(DeriveSeed(cfg.seed, "synth-noise"));
  char id[64];
  for (std::size_t i = 0; i < n; ++i) {
    const auto spk = static_cast<Label>(i / cfg.n_per_speaker);
    const auto nui = static_cast<Label>(std::min<std::size_t>(
        static_cast<std::size_t>(nn::UniformUnit(assign_rng) *
                                 static_cast<double>(cfg.n_nuisance)),
        cfg.n_nuisance - 1));
    RowVector x = t.Mean(spk, nui);
    if (cfg.noise_sigma > 0.0) {
      for (Eigen::Index c = 0; c < dim; ++c) {
        x(c) += cfg.noise_sigma * normal(noise_rng);
      }
    }
    d.embeddings.row(static_cast<Eigen::Index>(i)) = x.cast<float>();
    std::snprintf(id, sizeof id, "spk%03d-utt%04zu", spk,
                  i % cfg.n_per_speaker);
    d.utterance_ids.emplace_back(id);
    d.speaker_labels.push_back(spk);
    d.nuisance[0].labels.push_back(nui);
  }
  return out;
}

}  // namespace uai::data
