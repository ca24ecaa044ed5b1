#include "uai/diarization.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "uai/error.hpp"
#include "uai/kmeans.hpp"

namespace uai::eval {

void DiarSession::Validate() const {
  std::vector<const Segment*> order;
  for (const Segment& s : segments) {
    if (!(s.end > s.start)) {
      throw InputError("session " + session_id + ": segment [" +
                       std::to_string(s.start) + ", " + std::to_string(s.end) +
                       ") has non-positive duration");
    }
    order.push_back(&s);
  }
  std::sort(order.begin(), order.end(),
            [](const Segment* a, const Segment* b) { return a->start < b->start; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (order[i]->start < order[i - 1]->end) {
      throw InputError("session " + session_id + ": segments overlap at " +
                       std::to_string(order[i]->start));
    }
  }
}

double DiarSession::TotalDuration() const {
  double total = 0.0;
  for (const Segment& s : segments) total += s.end - s.start;
  return total;
}

std::vector<Label> DiarizeOracle(const DiarSession& session,
                                 const Matrix& segment_embeddings,
                                 std::uint64_t seed) {
  session.Validate();
  if (static_cast<std::size_t>(segment_embeddings.rows()) != session.segments.size()) {
    throw InputError("session " + session.session_id + ": " +
                     std::to_string(segment_embeddings.rows()) +
                     " embeddings for " + std::to_string(session.segments.size()) +
                     " segments");
  }
  KMeansOptions opts;
  opts.seed = seed;
  return KMeans(segment_embeddings, session.n_speakers, opts).assignment.labels;
}

double Der(const DiarSession& session, const std::vector<Label>& hypothesis) {
  session.Validate();
  if (hypothesis.size() != session.segments.size()) {
    throw InputError("session " + session.session_id + ": " +
                     std::to_string(hypothesis.size()) +
                     " hypothesis labels for " +
                     std::to_string(session.segments.size()) + " segments");
  }
  const double total = session.TotalDuration();
  if (!(total > 0.0)) throw InputError("session " + session.session_id + " is empty");
  std::map<std::string, Eigen::Index> ref_index;
  std::map<Label, Eigen::Index> hyp_index;
  for (std::size_t i = 0; i < hypothesis.size(); ++i) {
    ref_index.emplace(session.segments[i].speaker,
                      static_cast<Eigen::Index>(ref_index.size()));
    hyp_index.emplace(hypothesis[i], static_cast<Eigen::Index>(hyp_index.size()));
  }
  Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(ref_index.size()),
      static_cast<Eigen::Index>(hyp_index.size()));
  for (std::size_t i = 0; i < hypothesis.size(); ++i) {
    const Segment& s = session.segments[i];
    overlap(ref_index[s.speaker], hyp_index[hypothesis[i]]) += s.end - s.start;
  }
  const std::vector<int> mapping = SolveAssignment(-overlap);
  double matched = 0.0;
  for (std::size_t r = 0; r < mapping.size(); ++r) {
    if (mapping[r] >= 0) {
      matched += overlap(static_cast<Eigen::Index>(r), mapping[r]);
    }
  }
  return (total - matched) / total;
}

std::vector<DiarSession> ReadRttm(std::istream& in) {
  std::vector<DiarSession> sessions;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::vector<std::string> f;
    for (std::string tok; fields >> tok;) f.push_back(tok);
    if (f.empty() || f[0] != "SPEAKER") continue;
    if (f.size() != 6 && f.size() < 8) {
      throw IoError("RTTM line " + std::to_string(line_no) +
                    ": expected 6 or at least 8 fields");
    }
    Segment seg;
    try {
      std::size_t pos = 0;
      seg.start = std::stod(f[3], &pos);
      if (pos != f[3].size()) throw std::invalid_argument("start");
      const double dur = std::stod(f[4], &pos);
      if (pos != f[4].size()) throw std::invalid_argument("duration");
      seg.end = seg.start + dur;
    } catch (const std::exception&) {
      throw IoError("RTTM line " + std::to_string(line_no) +
                    ": malformed start or duration");
    }
    seg.speaker = f.size() == 6 ? f[5] : f[7];
    const std::string ortho = f.size() == 6 ? "<NA>" : f[5];
    auto [it, inserted] = index.emplace(f[1], sessions.size());
    if (inserted) sessions.push_back(DiarSession{f[1], {}, 0});
    DiarSession& s = sessions[it->second];
    seg.embedding_id = ortho == "<NA>"
                           ? f[1] + "-" + std::to_string(s.segments.size())
                           : ortho;
    s.segments.push_back(std::move(seg));
  }
  for (DiarSession& s : sessions) {
    std::set<std::string> speakers;
    for (const Segment& seg : s.segments) speakers.insert(seg.speaker);
    s.n_speakers = speakers.size();
    s.Validate();
  }
  return sessions;
}

namespace {

void WriteLine(std::ostream& out, const std::string& session,
               const Segment& s, const std::string& ortho,
               const std::string& name) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f %.3f", s.start, s.end - s.start);
  out << "SPEAKER " << session << " 1 " << buf << ' ' << ortho << " <NA> "
      << name << " <NA> <NA>\n";
}

}  // namespace

void WriteRttm(std::ostream& out, const DiarSession& session,
               const std::vector<Label>& hypothesis) {
  if (hypothesis.size() != session.segments.size()) {
    throw InputError("hypothesis/segment count mismatch for " + session.session_id);
  }
  for (std::size_t i = 0; i < hypothesis.size(); ++i) {
    WriteLine(out, session.session_id, session.segments[i],
              session.segments[i].embedding_id,
              "spk" + std::to_string(hypothesis[i]));
  }
}

void WriteRttmReference(std::ostream& out, const DiarSession& session) {
  for (const Segment& s : session.segments) {
    WriteLine(out, session.session_id, s, s.embedding_id, s.speaker);
  }
}

Matrix SegmentEmbeddings(const DiarSession& session,
                         const data::EmbeddingDataset& ds) {
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < ds.size(); ++i) by_id.emplace(ds.utterance_ids[i], i);
  std::vector<std::size_t> rows;
  std::vector<std::string> missing;
  for (const Segment& s : session.segments) {
    auto it = by_id.find(s.embedding_id);
    if (it == by_id.end()) {
      missing.push_back(s.embedding_id);
    } else {
      rows.push_back(it->second);
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) {
      list += (i ? ", " : "") + missing[i];
    }
    if (missing.size() > 10) list += ", ...";
    throw InputError("session " + session.session_id + ": " +
                     std::to_string(missing.size()) +
                     " segment embeddings not found: " + list);
  }
  return ds.Rows(rows);
}

}  // namespace uai::eval
