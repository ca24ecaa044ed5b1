#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_util.hpp"
#include "uai/diarization.hpp"
#include "uai/error.hpp"
#include "uai/kmeans.hpp"
#include "uai/metrics.hpp"

namespace uai::eval {
namespace {

using testing::DerOracle;
using testing::EerOracle;
using testing::NmiOracle;
using testing::RandomMatrix;

DiarSession Session(const std::vector<double>& durations,
                    const std::vector<std::string>& speakers) {
  DiarSession s;
  s.session_id = "s";
  double t = 0.0;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    s.segments.push_back({t, t + durations[i], speakers[i], "u" + std::to_string(i)});
    t += durations[i];
  }
  std::vector<std::string> distinct(speakers);
  std::sort(distinct.begin(), distinct.end());
  s.n_speakers = static_cast<std::size_t>(
      std::unique(distinct.begin(), distinct.end()) - distinct.begin());
  return s;
}

// ---- EER -------------------------------------------------------------------

TEST(Eer, PerfectSeparation) {
  EXPECT_EQ(Eer(std::vector<double>{0.9, 0.8}, std::vector<double>{0.1, 0.2}), 0.0);
}

TEST(Eer, HandExample) {
  EXPECT_NEAR(Eer(std::vector<double>{0.9, 0.7, 0.4}, std::vector<double>{0.6, 0.3, 0.2}),
              1.0 / 3.0, 1e-15);
}

TEST(Eer, CompletelyReversedScores) {
  EXPECT_EQ(Eer(std::vector<double>{0.1, 0.2}, std::vector<double>{0.8, 0.9}), 1.0);
}

TEST(Eer, NegationWithFlippedLabelsIsInvariant) {
  Rng rng(3);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> tar, non;
    for (int i = 0; i < 20; ++i) tar.push_back(normal(rng) + 1.0);
    for (int i = 0; i < 30; ++i) non.push_back(normal(rng));
    std::vector<double> ntar, nnon;
    for (double s : tar) nnon.push_back(-s);
    for (double s : non) ntar.push_back(-s);
    EXPECT_NEAR(Eer(tar, non), Eer(ntar, nnon), 1e-12);
  }
}

TEST(Eer, MatchesExhaustiveSweepOnRandomSets) {
  Rng rng(2024);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> size(1, 40);
  std::uniform_int_distribution<int> coarse(0, 6);
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> tar(static_cast<std::size_t>(size(rng)));
    std::vector<double> non(static_cast<std::size_t>(size(rng)));
    // A third of the sets use a coarse grid so ties are common.
    const bool tied = rep % 3 == 0;
    for (double& s : tar) s = tied ? coarse(rng) : normal(rng) + 0.8;
    for (double& s : non) s = tied ? coarse(rng) - 1 : normal(rng);
    const double eer = Eer(tar, non);
    EXPECT_NEAR(eer, EerOracle(tar, non), 1e-9) << "set " << rep;
    EXPECT_GE(eer, 0.0);
    EXPECT_LE(eer, 1.0);
  }
}

TEST(Eer, LabelVectorOverload) {
  const std::vector<double> scores{0.9, 0.6, 0.7, 0.3, 0.4, 0.2};
  const std::vector<bool> target{true, false, true, false, true, false};
  EXPECT_NEAR(Eer(scores, target), 1.0 / 3.0, 1e-15);
}

TEST(Eer, OneClassIsInputError) {
  EXPECT_THROW(Eer(std::vector<double>{1.0}, std::vector<double>{}), InputError);
  EXPECT_THROW(Eer(std::vector<double>{}, std::vector<double>{1.0}), InputError);
  const std::vector<double> scores{0.1, 0.2};
  EXPECT_THROW(Eer(scores, std::vector<bool>{true, true}), InputError);
}

// ---- NMI -------------------------------------------------------------------

TEST(Nmi, IdenticalPartitions) {
  const std::vector<Label> a{0, 0, 1, 1, 2};
  EXPECT_DOUBLE_EQ(Nmi(a, a), 1.0);
}

TEST(Nmi, IndependentPartitions) {
  EXPECT_EQ(Nmi(std::vector<Label>{0, 0, 1, 1}, std::vector<Label>{0, 1, 0, 1}), 0.0);
}

TEST(Nmi, HandContingencyCase) {
  // H(a) = ln 2, H(b) = 1.5 ln 2, MI = ln 2 -> 1 / 1.25
  const std::vector<Label> a{0, 0, 1, 1};
  const std::vector<Label> b{0, 0, 1, 2};
  EXPECT_NEAR(Nmi(a, b), 0.8, 1e-15);
  EXPECT_EQ(Nmi(a, b), Nmi(b, a));
}

TEST(Nmi, BothTrivialIsZero) {
  EXPECT_EQ(Nmi(std::vector<Label>{3, 3, 3}, std::vector<Label>{1, 1, 1}), 0.0);
}

TEST(Nmi, MatchesContingencyOracleExactly) {
  Rng rng(5);
  for (int rep = 0; rep < 200; ++rep) {
    std::uniform_int_distribution<Label> ka(0, rep % 7 + 1);
    std::uniform_int_distribution<Label> kb(0, rep % 5 + 1);
    std::vector<Label> a(60), b(60);
    for (auto& x : a) x = ka(rng);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = rep % 2 ? kb(rng) : (a[i] + kb(rng) % 2) % 4;
    const double nmi = Nmi(a, b);
    EXPECT_EQ(nmi, NmiOracle(a, b)) << rep;
    EXPECT_EQ(nmi, Nmi(b, a)) << rep;
    // Relabel a by a fixed permutation of its class ids.
    std::vector<Label> relabeled(a);
    for (auto& x : relabeled) x = 10 - x;
    EXPECT_EQ(nmi, Nmi(relabeled, b)) << rep;
  }
}

TEST(Nmi, LengthMismatchAndBadAssignments) {
  EXPECT_THROW(Nmi(std::vector<Label>{0, 1}, std::vector<Label>{0}), InputError);
  ClusterAssignment bad{{0, 2}, 2};
  ClusterAssignment ok{{0, 1}, 2};
  EXPECT_THROW(Nmi(bad, ok), InputError);
  EXPECT_DOUBLE_EQ(Nmi(ok, ok), 1.0);
}

// ---- assignment ------------------------------------------------------------

TEST(SolveAssignment, MatchesBruteForce) {
  Rng rng(9);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index rows = 1 + rep % 5;
    const Eigen::Index cols = 1 + (rep / 5) % 5;
    Eigen::MatrixXd cost = RandomMatrix(rows, cols, rng);
    const std::vector<int> got = SolveAssignment(cost);
    double got_cost = 0.0;
    std::vector<int> used;
    for (Eigen::Index r = 0; r < rows; ++r) {
      const int c = got[static_cast<std::size_t>(r)];
      if (c < 0) continue;
      got_cost += cost(r, c);
      used.push_back(c);
    }
    std::sort(used.begin(), used.end());
    EXPECT_EQ(std::adjacent_find(used.begin(), used.end()), used.end());
    EXPECT_EQ(static_cast<Eigen::Index>(used.size()), std::min(rows, cols));

    // Brute force over column permutations (or row permutations).
    const Eigen::Index big = std::max(rows, cols);
    std::vector<int> perm(static_cast<std::size_t>(big));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double c = 0.0;
      for (Eigen::Index r = 0; r < rows; ++r) {
        const int col = perm[static_cast<std::size_t>(r)];
        if (col < cols) c += cost(r, col);
      }
      if (rows > cols) {
        // Each column must be used: rows beyond a valid column are unmatched.
        c = 0.0;
        for (Eigen::Index col = 0; col < cols; ++col) c += cost(perm[static_cast<std::size_t>(col)], col);
      }
      best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    EXPECT_NEAR(got_cost, best, 1e-12) << rows << "x" << cols;
  }
}

// ---- k-means ---------------------------------------------------------------

TEST(KMeans, MatchesBruteForceTwoClustering) {
  Rng rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::Index n = 6 + rep % 7;  // up to 12 points
    Matrix x = RandomMatrix(n, 2, rng, 0.5);
    for (Eigen::Index i = 0; i < n / 2; ++i) x(i, 0) += 10.0;
    double best = std::numeric_limits<double>::infinity();
    std::vector<Label> best_labels;
    for (std::uint32_t mask = 1; mask < (1u << (n - 1)); ++mask) {
      std::vector<Label> labels(static_cast<std::size_t>(n), 0);
      for (Eigen::Index i = 0; i < n - 1; ++i) labels[static_cast<std::size_t>(i)] = (mask >> i) & 1;
      Matrix c = Matrix::Zero(2, 2);
      RowVector count = RowVector::Zero(2);
      for (Eigen::Index i = 0; i < n; ++i) {
        c.row(labels[static_cast<std::size_t>(i)]) += x.row(i);
        count(labels[static_cast<std::size_t>(i)]) += 1;
      }
      c.row(0) /= count(0);
      c.row(1) /= count(1);
      const double inertia = Inertia(x, labels, c);
      if (inertia < best) {
        best = inertia;
        best_labels = labels;
      }
    }
    KMeansOptions opts;
    opts.seed = static_cast<std::uint64_t>(rep);
    const KMeansResult r = KMeans(x, 2, opts);
    EXPECT_DOUBLE_EQ(Nmi(r.assignment.labels, best_labels), 1.0) << rep;
    EXPECT_NEAR(r.inertia(), best, 1e-9);
  }
}

TEST(KMeans, KEqualsNGivesZeroInertia) {
  Rng rng(12);
  const Matrix x = RandomMatrix(7, 3, rng);
  const KMeansResult r = KMeans(x, 7);
  EXPECT_EQ(r.inertia(), 0.0);
  std::vector<Label> labels = r.assignment.labels;
  std::sort(labels.begin(), labels.end());
  EXPECT_EQ(std::unique(labels.begin(), labels.end()), labels.end());
}

TEST(KMeans, InertiaNonIncreasingAndDeterministic) {
  Rng rng(13);
  const Matrix x = RandomMatrix(300, 5, rng);
  KMeansOptions opts;
  opts.seed = 4;
  const KMeansResult a = KMeans(x, 8, opts);
  for (std::size_t i = 1; i < a.inertia_history.size(); ++i) {
    EXPECT_LE(a.inertia_history[i], a.inertia_history[i - 1] + 1e-9);
  }
  EXPECT_NEAR(a.inertia(), Inertia(x, a.assignment.labels, a.centroids), 1e-9);
  const KMeansResult b = KMeans(x, 8, opts);
  EXPECT_EQ(a.assignment.labels, b.assignment.labels);
  EXPECT_EQ(a.centroids, b.centroids);
  EXPECT_TRUE(a.converged);
}

TEST(KMeans, Preconditions) {
  const Matrix x = Matrix::Zero(3, 2);
  EXPECT_THROW(KMeans(x, 4), InputError);
  EXPECT_THROW(KMeans(x, 0), InputError);
  Matrix bad = Matrix::Zero(3, 2);
  bad(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(KMeans(bad, 2), InputError);
}

TEST(KMeans, DuplicatePointsDoNotBreakSeeding) {
  Matrix x = Matrix::Zero(6, 2);
  x.bottomRows(3).setConstant(5.0);
  const KMeansResult r = KMeans(x, 3);
  EXPECT_EQ(r.assignment.labels.size(), 6u);
  EXPECT_EQ(r.inertia(), 0.0);
}

// ---- DER -------------------------------------------------------------------

TEST(Der, HandThreeSegmentCase) {
  const DiarSession s = Session({10, 10, 10}, {"A", "A", "B"});
  EXPECT_NEAR(Der(s, {0, 1, 1}), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(Der(s, {0, 1, 1}), DerOracle(s, {0, 1, 1}));
}

TEST(Der, ConsistentRelabelingIsZero) {
  const DiarSession s = Session({1, 2, 3, 4}, {"A", "B", "A", "C"});
  EXPECT_EQ(Der(s, {5, 2, 5, 0}), 0.0);
}

TEST(Der, MatchesExhaustiveMappingEnumeration) {
  Rng rng(21);
  std::uniform_int_distribution<int> duration(1, 9);
  for (int rep = 0; rep < 300; ++rep) {
    const int k_ref = 1 + rep % 6;
    const int k_hyp = 1 + (rep / 6) % 6;
    const int n = std::max(k_ref, k_hyp) + rep % 5;
    std::uniform_int_distribution<int> ref(0, k_ref - 1);
    std::uniform_int_distribution<int> hyp(0, k_hyp - 1);
    std::vector<double> d;
    std::vector<std::string> r;
    std::vector<Label> h;
    for (int i = 0; i < n; ++i) {
      // Quarter-second durations keep every sum exact.
      d.push_back(duration(rng) * 0.25);
      r.push_back(std::string(1, static_cast<char>('A' + ref(rng))));
      h.push_back(hyp(rng));
    }
    const DiarSession s = Session(d, r);
    const double der = Der(s, h);
    EXPECT_EQ(der, DerOracle(s, h)) << rep;
    EXPECT_GE(der, 0.0);
    EXPECT_LE(der, 1.0);
    // Permuting hypothesis labels changes nothing.
    std::vector<Label> permuted(h);
    for (auto& x : permuted) x = (x * 5 + 3) % 7 + 10;
    EXPECT_EQ(Der(s, permuted), der) << rep;
  }
}

TEST(Der, Preconditions) {
  const DiarSession s = Session({1, 1}, {"A", "B"});
  EXPECT_THROW(Der(s, {0}), InputError);
  DiarSession overlap = s;
  overlap.segments[1].start = 0.5;
  EXPECT_THROW(Der(overlap, {0, 1}), InputError);
  DiarSession empty_segment = s;
  empty_segment.segments[0].end = empty_segment.segments[0].start;
  EXPECT_THROW(Der(empty_segment, {0, 1}), InputError);
}

// ---- oracle diarization ------------------------------------------------------

TEST(DiarizeOracle, IdenticalEmbeddingsPerSpeakerGivePerfectDer) {
  const DiarSession s = Session({2, 3, 1, 4, 2, 2}, {"A", "B", "C", "A", "B", "C"});
  Rng rng(30);
  const Matrix centers = RandomMatrix(3, 4, rng, 5.0);
  Matrix emb(6, 4);
  for (Eigen::Index i = 0; i < 6; ++i) emb.row(i) = centers.row(i % 3);
  const auto hyp = DiarizeOracle(s, emb, 1);
  EXPECT_EQ(Der(s, hyp), 0.0);
  EXPECT_EQ(hyp, DiarizeOracle(s, emb, 1));
}

TEST(DiarizeOracle, TooFewSegmentsIsInputError) {
  DiarSession s = Session({1, 1}, {"A", "B"});
  s.n_speakers = 3;
  EXPECT_THROW(DiarizeOracle(s, Matrix::Zero(2, 2), 0), InputError);
}

// ---- RTTM ----------------------------------------------------------------------

TEST(Rttm, ReadsSpeakerRecordsAndRoundTrips) {
  std::istringstream in(
      "SPEAKER rec1 1 0.00 1.50 utt-a <NA> alice <NA> <NA>\n"
      "SPKR-INFO rec1 1 <NA> <NA> <NA> unknown alice <NA> <NA>\n"
      "SPEAKER rec1 1 1.50 2.00 <NA> <NA> bob <NA> <NA>\n"
      "SPEAKER rec2 1 0.0 1.0 carol\n");
  const auto sessions = ReadRttm(in);
  ASSERT_EQ(sessions.size(), 2u);
  EXPECT_EQ(sessions[0].session_id, "rec1");
  ASSERT_EQ(sessions[0].segments.size(), 2u);
  EXPECT_EQ(sessions[0].segments[0].embedding_id, "utt-a");
  EXPECT_EQ(sessions[0].segments[1].embedding_id, "rec1-1");
  EXPECT_EQ(sessions[0].segments[1].speaker, "bob");
  EXPECT_DOUBLE_EQ(sessions[0].segments[1].end, 3.5);
  EXPECT_EQ(sessions[0].n_speakers, 2u);
  EXPECT_EQ(sessions[1].segments[0].speaker, "carol");

  std::ostringstream out;
  WriteRttmReference(out, sessions[0]);
  std::istringstream back(out.str());
  const auto again = ReadRttm(back);
  ASSERT_EQ(again.size(), 1u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(again[0].segments[i].speaker, sessions[0].segments[i].speaker);
    EXPECT_EQ(again[0].segments[i].embedding_id, sessions[0].segments[i].embedding_id);
    EXPECT_DOUBLE_EQ(again[0].segments[i].start, sessions[0].segments[i].start);
    EXPECT_DOUBLE_EQ(again[0].segments[i].end, sessions[0].segments[i].end);
  }

  std::ostringstream hyp;
  WriteRttm(hyp, sessions[0], {1, 0});
  EXPECT_NE(hyp.str().find("spk1"), std::string::npos);
}

TEST(Rttm, MalformedLinesRejected) {
  std::istringstream bad_number("SPEAKER rec 1 x 1.0 <NA> <NA> a <NA> <NA>\n");
  EXPECT_THROW(ReadRttm(bad_number), IoError);
  std::istringstream short_line("SPEAKER rec 1 0.0\n");
  EXPECT_THROW(ReadRttm(short_line), IoError);
}

}  // namespace
}  // namespace uai::eval
