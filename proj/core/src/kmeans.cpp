#include "uai/kmeans.hpp"

#include <limits>
#include <string>

#include "uai/error.hpp"
#include "uai/rng.hpp"

namespace uai::eval {
namespace {

bool Assign(const Matrix& x, const Matrix& c, std::vector<Label>& labels) {
  bool changed = false;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Label best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < c.rows(); ++j) {
      const double d = (x.row(i) - c.row(j)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<Label>(j);
      }
    }
    if (labels[static_cast<std::size_t>(i)] != best) {
      labels[static_cast<std::size_t>(i)] = best;
      changed = true;
    }
  }
  return changed;
}

Matrix SeedPlusPlus(const Matrix& x, std::size_t k, Rng& rng) {
  const Eigen::Index n = x.rows();
  Matrix c(static_cast<Eigen::Index>(k), x.cols());
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  auto first = static_cast<Eigen::Index>(nn::UniformUnit(rng) * static_cast<double>(n));
  first = std::min(first, n - 1);
  c.row(0) = x.row(first);
  chosen[static_cast<std::size_t>(first)] = 1;
  Eigen::VectorXd closest = (x.rowwise() - c.row(0)).rowwise().squaredNorm();
  for (std::size_t j = 1; j < k; ++j) {
    const double total = closest.sum();
    Eigen::Index pick = -1;
    if (total > 0.0) {
      const double target = nn::UniformUnit(rng) * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += closest(i);
        if (closest(i) > 0.0 && acc > target) {
          pick = i;
          break;
        }
      }
      if (pick < 0) {
        for (Eigen::Index i = n; i-- > 0;) {
          if (closest(i) > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      // Every point coincides with a centroid: take any point not yet used.
      std::vector<Eigen::Index> free;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!chosen[static_cast<std::size_t>(i)]) free.push_back(i);
      }
      const auto r = static_cast<std::size_t>(nn::UniformUnit(rng) *
                                              static_cast<double>(free.size()));
      pick = free[std::min(r, free.size() - 1)];
    }
    c.row(static_cast<Eigen::Index>(j)) = x.row(pick);
    chosen[static_cast<std::size_t>(pick)] = 1;
    closest = closest.cwiseMin(
        (x.rowwise() - c.row(static_cast<Eigen::Index>(j))).rowwise().squaredNorm());
  }
  return c;
}

}  // namespace

double Inertia(const Matrix& x, const std::vector<Label>& labels,
               const Matrix& centroids) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    total += (x.row(i) - centroids.row(labels[static_cast<std::size_t>(i)]))
                 .squaredNorm();
  }
  return total;
}

KMeansResult KMeans(const Matrix& x, std::size_t k, const KMeansOptions& opts) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (k == 0) throw InputError("k-means: k must be positive");
  if (k > n) {
    throw InputError("k-means: k = " + std::to_string(k) + " exceeds " +
                     std::to_string(n) + " points");
  }
  if (!x.allFinite()) throw InputError("k-means: non-finite input");
  Rng rng(DeriveSeed(opts.seed, "kmeans++"));
  KMeansResult r;
  r.centroids = SeedPlusPlus(x, k, rng);
  r.assignment.k = k;
  r.assignment.labels.assign(n, -1);
  Assign(x, r.centroids, r.assignment.labels);
  r.inertia_history.push_back(Inertia(x, r.assignment.labels, r.centroids));
  for (std::size_t it = 0; it < opts.max_iters; ++it) {
    Matrix sums = Matrix::Zero(static_cast<Eigen::Index>(k), x.cols());
    std::vector<double> counts(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto l = static_cast<std::size_t>(r.assignment.labels[i]);
      sums.row(static_cast<Eigen::Index>(l)) += x.row(static_cast<Eigen::Index>(i));
      counts[l] += 1.0;
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] > 0.0) {
        r.centroids.row(static_cast<Eigen::Index>(j)) =
            sums.row(static_cast<Eigen::Index>(j)) / counts[j];
      }
    }
    const bool changed = Assign(x, r.centroids, r.assignment.labels);
    r.inertia_history.push_back(Inertia(x, r.assignment.labels, r.centroids));
    r.iterations = it + 1;
    if (!changed) {
      r.converged = true;
      break;
    }
  }
  return r;
}

}  // namespace uai::eval
