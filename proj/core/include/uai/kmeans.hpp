#ifndef UAI_KMEANS_HPP_
#define UAI_KMEANS_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "uai/metrics.hpp"
#include "uai/nn.hpp"

namespace uai::eval {

struct KMeansOptions {
  std::size_t max_iters = 300;
  std::uint64_t seed = 0;
};

struct KMeansResult {
  ClusterAssignment assignment;
  Matrix centroids;  // k x dim
  // Inertia after seeding, then after each Lloyd iteration.
  std::vector<double> inertia_history;
  std::size_t iterations = 0;
  bool converged = false;

  double inertia() const { return inertia_history.back(); }
};

// Full-batch Lloyd's algorithm with k-means++ seeding. Stops when the
// assignment no longer changes or after max_iters. An emptied cluster keeps
// its previous centroid. Distance ties go to the lower cluster index.
KMeansResult KMeans(const Matrix& x, std::size_t k, const KMeansOptions& opts = {});

// Sum of squared distances of every row to its assigned centroid.
double Inertia(const Matrix& x, const std::vector<Label>& labels,
               const Matrix& centroids);

}  // namespace uai::eval

#endif  // UAI_KMEANS_HPP_
