#ifndef UAI_METRICS_HPP_
#define UAI_METRICS_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "uai/nn.hpp"

namespace uai::eval {

// Equal error rate. A trial is accepted when score >= threshold; the
// operating points at every distinct score (plus "reject all") form a
// polyline in (FAR, FRR) whose crossing with FAR == FRR is linearly
// interpolated. The first crossing, i.e. the lowest threshold, wins ties.
double Eer(std::span<const double> target_scores,
           std::span<const double> nontarget_scores);
double Eer(std::span<const double> scores, const std::vector<bool>& is_target);

struct ClusterAssignment {
  std::vector<Label> labels;
  std::size_t k = 0;

  void Validate() const;
};

// MI(a, b) / ((H(a) + H(b)) / 2), natural logs. Zero when both partitions
// are trivial.
double Nmi(std::span<const Label> a, std::span<const Label> b);
double Nmi(const ClusterAssignment& a, const ClusterAssignment& b);

// Minimum-cost assignment of rows to columns on a rectangular cost matrix.
// Returns, for each row, its column or -1 when rows outnumber columns.
std::vector<int> SolveAssignment(const Eigen::MatrixXd& cost);

}  // namespace uai::eval

#endif  // UAI_METRICS_HPP_
