#ifndef UAI_PLDA_HPP_
#define UAI_PLDA_HPP_

// Two-covariance PLDA: x = mean + y + e, y ~ N(0, B), e ~ N(0, W).

#include <cstddef>
#include <span>
#include <vector>

#include "uai/nn.hpp"

namespace uai::eval {

struct PldaModel {
  RowVector mean;
  Eigen::MatrixXd between;  // B
  Eigen::MatrixXd within;   // W

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
  // Symmetry within 1e-10 and W positive definite.
  void Validate() const;
};

struct PldaOptions {
  std::size_t em_iters = 20;
  // W is ridged when its eigenvalue ratio drops below this.
  double min_condition = 1e-10;
  // Ridge size relative to trace / dim.
  double ridge_scale = 1e-6;
};

struct PldaDiagnostics {
  // Total-data log-likelihood of the initial parameters, then after each
  // EM iteration.
  std::vector<double> log_likelihood;
  bool regularized = false;
  double ridge = 0.0;
};

struct PldaFitResult {
  PldaModel model;
  PldaDiagnostics diagnostics;
};

// Initializes from the data (mean, covariance of class means, pooled
// within-class covariance) and runs opts.em_iters EM iterations.
PldaFitResult PldaFit(const Matrix& x, std::span<const Label> labels,
                      const PldaOptions& opts = {});

// EM iterations starting from `init`.
PldaFitResult PldaFitFrom(const Matrix& x, std::span<const Label> labels,
                          const PldaModel& init, const PldaOptions& opts);

// log p(x | model), marginalizing each speaker's latent over its sessions.
double PldaLogLikelihood(const PldaModel& model, const Matrix& x,
                         std::span<const Label> labels);

// Precomputes the pairwise quadratic form so each trial costs O(d^2).
class PldaScorer {
 public:
  explicit PldaScorer(const PldaModel& model);

  // log p(e, t | same) - log p(e, t | different). Exactly symmetric in its
  // arguments.
  double Score(const RowVector& enroll, const RowVector& test) const;
  std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }

 private:
  RowVector mean_;
  Eigen::MatrixXd diag_block_;   // upper-left block of the precision difference
  Eigen::MatrixXd cross_block_;  // off-diagonal block
  double offset_ = 0.0;
};

double PldaScore(const PldaModel& model, const RowVector& enroll,
                 const RowVector& test);

}  // namespace uai::eval

#endif  // UAI_PLDA_HPP_
