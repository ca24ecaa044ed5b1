#include "uai/lda.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "uai/error.hpp"

namespace uai::eval {
namespace {

struct Scatter {
  Eigen::MatrixXd within;
  Eigen::MatrixXd between;
  RowVector mean;
  std::size_t n_classes = 0;
};

Scatter ComputeScatter(const Matrix& x, std::span<const Label> labels) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw InputError("LDA: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(x.rows()) + " rows");
  }
  if (x.rows() == 0) throw InputError("LDA on empty data");
  std::map<Label, std::vector<Eigen::Index>> classes;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    classes[labels[i]].push_back(static_cast<Eigen::Index>(i));
  }
  const Eigen::Index d = x.cols();
  Scatter s;
  s.n_classes = classes.size();
  s.mean = x.colwise().mean();
  s.within = Eigen::MatrixXd::Zero(d, d);
  s.between = Eigen::MatrixXd::Zero(d, d);
  for (const auto& [label, rows] : classes) {
    Matrix xc(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      xc.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
    }
    const RowVector mc = xc.colwise().mean();
    xc.rowwise() -= mc;
    s.within.noalias() += xc.transpose() * xc;
    const RowVector dm = mc - s.mean;
    s.between.noalias() += static_cast<double>(rows.size()) * dm.transpose() * dm;
  }
  const double n = static_cast<double>(x.rows());
  s.within /= n;
  s.between /= n;
  return s;
}

}  // namespace

Matrix LdaProjection::Apply(const Matrix& x) const {
  if (static_cast<std::size_t>(x.cols()) != in_dim()) {
    throw InputError("LDA apply: input has " + std::to_string(x.cols()) +
                     " columns, projection expects " + std::to_string(in_dim()));
  }
  Matrix centered = x.rowwise() - mean;
  return centered * projection;
}

LdaProjection LdaFit(const Matrix& x, std::span<const Label> labels,
                     std::size_t out_dim, const LdaOptions& opts) {
  Scatter s = ComputeScatter(x, labels);
  const auto d = static_cast<std::size_t>(x.cols());
  if (out_dim == 0) throw InputError("LDA out_dim must be positive");
  if (s.n_classes < 2 || out_dim > s.n_classes - 1 || out_dim > d) {
    throw InputError("LDA out_dim " + std::to_string(out_dim) +
                     " exceeds min(input dim " + std::to_string(d) +
                     ", n_classes - 1 = " +
                     std::to_string(s.n_classes > 0 ? s.n_classes - 1 : 0) + ")");
  }
  if (opts.within_ridge > 0.0) {
    const double ridge =
        opts.within_ridge * s.within.trace() / static_cast<double>(d);
    s.within.diagonal().array() += ridge > 0.0 ? ridge : opts.within_ridge;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(s.within);
  const double scale = s.within.diagonal().maxCoeff();
  const Eigen::VectorXd pivots = llt.matrixLLT().diagonal();
  if (llt.info() != Eigen::Success || !(scale > 0.0) ||
      pivots.minCoeff() * pivots.minCoeff() < 1e-12 * scale) {
    throw NumericError(
        "LDA: within-class scatter is singular (fewer items than dims, or "
        "duplicated items); set a positive within_ridge or reduce the input "
        "dimension first");
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      s.between, s.within, Eigen::ComputeEigenvectors | Eigen::ABx_lx);
  if (solver.info() != Eigen::Success) {
    throw NumericError("LDA: generalized eigensolver failed");
  }
  // Eigen sorts ascending; take the top out_dim in descending order.
  const auto total = static_cast<Eigen::Index>(d);
  const auto k = static_cast<Eigen::Index>(out_dim);
  LdaProjection lda;
  lda.mean = s.mean;
  lda.projection.resize(total, k);
  lda.eigenvalues.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::VectorXd v = solver.eigenvectors().col(total - 1 - j);
    // Deterministic sign: largest-magnitude component positive.
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    lda.projection.col(j) = v;
    lda.eigenvalues(j) = solver.eigenvalues()(total - 1 - j);
  }
  return lda;
}

double FisherRatio(const Matrix& x, std::span<const Label> labels,
                   const Matrix& projection) {
  Scatter s = ComputeScatter(x, labels);
  const Eigen::MatrixXd pw = projection.transpose() * s.within * projection;
  const Eigen::MatrixXd pb = projection.transpose() * s.between * projection;
  return pw.ldlt().solve(pb).trace();
}

}  // namespace uai::eval
