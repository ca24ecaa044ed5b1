#ifndef UAI_LDA_HPP_
#define UAI_LDA_HPP_

#include <cstddef>
#include <span>

#include "uai/nn.hpp"

namespace uai::eval {

// x -> (x - mean) * projection
struct LdaProjection {
  RowVector mean;
  Matrix projection;  // input_dim x out_dim
  Eigen::VectorXd eigenvalues;  // descending, length out_dim

  std::size_t in_dim() const { return static_cast<std::size_t>(projection.rows()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(projection.cols()); }

  Matrix Apply(const Matrix& x) const;
};

struct LdaOptions {
  // Ridge added to the within-class scatter, relative to trace(Sw)/dim.
  // Zero means none: a singular Sw is then an error.
  double within_ridge = 0.0;
};

// Fisher LDA: columns solve Sb v = lambda Sw v, sorted by descending lambda
// and normalized so that v' Sw v = 1.
LdaProjection LdaFit(const Matrix& x, std::span<const Label> labels,
                     std::size_t out_dim, const LdaOptions& opts = {});

// trace((P' Sw P)^-1 (P' Sb P)) for a projection P of the given data.
double FisherRatio(const Matrix& x, std::span<const Label> labels,
                   const Matrix& projection);

}  // namespace uai::eval

#endif  // UAI_LDA_HPP_
