#include "uai/plda.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "uai/error.hpp"

namespace uai::eval {
namespace {

struct Grouped {
  // Centered on nothing; rows of x per speaker.
  std::vector<std::vector<Eigen::Index>> members;
  Eigen::Index total = 0;
};

Grouped GroupBySpeaker(const Matrix& x, std::span<const Label> labels) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw InputError("PLDA: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(x.rows()) + " rows");
  }
  std::map<Label, std::vector<Eigen::Index>> by;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by[labels[i]].push_back(static_cast<Eigen::Index>(i));
  }
  Grouped g;
  for (auto& [label, rows] : by) g.members.push_back(std::move(rows));
  g.total = x.rows();
  return g;
}

double LogDet(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NumericError(std::string("PLDA: ") + what + " is not positive definite");
  }
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Eigen::MatrixXd Symmetrize(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

// Adds a ridge to W when it is ill-conditioned. Returns the ridge (0 if none).
double Regularize(Eigen::MatrixXd& within, double fallback_trace,
                  const PldaOptions& opts) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(within,
                                                   Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (hi > 0.0 && lo > opts.min_condition * hi) return 0.0;
  const double d = static_cast<double>(within.rows());
  double ridge = opts.ridge_scale * std::max(within.trace(), fallback_trace) / d;
  if (!(ridge > 0.0)) ridge = opts.ridge_scale;
  within.diagonal().array() += ridge;
  return ridge;
}

struct SpeakerStats {
  RowVector sum;  // sum of (x - mean)
  double n = 0;
};

std::vector<SpeakerStats> Stats(const Matrix& x, const Grouped& g,
                                const RowVector& mean) {
  std::vector<SpeakerStats> s(g.members.size());
  for (std::size_t i = 0; i < g.members.size(); ++i) {
    s[i].sum = RowVector::Zero(x.cols());
    for (Eigen::Index r : g.members[i]) s[i].sum += x.row(r) - mean;
    s[i].n = static_cast<double>(g.members[i].size());
  }
  return s;
}

// Posterior of a speaker latent given n sessions: cov = B - B (B + W/n)^-1 B,
// gain = B (B + W/n)^-1 applied to the session mean.
struct Posterior {
  Eigen::MatrixXd cov;
  Eigen::MatrixXd gain;
};

Posterior PosteriorFor(const PldaModel& m, double n) {
  const Eigen::MatrixXd s = m.between + m.within / n;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  Posterior p;
  p.gain = ldlt.solve(m.between).transpose();  // B S^-1 (B, S symmetric)
  p.cov = Symmetrize(m.between - p.gain * m.between);
  return p;
}

PldaModel EmStep(const Matrix& x, const Grouped& g, const PldaModel& m) {
  const auto d = x.cols();
  const auto stats = Stats(x, g, m.mean);
  std::map<double, Posterior> cache;
  std::vector<Eigen::VectorXd> y_hat(stats.size());
  std::vector<const Posterior*> post(stats.size());
  for (std::size_t i = 0; i < stats.size(); ++i) {
    auto it = cache.find(stats[i].n);
    if (it == cache.end()) it = cache.emplace(stats[i].n, PosteriorFor(m, stats[i].n)).first;
    post[i] = &it->second;
    y_hat[i] = post[i]->gain * (stats[i].sum.transpose() / stats[i].n);
  }
  PldaModel next;
  next.between = Eigen::MatrixXd::Zero(d, d);
  RowVector mean_sum = RowVector::Zero(d);
  for (std::size_t i = 0; i < stats.size(); ++i) {
    next.between += post[i]->cov + y_hat[i] * y_hat[i].transpose();
    for (Eigen::Index r : g.members[i]) mean_sum += x.row(r) - y_hat[i].transpose();
  }
  next.between /= static_cast<double>(stats.size());
  next.mean = mean_sum / static_cast<double>(g.total);
  next.within = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < stats.size(); ++i) {
    for (Eigen::Index r : g.members[i]) {
      const Eigen::VectorXd e = (x.row(r) - next.mean).transpose() - y_hat[i];
      next.within += e * e.transpose();
    }
    next.within += stats[i].n * post[i]->cov;
  }
  next.within /= static_cast<double>(g.total);
  next.between = Symmetrize(next.between);
  next.within = Symmetrize(next.within);
  return next;
}

double LogLikelihood(const PldaModel& m, const Matrix& x, const Grouped& g) {
  const double d = static_cast<double>(x.cols());
  Eigen::LLT<Eigen::MatrixXd> w_llt(m.within);
  if (w_llt.info() != Eigen::Success) {
    throw NumericError("PLDA: within-class covariance is not positive definite");
  }
  const double logdet_w = 2.0 * w_llt.matrixLLT().diagonal().array().log().sum();
  std::map<double, std::pair<double, Eigen::LDLT<Eigen::MatrixXd>>> by_n;
  const auto stats = Stats(x, g, m.mean);
  double total = 0.0;
  const double log2pi = std::log(2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const double n = stats[i].n;
    auto it = by_n.find(n);
    if (it == by_n.end()) {
      const Eigen::MatrixXd wn = m.within + n * m.between;
      it = by_n.emplace(n, std::make_pair(LogDet(wn, "W + nB"),
                                          Eigen::LDLT<Eigen::MatrixXd>(wn)))
               .first;
    }
    // Sum of squared Mahalanobis terms under W, minus the part explained by
    // the shared latent: with s = sum of residuals,
    //   quad = sum r'W^-1 r - s'W^-1 B (W + nB)^-1 s.
    double quad = 0.0;
    for (Eigen::Index r : g.members[i]) {
      const Eigen::VectorXd res = (x.row(r) - m.mean).transpose();
      quad += res.dot(w_llt.solve(res));
    }
    const Eigen::VectorXd s = stats[i].sum.transpose();
    const Eigen::VectorXd winv_s = w_llt.solve(s);
    quad -= winv_s.dot(m.between * it->second.second.solve(s));
    total += -0.5 * (n * d * log2pi + (n - 1.0) * logdet_w + it->second.first + quad);
  }
  return total;
}

}  // namespace

void PldaModel::Validate() const {
  const auto d = mean.size();
  if (d == 0 || between.rows() != d || between.cols() != d ||
      within.rows() != d || within.cols() != d) {
    throw InputError("PLDA model dimensions are inconsistent");
  }
  if ((between - between.transpose()).cwiseAbs().maxCoeff() > 1e-10 ||
      (within - within.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw NumericError("PLDA covariances are not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(within);
  if (llt.info() != Eigen::Success) {
    throw NumericError("PLDA within-class covariance is not positive definite");
  }
}

PldaFitResult PldaFit(const Matrix& x, std::span<const Label> labels,
                      const PldaOptions& opts) {
  const Grouped g = GroupBySpeaker(x, labels);
  if (g.members.size() < 2) throw InputError("PLDA needs at least 2 speakers");
  bool repeated = false;
  for (const auto& m : g.members) repeated |= m.size() >= 2;
  if (!repeated) {
    throw InputError("PLDA needs at least one speaker with 2 or more sessions");
  }
  const auto d = x.cols();
  PldaModel init;
  init.mean = x.colwise().mean();
  init.between = Eigen::MatrixXd::Zero(d, d);
  init.within = Eigen::MatrixXd::Zero(d, d);
  for (const auto& rows : g.members) {
    RowVector mc = RowVector::Zero(d);
    for (Eigen::Index r : rows) mc += x.row(r);
    mc /= static_cast<double>(rows.size());
    const Eigen::VectorXd dm = (mc - init.mean).transpose();
    init.between += dm * dm.transpose();
    for (Eigen::Index r : rows) {
      const Eigen::VectorXd e = (x.row(r) - mc).transpose();
      init.within += e * e.transpose();
    }
  }
  init.between /= static_cast<double>(g.members.size());
  init.within /= static_cast<double>(x.rows());
  return PldaFitFrom(x, labels, init, opts);
}

PldaFitResult PldaFitFrom(const Matrix& x, std::span<const Label> labels,
                          const PldaModel& init, const PldaOptions& opts) {
  const Grouped g = GroupBySpeaker(x, labels);
  if (static_cast<std::size_t>(x.cols()) != init.dim()) {
    throw InputError("PLDA: data dim does not match the initial model");
  }
  const RowVector mean = x.colwise().mean();
  const double total_trace =
      (x.rowwise() - mean).squaredNorm() / static_cast<double>(x.rows());

  PldaFitResult result;
  result.model = init;
  result.model.between = Symmetrize(result.model.between);
  result.model.within = Symmetrize(result.model.within);
  auto regularize = [&](PldaModel& m) {
    const double ridge = Regularize(m.within, total_trace, opts);
    if (ridge > 0.0) {
      result.diagnostics.regularized = true;
      result.diagnostics.ridge = std::max(result.diagnostics.ridge, ridge);
    }
  };
  regularize(result.model);
  result.diagnostics.log_likelihood.push_back(LogLikelihood(result.model, x, g));
  for (std::size_t it = 0; it < opts.em_iters; ++it) {
    result.model = EmStep(x, g, result.model);
    regularize(result.model);
    result.diagnostics.log_likelihood.push_back(
        LogLikelihood(result.model, x, g));
  }
  return result;
}

double PldaLogLikelihood(const PldaModel& model, const Matrix& x,
                         std::span<const Label> labels) {
  model.Validate();
  if (static_cast<std::size_t>(x.cols()) != model.dim()) {
    throw InputError("PLDA: data dim does not match the model");
  }
  return LogLikelihood(model, x, GroupBySpeaker(x, labels));
}

PldaScorer::PldaScorer(const PldaModel& model) : mean_(model.mean) {
  model.Validate();
  const auto d = static_cast<Eigen::Index>(model.dim());
  const Eigen::MatrixXd total = model.between + model.within;
  Eigen::MatrixXd joint(2 * d, 2 * d);
  joint << total, model.between, model.between, total;
  Eigen::LLT<Eigen::MatrixXd> joint_llt(joint);
  Eigen::LLT<Eigen::MatrixXd> total_llt(total);
  if (joint_llt.info() != Eigen::Success || total_llt.info() != Eigen::Success) {
    throw NumericError("PLDA scorer: covariance is not positive definite");
  }
  const Eigen::MatrixXd joint_inv =
      joint_llt.solve(Eigen::MatrixXd::Identity(2 * d, 2 * d));
  const Eigen::MatrixXd total_inv = total_llt.solve(Eigen::MatrixXd::Identity(d, d));
  // Average the two diagonal blocks (equal in exact arithmetic) so the score
  // is symmetric bit for bit.
  diag_block_ = Symmetrize(0.5 * (joint_inv.topLeftCorner(d, d) +
                                  joint_inv.bottomRightCorner(d, d))) -
                total_inv;
  cross_block_ = Symmetrize(0.5 * (joint_inv.topRightCorner(d, d) +
                                   joint_inv.bottomLeftCorner(d, d)));
  const double logdet_joint =
      2.0 * joint_llt.matrixLLT().diagonal().array().log().sum();
  const double logdet_total =
      2.0 * total_llt.matrixLLT().diagonal().array().log().sum();
  offset_ = -0.5 * (logdet_joint - 2.0 * logdet_total);
}

double PldaScorer::Score(const RowVector& enroll, const RowVector& test) const {
  if (enroll.size() != mean_.size() || test.size() != mean_.size()) {
    throw InputError("PLDA score: vector dim does not match the model (" +
                     std::to_string(mean_.size()) + ")");
  }
  const Eigen::VectorXd e = (enroll - mean_).transpose();
  const Eigen::VectorXd t = (test - mean_).transpose();
  const Eigen::VectorXd s = e + t;
  const double qe = e.dot(diag_block_ * e);
  const double qt = t.dot(diag_block_ * t);
  // 2 e'Ct = (e+t)'C(e+t) - e'Ce - t'Ct, symmetric under e <-> t.
  const double cross = s.dot(cross_block_ * s) -
                       (e.dot(cross_block_ * e) + t.dot(cross_block_ * t));
  return -0.5 * ((qe + qt) + cross) + offset_;
}

double PldaScore(const PldaModel& model, const RowVector& enroll,
                 const RowVector& test) {
  return PldaScorer(model).Score(enroll, test);
}

}  // namespace uai::eval
