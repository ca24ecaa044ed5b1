#include "uai/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "uai/error.hpp"

namespace uai::eval {

double Eer(std::span<const double> target_scores,
           std::span<const double> nontarget_scores) {
  if (target_scores.empty() || nontarget_scores.empty()) {
    throw InputError("EER needs at least one target and one nontarget score");
  }
  for (double s : target_scores) {
    if (std::isnan(s)) throw InputError("EER: NaN score");
  }
  for (double s : nontarget_scores) {
    if (std::isnan(s)) throw InputError("EER: NaN score");
  }
  std::vector<double> tar(target_scores.begin(), target_scores.end());
  std::vector<double> non(nontarget_scores.begin(), nontarget_scores.end());
  std::sort(tar.begin(), tar.end());
  std::sort(non.begin(), non.end());
  std::vector<double> thresholds;
  thresholds.reserve(tar.size() + non.size());
  std::merge(tar.begin(), tar.end(), non.begin(), non.end(),
             std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  const double nt = static_cast<double>(tar.size());
  const double nn = static_cast<double>(non.size());
  // Operating point k accepts scores >= thresholds[k]; the last point
  // (k == thresholds.size()) rejects everything.
  std::size_t ti = 0;  // targets below the threshold
  std::size_t ni = 0;  // nontargets below the threshold
  double prev_far = 1.0;
  double prev_frr = 0.0;
  for (std::size_t k = 0; k <= thresholds.size(); ++k) {
    double far = 0.0;
    double frr = 1.0;
    if (k < thresholds.size()) {
      const double t = thresholds[k];
      while (ti < tar.size() && tar[ti] < t) ++ti;
      while (ni < non.size() && non[ni] < t) ++ni;
      far = static_cast<double>(non.size() - ni) / nn;
      frr = static_cast<double>(ti) / nt;
    }
    const double d_prev = prev_far - prev_frr;
    const double d = far - frr;
    if (d <= 0.0) {
      if (d_prev == d) return far;  // both on the diagonal
      const double lambda = d_prev / (d_prev - d);
      return prev_far + lambda * (far - prev_far);
    }
    prev_far = far;
    prev_frr = frr;
  }
  return 0.0;  // unreachable: the reject-all point has d = -1
}

double Eer(std::span<const double> scores, const std::vector<bool>& is_target) {
  if (scores.size() != is_target.size()) {
    throw InputError("EER: " + std::to_string(scores.size()) + " scores for " +
                     std::to_string(is_target.size()) + " labels");
  }
  std::vector<double> tar, non;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    (is_target[i] ? tar : non).push_back(scores[i]);
  }
  return Eer(tar, non);
}

void ClusterAssignment::Validate() const {
  for (Label l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= k) {
      throw InputError("cluster index " + std::to_string(l) +
                       " outside [0, " + std::to_string(k) + ")");
    }
  }
}

double Nmi(std::span<const Label> a, std::span<const Label> b) {
  if (a.size() != b.size()) {
    throw InputError("NMI: partitions have different lengths (" +
                     std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw InputError("NMI of empty partitions");
  std::map<Label, double> ca, cb;
  std::map<std::pair<Label, Label>, double> joint;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[a[i]] += 1.0;
    cb[b[i]] += 1.0;
    joint[{a[i], b[i]}] += 1.0;
  }
  const double n = static_cast<double>(a.size());
  // Terms are summed in sorted order so the result does not depend on how
  // either partition is labeled or which argument comes first.
  auto sorted_sum = [](std::vector<double> terms) {
    std::sort(terms.begin(), terms.end());
    double s = 0.0;
    for (double t : terms) s += t;
    return s;
  };
  auto entropy = [&](const std::map<Label, double>& counts) {
    std::vector<double> terms;
    for (const auto& [label, c] : counts) {
      const double p = c / n;
      terms.push_back(-p * std::log(p));
    }
    return sorted_sum(std::move(terms));
  };
  const double ha = entropy(ca);
  const double hb = entropy(cb);
  if (ha == 0.0 && hb == 0.0) return 0.0;
  std::vector<double> terms;
  for (const auto& [key, c] : joint) {
    const double pij = c / n;
    const double pi = ca[key.first] / n;
    const double pj = cb[key.second] / n;
    terms.push_back(pij * std::log(pij / (pi * pj)));
  }
  const double mi = sorted_sum(std::move(terms));
  const double nmi = mi / (0.5 * (ha + hb));
  return std::clamp(nmi, 0.0, 1.0);
}

double Nmi(const ClusterAssignment& a, const ClusterAssignment& b) {
  a.Validate();
  b.Validate();
  return Nmi(a.labels, b.labels);
}

std::vector<int> SolveAssignment(const Eigen::MatrixXd& cost) {
  const auto rows = cost.rows();
  const auto cols = cost.cols();
  if (rows == 0 || cols == 0) return std::vector<int>(static_cast<std::size_t>(rows), -1);
  if (rows > cols) {
    // Solve the transpose and invert the mapping.
    const std::vector<int> by_col = SolveAssignment(cost.transpose());
    std::vector<int> by_row(static_cast<std::size_t>(rows), -1);
    for (std::size_t c = 0; c < by_col.size(); ++c) {
      if (by_col[c] >= 0) by_row[static_cast<std::size_t>(by_col[c])] = static_cast<int>(c);
    }
    return by_row;
  }
  // Shortest augmenting path Hungarian method with potentials, 1-indexed.
  const auto n = static_cast<std::size_t>(rows);
  const auto m = static_cast<std::size_t>(cols);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1),
                                static_cast<Eigen::Index>(j - 1)) -
                           u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(n, -1);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) assignment[p[j] - 1] = static_cast<int>(j - 1);
  }
  return assignment;
}

}  // namespace uai::eval
