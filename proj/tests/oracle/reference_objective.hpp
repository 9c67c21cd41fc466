#pragma once

// Plain-loop forward pass of one modality's training objective, written
// without Eigen or any library code so it can serve as the finite-difference
// oracle for the analytic gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace amfir::oracle {

using Rows = std::vector<std::vector<double>>;

struct Problem {
  Rows support_x;
  std::vector<int> support_labels;
  Rows query_x;
  std::vector<int> query_labels;
  int n_way = 0;
  bool squared = true;

  // Frozen teacher.
  bool distill = false;
  std::vector<std::size_t> members;
  Rows teacher_probs;
  std::vector<double> teacher_certainty;
  double lambda = 1.0;
};

inline std::vector<double> affine(const Rows& w, const std::vector<double>& b,
                                  const std::vector<double>& x) {
  std::vector<double> out(b);
  for (std::size_t r = 0; r < w.size(); ++r) {
    for (std::size_t c = 0; c < x.size(); ++c) out[r] += w[r][c] * x[c];
  }
  return out;
}

inline double objective(const Rows& w, const std::vector<double>& b, const Problem& p) {
  const std::size_t d = b.size();
  Rows protos(static_cast<std::size_t>(p.n_way), std::vector<double>(d, 0.0));
  std::vector<int> counts(static_cast<std::size_t>(p.n_way), 0);
  for (std::size_t j = 0; j < p.support_x.size(); ++j) {
    const auto f = affine(w, b, p.support_x[j]);
    const auto k = static_cast<std::size_t>(p.support_labels[j]);
    for (std::size_t c = 0; c < d; ++c) protos[k][c] += f[c];
    ++counts[k];
  }
  for (std::size_t k = 0; k < protos.size(); ++k) {
    for (auto& v : protos[k]) v /= counts[k];
  }

  const std::size_t m = p.query_x.size();
  Rows log_p(m, std::vector<double>(protos.size()));
  for (std::size_t i = 0; i < m; ++i) {
    const auto q = affine(w, b, p.query_x[i]);
    std::vector<double> z(protos.size());
    for (std::size_t k = 0; k < protos.size(); ++k) {
      double sq = 0.0;
      for (std::size_t c = 0; c < d; ++c) sq += (q[c] - protos[k][c]) * (q[c] - protos[k][c]);
      z[k] = -(p.squared ? sq : std::sqrt(sq));
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (const double v : z) s += std::exp(v - zmax);
    for (std::size_t k = 0; k < z.size(); ++k) log_p[i][k] = z[k] - zmax - std::log(s);
  }

  double ce = 0.0;
  for (std::size_t i = 0; i < m; ++i) ce -= log_p[i][static_cast<std::size_t>(p.query_labels[i])];
  ce /= static_cast<double>(m);

  double distill = 0.0;
  if (p.distill && !p.members.empty()) {
    double wsum = 0.0;
    for (const auto i : p.members) {
      double kl = 0.0;
      for (std::size_t k = 0; k < protos.size(); ++k) {
        const double t = p.teacher_probs[i][k];
        kl += t * (std::log(t) - log_p[i][k]);
      }
      distill += p.teacher_certainty[i] * kl;
      wsum += p.teacher_certainty[i];
    }
    distill /= wsum;
  }
  return ce + p.lambda * distill;
}

}  // namespace amfir::oracle
