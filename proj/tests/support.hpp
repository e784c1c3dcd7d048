#pragma once

#include <functional>
#include <vector>

#include "lbow/rng.hpp"
#include "lbow/tape.hpp"

namespace lbow::test {

inline ad::Mat random_mat(int rows, int cols, Rng& rng, double scale = 1.0) {
  ad::Mat m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = rng.uniform(-scale, scale);
  return m;
}

inline ad::Mat random_prob_vec(int n, Rng& rng) {
  ad::Mat m(n, 1);
  double sum = 0;
  for (int i = 0; i < n; ++i) {
    m(i, 0) = rng.uniform(0.05, 1.0);
    sum += m(i, 0);
  }
  m /= sum;
  return m;
}

// Central finite differences of a scalar loss against the tape's analytic
// gradients on every entry of every input.
using LossBuilder =
    std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

struct GradCheckResult {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
};

inline GradCheckResult grad_check(const std::vector<ad::Mat>& inputs, const LossBuilder& build,
                                  double h = 1e-5) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const auto& m : inputs) vars.push_back(tape.variable(m));
  ad::Var loss = build(tape, vars);
  tape.backward(loss);

  auto loss_at = [&](const std::vector<ad::Mat>& xs) {
    ad::Tape t2;
    std::vector<ad::Var> vs;
    for (const auto& m : xs) vs.push_back(t2.variable(m));
    return t2.val(build(t2, vs))(0, 0);
  };

  GradCheckResult res;
  for (size_t i = 0; i < inputs.size(); ++i) {
    const ad::Mat& g = tape.grad(vars[i]);
    for (Eigen::Index c = 0; c < inputs[i].cols(); ++c) {
      for (Eigen::Index r = 0; r < inputs[i].rows(); ++r) {
        std::vector<ad::Mat> plus = inputs, minus = inputs;
        plus[i](r, c) += h;
        minus[i](r, c) -= h;
        double numeric = (loss_at(plus) - loss_at(minus)) / (2 * h);
        double analytic = g(r, c);
        double abs_err = std::abs(numeric - analytic);
        double rel = abs_err / std::max({1.0, std::abs(numeric), std::abs(analytic)});
        res.max_abs_err = std::max(res.max_abs_err, abs_err);
        res.max_rel_err = std::max(res.max_rel_err, rel);
      }
    }
  }
  return res;
}

}  // namespace lbow::test
