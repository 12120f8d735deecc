#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

// Central finite differences against an analytic gradient. Relative error
// uses the conventional floor denominator max(1, |num|, |ana|) so tiny
// gradients are judged on absolute error.
struct GradCheckResult {
  double max_rel_err = 0.0;
  size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

inline GradCheckResult grad_check(std::vector<float>& params,
                                  const std::function<double()>& loss,
                                  const std::vector<float>& analytic,
                                  double step = 1e-3) {
  GradCheckResult res;
  for (size_t i = 0; i < params.size(); ++i) {
    const float saved = params[i];
    params[i] = static_cast<float>(saved + step);
    const double up = loss();
    params[i] = static_cast<float>(saved - step);
    const double down = loss();
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double ana = static_cast<double>(analytic[i]);
    const double denom = std::max({1.0, std::abs(numeric), std::abs(ana)});
    const double rel = std::abs(numeric - ana) / denom;
    if (rel > res.max_rel_err) {
      res.max_rel_err = rel;
      res.worst_index = i;
      res.worst_analytic = ana;
      res.worst_numeric = numeric;
    }
  }
  return res;
}
