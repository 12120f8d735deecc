#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace evoclass {

// Positive class = Metastasis (1).
struct ConfusionMatrix {
  int64_t tp = 0;
  int64_t fn = 0;
  int64_t fp = 0;
  int64_t tn = 0;
  int64_t total() const { return tp + fn + fp + tn; }
};

ConfusionMatrix confusion(const std::vector<int>& preds,
                          const std::vector<int>& labels);

// Ratios of exact integer counts; a zero denominator yields an empty
// optional, never NaN or a silent zero.
struct MetricsReport {
  std::optional<double> accuracy;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> ppv;
  std::optional<double> npv;
  std::optional<double> f1;
};

MetricsReport report(const ConfusionMatrix& cm);

// Display convention: counts divided by the max count, so the largest
// cell renders as 1. Order (tp, fn, fp, tn).
std::array<double, 4> scaled_confusion(const ConfusionMatrix& cm);

enum class McNemarMode { exact, chi2_cc };

// Paired test on per-sample correctness of two models. b = A right/B
// wrong, c = A wrong/B right. Exact mode: two-sided binomial
// p = min(1, 2*P(X <= min(b,c))), X ~ Bin(b+c, 1/2). chi2_cc:
// (|b-c|-1)^2/(b+c) against the chi-square(1) upper tail. b+c==0 -> 1.
double mcnemar(const std::vector<uint8_t>& correct_a,
               const std::vector<uint8_t>& correct_b, McNemarMode mode);

struct McNemarReport {
  int64_t b = 0;
  int64_t c = 0;
  double p_exact = 1.0;
  double p_chi2 = 1.0;
};

McNemarReport mcnemar_report(const std::vector<uint8_t>& correct_a,
                             const std::vector<uint8_t>& correct_b);

}  // namespace evoclass
