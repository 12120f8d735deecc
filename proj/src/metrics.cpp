#include "evoclass/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "evoclass/errors.hpp"

namespace evoclass {

ConfusionMatrix confusion(const std::vector<int>& preds,
                          const std::vector<int>& labels) {
  if (preds.empty()) throw ArgumentError("confusion: empty prediction list");
  if (preds.size() != labels.size())
    throw ArgumentError("confusion: " + std::to_string(preds.size()) +
                        " predictions vs " + std::to_string(labels.size()) + " labels");
  ConfusionMatrix cm;
  for (size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] == 1)
      preds[i] == 1 ? ++cm.tp : ++cm.fn;
    else
      preds[i] == 1 ? ++cm.fp : ++cm.tn;
  }
  return cm;
}

namespace {

std::optional<double> ratio(int64_t num, int64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricsReport report(const ConfusionMatrix& cm) {
  if (cm.total() <= 0) throw ArgumentError("report: empty confusion matrix");
  if (cm.tp < 0 || cm.fn < 0 || cm.fp < 0 || cm.tn < 0)
    throw ArgumentError("report: negative count");
  MetricsReport r;
  r.accuracy = ratio(cm.tp + cm.tn, cm.total());
  r.sensitivity = ratio(cm.tp, cm.tp + cm.fn);
  r.specificity = ratio(cm.tn, cm.tn + cm.fp);
  r.ppv = ratio(cm.tp, cm.tp + cm.fp);
  r.npv = ratio(cm.tn, cm.tn + cm.fn);
  // Harmonic mean of sensitivity and ppv, computed from the raw counts so
  // a single correctly-rounded division gives the exact rational value.
  if (r.sensitivity && r.ppv && (*r.sensitivity + *r.ppv) > 0.0)
    r.f1 = ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn);
  return r;
}

std::array<double, 4> scaled_confusion(const ConfusionMatrix& cm) {
  const int64_t mx = std::max({cm.tp, cm.fn, cm.fp, cm.tn});
  if (mx == 0) return {0.0, 0.0, 0.0, 0.0};
  const double m = static_cast<double>(mx);
  return {static_cast<double>(cm.tp) / m, static_cast<double>(cm.fn) / m,
          static_cast<double>(cm.fp) / m, static_cast<double>(cm.tn) / m};
}

namespace {

// P(X <= k) for X ~ Bin(n, 1/2). Exact 64-bit binomials up to n = 62;
// log-domain beyond that.
double binomial_lower_tail_half(int64_t n, int64_t k) {
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  if (n <= 62) {
    unsigned long long c = 1, acc = 0;
    for (int64_t i = 0; i <= k; ++i) {
      acc += c;
      c = c * static_cast<unsigned long long>(n - i) / static_cast<unsigned long long>(i + 1);
    }
    return static_cast<double>(static_cast<long double>(acc) *
                               std::exp2l(static_cast<long double>(-n)));
  }
  double log_c = 0.0;  // log C(n, 0)
  double mx = -std::numeric_limits<double>::infinity();
  std::vector<double> terms;
  terms.reserve(static_cast<size_t>(k + 1));
  for (int64_t i = 0; i <= k; ++i) {
    terms.push_back(log_c);
    mx = std::max(mx, log_c);
    log_c += std::log(static_cast<double>(n - i)) - std::log(static_cast<double>(i + 1));
  }
  double s = 0.0;
  for (double t : terms) s += std::exp(t - mx);
  return std::exp(mx + std::log(s) - static_cast<double>(n) * std::log(2.0));
}

std::pair<int64_t, int64_t> discordant_counts(const std::vector<uint8_t>& a,
                                              const std::vector<uint8_t>& b) {
  if (a.empty()) throw ArgumentError("mcnemar: empty correctness lists");
  if (a.size() != b.size())
    throw ArgumentError("mcnemar: list lengths differ (" + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()) + ")");
  int64_t bb = 0, cc = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] && !b[i]) ++bb;
    if (!a[i] && b[i]) ++cc;
  }
  return {bb, cc};
}

double mcnemar_exact(int64_t b, int64_t c) {
  const int64_t n = b + c;
  if (n == 0) return 1.0;
  return std::min(1.0, 2.0 * binomial_lower_tail_half(n, std::min(b, c)));
}

double mcnemar_chi2_cc(int64_t b, int64_t c) {
  const int64_t n = b + c;
  if (n == 0) return 1.0;
  const double d = std::abs(static_cast<double>(b - c)) - 1.0;
  const double x = d * d / static_cast<double>(n);
  // chi-square(1) upper tail
  return std::erfc(std::sqrt(x / 2.0));
}

}  // namespace

double mcnemar(const std::vector<uint8_t>& correct_a,
               const std::vector<uint8_t>& correct_b, McNemarMode mode) {
  auto [b, c] = discordant_counts(correct_a, correct_b);
  return mode == McNemarMode::exact ? mcnemar_exact(b, c) : mcnemar_chi2_cc(b, c);
}

McNemarReport mcnemar_report(const std::vector<uint8_t>& correct_a,
                             const std::vector<uint8_t>& correct_b) {
  auto [b, c] = discordant_counts(correct_a, correct_b);
  McNemarReport r;
  r.b = b;
  r.c = c;
  r.p_exact = mcnemar_exact(b, c);
  r.p_chi2 = mcnemar_chi2_cc(b, c);
  return r;
}

}  // namespace evoclass
