#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "evoclass/errors.hpp"
#include "evoclass/metrics.hpp"

using namespace evoclass;

TEST_CASE("confusion counts partition the samples") {
  std::vector<int> labels, preds;
  for (int i = 0; i < 30; ++i) {
    labels.push_back(1);
    preds.push_back(1);
  }
  for (int i = 0; i < 30; ++i) {
    labels.push_back(0);
    preds.push_back(0);
  }
  ConfusionMatrix cm = confusion(preds, labels);
  CHECK(cm.tp == 30);
  CHECK(cm.tn == 30);
  CHECK(cm.fp == 0);
  CHECK(cm.fn == 0);

  std::vector<int> flipped;
  for (int p : preds) flipped.push_back(1 - p);
  ConfusionMatrix inv = confusion(flipped, labels);
  CHECK(inv.tp == 0);
  CHECK(inv.tn == 0);
  CHECK(inv.fp == 30);
  CHECK(inv.fn == 30);

  CHECK_THROWS_AS(confusion({}, {}), ArgumentError);
  CHECK_THROWS_AS(confusion({1}, {1, 0}), ArgumentError);
}

TEST_CASE("two errors on a balanced sixty-sample set") {
  // one false negative and one false positive
  std::vector<int> labels, preds;
  for (int i = 0; i < 30; ++i) {
    labels.push_back(1);
    preds.push_back(i == 0 ? 0 : 1);
  }
  for (int i = 0; i < 30; ++i) {
    labels.push_back(0);
    preds.push_back(i == 0 ? 1 : 0);
  }
  ConfusionMatrix cm = confusion(preds, labels);
  CHECK(cm.tp == 29);
  CHECK(cm.fn == 1);
  CHECK(cm.fp == 1);
  CHECK(cm.tn == 29);
  CHECK(*report(cm).accuracy == 58.0 / 60.0);
}

TEST_CASE("report hits the exact rationals") {
  {
    MetricsReport r = report({29, 1, 1, 29});
    const double want = 29.0 / 30.0;
    CHECK(*r.accuracy == want);
    CHECK(*r.sensitivity == want);
    CHECK(*r.specificity == want);
    CHECK(*r.ppv == want);
    CHECK(*r.npv == want);
    CHECK(*r.f1 == want);
  }
  {
    MetricsReport r = report({48, 2, 2, 48});
    const double want = 0.96;
    CHECK(*r.accuracy == want);
    CHECK(*r.sensitivity == want);
    CHECK(*r.specificity == want);
    CHECK(*r.ppv == want);
    CHECK(*r.npv == want);
    CHECK(*r.f1 == want);
  }
}

TEST_CASE("degenerate always-positive predictor") {
  MetricsReport r = report({30, 0, 30, 0});
  CHECK(*r.sensitivity == 1.0);
  CHECK(*r.specificity == 0.0);
  CHECK(*r.ppv == 0.5);
  CHECK(!r.npv.has_value());
  CHECK(*r.f1 == 2.0 / 3.0);
  CHECK_THROWS_AS(report({0, 0, 0, 0}), ArgumentError);
}

TEST_CASE("report is invariant under count scaling") {
  const ConfusionMatrix base{13, 4, 2, 21};
  const MetricsReport r0 = report(base);
  for (int64_t k : {2, 3, 10, 100}) {
    const MetricsReport rk = report({base.tp * k, base.fn * k, base.fp * k, base.tn * k});
    CHECK(*rk.accuracy == *r0.accuracy);
    CHECK(*rk.sensitivity == *r0.sensitivity);
    CHECK(*rk.specificity == *r0.specificity);
    CHECK(*rk.ppv == *r0.ppv);
    CHECK(*rk.npv == *r0.npv);
    CHECK(*rk.f1 == *r0.f1);
  }
  CHECK(*r0.accuracy == doctest::Approx(1.0 - (4.0 + 2.0) / 40.0).epsilon(1e-15));
}

TEST_CASE("scaled confusion preserves ratios") {
  const ConfusionMatrix cm{28, 2, 5, 25};
  const auto scaled = scaled_confusion(cm);
  const double counts[4] = {28, 2, 5, 25};
  CHECK(*std::max_element(scaled.begin(), scaled.end()) == 1.0);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(scaled[static_cast<size_t>(i)] / scaled[static_cast<size_t>(j)] ==
            doctest::Approx(counts[i] / counts[j]).epsilon(1e-12));
}

namespace {

// Oracle: enumerate every assignment of the b+c discordant samples and
// count the patterns at least as extreme as min(b,c).
double mcnemar_exact_enumerated(int b, int c) {
  const int n = b + c;
  if (n == 0) return 1.0;
  const int k = std::min(b, c);
  int64_t hits = 0;
  for (int64_t mask = 0; mask < (int64_t{1} << n); ++mask)
    if (__builtin_popcountll(static_cast<unsigned long long>(mask)) <= k) ++hits;
  return std::min(1.0, 2.0 * static_cast<double>(hits) /
                           static_cast<double>(int64_t{1} << n));
}

std::pair<std::vector<uint8_t>, std::vector<uint8_t>> discordant_lists(int b, int c) {
  // pad with one concordant pair so the lists are never empty
  std::vector<uint8_t> a{1}, bb{1};
  for (int i = 0; i < b; ++i) {
    a.push_back(1);
    bb.push_back(0);
  }
  for (int i = 0; i < c; ++i) {
    a.push_back(0);
    bb.push_back(1);
  }
  return {a, bb};
}

}  // namespace

TEST_CASE("exact mcnemar equals brute-force enumeration up to b+c = 14") {
  for (int b = 0; b + 0 <= 14; ++b)
    for (int c = 0; b + c <= 14; ++c) {
      auto [la, lb] = discordant_lists(b, c);
      const double got = mcnemar(la, lb, McNemarMode::exact);
      const double want = mcnemar_exact_enumerated(b, c);
      CHECK(std::abs(got - want) <= 1e-12);
    }
}

TEST_CASE("constructed b=20 c=1 case") {
  auto [la, lb] = discordant_lists(20, 1);
  const double p = mcnemar(la, lb, McNemarMode::exact);
  CHECK(std::abs(p - 44.0 / 2097152.0) <= 1e-12);
}

TEST_CASE("mcnemar properties") {
  {
    auto [la, lb] = discordant_lists(6, 6);
    CHECK(mcnemar(la, lb, McNemarMode::exact) == 1.0);
  }
  for (int b : {0, 1, 5, 17})
    for (int c : {0, 2, 9}) {
      auto [la, lb] = discordant_lists(b, c);
      const double p = mcnemar(la, lb, McNemarMode::exact);
      CHECK(p > 0.0);
      CHECK(p <= 1.0);
      CHECK(mcnemar(lb, la, McNemarMode::exact) == p);  // model swap
    }
  {
    // |b-c| = 1 zeroes the corrected statistic
    auto [la, lb] = discordant_lists(4, 3);
    CHECK(mcnemar(la, lb, McNemarMode::chi2_cc) == 1.0);
  }
  {
    auto [la, lb] = discordant_lists(20, 1);
    McNemarReport r = mcnemar_report(la, lb);
    CHECK(r.b == 20);
    CHECK(r.c == 1);
    CHECK(r.p_chi2 < 1e-3);
    CHECK(r.p_exact == doctest::Approx(44.0 / 2097152.0).epsilon(1e-9));
  }
  CHECK_THROWS_AS(mcnemar({1, 0}, {1}, McNemarMode::exact), ArgumentError);
}
