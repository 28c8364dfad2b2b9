#include "selfcontact/inference_filter.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace selfcontact;
using namespace selfcontact::testing;

namespace {

RawPrediction empty_prediction(int n) {
  RawPrediction p;
  p.signature_probs = PairTable<double>(n, 0.0);
  p.segmentation_probs.assign(static_cast<std::size_t>(n), 0.0);
  p.landmarks.assign(static_cast<std::size_t>(n), Vec2(0.5, 0.5));
  return p;
}

// Direct transcription of the three keep rules, for a pair at a time.
bool keep(const RawPrediction& p, const FilterConfig& c, int a, int b) {
  if (p.signature_probs(a, b) < c.tau_C) return false;
  if (p.segmentation_probs[a] < c.tau_S || p.segmentation_probs[b] < c.tau_S) return false;
  if (!p.landmarks[a] || !p.landmarks[b]) return false;
  return (*p.landmarks[a] - *p.landmarks[b]).norm() <= c.tau_dist;
}

RawPrediction random_prediction(Rng& rng, int n, double p_missing = 0.0) {
  auto p = empty_prediction(n);
  for (auto& v : p.segmentation_probs) v = rng.uniform();
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) p.signature_probs(a, b) = rng.uniform();
  }
  for (auto& l : p.landmarks) {
    l = rng.uniform() < p_missing ? std::nullopt : std::optional<Vec2>(Vec2(rng.uniform(), rng.uniform()));
  }
  return p;
}

}  // namespace

TEST(Filter, KeepsConsistentPair) {
  auto p = empty_prediction(9);
  p.signature_probs(2, 5) = 0.9;
  p.segmentation_probs[2] = p.segmentation_probs[5] = 0.8;
  p.landmarks[2] = Vec2(0.40, 0.40);
  p.landmarks[5] = Vec2(0.45, 0.40);
  const auto s = filter_signature(p, {});
  EXPECT_EQ(s.contact_pairs(), (std::vector<RegionPair>{{2, 5}}));
}

TEST(Filter, DropsPairWithFarLandmarks) {
  auto p = empty_prediction(9);
  p.signature_probs(2, 5) = 0.9;
  p.segmentation_probs[2] = p.segmentation_probs[5] = 0.8;
  p.landmarks[2] = Vec2(0.1, 0.1);
  p.landmarks[5] = Vec2(0.9, 0.9);
  EXPECT_TRUE(filter_signature(p, {}).contact_pairs().empty());
  EXPECT_EQ(threshold_signature(p, 0.5).contact_pairs().size(), 1u);
}

TEST(Filter, DropsPairOutsideSegmentation) {
  auto p = empty_prediction(9);
  p.signature_probs(2, 5) = 0.9;
  p.segmentation_probs[2] = 0.8;
  p.segmentation_probs[5] = 0.2;
  EXPECT_TRUE(filter_signature(p, {}).contact_pairs().empty());
}

TEST(Filter, ThresholdsAreInclusive) {
  auto p = empty_prediction(3);
  p.signature_probs(0, 1) = 0.5;
  p.segmentation_probs[0] = p.segmentation_probs[1] = 0.5;
  p.landmarks[0] = Vec2(0.0, 0.0);
  p.landmarks[1] = Vec2(0.0, 0.1);
  EXPECT_EQ(filter_signature(p, {}).contact_pairs().size(), 1u);
}

TEST(Filter, MissingLandmarkRemovesPairAndWarnsOnce) {
  auto p = empty_prediction(4);
  for (int r = 0; r < 4; ++r) p.segmentation_probs[r] = 0.9;
  p.signature_probs(0, 1) = p.signature_probs(0, 2) = p.signature_probs(2, 3) = 0.9;
  p.landmarks[0] = std::nullopt;
  const auto res = filter_signature_with_warnings(p, {});
  EXPECT_EQ(res.signature.contact_pairs(), (std::vector<RegionPair>{{2, 3}}));
  ASSERT_EQ(res.warnings.size(), 1u);
  EXPECT_NE(res.warnings[0].find("region 0"), std::string::npos);
}

TEST(Filter, InvalidInputsAreParameterErrors) {
  auto p = empty_prediction(3);
  EXPECT_THROW(filter_signature(p, {0.0, 0.5, 0.1}), ParameterError);
  EXPECT_THROW(filter_signature(p, {0.5, 1.0, 0.1}), ParameterError);
  EXPECT_THROW(filter_signature(p, {0.5, 0.5, 0.0}), ParameterError);
  p.segmentation_probs[1] = 1.5;
  EXPECT_THROW(filter_signature(p, {}), ParameterError);
  p = empty_prediction(3);
  p.landmarks.pop_back();
  EXPECT_THROW(filter_signature(p, {}), ParameterError);
}

TEST(Filter, MatchesPairwiseRulesOnRandomPredictions) {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const int n = t % 2 ? 9 : 17;
    const auto p = random_prediction(rng, n, 0.1);
    const FilterConfig c{rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.6)};
    const auto s = filter_signature(p, c);
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) EXPECT_EQ(s(a, b) == ContactState::contact, keep(p, c, a, b));
    }
  }
}

TEST(Filter, OutputIsSubsetOfThresholdedSignature) {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const auto p = random_prediction(rng, 9);
    const FilterConfig c{0.5, 0.5, rng.uniform(0.05, 0.5)};
    const auto raw = threshold_signature(p, c.tau_C);
    for (const auto& [a, b] : filter_signature(p, c).contact_pairs()) EXPECT_EQ(raw(a, b), ContactState::contact);
  }
}

TEST(Filter, RaisingThresholdsNeverAddsPairs) {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const auto p = random_prediction(rng, 9);
    const FilterConfig lo{0.3, 0.3, 0.4};
    const auto s_lo = filter_signature(p, lo);
    for (FilterConfig hi : {FilterConfig{0.6, 0.3, 0.4}, FilterConfig{0.3, 0.6, 0.4}, FilterConfig{0.3, 0.3, 0.2}}) {
      for (const auto& [a, b] : filter_signature(p, hi).contact_pairs()) {
        EXPECT_EQ(s_lo(a, b), ContactState::contact);
      }
    }
  }
}

TEST(Sweep, PicksBestGridPointAndBreaksTiesLow) {
  Rng rng(4);
  std::vector<ValidationInstance> set;
  for (int k = 0; k < 8; ++k) {
    ValidationInstance v{random_prediction(rng, 9), {}};
    v.ground_truth.signature = random_signature(rng, 9, 0.1);
    v.ground_truth.support = ImageSupport(9);
    set.push_back(v);
  }
  const ThresholdGrid grid{{0.7, 0.3, 0.5}, {0.4, 0.6}, {0.2, 0.1, 0.4}};
  const auto res = sweep_thresholds(set, grid);

  // Brute force over the sorted grid with the same staged objective.
  double best_s = -1, ts = 0;
  for (double s : {0.3, 0.5, 0.7}) {
    double sum = 0;
    for (const auto& v : set) sum += iou_segmentation(threshold_segmentation(v.prediction, s), v.ground_truth.segmentation());
    if (sum / 8 > best_s) best_s = sum / 8, ts = s;
  }
  double best_c = -1, tc = 0, td = 0;
  for (double c : {0.4, 0.6}) {
    for (double d : {0.1, 0.2, 0.4}) {
      double sum = 0;
      for (const auto& v : set) sum += iou_signature(filter_signature(v.prediction, {ts, c, d}), v.ground_truth.signature);
      if (sum / 8 > best_c) best_c = sum / 8, tc = c, td = d;
    }
  }
  EXPECT_EQ(res.config.tau_S, ts);
  EXPECT_EQ(res.config.tau_C, tc);
  EXPECT_EQ(res.config.tau_dist, td);
  EXPECT_DOUBLE_EQ(res.segmentation_iou, best_s);
  EXPECT_DOUBLE_EQ(res.signature_iou, best_c);

  // A constant objective resolves to the smallest value of every grid.
  auto flat = set;
  for (auto& v : flat) {
    v.prediction = empty_prediction(9);
    v.ground_truth.signature = ContactSignature(9);
  }
  const auto tie = sweep_thresholds(flat, grid);
  EXPECT_EQ(tie.config.tau_S, 0.3);
  EXPECT_EQ(tie.config.tau_C, 0.4);
  EXPECT_EQ(tie.config.tau_dist, 0.1);
}

TEST(Sweep, EmptyInputsAreParameterErrors) {
  EXPECT_THROW(sweep_thresholds({}, {{0.5}, {0.5}, {0.1}}), ParameterError);
  ValidationInstance v{empty_prediction(3), {}};
  v.ground_truth.signature = ContactSignature(3);
  v.ground_truth.support = ImageSupport(3);
  EXPECT_THROW(sweep_thresholds({v}, {{}, {0.5}, {0.1}}), ParameterError);
}
