#include "selfcontact/contact.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <map>
#include <set>

using namespace selfcontact;
using namespace selfcontact::testing;

namespace {

using PairSet = std::set<std::pair<int, int>>;

// Naive set-based IoU with symmetric masking, written independently of the
// library's state-vector implementation.
double naive_iou(const PairSet& a, const PairSet& b, const PairSet& masked) {
  PairSet ia, ib;
  for (auto p : a) if (!masked.count(p)) ia.insert(p);
  for (auto p : b) if (!masked.count(p)) ib.insert(p);
  if (ia.empty() && ib.empty()) return 1.0;
  std::size_t inter = 0;
  for (auto p : ia) inter += ib.count(p);
  return static_cast<double>(inter) / static_cast<double>(ia.size() + ib.size() - inter);
}

PairSet pairs_in(const ContactSignature& s, ContactState st) {
  PairSet out;
  for (int a = 0; a < s.granularity(); ++a) {
    for (int b = a + 1; b < s.granularity(); ++b) {
      if (s(a, b) == st) out.insert({a, b});
    }
  }
  return out;
}

}  // namespace

TEST(Signature, SymmetricByStorage) {
  ContactSignature s(5);
  s.set(3, 1, ContactState::contact);
  EXPECT_EQ(s(1, 3), ContactState::contact);
  EXPECT_EQ(s(3, 1), ContactState::contact);
  EXPECT_THROW(s.set(2, 2, ContactState::contact), ParameterError);
  EXPECT_THROW(s(0, 5), ParameterError);
}

TEST(Signature, PairIndexIsABijection) {
  for (int n : {2, 3, 9, 17}) {
    std::vector<int> hit(pair_count(n), 0);
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        ++hit.at(pair_index(n, a, b));
        EXPECT_EQ(pair_index(n, a, b), pair_index(n, b, a));
      }
    }
    for (int h : hit) EXPECT_EQ(h, 1);
  }
}

TEST(Segmentation, EmptySignatureIsAllNoContact) {
  const auto seg = segmentation_from_signature(ContactSignature(9));
  EXPECT_EQ(seg.regions_with(ContactState::no_contact).size(), 9u);
}

TEST(Segmentation, SinglePairMarksBothRegions) {
  ContactSignature s(10);
  s.set(3, 7, ContactState::contact);
  const auto seg = segmentation_from_signature(s);
  EXPECT_EQ(seg.regions_with(ContactState::contact), (std::vector<RegionId>{3, 7}));
  EXPECT_EQ(seg.regions_with(ContactState::no_contact).size(), 8u);
}

TEST(Segmentation, MaskedOnlyPairMarksMasked) {
  ContactSignature s(10);
  s.set(3, 7, ContactState::masked);
  const auto seg = segmentation_from_signature(s);
  EXPECT_EQ(seg.regions_with(ContactState::masked), (std::vector<RegionId>{3, 7}));
  s.set(3, 4, ContactState::contact);
  const auto seg2 = segmentation_from_signature(s);
  EXPECT_EQ(seg2[3], ContactState::contact);
  EXPECT_EQ(seg2[7], ContactState::masked);
}

TEST(CoarsenSignature, IdentityIsUnchanged) {
  Rng rng(1);
  const auto s = random_signature(rng, 9, 0.2, 0.1);
  EXPECT_EQ(coarsen_signature(s, CoarsenMap::identity(9)), s);
}

TEST(CoarsenSignature, WithinRegionContactIsDropped) {
  ContactSignature s(4);
  s.set(1, 2, ContactState::contact);
  const auto c = coarsen_signature(s, CoarsenMap(4, 2, {0, 1, 1, 0}));
  EXPECT_TRUE(c.contact_pairs().empty());
  EXPECT_TRUE(c.pairs_with(ContactState::masked).empty());
}

TEST(CoarsenSignature, ContactBeatsMasked) {
  ContactSignature s(4);
  s.set(0, 2, ContactState::masked);
  s.set(1, 3, ContactState::contact);
  EXPECT_EQ(coarsen_signature(s, CoarsenMap(4, 2, {0, 0, 1, 1}))(0, 1), ContactState::contact);
  ContactSignature m(4);
  m.set(0, 2, ContactState::masked);
  EXPECT_EQ(coarsen_signature(m, CoarsenMap(4, 2, {0, 0, 1, 1}))(0, 1), ContactState::masked);
}

TEST(CoarsenSignature, MatchesExhaustivePairMapping) {
  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const auto s = random_signature(rng, 75, 0.01, 0.01);
    const auto cmap = random_coarsen_map(rng, 75, 9);
    std::map<std::pair<int, int>, int> best;  // 2 contact, 1 masked
    for (int a = 0; a < 75; ++a) {
      for (int b = a + 1; b < 75; ++b) {
        int ca = cmap(a), cb = cmap(b);
        if (ca == cb || s(a, b) == ContactState::no_contact) continue;
        if (ca > cb) std::swap(ca, cb);
        const int v = s(a, b) == ContactState::contact ? 2 : 1;
        best[{ca, cb}] = std::max(best[{ca, cb}], v);
      }
    }
    const auto c = coarsen_signature(s, cmap);
    for (int a = 0; a < 9; ++a) {
      for (int b = a + 1; b < 9; ++b) {
        const int v = best.count({a, b}) ? best[{a, b}] : 0;
        const auto expect = v == 2 ? ContactState::contact : v == 1 ? ContactState::masked : ContactState::no_contact;
        EXPECT_EQ(c(a, b), expect);
      }
    }
  }
}

TEST(CoarsenSignature, NeverInventsContact) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = random_signature(rng, 17, 0.03, 0.05);
    const auto cmap = random_coarsen_map(rng, 17, 5);
    const auto c = coarsen_signature(s, cmap);
    for (const auto& [a, b] : c.contact_pairs()) {
      bool found = false;
      for (const auto& [x, y] : s.contact_pairs()) {
        found |= (cmap(x) == a && cmap(y) == b) || (cmap(x) == b && cmap(y) == a);
      }
      EXPECT_TRUE(found);
    }
  }
}

// Deriving the segmentation before or after coarsening agrees on which coarse
// regions are in contact, as long as no contact falls inside a coarse region.
TEST(CoarsenSignature, DeriveAndCoarsenCommute) {
  Rng rng(4);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto cmap = random_coarsen_map(rng, 9, 4);
    auto s = random_signature(rng, 9, 0.1);
    for (const auto& [a, b] : s.contact_pairs()) {
      if (cmap(a) == cmap(b)) s.set(a, b, ContactState::no_contact);
    }
    const auto before = coarsen_segmentation(segmentation_from_signature(s), cmap);
    const auto after = segmentation_from_signature(coarsen_signature(s, cmap));
    EXPECT_EQ(before.regions_with(ContactState::contact), after.regions_with(ContactState::contact));
    ++checked;
  }
  EXPECT_EQ(checked, 1000);
}

TEST(CoarsenSignature, GranularityMismatchIsParameterError) {
  EXPECT_THROW(coarsen_signature(ContactSignature(9), CoarsenMap::identity(8)), ParameterError);
}

TEST(IouSignature, Examples) {
  ContactSignature a(9), b(9);
  a.set(1, 2, ContactState::contact);
  a.set(3, 4, ContactState::contact);
  EXPECT_DOUBLE_EQ(iou_signature(a, a), 1.0);
  b.set(1, 2, ContactState::contact);
  EXPECT_DOUBLE_EQ(iou_signature(a, b), 0.5);
  ContactSignature c(9);
  c.set(5, 6, ContactState::contact);
  EXPECT_DOUBLE_EQ(iou_signature(a, c), 0.0);
  EXPECT_DOUBLE_EQ(iou_signature(ContactSignature(9), ContactSignature(9)), 1.0);
  EXPECT_THROW(iou_signature(ContactSignature(9), ContactSignature(8)), ParameterError);
}

TEST(IouSignature, MaskedInEitherInputIsExcluded) {
  ContactSignature a(9), b(9);
  a.set(1, 2, ContactState::contact);
  a.set(3, 4, ContactState::contact);
  b.set(1, 2, ContactState::contact);
  b.set(3, 4, ContactState::masked);
  EXPECT_DOUBLE_EQ(iou_signature(a, b), 1.0);
  EXPECT_DOUBLE_EQ(iou_signature(b, a), 1.0);
}

TEST(IouSignature, MatchesNaiveSetsAndIsSymmetric) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = trial % 2 ? 9 : 17;
    const auto a = random_signature(rng, n, 0.1, 0.05);
    const auto b = random_signature(rng, n, 0.1, 0.05);
    PairSet masked = pairs_in(a, ContactState::masked);
    for (auto p : pairs_in(b, ContactState::masked)) masked.insert(p);
    const double expect = naive_iou(pairs_in(a, ContactState::contact), pairs_in(b, ContactState::contact), masked);
    EXPECT_EQ(iou_signature(a, b), expect);
    EXPECT_EQ(iou_signature(b, a), expect);
  }
}

TEST(IouSegmentation, Examples) {
  ContactSegmentation a(9), b(9);
  for (int r : {1, 2, 3}) a.set(r, ContactState::contact);
  for (int r : {2, 3, 4}) b.set(r, ContactState::contact);
  EXPECT_DOUBLE_EQ(iou_segmentation(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou_segmentation(a, b), 0.5);
  b.set(1, ContactState::masked);  // region 1 leaves both sets: {2,3} vs {2,3,4}
  EXPECT_DOUBLE_EQ(iou_segmentation(a, b), 2.0 / 3.0);
}

TEST(ContactStats, OneAndTwoCopies) {
  ContactSignature s(9);
  s.set(1, 2, ContactState::contact);
  auto st = contact_stats({s});
  EXPECT_EQ(st.region_frequency[1], 1u);
  EXPECT_EQ(st.region_frequency[2], 1u);
  EXPECT_EQ(st.region_frequency[0], 0u);
  EXPECT_EQ(st.pair_counts(1, 2), 1u);
  st = contact_stats({s, s});
  EXPECT_EQ(st.region_frequency[1], 2u);
  EXPECT_EQ(st.pair_counts(2, 1), 2u);
}

TEST(ContactStats, MatchesNaiveTally) {
  Rng rng(6);
  std::vector<ContactSignature> batch;
  for (int i = 0; i < 40; ++i) batch.push_back(random_signature(rng, 17, 0.05, 0.05));
  std::vector<std::size_t> freq(17, 0);
  std::map<std::pair<int, int>, std::size_t> pairs;
  for (const auto& s : batch) {
    std::set<int> touched;
    for (auto [a, b] : pairs_in(s, ContactState::contact)) {
      ++pairs[{a, b}];
      touched.insert(a);
      touched.insert(b);
    }
    for (int r : touched) ++freq[r];
  }
  const auto st = contact_stats(batch);
  EXPECT_EQ(st.region_frequency, freq);
  for (int a = 0; a < 17; ++a) {
    for (int b = a + 1; b < 17; ++b) {
      const std::size_t expect = pairs.count({a, b}) ? pairs[{a, b}] : 0u;
      EXPECT_EQ(st.pair_counts(a, b), expect);
    }
  }
}

TEST(ContactStats, MixedGranularitiesRejected) {
  EXPECT_THROW(contact_stats({ContactSignature(9), ContactSignature(17)}), ParameterError);
}

TEST(SupportClicks, Examples) {
  auto s = merge_support_clicks({{{0.2, 0.4}}, {}});
  EXPECT_EQ(*s[0], Vec2(0.2, 0.4));
  EXPECT_FALSE(s[1]);
  s = merge_support_clicks({{{0.0, 0.0}, {1.0, 1.0}}});
  EXPECT_EQ(*s[0], Vec2(0.5, 0.5));
  EXPECT_THROW(merge_support_clicks({{{1.2, 0.0}}}), ParameterError);
}

TEST(SupportClicks, MeanOfRandomClicks) {
  Rng rng(7);
  for (int k = 1; k < 20; ++k) {
    Point2List clicks;
    double sx = 0, sy = 0;
    for (int i = 0; i < k; ++i) {
      clicks.emplace_back(rng.uniform(), rng.uniform());
      sx += clicks.back().x();
      sy += clicks.back().y();
    }
    const auto s = merge_support_clicks({clicks});
    EXPECT_NEAR(s[0]->x(), sx / k, 1e-15);
    EXPECT_NEAR(s[0]->y(), sy / k, 1e-15);
  }
}

TEST(AnnotationTest, SupportOnlyOnContactRegions) {
  Annotation a;
  a.signature = ContactSignature(9);
  a.signature.set(1, 2, ContactState::contact);
  a.support = ImageSupport(9);
  a.support.set(1, {0.3, 0.3});
  EXPECT_NO_THROW(a.validate());
  a.support.set(4, {0.3, 0.3});
  EXPECT_THROW(a.validate(), ParameterError);
}

TEST(AnnotationTest, CoarsenAveragesSupportAndMapsMasks) {
  Annotation a;
  a.signature = ContactSignature(4);
  a.signature.set(0, 2, ContactState::contact);
  a.signature.set(1, 3, ContactState::contact);
  a.support = ImageSupport(4);
  a.support.set(0, {0.2, 0.2});
  a.support.set(1, {0.4, 0.6});
  a.support.set(2, {0.8, 0.8});
  a.masked_regions = {3};
  const auto c = coarsen_annotation(a, CoarsenMap(4, 2, {0, 0, 1, 1}));
  EXPECT_EQ(c.signature(0, 1), ContactState::contact);
  EXPECT_LT((*c.support[0] - Vec2(0.3, 0.4)).norm(), 1e-15);
  EXPECT_EQ(*c.support[1], Vec2(0.8, 0.8));
  EXPECT_EQ(c.masked_regions, (std::vector<RegionId>{1}));
}

TEST(PrecisionRecallTest, CountsSkipMasked) {
  ContactSignature pred(9), gt(9);
  pred.set(1, 2, ContactState::contact);
  pred.set(3, 4, ContactState::contact);
  pred.set(5, 6, ContactState::contact);
  gt.set(1, 2, ContactState::contact);
  gt.set(7, 8, ContactState::contact);
  gt.set(5, 6, ContactState::masked);
  const auto pr = precision_recall(pred, gt);
  EXPECT_EQ(pr.true_positives, 1u);
  EXPECT_EQ(pr.false_positives, 1u);
  EXPECT_EQ(pr.false_negatives, 1u);
  EXPECT_DOUBLE_EQ(pr.precision(), 0.5);
  EXPECT_DOUBLE_EQ(pr.recall(), 0.5);
  EXPECT_DOUBLE_EQ(precision_recall(ContactSignature(9), ContactSignature(9)).precision(), 1.0);
}
