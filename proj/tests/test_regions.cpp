#include "selfcontact/io.hpp"
#include "selfcontact/regions.hpp"
#include "selfcontact/synthetic_body.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace selfcontact;
using namespace selfcontact::testing;

namespace {

// Region 0: facets {0,1,2}; region 1: facets {3..7}.
RegionMap small_map() { return {2, {0, 0, 0, 1, 1, 1, 1, 1}}; }

std::vector<Facet> facets_at(const Point3List& centers) {
  std::vector<Facet> out;
  for (const auto& c : centers) out.push_back({c, Vec3::UnitZ()});
  return out;
}

}  // namespace

TEST(RegionMap, RejectsInvalidAssignments) {
  EXPECT_THROW(RegionMap(0, {}), ParameterError);
  EXPECT_THROW(RegionMap(2, {0, 2}), ParameterError);
  EXPECT_THROW(RegionMap(2, {0, -1}), ParameterError);
  EXPECT_THROW(RegionMap(3, {0, 1, 1}), ParameterError);  // region 2 owns nothing
}

TEST(RegionFacets, AllModeReturnsEveryMember) {
  const auto m = small_map();
  EXPECT_EQ(region_facets(m, 0, FacetSelection::all()), (std::vector<FacetId>{0, 1, 2}));
}

TEST(RegionFacets, SubsetTakesEveryKthSortedFacet) {
  const auto m = small_map();
  EXPECT_EQ(region_facets(m, 1, FacetSelection::subset(2)), (std::vector<FacetId>{3, 5, 7}));
  EXPECT_EQ(region_facets(m, 1, FacetSelection::subset(1)), region_facets(m, 1, FacetSelection::all()));
  EXPECT_THROW(FacetSelection::subset(0), ParameterError);
}

TEST(RegionFacets, CenterPicksFacetNearestCentroid) {
  const auto m = small_map();
  const auto f = facets_at({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}});
  EXPECT_EQ(region_facets(m, 0, FacetSelection::center(), f), (std::vector<FacetId>{1}));
  // All five coincide with the centroid: lowest id wins.
  EXPECT_EQ(region_facets(m, 1, FacetSelection::center(), f), (std::vector<FacetId>{3}));
}

TEST(RegionFacets, ModesAreSubsetsOfAll) {
  const auto body = make_synthetic_body();
  const auto& m = body.regions.at(75);
  const auto f = facet_geometry(body.model.template_vertices(), body.model.faces());
  for (RegionId r = 0; r < 75; ++r) {
    const auto all = region_facets(m, r, FacetSelection::all());
    for (auto mode : {FacetSelection::center(), FacetSelection::subset(3)}) {
      for (auto id : region_facets(m, r, mode, f)) EXPECT_TRUE(std::binary_search(all.begin(), all.end(), id));
    }
    EXPECT_EQ(region_facets(m, r, FacetSelection::center(), f).size(), 1u);
  }
}

TEST(RegionFacets, InvalidRegionIsParameterError) {
  const auto m = small_map();
  EXPECT_THROW(region_facets(m, 2, FacetSelection::all()), ParameterError);
  EXPECT_THROW(region_facets(m, -1, FacetSelection::all()), ParameterError);
  EXPECT_THROW(region_center(m, facets_at(Point3List(8, Vec3::Zero())), 5), ParameterError);
}

TEST(RegionCenter, SingleAndPairAndRandom) {
  const RegionMap one(2, {0, 1, 1});
  const auto f = facets_at({{1, 2, 3}, {0, 0, 0}, {2, 4, -6}});
  EXPECT_EQ(region_center(one, f, 0), Vec3(1, 2, 3));
  EXPECT_EQ(region_center(one, f, 1), Vec3(1, 2, -3));

  const auto body = make_synthetic_body();
  const auto& m = body.regions.at(37);
  Rng rng(9);
  const auto posed = pose_mesh(body.model, random_params(rng, body.model.joint_count()));
  const auto pf = facet_geometry(posed, body.model.faces());
  for (RegionId r = 0; r < m.granularity(); ++r) {
    long double sx = 0, sy = 0, sz = 0;
    int n = 0;
    for (std::size_t i = 0; i < m.facet_count(); ++i) {
      if (m.region_of(static_cast<FacetId>(i)) != r) continue;
      sx += pf[i].center.x();
      sy += pf[i].center.y();
      sz += pf[i].center.z();
      ++n;
    }
    const Vec3 expect(static_cast<double>(sx / n), static_cast<double>(sy / n), static_cast<double>(sz / n));
    EXPECT_LT((region_center(m, pf, r) - expect).norm(), 1e-12);
  }
}

TEST(Coarsen, IdentityMapKeepsRegionMap) {
  const auto m = small_map();
  EXPECT_EQ(coarsen_region_map(m, CoarsenMap::identity(2)), m);
}

TEST(Coarsen, FourToTwoRelabels) {
  const RegionMap m(4, {0, 1, 2, 3, 3, 2, 1, 0});
  const CoarsenMap c(4, 2, {0, 0, 1, 1});
  EXPECT_EQ(coarsen_region_map(m, c), RegionMap(2, {0, 0, 1, 1, 1, 1, 0, 0}));
}

TEST(Coarsen, GranularityMismatchIsParameterError) {
  EXPECT_THROW(coarsen_region_map(small_map(), CoarsenMap::identity(3)), ParameterError);
  EXPECT_THROW(compose(CoarsenMap::identity(3), CoarsenMap::identity(4)), ParameterError);
}

TEST(CoarsenMap, RejectsNonSurjectiveOrPartialMaps) {
  EXPECT_THROW(CoarsenMap(3, 2, {0, 0, 0}), ParameterError);
  EXPECT_THROW(CoarsenMap(3, 2, {0, 1}), ParameterError);
  EXPECT_THROW(CoarsenMap(3, 2, {0, 1, 2}), ParameterError);
}

TEST(Hierarchy, ComposedStepsEqualDirectMaps) {
  const auto body = make_synthetic_body();
  const auto& h = body.regions;
  const auto step = [&](int i) { return h.steps[static_cast<std::size_t>(i)]; };
  const auto direct = compose(compose(step(0), step(1)), step(2));
  // Associativity of the chain.
  EXPECT_EQ(direct, compose(step(0), compose(step(1), step(2))));
  EXPECT_EQ(direct, h.coarsen(75, 9));
  for (int i = 0; i < 3; ++i) {
    const int fine = RegionHierarchy::kGranularities[i];
    const int coarse = RegionHierarchy::kGranularities[i + 1];
    EXPECT_EQ(coarsen_region_map(h.at(fine), step(i)), h.at(coarse));
  }
  EXPECT_THROW(h.coarsen(9, 75), ParameterError);
}

TEST(Hierarchy, ShippedFilesMatchTheGenerator) {
  const std::string dir = SELFCONTACT_DATA_DIR;
  const auto body = make_synthetic_body();
  for (int g : RegionHierarchy::kGranularities) {
    const auto m = io::load(dir + "/regions_" + std::to_string(g) + ".json", io::decode_region_map);
    EXPECT_EQ(m, body.regions.at(g)) << g;
    if (g != 75) {
      const auto c = io::load(dir + "/coarsen_75_to_" + std::to_string(g) + ".json", io::decode_coarsen_map);
      EXPECT_EQ(c, body.regions.coarsen(75, g));
      // Shipped direct map equals the step-by-step composition.
      CoarsenMap chain = CoarsenMap::identity(75);
      for (int i = 0; RegionHierarchy::kGranularities[i] != g; ++i) chain = compose(chain, body.regions.steps[i]);
      EXPECT_EQ(c, chain);
    }
  }
}

TEST(Hierarchy, EveryRegionIsNamedAndNonEmpty) {
  const auto body = make_synthetic_body();
  for (int g : RegionHierarchy::kGranularities) {
    EXPECT_EQ(body.regions.names_at(g).size(), static_cast<std::size_t>(g));
    EXPECT_EQ(body.regions.at(g).facet_count(), body.model.face_count());
  }
  EXPECT_NO_THROW(body.regions.find(75, "head/front_lower/chin"));
  EXPECT_THROW(body.regions.find(75, "tail"), ParameterError);
}
