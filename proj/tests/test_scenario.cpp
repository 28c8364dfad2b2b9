#include "selfcontact/io.hpp"
#include "selfcontact/scenario.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace selfcontact;
using namespace selfcontact::testing;

namespace {

double contact_error(const ScenarioBundle& b, const PoseParams& p) {
  const auto& model = b.body.model;
  const auto& map = b.body.regions.at(b.annotation.granularity());
  return *contact_distance_error(facet_geometry(pose_mesh(model, p), model.faces()), b.annotation.signature, map);
}

}  // namespace

TEST(Scenario, SameSeedGivesIdenticalBundle) {
  const auto a = generate_scenario({"arms-crossed", 7, 1.5});
  const auto b = generate_scenario({"arms-crossed", 7, 1.5});
  EXPECT_EQ(io::dump(io::encode(a.ground_truth)), io::dump(io::encode(b.ground_truth)));
  EXPECT_EQ(io::dump(io::encode(a.init)), io::dump(io::encode(b.init)));
  EXPECT_EQ(io::dump(io::encode(a.keypoints)), io::dump(io::encode(b.keypoints)));
  EXPECT_EQ(io::dump(io::encode(a.annotation)), io::dump(io::encode(b.annotation)));
  const auto c = generate_scenario({"arms-crossed", 8, 1.5});
  EXPECT_NE(io::dump(io::encode(a.init)), io::dump(io::encode(c.init)));
}

TEST(Scenario, GroundTruthIsInContact) {
  for (const auto& name : kScenarioNames) {
    const auto b = generate_scenario({name, 0, 1.0});
    EXPECT_FALSE(b.annotation.signature.contact_pairs().empty());
    EXPECT_LT(contact_error(b, b.ground_truth), 5.0) << name;
    EXPECT_GT(contact_error(b, b.init), 50.0) << name;
  }
}

TEST(Scenario, ClassesAndOcclusion) {
  EXPECT_EQ(generate_scenario({"hand-knee", 0, 0.0}).scenario_class, ScenarioClass::sitting_no_chair);
  const auto b = generate_scenario({"hand-chin", 0, 0.0});
  std::size_t hidden = 0;
  for (const auto& k : b.keypoints) hidden += !k.visible;
  EXPECT_EQ(hidden, 2u);  // one contacting arm: elbow and wrist
  for (int r = 0; r < b.annotation.granularity(); ++r) {
    if (const auto& s = b.annotation.support[r]) {
      EXPECT_GE(s->minCoeff(), 0.0);
      EXPECT_LE(s->maxCoeff(), 1.0);
    }
  }
}

TEST(Scenario, NoiseMatchesHalfNormalMean) {
  const double sigma = 2.0;
  double sum = 0.0;
  int n = 0;
  for (int seed = 0; n < 1000; ++seed) {
    const auto b = generate_scenario({"hands-together", static_cast<std::uint64_t>(seed), sigma});
    const auto joints = joint_positions(b.body.model, b.ground_truth);
    for (const auto& k : b.keypoints) {
      const Vec2 d = k.pixel - project(b.camera, joints[k.joint]);
      for (int c = 0; c < 2 && n < 1000; ++c, ++n) sum += std::abs(d[c]);
    }
  }
  const double expect = sigma * std::sqrt(2.0 / std::numbers::pi);
  EXPECT_NEAR(sum / n, expect, 0.2 * expect);
}

TEST(Scenario, ZeroNoiseGivesExactProjections) {
  const auto b = generate_scenario({"hand-knee", 2, 0.0});
  const auto joints = joint_positions(b.body.model, b.ground_truth);
  for (const auto& k : b.keypoints) EXPECT_EQ(k.pixel, project(b.camera, joints[k.joint]));
}

TEST(Scenario, NoiseDoesNotChangePoses) {
  const auto a = generate_scenario({"hand-chin", 3, 0.0});
  const auto b = generate_scenario({"hand-chin", 3, 4.0});
  EXPECT_EQ(a.ground_truth.flatten(), b.ground_truth.flatten());
  EXPECT_EQ(a.init.flatten(), b.init.flatten());
}

TEST(Scenario, InvalidSpecsAreParameterErrors) {
  EXPECT_THROW(generate_scenario({"hand-elbow", 0, 1.0}), ParameterError);
  EXPECT_THROW(generate_scenario({"hand-chin", 0, -1.0}), ParameterError);
}

TEST(Scenario, HandChinWithoutContactTermsStaysApart) {
  const auto b = generate_scenario({"hand-chin", 0, 1.0});
  const auto res = optimize(scenario_problem(b, false));
  const double c0 = contact_error(b, b.init);
  const double c1 = contact_error(b, res.params);
  EXPECT_NEAR(c1, c0, 0.2 * c0);
  EXPECT_GT(c1, 50.0);
}

TEST(Scenario, ShippedBundlesMatchTheGenerator) {
  const std::string root = std::string(SELFCONTACT_DATA_DIR) + "/scenarios/";
  for (const auto& name : kScenarioNames) {
    const auto b = generate_scenario({name, 0, 1.0});
    const auto dir = root + name + "/";
    EXPECT_EQ(io::read_text(dir + "gt.json"), io::dump(io::encode(b.ground_truth))) << name;
    EXPECT_EQ(io::read_text(dir + "init.json"), io::dump(io::encode(b.init))) << name;
    EXPECT_EQ(io::read_text(dir + "keypoints.json"), io::dump(io::encode(b.keypoints))) << name;
    EXPECT_EQ(io::read_text(dir + "annotation.json"), io::dump(io::encode(b.annotation))) << name;
    EXPECT_EQ(io::read_text(dir + "camera.json"), io::dump(io::encode(b.camera))) << name;
  }
}
