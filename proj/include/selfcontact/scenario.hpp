#pragma once

// Synthetic self-contact scenarios on the built-in humanoid. A scenario
// starts from a hand-placed approach pose, is solved for contact to obtain
// the ground truth, and is then perturbed (contacting limbs swung away) to
// obtain the initial pose. Keypoints are ground-truth joint projections with
// optional pixel noise; the elbows and wrists of contacting arms are marked
// occluded.

#include "selfcontact/contact.hpp"
#include "selfcontact/contact_geometry.hpp"
#include "selfcontact/evaluation.hpp"
#include "selfcontact/reconstruct.hpp"
#include "selfcontact/rng.hpp"
#include "selfcontact/synthetic_body.hpp"

#include <array>
#include <string>
#include <vector>

namespace selfcontact {

inline constexpr std::array<const char*, 4> kScenarioNames{"hand-chin", "hands-together", "arms-crossed",
                                                            "hand-knee"};
inline constexpr int kScenarioGranularity = 75;

struct ScenarioSpec {
  std::string name = "hand-chin";
  std::uint64_t seed = 0;
  double noise_px = 1.0;
};

// Weights the scenarios are tuned for. L_N is discontinuous where a
// nearest-neighbour match flips; at the library default weight those jumps
// trap the monotone line search in poses with a rolled palm.
inline TermWeights scenario_weights() {
  TermWeights w;
  w.N = 1e-2;
  return w;
}

struct ScenarioBundle {
  ScenarioSpec spec;
  ScenarioClass scenario_class = ScenarioClass::standing;
  SyntheticBody body;
  Camera camera;
  Annotation annotation;  // ground-truth signature and image support, 75 regions
  PoseParams ground_truth;
  PoseParams init;
  std::vector<Keypoint> keypoints;
  TermWeights weights = scenario_weights();
};

inline Camera default_scenario_camera() {
  Camera c;
  c.fx = c.fy = 500.0;
  c.cx = c.cy = 184.0;
  c.width = c.height = 368.0;
  c.rotation = Vec3(1.0, -1.0, -1.0).asDiagonal();
  const Vec3 center(0.0, 1.1, 3.2);
  c.translation = -c.rotation * center;
  return c;
}

namespace detail {

// Sets the local rotation of `joint` so that the bone towards `child` points
// at `target` (world), using the smallest rotation from its current
// direction; ancestors must already be placed.
inline void aim_bone(const BodyModel& model, PoseParams& params, const std::string& joint,
                     const std::string& child, const Vec3& target) {
  const auto j = model.find_joint(joint);
  const auto c = model.find_joint(child);
  params.joint_rotations[j] = Vec3::Zero();
  const auto st = pose(model, params);
  const Vec3 cur = (st.joints[c] - st.joints[j]).normalized();
  const Vec3 want = (target - st.joints[j]).normalized();
  const auto p = model.joints()[j].parent;
  const Mat3 parent = p < 0 ? Mat3::Identity() : st.world_rotations[p];
  const Mat3 q = Eigen::Quaterniond::FromTwoVectors(cur, want).toRotationMatrix();
  const Eigen::AngleAxisd local(Mat3(parent.transpose() * q * parent));
  params.joint_rotations[j] = local.angle() * local.axis();
}

// The hand has no child joint; aim it through a point along its rest axis.
inline void aim_hand(const BodyModel& model, PoseParams& params, const std::string& wrist, const Vec3& target) {
  const auto j = model.find_joint(wrist);
  params.joint_rotations[j] = Vec3::Zero();
  const auto st = pose(model, params);
  const auto p = model.joints()[j].parent;
  const Vec3 rest_dir = (model.rest_joints()[j] - model.rest_joints()[p]).normalized();
  const Vec3 cur = st.world_rotations[j] * rest_dir;
  const Vec3 want = (target - st.joints[j]).normalized();
  const Mat3 parent = st.world_rotations[p];
  const Mat3 q = Eigen::Quaterniond::FromTwoVectors(cur, want).toRotationMatrix();
  const Eigen::AngleAxisd local(Mat3(parent.transpose() * q * parent));
  params.joint_rotations[j] = local.angle() * local.axis();
}

struct ArmTargets {
  const char* side;  // "l" or "r"
  Vec3 elbow;
  Vec3 wrist;
  Vec3 fingers;
};

inline void place_arm(const BodyModel& model, PoseParams& params, const ArmTargets& a) {
  const std::string s(a.side);
  aim_bone(model, params, s + "_shoulder", s + "_elbow", a.elbow);
  aim_bone(model, params, s + "_elbow", s + "_wrist", a.wrist);
  aim_hand(model, params, s + "_wrist", a.fingers);
}

inline void set_rotation(const BodyModel& model, PoseParams& params, const std::string& joint, const Vec3& aa) {
  params.joint_rotations[model.find_joint(joint)] = aa;
}

struct ScenarioLayout {
  ScenarioClass scenario_class = ScenarioClass::standing;
  std::vector<std::pair<std::string, std::string>> contacts;  // 75-region names
  std::vector<ArmTargets> approach;
  std::vector<ArmTargets> relaxed;  // initial-pose arm placement
  std::vector<std::pair<std::string, Vec3>> fixed_rotations;
};

inline ScenarioLayout scenario_layout(const std::string& name) {
  ScenarioLayout L;
  if (name == "hand-chin") {
    L.contacts = {{"r_hand/palm/distal", "head/front_lower/chin"}};
    L.approach = {{"r", {-0.15, 1.18, 0.16}, {-0.05, 1.42, 0.18}, {0.0, 1.60, 0.11}}};
    L.relaxed = {{"r", {-0.30, 1.20, 0.10}, {-0.24, 1.22, 0.34}, {-0.18, 1.26, 0.50}}};
  } else if (name == "hands-together") {
    L.contacts = {{"l_hand/palm/distal", "r_hand/palm/distal"}};
    L.approach = {{"r", {-0.25, 1.22, 0.18}, {-0.06, 1.25, 0.35}, {0.06, 1.30, 0.42}},
                  {"l", {0.25, 1.22, 0.18}, {0.06, 1.25, 0.35}, {-0.06, 1.30, 0.42}}};
    L.relaxed = {{"r", {-0.30, 1.17, 0.06}, {-0.32, 1.05, 0.28}, {-0.32, 1.00, 0.48}},
                 {"l", {0.30, 1.17, 0.06}, {0.32, 1.05, 0.28}, {0.32, 1.00, 0.48}}};
  } else if (name == "arms-crossed") {
    L.contacts = {{"l_hand/palm/distal", "r_upper_arm/distal/front"},
                  {"r_hand/palm/distal", "l_upper_arm/distal/front"}};
    L.approach = {{"l", {0.14, 1.19, 0.20}, {-0.10, 1.26, 0.24}, {-0.26, 1.26, 0.10}},
                  {"r", {-0.14, 1.15, 0.18}, {0.10, 1.18, 0.32}, {0.26, 1.24, 0.10}}};
    L.relaxed = {{"l", {0.30, 1.17, 0.06}, {0.32, 1.05, 0.28}, {0.32, 1.00, 0.48}},
                 {"r", {-0.30, 1.17, 0.06}, {-0.32, 1.05, 0.28}, {-0.32, 1.00, 0.48}}};
  } else if (name == "hand-knee") {
    L.scenario_class = ScenarioClass::sitting_no_chair;
    L.contacts = {{"r_hand/palm/distal", "r_thigh/distal/front"}};
    L.fixed_rotations = {{"r_hip", {-1.4, 0.0, 0.0}}, {"r_knee", {1.4, 0.0, 0.0}}, {"spine", {0.25, 0.0, 0.0}}};
    L.approach = {{"r", {-0.20, 1.12, 0.22}, {-0.14, 0.98, 0.40}, {-0.09, 0.90, 0.45}}};
    L.relaxed = {{"r", {-0.34, 1.12, 0.00}, {-0.40, 0.90, 0.05}, {-0.42, 0.72, 0.08}}};
  } else {
    throw ParameterError("unknown scenario '" + name + "'");
  }
  return L;
}

inline Vec3 jitter(Rng& rng, const Vec3& p, double amount) {
  return p + amount * Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
}

}  // namespace detail

// Ground-truth solve settings: L_D, collision and a weak pull to the
// approach pose. No keypoints, and no L_N: its match jumps stall the solve a
// few millimetres short of contact.
inline ReconstructionProblem contact_solve_problem(const SyntheticBody& body, const ContactSignature& sig,
                                                   const PoseParams& start) {
  ReconstructionProblem p;
  p.model = body.model;
  p.regions = body.regions.at(sig.granularity());
  p.camera = default_scenario_camera();
  p.signature = sig;
  p.init = start;
  p.weights = TermWeights{};
  p.weights.S = 0.0;
  p.weights.N = 0.0;
  p.weights.shape = 1e4;  // pose only; otherwise the solve reaches contact by rescaling the body
  p.proxies = fit_collision_proxies(p.model, p.regions);
  p.settings.iterations = 400;
  p.settings.selection = FacetSelection::center();
  return p;
}

inline ScenarioBundle generate_scenario(const ScenarioSpec& spec) {
  const auto layout = detail::scenario_layout(spec.name);
  if (!(spec.noise_px >= 0.0)) throw ParameterError("noise must be non-negative");
  ScenarioBundle b;
  b.spec = spec;
  b.scenario_class = layout.scenario_class;
  b.body = make_synthetic_body();
  b.camera = default_scenario_camera();
  const auto& model = b.body.model;
  Rng rng(spec.seed);

  ContactSignature sig(kScenarioGranularity);
  for (const auto& [a, c] : layout.contacts) {
    sig.set(b.body.regions.find(kScenarioGranularity, a), b.body.regions.find(kScenarioGranularity, c),
            ContactState::contact);
  }

  PoseParams approach = PoseParams::identity(model.joint_count());
  for (const auto& [j, aa] : layout.fixed_rotations) detail::set_rotation(model, approach, j, aa);
  for (auto arm : layout.approach) {
    arm.elbow = detail::jitter(rng, arm.elbow, 0.02);
    arm.wrist = detail::jitter(rng, arm.wrist, 0.02);
    detail::place_arm(model, approach, arm);
  }
  b.ground_truth = optimize(contact_solve_problem(b.body, sig, approach)).params;

  b.init = b.ground_truth;
  for (auto arm : layout.relaxed) {
    arm.elbow = detail::jitter(rng, arm.elbow, 0.03);
    arm.wrist = detail::jitter(rng, arm.wrist, 0.03);
    arm.fingers = detail::jitter(rng, arm.fingers, 0.03);
    detail::place_arm(model, b.init, arm);
  }

  // Keypoints: every joint, contacting arms' elbows and wrists occluded.
  std::vector<JointId> occluded;
  for (const auto& arm : layout.approach) {
    const std::string s(arm.side);
    occluded.push_back(model.find_joint(s + "_elbow"));
    occluded.push_back(model.find_joint(s + "_wrist"));
  }
  const auto gt_joints = joint_positions(model, b.ground_truth);
  for (std::size_t j = 0; j < gt_joints.size(); ++j) {
    Keypoint k;
    k.joint = static_cast<JointId>(j);
    k.pixel = project(b.camera, gt_joints[j]);
    k.pixel += spec.noise_px * Vec2(rng.normal(), rng.normal());
    k.visible = std::find(occluded.begin(), occluded.end(), k.joint) == occluded.end();
    b.keypoints.push_back(k);
  }

  // Annotation: contact pairs plus projected region centers as image support.
  const auto& regions = b.body.regions.at(kScenarioGranularity);
  const auto facets = facet_geometry(pose_mesh(model, b.ground_truth), model.faces());
  b.annotation.signature = sig;
  b.annotation.support = ImageSupport(kScenarioGranularity);
  for (auto r : segmentation_from_signature(sig).regions_with(ContactState::contact)) {
    const Vec2 px = project(b.camera, region_center(regions, facets, r));
    const Vec2 n = b.camera.normalize(px);
    b.annotation.support.set(r, n.cwiseMax(0.0).cwiseMin(1.0));
  }
  return b;
}

// The reconstruction problem a scenario poses: fit from the initial pose to
// the noisy keypoints under the annotated signature.
inline ReconstructionProblem scenario_problem(const ScenarioBundle& b, bool use_contact_terms) {
  ReconstructionProblem p;
  p.model = b.body.model;
  p.regions = b.body.regions.at(b.annotation.granularity());
  p.camera = b.camera;
  p.keypoints = b.keypoints;
  p.signature = b.annotation.signature;
  p.init = b.init;
  p.weights = b.weights;
  p.proxies = fit_collision_proxies(p.model, p.regions);
  if (!use_contact_terms) {
    p.weights.D = 0.0;
    p.weights.N = 0.0;
  }
  return p;
}

// P, T, V and C of a fitted pose against the ground truth, in mm. C is 0
// when the signature has no contact pair.
inline MetricValues reconstruction_metrics(const BodyModel& model, const RegionMap& regions, const PoseParams& pred,
                                           const PoseParams& gt, const ContactSignature& signature) {
  const auto pv = pose_mesh(model, pred);
  const auto gv = pose_mesh(model, gt);
  const auto pj = joint_positions(model, pred);
  const auto gj = joint_positions(model, gt);
  const auto root = static_cast<std::size_t>(model.root());
  MetricValues m;
  m.P = mpjpe(pj, gj, model.root());
  m.T = translation_error(pj[root], gj[root]);
  m.V = vertex_error(pv, gv);
  m.C = contact_distance_error(facet_geometry(pv, model.faces()), signature, regions).value_or(0.0);
  return m;
}

}  // namespace selfcontact
