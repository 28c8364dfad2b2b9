#pragma once

// Low-poly humanoid used for tests and synthetic scenarios: 20 joints, each
// owning one rigidly skinned lofted tube (boxy torso, spherical head, limb
// capsules, flat hands and feet), about 1.9k facets. Each joint's regressor
// row averages the ring of its own tube that is centered on the joint, so
// regressed joints coincide with forward-kinematics joints in every pose.
//
// Surface regions come in four granularities (75, 37, 17, 9). Region keys
// are "part/zone/subzone" paths; coarser levels drop trailing components,
// and the 17 -> 9 step groups parts into limbs.

#include "selfcontact/body_model.hpp"
#include "selfcontact/regions.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

namespace selfcontact {

struct RegionHierarchy {
  // Index 0..3 -> granularity 75, 37, 17, 9.
  std::array<RegionMap, 4> maps;
  std::array<std::vector<std::string>, 4> names;
  // 75->37, 37->17, 17->9.
  std::array<CoarsenMap, 3> steps;

  static constexpr std::array<int, 4> kGranularities{75, 37, 17, 9};

  const RegionMap& at(int granularity) const { return maps[level(granularity)]; }
  const std::vector<std::string>& names_at(int granularity) const { return names[level(granularity)]; }

  RegionId find(int granularity, const std::string& name) const {
    const auto& n = names_at(granularity);
    for (std::size_t i = 0; i < n.size(); ++i) {
      if (n[i] == name) return static_cast<RegionId>(i);
    }
    throw ParameterError("unknown region '" + name + "'");
  }

  // Coarsening between any two shipped granularities (fine >= coarse).
  CoarsenMap coarsen(int fine, int coarse) const {
    const int a = level(fine);
    const int b = level(coarse);
    if (a > b) throw ParameterError("cannot coarsen to a finer granularity");
    CoarsenMap m = CoarsenMap::identity(fine);
    for (int k = a; k < b; ++k) m = compose(m, steps[k]);
    return m;
  }

  static int level(int granularity) {
    for (int i = 0; i < 4; ++i) {
      if (kGranularities[i] == granularity) return i;
    }
    throw ParameterError("no shipped region map for granularity " + std::to_string(granularity));
  }
};

struct SyntheticBody {
  BodyModel model;
  RegionHierarchy regions;
  std::vector<JointId> facet_segment;  // owning joint of each facet
};

namespace detail {

struct Station {
  double t;  // along the axis from the joint, meters
  double a;  // half extent along u
  double b;  // half extent along w
};

struct SegmentSpec {
  std::string joint;
  Vec3 axis;
  Vec3 u;
  int around;
  double exponent;  // 2: ellipse, larger: boxier
  std::vector<Station> stations;
  double length;  // used to normalize the axial coordinate for region rules
};

struct MeshBuilder {
  Point3List vertices;
  std::vector<Face> faces;
  std::vector<std::vector<SkinWeight>> weights;
  std::vector<JointId> face_joint;
  std::vector<std::vector<RegressorWeight>> regressor;

  void add_segment(const SegmentSpec& s, JointId joint, const Vec3& origin) {
    const Vec3 d = s.axis.normalized();
    const Vec3 u = s.u.normalized();
    const Vec3 w = d.cross(u);
    const int n = s.around;
    const auto first = static_cast<std::int32_t>(vertices.size());
    for (const auto& st : s.stations) {
      const auto ring_start = static_cast<std::int32_t>(vertices.size());
      for (int k = 0; k < n; ++k) {
        const double phi = 2.0 * std::numbers::pi * (k + 0.5) / n;
        const double c = std::cos(phi);
        const double sn = std::sin(phi);
        const double pe = 2.0 / s.exponent;
        const double x = st.a * std::copysign(std::pow(std::abs(c), pe), c);
        const double y = st.b * std::copysign(std::pow(std::abs(sn), pe), sn);
        vertices.push_back(origin + st.t * d + x * u + y * w);
        weights.push_back({{joint, 1.0}});
      }
      if (st.t == 0.0) {
        for (int k = 0; k < n; ++k) {
          regressor[joint].push_back({ring_start + k, 1.0 / n});
        }
      }
    }
    const auto rings = static_cast<std::int32_t>(s.stations.size());
    auto idx = [&](int ring, int k) { return first + ring * n + ((k % n) + n) % n; };
    for (int r = 0; r + 1 < rings; ++r) {
      for (int k = 0; k < n; ++k) {
        add_face({idx(r, k), idx(r + 1, k + 1), idx(r + 1, k)}, joint);
        add_face({idx(r, k), idx(r, k + 1), idx(r + 1, k + 1)}, joint);
      }
    }
    // Caps, fanned from a vertex on the axis.
    const auto start_pole = static_cast<std::int32_t>(vertices.size());
    vertices.push_back(origin + s.stations.front().t * d);
    weights.push_back({{joint, 1.0}});
    const auto end_pole = static_cast<std::int32_t>(vertices.size());
    vertices.push_back(origin + s.stations.back().t * d);
    weights.push_back({{joint, 1.0}});
    for (int k = 0; k < n; ++k) {
      add_face({start_pole, idx(0, k + 1), idx(0, k)}, joint);
      add_face({end_pole, idx(rings - 1, k), idx(rings - 1, k + 1)}, joint);
    }
  }

  void add_face(Face f, JointId joint) {
    faces.push_back(f);
    face_joint.push_back(joint);
  }
};

struct JointSpec {
  const char* name;
  const char* parent;
  Vec3 position;
};

inline std::vector<JointSpec> humanoid_joints() {
  return {
      {"pelvis", "", {0.0, 0.95, 0.0}},
      {"spine", "pelvis", {0.0, 1.05, 0.0}},
      {"chest", "spine", {0.0, 1.24, 0.0}},
      {"neck", "chest", {0.0, 1.47, 0.0}},
      {"head", "neck", {0.0, 1.57, 0.0}},
      {"nose", "head", {0.0, 1.68, 0.095}},
      {"l_collar", "chest", {0.05, 1.42, 0.0}},
      {"l_shoulder", "l_collar", {0.19, 1.42, 0.0}},
      {"l_elbow", "l_shoulder", {0.47, 1.42, 0.0}},
      {"l_wrist", "l_elbow", {0.72, 1.42, 0.0}},
      {"r_collar", "chest", {-0.05, 1.42, 0.0}},
      {"r_shoulder", "r_collar", {-0.19, 1.42, 0.0}},
      {"r_elbow", "r_shoulder", {-0.47, 1.42, 0.0}},
      {"r_wrist", "r_elbow", {-0.72, 1.42, 0.0}},
      {"l_hip", "pelvis", {0.09, 0.90, 0.0}},
      {"l_knee", "l_hip", {0.09, 0.50, 0.0}},
      {"l_ankle", "l_knee", {0.09, 0.09, 0.0}},
      {"r_hip", "pelvis", {-0.09, 0.90, 0.0}},
      {"r_knee", "r_hip", {-0.09, 0.50, 0.0}},
      {"r_ankle", "r_knee", {-0.09, 0.09, 0.0}},
  };
}

inline std::vector<SegmentSpec> humanoid_segments() {
  const Vec3 x = Vec3::UnitX();
  const Vec3 y = Vec3::UnitY();
  const Vec3 z = Vec3::UnitZ();
  std::vector<SegmentSpec> s;
  s.push_back({"pelvis", y, x, 16, 4.0, {{-0.09, 0.13, 0.09}, {0.0, 0.16, 0.10}, {0.08, 0.15, 0.095}}, 0.17});
  s.push_back({"spine", y, x, 16, 4.0,
               {{-0.02, 0.145, 0.09}, {0.0, 0.145, 0.09}, {0.10, 0.145, 0.09}, {0.19, 0.15, 0.095}}, 0.19});
  s.push_back({"chest", y, x, 16, 4.0,
               {{-0.01, 0.15, 0.095}, {0.0, 0.155, 0.10}, {0.10, 0.175, 0.11}, {0.19, 0.17, 0.10},
                {0.22, 0.10, 0.07}},
               0.22});
  s.push_back({"neck", y, x, 10, 2.0, {{-0.03, 0.05, 0.05}, {0.0, 0.05, 0.05}, {0.10, 0.045, 0.045}}, 0.10});
  {
    // Ellipsoidal head centered 0.11 m above the neck-head joint.
    SegmentSpec head{"head", y, x, 16, 2.0, {{0.0, 0.04, 0.04}}, 0.22};
    for (double lat : {-60.0, -40.0, -20.0, 0.0, 20.0, 40.0, 60.0, 75.0}) {
      const double r = lat * std::numbers::pi / 180.0;
      head.stations.push_back({0.11 + 0.11 * std::sin(r), 0.09 * std::cos(r), 0.105 * std::cos(r)});
    }
    s.push_back(head);
  }
  s.push_back({"nose", z, x, 8, 2.0, {{0.0, 0.012, 0.015}, {0.03, 0.006, 0.008}}, 0.03});
  for (const char* side : {"l", "r"}) {
    const double sx = side[0] == 'l' ? 1.0 : -1.0;
    const std::string p(side);
    s.push_back({p + "_collar", sx * x, y, 10, 2.0, {{0.0, 0.05, 0.05}, {0.14, 0.055, 0.055}}, 0.14});
    s.push_back({p + "_shoulder", sx * x, y, 10, 2.0,
                 {{-0.03, 0.04, 0.04}, {0.0, 0.05, 0.05}, {0.14, 0.045, 0.045}, {0.28, 0.04, 0.04}}, 0.28});
    s.push_back({p + "_elbow", sx * x, y, 10, 2.0,
                 {{-0.02, 0.035, 0.035}, {0.0, 0.04, 0.04}, {0.12, 0.038, 0.038}, {0.25, 0.03, 0.03}}, 0.25});
    s.push_back({p + "_wrist", sx * x, y, 12, 4.0,
                 {{0.0, 0.02, 0.03}, {0.03, 0.022, 0.045}, {0.15, 0.018, 0.045}, {0.19, 0.01, 0.03}}, 0.19});
  }
  for (const char* side : {"l", "r"}) {
    const std::string p(side);
    s.push_back({p + "_hip", -y, x, 12, 2.0,
                 {{-0.02, 0.06, 0.06}, {0.0, 0.075, 0.075}, {0.20, 0.065, 0.065}, {0.40, 0.05, 0.05}}, 0.40});
    s.push_back({p + "_knee", -y, x, 12, 2.0, {{0.0, 0.05, 0.05}, {0.20, 0.045, 0.045}, {0.41, 0.035, 0.035}}, 0.41});
    s.push_back({p + "_ankle", z, y, 10, 4.0,
                 {{-0.05, 0.03, 0.04}, {0.0, 0.045, 0.045}, {0.15, 0.03, 0.045}, {0.20, 0.02, 0.04}}, 0.20});
  }
  return s;
}

// Region key of a facet from its rest center and owning segment.
inline std::string classify_facet(const std::string& joint, const Vec3& c, const Vec3& origin,
                                  const SegmentSpec& seg) {
  const double s = (c - origin).dot(seg.axis.normalized()) / seg.length;
  const bool front = c.z() > origin.z();
  const bool left = c.x() >= 0.0;
  const char* lr = left ? "left" : "right";
  auto fb = [&] { return front ? "front" : "back"; };
  if (joint == "head") {
    const bool lower = c.y() < 1.655;
    if (front && lower) {
      if (std::abs(c.x()) <= 0.035) return "head/front_lower/chin";
      return std::string("head/front_lower/") + lr;
    }
    return std::string("head/") + fb() + (lower ? "_lower/" : "_upper/") + lr;
  }
  if (joint == "nose") return std::string("head/front_upper/") + lr;
  if (joint == "neck") return std::string("neck/") + fb() + "/" + lr;
  if (joint == "chest") {
    return std::string("chest/") + fb() + "_" + lr + (c.y() > 1.36 ? "/upper" : "/lower");
  }
  if (joint == "spine") {
    if (!front) return std::string("abdomen/back/") + lr;
    return std::string("abdomen/front_") + lr + (c.y() > 1.145 ? "/upper" : "/lower");
  }
  if (joint == "pelvis") return std::string("pelvis/") + fb() + "/" + lr;

  const std::string side = joint.substr(0, 2);  // "l_" or "r_"
  const std::string part = joint.substr(2);
  if (part == "collar") return side + "upper_arm/proximal/collar";
  if (part == "shoulder") {
    if (s < 0.5) return side + "upper_arm/proximal/arm";
    return side + "upper_arm/distal/" + fb();
  }
  if (part == "elbow") return side + "forearm/" + (s < 0.5 ? "proximal/" : "distal/") + fb();
  if (part == "wrist") {
    return side + "hand/" + (c.y() < origin.y() ? "palm/" : "back/") + (s < 0.5 ? "proximal" : "distal");
  }
  if (part == "hip") return side + "thigh/" + (s < 0.5 ? "proximal/" : "distal/") + fb();
  if (part == "knee") return side + "shin/" + fb() + (s < 0.5 ? "/upper" : "/lower");
  if (part == "ankle") return side + "foot/foot/" + (c.z() < 0.07 ? "heel" : "toe");
  throw ParameterError("no region rule for segment " + joint);
}

inline std::vector<std::string> region_keys_75() {
  std::vector<std::string> k = {
      "head/front_lower/chin", "head/front_lower/left", "head/front_lower/right",
      "head/front_upper/left", "head/front_upper/right", "head/back_lower/left",
      "head/back_lower/right", "head/back_upper/left", "head/back_upper/right",
      "neck/front/left", "neck/front/right", "neck/back/left", "neck/back/right",
      "chest/front_left/upper", "chest/front_left/lower", "chest/front_right/upper",
      "chest/front_right/lower", "chest/back_left/upper", "chest/back_left/lower",
      "chest/back_right/upper", "chest/back_right/lower",
      "abdomen/front_left/upper", "abdomen/front_left/lower", "abdomen/front_right/upper",
      "abdomen/front_right/lower", "abdomen/back/left", "abdomen/back/right",
      "pelvis/front/left", "pelvis/front/right", "pelvis/back/left", "pelvis/back/right"};
  for (const std::string side : {"l_", "r_"}) {
    for (const char* r : {"upper_arm/proximal/collar", "upper_arm/proximal/arm", "upper_arm/distal/front",
                          "upper_arm/distal/back", "forearm/proximal/front", "forearm/proximal/back",
                          "forearm/distal/front", "forearm/distal/back", "hand/palm/proximal",
                          "hand/palm/distal", "hand/back/proximal", "hand/back/distal"}) {
      k.push_back(side + r);
    }
  }
  for (const std::string side : {"l_", "r_"}) {
    for (const char* r : {"thigh/proximal/front", "thigh/proximal/back", "thigh/distal/front",
                          "thigh/distal/back", "shin/front/upper", "shin/front/lower", "shin/back/upper",
                          "shin/back/lower", "foot/foot/heel", "foot/foot/toe"}) {
      k.push_back(side + r);
    }
  }
  return k;
}

inline std::string key_prefix(const std::string& key, int components) {
  std::size_t pos = 0;
  for (int i = 0; i < components; ++i) {
    pos = key.find('/', pos);
    if (pos == std::string::npos) return key;
    if (i + 1 < components) ++pos;
  }
  return key.substr(0, pos);
}

inline std::string limb_group(const std::string& part) {
  static const std::map<std::string, std::string> groups = {
      {"head", "head"}, {"neck", "head"}, {"chest", "upper_torso"}, {"abdomen", "lower_torso"},
      {"pelvis", "lower_torso"}, {"l_upper_arm", "l_arm"}, {"l_forearm", "l_arm"}, {"l_hand", "l_hand"},
      {"r_upper_arm", "r_arm"}, {"r_forearm", "r_arm"}, {"r_hand", "r_hand"}, {"l_thigh", "l_leg"},
      {"l_shin", "l_leg"}, {"l_foot", "l_leg"}, {"r_thigh", "r_leg"}, {"r_shin", "r_leg"},
      {"r_foot", "r_leg"}};
  return groups.at(part);
}

// Unique values in first-appearance order, and the index map onto them.
inline std::pair<std::vector<std::string>, std::vector<RegionId>> group_keys(
    const std::vector<std::string>& fine, const std::function<std::string(const std::string&)>& f) {
  std::vector<std::string> coarse;
  std::vector<RegionId> map;
  for (const auto& k : fine) {
    const auto c = f(k);
    auto it = std::find(coarse.begin(), coarse.end(), c);
    if (it == coarse.end()) {
      coarse.push_back(c);
      it = coarse.end() - 1;
    }
    map.push_back(static_cast<RegionId>(it - coarse.begin()));
  }
  return {coarse, map};
}

}  // namespace detail

inline SyntheticBody make_synthetic_body() {
  const auto joint_specs = detail::humanoid_joints();
  std::map<std::string, JointId> id;
  std::vector<Joint> joints;
  for (std::size_t j = 0; j < joint_specs.size(); ++j) {
    id[joint_specs[j].name] = static_cast<JointId>(j);
  }
  for (const auto& js : joint_specs) {
    Joint j;
    j.name = js.name;
    j.parent = std::string(js.parent).empty() ? -1 : id.at(js.parent);
    j.offset = j.parent < 0 ? js.position : Vec3(js.position - joint_specs[j.parent].position);
    joints.push_back(j);
  }

  detail::MeshBuilder mb;
  mb.regressor.resize(joints.size());
  const auto segments = detail::humanoid_segments();
  for (const auto& seg : segments) {
    const auto j = id.at(seg.joint);
    mb.add_segment(seg, j, joint_specs[j].position);
  }

  SyntheticBody body;
  body.facet_segment = mb.face_joint;
  body.model = BodyModel(mb.vertices, mb.faces, joints, mb.weights, mb.regressor);

  const auto keys75 = detail::region_keys_75();
  std::map<std::string, RegionId> key_id;
  for (std::size_t i = 0; i < keys75.size(); ++i) key_id[keys75[i]] = static_cast<RegionId>(i);

  std::map<JointId, const detail::SegmentSpec*> seg_of;
  for (const auto& seg : segments) seg_of[id.at(seg.joint)] = &seg;
  const auto facets = facet_geometry(body.model.template_vertices(), body.model.faces());
  std::vector<RegionId> f2r(facets.size());
  for (std::size_t f = 0; f < facets.size(); ++f) {
    const auto j = body.facet_segment[f];
    const auto key = detail::classify_facet(joints[j].name, facets[f].center, joint_specs[j].position, *seg_of.at(j));
    f2r[f] = key_id.at(key);
  }

  auto& h = body.regions;
  h.names[0] = keys75;
  h.maps[0] = RegionMap(75, f2r);
  auto [k37, m75_37] = detail::group_keys(keys75, [](const std::string& k) { return detail::key_prefix(k, 2); });
  auto [k17, m37_17] = detail::group_keys(k37, [](const std::string& k) { return detail::key_prefix(k, 1); });
  auto [k9, m17_9] = detail::group_keys(k17, detail::limb_group);
  h.names[1] = k37;
  h.names[2] = k17;
  h.names[3] = k9;
  h.steps[0] = CoarsenMap(75, static_cast<int>(k37.size()), m75_37);
  h.steps[1] = CoarsenMap(static_cast<int>(k37.size()), static_cast<int>(k17.size()), m37_17);
  h.steps[2] = CoarsenMap(static_cast<int>(k17.size()), static_cast<int>(k9.size()), m17_9);
  for (int i = 1; i < 4; ++i) h.maps[i] = coarsen_region_map(h.maps[i - 1], h.steps[i - 1]);
  return body;
}

}  // namespace selfcontact
