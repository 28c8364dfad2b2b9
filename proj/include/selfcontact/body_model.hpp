#pragma once

// Articulated skinned triangle mesh: forward kinematics, linear blend
// skinning, facet geometry and pinhole projection, plus the reverse-mode
// chain rule from per-vertex gradients back to pose parameters.

#include "selfcontact/common.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace selfcontact {

struct Joint {
  JointId parent = -1;  // -1 for the root
  Vec3 offset = Vec3::Zero();  // rest offset from the parent; root: rest position
  std::string name;
};

struct SkinWeight {
  JointId joint = 0;
  double weight = 0.0;
};

struct RegressorWeight {
  std::int32_t vertex = 0;
  double weight = 0.0;
};

using Face = std::array<std::int32_t, 3>;

class BodyModel {
 public:
  BodyModel() = default;

  BodyModel(Point3List template_vertices, std::vector<Face> faces, std::vector<Joint> joints,
            std::vector<std::vector<SkinWeight>> skinning_weights,
            std::vector<std::vector<RegressorWeight>> joint_regressor)
      : vertices_(std::move(template_vertices)),
        faces_(std::move(faces)),
        joints_(std::move(joints)),
        weights_(std::move(skinning_weights)),
        regressor_(std::move(joint_regressor)) {
    validate();
    build_topology();
  }

  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t face_count() const { return faces_.size(); }
  std::size_t joint_count() const { return joints_.size(); }

  const Point3List& template_vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  const std::vector<Joint>& joints() const { return joints_; }
  const std::vector<std::vector<SkinWeight>>& skinning_weights() const { return weights_; }
  const std::vector<std::vector<RegressorWeight>>& joint_regressor() const { return regressor_; }

  // Rest-pose joint centers (accumulated offsets).
  const Point3List& rest_joints() const { return rest_joints_; }
  // Joints sorted so that every parent precedes its children.
  const std::vector<JointId>& topological_order() const { return order_; }
  JointId root() const { return order_.front(); }

  JointId find_joint(const std::string& name) const {
    for (std::size_t j = 0; j < joints_.size(); ++j) {
      if (joints_[j].name == name) return static_cast<JointId>(j);
    }
    throw ParameterError("unknown joint '" + name + "'");
  }

 private:
  void validate() const {
    const auto nv = static_cast<std::int64_t>(vertices_.size());
    const auto nj = static_cast<std::int64_t>(joints_.size());
    if (faces_.empty()) throw ParameterError("body model has no faces");
    if (joints_.empty()) throw ParameterError("body model has no joints");
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      for (auto idx : faces_[f]) {
        if (idx < 0 || idx >= nv) {
          throw ParameterError("face " + std::to_string(f) + " references invalid vertex " +
                               std::to_string(idx));
        }
      }
    }
    int roots = 0;
    for (std::size_t j = 0; j < joints_.size(); ++j) {
      const auto p = joints_[j].parent;
      if (p == -1) {
        ++roots;
      } else if (p < 0 || p >= nj || p == static_cast<JointId>(j)) {
        throw ParameterError("joint " + std::to_string(j) + " has invalid parent " +
                             std::to_string(p));
      }
    }
    if (roots != 1) throw ParameterError("joint tree must have exactly one root");
    if (weights_.size() != vertices_.size()) {
      throw ParameterError("skinning weights must be given for every vertex");
    }
    for (std::size_t v = 0; v < weights_.size(); ++v) {
      double sum = 0.0;
      for (const auto& w : weights_[v]) {
        if (w.joint < 0 || w.joint >= nj) {
          throw ParameterError("vertex " + std::to_string(v) + " skinned to invalid joint");
        }
        if (!(w.weight >= 0.0)) {
          throw ParameterError("vertex " + std::to_string(v) + " has a negative skinning weight");
        }
        sum += w.weight;
      }
      if (std::abs(sum - 1.0) > 1e-6) {
        throw ParameterError("skinning weights of vertex " + std::to_string(v) +
                             " do not sum to 1");
      }
    }
    if (regressor_.size() != joints_.size()) {
      throw ParameterError("joint regressor must have one row per joint");
    }
    for (const auto& row : regressor_) {
      for (const auto& r : row) {
        if (r.vertex < 0 || r.vertex >= nv) {
          throw ParameterError("joint regressor references invalid vertex");
        }
      }
    }
  }

  void build_topology() {
    const auto n = joints_.size();
    std::vector<std::vector<JointId>> children(n);
    JointId root = -1;
    for (std::size_t j = 0; j < n; ++j) {
      if (joints_[j].parent < 0) {
        root = static_cast<JointId>(j);
      } else {
        children[joints_[j].parent].push_back(static_cast<JointId>(j));
      }
    }
    order_.clear();
    order_.push_back(root);
    for (std::size_t i = 0; i < order_.size(); ++i) {
      for (auto c : children[order_[i]]) order_.push_back(c);
    }
    // Unreached joints belong to a cycle detached from the root.
    if (order_.size() != n) throw ParameterError("joint tree contains a cycle");
    rest_joints_.assign(n, Vec3::Zero());
    for (auto j : order_) {
      const auto p = joints_[j].parent;
      rest_joints_[j] = p < 0 ? joints_[j].offset : Vec3(rest_joints_[p] + joints_[j].offset);
    }
  }

  Point3List vertices_;
  std::vector<Face> faces_;
  std::vector<Joint> joints_;
  std::vector<std::vector<SkinWeight>> weights_;
  std::vector<std::vector<RegressorWeight>> regressor_;
  Point3List rest_joints_;
  std::vector<JointId> order_;
};

// The optimization variable. Shape holds three per-axis scaling coefficients:
// the template is scaled by (1 + shape) about the model origin.
struct PoseParams {
  std::vector<Vec3> joint_rotations;  // axis-angle, radians
  Vec3 translation = Vec3::Zero();
  Vec3 shape = Vec3::Zero();

  static PoseParams identity(std::size_t joint_count) {
    PoseParams p;
    p.joint_rotations.assign(joint_count, Vec3::Zero());
    return p;
  }

  std::size_t size() const { return 3 * joint_rotations.size() + 6; }

  Eigen::VectorXd flatten() const {
    Eigen::VectorXd x(static_cast<Eigen::Index>(size()));
    Eigen::Index k = 0;
    for (const auto& r : joint_rotations) {
      x.segment<3>(k) = r;
      k += 3;
    }
    x.segment<3>(k) = translation;
    x.segment<3>(k + 3) = shape;
    return x;
  }

  static PoseParams unflatten(const Eigen::VectorXd& x, std::size_t joint_count) {
    if (static_cast<std::size_t>(x.size()) != 3 * joint_count + 6) {
      throw ParameterError("flattened parameter vector has wrong length");
    }
    PoseParams p;
    p.joint_rotations.resize(joint_count);
    Eigen::Index k = 0;
    for (auto& r : p.joint_rotations) {
      r = x.segment<3>(k);
      k += 3;
    }
    p.translation = x.segment<3>(k);
    p.shape = x.segment<3>(k + 3);
    return p;
  }

  bool operator==(const PoseParams& o) const {
    return joint_rotations == o.joint_rotations && translation == o.translation && shape == o.shape;
  }
};

struct Facet {
  Vec3 center = Vec3::Zero();
  Vec3 normal = Vec3::Zero();
};

struct Camera {
  double fx = 500.0;
  double fy = 500.0;
  double cx = 184.0;
  double cy = 184.0;
  Mat3 rotation = Mat3::Identity();  // world -> camera
  Vec3 translation = Vec3::Zero();
  // Image extent used to convert between pixels and normalized coordinates.
  double width = 368.0;
  double height = 368.0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw ParameterError("camera focal lengths must be positive");
    if (!(width > 0.0) || !(height > 0.0)) throw ParameterError("camera image size must be positive");
  }

  Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }

  Vec2 normalize(const Vec2& pixel) const { return {pixel.x() / width, pixel.y() / height}; }
  Vec2 to_pixels(const Vec2& normalized) const {
    return {normalized.x() * width, normalized.y() * height};
  }
};

// ---------------------------------------------------------------------------
// Rotations

inline Mat3 rodrigues(const Vec3& axis_angle) {
  const double theta = axis_angle.norm();
  if (theta < 1e-12) return Mat3::Identity() + skew(axis_angle);
  return Eigen::AngleAxisd(theta, axis_angle / theta).toRotationMatrix();
}

// dR/dv_i for the three axis-angle components.
inline std::array<Mat3, 3> rodrigues_derivatives(const Vec3& v) {
  std::array<Mat3, 3> d;
  const double theta2 = v.squaredNorm();
  if (theta2 < 1e-16) {
    for (int i = 0; i < 3; ++i) d[i] = skew(Vec3::Unit(i));
    return d;
  }
  const Mat3 r = rodrigues(v);
  const Mat3 i_minus_r = Mat3::Identity() - r;
  for (int i = 0; i < 3; ++i) {
    const Vec3 col = v.cross(i_minus_r.col(i));
    d[i] = (v[i] * skew(v) + skew(col)) * r / theta2;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Posing

// Everything forward kinematics produces for one parameter setting; kept so
// that gradients can be pulled back without re-posing.
struct PoseState {
  Vec3 scale = Vec3::Ones();
  Point3List scaled_rest_joints;
  std::vector<Mat3> local_rotations;
  std::vector<Mat3> world_rotations;
  Point3List joints;  // forward-kinematics joint centers
  Point3List vertices;
};

inline void check_params(const BodyModel& model, const PoseParams& params) {
  if (params.joint_rotations.size() != model.joint_count()) {
    throw ParameterError("pose has " + std::to_string(params.joint_rotations.size()) +
                         " joint rotations, model has " + std::to_string(model.joint_count()) +
                         " joints");
  }
  for (const auto& r : params.joint_rotations) {
    if (!r.allFinite()) throw ParameterError("non-finite joint rotation");
  }
  if (!params.translation.allFinite() || !params.shape.allFinite()) {
    throw ParameterError("non-finite translation or shape");
  }
  if ((params.shape.array() <= -1.0).any()) {
    throw ParameterError("shape coefficients must be > -1");
  }
}

inline PoseState pose(const BodyModel& model, const PoseParams& params) {
  check_params(model, params);
  const auto nj = model.joint_count();
  PoseState s;
  s.scale = Vec3::Ones() + params.shape;
  s.scaled_rest_joints.resize(nj);
  s.local_rotations.resize(nj);
  s.world_rotations.resize(nj);
  s.joints.resize(nj);
  const auto& rest = model.rest_joints();
  for (std::size_t j = 0; j < nj; ++j) {
    s.scaled_rest_joints[j] = s.scale.cwiseProduct(rest[j]);
    s.local_rotations[j] = rodrigues(params.joint_rotations[j]);
  }
  for (auto j : model.topological_order()) {
    const auto p = model.joints()[j].parent;
    if (p < 0) {
      s.world_rotations[j] = s.local_rotations[j];
      s.joints[j] = s.scaled_rest_joints[j] + params.translation;
    } else {
      s.world_rotations[j] = s.world_rotations[p] * s.local_rotations[j];
      s.joints[j] = s.joints[p] + s.world_rotations[p] * (s.scaled_rest_joints[j] - s.scaled_rest_joints[p]);
    }
  }
  const auto& tv = model.template_vertices();
  s.vertices.assign(tv.size(), Vec3::Zero());
  for (std::size_t v = 0; v < tv.size(); ++v) {
    const Vec3 scaled = s.scale.cwiseProduct(tv[v]);
    Vec3 acc = Vec3::Zero();
    for (const auto& w : model.skinning_weights()[v]) {
      acc += w.weight * (s.world_rotations[w.joint] * (scaled - s.scaled_rest_joints[w.joint]) +
                         s.joints[w.joint]);
    }
    s.vertices[v] = acc;
  }
  return s;
}

inline Point3List pose_mesh(const BodyModel& model, const PoseParams& params) {
  return pose(model, params).vertices;
}

inline Point3List regress_joints(const BodyModel& model, const Point3List& vertices) {
  if (vertices.size() != model.vertex_count()) {
    throw ParameterError("vertex count does not match the model");
  }
  Point3List out(model.joint_count(), Vec3::Zero());
  for (std::size_t j = 0; j < model.joint_count(); ++j) {
    for (const auto& r : model.joint_regressor()[j]) out[j] += r.weight * vertices[r.vertex];
  }
  return out;
}

inline Point3List joint_positions(const BodyModel& model, const PoseParams& params) {
  return regress_joints(model, pose_mesh(model, params));
}

// Facet centers and unit normals; normal orientation follows the face winding.
inline std::vector<Facet> facet_geometry(const Point3List& vertices, const std::vector<Face>& faces) {
  std::vector<Facet> out(faces.size());
  const auto nv = static_cast<std::int64_t>(vertices.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& face = faces[f];
    for (auto idx : face) {
      if (idx < 0 || idx >= nv) {
        throw ParameterError("face " + std::to_string(f) + " references invalid vertex");
      }
    }
    const Vec3& a = vertices[face[0]];
    const Vec3& b = vertices[face[1]];
    const Vec3& c = vertices[face[2]];
    out[f].center = (a + b + c) / 3.0;
    const Vec3 n = (b - a).cross(c - a);
    const double len = n.norm();
    if (!(len > 1e-14)) {
      throw GeometryError("degenerate facet " + std::to_string(f) + " has zero area");
    }
    out[f].normal = n / len;
  }
  return out;
}

inline Vec2 project(const Camera& camera, const Vec3& point) {
  const Vec3 pc = camera.to_camera(point);
  if (!(pc.z() > 0.0)) throw ProjectionError("point is not in front of the camera");
  return {camera.fx * pc.x() / pc.z() + camera.cx, camera.fy * pc.y() / pc.z() + camera.cy};
}

// d(pixel)/d(world point), 2x3.
inline Eigen::Matrix<double, 2, 3> project_jacobian(const Camera& camera, const Vec3& point) {
  const Vec3 pc = camera.to_camera(point);
  if (!(pc.z() > 0.0)) throw ProjectionError("point is not in front of the camera");
  const double iz = 1.0 / pc.z();
  Eigen::Matrix<double, 2, 3> d;
  d << camera.fx * iz, 0.0, -camera.fx * pc.x() * iz * iz,
       0.0, camera.fy * iz, -camera.fy * pc.y() * iz * iz;
  return d * camera.rotation;
}

// ---------------------------------------------------------------------------
// Gradient pull-back

// Adds the regressor transpose of joint gradients onto vertex gradients.
inline void accumulate_joint_gradient(const BodyModel& model, const Point3List& joint_grads,
                                      Point3List& vertex_grads) {
  for (std::size_t j = 0; j < model.joint_count(); ++j) {
    if (joint_grads[j].isZero(0.0)) continue;
    for (const auto& r : model.joint_regressor()[j]) {
      vertex_grads[r.vertex] += r.weight * joint_grads[j];
    }
  }
}

// Gradient of a scalar w.r.t. the flattened PoseParams, given its gradient
// w.r.t. every posed vertex. Exact reverse of pose().
inline Eigen::VectorXd pullback_vertex_gradient(const BodyModel& model, const PoseParams& params,
                                                const PoseState& state,
                                                const Point3List& vertex_grads) {
  const auto nj = model.joint_count();
  const auto& tv = model.template_vertices();
  const auto& rest = model.rest_joints();
  if (vertex_grads.size() != tv.size()) throw ParameterError("vertex gradient size mismatch");

  // Per-joint aggregates over skinned vertex copies x_vj.
  std::vector<Vec3> a(nj, Vec3::Zero());
  std::vector<Mat3> b(nj, Mat3::Zero());
  Vec3 grad_scale = Vec3::Zero();
  for (std::size_t v = 0; v < tv.size(); ++v) {
    const Vec3& g = vertex_grads[v];
    if (g.isZero(0.0)) continue;
    const Vec3 scaled = state.scale.cwiseProduct(tv[v]);
    for (const auto& w : model.skinning_weights()[v]) {
      const auto j = w.joint;
      const Vec3 x = state.world_rotations[j] * (scaled - state.scaled_rest_joints[j]) + state.joints[j];
      const Vec3 wg = w.weight * g;
      a[j] += wg;
      b[j] += wg * x.transpose();
      grad_scale += (state.world_rotations[j].transpose() * wg).cwiseProduct(tv[v] - rest[j]);
    }
  }

  // Subtree sums, children before parents.
  std::vector<Vec3> a_sub = a;
  std::vector<Mat3> b_sub = b;
  const auto& order = model.topological_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto p = model.joints()[*it].parent;
    if (p >= 0) {
      a_sub[p] += a_sub[*it];
      b_sub[p] += b_sub[*it];
    }
  }

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(3 * nj + 6));
  for (std::size_t k = 0; k < nj; ++k) {
    const auto p = model.joints()[k].parent;
    const Mat3 parent_rot = p < 0 ? Mat3::Identity() : state.world_rotations[p];
    const Mat3 s = b_sub[k] - a_sub[k] * state.joints[k].transpose();
    const auto d = rodrigues_derivatives(params.joint_rotations[k]);
    for (int c = 0; c < 3; ++c) {
      const Mat3 m = parent_rot * d[c] * state.local_rotations[k].transpose() * parent_rot.transpose();
      grad[static_cast<Eigen::Index>(3 * k + c)] = (m.array() * s.array()).sum();
    }
  }
  const auto root = model.root();
  const auto tk = static_cast<Eigen::Index>(3 * nj);
  grad.segment<3>(tk) = a_sub[root];

  // Joint-center dependence on the scale: dp_j/dscale_c, accumulated down the tree.
  std::vector<Mat3> dp(nj, Mat3::Zero());  // column c = dp_j / dscale_c
  for (auto j : order) {
    const auto p = model.joints()[j].parent;
    if (p < 0) {
      dp[j] = rest[j].asDiagonal();
    } else {
      dp[j] = dp[p] + state.world_rotations[p] * Mat3((rest[j] - rest[p]).asDiagonal());
    }
  }
  for (std::size_t j = 0; j < nj; ++j) grad_scale += dp[j].transpose() * a[j];
  grad.segment<3>(tk + 3) = grad_scale;
  return grad;
}

}  // namespace selfcontact
