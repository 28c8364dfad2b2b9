#pragma once

// Shared fixtures for the unit suites: small hand-built models, random
// signatures and a finite-difference helper.

#include "selfcontact/body_model.hpp"
#include "selfcontact/contact.hpp"
#include "selfcontact/regions.hpp"
#include "selfcontact/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <functional>
#include <vector>

namespace selfcontact::testing {

// Root at the origin, one child joint at (1,0,0). Two triangles, one skinned
// to each joint; the regressor picks the first vertex of each triangle.
inline BodyModel two_joint_model() {
  Point3List v = {{0.0, 0.0, 0.0}, {0.5, 0.0, 0.0}, {0.0, 0.5, 0.0},
                  {2.0, 0.0, 0.0}, {2.5, 0.0, 0.0}, {2.0, 0.5, 0.0}};
  std::vector<Face> f = {{0, 1, 2}, {3, 4, 5}};
  std::vector<Joint> j = {{-1, {0.0, 0.0, 0.0}, "root"}, {0, {1.0, 0.0, 0.0}, "child"}};
  std::vector<std::vector<SkinWeight>> w = {{{0, 1.0}}, {{0, 1.0}}, {{0, 1.0}},
                                            {{1, 1.0}}, {{1, 1.0}}, {{1, 1.0}}};
  std::vector<std::vector<RegressorWeight>> r = {{{0, 1.0}}, {{3, 1.0}}};
  return {v, f, j, w, r};
}

// A random chain of `joints` joints along +x with a small triangle strip per
// joint. Vertices near a joint boundary blend the two neighbouring joints.
inline BodyModel random_chain_model(Rng& rng, int joints) {
  Point3List v;
  std::vector<Face> f;
  std::vector<Joint> js;
  std::vector<std::vector<SkinWeight>> w;
  std::vector<std::vector<RegressorWeight>> reg;
  for (int k = 0; k < joints; ++k) {
    const Vec3 off = k == 0 ? Vec3(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), 2.0)
                            : Vec3(0.25 + rng.uniform(0.0, 0.1), rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05));
    js.push_back({k - 1, off, "j" + std::to_string(k)});
  }
  Point3List rest(static_cast<std::size_t>(joints));
  for (int k = 0; k < joints; ++k) rest[k] = (k == 0 ? Vec3::Zero() : rest[k - 1]) + js[k].offset;
  for (int k = 0; k < joints; ++k) {
    for (int t = 0; t < 3; ++t) {
      const auto base = static_cast<std::int32_t>(v.size());
      for (int c = 0; c < 3; ++c) {
        v.push_back(rest[k] + Vec3(rng.uniform(0.0, 0.25), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)));
        std::vector<SkinWeight> sw;
        if (k + 1 < joints && c == 2) {
          const double a = rng.uniform(0.2, 0.8);
          sw = {{k, a}, {k + 1, 1.0 - a}};
        } else {
          sw = {{k, 1.0}};
        }
        w.push_back(sw);
      }
      f.push_back({base, base + 1, base + 2});
    }
    reg.push_back({{static_cast<std::int32_t>(3 * 3 * k), 0.5}, {static_cast<std::int32_t>(3 * 3 * k + 1), 0.5}});
  }
  return {v, f, js, w, reg};
}

inline PoseParams random_params(Rng& rng, std::size_t joints, double rot = 0.5, double trans = 0.1,
                                double shape = 0.1) {
  PoseParams p = PoseParams::identity(joints);
  for (auto& r : p.joint_rotations) r = Vec3(rng.uniform(-rot, rot), rng.uniform(-rot, rot), rng.uniform(-rot, rot));
  p.translation = Vec3(rng.uniform(-trans, trans), rng.uniform(-trans, trans), rng.uniform(-trans, trans));
  p.shape = Vec3(rng.uniform(-shape, shape), rng.uniform(-shape, shape), rng.uniform(-shape, shape));
  return p;
}

inline ContactSignature random_signature(Rng& rng, int n, double p_contact, double p_masked = 0.0) {
  ContactSignature s(n);
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      const double u = rng.uniform();
      if (u < p_contact) {
        s.set(a, b, ContactState::contact);
      } else if (u < p_contact + p_masked) {
        s.set(a, b, ContactState::masked);
      }
    }
  }
  return s;
}

// Random surjection of n regions onto m <= n.
inline CoarsenMap random_coarsen_map(Rng& rng, int n, int m) {
  std::vector<RegionId> map(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) map[i] = i < m ? i : static_cast<RegionId>(rng.uniform() * m);
  for (int i = n - 1; i > 0; --i) std::swap(map[i], map[static_cast<int>(rng.uniform() * (i + 1))]);
  return {n, m, map};
}

inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-8) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), floor});
}

inline Eigen::VectorXd flatten(const Point3List& pts) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(3 * pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) x.segment<3>(static_cast<Eigen::Index>(3 * i)) = pts[i];
  return x;
}

inline Point3List unflatten(const Eigen::VectorXd& x) {
  Point3List pts(static_cast<std::size_t>(x.size() / 3));
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = x.segment<3>(static_cast<Eigen::Index>(3 * i));
  return pts;
}

}  // namespace selfcontact::testing
