#pragma once

// Self-contact-consistent body fitting. The objective is
//
//   L = λ_S L_S + λ_psr L_psr + λ_col L_col + λ_D L_D + λ_N L_N
//
// over PoseParams: keypoint reprojection, pose/shape regularization, a
// sphere-proxy self-collision penalty, and the contact terms on the
// signature's contact pairs. Minimized by gradient descent with Armijo
// backtracking; nearest-neighbour matches are recomputed at every iterate and
// frozen while the step is taken.

#include "selfcontact/body_model.hpp"
#include "selfcontact/contact.hpp"
#include "selfcontact/contact_geometry.hpp"
#include "selfcontact/regions.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace selfcontact {

struct Keypoint {
  JointId joint = 0;
  Vec2 pixel = Vec2::Zero();
  bool visible = true;
};

struct TermWeights {
  double S = 1.0;
  double psr = 1e-2;
  double col = 1.0;
  double D = 1.0;
  double N = 1e-1;
  // Inside L_psr.
  double pose = 1.0;
  double shape = 1.0;

  void validate() const {
    for (double w : {S, psr, col, D, N, pose, shape}) {
      if (!(w >= 0.0)) throw ParameterError("term weights must be non-negative");
    }
  }
};

enum class GradientMode { analytic, finite_difference };

struct OptimizerSettings {
  int iterations = 300;
  double initial_step = 1e-3;
  double armijo_c = 1e-4;
  int max_backtracks = 40;
  double fd_step = 1e-4;
  GradientMode gradient = GradientMode::analytic;
  FacetSelection selection = FacetSelection::all();
  // Scale the descent direction by the inverse of a diagonal curvature
  // estimate (Gauss-Newton for L_S, exact for L_psr, plus a floor). L_S in
  // px² is orders of magnitude stiffer in global translation and shape than
  // the contact terms are in limb rotations; unscaled descent crawls.
  bool precondition = true;
  double precondition_floor = 1.0;
};

// One sphere per region, centered on the region's facet centroid.
struct CollisionProxySet {
  std::vector<double> radii;
  std::set<RegionPair> excluded;  // region pairs never penalized (a < b)

  bool is_excluded(RegionId a, RegionId b) const {
    if (a > b) std::swap(a, b);
    return excluded.count({a, b}) > 0;
  }
};

struct LossBreakdown {
  double S = 0.0;
  double psr = 0.0;
  double col = 0.0;
  double D = 0.0;
  double N = 0.0;
  double total = 0.0;

  bool operator==(const LossBreakdown&) const = default;
};

struct ReconstructionProblem {
  BodyModel model;
  RegionMap regions;
  Camera camera;
  std::vector<Keypoint> keypoints;
  ContactSignature signature;
  PoseParams init;
  TermWeights weights;
  CollisionProxySet proxies;
  OptimizerSettings settings;

  void validate() const {
    weights.validate();
    camera.validate();
    check_params(model, init);
    if (regions.facet_count() != model.face_count()) {
      throw ParameterError("region map facet count does not match the body model");
    }
    if (signature.granularity() != regions.granularity()) {
      throw ParameterError("signature granularity does not match the region map");
    }
    if (keypoints.size() > model.joint_count()) throw ParameterError("more keypoints than joints");
    for (const auto& k : keypoints) {
      if (k.joint < 0 || static_cast<std::size_t>(k.joint) >= model.joint_count()) {
        throw ParameterError("keypoint references invalid joint");
      }
    }
    if (proxies.radii.size() != static_cast<std::size_t>(regions.granularity())) {
      throw ParameterError("collision proxies must cover every region");
    }
  }
};

// ---------------------------------------------------------------------------
// Individual terms

struct ProjectionLoss {
  double value = 0.0;
  Point3List joint_gradient;
  std::vector<std::string> warnings;
};

// Mean squared pixel error of projected joints over visible keypoints.
// Joints behind the camera are dropped with a warning.
inline ProjectionLoss loss_projection(const Point3List& joints, const Camera& camera,
                                      const std::vector<Keypoint>& keypoints) {
  ProjectionLoss out;
  out.joint_gradient.assign(joints.size(), Vec3::Zero());
  std::vector<std::pair<const Keypoint*, Vec2>> used;
  for (const auto& k : keypoints) {
    if (!k.visible) continue;
    const Vec3& p = joints.at(static_cast<std::size_t>(k.joint));
    if (!(camera.to_camera(p).z() > 0.0)) {
      out.warnings.push_back("joint " + std::to_string(k.joint) + " is behind the camera; keypoint ignored");
      continue;
    }
    used.emplace_back(&k, project(camera, p));
  }
  if (used.empty()) return out;
  const double inv = 1.0 / static_cast<double>(used.size());
  for (const auto& [k, px] : used) {
    const Vec2 r = px - k->pixel;
    out.value += r.squaredNorm() * inv;
    out.joint_gradient[k->joint] += 2.0 * inv * project_jacobian(camera, joints[k->joint]).transpose() * r;
  }
  return out;
}

struct RegularizerLoss {
  double value = 0.0;
  Eigen::VectorXd gradient;  // flattened PoseParams layout
};

inline RegularizerLoss loss_regularizer(const PoseParams& params, const PoseParams& init, double lambda_pose,
                                        double lambda_shape) {
  if (params.joint_rotations.size() != init.joint_rotations.size()) {
    throw ParameterError("regularizer: joint count mismatch");
  }
  RegularizerLoss out;
  out.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.size()));
  for (std::size_t j = 0; j < params.joint_rotations.size(); ++j) {
    const Vec3 d = params.joint_rotations[j] - init.joint_rotations[j];
    out.value += lambda_pose * d.squaredNorm();
    out.gradient.segment<3>(static_cast<Eigen::Index>(3 * j)) = 2.0 * lambda_pose * d;
  }
  out.value += lambda_shape * params.shape.squaredNorm();
  out.gradient.tail<3>() = 2.0 * lambda_shape * params.shape;
  return out;
}

// Radii from the rest pose: `scale` times the RMS distance of a region's
// facet centers to its centroid. Pairs whose spheres already overlap at rest
// are excluded.
inline CollisionProxySet fit_collision_proxies(const BodyModel& model, const RegionMap& regions,
                                               double scale = 0.8) {
  const auto facets = facet_geometry(model.template_vertices(), model.faces());
  const int n = regions.granularity();
  CollisionProxySet p;
  p.radii.resize(static_cast<std::size_t>(n));
  std::vector<Vec3> centers(static_cast<std::size_t>(n));
  for (RegionId r = 0; r < n; ++r) {
    centers[r] = region_center(regions, facets, r);
    double ss = 0.0;
    for (auto f : regions.members(r)) ss += (facets[f].center - centers[r]).squaredNorm();
    p.radii[r] = std::max(scale * std::sqrt(ss / static_cast<double>(regions.members(r).size())), 1e-3);
  }
  for (RegionId a = 0; a < n; ++a) {
    for (RegionId b = a + 1; b < n; ++b) {
      if ((centers[a] - centers[b]).norm() < p.radii[a] + p.radii[b]) p.excluded.insert({a, b});
    }
  }
  return p;
}

struct CollisionLoss {
  double value = 0.0;
  Point3List vertex_gradient;
};

// Σ max(0, r_a + r_b − |c_a − c_b|)² over region pairs that are neither
// excluded nor annotated as contact.
inline CollisionLoss loss_collision(const std::vector<Facet>& facets, const std::vector<Face>& faces,
                                    std::size_t vertex_count, const RegionMap& regions,
                                    const CollisionProxySet& proxies, const ContactSignature& sig) {
  const int n = regions.granularity();
  std::vector<Vec3> centers(static_cast<std::size_t>(n));
  for (RegionId r = 0; r < n; ++r) centers[r] = region_center(regions, facets, r);
  std::vector<Vec3> center_grad(static_cast<std::size_t>(n), Vec3::Zero());
  CollisionLoss out;
  for (RegionId a = 0; a < n; ++a) {
    for (RegionId b = a + 1; b < n; ++b) {
      if (proxies.is_excluded(a, b) || sig(a, b) == ContactState::contact) continue;
      const Vec3 d = centers[a] - centers[b];
      const double dist = d.norm();
      const double pen = proxies.radii[a] + proxies.radii[b] - dist;
      if (pen <= 0.0) continue;
      out.value += pen * pen;
      if (dist > 0.0) {
        const Vec3 g = -2.0 * pen * d / dist;
        center_grad[a] += g;
        center_grad[b] -= g;
      }
    }
  }
  out.vertex_gradient.assign(vertex_count, Vec3::Zero());
  for (RegionId r = 0; r < n; ++r) {
    if (center_grad[r].isZero(0.0)) continue;
    const auto& ids = regions.members(r);
    const Vec3 per_facet = center_grad[r] / static_cast<double>(ids.size());
    for (auto f : ids) {
      for (auto v : faces[f]) out.vertex_gradient[v] += per_facet / 3.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full objective

struct Evaluation {
  LossBreakdown terms;
  Eigen::VectorXd gradient;  // empty unless requested
  MatchSet matches;          // matches the terms were evaluated with
  std::vector<std::string> warnings;
};

class Objective {
 public:
  explicit Objective(const ReconstructionProblem& problem) : p_(problem) { p_.validate(); }

  bool uses_matches() const {
    return (p_.weights.D > 0.0 || p_.weights.N > 0.0) && !p_.signature.contact_pairs().empty();
  }

  // With `frozen` null the matches are recomputed at `params`.
  Evaluation evaluate(const PoseParams& params, const MatchSet* frozen, bool with_gradient) const {
    const auto& w = p_.weights;
    const auto& model = p_.model;
    const auto state = pose(model, params);
    const auto facets = facet_geometry(state.vertices, model.faces());
    Evaluation ev;
    Point3List vgrad(model.vertex_count(), Vec3::Zero());
    auto add = [&](const Point3List& g, double scale) {
      if (!with_gradient || scale == 0.0) return;
      for (std::size_t v = 0; v < g.size(); ++v) vgrad[v] += scale * g[v];
    };

    const auto joints = regress_joints(model, state.vertices);
    auto proj = loss_projection(joints, p_.camera, p_.keypoints);
    ev.terms.S = proj.value;
    ev.warnings = std::move(proj.warnings);
    if (with_gradient && w.S > 0.0) {
      Point3List jg(proj.joint_gradient.size());
      for (std::size_t j = 0; j < jg.size(); ++j) jg[j] = w.S * proj.joint_gradient[j];
      accumulate_joint_gradient(model, jg, vgrad);
    }

    const auto reg = loss_regularizer(params, p_.init, w.pose, w.shape);
    ev.terms.psr = reg.value;

    if (w.col > 0.0) {
      const auto col = loss_collision(facets, model.faces(), model.vertex_count(), p_.regions, p_.proxies,
                                      p_.signature);
      ev.terms.col = col.value;
      add(col.vertex_gradient, w.col);
    }

    if (uses_matches()) {
      if (frozen) {
        ev.matches = *frozen;
      } else {
        ev.matches = loss_D(facets, p_.signature, p_.regions, p_.settings.selection).matches;
      }
      ev.terms.D = loss_D_frozen(facets, ev.matches);
      ev.terms.N = loss_N(facets, ev.matches);
      if (with_gradient) {
        if (w.D > 0.0) add(loss_D_vertex_gradient(state.vertices, model.faces(), facets, ev.matches), w.D);
        if (w.N > 0.0) add(loss_N_vertex_gradient(state.vertices, model.faces(), facets, ev.matches), w.N);
      }
    }

    ev.terms.total = w.S * ev.terms.S + w.psr * ev.terms.psr + w.col * ev.terms.col + w.D * ev.terms.D +
                     w.N * ev.terms.N;
    if (with_gradient) {
      ev.gradient = pullback_vertex_gradient(model, params, state, vgrad) + w.psr * reg.gradient;
    }
    return ev;
  }

  // Diagonal curvature estimate used to precondition descent: the
  // Gauss-Newton diagonal of λ_S L_S (joint projections differentiated
  // numerically), the exact diagonal of λ_psr L_psr, plus `floor`.
  Eigen::VectorXd curvature_diagonal(const PoseParams& params, double floor) const {
    const auto& w = p_.weights;
    const auto x = params.flatten();
    const auto nj = params.joint_rotations.size();
    Eigen::VectorXd h = Eigen::VectorXd::Constant(x.size(), floor);
    for (std::size_t j = 0; j < nj; ++j) h.segment<3>(static_cast<Eigen::Index>(3 * j)).array() += 2.0 * w.psr * w.pose;
    h.tail<3>().array() += 2.0 * w.psr * w.shape;

    std::vector<JointId> visible;
    for (const auto& k : p_.keypoints) {
      if (k.visible) visible.push_back(k.joint);
    }
    if (w.S == 0.0 || visible.empty()) return h;
    auto projections = [&](const Eigen::VectorXd& xv, std::vector<std::optional<Vec2>>& out) {
      const auto joints = joint_positions(p_.model, PoseParams::unflatten(xv, nj));
      out.clear();
      for (auto j : visible) {
        const Vec3& q = joints[static_cast<std::size_t>(j)];
        if (p_.camera.to_camera(q).z() > 0.0) {
          out.emplace_back(project(p_.camera, q));
        } else {
          out.emplace_back();
        }
      }
    };
    const double eps = 1e-6;
    const double scale = 2.0 * w.S / static_cast<double>(visible.size());
    std::vector<std::optional<Vec2>> plus;
    std::vector<std::optional<Vec2>> minus;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Eigen::VectorXd xp = x;
      Eigen::VectorXd xm = x;
      xp[i] += eps;
      xm[i] -= eps;
      try {
        projections(xp, plus);
        projections(xm, minus);
      } catch (const ParameterError&) {
        continue;
      }
      for (std::size_t k = 0; k < plus.size(); ++k) {
        if (plus[k] && minus[k]) h[i] += scale * ((*plus[k] - *minus[k]) / (2.0 * eps)).squaredNorm();
      }
    }
    return h;
  }

  double value(const PoseParams& params, const MatchSet* frozen) const {
    return evaluate(params, frozen, false).terms.total;
  }

  // Central differences of the frozen-match objective.
  Eigen::VectorXd finite_difference_gradient(const PoseParams& params, const MatchSet* frozen,
                                             double step) const {
    const auto x = params.flatten();
    const auto nj = params.joint_rotations.size();
    Eigen::VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Eigen::VectorXd xp = x;
      Eigen::VectorXd xm = x;
      xp[i] += step;
      xm[i] -= step;
      g[i] = (value(PoseParams::unflatten(xp, nj), frozen) - value(PoseParams::unflatten(xm, nj), frozen)) /
             (2.0 * step);
    }
    return g;
  }

  const ReconstructionProblem& problem() const { return p_; }

 private:
  ReconstructionProblem p_;
};

inline void check_finite(const LossBreakdown& t, int iteration) {
  const std::pair<const char*, double> terms[] = {
      {"L_S", t.S}, {"L_psr", t.psr}, {"L_col", t.col}, {"L_D", t.D}, {"L_N", t.N}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) {
      throw OptimizationError(std::string("non-finite ") + name + " at iteration " + std::to_string(iteration));
    }
  }
}

struct ReconstructionResult {
  PoseParams params;
  std::vector<LossBreakdown> trace;  // entry 0: initial parameters
  int iterations = 0;
  bool converged = false;  // no descent step could be found
  std::vector<std::string> warnings;
};

// Gradient descent with Armijo backtracking (halving). A candidate is
// accepted when it satisfies the Armijo condition on the frozen-match
// objective and does not increase the objective re-evaluated with fresh
// matches, so the recorded trace is non-increasing.
inline ReconstructionResult optimize(const ReconstructionProblem& problem) {
  const Objective obj(problem);
  const auto& st = problem.settings;
  const auto nj = problem.model.joint_count();

  ReconstructionResult res;
  res.params = problem.init;
  auto gradient_of = [&](const PoseParams& p, Evaluation& ev) {
    if (st.gradient == GradientMode::finite_difference) {
      ev.gradient = obj.finite_difference_gradient(p, obj.uses_matches() ? &ev.matches : nullptr, st.fd_step);
    }
  };
  const bool analytic = st.gradient == GradientMode::analytic;
  Evaluation cur = obj.evaluate(res.params, nullptr, analytic);
  gradient_of(res.params, cur);
  check_finite(cur.terms, 0);
  res.warnings = cur.warnings;
  res.trace.push_back(cur.terms);

  double step = st.initial_step;
  for (int it = 1; it <= st.iterations; ++it) {
    const Eigen::VectorXd& g = cur.gradient;
    const Eigen::VectorXd d = st.precondition
                                  ? Eigen::VectorXd(g.cwiseQuotient(obj.curvature_diagonal(res.params,
                                                                                          st.precondition_floor)))
                                  : g;
    const double g2 = g.dot(d);
    if (g2 == 0.0) {
      res.converged = true;
      break;
    }
    const Eigen::VectorXd x = res.params.flatten();
    const MatchSet* frozen = obj.uses_matches() ? &cur.matches : nullptr;
    const double f0 = cur.terms.total;
    struct Candidate {
      PoseParams params;
      Evaluation eval;
      double t = 0.0;
    };
    auto try_step = [&](double t, bool frozen_armijo) -> std::optional<Candidate> {
      auto cand = PoseParams::unflatten(x - t * d, nj);
      try {
        if (frozen_armijo) {
          const double f_frozen = obj.value(cand, frozen);
          if (!std::isfinite(f_frozen) || f_frozen > f0 - st.armijo_c * t * g2) return std::nullopt;
        }
        Evaluation next = obj.evaluate(cand, nullptr, analytic);
        const double bound = frozen_armijo ? f0 : f0 - st.armijo_c * t * g2;
        if (!(next.terms.total <= bound)) return std::nullopt;
        return Candidate{std::move(cand), std::move(next), t};
      } catch (const ParameterError&) {
        return std::nullopt;  // left the valid parameter domain
      } catch (const GeometryError&) {
        return std::nullopt;
      }
    };
    std::optional<Candidate> best;
    double t = step;
    for (int k = 0; k <= st.max_backtracks && !(best = try_step(t, true)); ++k) t *= 0.5;
    if (!best) {
      res.converged = true;
      break;
    }
    gradient_of(best->params, best->eval);
    check_finite(best->eval.terms, it);
    res.params = std::move(best->params);
    cur = std::move(best->eval);
    res.trace.push_back(cur.terms);
    res.iterations = it;
    step = 2.0 * best->t;
  }
  return res;
}

}  // namespace selfcontact
