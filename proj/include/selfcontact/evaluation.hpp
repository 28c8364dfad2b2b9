#pragma once

// Reconstruction metrics in millimeters and their per-scenario-class
// aggregation.

#include "selfcontact/common.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace selfcontact {

// Mean per-joint position error, mm. With root alignment, the difference of
// the root joints is removed first.
inline double mpjpe(const Point3List& pred, const Point3List& gt, std::optional<JointId> align_root = 0) {
  if (pred.size() != gt.size()) throw ParameterError("mpjpe: joint count mismatch");
  if (pred.empty()) throw ParameterError("mpjpe: no joints");
  Vec3 shift = Vec3::Zero();
  if (align_root) {
    const auto r = static_cast<std::size_t>(*align_root);
    if (r >= pred.size()) throw ParameterError("mpjpe: root joint out of range");
    shift = gt[r] - pred[r];
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < pred.size(); ++j) sum += (pred[j] + shift - gt[j]).norm();
  return 1000.0 * sum / static_cast<double>(pred.size());
}

inline double translation_error(const Vec3& pred_root, const Vec3& gt_root) {
  return 1000.0 * (pred_root - gt_root).norm();
}

inline double vertex_error(const Point3List& pred, const Point3List& gt) {
  if (pred.size() != gt.size()) throw ParameterError("vertex_error: topology mismatch");
  if (pred.empty()) throw ParameterError("vertex_error: no vertices");
  double sum = 0.0;
  for (std::size_t v = 0; v < pred.size(); ++v) sum += (pred[v] - gt[v]).norm();
  return 1000.0 * sum / static_cast<double>(pred.size());
}

enum class ScenarioClass { standing, sitting_no_chair, with_chair };

inline constexpr std::array<ScenarioClass, 3> kScenarioClasses{
    ScenarioClass::standing, ScenarioClass::sitting_no_chair, ScenarioClass::with_chair};

inline const char* to_string(ScenarioClass c) {
  switch (c) {
    case ScenarioClass::standing: return "standing";
    case ScenarioClass::sitting_no_chair: return "sitting-no-chair";
    case ScenarioClass::with_chair: return "with-chair";
  }
  return "?";
}

inline ScenarioClass scenario_class_from_string(const std::string& s) {
  for (auto c : kScenarioClasses) {
    if (s == to_string(c)) return c;
  }
  throw ParameterError("unknown scenario class '" + s + "'");
}

struct MetricValues {
  double P = 0.0;  // pose (root-aligned MPJPE)
  double T = 0.0;  // root translation
  double V = 0.0;  // per-vertex
  double C = 0.0;  // contact distance
};

struct EvalRecord {
  std::string id;
  ScenarioClass scenario = ScenarioClass::standing;
  MetricValues metrics;
};

struct Aggregate {
  std::map<ScenarioClass, MetricValues> per_class;  // classes without records are absent
  std::map<ScenarioClass, std::size_t> counts;
  MetricValues overall;
};

inline Aggregate aggregate(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw ParameterError("aggregate: no records");
  Aggregate out;
  for (const auto& r : records) {
    auto& m = out.per_class[r.scenario];
    m.P += r.metrics.P;
    m.T += r.metrics.T;
    m.V += r.metrics.V;
    m.C += r.metrics.C;
    ++out.counts[r.scenario];
    out.overall.P += r.metrics.P;
    out.overall.T += r.metrics.T;
    out.overall.V += r.metrics.V;
    out.overall.C += r.metrics.C;
  }
  for (auto& [c, m] : out.per_class) {
    const double n = static_cast<double>(out.counts[c]);
    m = {m.P / n, m.T / n, m.V / n, m.C / n};
  }
  const double n = static_cast<double>(records.size());
  out.overall = {out.overall.P / n, out.overall.T / n, out.overall.V / n, out.overall.C / n};
  return out;
}

}  // namespace selfcontact
