#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace selfcontact {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

using Point2List = std::vector<Vec2>;
using Point3List = std::vector<Vec3>;

using FacetId = std::int32_t;
using RegionId = std::int32_t;
using JointId = std::int32_t;

// Error hierarchy. Every error raised by the library derives from Error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument/shape mismatch between inputs (dimension, granularity, ids).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Mesh content that cannot be processed (degenerate facets, non-unit normals).
class GeometryError : public Error {
 public:
  using Error::Error;
};

class ProjectionError : public Error {
 public:
  using Error::Error;
};

class OptimizationError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. Carries the file and the offending field.
class ParseError : public Error {
 public:
  ParseError(std::string file, std::string field, const std::string& what)
      : Error(file + ": field '" + field + "': " + what),
        file_(std::move(file)),
        field_(std::move(field)) {}

  const std::string& file() const { return file_; }
  const std::string& field() const { return field_; }

 private:
  std::string file_;
  std::string field_;
};

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

}  // namespace selfcontact
