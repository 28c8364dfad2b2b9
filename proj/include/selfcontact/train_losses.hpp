#pragma once

// Training-objective mathematics of the self-contact predictor as pure
// functions with analytic gradients: softargmax landmarks, bilinear feature
// sampling, the image-support and separation losses, and class-weighted
// sigmoid cross-entropies on segmentation logits and on pairwise feature
// similarities.

#include "selfcontact/common.hpp"
#include "selfcontact/contact.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

namespace selfcontact {

// Row-major scalar grid; value(i, j) is column i (x), row j (y), 0-based.
struct Heatmap {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  Heatmap() = default;
  Heatmap(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
    validate();
  }

  double& at(int i, int j) { return values[static_cast<std::size_t>(j) * width + i]; }
  double at(int i, int j) const { return values[static_cast<std::size_t>(j) * width + i]; }

  void validate() const {
    if (width < 1 || height < 1) throw ParameterError("heatmap must be at least 1x1");
    if (values.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw ParameterError("heatmap value count does not match its size");
    }
    for (double v : values) {
      if (!std::isfinite(v)) throw ParameterError("heatmap contains non-finite values");
    }
  }
};

using FeaturePlane = Heatmap;

// One predicted landmark per region, normalized image coordinates.
using LandmarkSet = std::vector<Vec2>;

// Gradient-carrying loss results.
struct LandmarkLoss {
  double value = 0.0;
  std::vector<Vec2> gradient;  // d value / d landmark
};

struct LogitLoss {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

struct FeatureLoss {
  double value = 0.0;
  Eigen::MatrixXd gradient;
};

// ---------------------------------------------------------------------------
// Softargmax

namespace detail {

inline std::vector<double> softmax(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  std::vector<double> p(v.size());
  double z = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    p[k] = std::exp(v[k] - m);
    z += p[k];
  }
  for (auto& x : p) x /= z;
  return p;
}

}  // namespace detail

// Expected coordinate under the softmax of the heatmap, with cell (i, j)
// located at ((i+1)/W, (j+1)/H).
inline Vec2 softargmax(const Heatmap& h) {
  h.validate();
  const auto p = detail::softmax(h.values);
  double x = 0.0;
  double y = 0.0;
  for (int j = 0; j < h.height; ++j) {
    for (int i = 0; i < h.width; ++i) {
      const double w = p[static_cast<std::size_t>(j) * h.width + i];
      x += w * (i + 1) / h.width;
      y += w * (j + 1) / h.height;
    }
  }
  return {x, y};
}

// Gradient w.r.t. heatmap values of <grad_xy, softargmax(h)>.
inline Heatmap softargmax_backward(const Heatmap& h, const Vec2& grad_xy) {
  const Vec2 out = softargmax(h);
  const auto p = detail::softmax(h.values);
  Heatmap g(h.width, h.height);
  for (int j = 0; j < h.height; ++j) {
    for (int i = 0; i < h.width; ++i) {
      const double w = p[static_cast<std::size_t>(j) * h.width + i];
      const double ax = static_cast<double>(i + 1) / h.width;
      const double ay = static_cast<double>(j + 1) / h.height;
      g.at(i, j) = w * (grad_xy.x() * (ax - out.x()) + grad_xy.y() * (ay - out.y()));
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Bilinear sampling

struct BilinearSample {
  double value = 0.0;
  double d_dx = 0.0;
  double d_dy = 0.0;
  bool clamped = false;  // query was outside the grid and was clamped onto it
};

// Sample at continuous grid coordinates; nodes sit at integer (x, y).
inline BilinearSample bilinear_sample(const FeaturePlane& grid, double x, double y) {
  BilinearSample s;
  const double max_x = grid.width - 1;
  const double max_y = grid.height - 1;
  if (!(x >= 0.0 && x <= max_x && y >= 0.0 && y <= max_y)) {
    s.clamped = true;
    x = std::clamp(std::isfinite(x) ? x : 0.0, 0.0, max_x);
    y = std::clamp(std::isfinite(y) ? y : 0.0, 0.0, max_y);
  }
  const int x0 = std::min(static_cast<int>(std::floor(x)), std::max(grid.width - 2, 0));
  const int y0 = std::min(static_cast<int>(std::floor(y)), std::max(grid.height - 2, 0));
  const int x1 = std::min(x0 + 1, grid.width - 1);
  const int y1 = std::min(y0 + 1, grid.height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double v00 = grid.at(x0, y0);
  const double v10 = grid.at(x1, y0);
  const double v01 = grid.at(x0, y1);
  const double v11 = grid.at(x1, y1);
  s.value = (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 + (1 - fx) * fy * v01 + fx * fy * v11;
  if (!s.clamped) {
    s.d_dx = x1 == x0 ? 0.0 : (1 - fy) * (v10 - v00) + fy * (v11 - v01);
    s.d_dy = y1 == y0 ? 0.0 : (1 - fx) * (v01 - v00) + fx * (v11 - v10);
  }
  return s;
}

// Normalized landmark -> grid coordinates, the inverse of softargmax's cell
// placement: (i+1)/W maps onto node i.
inline Vec2 landmark_to_grid(const Vec2& landmark, int width, int height) {
  return {landmark.x() * width - 1.0, landmark.y() * height - 1.0};
}

// ---------------------------------------------------------------------------
// Landmark losses

// Mean squared distance between predicted landmarks and the ground-truth
// support over the supported regions. Zero (with zero gradient) when the
// support is empty.
inline LandmarkLoss loss_K(const LandmarkSet& pred, const ImageSupport& gt) {
  if (static_cast<int>(pred.size()) != gt.granularity()) {
    throw ParameterError("landmark count does not match support granularity");
  }
  LandmarkLoss out;
  out.gradient.assign(pred.size(), Vec2::Zero());
  const auto n = gt.size();
  if (n == 0) return out;
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < pred.size(); ++r) {
    const auto& g = gt[static_cast<RegionId>(r)];
    if (!g) continue;
    const Vec2 d = pred[r] - *g;
    out.value += d.squaredNorm() * inv;
    out.gradient[r] = 2.0 * inv * d;
  }
  return out;
}

inline constexpr double kDefaultSigmaSqSep = 0.025;

// Gaussian repulsion between landmarks of region pairs annotated as not in
// contact; contact and masked pairs are skipped.
inline LandmarkLoss loss_sep(const LandmarkSet& pred, const ContactSignature& sig,
                             double sigma_sq = kDefaultSigmaSqSep) {
  if (!(sigma_sq > 0.0)) throw ParameterError("separation variance must be positive");
  if (static_cast<int>(pred.size()) != sig.granularity()) {
    throw ParameterError("landmark count does not match signature granularity");
  }
  LandmarkLoss out;
  out.gradient.assign(pred.size(), Vec2::Zero());
  sig.for_each([&](RegionId a, RegionId b, ContactState s) {
    if (s != ContactState::no_contact) return;
    const Vec2 d = pred[a] - pred[b];
    const double e = std::exp(-d.squaredNorm() / (2.0 * sigma_sq));
    out.value += e;
    out.gradient[a] -= e / sigma_sq * d;
    out.gradient[b] += e / sigma_sq * d;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Weighted sigmoid cross-entropy

// Positive-class weight = clamp(#negatives / #positives, min, max) within the
// instance; negatives weigh 1.
struct ClassWeighting {
  bool enabled = true;
  double min_weight = 1.0;
  double max_weight = 100.0;

  double positive_weight(std::size_t positives, std::size_t negatives) const {
    if (!enabled || positives == 0) return 1.0;
    const double ratio = static_cast<double>(negatives) / static_cast<double>(positives);
    return std::clamp(ratio, min_weight, max_weight);
  }
};

inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace detail {

struct BceItem {
  double logit;
  bool positive;
};

// Mean over items of w * BCE(logit, label); returns per-item dLoss/dlogit.
inline double weighted_bce(const std::vector<BceItem>& items, const ClassWeighting& weighting,
                           std::vector<double>& dlogit) {
  dlogit.assign(items.size(), 0.0);
  if (items.empty()) return 0.0;
  std::size_t pos = 0;
  for (const auto& it : items) pos += it.positive;
  const double wp = weighting.positive_weight(pos, items.size() - pos);
  const double inv = 1.0 / static_cast<double>(items.size());
  double total = 0.0;
  for (std::size_t k = 0; k < items.size(); ++k) {
    const auto& it = items[k];
    const double w = it.positive ? wp : 1.0;
    total += w * (it.positive ? softplus(-it.logit) : softplus(it.logit));
    dlogit[k] = w * inv * (sigmoid(it.logit) - (it.positive ? 1.0 : 0.0));
  }
  return total * inv;
}

}  // namespace detail

inline LogitLoss weighted_cross_entropy_segmentation(const Eigen::VectorXd& logits,
                                                     const ContactSegmentation& gt,
                                                     const ClassWeighting& weighting = {}) {
  if (logits.size() != gt.granularity()) throw ParameterError("logit count does not match granularity");
  if (!logits.allFinite()) throw ParameterError("non-finite logits");
  std::vector<detail::BceItem> items;
  std::vector<RegionId> index;
  for (RegionId r = 0; r < gt.granularity(); ++r) {
    if (gt[r] == ContactState::masked) continue;
    items.push_back({logits[r], gt[r] == ContactState::contact});
    index.push_back(r);
  }
  LogitLoss out;
  out.gradient = Eigen::VectorXd::Zero(logits.size());
  std::vector<double> d;
  out.value = detail::weighted_bce(items, weighting, d);
  for (std::size_t k = 0; k < index.size(); ++k) out.gradient[index[k]] = d[k];
  return out;
}

enum class SimilarityMetric { dot_product, negative_squared_euclidean };

inline double feature_similarity(const Eigen::MatrixXd& f, Eigen::Index a, Eigen::Index b,
                                 SimilarityMetric metric) {
  if (metric == SimilarityMetric::dot_product) return f.row(a).dot(f.row(b));
  return -(f.row(a) - f.row(b)).squaredNorm();
}

// Weighted sigmoid cross-entropy of pairwise row similarities of F against
// the ground-truth contact states (unordered pairs, masked pairs skipped).
inline FeatureLoss signature_similarity_loss(const Eigen::MatrixXd& features, const ContactSignature& gt,
                                             SimilarityMetric metric = SimilarityMetric::dot_product,
                                             const ClassWeighting& weighting = {}) {
  if (features.rows() != gt.granularity()) {
    throw ParameterError("feature rows do not match signature granularity");
  }
  if (!features.allFinite()) throw ParameterError("non-finite features");
  std::vector<detail::BceItem> items;
  std::vector<RegionPair> pairs;
  gt.for_each([&](RegionId a, RegionId b, ContactState s) {
    if (s == ContactState::masked) return;
    items.push_back({feature_similarity(features, a, b, metric), s == ContactState::contact});
    pairs.emplace_back(a, b);
  });
  FeatureLoss out;
  out.gradient = Eigen::MatrixXd::Zero(features.rows(), features.cols());
  std::vector<double> d;
  out.value = detail::weighted_bce(items, weighting, d);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [a, b] = pairs[k];
    if (metric == SimilarityMetric::dot_product) {
      out.gradient.row(a) += d[k] * features.row(b);
      out.gradient.row(b) += d[k] * features.row(a);
    } else {
      const Eigen::RowVectorXd diff = features.row(a) - features.row(b);
      out.gradient.row(a) -= 2.0 * d[k] * diff;
      out.gradient.row(b) += 2.0 * d[k] * diff;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

struct LossWeights {
  double w_sep = 5.0;
  double w_K = 5.0;
  double w_S = 1.0;
  double w_C = 1.0;

  void validate() const {
    if (w_sep < 0.0 || w_K < 0.0 || w_S < 0.0 || w_C < 0.0) {
      throw ParameterError("loss weights must be non-negative");
    }
  }
};

struct TrainLossParts {
  double sep = 0.0;
  double K = 0.0;
  double S = 0.0;
  double C = 0.0;
};

inline double total_train_loss(const TrainLossParts& parts, const LossWeights& w = {}) {
  w.validate();
  return w.w_sep * parts.sep + w.w_K * parts.K + w.w_S * parts.S + w.w_C * parts.C;
}

}  // namespace selfcontact
