#pragma once

// Consistency post-processing of predicted signatures: a correspondence is
// kept only if both its regions are in the predicted segmentation and their
// predicted landmarks are close in the image.

#include "selfcontact/contact.hpp"

#include <optional>
#include <string>
#include <vector>

namespace selfcontact {

struct RawPrediction {
  PairTable<double> signature_probs;
  std::vector<double> segmentation_probs;
  std::vector<std::optional<Vec2>> landmarks;  // normalized image coordinates

  int granularity() const { return signature_probs.granularity(); }

  void validate() const {
    const auto n = static_cast<std::size_t>(granularity());
    if (segmentation_probs.size() != n || landmarks.size() != n) {
      throw ParameterError("prediction sizes do not match granularity");
    }
    auto check = [](double p) {
      if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("probability outside [0,1]");
    };
    for (double p : segmentation_probs) check(p);
    for (double p : signature_probs.values()) check(p);
    for (const auto& l : landmarks) {
      if (l && !l->allFinite()) throw ParameterError("non-finite landmark");
    }
  }
};

struct FilterConfig {
  double tau_S = 0.5;
  double tau_C = 0.5;
  double tau_dist = 0.1;

  void validate() const {
    if (!(tau_S > 0.0 && tau_S < 1.0) || !(tau_C > 0.0 && tau_C < 1.0)) {
      throw ParameterError("tau_S and tau_C must lie in (0, 1)");
    }
    if (!(tau_dist > 0.0)) throw ParameterError("tau_dist must be positive");
  }
};

inline ContactSegmentation threshold_segmentation(const RawPrediction& pred, double tau_S) {
  ContactSegmentation seg(pred.granularity());
  for (RegionId r = 0; r < pred.granularity(); ++r) {
    if (pred.segmentation_probs[r] >= tau_S) seg.set(r, ContactState::contact);
  }
  return seg;
}

// Probability threshold only, no consistency rules.
inline ContactSignature threshold_signature(const RawPrediction& pred, double tau_C) {
  ContactSignature sig(pred.granularity());
  pred.signature_probs.for_each([&](RegionId a, RegionId b, double p) {
    if (p >= tau_C) sig.set(a, b, ContactState::contact);
  });
  return sig;
}

struct FilterResult {
  ContactSignature signature;
  std::vector<std::string> warnings;
};

inline FilterResult filter_signature_with_warnings(const RawPrediction& pred, const FilterConfig& cfg) {
  pred.validate();
  cfg.validate();
  FilterResult out{ContactSignature(pred.granularity()), {}};
  const auto seg = threshold_segmentation(pred, cfg.tau_S);
  std::vector<bool> warned(static_cast<std::size_t>(pred.granularity()), false);
  const double max_d2 = cfg.tau_dist * cfg.tau_dist;
  pred.signature_probs.for_each([&](RegionId a, RegionId b, double p) {
    if (p < cfg.tau_C) return;
    if (seg[a] != ContactState::contact || seg[b] != ContactState::contact) return;
    bool missing = false;
    for (auto r : {a, b}) {
      if (!pred.landmarks[r]) {
        missing = true;
        if (!warned[r]) {
          warned[r] = true;
          out.warnings.push_back("region " + std::to_string(r) +
                                 " has no landmark; its correspondences were removed");
        }
      }
    }
    if (missing) return;
    if ((*pred.landmarks[a] - *pred.landmarks[b]).squaredNorm() > max_d2) return;
    out.signature.set(a, b, ContactState::contact);
  });
  return out;
}

inline ContactSignature filter_signature(const RawPrediction& pred, const FilterConfig& cfg) {
  return filter_signature_with_warnings(pred, cfg).signature;
}

struct ThresholdGrid {
  std::vector<double> tau_S;
  std::vector<double> tau_C;
  std::vector<double> tau_dist;
};

struct SweepResult {
  FilterConfig config;
  double segmentation_iou = 0.0;  // mean, at the chosen tau_S
  double signature_iou = 0.0;     // mean, at the chosen config
};

struct ValidationInstance {
  RawPrediction prediction;
  Annotation ground_truth;
};

// tau_S maximizes mean segmentation IoU; (tau_C, tau_dist) then jointly
// maximize mean signature IoU with tau_S fixed. Grids are scanned in
// ascending order and only strict improvements replace the incumbent, so
// ties resolve to the smallest thresholds.
inline SweepResult sweep_thresholds(const std::vector<ValidationInstance>& set, ThresholdGrid grid) {
  if (set.empty()) throw ParameterError("sweep_thresholds needs a non-empty validation set");
  if (grid.tau_S.empty() || grid.tau_C.empty() || grid.tau_dist.empty()) {
    throw ParameterError("threshold grids must be non-empty");
  }
  for (auto* g : {&grid.tau_S, &grid.tau_C, &grid.tau_dist}) std::sort(g->begin(), g->end());

  std::vector<ContactSegmentation> gt_seg;
  gt_seg.reserve(set.size());
  for (const auto& inst : set) gt_seg.push_back(inst.ground_truth.segmentation());
  const double n = static_cast<double>(set.size());

  SweepResult best;
  best.segmentation_iou = -1.0;
  for (double ts : grid.tau_S) {
    double sum = 0.0;
    for (std::size_t k = 0; k < set.size(); ++k) {
      sum += iou_segmentation(threshold_segmentation(set[k].prediction, ts), gt_seg[k]);
    }
    if (sum / n > best.segmentation_iou) {
      best.segmentation_iou = sum / n;
      best.config.tau_S = ts;
    }
  }

  best.signature_iou = -1.0;
  for (double tc : grid.tau_C) {
    for (double td : grid.tau_dist) {
      const FilterConfig cfg{best.config.tau_S, tc, td};
      double sum = 0.0;
      for (const auto& inst : set) {
        sum += iou_signature(filter_signature(inst.prediction, cfg), inst.ground_truth.signature);
      }
      if (sum / n > best.signature_iou) {
        best.signature_iou = sum / n;
        best.config.tau_C = tc;
        best.config.tau_dist = td;
      }
    }
  }
  return best;
}

}  // namespace selfcontact
