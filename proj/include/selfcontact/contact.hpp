#pragma once

// Region-level self-contact representations: the symmetric pairwise
// signature, the per-region segmentation and the per-region image support,
// with coarsening, IoU metrics and dataset statistics.

#include "selfcontact/common.hpp"
#include "selfcontact/regions.hpp"

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace selfcontact {

enum class ContactState : std::uint8_t { no_contact = 0, contact = 1, masked = 2 };

inline const char* to_string(ContactState s) {
  switch (s) {
    case ContactState::no_contact: return "no-contact";
    case ContactState::contact: return "contact";
    case ContactState::masked: return "masked";
  }
  return "?";
}

inline ContactState contact_state_from_string(const std::string& s) {
  if (s == "contact") return ContactState::contact;
  if (s == "no-contact") return ContactState::no_contact;
  if (s == "masked") return ContactState::masked;
  throw ParameterError("unknown contact state '" + s + "'");
}

using RegionPair = std::pair<RegionId, RegionId>;  // always first < second

// Index of the unordered pair (a, b), a != b, in row-major upper-triangle order.
inline std::size_t pair_index(int n, RegionId a, RegionId b) {
  if (a > b) std::swap(a, b);
  const auto ua = static_cast<std::size_t>(a);
  const auto un = static_cast<std::size_t>(n);
  return ua * (2 * un - ua - 1) / 2 + static_cast<std::size_t>(b - a - 1);
}

inline std::size_t pair_count(int n) {
  return static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2;
}

// Tri-state values on unordered region pairs. Symmetric by storage.
template <typename T>
class PairTable {
 public:
  PairTable() = default;
  PairTable(int granularity, T fill)
      : n_(granularity), values_(pair_count(granularity), fill) {
    if (granularity < 1) throw ParameterError("granularity must be positive");
  }

  int granularity() const { return n_; }

  const T& operator()(RegionId a, RegionId b) const { return values_[index(a, b)]; }
  T& operator()(RegionId a, RegionId b) { return values_[index(a, b)]; }

  // Visit every unordered pair (a < b) in ascending order.
  template <typename F>
  void for_each(F&& f) const {
    std::size_t k = 0;
    for (RegionId a = 0; a < n_; ++a) {
      for (RegionId b = a + 1; b < n_; ++b) f(a, b, values_[k++]);
    }
  }

  const std::vector<T>& values() const { return values_; }
  bool operator==(const PairTable& o) const { return n_ == o.n_ && values_ == o.values_; }

 private:
  std::size_t index(RegionId a, RegionId b) const {
    if (a == b) throw ParameterError("signature pairs need two distinct regions");
    if (a < 0 || b < 0 || a >= n_ || b >= n_) {
      throw ParameterError("region pair (" + std::to_string(a) + ", " + std::to_string(b) +
                           ") out of range for granularity " + std::to_string(n_));
    }
    return pair_index(n_, a, b);
  }

  int n_ = 0;
  std::vector<T> values_;
};

class ContactSignature {
 public:
  ContactSignature() = default;
  explicit ContactSignature(int granularity) : table_(granularity, ContactState::no_contact) {}

  int granularity() const { return table_.granularity(); }
  ContactState operator()(RegionId a, RegionId b) const { return table_(a, b); }
  void set(RegionId a, RegionId b, ContactState s) { table_(a, b) = s; }

  template <typename F>
  void for_each(F&& f) const { table_.for_each(std::forward<F>(f)); }

  std::vector<RegionPair> pairs_with(ContactState s) const {
    std::vector<RegionPair> out;
    for_each([&](RegionId a, RegionId b, ContactState v) {
      if (v == s) out.emplace_back(a, b);
    });
    return out;
  }
  std::vector<RegionPair> contact_pairs() const { return pairs_with(ContactState::contact); }

  bool operator==(const ContactSignature& o) const { return table_ == o.table_; }

 private:
  PairTable<ContactState> table_;
};

class ContactSegmentation {
 public:
  ContactSegmentation() = default;
  explicit ContactSegmentation(int granularity)
      : states_(static_cast<std::size_t>(granularity), ContactState::no_contact) {
    if (granularity < 1) throw ParameterError("granularity must be positive");
  }

  int granularity() const { return static_cast<int>(states_.size()); }
  ContactState operator[](RegionId r) const { return states_.at(static_cast<std::size_t>(r)); }
  void set(RegionId r, ContactState s) {
    if (r < 0 || r >= granularity()) throw ParameterError("invalid region id " + std::to_string(r));
    states_[r] = s;
  }
  const std::vector<ContactState>& states() const { return states_; }

  std::vector<RegionId> regions_with(ContactState s) const {
    std::vector<RegionId> out;
    for (std::size_t r = 0; r < states_.size(); ++r) {
      if (states_[r] == s) out.push_back(static_cast<RegionId>(r));
    }
    return out;
  }

  bool operator==(const ContactSegmentation& o) const { return states_ == o.states_; }

 private:
  std::vector<ContactState> states_;
};

// Per-region image point in normalized coordinates [0,1]^2.
class ImageSupport {
 public:
  ImageSupport() = default;
  explicit ImageSupport(int granularity) : points_(static_cast<std::size_t>(granularity)) {}

  int granularity() const { return static_cast<int>(points_.size()); }
  const std::optional<Vec2>& operator[](RegionId r) const { return points_.at(static_cast<std::size_t>(r)); }
  void set(RegionId r, const Vec2& p) {
    check_unit_square(p);
    points_.at(static_cast<std::size_t>(r)) = p;
  }
  void clear(RegionId r) { points_.at(static_cast<std::size_t>(r)).reset(); }
  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& p : points_) n += p.has_value();
    return n;
  }

  static void check_unit_square(const Vec2& p) {
    if (!(p.x() >= 0.0 && p.x() <= 1.0 && p.y() >= 0.0 && p.y() <= 1.0)) {
      throw ParameterError("image coordinate outside [0,1]^2");
    }
  }

  bool operator==(const ImageSupport& o) const { return points_ == o.points_; }

 private:
  std::vector<std::optional<Vec2>> points_;
};

// ---------------------------------------------------------------------------

inline ContactSegmentation segmentation_from_signature(const ContactSignature& sig) {
  const int n = sig.granularity();
  std::vector<bool> contact(static_cast<std::size_t>(n), false);
  std::vector<bool> masked(static_cast<std::size_t>(n), false);
  sig.for_each([&](RegionId a, RegionId b, ContactState s) {
    if (s == ContactState::contact) contact[a] = contact[b] = true;
    if (s == ContactState::masked) masked[a] = masked[b] = true;
  });
  ContactSegmentation seg(n);
  for (RegionId r = 0; r < n; ++r) {
    if (contact[r]) {
      seg.set(r, ContactState::contact);
    } else if (masked[r]) {
      seg.set(r, ContactState::masked);
    }
  }
  return seg;
}

inline ContactSignature coarsen_signature(const ContactSignature& sig, const CoarsenMap& cmap) {
  if (cmap.fine() != sig.granularity()) {
    throw ParameterError("coarsen map expects granularity " + std::to_string(cmap.fine()) +
                         ", signature has " + std::to_string(sig.granularity()));
  }
  ContactSignature out(cmap.coarse());
  sig.for_each([&](RegionId a, RegionId b, ContactState s) {
    if (s == ContactState::no_contact) return;
    const auto ca = cmap(a);
    const auto cb = cmap(b);
    if (ca == cb) return;
    if (s == ContactState::contact) {
      out.set(ca, cb, ContactState::contact);
    } else if (out(ca, cb) == ContactState::no_contact) {
      out.set(ca, cb, ContactState::masked);
    }
  });
  return out;
}

inline ContactSegmentation coarsen_segmentation(const ContactSegmentation& seg, const CoarsenMap& cmap) {
  if (cmap.fine() != seg.granularity()) throw ParameterError("coarsen map granularity mismatch");
  ContactSegmentation out(cmap.coarse());
  for (RegionId r = 0; r < seg.granularity(); ++r) {
    const auto c = cmap(r);
    if (seg[r] == ContactState::contact) {
      out.set(c, ContactState::contact);
    } else if (seg[r] == ContactState::masked && out[c] == ContactState::no_contact) {
      out.set(c, ContactState::masked);
    }
  }
  return out;
}

namespace detail {

// |A ∩ B| / |A ∪ B| over items not masked in either input; 1 for two empty sets.
template <typename States>
double masked_iou(const States& a, const States& b) {
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == ContactState::masked || b[i] == ContactState::masked) continue;
    const bool ca = a[i] == ContactState::contact;
    const bool cb = b[i] == ContactState::contact;
    inter += ca && cb;
    uni += ca || cb;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace detail

inline double iou_signature(const ContactSignature& a, const ContactSignature& b) {
  if (a.granularity() != b.granularity()) throw ParameterError("signature granularity mismatch");
  std::vector<ContactState> va;
  std::vector<ContactState> vb;
  a.for_each([&](RegionId, RegionId, ContactState s) { va.push_back(s); });
  b.for_each([&](RegionId, RegionId, ContactState s) { vb.push_back(s); });
  return detail::masked_iou(va, vb);
}

inline double iou_segmentation(const ContactSegmentation& a, const ContactSegmentation& b) {
  if (a.granularity() != b.granularity()) throw ParameterError("segmentation granularity mismatch");
  return detail::masked_iou(a.states(), b.states());
}

struct ContactStats {
  int granularity = 0;
  std::vector<std::size_t> region_frequency;       // instances in which a region is in contact
  PairTable<std::size_t> pair_counts;              // instances in which a pair is in contact
};

inline ContactStats contact_stats(const std::vector<ContactSignature>& signatures) {
  ContactStats st;
  if (signatures.empty()) return st;
  const int n = signatures.front().granularity();
  st.granularity = n;
  st.region_frequency.assign(static_cast<std::size_t>(n), 0);
  st.pair_counts = PairTable<std::size_t>(n, 0);
  for (const auto& sig : signatures) {
    if (sig.granularity() != n) throw ParameterError("contact_stats: mixed granularities");
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    sig.for_each([&](RegionId a, RegionId b, ContactState s) {
      if (s != ContactState::contact) return;
      ++st.pair_counts(a, b);
      seen[a] = seen[b] = true;
    });
    for (int r = 0; r < n; ++r) st.region_frequency[r] += seen[r];
  }
  return st;
}

// Averages the annotator clicks of each region into one support point.
inline ImageSupport merge_support_clicks(const std::vector<Point2List>& clicks) {
  ImageSupport out(static_cast<int>(clicks.size()));
  for (std::size_t r = 0; r < clicks.size(); ++r) {
    if (clicks[r].empty()) continue;
    Vec2 sum = Vec2::Zero();
    for (const auto& c : clicks[r]) {
      ImageSupport::check_unit_square(c);
      sum += c;
    }
    out.set(static_cast<RegionId>(r), sum / static_cast<double>(clicks[r].size()));
  }
  return out;
}

// One annotated person instance.
struct Annotation {
  ContactSignature signature;
  ImageSupport support;
  std::vector<RegionId> masked_regions;

  int granularity() const { return signature.granularity(); }

  // Segmentation implied by the signature, with annotator-masked regions applied.
  ContactSegmentation segmentation() const {
    auto seg = segmentation_from_signature(signature);
    for (auto r : masked_regions) seg.set(r, ContactState::masked);
    return seg;
  }

  // Support points are only allowed on regions in contact.
  void validate() const {
    if (support.granularity() != signature.granularity()) {
      throw ParameterError("support granularity differs from signature granularity");
    }
    for (auto r : masked_regions) {
      if (r < 0 || r >= granularity()) throw ParameterError("masked region out of range");
    }
    const auto seg = segmentation_from_signature(signature);
    for (RegionId r = 0; r < granularity(); ++r) {
      if (support[r] && seg[r] != ContactState::contact) {
        throw ParameterError("image support given for region " + std::to_string(r) +
                             " which is not in contact");
      }
    }
  }

  bool operator==(const Annotation& o) const {
    return signature == o.signature && support == o.support && masked_regions == o.masked_regions;
  }
};

inline Annotation coarsen_annotation(const Annotation& ann, const CoarsenMap& cmap) {
  Annotation out;
  out.signature = coarsen_signature(ann.signature, cmap);
  // Coarse support: mean of the fine support points mapped onto a region.
  std::vector<Point2List> clicks(static_cast<std::size_t>(cmap.coarse()));
  for (RegionId r = 0; r < ann.support.granularity(); ++r) {
    if (ann.support[r]) clicks[cmap(r)].push_back(*ann.support[r]);
  }
  out.support = merge_support_clicks(clicks);
  const auto seg = segmentation_from_signature(out.signature);
  for (RegionId r = 0; r < cmap.coarse(); ++r) {
    if (seg[r] != ContactState::contact) out.support.clear(r);
  }
  std::vector<bool> masked(static_cast<std::size_t>(cmap.coarse()), false);
  for (auto r : ann.masked_regions) masked[cmap(r)] = true;
  for (RegionId r = 0; r < cmap.coarse(); ++r) {
    if (masked[r]) out.masked_regions.push_back(r);
  }
  return out;
}

// Precision/recall over binary signature entries (masked pairs skipped).
struct PrecisionRecall {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  double precision() const {
    const auto d = true_positives + false_positives;
    return d == 0 ? 1.0 : static_cast<double>(true_positives) / static_cast<double>(d);
  }
  double recall() const {
    const auto d = true_positives + false_negatives;
    return d == 0 ? 1.0 : static_cast<double>(true_positives) / static_cast<double>(d);
  }
};

inline PrecisionRecall precision_recall(const ContactSignature& pred, const ContactSignature& gt) {
  if (pred.granularity() != gt.granularity()) throw ParameterError("signature granularity mismatch");
  PrecisionRecall pr;
  gt.for_each([&](RegionId a, RegionId b, ContactState g) {
    const auto p = pred(a, b);
    if (g == ContactState::masked || p == ContactState::masked) return;
    const bool pc = p == ContactState::contact;
    const bool gc = g == ContactState::contact;
    pr.true_positives += pc && gc;
    pr.false_positives += pc && !gc;
    pr.false_negatives += !pc && gc;
  });
  return pr;
}

}  // namespace selfcontact
