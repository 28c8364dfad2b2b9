#pragma once

// Partition of the body surface into regions, with the coarsening hierarchy
// between granularities and per-region facet queries.

#include "selfcontact/body_model.hpp"
#include "selfcontact/common.hpp"

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

namespace selfcontact {

class RegionMap {
 public:
  RegionMap() = default;

  RegionMap(int granularity, std::vector<RegionId> facet_to_region)
      : granularity_(granularity), facet_to_region_(std::move(facet_to_region)) {
    if (granularity_ < 1) throw ParameterError("region granularity must be positive");
    members_.assign(static_cast<std::size_t>(granularity_), {});
    for (std::size_t f = 0; f < facet_to_region_.size(); ++f) {
      const auto r = facet_to_region_[f];
      if (r < 0 || r >= granularity_) {
        throw ParameterError("facet " + std::to_string(f) + " assigned to invalid region " +
                             std::to_string(r));
      }
      members_[r].push_back(static_cast<FacetId>(f));
    }
    for (int r = 0; r < granularity_; ++r) {
      if (members_[r].empty()) throw ParameterError("region " + std::to_string(r) + " owns no facets");
    }
  }

  int granularity() const { return granularity_; }
  std::size_t facet_count() const { return facet_to_region_.size(); }
  const std::vector<RegionId>& facet_to_region() const { return facet_to_region_; }
  RegionId region_of(FacetId f) const { return facet_to_region_.at(static_cast<std::size_t>(f)); }

  // Sorted facet ids of region r.
  const std::vector<FacetId>& members(RegionId r) const {
    check_region(r);
    return members_[r];
  }

  void check_region(RegionId r) const {
    if (r < 0 || r >= granularity_) {
      throw ParameterError("invalid region id " + std::to_string(r) + " for granularity " +
                           std::to_string(granularity_));
    }
  }

  bool operator==(const RegionMap& o) const {
    return granularity_ == o.granularity_ && facet_to_region_ == o.facet_to_region_;
  }

 private:
  int granularity_ = 0;
  std::vector<RegionId> facet_to_region_;
  std::vector<std::vector<FacetId>> members_;
};

class CoarsenMap {
 public:
  CoarsenMap() = default;

  CoarsenMap(int fine, int coarse, std::vector<RegionId> map)
      : fine_(fine), coarse_(coarse), map_(std::move(map)) {
    if (fine_ < 1 || coarse_ < 1) throw ParameterError("coarsen map granularities must be positive");
    if (static_cast<int>(map_.size()) != fine_) {
      throw ParameterError("coarsen map must have one entry per fine region");
    }
    std::vector<bool> hit(static_cast<std::size_t>(coarse_), false);
    for (auto c : map_) {
      if (c < 0 || c >= coarse_) throw ParameterError("coarsen map target out of range");
      hit[c] = true;
    }
    if (std::find(hit.begin(), hit.end(), false) != hit.end()) {
      throw ParameterError("coarsen map is not surjective");
    }
  }

  static CoarsenMap identity(int n) {
    std::vector<RegionId> m(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) m[i] = i;
    return {n, n, std::move(m)};
  }

  int fine() const { return fine_; }
  int coarse() const { return coarse_; }
  const std::vector<RegionId>& map() const { return map_; }
  RegionId operator()(RegionId fine_region) const { return map_.at(static_cast<std::size_t>(fine_region)); }

  bool operator==(const CoarsenMap& o) const {
    return fine_ == o.fine_ && coarse_ == o.coarse_ && map_ == o.map_;
  }

 private:
  int fine_ = 0;
  int coarse_ = 0;
  std::vector<RegionId> map_;
};

// first: fine -> mid, second: mid -> coarse.
inline CoarsenMap compose(const CoarsenMap& first, const CoarsenMap& second) {
  if (first.coarse() != second.fine()) throw ParameterError("coarsen maps do not chain");
  std::vector<RegionId> m(first.map().size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = second(first(static_cast<RegionId>(i)));
  return {first.fine(), second.coarse(), std::move(m)};
}

inline RegionMap coarsen_region_map(const RegionMap& map, const CoarsenMap& cmap) {
  if (cmap.fine() != map.granularity()) {
    throw ParameterError("coarsen map expects granularity " + std::to_string(cmap.fine()) +
                         ", region map has " + std::to_string(map.granularity()));
  }
  std::vector<RegionId> out(map.facet_count());
  for (std::size_t f = 0; f < out.size(); ++f) out[f] = cmap(map.facet_to_region()[f]);
  return {cmap.coarse(), std::move(out)};
}

// Which facets of a region take part in region-to-region distances.
struct FacetSelection {
  enum class Kind { all, center, subset };
  Kind kind = Kind::all;
  int stride = 1;  // subset: every stride-th facet by sorted id

  static FacetSelection all() { return {}; }
  static FacetSelection center() { return {Kind::center, 1}; }
  static FacetSelection subset(int k) {
    if (k < 1) throw ParameterError("subset stride must be >= 1");
    return {Kind::subset, k};
  }
};

inline Vec3 region_center(const RegionMap& map, const std::vector<Facet>& facets, RegionId r) {
  const auto& ids = map.members(r);
  Vec3 sum = Vec3::Zero();
  for (auto f : ids) sum += facets.at(static_cast<std::size_t>(f)).center;
  return sum / static_cast<double>(ids.size());
}

// Facet ids of region r under a selection mode. `facets` is only consulted by
// the center mode.
inline std::vector<FacetId> region_facets(const RegionMap& map, RegionId r, FacetSelection mode,
                                          const std::vector<Facet>& facets = {}) {
  const auto& ids = map.members(r);
  switch (mode.kind) {
    case FacetSelection::Kind::all:
      return ids;
    case FacetSelection::Kind::subset: {
      std::vector<FacetId> out;
      for (std::size_t i = 0; i < ids.size(); i += static_cast<std::size_t>(mode.stride)) {
        out.push_back(ids[i]);
      }
      return out;
    }
    case FacetSelection::Kind::center: {
      if (facets.size() != map.facet_count()) {
        throw ParameterError("center selection needs posed facets for every facet");
      }
      const Vec3 c = region_center(map, facets, r);
      FacetId best = ids.front();
      double best_d = std::numeric_limits<double>::infinity();
      for (auto f : ids) {
        const double d = (facets[f].center - c).squaredNorm();
        if (d < best_d) {  // strict: lowest id wins ties
          best_d = d;
          best = f;
        }
      }
      return {best};
    }
  }
  return ids;
}

}  // namespace selfcontact
