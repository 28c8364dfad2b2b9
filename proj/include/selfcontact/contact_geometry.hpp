#pragma once

// Self-contact consistency losses over posed facets. Region-to-region
// distance is the bidirectional sum of nearest-neighbour facet-center
// distances; the normal term sums dot products of the matched facets'
// normals. Gradients are taken with the matches held fixed.

#include "selfcontact/body_model.hpp"
#include "selfcontact/contact.hpp"
#include "selfcontact/kdtree.hpp"
#include "selfcontact/regions.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace selfcontact {

struct FacetMatch {
  FacetId first = -1;   // facet of r1
  FacetId second = -1;  // facet of r2
  bool operator==(const FacetMatch& o) const { return first == o.first && second == o.second; }
};

struct PairMatches {
  RegionId r1 = -1;
  RegionId r2 = -1;
  std::vector<FacetMatch> forward;   // every selected facet of r1 with its nearest in r2
  std::vector<FacetMatch> backward;  // every selected facet of r2 with its nearest in r1
  std::vector<FacetMatch> normal_matches;  // forward ∪ backward, mutual matches once
};

// Matches of every contact pair, ordered by (r1, r2).
using MatchSet = std::vector<PairMatches>;

enum class NnBackend { kdtree, brute_force };

namespace detail {

class FacetIndex {
 public:
  FacetIndex(const std::vector<Facet>& facets, const std::vector<FacetId>& ids, NnBackend backend)
      : facets_(facets), ids_(ids), backend_(backend) {
    if (backend_ == NnBackend::kdtree) {
      std::vector<Vec3> pts;
      pts.reserve(ids.size());
      for (auto f : ids) pts.push_back(facets[f].center);
      tree_ = KdTree<3>(std::move(pts), ids);
    }
  }

  KdTree<3>::Hit nearest(const Vec3& q) const {
    if (backend_ == NnBackend::kdtree) return tree_.nearest(q);
    KdTree<3>::Hit best;
    for (auto f : ids_) {  // ids are ascending: strict < keeps the lowest id on ties
      const double d = (facets_[f].center - q).squaredNorm();
      if (d < best.squared_distance) best = {f, d};
    }
    return best;
  }

 private:
  const std::vector<Facet>& facets_;
  const std::vector<FacetId>& ids_;
  NnBackend backend_;
  KdTree<3> tree_;
};

}  // namespace detail

struct PhiResult {
  double value = 0.0;
  PairMatches matches;
};

inline PhiResult phi_D(const std::vector<Facet>& facets, const RegionMap& map, RegionId r1, RegionId r2,
                       FacetSelection selection = FacetSelection::all(),
                       NnBackend backend = NnBackend::kdtree) {
  if (facets.size() != map.facet_count()) throw ParameterError("facet count does not match region map");
  auto s1 = region_facets(map, r1, selection, facets);
  auto s2 = region_facets(map, r2, selection, facets);
  if (s1.empty() || s2.empty()) throw ParameterError("empty region selection");
  std::sort(s1.begin(), s1.end());
  std::sort(s2.begin(), s2.end());
  const detail::FacetIndex idx1(facets, s1, backend);
  const detail::FacetIndex idx2(facets, s2, backend);

  PhiResult out;
  out.matches.r1 = r1;
  out.matches.r2 = r2;
  for (auto f1 : s1) {
    const auto hit = idx2.nearest(facets[f1].center);
    out.matches.forward.push_back({f1, hit.id});
    out.value += std::sqrt(hit.squared_distance);
  }
  for (auto f2 : s2) {
    const auto hit = idx1.nearest(facets[f2].center);
    out.matches.backward.push_back({hit.id, f2});
    out.value += std::sqrt(hit.squared_distance);
  }
  auto& nm = out.matches.normal_matches;
  nm = out.matches.forward;
  for (const auto& m : out.matches.backward) {
    // Forward holds one entry per r1 facet, so a duplicate can only be m.first's.
    const auto it = std::lower_bound(out.matches.forward.begin(), out.matches.forward.end(), m,
                                     [](const FacetMatch& a, const FacetMatch& b) { return a.first < b.first; });
    if (it != out.matches.forward.end() && *it == m) continue;
    nm.push_back(m);
  }
  return out;
}

struct ContactLossValue {
  double value = 0.0;
  std::vector<double> per_pair;  // aligned with matches
  MatchSet matches;
};

// Sum of phi_D over the pairs marked contact; masked pairs are skipped.
inline ContactLossValue loss_D(const std::vector<Facet>& facets, const ContactSignature& sig,
                               const RegionMap& map, FacetSelection selection = FacetSelection::all(),
                               NnBackend backend = NnBackend::kdtree) {
  if (sig.granularity() != map.granularity()) {
    throw ParameterError("signature granularity does not match region map");
  }
  ContactLossValue out;
  for (const auto& [a, b] : sig.contact_pairs()) {
    auto phi = phi_D(facets, map, a, b, selection, backend);
    out.value += phi.value;
    out.per_pair.push_back(phi.value);
    out.matches.push_back(std::move(phi.matches));
  }
  return out;
}

// L_D with the matches frozen.
inline double loss_D_frozen(const std::vector<Facet>& facets, const MatchSet& matches) {
  double total = 0.0;
  for (const auto& pm : matches) {
    for (const auto* list : {&pm.forward, &pm.backward}) {
      for (const auto& m : *list) total += (facets[m.first].center - facets[m.second].center).norm();
    }
  }
  return total;
}

namespace detail {

inline void add_center_gradient(const std::vector<Face>& faces, FacetId f, const Vec3& g, Point3List& out) {
  for (auto v : faces[f]) out[v] += g / 3.0;
}

// Pulls a gradient on a facet's unit normal back onto its three corners.
inline void add_normal_gradient(const Point3List& vertices, const std::vector<Face>& faces, FacetId f,
                                const Vec3& g_normal, Point3List& out) {
  const auto& face = faces[f];
  const Vec3& p0 = vertices[face[0]];
  const Vec3 e1 = vertices[face[1]] - p0;
  const Vec3 e2 = vertices[face[2]] - p0;
  const Vec3 c = e1.cross(e2);
  const double len = c.norm();
  const Vec3 n = c / len;
  const Vec3 gc = (g_normal - n * n.dot(g_normal)) / len;
  const Vec3 g1 = e2.cross(gc);
  const Vec3 g2 = gc.cross(e1);
  out[face[1]] += g1;
  out[face[2]] += g2;
  out[face[0]] -= g1 + g2;
}

}  // namespace detail

// d L_D / d vertex with frozen matches. Coincident centers contribute a zero
// subgradient.
inline Point3List loss_D_vertex_gradient(const Point3List& vertices, const std::vector<Face>& faces,
                                         const std::vector<Facet>& facets, const MatchSet& matches) {
  Point3List g(vertices.size(), Vec3::Zero());
  for (const auto& pm : matches) {
    for (const auto* list : {&pm.forward, &pm.backward}) {
      for (const auto& m : *list) {
        const Vec3 d = facets[m.first].center - facets[m.second].center;
        const double len = d.norm();
        if (len == 0.0) continue;
        const Vec3 u = d / len;
        detail::add_center_gradient(faces, m.first, u, g);
        detail::add_center_gradient(faces, m.second, -u, g);
      }
    }
  }
  return g;
}

inline double loss_N(const std::vector<Facet>& facets, const MatchSet& matches) {
  double total = 0.0;
  for (const auto& pm : matches) {
    for (const auto& m : pm.normal_matches) {
      const Vec3& a = facets.at(static_cast<std::size_t>(m.first)).normal;
      const Vec3& b = facets.at(static_cast<std::size_t>(m.second)).normal;
      if (std::abs(a.norm() - 1.0) > 1e-6 || std::abs(b.norm() - 1.0) > 1e-6) {
        throw GeometryError("loss_N requires unit facet normals");
      }
      total += a.dot(b);
    }
  }
  return total;
}

inline Point3List loss_N_vertex_gradient(const Point3List& vertices, const std::vector<Face>& faces,
                                         const std::vector<Facet>& facets, const MatchSet& matches) {
  Point3List g(vertices.size(), Vec3::Zero());
  for (const auto& pm : matches) {
    for (const auto& m : pm.normal_matches) {
      detail::add_normal_gradient(vertices, faces, m.first, facets[m.second].normal, g);
      detail::add_normal_gradient(vertices, faces, m.second, facets[m.first].normal, g);
    }
  }
  return g;
}

// Mean over contact pairs of the minimum facet-center distance between the
// two regions, in millimeters. Empty when the signature has no contact pair.
inline std::optional<double> contact_distance_error(const std::vector<Facet>& facets, const ContactSignature& gt,
                                                    const RegionMap& map,
                                                    NnBackend backend = NnBackend::kdtree) {
  if (gt.granularity() != map.granularity()) {
    throw ParameterError("signature granularity does not match region map");
  }
  if (facets.size() != map.facet_count()) throw ParameterError("facet count does not match region map");
  const auto pairs = gt.contact_pairs();
  if (pairs.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& [a, b] : pairs) {
    const auto& sa = map.members(a);
    const auto& sb = map.members(b);
    const detail::FacetIndex idx(facets, sb, backend);
    double best = std::numeric_limits<double>::infinity();
    for (auto f : sa) best = std::min(best, idx.nearest(facets[f].center).squared_distance);
    sum += std::sqrt(best);
  }
  return 1000.0 * sum / static_cast<double>(pairs.size());
}

}  // namespace selfcontact
