#pragma once

// File formats: JSON codecs for every persisted type, the key=value config
// reader, and the OBJ / CSV writers. Decoders report failures as ParseError
// carrying the file name and the path of the offending field.

#include "selfcontact/body_model.hpp"
#include "selfcontact/contact.hpp"
#include "selfcontact/evaluation.hpp"
#include "selfcontact/inference_filter.hpp"
#include "selfcontact/reconstruct.hpp"
#include "selfcontact/regions.hpp"
#include "selfcontact/train_losses.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace selfcontact::io {

using Json = nlohmann::ordered_json;

// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

// ---------------------------------------------------------------------------
// Reading

// A JSON value together with where it came from, so errors can name it.
class Node {
 public:
  Node(const Json& j, std::string file, std::string path = "")
      : j_(&j), file_(std::move(file)), path_(std::move(path)) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(file_, path_.empty() ? "<root>" : path_, what);
  }

  const Json& raw() const { return *j_; }
  const std::string& file() const { return file_; }
  const std::string& path() const { return path_; }

  bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

  Node operator[](const std::string& key) const {
    if (!j_->is_object()) fail("expected an object");
    const auto it = j_->find(key);
    if (it == j_->end()) Node(*j_, file_, child_path(key)).fail("missing field");
    return {*it, file_, child_path(key)};
  }

  std::optional<Node> find(const std::string& key) const {
    if (!has(key) || (*j_)[key].is_null()) return std::nullopt;
    return Node((*j_)[key], file_, child_path(key));
  }

  std::size_t size() const {
    if (!j_->is_array()) fail("expected an array");
    return j_->size();
  }

  Node at(std::size_t i) const { return {(*j_)[i], file_, path_ + "[" + std::to_string(i) + "]"}; }

  bool is_null() const { return j_->is_null(); }

  double number() const {
    if (!j_->is_number()) fail("expected a number");
    const double v = j_->get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }

  std::int64_t integer() const {
    if (!j_->is_number_integer()) fail("expected an integer");
    return j_->get<std::int64_t>();
  }

  std::int32_t int32() const {
    const auto v = integer();
    if (v < INT32_MIN || v > INT32_MAX) fail("integer out of range");
    return static_cast<std::int32_t>(v);
  }

  bool boolean() const {
    if (!j_->is_boolean()) fail("expected true or false");
    return j_->get<bool>();
  }

  std::string string() const {
    if (!j_->is_string()) fail("expected a string");
    return j_->get<std::string>();
  }

  template <int N>
  Eigen::Matrix<double, N, 1> vec() const {
    if (size() != static_cast<std::size_t>(N)) fail("expected " + std::to_string(N) + " numbers");
    Eigen::Matrix<double, N, 1> v;
    for (int i = 0; i < N; ++i) v[i] = at(static_cast<std::size_t>(i)).number();
    return v;
  }

  std::vector<double> numbers() const {
    std::vector<double> out(size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(i).number();
    return out;
  }

  std::vector<std::int32_t> ints() const {
    std::vector<std::int32_t> out(size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(i).int32();
    return out;
  }

  // Runs `f`, turning domain errors into a parse error at this node.
  template <typename F>
  auto guard(F&& f) const -> decltype(f()) {
    try {
      return f();
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      fail(e.what());
    }
  }

 private:
  std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const Json* j_;
  std::string file_;
  std::string path_;
};

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, "<file>", "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json parse_json(const std::string& text, const std::string& file) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(file, "<document>", e.what());
  }
}

inline Json load_json(const std::string& path) { return parse_json(read_text(path), path); }

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path + "'");
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline void save_json(const std::string& path, const Json& j) { write_text(path, dump(j)); }

// Loads `path` and decodes it with `decode(Node)`.
template <typename F>
auto load(const std::string& path, F&& decode) {
  const Json j = load_json(path);
  return decode(Node(j, path));
}

// ---------------------------------------------------------------------------
// Small pieces

template <typename V>
Json encode_vec(const V& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

// ---------------------------------------------------------------------------
// Body model: {vertices, faces, joints:[{name, parent, offset}],
// weights:[[vertex, joint, w]], regressor:[[joint, vertex, w]]}

inline Json encode(const BodyModel& m) {
  Json j;
  Json verts = Json::array();
  for (const auto& v : m.template_vertices()) verts.push_back(encode_vec(v));
  j["vertices"] = std::move(verts);
  Json faces = Json::array();
  for (const auto& f : m.faces()) faces.push_back({f[0], f[1], f[2]});
  j["faces"] = std::move(faces);
  Json joints = Json::array();
  for (const auto& jt : m.joints()) {
    joints.push_back({{"name", jt.name}, {"parent", jt.parent}, {"offset", encode_vec(jt.offset)}});
  }
  j["joints"] = std::move(joints);
  Json w = Json::array();
  for (std::size_t v = 0; v < m.skinning_weights().size(); ++v) {
    for (const auto& sw : m.skinning_weights()[v]) w.push_back({v, sw.joint, sw.weight});
  }
  j["weights"] = std::move(w);
  Json r = Json::array();
  for (std::size_t jt = 0; jt < m.joint_regressor().size(); ++jt) {
    for (const auto& rw : m.joint_regressor()[jt]) r.push_back({jt, rw.vertex, rw.weight});
  }
  j["regressor"] = std::move(r);
  return j;
}

inline BodyModel decode_body_model(const Node& n) {
  const auto vn = n["vertices"];
  Point3List verts(vn.size());
  for (std::size_t i = 0; i < verts.size(); ++i) verts[i] = vn.at(i).vec<3>();

  const auto fn = n["faces"];
  std::vector<Face> faces(fn.size());
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const auto f = fn.at(i).ints();
    if (f.size() != 3) fn.at(i).fail("expected 3 vertex indices");
    faces[i] = {f[0], f[1], f[2]};
  }

  const auto jn = n["joints"];
  std::vector<Joint> joints(jn.size());
  for (std::size_t i = 0; i < joints.size(); ++i) {
    const auto e = jn.at(i);
    joints[i].parent = e["parent"].int32();
    joints[i].offset = e["offset"].vec<3>();
    if (const auto name = e.find("name")) joints[i].name = name->string();
  }

  std::vector<std::vector<SkinWeight>> weights(verts.size());
  const auto wn = n["weights"];
  for (std::size_t i = 0; i < wn.size(); ++i) {
    const auto t = wn.at(i);
    if (t.size() != 3) t.fail("expected [vertex, joint, weight]");
    const auto v = t.at(0).int32();
    if (v < 0 || static_cast<std::size_t>(v) >= verts.size()) t.at(0).fail("vertex index out of range");
    weights[v].push_back({t.at(1).int32(), t.at(2).number()});
  }

  std::vector<std::vector<RegressorWeight>> regressor(joints.size());
  const auto rn = n["regressor"];
  for (std::size_t i = 0; i < rn.size(); ++i) {
    const auto t = rn.at(i);
    if (t.size() != 3) t.fail("expected [joint, vertex, weight]");
    const auto jt = t.at(0).int32();
    if (jt < 0 || static_cast<std::size_t>(jt) >= joints.size()) t.at(0).fail("joint index out of range");
    regressor[jt].push_back({t.at(1).int32(), t.at(2).number()});
  }
  return n.guard([&] {
    return BodyModel(std::move(verts), std::move(faces), std::move(joints), std::move(weights),
                     std::move(regressor));
  });
}

// ---------------------------------------------------------------------------
// Pose parameters: {joint_rotations:[[x,y,z]], translation, shape}

inline Json encode(const PoseParams& p) {
  Json rots = Json::array();
  for (const auto& r : p.joint_rotations) rots.push_back(encode_vec(r));
  Json j;
  j["joint_rotations"] = std::move(rots);
  j["translation"] = encode_vec(p.translation);
  j["shape"] = encode_vec(p.shape);
  return j;
}

inline PoseParams decode_pose_params(const Node& n) {
  PoseParams p;
  const auto rn = n["joint_rotations"];
  p.joint_rotations.resize(rn.size());
  for (std::size_t i = 0; i < p.joint_rotations.size(); ++i) p.joint_rotations[i] = rn.at(i).vec<3>();
  p.translation = n["translation"].vec<3>();
  p.shape = n["shape"].vec<3>();
  return p;
}

// ---------------------------------------------------------------------------
// Camera: {fx, fy, cx, cy, width, height, rotation: 3 rows, translation}

inline Json encode(const Camera& c) {
  Json rows = Json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(encode_vec(Vec3(c.rotation.row(r).transpose())));
  Json j;
  j["fx"] = c.fx;
  j["fy"] = c.fy;
  j["cx"] = c.cx;
  j["cy"] = c.cy;
  j["width"] = c.width;
  j["height"] = c.height;
  j["rotation"] = std::move(rows);
  j["translation"] = encode_vec(c.translation);
  return j;
}

inline Camera decode_camera(const Node& n) {
  Camera c;
  c.fx = n["fx"].number();
  c.fy = n["fy"].number();
  c.cx = n["cx"].number();
  c.cy = n["cy"].number();
  if (const auto w = n.find("width")) c.width = w->number();
  if (const auto h = n.find("height")) c.height = h->number();
  const auto rows = n["rotation"];
  if (rows.size() != 3) rows.fail("expected 3 rows");
  for (int r = 0; r < 3; ++r) c.rotation.row(r) = rows.at(static_cast<std::size_t>(r)).vec<3>().transpose();
  c.translation = n["translation"].vec<3>();
  n.guard([&] { c.validate(); });
  return c;
}

// ---------------------------------------------------------------------------
// Keypoints: {keypoints:[{joint, x, y, visible}]}, pixels

inline Json encode(const std::vector<Keypoint>& kps) {
  Json a = Json::array();
  for (const auto& k : kps) {
    a.push_back({{"joint", k.joint}, {"x", k.pixel.x()}, {"y", k.pixel.y()}, {"visible", k.visible}});
  }
  return Json{{"keypoints", std::move(a)}};
}

inline std::vector<Keypoint> decode_keypoints(const Node& n) {
  const auto a = n["keypoints"];
  std::vector<Keypoint> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto e = a.at(i);
    out[i].joint = e["joint"].int32();
    out[i].pixel = {e["x"].number(), e["y"].number()};
    if (const auto v = e.find("visible")) out[i].visible = v->boolean();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Region and coarsen maps

inline Json encode(const RegionMap& m) {
  return Json{{"granularity", m.granularity()}, {"facet_to_region", m.facet_to_region()}};
}

inline RegionMap decode_region_map(const Node& n) {
  const int g = n["granularity"].int32();
  auto f2r = n["facet_to_region"].ints();
  return n["facet_to_region"].guard([&] { return RegionMap(g, std::move(f2r)); });
}

inline Json encode(const CoarsenMap& m) {
  return Json{{"fine", m.fine()}, {"coarse", m.coarse()}, {"map", m.map()}};
}

inline CoarsenMap decode_coarsen_map(const Node& n) {
  const int fine = n["fine"].int32();
  const int coarse = n["coarse"].int32();
  auto map = n["map"].ints();
  return n["map"].guard([&] { return CoarsenMap(fine, coarse, std::move(map)); });
}

// ---------------------------------------------------------------------------
// Annotation: {granularity, pairs:[{r1, r2, state}], support:[{r, x, y}],
// masked_regions}. Only contact and masked pairs are written.

inline Json encode(const Annotation& a) {
  Json pairs = Json::array();
  a.signature.for_each([&](RegionId r1, RegionId r2, ContactState s) {
    if (s != ContactState::no_contact) pairs.push_back({{"r1", r1}, {"r2", r2}, {"state", to_string(s)}});
  });
  Json support = Json::array();
  for (RegionId r = 0; r < a.support.granularity(); ++r) {
    if (const auto& p = a.support[r]) support.push_back({{"r", r}, {"x", p->x()}, {"y", p->y()}});
  }
  Json j;
  j["granularity"] = a.granularity();
  j["pairs"] = std::move(pairs);
  j["support"] = std::move(support);
  j["masked_regions"] = a.masked_regions;
  return j;
}

inline ContactSignature decode_signature_pairs(const Node& pairs, int granularity) {
  ContactSignature sig(granularity);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto e = pairs.at(i);
    const auto r1 = e["r1"].int32();
    const auto r2 = e["r2"].int32();
    const auto st = e["state"];
    const auto s = st.guard([&] { return contact_state_from_string(st.string()); });
    e.guard([&] {
      if (r1 == r2) throw ParameterError("a region cannot pair with itself");
      if (r1 < 0 || r2 < 0 || r1 >= granularity || r2 >= granularity) {
        throw ParameterError("region id out of range");
      }
      sig.set(r1, r2, s);
    });
  }
  return sig;
}

inline Annotation decode_annotation(const Node& n) {
  const auto gn = n["granularity"];
  const int g = gn.int32();
  if (g < 1) gn.fail("granularity must be positive");
  Annotation a;
  a.signature = decode_signature_pairs(n["pairs"], g);
  a.support = ImageSupport(g);
  if (const auto sn = n.find("support")) {
    for (std::size_t i = 0; i < sn->size(); ++i) {
      const auto e = sn->at(i);
      const auto r = e["r"].int32();
      const Vec2 p(e["x"].number(), e["y"].number());
      e.guard([&] {
        if (r < 0 || r >= g) throw ParameterError("region id out of range");
        a.support.set(r, p);
      });
    }
  }
  if (const auto mn = n.find("masked_regions")) a.masked_regions = mn->ints();
  n.guard([&] { a.validate(); });
  return a;
}

// ---------------------------------------------------------------------------
// Raw prediction: {granularity, segmentation_probs:[p], signature_probs:
// [{r1, r2, p}] (absent pairs are 0), landmarks:[[x, y] | null]}

inline Json encode(const RawPrediction& p) {
  Json sig = Json::array();
  p.signature_probs.for_each([&](RegionId a, RegionId b, double v) {
    if (v != 0.0) sig.push_back({{"r1", a}, {"r2", b}, {"p", v}});
  });
  Json lm = Json::array();
  for (const auto& l : p.landmarks) lm.push_back(l ? encode_vec(*l) : Json());
  Json j;
  j["granularity"] = p.granularity();
  j["segmentation_probs"] = p.segmentation_probs;
  j["signature_probs"] = std::move(sig);
  j["landmarks"] = std::move(lm);
  return j;
}

inline RawPrediction decode_raw_prediction(const Node& n) {
  const auto gn = n["granularity"];
  const int g = gn.int32();
  if (g < 1) gn.fail("granularity must be positive");
  RawPrediction p;
  p.signature_probs = PairTable<double>(g, 0.0);
  p.segmentation_probs = n["segmentation_probs"].numbers();
  const auto sn = n["signature_probs"];
  for (std::size_t i = 0; i < sn.size(); ++i) {
    const auto e = sn.at(i);
    const auto a = e["r1"].int32();
    const auto b = e["r2"].int32();
    const double v = e["p"].number();
    e.guard([&] {
      if (a == b || a < 0 || b < 0 || a >= g || b >= g) throw ParameterError("invalid region pair");
      p.signature_probs(a, b) = v;
    });
  }
  const auto ln = n["landmarks"];
  p.landmarks.resize(ln.size());
  for (std::size_t i = 0; i < ln.size(); ++i) {
    if (!ln.at(i).is_null()) p.landmarks[i] = ln.at(i).vec<2>();
  }
  n.guard([&] { p.validate(); });
  return p;
}

// ---------------------------------------------------------------------------
// Filter config: {tau_S, tau_C, tau_dist}

inline Json encode(const FilterConfig& c) {
  return Json{{"tau_S", c.tau_S}, {"tau_C", c.tau_C}, {"tau_dist", c.tau_dist}};
}

inline FilterConfig decode_filter_config(const Node& n) {
  FilterConfig c;
  c.tau_S = n["tau_S"].number();
  c.tau_C = n["tau_C"].number();
  c.tau_dist = n["tau_dist"].number();
  n.guard([&] { c.validate(); });
  return c;
}

// ---------------------------------------------------------------------------
// Training-loss bundle:
//   {signature: <annotation>, landmarks:[[x,y]] | heatmaps:[{width, height,
//    values}], segmentation_logits?:[z], features:[[f]], metric?, sigma_sq_sep?,
//    weights?:{w_sep, w_K, w_S, w_C}}
// Heatmaps, when given, replace landmarks by their softargmax.

struct LossBundle {
  Annotation ground_truth;
  std::optional<std::vector<Heatmap>> heatmaps;
  LandmarkSet landmarks;
  std::optional<Eigen::VectorXd> segmentation_logits;
  Eigen::MatrixXd features;
  SimilarityMetric metric = SimilarityMetric::dot_product;
  double sigma_sq_sep = kDefaultSigmaSqSep;
  LossWeights weights;
};

inline const char* to_string(SimilarityMetric m) {
  return m == SimilarityMetric::dot_product ? "dot-product" : "negative-squared-euclidean";
}

inline Json encode(const LossBundle& b) {
  Json j;
  j["signature"] = encode(b.ground_truth);
  if (b.heatmaps) {
    Json hs = Json::array();
    for (const auto& h : *b.heatmaps) hs.push_back({{"width", h.width}, {"height", h.height}, {"values", h.values}});
    j["heatmaps"] = std::move(hs);
  } else {
    Json lm = Json::array();
    for (const auto& l : b.landmarks) lm.push_back(encode_vec(l));
    j["landmarks"] = std::move(lm);
  }
  if (b.segmentation_logits) j["segmentation_logits"] = encode_vec(*b.segmentation_logits);
  Json f = Json::array();
  for (Eigen::Index r = 0; r < b.features.rows(); ++r) f.push_back(encode_vec(Eigen::VectorXd(b.features.row(r))));
  j["features"] = std::move(f);
  j["metric"] = to_string(b.metric);
  j["sigma_sq_sep"] = b.sigma_sq_sep;
  j["weights"] = {{"w_sep", b.weights.w_sep}, {"w_K", b.weights.w_K}, {"w_S", b.weights.w_S}, {"w_C", b.weights.w_C}};
  return j;
}

inline LossBundle decode_loss_bundle(const Node& n) {
  LossBundle b;
  b.ground_truth = decode_annotation(n["signature"]);
  const int g = b.ground_truth.granularity();
  if (const auto hn = n.find("heatmaps")) {
    std::vector<Heatmap> hs(hn->size());
    for (std::size_t i = 0; i < hs.size(); ++i) {
      const auto e = hn->at(i);
      const int w = e["width"].int32();
      const int h = e["height"].int32();
      auto values = e["values"].numbers();
      hs[i] = e.guard([&] {
        Heatmap m(w, h);
        if (values.size() != m.values.size()) throw ParameterError("values must hold width*height entries");
        m.values = std::move(values);
        m.validate();
        return m;
      });
    }
    for (const auto& h : hs) b.landmarks.push_back(softargmax(h));
    b.heatmaps = std::move(hs);
  } else {
    const auto ln = n["landmarks"];
    for (std::size_t i = 0; i < ln.size(); ++i) b.landmarks.push_back(ln.at(i).vec<2>());
  }
  if (static_cast<int>(b.landmarks.size()) != g) {
    n[b.heatmaps ? "heatmaps" : "landmarks"].fail("expected one entry per region");
  }
  if (const auto sn = n.find("segmentation_logits")) {
    const auto z = sn->numbers();
    if (static_cast<int>(z.size()) != g) sn->fail("expected one logit per region");
    b.segmentation_logits = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
  }
  const auto fn = n["features"];
  if (static_cast<int>(fn.size()) != g) fn.fail("expected one feature row per region");
  for (std::size_t r = 0; r < fn.size(); ++r) {
    const auto row = fn.at(r).numbers();
    if (r == 0) b.features.resize(g, static_cast<Eigen::Index>(row.size()));
    if (static_cast<Eigen::Index>(row.size()) != b.features.cols()) fn.at(r).fail("ragged feature matrix");
    for (std::size_t c = 0; c < row.size(); ++c) b.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
  }
  if (const auto mn = n.find("metric")) {
    const auto m = mn->string();
    if (m == "dot-product") {
      b.metric = SimilarityMetric::dot_product;
    } else if (m == "negative-squared-euclidean") {
      b.metric = SimilarityMetric::negative_squared_euclidean;
    } else {
      mn->fail("expected 'dot-product' or 'negative-squared-euclidean'");
    }
  }
  if (const auto s = n.find("sigma_sq_sep")) {
    b.sigma_sq_sep = s->number();
    if (!(b.sigma_sq_sep > 0.0)) s->fail("must be positive");
  }
  if (const auto wn = n.find("weights")) {
    if (const auto v = wn->find("w_sep")) b.weights.w_sep = v->number();
    if (const auto v = wn->find("w_K")) b.weights.w_K = v->number();
    if (const auto v = wn->find("w_S")) b.weights.w_S = v->number();
    if (const auto v = wn->find("w_C")) b.weights.w_C = v->number();
    wn->guard([&] { b.weights.validate(); });
  }
  return b;
}

struct LossBundleValues {
  TrainLossParts parts;
  bool has_segmentation = false;
  double total = 0.0;
};

inline LossBundleValues evaluate(const LossBundle& b) {
  LossBundleValues out;
  out.parts.sep = loss_sep(b.landmarks, b.ground_truth.signature, b.sigma_sq_sep).value;
  out.parts.K = loss_K(b.landmarks, b.ground_truth.support).value;
  if (b.segmentation_logits) {
    out.has_segmentation = true;
    out.parts.S = weighted_cross_entropy_segmentation(*b.segmentation_logits, b.ground_truth.segmentation()).value;
  }
  out.parts.C = signature_similarity_loss(b.features, b.ground_truth.signature, b.metric).value;
  out.total = total_train_loss(out.parts, b.weights);
  return out;
}

// ---------------------------------------------------------------------------
// key=value configuration (TOML-style: '#' comments, optional quotes)

struct ConfigFile {
  std::string file;
  std::map<std::string, std::string> values;
  std::map<std::string, int> lines;
};

inline ConfigFile parse_config(const std::string& text, const std::string& file) {
  ConfigFile cfg;
  cfg.file = file;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(file, "line " + std::to_string(lineno), "expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(file, "line " + std::to_string(lineno), "empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (cfg.values.count(key)) throw ParseError(file, key, "duplicate key");
    cfg.values[key] = value;
    cfg.lines[key] = lineno;
  }
  return cfg;
}

inline ConfigFile load_config(const std::string& path) { return parse_config(read_text(path), path); }

inline double config_number(const ConfigFile& cfg, const std::string& key) {
  const auto& s = cfg.values.at(key);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError(cfg.file, key, "expected a number, got '" + s + "'");
  }
  return v;
}

inline int config_int(const ConfigFile& cfg, const std::string& key) {
  const auto& s = cfg.values.at(key);
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError(cfg.file, key, "expected an integer, got '" + s + "'");
  }
  return v;
}

inline bool config_bool(const ConfigFile& cfg, const std::string& key) {
  const auto& s = cfg.values.at(key);
  if (s == "true") return true;
  if (s == "false") return false;
  throw ParseError(cfg.file, key, "expected true or false, got '" + s + "'");
}

// Applies reconstruction settings; unknown keys are errors.
inline void apply_config(const ConfigFile& cfg, TermWeights& w, OptimizerSettings& s) {
  for (const auto& [key, value] : cfg.values) {
    if (key == "lambda_S") {
      w.S = config_number(cfg, key);
    } else if (key == "lambda_psr") {
      w.psr = config_number(cfg, key);
    } else if (key == "lambda_col") {
      w.col = config_number(cfg, key);
    } else if (key == "lambda_D") {
      w.D = config_number(cfg, key);
    } else if (key == "lambda_N") {
      w.N = config_number(cfg, key);
    } else if (key == "lambda_pose") {
      w.pose = config_number(cfg, key);
    } else if (key == "lambda_shape") {
      w.shape = config_number(cfg, key);
    } else if (key == "iterations") {
      s.iterations = config_int(cfg, key);
      if (s.iterations < 0) throw ParseError(cfg.file, key, "must be non-negative");
    } else if (key == "step") {
      s.initial_step = config_number(cfg, key);
      if (!(s.initial_step > 0.0)) throw ParseError(cfg.file, key, "must be positive");
    } else if (key == "armijo_c") {
      s.armijo_c = config_number(cfg, key);
      if (!(s.armijo_c > 0.0 && s.armijo_c < 1.0)) throw ParseError(cfg.file, key, "must lie in (0, 1)");
    } else if (key == "max_backtracks") {
      s.max_backtracks = config_int(cfg, key);
      if (s.max_backtracks < 0) throw ParseError(cfg.file, key, "must be non-negative");
    } else if (key == "fd_step") {
      s.fd_step = config_number(cfg, key);
      if (!(s.fd_step > 0.0)) throw ParseError(cfg.file, key, "must be positive");
    } else if (key == "gradient") {
      if (value == "analytic") {
        s.gradient = GradientMode::analytic;
      } else if (value == "finite-difference") {
        s.gradient = GradientMode::finite_difference;
      } else {
        throw ParseError(cfg.file, key, "expected analytic or finite-difference");
      }
    } else if (key == "selection") {
      if (value == "all") {
        s.selection = FacetSelection::all();
      } else if (value == "center") {
        s.selection = FacetSelection::center();
      } else if (value.rfind("subset:", 0) == 0) {
        ConfigFile tmp{cfg.file, {{key, value.substr(7)}}, {}};
        const int stride = config_int(tmp, key);
        if (stride < 1) throw ParseError(cfg.file, key, "subset stride must be positive");
        s.selection = FacetSelection::subset(stride);
      } else {
        throw ParseError(cfg.file, key, "expected all, center or subset:<stride>");
      }
    } else if (key == "precondition") {
      s.precondition = config_bool(cfg, key);
    } else if (key == "precondition_floor") {
      s.precondition_floor = config_number(cfg, key);
      if (!(s.precondition_floor > 0.0)) throw ParseError(cfg.file, key, "must be positive");
    } else {
      throw ParseError(cfg.file, key, "unknown key");
    }
  }
  for (double v : {w.S, w.psr, w.col, w.D, w.N, w.pose, w.shape}) {
    if (!(v >= 0.0)) throw ParseError(cfg.file, "lambda_*", "weights must be non-negative");
  }
}

inline std::string encode_config(const TermWeights& w, const OptimizerSettings& s) {
  std::ostringstream out;
  out << "lambda_S = " << format_double(w.S) << "\n"
      << "lambda_psr = " << format_double(w.psr) << "\n"
      << "lambda_col = " << format_double(w.col) << "\n"
      << "lambda_D = " << format_double(w.D) << "\n"
      << "lambda_N = " << format_double(w.N) << "\n"
      << "lambda_pose = " << format_double(w.pose) << "\n"
      << "lambda_shape = " << format_double(w.shape) << "\n"
      << "iterations = " << s.iterations << "\n"
      << "step = " << format_double(s.initial_step) << "\n"
      << "armijo_c = " << format_double(s.armijo_c) << "\n"
      << "max_backtracks = " << s.max_backtracks << "\n"
      << "fd_step = " << format_double(s.fd_step) << "\n"
      << "gradient = " << (s.gradient == GradientMode::analytic ? "analytic" : "finite-difference") << "\n";
  switch (s.selection.kind) {
    case FacetSelection::Kind::all: out << "selection = all\n"; break;
    case FacetSelection::Kind::center: out << "selection = center\n"; break;
    case FacetSelection::Kind::subset: out << "selection = subset:" << s.selection.stride << "\n"; break;
  }
  out << "precondition = " << (s.precondition ? "true" : "false") << "\n"
      << "precondition_floor = " << format_double(s.precondition_floor) << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Writers

// Wavefront OBJ, y-up, meters, 1-based faces.
inline std::string encode_obj(const Point3List& vertices, const std::vector<Face>& faces) {
  std::string out;
  out.reserve(vertices.size() * 40 + faces.size() * 20);
  for (const auto& v : vertices) {
    out += "v " + format_double(v.x()) + " " + format_double(v.y()) + " " + format_double(v.z()) + "\n";
  }
  for (const auto& f : faces) {
    out += "f " + std::to_string(f[0] + 1) + " " + std::to_string(f[1] + 1) + " " + std::to_string(f[2] + 1) + "\n";
  }
  return out;
}

inline std::string encode_trace_csv(const std::vector<LossBreakdown>& trace) {
  std::string out = "iteration,L_S,L_psr,L_col,L_D,L_N,total\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& t = trace[i];
    out += std::to_string(i) + "," + format_double(t.S) + "," + format_double(t.psr) + "," + format_double(t.col) +
           "," + format_double(t.D) + "," + format_double(t.N) + "," + format_double(t.total) + "\n";
  }
  return out;
}

// Class columns × metric rows; classes without records are left empty.
inline std::string encode_table_csv(const Aggregate& agg) {
  std::string out = "metric";
  for (auto c : kScenarioClasses) out += std::string(",") + to_string(c);
  out += ",overall\n";
  auto row = [&](const char* name, double MetricValues::*field) {
    out += name;
    for (auto c : kScenarioClasses) {
      out += ",";
      if (const auto it = agg.per_class.find(c); it != agg.per_class.end()) out += format_double(it->second.*field);
    }
    out += "," + format_double(agg.overall.*field) + "\n";
  };
  row("P", &MetricValues::P);
  row("T", &MetricValues::T);
  row("V", &MetricValues::V);
  row("C", &MetricValues::C);
  return out;
}

inline std::string encode_stats_csv(const ContactStats& st) {
  std::string out = "kind,r1,r2,count\n";
  for (std::size_t r = 0; r < st.region_frequency.size(); ++r) {
    out += "region," + std::to_string(r) + ",," + std::to_string(st.region_frequency[r]) + "\n";
  }
  if (st.granularity > 0) {
    st.pair_counts.for_each([&](RegionId a, RegionId b, std::size_t n) {
      if (n > 0) out += "pair," + std::to_string(a) + "," + std::to_string(b) + "," + std::to_string(n) + "\n";
    });
  }
  return out;
}

}  // namespace selfcontact::io
