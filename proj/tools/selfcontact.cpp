// selfcontact: command-line front end for the library.
//
// Exit codes: 0 success, 1 input or runtime failure, 2 usage error.

#include "selfcontact/io.hpp"
#include "selfcontact/scenario.hpp"
#include "selfcontact/synthetic_body.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace selfcontact;

namespace {

std::vector<std::string> json_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw ParseError(dir, "<file>", "not a directory");
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Files from a single path or every *.json in a directory.
std::vector<std::string> inputs(const std::string& path) {
  if (fs::is_directory(path)) return json_files(path);
  return {path};
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    io::write_text(path, text);
  }
}

void warn(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

Annotation load_annotation(const std::string& p) { return io::load(p, io::decode_annotation); }

// --------------------------------------------------------------------------

struct SynthArgs {
  std::string scenario;
  std::uint64_t seed = 0;
  double noise = 1.0;
  std::string out;
  std::string assets;
};

void write_assets(const std::string& dir) {
  fs::create_directories(dir);
  const auto body = make_synthetic_body();
  io::save_json((fs::path(dir) / "body.json").string(), io::encode(body.model));
  for (int g : RegionHierarchy::kGranularities) {
    io::save_json((fs::path(dir) / ("regions_" + std::to_string(g) + ".json")).string(),
                  io::encode(body.regions.at(g)));
    if (g != RegionHierarchy::kGranularities.front()) {
      const int fine = RegionHierarchy::kGranularities.front();
      io::save_json((fs::path(dir) / ("coarsen_" + std::to_string(fine) + "_to_" + std::to_string(g) + ".json")).string(),
                    io::encode(body.regions.coarsen(fine, g)));
    }
  }
  io::Json names;
  for (int g : RegionHierarchy::kGranularities) names[std::to_string(g)] = body.regions.names_at(g);
  io::save_json((fs::path(dir) / "region_names.json").string(), names);
}

void run_synth(const SynthArgs& a) {
  if (!a.assets.empty()) write_assets(a.assets);
  if (a.scenario.empty()) {
    if (a.assets.empty()) throw CLI::RequiredError("--scenario or --assets");
    return;
  }
  if (a.out.empty()) throw CLI::RequiredError("--out");
  const auto b = generate_scenario({a.scenario, a.seed, a.noise});
  const fs::path dir(a.out);
  fs::create_directories(dir);
  auto path = [&](const char* name) { return (dir / name).string(); };
  io::save_json(path("body.json"), io::encode(b.body.model));
  io::save_json(path("regions.json"), io::encode(b.body.regions.at(b.annotation.granularity())));
  io::save_json(path("camera.json"), io::encode(b.camera));
  io::save_json(path("keypoints.json"), io::encode(b.keypoints));
  io::save_json(path("annotation.json"), io::encode(b.annotation));
  io::save_json(path("init.json"), io::encode(b.init));
  io::save_json(path("gt.json"), io::encode(b.ground_truth));
  io::write_text(path("config.txt"), io::encode_config(b.weights, OptimizerSettings{}));
  io::Json meta;
  meta["scenario"] = b.spec.name;
  meta["seed"] = b.spec.seed;
  meta["noise_px"] = b.spec.noise_px;
  meta["rng"] = Rng::kAlgorithm;
  meta["class"] = to_string(b.scenario_class);
  io::save_json(path("scenario.json"), meta);
}

// --------------------------------------------------------------------------

struct ReconstructArgs {
  std::string body, regions, annotation, keypoints, camera, init, config;
  std::string mesh, params, trace;
  bool no_contact = false;
};

void run_reconstruct(const ReconstructArgs& a) {
  ReconstructionProblem p;
  p.model = io::load(a.body, io::decode_body_model);
  p.regions = io::load(a.regions, io::decode_region_map);
  const auto ann = load_annotation(a.annotation);
  if (ann.granularity() != p.regions.granularity()) {
    throw ParseError(a.annotation, "granularity", "does not match the region map");
  }
  if (p.regions.facet_count() != p.model.face_count()) {
    throw ParseError(a.regions, "facet_to_region", "facet count does not match the body model");
  }
  p.signature = ann.signature;
  p.keypoints = io::load(a.keypoints, io::decode_keypoints);
  for (std::size_t i = 0; i < p.keypoints.size(); ++i) {
    const auto j = p.keypoints[i].joint;
    if (j < 0 || static_cast<std::size_t>(j) >= p.model.joint_count()) {
      throw ParseError(a.keypoints, "keypoints[" + std::to_string(i) + "].joint", "no such joint");
    }
  }
  p.camera = io::load(a.camera, io::decode_camera);
  p.init = a.init.empty() ? PoseParams::identity(p.model.joint_count()) : io::load(a.init, io::decode_pose_params);
  if (p.init.joint_rotations.size() != p.model.joint_count()) {
    throw ParseError(a.init, "joint_rotations", "count does not match the body model");
  }
  if (!a.config.empty()) io::apply_config(io::load_config(a.config), p.weights, p.settings);
  if (a.no_contact) {
    p.weights.D = 0.0;
    p.weights.N = 0.0;
  }
  p.proxies = fit_collision_proxies(p.model, p.regions);

  const auto res = optimize(p);
  warn(res.warnings);
  if (!a.mesh.empty()) io::write_text(a.mesh, io::encode_obj(pose_mesh(p.model, res.params), p.model.faces()));
  if (!a.params.empty()) io::save_json(a.params, io::encode(res.params));
  if (!a.trace.empty()) io::write_text(a.trace, io::encode_trace_csv(res.trace));
}

// --------------------------------------------------------------------------

struct EvalArgs {
  std::string body, regions, pred, gt, annotation, manifest, out;
  std::string cls = "standing";
  std::string id = "record";
};

MetricValues evaluate_record(const BodyModel& model, const RegionMap& regions, const std::string& pred_path,
                             const std::string& gt_path, const std::string& ann_path) {
  const auto pred = io::load(pred_path, io::decode_pose_params);
  const auto gt = io::load(gt_path, io::decode_pose_params);
  const auto ann = load_annotation(ann_path);
  if (ann.granularity() != regions.granularity()) {
    throw ParseError(ann_path, "granularity", "does not match the region map");
  }
  for (const auto& [p, f] : {std::pair{&pred, &pred_path}, std::pair{&gt, &gt_path}}) {
    if (p->joint_rotations.size() != model.joint_count()) {
      throw ParseError(*f, "joint_rotations", "count does not match the body model");
    }
  }
  return reconstruction_metrics(model, regions, pred, gt, ann.signature);
}

void run_eval(const EvalArgs& a) {
  const auto model = io::load(a.body, io::decode_body_model);
  const auto regions = io::load(a.regions, io::decode_region_map);
  std::vector<EvalRecord> records;
  if (!a.manifest.empty()) {
    const auto base = fs::path(a.manifest).parent_path();
    const io::Json j = io::load_json(a.manifest);
    const io::Node root(j, a.manifest);
    const auto list = root["records"];
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto e = list.at(i);
      auto rel = [&](const char* key) { return (base / e[key].string()).string(); };
      EvalRecord r;
      r.id = e.find("id") ? e["id"].string() : std::to_string(i);
      const auto cn = e["class"];
      r.scenario = cn.guard([&] { return scenario_class_from_string(cn.string()); });
      r.metrics = evaluate_record(model, regions, rel("pred"), rel("gt"), rel("annotation"));
      records.push_back(r);
    }
  } else {
    if (a.pred.empty() || a.gt.empty() || a.annotation.empty()) {
      throw CLI::RequiredError("--pred, --gt and --annotation (or --manifest)");
    }
    EvalRecord r;
    r.id = a.id;
    r.scenario = scenario_class_from_string(a.cls);
    r.metrics = evaluate_record(model, regions, a.pred, a.gt, a.annotation);
    records.push_back(r);
  }
  emit(a.out, io::encode_table_csv(aggregate(records)));
}

// --------------------------------------------------------------------------

struct FilterArgs {
  std::string prediction, config, out;
};

void run_filter(const FilterArgs& a) {
  const auto pred = io::load(a.prediction, io::decode_raw_prediction);
  const FilterConfig cfg = a.config.empty() ? FilterConfig{} : io::load(a.config, io::decode_filter_config);
  const auto res = filter_signature_with_warnings(pred, cfg);
  warn(res.warnings);
  Annotation ann;
  ann.signature = res.signature;
  ann.support = ImageSupport(pred.granularity());
  for (auto r : segmentation_from_signature(res.signature).regions_with(ContactState::contact)) {
    const auto& l = pred.landmarks[r];
    if (l && l->x() >= 0.0 && l->x() <= 1.0 && l->y() >= 0.0 && l->y() <= 1.0) ann.support.set(r, *l);
  }
  emit(a.out, io::dump(io::encode(ann)));
}

struct SweepArgs {
  std::string predictions, annotations, out;
  std::vector<double> tau_S{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<double> tau_C{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<double> tau_dist{0.025, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5};
};

void run_sweep(const SweepArgs& a) {
  std::vector<ValidationInstance> set;
  for (const auto& p : json_files(a.predictions)) {
    const auto gt_path = (fs::path(a.annotations) / fs::path(p).filename()).string();
    if (!fs::exists(gt_path)) throw ParseError(gt_path, "<file>", "no annotation for prediction " + p);
    ValidationInstance inst{io::load(p, io::decode_raw_prediction), load_annotation(gt_path)};
    if (inst.prediction.granularity() != inst.ground_truth.granularity()) {
      throw ParseError(gt_path, "granularity", "does not match the prediction");
    }
    set.push_back(std::move(inst));
  }
  const auto best = sweep_thresholds(set, {a.tau_S, a.tau_C, a.tau_dist});
  auto j = io::encode(best.config);
  j["segmentation_iou"] = best.segmentation_iou;
  j["signature_iou"] = best.signature_iou;
  emit(a.out, io::dump(j));
}

// --------------------------------------------------------------------------

struct MetricsArgs {
  std::string pred, gt, map, out;
};

void run_metrics(const MetricsArgs& a) {
  const auto preds = inputs(a.pred);
  std::vector<std::string> gts;
  if (fs::is_directory(a.gt)) {
    for (const auto& p : preds) gts.push_back((fs::path(a.gt) / fs::path(p).filename()).string());
  } else {
    gts = {a.gt};
  }
  if (gts.size() != preds.size()) throw ParseError(a.gt, "<file>", "expected a directory matching --pred");
  std::optional<CoarsenMap> cmap;
  if (!a.map.empty()) cmap = io::load(a.map, io::decode_coarsen_map);
  double seg = 0.0;
  double sig = 0.0;
  PrecisionRecall pr;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    auto p = load_annotation(preds[i]);
    auto g = load_annotation(gts[i]);
    if (cmap) {
      if (p.granularity() != cmap->fine()) throw ParseError(preds[i], "granularity", "does not match the coarsen map");
      if (g.granularity() != cmap->fine()) throw ParseError(gts[i], "granularity", "does not match the coarsen map");
      p = coarsen_annotation(p, *cmap);
      g = coarsen_annotation(g, *cmap);
    }
    if (p.granularity() != g.granularity()) throw ParseError(gts[i], "granularity", "does not match the prediction");
    seg += iou_segmentation(p.segmentation(), g.segmentation());
    sig += iou_signature(p.signature, g.signature);
    const auto one = precision_recall(p.signature, g.signature);
    pr.true_positives += one.true_positives;
    pr.false_positives += one.false_positives;
    pr.false_negatives += one.false_negatives;
  }
  const double n = static_cast<double>(preds.size());
  std::string out = "metric,value\n";
  out += "instances," + std::to_string(preds.size()) + "\n";
  out += "segmentation_iou," + io::format_double(seg / n) + "\n";
  out += "signature_iou," + io::format_double(sig / n) + "\n";
  out += "precision," + io::format_double(pr.precision()) + "\n";
  out += "recall," + io::format_double(pr.recall()) + "\n";
  emit(a.out, out);
}

struct StatsArgs {
  std::string in, out;
  int granularity = 75;
};

void run_stats(const StatsArgs& a) {
  std::vector<ContactSignature> sigs;
  for (const auto& f : inputs(a.in)) {
    auto ann = load_annotation(f);
    if (ann.granularity() != a.granularity) {
      throw ParseError(f, "granularity", "expected " + std::to_string(a.granularity));
    }
    sigs.push_back(std::move(ann.signature));
  }
  auto st = contact_stats(sigs);
  if (sigs.empty()) {
    st.granularity = a.granularity;
    st.region_frequency.assign(static_cast<std::size_t>(a.granularity), 0);
    st.pair_counts = PairTable<std::size_t>(a.granularity, 0);
  }
  emit(a.out, io::encode_stats_csv(st));
}

struct CoarsenArgs {
  std::string in, map, out;
};

void run_coarsen(const CoarsenArgs& a) {
  const auto ann = load_annotation(a.in);
  const auto cmap = io::load(a.map, io::decode_coarsen_map);
  if (ann.granularity() != cmap.fine()) throw ParseError(a.in, "granularity", "does not match the coarsen map");
  emit(a.out, io::dump(io::encode(coarsen_annotation(ann, cmap))));
}

struct LossesArgs {
  std::string in, out;
};

void run_losses_eval(const LossesArgs& a) {
  const auto bundle = io::load(a.in, io::decode_loss_bundle);
  const auto v = io::Node(io::Json(), a.in).guard([&] { return io::evaluate(bundle); });
  std::string out = "term,value\n";
  out += "L_sep," + io::format_double(v.parts.sep) + "\n";
  out += "L_K," + io::format_double(v.parts.K) + "\n";
  if (v.has_segmentation) out += "L_S," + io::format_double(v.parts.S) + "\n";
  out += "L_C," + io::format_double(v.parts.C) + "\n";
  out += "total," + io::format_double(v.total) + "\n";
  emit(a.out, out);
}

struct ExportArgs {
  std::string body, params, out;
};

void run_export(const ExportArgs& a) {
  const auto model = io::load(a.body, io::decode_body_model);
  const auto params = a.params.empty() ? PoseParams::identity(model.joint_count())
                                       : io::load(a.params, io::decode_pose_params);
  if (params.joint_rotations.size() != model.joint_count()) {
    throw ParseError(a.params, "joint_rotations", "count does not match the body model");
  }
  emit(a.out, io::encode_obj(pose_mesh(model, params), model.faces()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-contact signatures: reconstruction, losses and metrics"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic scenario bundle or the default body assets");
  s->add_option("--scenario", synth.scenario, "hand-chin | hands-together | arms-crossed | hand-knee");
  s->add_option("--seed", synth.seed, "RNG seed");
  s->add_option("--noise", synth.noise, "keypoint noise sigma, pixels")->check(CLI::NonNegativeNumber);
  s->add_option("--out", synth.out, "output directory for the bundle");
  s->add_option("--assets", synth.assets, "write body model, region maps and coarsen maps here");

  ReconstructArgs rec;
  auto* r = app.add_subcommand("reconstruct", "Fit pose parameters to keypoints and a contact signature");
  r->add_option("--body", rec.body)->required();
  r->add_option("--regions", rec.regions)->required();
  r->add_option("--annotation", rec.annotation)->required();
  r->add_option("--keypoints", rec.keypoints)->required();
  r->add_option("--camera", rec.camera)->required();
  r->add_option("--init", rec.init, "initial parameters (default: rest pose)");
  r->add_option("--config", rec.config, "key = value settings");
  r->add_option("--mesh", rec.mesh, "output OBJ");
  r->add_option("--params", rec.params, "output parameters JSON");
  r->add_option("--trace", rec.trace, "output loss trace CSV");
  r->add_flag("--no-contact", rec.no_contact, "disable the contact terms");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Reconstruction errors per scenario class (mm)");
  e->add_option("--body", ev.body)->required();
  e->add_option("--regions", ev.regions)->required();
  e->add_option("--pred", ev.pred, "predicted parameters JSON");
  e->add_option("--gt", ev.gt, "ground-truth parameters JSON");
  e->add_option("--annotation", ev.annotation, "contact annotation JSON");
  e->add_option("--class", ev.cls, "standing | sitting-no-chair | with-chair");
  e->add_option("--id", ev.id);
  e->add_option("--manifest", ev.manifest, "JSON {records:[{id, class, pred, gt, annotation}]}");
  e->add_option("--out", ev.out, "output CSV (default: stdout)");

  FilterArgs fl;
  auto* f = app.add_subcommand("filter", "Consistency-filter a raw signature prediction");
  f->add_option("--prediction", fl.prediction)->required();
  f->add_option("--config", fl.config, "JSON {tau_S, tau_C, tau_dist}");
  f->add_option("--out", fl.out, "output annotation JSON (default: stdout)");

  SweepArgs sw;
  auto* w = app.add_subcommand("sweep", "Choose filter thresholds on a validation set");
  w->add_option("--predictions", sw.predictions, "directory of prediction JSON")->required();
  w->add_option("--annotations", sw.annotations, "directory of annotations with matching names")->required();
  w->add_option("--tau-s", sw.tau_S)->delimiter(',');
  w->add_option("--tau-c", sw.tau_C)->delimiter(',');
  w->add_option("--tau-dist", sw.tau_dist)->delimiter(',');
  w->add_option("--out", sw.out, "output config JSON (default: stdout)");

  MetricsArgs mt;
  auto* m = app.add_subcommand("metrics", "IoU, precision and recall of predicted annotations");
  m->add_option("--pred", mt.pred, "annotation file or directory")->required();
  m->add_option("--gt", mt.gt, "annotation file or directory")->required();
  m->add_option("--map", mt.map, "coarsen both sides first");
  m->add_option("--out", mt.out, "output CSV (default: stdout)");

  StatsArgs st;
  auto* t = app.add_subcommand("stats", "Contact frequencies over a set of annotations");
  t->add_option("--in", st.in, "annotation file or directory")->required();
  t->add_option("--granularity", st.granularity)->check(CLI::PositiveNumber);
  t->add_option("--out", st.out, "output CSV (default: stdout)");

  CoarsenArgs co;
  auto* c = app.add_subcommand("coarsen", "Coarsen an annotation to a lower granularity");
  c->add_option("--in", co.in)->required();
  c->add_option("--map", co.map)->required();
  c->add_option("--out", co.out, "output JSON (default: stdout)");

  LossesArgs lo;
  auto* l = app.add_subcommand("losses", "Training-loss utilities");
  l->require_subcommand(1);
  auto* le = l->add_subcommand("eval", "Evaluate the training losses of a JSON bundle");
  le->add_option("--in", lo.in)->required();
  le->add_option("--out", lo.out, "output CSV (default: stdout)");

  ExportArgs ex;
  auto* x = app.add_subcommand("export-obj", "Write the posed mesh as OBJ");
  x->add_option("--body", ex.body)->required();
  x->add_option("--params", ex.params, "parameters JSON (default: rest pose)");
  x->add_option("--out", ex.out, "output OBJ (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    std::cerr << err.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*s) run_synth(synth);
    if (*r) run_reconstruct(rec);
    if (*e) run_eval(ev);
    if (*f) run_filter(fl);
    if (*w) run_sweep(sw);
    if (*m) run_metrics(mt);
    if (*t) run_stats(st);
    if (*c) run_coarsen(co);
    if (*le) run_losses_eval(lo);
    if (*x) run_export(ex);
  } catch (const CLI::Error& err) {
    std::cerr << "error: missing " << err.what() << "\n\n" << app.help();
    return 2;
  } catch (const ParseError& err) {
    std::cerr << "parse error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
