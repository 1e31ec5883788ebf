#include "ppf/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "ppf/config.hpp"
#include "ppf/error.hpp"
#include "ppf/io.hpp"
#include "ppf/parallel.hpp"
#include "ppf/pipeline.hpp"

namespace ppf {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kToolVersion = "1.0";

/// "blob:<radius>" or a PLY path.
Mesh load_model_arg(const std::string& arg, int normal_k) {
  if (arg.rfind("blob:", 0) == 0) {
    double radius = 0.0;
    try {
      radius = std::stod(arg.substr(5));
    } catch (const std::exception&) {
      radius = 0.0;
    }
    if (!(radius > 0.0)) throw std::invalid_argument("bad built-in model '" + arg + "'");
    return make_blob(radius);
  }
  return load_model_file(arg, normal_k);
}

void emit(std::ostream& out, const json& j) { out << j.dump() << '\n'; }

json metadata(const std::string& command, const PipelineConfig& cfg, json inputs) {
  return json{{"type", "metadata"},
              {"tool_version", kToolVersion},
              {"command", command},
              {"config", to_json(cfg)},
              {"inputs", std::move(inputs)}};
}

PipelineConfig base_config(const std::string& path) {
  return path.empty() ? PipelineConfig{} : load_config(path);
}

struct SceneDir {
  std::string name;
  fs::path dir;
};

/// Subdirectories holding depth.png and camera.txt, sorted by name.
std::vector<SceneDir> list_scenes(const fs::path& root) {
  if (!fs::is_directory(root)) throw ParseError(ParseError::Kind::kIo, "not a directory: " + root.string());
  std::vector<SceneDir> out;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::exists(e.path() / "depth.png") && fs::exists(e.path() / "camera.txt")) {
      out.push_back({e.path().filename().string(), e.path()});
    }
  }
  std::sort(out.begin(), out.end(), [](const SceneDir& a, const SceneDir& b) { return a.name < b.name; });
  return out;
}

struct GroundTruth {
  std::string model_id;
  RigidTransform pose;
};

GroundTruth read_gt(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(ParseError::Kind::kMalformedBody, path.string() + ": " + e.what(),
                     ParseError::Where::kOffset, e.byte);
  }
  GroundTruth gt;
  gt.model_id = j.value("model_id", std::string("model"));
  if (!j.contains("pose")) throw ParseError(ParseError::Kind::kMalformedBody, path.string() + ": missing pose");
  gt.pose = pose_from_json(j.at("pose"));
  return gt;
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string model, out, config;
  std::optional<double> leaf_frac;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  PipelineConfig cfg = base_config(a.config);
  if (a.leaf_frac) cfg.leaf_frac = *a.leaf_frac;
  cfg.validate();
  const Mesh mesh = load_model_arg(a.model, cfg.normal_k);
  const ModelTable table = train_model(mesh, cfg);
  table.save(a.out);
  PipelineConfig resolved = cfg;
  resolved.subsample = table.subsample_params();
  resolved.quant = table.quant();
  emit(out, metadata("train", resolved, {{"model", a.model}, {"out", a.out}}));
  emit(out, {{"type", "train"},
             {"out", a.out},
             {"model_vertices", mesh.vertices.size()},
             {"model_faces", mesh.faces.size()},
             {"points", table.model().size()},
             {"entries", table.entry_count()},
             {"leaf", table.leaf()},
             {"diameter", table.diameter()}});
  err << "trained " << a.model << ": " << table.model().size() << " points, " << table.entry_count()
      << " pairs, leaf " << fmt("%.3f", table.leaf()) << " mm -> " << a.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct DetectArgs {
  std::string ppfm, depth, intrinsics, scene, model, config, name;
  std::optional<double> depth_scale;
  std::optional<int> workers;
};

PipelineConfig detect_config(const std::string& config, std::optional<double> depth_scale,
                             std::optional<int> workers) {
  PipelineConfig cfg = base_config(config);
  if (depth_scale) cfg.depth_scale = *depth_scale;
  if (workers) cfg = cfg.with_workers(*workers);
  cfg.validate();
  return cfg;
}

/// Config as it ran: the table fixes the subsampling and quantization.
PipelineConfig resolved_for(const PipelineConfig& cfg, const ModelTable& table) {
  PipelineConfig r = cfg;
  r.subsample = table.subsample_params();
  r.quant = table.quant();
  r.min_pair_angle = table.min_pair_angle();
  return r;
}

int cmd_detect(const DetectArgs& a, std::ostream& out, std::ostream& err) {
  const PipelineConfig cfg = detect_config(a.config, a.depth_scale, a.workers);
  fs::path depth_path = a.depth, cam_path = a.intrinsics;
  std::string name = a.name;
  if (!a.scene.empty()) {
    depth_path = fs::path(a.scene) / "depth.png";
    cam_path = fs::path(a.scene) / "camera.txt";
    if (name.empty()) name = fs::path(a.scene).filename().string();
  }
  if (depth_path.empty() || cam_path.empty()) {
    throw std::invalid_argument("detect needs --scene or both --depth and --intrinsics");
  }
  if (name.empty()) name = depth_path.parent_path().filename().string();
  const ModelTable table = ModelTable::load(a.ppfm);
  std::optional<Mesh> mesh;
  if (!a.model.empty()) mesh = load_model_arg(a.model, cfg.normal_k);
  const auto [depth, cam] = load_depth(depth_path, cfg.depth_scale, cam_path);
  const Detector detector(table, make_model_view(table, mesh ? &*mesh : nullptr, cfg), cfg);
  const DetectionResult r = detector.detect(depth, cam);

  emit(out, metadata("detect", resolved_for(cfg, table),
                     {{"ppfm", a.ppfm}, {"depth", depth_path.string()}, {"intrinsics", cam_path.string()},
                      {"model", a.model}}));
  json rec = to_json(r);
  rec["type"] = "detection";
  rec["scene"] = name;
  emit(out, rec);
  if (!r.detected) {
    err << name << ": no detection (" << r.clusters << " clustered hypotheses, "
        << r.filters.rejected_consistency << " rejected by consistency, " << r.filters.rejected_edge
        << " by edge overlap)\n";
    return kExitNoDetection;
  }
  const Vec3& t = r.pose.translation();
  err << name << ": detected, score " << fmt("%.3f", r.score) << ", votes " << r.votes << ", t = ("
      << fmt("%.1f", t.x()) << ", " << fmt("%.1f", t.y()) << ", " << fmt("%.1f", t.z()) << ") mm, "
      << fmt("%.0f", r.timings.total_ms) << " ms\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string results, scene_root, model, config, csv;
  std::optional<int> workers;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const PipelineConfig cfg = detect_config(a.config, std::nullopt, a.workers);
  const Mesh mesh = load_model_arg(a.model, cfg.normal_k);
  if (!mesh.has_faces()) throw std::invalid_argument("eval-vsd needs a model with faces");
  const Renderer renderer(mesh);

  std::map<std::string, std::optional<RigidTransform>> estimates;
  {
    std::istringstream lines(read_text_file(a.results));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw ParseError(ParseError::Kind::kMalformedBody, a.results + ": " + e.what(),
                         ParseError::Where::kLine, line_no);
      }
      if (j.value("type", "") != "detection") continue;
      const std::string scene = j.value("scene", "");
      if (j.value("detected", false) && j.contains("pose") && !j.at("pose").is_null()) {
        estimates[scene] = pose_from_json(j.at("pose"));
      } else {
        estimates.try_emplace(scene, std::nullopt);
      }
    }
  }

  const auto scenes = list_scenes(a.scene_root);
  std::vector<SceneDir> targets;
  for (const auto& s : scenes) {
    if (fs::exists(s.dir / "gt.json")) targets.push_back(s);
  }
  if (targets.empty()) throw std::invalid_argument("no scenes with gt.json under " + a.scene_root);

  struct Row {
    std::string model_id;
    std::optional<double> error;
  };
  std::vector<Row> rows(targets.size());
  parallel_for(targets.size(), cfg.workers, [&](int, std::size_t i) {
    const auto& s = targets[i];
    const GroundTruth gt = read_gt(s.dir / "gt.json");
    rows[i].model_id = gt.model_id;
    const auto it = estimates.find(s.name);
    if (it == estimates.end() || !it->second) return;
    const auto [depth, cam] = load_depth(s.dir / "depth.png", cfg.depth_scale, s.dir / "camera.txt");
    rows[i].error = vsd_error(*it->second, gt.pose, renderer, depth, cam, cfg.vsd);
  });

  emit(out, metadata("eval-vsd", cfg,
                     {{"results", a.results}, {"scene_root", a.scene_root}, {"model", a.model}}));
  std::map<std::string, std::vector<TargetResult>> per_model;
  std::vector<TargetResult> all;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& r = rows[i];
    const bool correct = r.error && is_correct(*r.error, cfg.vsd);
    emit(out, {{"type", "target"},
               {"scene", targets[i].name},
               {"model_id", r.model_id},
               {"detected", r.error.has_value()},
               {"vsd_error", r.error ? json(*r.error) : json(nullptr)},
               {"correct", correct}});
    per_model[r.model_id].push_back({r.error});
    all.push_back({r.error});
  }

  auto count_correct = [&](const std::vector<TargetResult>& v) {
    return std::count_if(v.begin(), v.end(),
                         [&](const TargetResult& t) { return t.vsd_error && is_correct(*t.vsd_error, cfg.vsd); });
  };
  std::ostringstream table, csv;
  table << std::left << std::setw(20) << "model" << std::right << std::setw(9) << "targets"
        << std::setw(9) << "correct" << std::setw(9) << "recall" << '\n';
  csv << "model_id,targets,correct,recall\n";
  auto add_row = [&](const std::string& id, const std::vector<TargetResult>& v) {
    const double rec = recall(v, cfg.vsd);
    const auto ok = count_correct(v);
    table << std::left << std::setw(20) << id << std::right << std::setw(9) << v.size() << std::setw(9)
          << ok << std::setw(9) << fmt("%.3f", rec) << '\n';
    csv << id << ',' << v.size() << ',' << ok << ',' << fmt("%.6f", rec) << '\n';
    emit(out, {{"type", "summary"}, {"model_id", id}, {"targets", v.size()}, {"correct", ok}, {"recall", rec}});
  };
  for (const auto& [id, v] : per_model) add_row(id, v);
  add_row("all", all);
  err << table.str();
  if (!a.csv.empty()) {
    std::ofstream f(a.csv);
    if (!f) throw ParseError(ParseError::Kind::kIo, "cannot open " + a.csv + " for writing");
    f << csv.str();
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string spec, out_dir, model;
  std::optional<std::uint64_t> seed;
  std::optional<double> depth_scale;
};

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
  PipelineConfig cfg;
  if (a.depth_scale) cfg.depth_scale = *a.depth_scale;
  SceneFile sf = load_scene_spec(a.spec);
  if (a.seed) sf.spec.seed = *a.seed;
  if (!a.model.empty()) sf.model = a.model;
  cfg.seed = sf.spec.seed;
  cfg.validate();
  const Mesh mesh = load_model_arg(sf.model, cfg.normal_k);
  if (!mesh.has_faces()) throw std::invalid_argument("synth needs a model with faces");
  const SyntheticScene scene = generate_scene(sf.spec, mesh);

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  write_png16(dir / "depth.png", depth_to_raw(scene.depth, cfg.depth_scale));
  write_intrinsics(dir / "camera.txt", sf.spec.camera);
  const json gt{{"model_id", sf.spec.model_id}, {"pose", pose_to_json(scene.gt_pose)}};
  {
    std::ofstream f(dir / "gt.json");
    if (!f) throw ParseError(ParseError::Kind::kIo, "cannot write " + (dir / "gt.json").string());
    f << gt.dump(2) << '\n';
  }
  emit(out, metadata("synth", cfg, {{"spec", a.spec}, {"model", sf.model}, {"out", a.out_dir}}));
  emit(out, {{"type", "scene"},
             {"out", a.out_dir},
             {"model_id", sf.spec.model_id},
             {"seed", sf.spec.seed},
             {"object_pixels", scene.object_pixels},
             {"visible_object_pixels", scene.visible_object_pixels},
             {"gt", gt["pose"]}});
  const double visible = double(scene.visible_object_pixels) / double(scene.object_pixels);
  err << "wrote " << a.out_dir << ": " << scene.object_pixels << " object pixels, "
      << fmt("%.1f", 100.0 * visible) << "% visible\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ImportArgs {
  std::string scene, out_root;
  int obj_id = 0;
  std::optional<double> depth_scale, sixd_depth_scale;
};

/// SIXD scene directory (info.yml, gt.yml, depth/NNNN.png) to one scene
/// directory per image holding the first instance of `obj_id`.
int cmd_import_sixd(const ImportArgs& a, std::ostream& out, std::ostream& err) {
  PipelineConfig cfg;
  if (a.depth_scale) cfg.depth_scale = *a.depth_scale;
  cfg.validate();
  const fs::path dir(a.scene);
  const auto images = parse_sixd_scene(read_text_file(dir / "info.yml"), read_text_file(dir / "gt.yml"));
  char model_id[32];
  std::snprintf(model_id, sizeof model_id, "obj_%02d", a.obj_id);

  emit(out, metadata("import-sixd", cfg, {{"scene", a.scene}, {"out", a.out_root}, {"obj_id", a.obj_id}}));
  std::size_t written = 0;
  for (const auto& im : images) {
    const auto hit = std::find_if(im.objects.begin(), im.objects.end(),
                                  [&](const auto& o) { return o.first == a.obj_id; });
    if (hit == im.objects.end()) continue;
    char name[32];
    std::snprintf(name, sizeof name, "%04d", im.id);
    const RawDepth raw = read_png16(dir / "depth" / (std::string(name) + ".png"));
    const double scale = a.sixd_depth_scale.value_or(im.depth_scale.value_or(1.0));
    CameraIntrinsics cam = im.camera;
    cam.width = raw.width;
    cam.height = raw.height;
    cam.validate();

    const fs::path target = fs::path(a.out_root) / name;
    fs::create_directories(target);
    write_png16(target / "depth.png", depth_to_raw(depth_from_raw(raw, scale), cfg.depth_scale));
    write_intrinsics(target / "camera.txt", cam);
    const json gt{{"model_id", model_id}, {"pose", pose_to_json(hit->second)}};
    std::ofstream f(target / "gt.json");
    if (!f) throw ParseError(ParseError::Kind::kIo, "cannot write " + (target / "gt.json").string());
    f << gt.dump(2) << '\n';
    emit(out, {{"type", "scene"}, {"out", target.string()}, {"model_id", model_id}, {"gt", gt["pose"]}});
    ++written;
  }
  err << "imported " << written << " of " << images.size() << " images with " << model_id << " into "
      << a.out_root << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string ppfm, scene_root, model, config;
  std::optional<int> workers;
};

int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  const PipelineConfig cfg = detect_config(a.config, std::nullopt, a.workers);
  const ModelTable table = ModelTable::load(a.ppfm);
  std::optional<Mesh> mesh;
  if (!a.model.empty()) mesh = load_model_arg(a.model, cfg.normal_k);
  const auto scenes = list_scenes(a.scene_root);
  if (scenes.empty()) throw std::invalid_argument("no scenes under " + a.scene_root);
  // Images run in parallel; each detection is single-threaded.
  const PipelineConfig per_image = cfg.with_workers(1);
  const Detector detector(table, make_model_view(table, mesh ? &*mesh : nullptr, per_image), per_image);
  std::vector<DetectionResult> results(scenes.size());
  parallel_for(scenes.size(), cfg.workers, [&](int, std::size_t i) {
    const auto [depth, cam] =
        load_depth(scenes[i].dir / "depth.png", cfg.depth_scale, scenes[i].dir / "camera.txt");
    results[i] = detector.detect(depth, cam);
  });

  emit(out, metadata("bench", resolved_for(cfg, table),
                     {{"ppfm", a.ppfm}, {"scene_root", a.scene_root}, {"model", a.model}}));
  StageTimings sum;
  std::size_t detected = 0;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto& r = results[i];
    json rec = to_json(r);
    rec["type"] = "detection";
    rec["scene"] = scenes[i].name;
    emit(out, rec);
    detected += r.detected;
    sum.preprocess_ms += r.timings.preprocess_ms;
    sum.matching_ms += r.timings.matching_ms;
    sum.clustering_ms += r.timings.clustering_ms;
    sum.verification_ms += r.timings.verification_ms;
    sum.total_ms += r.timings.total_ms;
  }
  const double n = double(scenes.size());
  emit(out, {{"type", "bench"},
             {"images", scenes.size()},
             {"detected", detected},
             {"mean_ms",
              {{"preprocess", sum.preprocess_ms / n},
               {"matching", sum.matching_ms / n},
               {"clustering", sum.clustering_ms / n},
               {"verification", sum.verification_ms / n},
               {"total", sum.total_ms / n}}}});
  err << scenes.size() << " images, " << detected << " detections, mean " << fmt("%.1f", sum.total_ms / n)
      << " ms/image (preprocess " << fmt("%.1f", sum.preprocess_ms / n) << ", matching "
      << fmt("%.1f", sum.matching_ms / n) << ", clustering " << fmt("%.1f", sum.clustering_ms / n)
      << ", verification " << fmt("%.1f", sum.verification_ms / n) << ")\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Point pair feature object detection in depth images", "ppf"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Build a PPFM model file from a PLY model");
  t->add_option("--model", train.model, "PLY model in mm, or blob:<radius>")->required();
  t->add_option("--out", train.out, "Output PPFM file")->required();
  t->add_option("--leaf-frac", train.leaf_frac, "Subsampling leaf as a fraction of the model diameter");
  t->add_option("--config", train.config, "JSON configuration or metadata record");

  DetectArgs detect;
  auto* d = app.add_subcommand("detect", "Detect a trained model in a depth image");
  d->add_option("--ppfm", detect.ppfm, "Trained model")->required();
  d->add_option("--scene", detect.scene, "Scene directory with depth.png and camera.txt");
  d->add_option("--depth", detect.depth, "16-bit depth PNG");
  d->add_option("--intrinsics", detect.intrinsics, "Camera intrinsics text file");
  d->add_option("--model", detect.model, "Model mesh used for rendering during verification");
  d->add_option("--name", detect.name, "Scene name recorded in the result");
  d->add_option("--config", detect.config, "JSON configuration or metadata record");
  d->add_option("--depth-scale", detect.depth_scale, "mm per depth count");
  d->add_option("--workers", detect.workers, "Worker threads");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval-vsd", "Recall under the VSD error");
  e->add_option("--results", eval.results, "Detection records (JSON lines)")->required();
  e->add_option("--scene-root", eval.scene_root, "Directory of scene directories with gt.json")->required();
  e->add_option("--model", eval.model, "Model mesh, or blob:<radius>")->required();
  e->add_option("--csv", eval.csv, "Write the summary table as CSV");
  e->add_option("--config", eval.config, "JSON configuration or metadata record");
  e->add_option("--workers", eval.workers, "Worker threads");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Render a synthetic scene from a YAML scene spec");
  s->add_option("--spec", synth.spec, "Scene spec (YAML)")->required();
  s->add_option("--out", synth.out_dir, "Output scene directory")->required();
  s->add_option("--seed", synth.seed, "Override the spec's noise seed");
  s->add_option("--model", synth.model, "Override the spec's model");
  s->add_option("--depth-scale", synth.depth_scale, "mm per depth count");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Time detection over a directory of scenes");
  b->add_option("--ppfm", bench.ppfm, "Trained model")->required();
  b->add_option("--scene-root", bench.scene_root, "Directory of scene directories")->required();
  b->add_option("--model", bench.model, "Model mesh used for rendering during verification");
  b->add_option("--config", bench.config, "JSON configuration or metadata record");
  b->add_option("--workers", bench.workers, "Worker threads (parallel over images)");

  ImportArgs import;
  auto* im = app.add_subcommand("import-sixd", "Convert a SIXD scene directory into scene directories");
  im->add_option("--scene", import.scene, "Directory with info.yml, gt.yml and depth/")->required();
  im->add_option("--out", import.out_root, "Output root, one directory per image")->required();
  im->add_option("--obj-id", import.obj_id, "Object id to keep")->required();
  im->add_option("--depth-scale", import.depth_scale, "mm per depth count in the written images");
  im->add_option("--sixd-depth-scale", import.sixd_depth_scale,
                 "mm per depth count in the source images (default: info.yml, else 1)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n\n" << app.help();
    return kExitInputError;
  }

  try {
    if (t->parsed()) return cmd_train(train, out, err);
    if (d->parsed()) return cmd_detect(detect, out, err);
    if (e->parsed()) return cmd_eval(eval, out, err);
    if (s->parsed()) return cmd_synth(synth, out, err);
    if (b->parsed()) return cmd_bench(bench, out, err);
    if (im->parsed()) return cmd_import_sixd(import, out, err);
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitInputError;
  }
  return kExitInputError;
}

}  // namespace ppf
