#include "ppf/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <stdexcept>

#include "ppf/error.hpp"
#include "ppf/io.hpp"

namespace ppf {

using nlohmann::json;

void PipelineConfig::validate() const {
  if (!(leaf_frac > 0.0 && leaf_frac < 1.0)) throw std::invalid_argument("leaf_frac must be in (0, 1)");
  SubsampleParams sp = subsample;
  sp.leaf = 1.0;  // resolved later
  sp.validate();
  QuantizationParams q = quant;
  q.d_max = 1.0;
  q.validate();
  if (!(min_pair_angle >= 0.0 && min_pair_angle < std::numbers::pi)) {
    throw std::invalid_argument("min_pair_angle must be in [0, pi)");
  }
  match.validate();
  verify.validate();
  vsd.validate();
  if (!(depth_scale > 0.0)) throw std::invalid_argument("depth_scale must be positive");
  if (!(scene_normal_radius > 0.0)) throw std::invalid_argument("scene_normal_radius must be positive");
  if (normal_k < 3) throw std::invalid_argument("normal_k must be >= 3");
  if (!(splat_radius > 0.0)) throw std::invalid_argument("splat_radius must be positive");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
}

PipelineConfig PipelineConfig::with_workers(int n) const {
  PipelineConfig c = *this;
  c.workers = n;
  c.match.workers = n;
  c.verify.workers = n;
  return c;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// Reads known keys from one JSON object and rejects the rest.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) fail("expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(std::string("bad value for '") + key + "'");
    }
  }

  void get(const char* key, std::optional<double>& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    if (v.is_null()) {
      out.reset();
    } else if (v.is_number()) {
      out = v.get<double>();
    } else {
      fail(std::string("bad value for '") + key + "'");
    }
  }

  const json* child(const char* key) {
    used_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.count(k)) fail("unknown key '" + k + "'");
    }
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(ParseError::Kind::kMalformedBody, "config " + where_ + ": " + msg);
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

}  // namespace

json to_json(const PipelineConfig& c) {
  return json{
      {"leaf_frac", c.leaf_frac},
      {"subsample",
       {{"leaf", c.subsample.leaf},
        {"normal_cluster_angle", c.subsample.normal_cluster_angle},
        {"merge_neighbor_clusters", c.subsample.merge_neighbor_clusters}}},
      {"quantization",
       {{"d_max", c.quant.d_max},
        {"n_dist_bins", c.quant.n_dist_bins},
        {"n_angle_bins", c.quant.n_angle_bins},
        {"noise_fraction", c.quant.noise_fraction}}},
      {"min_pair_angle", c.min_pair_angle},
      {"match",
       {{"scene_ref_stride", c.match.scene_ref_stride},
        {"n_alpha_bins", c.match.n_alpha_bins},
        {"cluster_trans_thresh", opt(c.match.cluster_trans_thresh)},
        {"cluster_rot_thresh", c.match.cluster_rot_thresh},
        {"max_hypotheses_out", c.match.max_hypotheses_out}}},
      {"verify",
       {{"rescore_top", c.verify.rescore_top},
        {"icp_top", c.verify.icp_top},
        {"fit_thresh", opt(c.verify.fit_thresh)},
        {"icp_iters", c.verify.icp_iters},
        {"icp_reject_dist", opt(c.verify.icp_reject_dist)},
        {"icp_reject_angle", c.verify.icp_reject_angle},
        {"occlusion_margin", c.verify.occlusion_margin},
        {"nonconsistent_max", c.verify.nonconsistent_max},
        {"edge_depth_jump", c.verify.edge_depth_jump},
        {"edge_dilation", c.verify.edge_dilation},
        {"edge_overlap_min", c.verify.edge_overlap_min}}},
      {"vsd", {{"delta", c.vsd.delta}, {"tau", c.vsd.tau}, {"t", c.vsd.t}}},
      {"depth_scale", c.depth_scale},
      {"scene_normal_radius", c.scene_normal_radius},
      {"normal_k", c.normal_k},
      {"splat_radius", c.splat_radius},
      {"seed", c.seed},
      {"workers", c.workers},
  };
}

PipelineConfig config_from_json(const json& in) {
  const json& j = (in.is_object() && in.contains("config")) ? in.at("config") : in;
  PipelineConfig c;
  Fields top(j, "root");
  top.get("leaf_frac", c.leaf_frac);
  top.get("min_pair_angle", c.min_pair_angle);
  top.get("depth_scale", c.depth_scale);
  top.get("scene_normal_radius", c.scene_normal_radius);
  top.get("normal_k", c.normal_k);
  top.get("splat_radius", c.splat_radius);
  top.get("seed", c.seed);
  top.get("workers", c.workers);
  if (const json* s = top.child("subsample")) {
    Fields f(*s, "subsample");
    f.get("leaf", c.subsample.leaf);
    f.get("normal_cluster_angle", c.subsample.normal_cluster_angle);
    f.get("merge_neighbor_clusters", c.subsample.merge_neighbor_clusters);
    f.finish();
  }
  if (const json* s = top.child("quantization")) {
    Fields f(*s, "quantization");
    f.get("d_max", c.quant.d_max);
    f.get("n_dist_bins", c.quant.n_dist_bins);
    f.get("n_angle_bins", c.quant.n_angle_bins);
    f.get("noise_fraction", c.quant.noise_fraction);
    f.finish();
  }
  if (const json* s = top.child("match")) {
    Fields f(*s, "match");
    f.get("scene_ref_stride", c.match.scene_ref_stride);
    f.get("n_alpha_bins", c.match.n_alpha_bins);
    f.get("cluster_trans_thresh", c.match.cluster_trans_thresh);
    f.get("cluster_rot_thresh", c.match.cluster_rot_thresh);
    f.get("max_hypotheses_out", c.match.max_hypotheses_out);
    f.finish();
  }
  if (const json* s = top.child("verify")) {
    Fields f(*s, "verify");
    f.get("rescore_top", c.verify.rescore_top);
    f.get("icp_top", c.verify.icp_top);
    f.get("fit_thresh", c.verify.fit_thresh);
    f.get("icp_iters", c.verify.icp_iters);
    f.get("icp_reject_dist", c.verify.icp_reject_dist);
    f.get("icp_reject_angle", c.verify.icp_reject_angle);
    f.get("occlusion_margin", c.verify.occlusion_margin);
    f.get("nonconsistent_max", c.verify.nonconsistent_max);
    f.get("edge_depth_jump", c.verify.edge_depth_jump);
    f.get("edge_dilation", c.verify.edge_dilation);
    f.get("edge_overlap_min", c.verify.edge_overlap_min);
    f.finish();
  }
  if (const json* s = top.child("vsd")) {
    Fields f(*s, "vsd");
    f.get("delta", c.vsd.delta);
    f.get("tau", c.vsd.tau);
    f.get("t", c.vsd.t);
    f.finish();
  }
  top.finish();
  c = c.with_workers(c.workers);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(ParseError::Kind::kMalformedBody, std::string("config: ") + e.what());
  }
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(ParseError::Kind::kMalformedBody, path.string() + ": " + e.what(),
                     ParseError::Where::kOffset, e.byte);
  }
  return config_from_json(j);
}

json pose_to_json(const RigidTransform& t) {
  json r = json::array(), tr = json::array();
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) r.push_back(t.rotation()(i, k));
    tr.push_back(t.translation()[i]);
  }
  return json{{"R", r}, {"t", tr}};
}

RigidTransform pose_from_json(const json& j) {
  try {
    const auto r = j.at("R").get<std::vector<double>>();
    const auto t = j.at("t").get<std::vector<double>>();
    if (r.size() != 9 || t.size() != 3) throw std::invalid_argument("pose: R needs 9 values, t needs 3");
    Mat3 m;
    for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = r[i];
    const RigidTransform pose(m, Vec3(t[0], t[1], t[2]));
    if (!pose.is_valid(1e-5)) throw std::invalid_argument("pose: rotation is not orthonormal");
    return pose;
  } catch (const json::exception& e) {
    throw ParseError(ParseError::Kind::kMalformedBody, std::string("pose: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(ParseError::Kind::kMalformedBody, e.what());
  }
}

namespace {

[[noreturn]] void yaml_fail(const YAML::Node& node, const std::string& msg, const char* what = "scene spec") {
  const auto mark = node.Mark();
  throw ParseError(ParseError::Kind::kMalformedBody, std::string(what) + ": " + msg, ParseError::Where::kLine,
                   mark.line >= 0 ? std::uint64_t(mark.line + 1) : 0);
}

Vec3 yaml_vec3(const YAML::Node& node, const char* what) {
  if (!node.IsSequence() || node.size() != 3) yaml_fail(node, std::string(what) + " needs 3 values");
  return {node[0].as<double>(), node[1].as<double>(), node[2].as<double>()};
}

// Either R (9 row-major values) or axis + angle_deg, plus t.
RigidTransform yaml_pose(const YAML::Node& node) {
  if (!node.IsMap()) yaml_fail(node, "pose must be a map");
  Vec3 t = node["t"] ? yaml_vec3(node["t"], "t") : Vec3::Zero();
  if (node["R"]) {
    const auto r = node["R"];
    if (!r.IsSequence() || r.size() != 9) yaml_fail(r, "R needs 9 values");
    Mat3 m;
    for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = r[i].as<double>();
    const RigidTransform pose(m, t);
    if (!pose.is_valid(1e-5)) yaml_fail(r, "R is not a rotation");
    return pose;
  }
  if (node["axis"]) {
    const Vec3 axis = yaml_vec3(node["axis"], "axis");
    if (axis.norm() < 1e-12) yaml_fail(node["axis"], "axis must be non-zero");
    const double deg = node["angle_deg"] ? node["angle_deg"].as<double>() : 0.0;
    return RigidTransform::from_axis_angle(axis.normalized(), deg * std::numbers::pi / 180.0, t);
  }
  return RigidTransform::translation_only(t);
}

}  // namespace

SceneFile parse_scene_spec(const std::string& yaml_text, const std::filesystem::path& base_dir) {
  SceneFile out;
  try {
    const YAML::Node root = YAML::Load(yaml_text);
    if (!root.IsMap()) throw ParseError(ParseError::Kind::kMalformedHeader, "scene spec: expected a map");
    if (!root["model"]) yaml_fail(root, "missing 'model'");
    out.model = root["model"].as<std::string>();
    if (out.model.rfind("blob:", 0) != 0) {
      const std::filesystem::path p(out.model);
      if (p.is_relative()) out.model = (base_dir / p).string();
    }
    auto& s = out.spec;
    s.model_id = root["model_id"] ? root["model_id"].as<std::string>()
                                  : std::filesystem::path(out.model).stem().string();
    if (!root["camera"]) yaml_fail(root, "missing 'camera'");
    const auto cam = root["camera"];
    for (const char* key : {"fx", "fy", "cx", "cy", "width", "height"}) {
      if (!cam[key]) yaml_fail(cam, std::string("camera lacks '") + key + "'");
    }
    s.camera = {cam["fx"].as<double>(), cam["fy"].as<double>(), cam["cx"].as<double>(),
                cam["cy"].as<double>(), cam["width"].as<int>(), cam["height"].as<int>()};
    if (!root["pose"]) yaml_fail(root, "missing 'pose'");
    s.gt_pose = yaml_pose(root["pose"]);
    if (root["noise_sigma"]) s.noise_sigma = root["noise_sigma"].as<double>();
    if (root["dropout"]) s.dropout = root["dropout"].as<double>();
    if (root["seed"]) s.seed = root["seed"].as<std::uint64_t>();
    if (const auto ds = root["distractors"]) {
      if (!ds.IsSequence()) yaml_fail(ds, "distractors must be a list");
      for (const auto& d : ds) {
        Primitive p;
        const std::string kind = d["kind"] ? d["kind"].as<std::string>() : "";
        if (kind == "box") {
          p.kind = Primitive::Kind::kBox;
          if (d["size"]) p.size = yaml_vec3(d["size"], "size");
        } else if (kind == "sphere") {
          p.kind = Primitive::Kind::kSphere;
          if (d["radius"]) p.radius = d["radius"].as<double>();
        } else {
          yaml_fail(d, "distractor kind must be 'box' or 'sphere'");
        }
        if (d["pose"]) p.pose = yaml_pose(d["pose"]);
        s.distractors.push_back(p);
      }
    }
    s.validate();
  } catch (const YAML::Exception& e) {
    throw ParseError(ParseError::Kind::kMalformedBody, std::string("scene spec: ") + e.what(),
                     ParseError::Where::kLine, e.mark.line >= 0 ? std::uint64_t(e.mark.line + 1) : 0);
  } catch (const std::invalid_argument& e) {
    throw ParseError(ParseError::Kind::kMalformedBody, std::string("scene spec: ") + e.what());
  }
  return out;
}

SceneFile load_scene_spec(const std::filesystem::path& path) {
  return parse_scene_spec(read_text_file(path), path.parent_path());
}

namespace {

std::vector<double> yaml_values(const YAML::Node& node, std::size_t n, const char* key) {
  if (!node.IsSequence() || node.size() != n) {
    yaml_fail(node, std::string(key) + " needs " + std::to_string(n) + " values", "sixd");
  }
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = node[i].as<double>();
  return v;
}

}  // namespace

std::vector<SixdImage> parse_sixd_scene(const std::string& info_yaml, const std::string& gt_yaml) {
  std::map<int, SixdImage> images;
  try {
    const YAML::Node info = YAML::Load(info_yaml);
    const YAML::Node gt = YAML::Load(gt_yaml);
    if (!info.IsMap() || !gt.IsMap()) {
      throw ParseError(ParseError::Kind::kMalformedHeader, "sixd: info and gt must map image ids");
    }
    for (const auto& kv : info) {
      SixdImage im;
      im.id = kv.first.as<int>();
      const auto k = kv.second["cam_K"];
      if (!k) yaml_fail(kv.second, "missing cam_K", "sixd");
      const auto m = yaml_values(k, 9, "cam_K");
      im.camera = {m[0], m[4], m[2], m[5], 0, 0};
      if (kv.second["depth_scale"]) im.depth_scale = kv.second["depth_scale"].as<double>();
      images[im.id] = im;
    }
    std::map<int, SixdImage> out;
    for (const auto& kv : gt) {
      const int id = kv.first.as<int>();
      const auto it = images.find(id);
      if (it == images.end()) continue;
      if (!kv.second.IsSequence()) yaml_fail(kv.second, "ground truth must be a list", "sixd");
      for (const auto& g : kv.second) {
        if (!g["obj_id"] || !g["cam_R_m2c"] || !g["cam_t_m2c"]) {
          yaml_fail(g, "needs obj_id, cam_R_m2c and cam_t_m2c", "sixd");
        }
        const auto r = yaml_values(g["cam_R_m2c"], 9, "cam_R_m2c");
        const auto t = yaml_values(g["cam_t_m2c"], 3, "cam_t_m2c");
        Mat3 rot;
        for (int i = 0; i < 9; ++i) rot(i / 3, i % 3) = r[i];
        // Stored rotations carry about six significant digits.
        RigidTransform pose = RigidTransform(rot, Vec3(t[0], t[1], t[2]));
        if (!pose.is_valid(1e-4)) yaml_fail(g["cam_R_m2c"], "cam_R_m2c is not a rotation", "sixd");
        pose = pose.orthonormalized();
        it->second.objects.emplace_back(g["obj_id"].as<int>(), pose);
      }
      out[id] = it->second;
    }
    std::vector<SixdImage> v;
    for (auto& [id, im] : out) v.push_back(std::move(im));
    return v;
  } catch (const YAML::Exception& e) {
    throw ParseError(ParseError::Kind::kMalformedBody, std::string("sixd: ") + e.what(), ParseError::Where::kLine,
                     e.mark.line >= 0 ? std::uint64_t(e.mark.line + 1) : 0);
  }
}

}  // namespace ppf
