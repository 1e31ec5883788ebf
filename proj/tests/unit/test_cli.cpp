#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "ppf/cli.hpp"
#include "ppf/io.hpp"

namespace ppf {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Run {
  int code;
  std::vector<json> records;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  Run r{code, {}, err.str()};
  std::istringstream lines(out.str());
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.front() == '{') r.records.push_back(json::parse(line));
  }
  return r;
}

int run_tool(const std::string& args) {
  const std::string cmd = std::string(PPF_TOOL_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("ppf_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "scene.yaml") << "model: \"blob:60\"\n"
                                          "camera: {fx: 572, fy: 572, cx: 320, cy: 240, width: 640, height: 480}\n"
                                          "pose: {axis: [1, 1, 0], angle_deg: 40, t: [5, -10, 700]}\n"
                                          "noise_sigma: 1.0\n"
                                          "seed: 3\n"
                                          "distractors:\n"
                                          "  - kind: box\n"
                                          "    size: [1200, 1200, 10]\n"
                                          "    pose: {t: [0, 0, 1000]}\n";
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string p(const std::string& name) { return (dir_ / name).string(); }

  static fs::path dir_;
};

fs::path CliTest::dir_;

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run_tool(""), kExitInputError);
  EXPECT_EQ(run_tool("train --bogus"), kExitInputError);
  EXPECT_EQ(run_tool("frobnicate"), kExitInputError);
  EXPECT_EQ(run_tool("train --model blob:60"), kExitInputError);
  EXPECT_EQ(run_tool("--help"), kExitOk);
  EXPECT_EQ(run({"train", "--model", "blob:60", "--out", p("x.ppfm"), "--leaf-frac", "2"}).code, kExitInputError);
  EXPECT_EQ(run({"train", "--model", p("missing.ply"), "--out", p("x.ppfm")}).code, kExitInputError);
  EXPECT_EQ(run({"detect", "--ppfm", p("missing.ppfm"), "--scene", p("s")}).code, kExitInputError);
}

TEST_F(CliTest, TrainWritesModelAndMetadata) {
  EXPECT_EQ(run_tool("train --model blob:60 --out " + p("tool.ppfm") + " --leaf-frac 0.05"), kExitOk);
  const auto r = run({"train", "--model", "blob:60", "--out", p("blob.ppfm"), "--leaf-frac", "0.05"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.records[0]["type"], "metadata");
  EXPECT_EQ(r.records[0]["command"], "train");
  EXPECT_DOUBLE_EQ(r.records[0]["config"]["leaf_frac"].get<double>(), 0.05);
  EXPECT_DOUBLE_EQ(r.records[0]["config"]["subsample"]["leaf"].get<double>(), r.records[1]["leaf"].get<double>());
  EXPECT_EQ(read_file(p("blob.ppfm")), read_file(p("tool.ppfm")));
}

TEST_F(CliTest, SynthIsReproducible) {
  ASSERT_EQ(run({"synth", "--spec", p("scene.yaml"), "--out", p("a")}).code, kExitOk);
  ASSERT_EQ(run({"synth", "--spec", p("scene.yaml"), "--out", p("b")}).code, kExitOk);
  ASSERT_EQ(run({"synth", "--spec", p("scene.yaml"), "--out", p("c"), "--seed", "4"}).code, kExitOk);
  EXPECT_EQ(read_file(p("a/depth.png")), read_file(p("b/depth.png")));
  EXPECT_NE(read_file(p("a/depth.png")), read_file(p("c/depth.png")));
  EXPECT_EQ(read_file(p("a/camera.txt")), read_file(p("b/camera.txt")));
  const auto gt = json::parse(read_text_file(p("a/gt.json")));
  EXPECT_EQ(gt["pose"]["t"][2].get<double>(), 700.0);
}

TEST_F(CliTest, DetectEvalAndBench) {
  ASSERT_EQ(run({"train", "--model", "blob:60", "--out", p("m.ppfm")}).code, kExitOk);
  ASSERT_EQ(run({"synth", "--spec", p("scene.yaml"), "--out", p("scenes/s1")}).code, kExitOk);
  ASSERT_EQ(run({"synth", "--spec", p("scene.yaml"), "--out", p("scenes/s2"), "--seed", "9"}).code, kExitOk);

  const auto d = run({"detect", "--ppfm", p("m.ppfm"), "--scene", p("scenes/s1"), "--model", "blob:60"});
  ASSERT_EQ(d.code, kExitOk) << d.err;
  ASSERT_EQ(d.records.size(), 2u);
  EXPECT_EQ(d.records[0]["command"], "detect");
  EXPECT_EQ(d.records[1]["scene"], "s1");
  EXPECT_TRUE(d.records[1]["detected"].get<bool>());

  // Re-running with the metadata record as the configuration gives the same record.
  std::ofstream(p("meta.json")) << d.records[0].dump();
  const auto again = run({"detect", "--ppfm", p("m.ppfm"), "--scene", p("scenes/s1"), "--model", "blob:60",
                          "--config", p("meta.json"), "--workers", "3"});
  ASSERT_EQ(again.code, kExitOk);
  auto a = d.records[1], b = again.records[1];
  a.erase("timings_ms");
  b.erase("timings_ms");
  EXPECT_EQ(a, b);

  const auto bench = run({"bench", "--ppfm", p("m.ppfm"), "--scene-root", p("scenes"), "--model", "blob:60",
                          "--workers", "2"});
  ASSERT_EQ(bench.code, kExitOk) << bench.err;
  ASSERT_EQ(bench.records.size(), 4u);
  EXPECT_EQ(bench.records[3]["type"], "bench");
  EXPECT_EQ(bench.records[3]["images"], 2);
  EXPECT_EQ(bench.records[3]["detected"], 2);
  {
    std::ofstream results(p("results.jsonl"));
    for (const auto& rec : bench.records) results << rec.dump() << '\n';
  }
  const auto eval = run({"eval-vsd", "--results", p("results.jsonl"), "--scene-root", p("scenes"), "--model",
                         "blob:60", "--csv", p("recall.csv")});
  ASSERT_EQ(eval.code, kExitOk) << eval.err;
  const auto& summary = eval.records.back();
  EXPECT_EQ(summary["type"], "summary");
  EXPECT_EQ(summary["model_id"], "all");
  EXPECT_EQ(summary["targets"], 2);
  EXPECT_DOUBLE_EQ(summary["recall"].get<double>(), 1.0);
  EXPECT_NE(read_text_file(p("recall.csv")).find("all,2,2,1.000000"), std::string::npos);
}

TEST_F(CliTest, NoDetectionExitsOne) {
  ASSERT_EQ(run({"train", "--model", "blob:60", "--out", p("n.ppfm")}).code, kExitOk);
  fs::create_directories(dir_ / "empty");
  write_png16(dir_ / "empty" / "depth.png", RawDepth{640, 480, std::vector<std::uint16_t>(640 * 480, 0)});
  write_intrinsics(dir_ / "empty" / "camera.txt", CameraIntrinsics{572, 572, 320, 240, 640, 480});
  EXPECT_EQ(run_tool("detect --ppfm " + p("n.ppfm") + " --scene " + p("empty")), kExitNoDetection);
  const auto r = run({"detect", "--ppfm", p("n.ppfm"), "--depth", p("empty/depth.png"), "--intrinsics",
                      p("empty/camera.txt")});
  EXPECT_EQ(r.code, kExitNoDetection);
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_FALSE(r.records[1]["detected"].get<bool>());
  EXPECT_TRUE(r.records[1]["pose"].is_null());
  EXPECT_EQ(r.records[1]["scene"], "empty");
}

TEST_F(CliTest, ImportSixdScene) {
  ASSERT_EQ(run({"synth", "--spec", p("scene.yaml"), "--out", p("src")}).code, kExitOk);
  const auto cam = read_intrinsics(p("src/camera.txt"));
  const auto gt = json::parse(read_text_file(p("src/gt.json")));
  // Re-encode the synthetic scene at 1 mm per count, the SIXD default.
  const auto depth = depth_from_raw(read_png16(p("src/depth.png")), 0.1);
  fs::create_directories(dir_ / "sixd" / "depth");
  write_png16(dir_ / "sixd" / "depth" / "0003.png", depth_to_raw(depth, 1.0));
  {
    std::ofstream info(p("sixd/info.yml"));
    info << "3:\n  cam_K: [" << cam.fx << ", 0, " << cam.cx << ", 0, " << cam.fy << ", " << cam.cy
         << ", 0, 0, 1]\n4:\n  cam_K: [1, 0, 1, 0, 1, 1, 0, 0, 1]\n";
    std::ofstream g(p("sixd/gt.yml"));
    g << "3:\n- cam_R_m2c: " << gt["pose"]["R"].dump() << "\n  cam_t_m2c: " << gt["pose"]["t"].dump()
      << "\n  obj_id: 2\n4:\n- cam_R_m2c: [1, 0, 0, 0, 1, 0, 0, 0, 1]\n  cam_t_m2c: [0, 0, 1]\n  obj_id: 9\n";
  }
  const auto r = run({"import-sixd", "--scene", p("sixd"), "--out", p("imported"), "--obj-id", "2"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_TRUE(fs::exists(dir_ / "imported" / "0003" / "depth.png"));
  EXPECT_FALSE(fs::exists(dir_ / "imported" / "0004"));
  EXPECT_EQ(read_intrinsics(p("imported/0003/camera.txt")), cam);
  const auto back = json::parse(read_text_file(p("imported/0003/gt.json")));
  EXPECT_EQ(back["model_id"], "obj_02");
  // 1 mm counts widen to 0.1 mm counts exactly.
  const auto imported = read_png16(p("imported/0003/depth.png"));
  EXPECT_EQ(imported.values, depth_to_raw(depth_from_raw(depth_to_raw(depth, 1.0), 1.0), 0.1).values);

  ASSERT_EQ(run({"train", "--model", "blob:60", "--out", p("i.ppfm")}).code, kExitOk);
  const auto d = run({"bench", "--ppfm", p("i.ppfm"), "--scene-root", p("imported"), "--model", "blob:60"});
  ASSERT_EQ(d.code, kExitOk) << d.err;
  {
    std::ofstream results(p("imported.jsonl"));
    for (const auto& rec : d.records) results << rec.dump() << '\n';
  }
  const auto eval = run({"eval-vsd", "--results", p("imported.jsonl"), "--scene-root", p("imported"), "--model",
                         "blob:60"});
  ASSERT_EQ(eval.code, kExitOk) << eval.err;
  EXPECT_EQ(eval.records.back()["model_id"], "all");
  EXPECT_DOUBLE_EQ(eval.records.back()["recall"].get<double>(), 1.0);

  EXPECT_EQ(run({"import-sixd", "--scene", p("missing"), "--out", p("x"), "--obj-id", "2"}).code,
            kExitInputError);
}

}  // namespace
}  // namespace ppf
