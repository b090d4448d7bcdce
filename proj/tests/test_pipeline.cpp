#include "rootseg/pipeline.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>

#include "rootseg/evaluation.hpp"
#include "rootseg/synthetic.hpp"

using namespace rootseg;
namespace fs = std::filesystem;

namespace {

std::string tmp_dir(const std::string& name) {
  const fs::path dir = fs::path(::testing::TempDir()) / name;
  fs::create_directories(dir);
  return dir.string();
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

SynthParams small_params() {
  SynthParams p;
  p.width = 96;
  p.height = 96;
  p.n_laterals = 2;
  p.noise_sigma = 6.0;
  return p;
}

std::string make_input(const std::string& dir, std::uint32_t seed, const std::string& name) {
  const auto [img, gt] = generate(small_params(), seed);
  const std::string path = (fs::path(dir) / name).string();
  save_image(img, path);
  return path;
}

TEST(Pipeline, EmptyInputListSucceeds) {
  PipelineConfig cfg;
  cfg.out_dir = tmp_dir("run_empty");
  const RunSummary summary = run_pipeline(cfg);
  EXPECT_EQ(summary.images.size(), 0u);
  EXPECT_EQ(summary.failures, 0);
}

TEST(Pipeline, SingleSyntheticImageDefaults) {
  const std::string dir = tmp_dir("run_single");
  PipelineConfig cfg;
  cfg.inputs = {make_input(dir, 4, "plant.png")};
  cfg.out_dir = dir + "/out";

  const RunSummary summary = run_pipeline(cfg);
  ASSERT_EQ(summary.images.size(), 1u);
  const ImageRunResult& r = summary.images[0];
  ASSERT_TRUE(r.ok) << r.error;
  EXPECT_EQ(r.image_id, "plant");

  const BinaryMask skel = load_mask(r.outputs.at("skeleton"));
  EXPECT_GT(skel.count_foreground(), 0);
  const ComponentMap cm = label_components(skel);
  for (int k = 1; k <= cm.count(); ++k) EXPECT_GE(cm.areas[k], cfg.alpha);

  // stage timings cover the whole pipeline
  std::vector<std::string> stages;
  for (const auto& [name, ms] : r.stage_ms) stages.push_back(name);
  for (const char* expected :
       {"load", "normalize", "leaf_removal", "enhance", "theta_x", "crf", "postprocess", "write"})
    EXPECT_NE(std::find(stages.begin(), stages.end(), expected), stages.end()) << expected;

  // summary json exists and mirrors the result
  std::ifstream jin(r.outputs.at("summary"));
  nlohmann::json j;
  jin >> j;
  EXPECT_EQ(j["image_id"], "plant");
  EXPECT_TRUE(j["ok"].get<bool>());
  EXPECT_GT(j["stage_timings_ms"]["crf"].get<double>(), 0.0);
}

TEST(Pipeline, JpegInputIsAccepted) {
  const std::string dir = tmp_dir("run_jpeg");
  const auto [img, gt] = generate(small_params(), 9);
  const std::string path = (fs::path(dir) / "scan.jpg").string();
  detail::save_jpeg(img, path, 95);

  PipelineConfig cfg;
  cfg.inputs = {path};
  cfg.out_dir = dir + "/out";
  const RunSummary summary = run_pipeline(cfg);
  ASSERT_TRUE(summary.images[0].ok) << summary.images[0].error;
  EXPECT_GT(load_mask(summary.images[0].outputs.at("skeleton")).count_foreground(), 0);
}

TEST(Pipeline, CropIsApplied) {
  const std::string dir = tmp_dir("run_crop");
  PipelineConfig cfg;
  cfg.inputs = {make_input(dir, 12, "wide.png")};
  cfg.out_dir = dir + "/out";
  cfg.crop = CropRect{8, 4, 80, 88};
  const RunSummary summary = run_pipeline(cfg);
  ASSERT_TRUE(summary.images[0].ok) << summary.images[0].error;
  const BinaryMask skel = load_mask(summary.images[0].outputs.at("skeleton"));
  EXPECT_EQ(skel.width, 80);
  EXPECT_EQ(skel.height, 88);
}

TEST(Pipeline, ZeroPairwiseWeightEqualsUnaryThresholdRoute) {
  const std::string dir = tmp_dir("run_wp0");
  const std::string input = make_input(dir, 21, "img.png");
  PipelineConfig cfg;
  cfg.inputs = {input};
  cfg.out_dir = dir + "/out";
  cfg.crf.w_p = 0.0;
  const RunSummary summary = run_pipeline(cfg);
  ASSERT_TRUE(summary.images[0].ok) << summary.images[0].error;
  const BinaryMask pipeline_skel = load_mask(summary.images[0].outputs.at("skeleton"));

  // independent route: threshold the unary argmax, then postprocess
  const GrayImage ic = normalize_contrast(load_image(input));
  const StrengthMap feat = enhance(remove_leaves(ic, 3), cfg.line);
  const UnaryCosts u = unary_costs(feat, cfg.crf.w_u);
  BinaryMask argmax(feat.width, feat.height);
  for (int i = 0; i < feat.size(); ++i) argmax.data[i] = u.cost_fg[i] < u.cost_bg[i];
  const BinaryMask expected = filter_small(skeletonize(fill_gaps(argmax)), cfg.alpha);
  EXPECT_EQ(pipeline_skel.data, expected.data);
}

TEST(Pipeline, BadInputDoesNotAbortBatch) {
  const std::string dir = tmp_dir("run_bad");
  const std::string bad = (fs::path(dir) / "broken.png").string();
  {
    std::ofstream out(bad, std::ios::binary);
    out << "\x89PNG but not really";
  }
  const std::string constant = (fs::path(dir) / "flat.png").string();
  save_image(GrayImage(32, 32, 128.0), constant);  // degenerate contrast range

  PipelineConfig cfg;
  cfg.inputs = {bad, make_input(dir, 31, "good.png"), constant};
  cfg.out_dir = dir + "/out";
  const RunSummary summary = run_pipeline(cfg);
  ASSERT_EQ(summary.images.size(), 3u);
  EXPECT_EQ(summary.failures, 2);
  EXPECT_FALSE(summary.images[0].ok);
  EXPECT_TRUE(summary.images[1].ok) << summary.images[1].error;
  EXPECT_FALSE(summary.images[2].ok);
  EXPECT_NE(summary.images[2].error.find("constant"), std::string::npos);
}

TEST(Pipeline, RerunsAreByteIdentical) {
  const std::string dir = tmp_dir("run_repeat");
  const std::string input = make_input(dir, 77, "img.png");
  PipelineConfig cfg;
  cfg.inputs = {input};
  cfg.seed = 5;
  cfg.out_dir = dir + "/out_a";
  ASSERT_TRUE(run_pipeline(cfg).images[0].ok);
  cfg.out_dir = dir + "/out_b";
  ASSERT_TRUE(run_pipeline(cfg).images[0].ok);
  for (const char* name : {"img_skeleton.png", "img_segmentation.png"}) {
    const std::string a = read_bytes(dir + "/out_a/" + name);
    const std::string b = read_bytes(dir + "/out_b/" + name);
    ASSERT_FALSE(a.empty());
    ASSERT_EQ(a, b) << name;
  }
}

TEST(Pipeline, EmitIntermediatesWritesAllPanels) {
  const std::string dir = tmp_dir("run_panels");
  PipelineConfig cfg;
  cfg.inputs = {make_input(dir, 51, "img.png")};
  cfg.out_dir = dir + "/out";
  cfg.emit_intermediates = true;
  const RunSummary summary = run_pipeline(cfg);
  ASSERT_TRUE(summary.images[0].ok) << summary.images[0].error;
  for (const char* key :
       {"skeleton", "segmentation", "ic", "leaves", "tophat", "enhanced", "marginals", "crf_mask"})
    EXPECT_TRUE(fs::exists(summary.images[0].outputs.at(key))) << key;
}

TEST(Pipeline, EndToEndQualityOnTinySuite) {
  const std::string dir = tmp_dir("run_e2e");
  SynthParams sp = small_params();
  const std::string manifest = generate_suite(2, sp, 19, dir);

  PipelineConfig cfg;
  cfg.inputs = {(fs::path(dir) / "synth_000.png").string(),
                (fs::path(dir) / "synth_001.png").string()};
  cfg.out_dir = (fs::path(dir) / "pred").string();
  const RunSummary summary = run_pipeline(cfg);
  ASSERT_EQ(summary.failures, 0);

  const QualityReport report = evaluate_directory(manifest, cfg.out_dir, dir, 1);
  ASSERT_EQ(report.evaluated, 2);
  EXPECT_GT(report.overall_mean, 0.5);
}

// CLI-level checks through the installed binary.
class CliTest : public ::testing::Test {
 protected:
  static std::string run_cli(const std::string& args, int* exit_code) {
    const std::string out_file =
        (fs::path(::testing::TempDir()) / "cli_output.txt").string();
    const std::string cmd = std::string(ROOTSEG_CLI_PATH) + " " + args + " > " + out_file + " 2>&1";
    const int status = std::system(cmd.c_str());
    *exit_code = WEXITSTATUS(status);
    return read_bytes(out_file);
  }
};

TEST_F(CliTest, RunWithNoInputsReportsZeroImages) {
  int code = -1;
  const std::string out = run_cli("run --out " + tmp_dir("cli_empty"), &code);
  EXPECT_EQ(code, 0);
  EXPECT_NE(out.find("0 images"), std::string::npos);
}

TEST_F(CliTest, SynthRunEvaluateRoundTrip) {
  const std::string dir = tmp_dir("cli_e2e");
  int code = -1;
  run_cli("synth --n 1 --width 72 --height 72 --noise-sigma 5 --laterals 1 --seed 3 --out " + dir,
          &code);
  ASSERT_EQ(code, 0);

  const std::string out =
      run_cli("run " + dir + "/synth_000.png --out " + dir + "/pred --seed 1", &code);
  ASSERT_EQ(code, 0) << out;
  EXPECT_NE(out.find("1 images, 0 failed"), std::string::npos);
  EXPECT_NE(out.find("crf="), std::string::npos);  // per-stage timing in the report

  const std::string eval_out = run_cli("evaluate " + dir + "/manifest.csv --pred-dir " + dir +
                                           "/pred --ref-dir " + dir + " --tolerance-px 1 --out " +
                                           dir + "/eval",
                                       &code);
  ASSERT_EQ(code, 0) << eval_out;
  EXPECT_TRUE(fs::exists(dir + "/eval/report.json"));
  EXPECT_TRUE(fs::exists(dir + "/eval/report.csv"));
  EXPECT_NE(eval_out.find("overall mean="), std::string::npos);
}

TEST_F(CliTest, MalformedManifestRowFlagsPartialFailure) {
  const std::string dir = tmp_dir("cli_badrow");
  BinaryMask m(6, 6, false);
  m.at(2, 2) = 1;
  save_mask(m, dir + "/p.png");
  save_mask(m, dir + "/r.png");
  {
    std::ofstream out(dir + "/manifest.csv");
    out << "image_id,class,pred_path,ref_path\n";
    out << "good,c,p.png,r.png\n";
    out << "lost,c,p.png,missing.png\n";
  }
  int code = -1;
  const std::string out = run_cli("evaluate " + dir + "/manifest.csv --out " + dir + "/eval", &code);
  EXPECT_EQ(code, 1);  // partial failure
  EXPECT_NE(out.find("MissingPair"), std::string::npos);
  EXPECT_NE(out.find("1 failed"), std::string::npos);
}

TEST_F(CliTest, ConfigFileWithFlagOverride) {
  const std::string dir = tmp_dir("cli_config");
  const std::string input = make_input(dir, 61, "img.png");
  {
    std::ofstream out(dir + "/pipeline.conf");
    out << "[run]\nwu=3\nalpha=10\nout=" << dir << "/out_conf\n";
  }
  int code = -1;
  const std::string out =
      run_cli("--config " + dir + "/pipeline.conf run " + input + " --alpha 15", &code);
  ASSERT_EQ(code, 0) << out;
  EXPECT_TRUE(fs::exists(dir + "/out_conf/img_skeleton.png"));

  std::ifstream jin(dir + "/out_conf/img_summary.json");
  nlohmann::json j;
  jin >> j;
  EXPECT_TRUE(j["ok"].get<bool>());
}

}  // namespace
