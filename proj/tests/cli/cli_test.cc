#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cli/app.h"
#include "ierf/concepts/dictionary.h"
#include "ierf/io/dataset.h"
#include "ierf/io/image.h"
#include "ierf/io/model_io.h"
#include "ierf/srd/sharing_ratio.h"
#include "ierf/toy/toy_models.h"
#include "support/temp_dir.h"

namespace ierf {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::TempDir;

const fs::path kPlanted = fs::path(IERF_FIXTURE_DIR) / "planted";

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ierf");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::vector<std::string> planted_args(const std::string& command, const fs::path& out) {
  return {command, "--model", (kPlanted / "model.json").string(), "--dataset",
          (kPlanted / "dataset.json").string(), "--out", out.string()};
}

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& more) {
  a.insert(a.end(), more.begin(), more.end());
  return a;
}

json read_json(const fs::path& p) { return json::parse(read_file(p)); }

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = read_file(e.path());
  }
  return files;
}

// Three-class RGB net with overlapping class evidence, and a few images.
struct RandomScene {
  fs::path model, dataset;
};

RandomScene random_scene(const fs::path& dir, std::size_t images) {
  Rng rng(41);
  toy::RandomNetOptions o;
  o.input_channels = 3;
  o.height = 8;
  o.width = 8;
  o.conv_layers = 2;
  o.classes = 3;
  const NetworkGraph net = toy::random_cnn(o, rng);
  RandomScene s{dir / "model.json", dir / "dataset.json"};
  save_model(net, s.model);
  std::vector<SampleRecord> records;
  for (std::size_t i = 0; i < images; ++i) {
    const fs::path p = dir / ("img" + std::to_string(i) + ".ppm");
    save_image(toy::random_tensor({3, 8, 8}, rng, 0.0, 1.0), p);
    records.push_back({p, std::nullopt, i % 3});
  }
  save_dataset(records, s.dataset);
  return s;
}

TEST(CliAttribute, OneImageGivesOneHeatmapAndConfigEcho) {
  TempDir dir;
  const std::vector<SampleRecord> all = load_dataset(kPlanted / "dataset.json", 2);
  save_dataset({all[0]}, dir / "one.json");
  const fs::path out = dir / "out";
  ASSERT_EQ(cli({"attribute", "--model", (kPlanted / "model.json").string(), "--dataset",
                 (dir / "one.json").string(), "--out", out.string()}),
            0);
  std::size_t heatmaps = 0;
  for (const auto& e : fs::directory_iterator(out)) heatmaps += e.path().extension() == ".pgm";
  EXPECT_EQ(heatmaps, 1u);
  EXPECT_TRUE(fs::exists(out / "sample0.input.clamped.heat.pgm"));
  const json rc = read_json(out / "run_config.json");
  EXPECT_EQ(rc["command"], "attribute");
  EXPECT_EQ(rc["config"]["variants"], json::array({"clamped"}));
}

TEST(CliAttribute, VariantsGiveDistinctFiles) {
  TempDir dir;
  const RandomScene s = random_scene(dir.path(), 1);
  const fs::path out = dir / "out";
  ASSERT_EQ(cli({"attribute", "--model", s.model.string(), "--dataset", s.dataset.string(), "--out",
                 out.string(), "--variant", "raw,mean,clamped", "--class", "1"}),
            0);
  const std::string raw = read_file(out / "img0.input.raw.heat.pgm");
  const std::string mean = read_file(out / "img0.input.mean.heat.pgm");
  const std::string clamped = read_file(out / "img0.input.clamped.heat.pgm");
  EXPECT_NE(raw, mean);
  EXPECT_NE(raw, clamped);
  EXPECT_NE(mean, clamped);
}

TEST(CliAttribute, LowScaleMatchesEncoderGrid) {
  TempDir dir;
  const RandomScene s = random_scene(dir.path(), 1);
  const NetworkGraph net = load_model(s.model);
  const PfvLayer enc = pfv_layers(net).back();
  const fs::path out = dir / "out";
  ASSERT_EQ(cli({"attribute", "--model", s.model.string(), "--dataset", s.dataset.string(), "--out",
                 out.string(), "--scale", "low,input"}),
            0);
  const json low = read_json(out / "img0.low.clamped.heat.json");
  EXPECT_EQ(low["height"], enc.height);
  EXPECT_EQ(low["width"], enc.width);
  EXPECT_EQ(read_json(out / "img0.input.clamped.heat.json")["height"], 8);
}

TEST(CliAttribute, MetricsReportHasEveryMetric) {
  TempDir dir;
  ASSERT_EQ(cli(with(planted_args("attribute", dir / "out"),
                     {"--metrics", "--fidelity-trials", "10", "--stability-perturbations", "2"})),
            0);
  const json m = read_json(dir / "out" / "metrics.json");
  ASSERT_EQ(m["runs"].size(), 1u);
  for (const char* k : {"pointing_game", "attribution_localization", "sparseness", "fidelity", "stability"}) {
    const json& r = m["runs"][0]["metrics"][k];
    EXPECT_EQ(r["per_sample"].size(), m["samples"].size()) << k;
  }
  // The planted motif is the only evidence, so every map points at it.
  EXPECT_EQ(m["runs"][0]["metrics"]["pointing_game"]["mean"], 1.0);
}

TEST(CliConcepts, KRatioSetsDictionarySize) {
  TempDir dir;
  ASSERT_EQ(cli(with(planted_args("concepts", dir / "out"), {"--layers", "act1", "--k-ratio", "8"})), 0);
  const ConceptDictionary d = load_dictionary(dir / "out" / "concepts_act1.json");
  EXPECT_EQ(d.size(), 8 * d.channels());
  const json rep = read_json(dir / "out" / "reconstruction.json");
  EXPECT_EQ(rep["layers"][0]["k"], 8 * d.channels());
}

TEST(CliConcepts, SameSeedGivesIdenticalBytes) {
  TempDir dir;
  const std::vector<std::string> args{"--layers", "act1,act2", "--extractor", "kmeans,sae", "--seed", "3"};
  ASSERT_EQ(cli(with(planted_args("concepts", dir / "a"), args)), 0);
  ASSERT_EQ(cli(with(planted_args("concepts", dir / "b"), args)), 0);
  const auto a = tree(dir / "a");
  EXPECT_TRUE(a.contains("sae/concepts_act2.bin"));
  EXPECT_TRUE(a.contains("kmeans/coeffs_act1.bin"));
  EXPECT_EQ(a, tree(dir / "b"));
}

TEST(CliConcepts, SaeWithoutSparsityReconstructsFullRankData) {
  // Identity features over random colors: PFVs fill the positive orthant of
  // R^3, and three latents suffice.
  TempDir dir;
  NetworkBuilder b({3, 8, 8});
  Tensor eye({3, 3, 1, 1}, 0.0);
  for (std::size_t c = 0; c < 3; ++c) eye[c * 3 + c] = 1.0;
  int x = b.conv2d(b.input(), eye, Tensor({3}, 0.0), 1, 0, "conv");
  x = b.activation(x, OpKind::kRelu, "act");
  x = b.global_avg_pool(x, "gap");
  b.linear(x, Tensor::matrix(2, 3, {1, 0, 0, 0, 1, 0}), Tensor({2}, 0.0), "head");
  save_model(b.build(), dir / "model.json");
  Rng rng(5);
  std::vector<SampleRecord> records;
  for (std::size_t i = 0; i < 16; ++i) {
    const fs::path p = dir / ("s" + std::to_string(i) + ".ppm");
    save_image(toy::random_tensor({3, 8, 8}, rng, 0.05, 1.0), p);
    records.push_back({p, std::nullopt, i % 2});
  }
  save_dataset(records, dir / "data.json");
  ASSERT_EQ(cli({"concepts", "--model", (dir / "model.json").string(), "--dataset",
                 (dir / "data.json").string(), "--out", (dir / "out").string(), "--extractor", "sae",
                 "--lambda", "0", "--k-ratio", "1", "--layers", "act"}),
            0);
  const json rep = read_json(dir / "out" / "reconstruction.json");
  EXPECT_LT(rep["layers"][0]["rel_l2"].get<double>(), 0.05);
}

bool red_concept(const ConceptDictionary& d, std::size_t q) {
  const Eigen::VectorXd v = d.v.col(static_cast<Eigen::Index>(q)).cwiseAbs();
  return v(0) + v(1) > v(2) + v(3);
}

TEST(CliGraph, DominantEdgesFollowThePlantedPathways) {
  TempDir dir;
  const fs::path out = dir / "out";
  ASSERT_EQ(cli(with(planted_args("graph", out), {"--layers", "act1,act2", "--validate", "--random-orders", "5"})),
            0);
  const ConceptDictionary a = load_dictionary(out / "concepts" / "concepts_act1.json");
  const ConceptDictionary b = load_dictionary(out / "concepts" / "concepts_act2.json");
  for (std::size_t cls : {0u, 1u}) {
    const fs::path d = out / ("class_" + std::to_string(cls));
    const json g = read_json(d / "graph.json");
    ASSERT_FALSE(g["edges"].empty());
    const json* best = nullptr;
    for (const json& e : g["edges"]) {
      if (!best || e["raw"].get<double>() > (*best)["raw"].get<double>()) best = &e;
    }
    const bool want_red = cls == 0;
    EXPECT_EQ(red_concept(a, (*best)["parent"]["id"]), want_red) << cls;
    EXPECT_EQ(red_concept(b, (*best)["child"]["id"]), want_red) << cls;
    EXPECT_TRUE(fs::exists(d / "graph.dot"));
    const json v = read_json(d / "validation.json");
    ASSERT_FALSE(v["pairs"].empty());
    const json& p = v["pairs"][0];
    EXPECT_TRUE(p.contains("deletion"));
    EXPECT_TRUE(p.contains("insertion"));
    EXPECT_LT(p["deletion"]["ranked"]["auc"].get<double>(), p["deletion"]["random"]["auc"].get<double>());
  }
}

TEST(CliGraph, RerunIsByteIdentical) {
  TempDir dir;
  const std::vector<std::string> args{"--layers", "act1,act2", "--validate", "--random-orders", "3",
                                      "--seed", "11", "--class", "0"};
  ASSERT_EQ(cli(with(planted_args("graph", dir / "a"), args)), 0);
  ASSERT_EQ(cli(with(planted_args("graph", dir / "b"), args)), 0);
  const auto a = tree(dir / "a");
  EXPECT_TRUE(a.contains("graph.json"));
  EXPECT_TRUE(a.contains("validation.json"));
  EXPECT_EQ(a, tree(dir / "b"));
}

TEST(CliInsertionDeletion, ReusesConceptsAndPicksTopTarget) {
  TempDir dir;
  ASSERT_EQ(cli(with(planted_args("concepts", dir / "c"), {"--layers", "act1,act2"})), 0);
  ASSERT_EQ(cli(with(planted_args("insertion-deletion", dir / "out"),
                     {"--layers", "act1,act2", "--concepts", (dir / "c").string(), "--class", "1",
                      "--mode", "delete", "--random-orders", "4"})),
            0);
  const json c = read_json(dir / "out" / "curves.json");
  EXPECT_EQ(c["target_source"], "top importance");
  EXPECT_TRUE(c.contains("deletion"));
  EXPECT_FALSE(c.contains("insertion"));
  EXPECT_EQ(c["deletion"]["ranked"]["value"][0], 1.0);
}

TEST(CliConfig, FlagsOverrideTheConfigFile) {
  TempDir dir;
  write_file(dir / "run.json", json{{"model", (kPlanted / "model.json").string()},
                                    {"dataset", (kPlanted / "dataset.json").string()},
                                    {"seed", 1},
                                    {"variants", {"raw"}},
                                    {"scales", {"low"}}}
                                   .dump());
  ASSERT_EQ(cli({"attribute", "--config", (dir / "run.json").string(), "--variant", "mean", "--out",
                 (dir / "out").string()}),
            0);
  const json rc = read_json(dir / "out" / "run_config.json")["config"];
  EXPECT_EQ(rc["seed"], 1);
  EXPECT_EQ(rc["variants"], json::array({"mean"}));
  EXPECT_EQ(rc["scales"], json::array({"low"}));
  EXPECT_TRUE(fs::exists(dir / "out" / "sample0.low.mean.heat.pgm"));
}

TEST(CliConfig, RelativePathsResolveAgainstTheConfigFile) {
  TempDir dir;
  fs::copy(kPlanted, dir / "planted", fs::copy_options::recursive);
  write_file(dir / "run.json", R"({"model": "planted/model.json", "dataset": "planted/dataset.json",
                                   "output": "out"})");
  ASSERT_EQ(cli({"evaluate", "--config", (dir / "run.json").string(), "--fidelity-trials", "5",
                 "--stability-perturbations", "0"}),
            0);
  EXPECT_TRUE(fs::exists(dir / "out" / "metrics.json"));
}

TEST(CliExitCodes, UsageDataAndNumericalFailures) {
  TempDir dir;
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(cli({"attribute", "--no-such-flag"}), 1);
  const std::string err = ::testing::internal::GetCapturedStderr();
  const json line = json::parse(err.substr(0, err.find('\n')));
  EXPECT_EQ(line["exit"], 1);
  EXPECT_EQ(line["error"], "usage");
  EXPECT_EQ(line["command"], "attribute");

  ::testing::internal::CaptureStderr();
  EXPECT_EQ(cli({}), 1);
  EXPECT_EQ(cli(with(planted_args("graph", dir / "x"), {"--layers", "act1,missing"})), 1);
  EXPECT_EQ(cli(with(planted_args("attribute", dir / "x"), {"--variant", "median"})), 1);
  EXPECT_EQ(cli({"attribute", "--model", (dir / "none.json").string(), "--dataset",
                 (kPlanted / "dataset.json").string(), "--out", (dir / "x").string()}),
            2);
  write_file(dir / "bad.json", "{not json");
  EXPECT_EQ(cli({"attribute", "--config", (dir / "bad.json").string()}), 2);
  write_file(dir / "unknown.json", R"({"colour": 1})");
  EXPECT_EQ(cli({"attribute", "--config", (dir / "unknown.json").string()}), 1);
  ::testing::internal::GetCapturedStderr();

  EXPECT_EQ(cli::exit_code(ErrorKind::kNumerical), 3);
  EXPECT_EQ(cli::exit_code(ErrorKind::kValidation), 2);
  EXPECT_EQ(cli::exit_code(ErrorKind::kIntegrity), 2);
  EXPECT_EQ(cli::exit_code(ErrorKind::kParse), 2);
  EXPECT_EQ(cli::exit_code(ErrorKind::kConfig), 1);
}

TEST(CliExitCodes, TruncatedWeightsAreDataErrors) {
  TempDir dir;
  fs::copy(kPlanted, dir / "planted", fs::copy_options::recursive);
  fs::resize_file(dir / "planted" / "model.bin", 16);
  ::testing::internal::CaptureStderr();
  const int code = cli({"attribute", "--model", (dir / "planted" / "model.json").string(), "--dataset",
                        (dir / "planted" / "dataset.json").string(), "--out", (dir / "x").string()});
  const json line = json::parse(::testing::internal::GetCapturedStderr());
  EXPECT_EQ(code, 2);
  EXPECT_EQ(line["error"], "integrity");
}

}  // namespace
}  // namespace ierf
