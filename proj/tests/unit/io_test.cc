#include <gtest/gtest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "ierf/error.h"
#include "ierf/io/dataset.h"
#include "ierf/io/heatmap.h"
#include "ierf/io/image.h"
#include "ierf/io/model_io.h"
#include "ierf/log.h"
#include "ierf/tensor/tape.h"
#include "ierf/toy/toy_models.h"
#include "support/temp_dir.h"

namespace ierf {
namespace {

using nlohmann::json;
using testing::TempDir;

std::string pgm(std::size_t w, std::size_t h, std::initializer_list<int> bytes) {
  std::string s = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  for (int b : bytes) s.push_back(static_cast<char>(b));
  return s;
}

TEST(Image, DecodesGrayscale) {
  const Tensor t = decode_pnm(pgm(2, 2, {0, 255, 0, 255}));
  EXPECT_EQ(t.shape(), (Shape{1, 2, 2}));
  EXPECT_EQ(t.values(), (std::vector<double>{0, 1, 0, 1}));
}

TEST(Image, AcceptsHeaderComments) {
  const std::string s = std::string("P5\n# made by hand\n1 1\n# depth\n255\n") + '\x80';
  EXPECT_NEAR(decode_pnm(s)[0], 128.0 / 255.0, 1e-15);
}

TEST(Image, ColourRoundTrip) {
  TempDir dir;
  Tensor t({3, 2, 3});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i * 13 % 256) / 255.0;
  save_image(t, dir / "x.ppm");
  EXPECT_EQ(load_image(dir / "x.ppm"), t);
}

TEST(Image, TruncatedPixelsReportOffset) {
  try {
    decode_pnm(pgm(2, 2, {1, 2, 3}));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("byte offset"), std::string::npos);
  }
}

TEST(Image, RejectsBadHeaders) {
  EXPECT_THROW(decode_pnm("P3\n1 1\n255\n0"), ParseError);
  EXPECT_THROW(decode_pnm("P5\n1 1\n65535\n00"), ParseError);
  EXPECT_THROW(decode_pnm("P5\nx 1\n255\n0"), ParseError);
  EXPECT_THROW(decode_pnm(""), ParseError);
}

TEST(Image, AppliesNormalization) {
  TempDir dir;
  write_file(dir / "a.pgm", pgm(1, 2, {0, 255}));
  const Tensor t = load_image(dir / "a.pgm", Normalization{{0.5}, {0.5}});
  EXPECT_EQ(t.values(), (std::vector<double>{-1, 1}));
  EXPECT_THROW(load_image(dir / "a.pgm", Normalization{{0.5, 0.5}, {1, 1}}), ValidationError);
}

TEST(Heatmap, EndpointsMapToExtremes) {
  RelevanceField f = RelevanceField::zeros(1, 2, FieldKind::kSaliency);
  f.scores = {0, 1};
  EXPECT_EQ(heatmap_pixels(f).pixels, (std::vector<std::uint8_t>{0, 255}));
}

TEST(Heatmap, FloorRule) {
  RelevanceField f = RelevanceField::zeros(1, 3, FieldKind::kSaliency);
  f.scores = {-1, 0, 1};
  EXPECT_EQ(heatmap_pixels(f).pixels, (std::vector<std::uint8_t>{0, 127, 255}));
}

TEST(Heatmap, ConstantFieldWarnsAndWritesZeros) {
  TempDir dir;
  int warnings = 0;
  ScopedWarningCapture capture([&](std::string_view) { ++warnings; });
  RelevanceField f = RelevanceField::zeros(2, 2, FieldKind::kSaliency);
  f.scores = {3, 3, 3, 3};
  const HeatmapScale s = save_heatmap(f, dir / "m.heat.pgm");
  EXPECT_TRUE(s.constant);
  EXPECT_EQ(warnings, 1);
  const Tensor back = load_image(dir / "m.heat.pgm");
  for (double v : back.data()) EXPECT_EQ(v, 0.0);
  const json side = json::parse(read_file(dir / "m.heat.json"));
  EXPECT_EQ(side["min"], 3.0);
  EXPECT_EQ(side["max"], 3.0);
}

TEST(Heatmap, SidecarRecordsRange) {
  TempDir dir;
  RelevanceField f = RelevanceField::zeros(1, 2, FieldKind::kSaliency);
  f.scores = {-2, 5};
  save_heatmap(f, dir / "m.heat.pgm");
  const json side = json::parse(read_file(dir / "m.heat.json"));
  EXPECT_EQ(side["min"], -2.0);
  EXPECT_EQ(side["max"], 5.0);
  EXPECT_EQ(side["kind"], "saliency");
}

TEST(Heatmap, RejectsNonFinite) {
  RelevanceField f = RelevanceField::zeros(1, 1, FieldKind::kSaliency);
  f.scores = {std::nan("")};
  EXPECT_THROW(heatmap_pixels(f), InputError);
}

NetworkGraph sample_net() {
  Rng rng(31);
  toy::RandomNetOptions o;
  o.batch_norm = true;
  o.residual = true;
  o.max_pool = true;
  o.activation = OpKind::kLeakyRelu;
  return toy::random_cnn(o, rng);
}

TEST(ModelIo, RoundTripIsBitIdentical) {
  TempDir dir;
  const NetworkGraph net = sample_net();
  const Normalization norm{{0.1, 0.2}, {0.3, 0.4}};
  save_model(net, dir / "model.json", norm);
  const ModelBundle a = load_model_bundle(dir / "model.json");
  EXPECT_EQ(a.net, net);
  EXPECT_EQ(a.normalization, norm);
  save_model(a.net, dir / "again.json", a.normalization);
  EXPECT_EQ(read_file(dir / "model.bin"), read_file(dir / "again.bin"));
  EXPECT_EQ(load_model(dir / "again.json"), net);
}

TEST(ModelIo, LoadingDoesNotModifyFiles) {
  TempDir dir;
  save_model(sample_net(), dir / "model.json");
  const std::string before = read_file(dir / "model.json") + read_file(dir / "model.bin");
  load_model(dir / "model.json");
  EXPECT_EQ(read_file(dir / "model.json") + read_file(dir / "model.bin"), before);
}

json edit_manifest(const TempDir& dir) {
  save_model(sample_net(), dir / "model.json");
  return json::parse(read_file(dir / "model.json"));
}

TEST(ModelIo, DeclaredChannelsMismatchIsValidationError) {
  TempDir dir;
  json j = edit_manifest(dir);
  j["layers"][0]["output_shape"][0] = 7;
  write_file(dir / "model.json", j.dump());
  try {
    load_model(dir / "model.json");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("'input' -> 'conv1'"), std::string::npos) << e.what();
  }
}

TEST(ModelIo, WeightShapeMismatchIsValidationError) {
  TempDir dir;
  json j = edit_manifest(dir);
  j["layers"][0]["params"]["weight"]["shape"] = {4, 3, 3, 3};
  j["layers"][0]["params"]["weight"]["length"] = 4 * 3 * 3 * 3 * 8;
  write_file(dir / "model.json", j.dump());
  EXPECT_THROW(load_model(dir / "model.json"), ValidationError);
}

TEST(ModelIo, MissingBlobIsIntegrityError) {
  TempDir dir;
  edit_manifest(dir);
  std::filesystem::remove(dir / "model.bin");
  EXPECT_THROW(load_model(dir / "model.json"), IntegrityError);
}

TEST(ModelIo, BlobOutsideFileIsIntegrityError) {
  TempDir dir;
  json j = edit_manifest(dir);
  j["layers"][0]["params"]["weight"]["offset"] = 1u << 20;
  write_file(dir / "model.json", j.dump());
  EXPECT_THROW(load_model(dir / "model.json"), IntegrityError);
}

TEST(ModelIo, BlobLengthMustMatchShape) {
  TempDir dir;
  json j = edit_manifest(dir);
  j["layers"][0]["params"]["weight"]["length"] = 8;
  write_file(dir / "model.json", j.dump());
  EXPECT_THROW(load_model(dir / "model.json"), IntegrityError);
}

TEST(ModelIo, UnknownKindAndVersion) {
  TempDir dir;
  json j = edit_manifest(dir);
  j["layers"][1]["kind"] = "sigmoid";
  write_file(dir / "model.json", j.dump());
  EXPECT_THROW(load_model(dir / "model.json"), ParseError);
  j = edit_manifest(dir);
  j["version"] = 9;
  write_file(dir / "model.json", j.dump());
  EXPECT_THROW(load_model(dir / "model.json"), ValidationError);
  write_file(dir / "model.json", "{ not json");
  EXPECT_THROW(load_model(dir / "model.json"), ParseError);
}

TEST(ModelIo, UndefinedInputIsBrokenEdge) {
  TempDir dir;
  json j = edit_manifest(dir);
  j["layers"][1]["inputs"][0] = "nowhere";
  write_file(dir / "model.json", j.dump());
  EXPECT_THROW(load_model(dir / "model.json"), ValidationError);
}

TEST(ModelIo, FixtureModelClassifiesFixtureImage) {
  const std::filesystem::path dir = IERF_FIXTURE_DIR;
  const ModelBundle m = load_model_bundle(dir / "planted" / "model.json");
  const auto records = load_dataset(dir / "planted" / "dataset.json", m.net.class_names.size());
  ASSERT_FALSE(records.empty());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Sample s = load_sample(records[i], i, m.normalization);
    const Tensor logits = evaluate(m.net, s.image);
    const std::size_t pred = logits[0] >= logits[1] ? 0 : 1;
    EXPECT_EQ(pred, s.label) << records[i].image;
  }
}

TEST(Dataset, ValidatesLabelsAndMasks) {
  TempDir dir;
  write_file(dir / "a.pgm", pgm(2, 2, {0, 1, 2, 3}));
  write_file(dir / "m.pgm", pgm(2, 2, {0, 0, 1, 1}));
  write_file(dir / "bad.pgm", pgm(3, 2, {0, 0, 1, 1, 0, 0}));
  write_file(dir / "ok.json", R"([{"image": "a.pgm", "mask": "m.pgm", "label": 1}])");
  const auto recs = load_dataset(dir / "ok.json", 2);
  ASSERT_EQ(recs.size(), 1u);
  const Sample s = load_sample(recs[0], 0, std::nullopt);
  EXPECT_TRUE(s.mask->at(1, 0));
  EXPECT_FALSE(s.mask->at(0, 1));
  EXPECT_EQ(s.name, "a");
  EXPECT_THROW(load_dataset(dir / "ok.json", 1), ValidationError);
  write_file(dir / "bad.json", R"([{"image": "a.pgm", "mask": "bad.pgm", "label": 0}])");
  EXPECT_THROW(load_dataset(dir / "bad.json", 2), ValidationError);
}

TEST(Dataset, RoundTrip) {
  TempDir dir;
  write_file(dir / "img" / "a.pgm", pgm(1, 1, {9}));
  const std::vector<SampleRecord> recs{{dir / "img" / "a.pgm", std::nullopt, 0}};
  save_dataset(recs, dir / "d.json");
  const auto back = load_dataset(dir / "d.json", 1);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].image.lexically_normal(), recs[0].image.lexically_normal());
}

}  // namespace
}  // namespace ierf
