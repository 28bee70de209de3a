// Regenerates the committed test fixtures:
//   ierf_make_fixtures <out_dir>
// writes <out_dir>/planted/{model.json,model.bin,dataset.json,images/,masks/}.

#include <cstdio>
#include <filesystem>
#include <string>

#include "ierf/io/dataset.h"
#include "ierf/io/image.h"
#include "ierf/io/model_io.h"
#include "ierf/tensor/tape.h"
#include "ierf/toy/toy_models.h"

namespace fs = std::filesystem;

namespace {

void write_planted(const fs::path& root) {
  const fs::path dir = root / "planted";
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  const ierf::NetworkGraph net = ierf::toy::planted_pathway_net();
  ierf::save_model(net, dir / "model.json");

  ierf::Rng rng(ierf::derive_seed(7, {1}));
  std::vector<ierf::SampleRecord> records;
  for (std::size_t i = 0; i < 24; ++i) {
    const std::size_t label = i % 2;
    const ierf::toy::PlantedSample s = ierf::toy::planted_pathway_sample(label, rng);
    const std::string stem = "sample" + std::to_string(i);
    const fs::path image = dir / "images" / (stem + ".ppm");
    const fs::path mask = dir / "masks" / (stem + ".pgm");
    ierf::save_image(s.image, image);
    ierf::GrayImage m{12, 12, std::vector<std::uint8_t>(144, 0)};
    for (std::size_t y = s.y0; y < s.y0 + 3; ++y) {
      for (std::size_t x = s.x0; x < s.x0 + 3; ++x) m.pixels[y * 12 + x] = 255;
    }
    ierf::save_pgm(m, mask);
    records.push_back({image, mask, label});

    const ierf::Tensor logits = ierf::evaluate(net, ierf::load_image(image));
    if ((logits[0] >= logits[1] ? 0u : 1u) != label) {
      std::fprintf(stderr, "fixture %s misclassified\n", stem.c_str());
    }
  }
  ierf::save_dataset(records, dir / "dataset.json");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <out_dir>\n", argv[0]);
    return 1;
  }
  write_planted(argv[1]);
  return 0;
}
