#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "ierf/concepts/dictionary.h"
#include "ierf/concepts/kmeans.h"
#include "ierf/concepts/lasso.h"
#include "ierf/concepts/sampling.h"
#include "ierf/icat/alignment.h"
#include "ierf/srd/saliency.h"
#include "ierf/srd/sharing_ratio.h"
#include "ierf/tensor/tape.h"
#include "ierf/toy/toy_models.h"
#include "ierf/util/random.h"

namespace ierf {
namespace {

NetworkGraph bench_net(std::size_t side, Rng& rng) {
  toy::RandomNetOptions o;
  o.height = o.width = side;
  o.channels = 8;
  return toy::random_cnn(o, rng);
}

void BM_SharingTable(benchmark::State& state) {
  Rng rng(1);
  const NetworkGraph net = bench_net(static_cast<std::size_t>(state.range(0)), rng);
  const ForwardResult r = forward(net, toy::random_tensor(net.input_shape, rng));
  for (auto _ : state) benchmark::DoNotOptimize(build_sharing_table(r.tape));
}
BENCHMARK(BM_SharingTable)->Arg(8)->Arg(16)->Arg(32);

void BM_Saliency(benchmark::State& state) {
  Rng rng(2);
  const NetworkGraph net = bench_net(static_cast<std::size_t>(state.range(0)), rng);
  const Tensor x = toy::random_tensor(net.input_shape, rng);
  for (auto _ : state) benchmark::DoNotOptimize(saliency(net, x, 0));
}
BENCHMARK(BM_Saliency)->Arg(8)->Arg(16)->Arg(32);

void BM_Lasso(benchmark::State& state) {
  Rng rng(3);
  const Eigen::Index d = state.range(0);
  Eigen::MatrixXd v(d, 8 * d);
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.normal();
  v.colwise().normalize();
  Eigen::VectorXd x(d);
  for (Eigen::Index i = 0; i < d; ++i) x(i) = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(lasso_solve(v, x, 0.05));
}
BENCHMARK(BM_Lasso)->Arg(8)->Arg(32);

void BM_BisectingKMeans(benchmark::State& state) {
  Rng rng(4);
  Eigen::MatrixXd s(state.range(0), 16);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(bisecting_kmeans(s, 128, 7));
}
BENCHMARK(BM_BisectingKMeans)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_IcatParents(benchmark::State& state) {
  const NetworkGraph net = toy::planted_pathway_net();
  Rng rng(5);
  std::vector<Tensor> images;
  for (std::size_t i = 0; i < 8; ++i) images.push_back(toy::planted_pathway_image(i % 2, rng));
  const int la = net.value_id("act1"), lb = net.value_id("act2");
  const ConceptDictionary da = build_dictionary("act1", sample_pfvs(net, images, la, 200, 1), {}, 2);
  const ConceptDictionary db = build_dictionary("act2", sample_pfvs(net, images, lb, 200, 3), {}, 4);
  std::vector<CoefficientMap> ca, cb;
  for (const Tensor& im : images) {
    const ForwardResult r = forward(net, im);
    ca.push_back(coefficient_map(da, pfv_matrix(r.tape.value(la))));
    cb.push_back(coefficient_map(db, pfv_matrix(r.tape.value(lb))));
  }
  AttributionOptions ig;
  ig.ig_steps = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(icat_parents(net, la, lb, da, db, ca, cb, 0, ig));
}
BENCHMARK(BM_IcatParents)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace ierf

BENCHMARK_MAIN();
