#include <benchmark/benchmark.h>

#include <vector>

#include "octbio/core/rng.hpp"
#include "octbio/models/model.hpp"
#include "octbio/tensor/kernels.hpp"
#include "octbio/tensor/ops.hpp"

using namespace octbio;
namespace k = octbio::kernels;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

const k::Ops& ops_for(const benchmark::State& state) {
  return state.range(0) == 0 ? k::serial::ops : k::parallel::ops;
}

void label(benchmark::State& state) { state.SetLabel(state.range(0) == 0 ? "serial" : "parallel"); }

void BM_Gemm(benchmark::State& state) {
  const auto& ops = ops_for(state);
  const std::int64_t n = state.range(1);
  const auto a = random_values(static_cast<std::size_t>(n * n), 1);
  const auto b = random_values(static_cast<std::size_t>(n * n), 2);
  std::vector<double> c(static_cast<std::size_t>(n * n));
  k::GemmArgs args;
  args.m = args.n = args.k = n;
  args.a = a.data();
  args.b = b.data();
  args.c = c.data();
  for (auto _ : state) {
    ops.gemm(args);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
  label(state);
}
BENCHMARK(BM_Gemm)->ArgsProduct({{0, 1}, {64, 128, 256}})->Unit(benchmark::kMicrosecond);

k::Conv2dArgs conv_shape(std::int64_t channels, std::int64_t side) {
  k::Conv2dArgs s;
  s.batch = 8;
  s.in_channels = s.out_channels = channels;
  s.height = s.width = side;
  s.kernel = 3;
  s.pad = 1;
  return s;
}

void BM_Conv2dForward(benchmark::State& state) {
  const auto& ops = ops_for(state);
  const auto s = conv_shape(state.range(1), 32);
  const auto x = random_values(static_cast<std::size_t>(s.batch * s.in_channels * s.height * s.width), 3);
  const auto w = random_values(static_cast<std::size_t>(s.out_channels * s.in_channels * 9), 4);
  const auto bias = random_values(static_cast<std::size_t>(s.out_channels), 5);
  std::vector<double> y(static_cast<std::size_t>(s.batch * s.out_channels * s.out_height() * s.out_width()));
  for (auto _ : state) {
    ops.conv2d_forward(s, x.data(), w.data(), bias.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
  label(state);
}
BENCHMARK(BM_Conv2dForward)->ArgsProduct({{0, 1}, {8, 16, 32}})->Unit(benchmark::kMicrosecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const auto& ops = ops_for(state);
  const auto s = conv_shape(state.range(1), 32);
  const auto x = random_values(static_cast<std::size_t>(s.batch * s.in_channels * s.height * s.width), 6);
  const auto w = random_values(static_cast<std::size_t>(s.out_channels * s.in_channels * 9), 7);
  const auto gy = random_values(static_cast<std::size_t>(s.batch * s.out_channels * s.out_height() * s.out_width()), 8);
  std::vector<double> gx(x.size()), gw(w.size()), gb(static_cast<std::size_t>(s.out_channels));
  for (auto _ : state) {
    ops.conv2d_backward_data(s, gy.data(), w.data(), gx.data());
    ops.conv2d_backward_weight(s, x.data(), gy.data(), gw.data(), gb.data());
    benchmark::DoNotOptimize(gx.data());
    benchmark::DoNotOptimize(gw.data());
  }
  label(state);
}
BENCHMARK(BM_Conv2dBackward)->ArgsProduct({{0, 1}, {8, 16, 32}})->Unit(benchmark::kMicrosecond);

void BM_Softmax(benchmark::State& state) {
  const auto& ops = ops_for(state);
  const std::int64_t rows = 1024, cols = state.range(1);
  const auto x = random_values(static_cast<std::size_t>(rows * cols), 9);
  std::vector<double> y(x.size());
  for (auto _ : state) {
    ops.softmax_rows(rows, cols, x.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
  label(state);
}
BENCHMARK(BM_Softmax)->ArgsProduct({{0, 1}, {16, 64}})->Unit(benchmark::kMicrosecond);

// One forward and backward pass of a full model on a batch of 8.
void BM_TrainStep(benchmark::State& state) {
  k::set_backend(state.range(0) == 0 ? k::Backend::Serial : k::Backend::Parallel);
  models::BackboneSpec spec;
  spec.kind = static_cast<models::BackboneKind>(state.range(1));
  auto model = models::build_model(spec, 1);
  model->set_training(true);
  const auto x = tensor::Tensor::from({8, 3, 64, 64}, random_values(8 * 3 * 64 * 64, 10));
  for (auto _ : state) {
    auto loss = tensor::mean(model->logits(x), {0, 1});
    loss.backward();
    model->parameters().zero_grad();
  }
  k::set_backend(k::Backend::Parallel);
  state.SetLabel(std::string(state.range(0) == 0 ? "serial " : "parallel ") + models::to_string(spec.kind));
}
BENCHMARK(BM_TrainStep)
    ->ArgsProduct({{0, 1},
                   {static_cast<int>(models::BackboneKind::CONV_CBAM), static_cast<int>(models::BackboneKind::LOCAL_ATTN),
                    static_cast<int>(models::BackboneKind::GLOBAL_ATTN)}})
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
