#include <benchmark/benchmark.h>

#include "dlalign/dynamics.hpp"
#include "dlalign/neural.hpp"
#include "dlalign/rng.hpp"

namespace {

void BM_PhysicsStep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const dlalign::DynamicsParams params = dlalign::default_params(n);
  std::vector<double> q(n, 0.3), qd(n, 0.1);
  dlalign::SimState s = dlalign::make_state(params, q, qd, q);
  const dlalign::Action a{q};
  for (auto _ : state) {
    s = dlalign::step(s, a, params);
    benchmark::DoNotOptimize(s.q.data());
  }
}
BENCHMARK(BM_PhysicsStep)->Arg(2)->Arg(4);

void BM_MlpForward(benchmark::State& state) {
  dlalign::Rng rng = dlalign::make_rng(7);
  const int d = static_cast<int>(state.range(0));
  dlalign::MlpSpec spec{{d, 64, 64, 2}, dlalign::Activation::kTanh};
  const dlalign::Mlp net = dlalign::Mlp::create(spec, rng);
  std::vector<double> in(static_cast<size_t>(d));
  for (auto& v : in) v = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    auto out = net.forward(in);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_MlpForward)->Arg(31)->Arg(64);

void BM_MlpBackward(benchmark::State& state) {
  dlalign::Rng rng = dlalign::make_rng(7);
  dlalign::MlpSpec spec{{31, 64, 64, 2}, dlalign::Activation::kTanh};
  const dlalign::Mlp net = dlalign::Mlp::create(spec, rng);
  std::vector<double> in(31);
  for (auto& v : in) v = rng.uniform(-1.0, 1.0);
  dlalign::MlpCache cache;
  const auto out = dlalign::forward_cached(net, in, cache);
  std::vector<double> out_grad(out.size(), 1.0);
  std::vector<double> param_grad(net.params.size(), 0.0), in_grad;
  for (auto _ : state) {
    dlalign::backward(net, cache, out_grad, param_grad, in_grad);
    benchmark::DoNotOptimize(param_grad.data());
  }
}
BENCHMARK(BM_MlpBackward);

}  // namespace

BENCHMARK_MAIN();
