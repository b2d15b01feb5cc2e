// Copyright 2026 The lvlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Serial reference kernels against the OpenMP ones. Thread counts are the
// second benchmark argument; set OMP_NUM_THREADS or pass larger values on
// machines with more cores.

#include "lvlab/kernels.hpp"
#include "lvlab/model.hpp"
#include "lvlab/montecarlo.hpp"
#include "lvlab/parametrization.hpp"
#include "lvlab/sweep.hpp"
#include "lvlab/zipf.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace lvlab;

namespace {

struct Problem {
  ModelState state;
  Matrix Z;
  Vector weights;
};

Problem make_problem(Index d) {
  const Index m = 8 * d;
  RngStream rng(0, 1);
  Problem p;
  p.state = init_model(m, d, 1.0 / std::sqrt(double(d)), 1.0 / std::sqrt(double(d)), rng);
  p.Z = make_targets(p.state, rng).matrix();
  p.weights = zipf_distribution(m, 1.0).frequencies();
  return p;
}

void BM_GradientsReference(benchmark::State& st) {
  const Problem p = make_problem(st.range(0));
  const double c = 1.0 / static_cast<double>(p.state.m);
  for (auto _ : st) {
    auto r = kernels::reference::loss_and_gradients(p.state.E, p.state.W, p.Z, p.weights, c);
    benchmark::DoNotOptimize(r.loss);
  }
}
BENCHMARK(BM_GradientsReference)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_GradientsDense(benchmark::State& st) {
  const Problem p = make_problem(st.range(0));
  const double c = 1.0 / static_cast<double>(p.state.m);
  const int threads = static_cast<int>(st.range(1));
  for (auto _ : st) {
    auto r = kernels::dense_loss_and_gradients(p.state.E, p.state.W, p.Z, p.weights, c, true, threads);
    benchmark::DoNotOptimize(r.loss);
  }
}
BENCHMARK(BM_GradientsDense)->ArgsProduct({{16, 32, 128}, {1, 2}})->Unit(benchmark::kMillisecond);

void BM_GradientsFactored(benchmark::State& st) {
  const Index d = st.range(0), m = 8 * d;
  RngStream rng(0, 2);
  const ModelState s = init_model(m, d, 1.0 / std::sqrt(double(d)), 1.0 / std::sqrt(double(d)), rng);
  const Targets t = make_teacher_targets(m, d, 1.0, rng);
  const Vector w = zipf_distribution(m, 1.0).frequencies();
  const Matrix BBt = t.right() * t.right().transpose();
  const int threads = static_cast<int>(st.range(1));
  for (auto _ : st) {
    auto r = kernels::factored_loss_and_gradients(s.E, s.W, t.left(), t.right(), BBt, w, 1.0 / double(m), true,
                                                  threads);
    benchmark::DoNotOptimize(r.loss);
  }
}
BENCHMARK(BM_GradientsFactored)->ArgsProduct({{32, 128}, {1, 2}})->Unit(benchmark::kMillisecond);

void BM_SignDescentReference(benchmark::State& st) {
  const Problem p = make_problem(st.range(0));
  Matrix E = p.state.E;
  for (auto _ : st) {
    kernels::reference::sign_descent(E, p.state.E, 1e-3);
    benchmark::DoNotOptimize(E.data());
  }
}
BENCHMARK(BM_SignDescentReference)->Arg(128);

void BM_SignDescent(benchmark::State& st) {
  const Problem p = make_problem(st.range(0));
  Matrix E = p.state.E;
  const int threads = static_cast<int>(st.range(1));
  for (auto _ : st) {
    kernels::sign_descent(E, p.state.E, 1e-3, threads);
    benchmark::DoNotOptimize(E.data());
  }
}
BENCHMARK(BM_SignDescent)->ArgsProduct({{128}, {1, 2}});

void BM_TrialsSerial(benchmark::State& st) {
  const RngStream rng(0, 3);
  for (auto _ : st) {
    Estimate e;
    serial_trials<double>(
        st.range(0), [&](std::int64_t t) { return rng.substream(static_cast<std::uint64_t>(t)).gaussian(); },
        [&](std::int64_t, double x) { e = accumulate(e, x); });
    benchmark::DoNotOptimize(e.mean);
  }
}
BENCHMARK(BM_TrialsSerial)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_TrialsParallel(benchmark::State& st) {
  const RngStream rng(0, 3);
  const int threads = static_cast<int>(st.range(1));
  for (auto _ : st) {
    Estimate e;
    parallel_trials<double>(
        st.range(0), [&](std::int64_t t) { return rng.substream(static_cast<std::uint64_t>(t)).gaussian(); },
        [&](std::int64_t, double x) { e = accumulate(e, x); }, threads);
    benchmark::DoNotOptimize(e.mean);
  }
}
BENCHMARK(BM_TrialsParallel)->ArgsProduct({{100000}, {1, 2}})->Unit(benchmark::kMillisecond);

SweepConfig small_sweep() {
  SweepConfig c;
  c.configurations = {{16, 128}, {32, 256}};
  c.lr_grid = geometric_grid(0.01, 2.0, 5);
  c.seeds = {0, 1};
  c.steps = 50;
  c.parametrization = parse_parametrization_config(R"({"parametrization": "LVP", "base_eta": 0.2})");
  return c;
}

void BM_SweepSerial(benchmark::State& st) {
  const SweepConfig c = small_sweep();
  for (auto _ : st) benchmark::DoNotOptimize(run_sweep_serial(c).size());
}
BENCHMARK(BM_SweepSerial)->Unit(benchmark::kMillisecond);

void BM_SweepParallel(benchmark::State& st) {
  const SweepConfig c = small_sweep();
  set_thread_count(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(run_sweep(c).size());
  set_thread_count(0);
}
BENCHMARK(BM_SweepParallel)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
