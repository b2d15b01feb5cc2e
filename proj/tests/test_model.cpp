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


#include "lvlab/kernels.hpp"
#include "lvlab/model.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

using namespace lvlab;

namespace {

double max_rel_diff(const Matrix& a, const Matrix& b) {
  const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  return scale == 0.0 ? 0.0 : (a - b).cwiseAbs().maxCoeff() / scale;
}

struct Instance {
  ModelState state;
  Targets targets;
  TokenDistribution dist;
};

Instance random_instance(Index m, Index d, std::uint64_t seed, double a = 1.0) {
  RngStream rng(seed, 0);
  ModelState s = init_model(m, d, 0.8, 0.6, rng);
  Targets t = make_targets(s, rng);
  return {std::move(s), std::move(t), zipf_distribution(m, a)};
}

TrainConfig small_config() {
  TrainConfig c;
  c.m = 16;
  c.d = 8;
  c.sigma_E = 0.5;
  c.sigma_W = 0.5;
  c.eta_E = 0.01;
  c.eta_W = 0.01;
  c.steps = 50;
  c.seed = 4;
  return c;
}

}  // namespace

TEST_CASE("init_model: zero scales give zero outputs") {
  RngStream rng(0, 0);
  const ModelState s = init_model(6, 3, 0.0, 0.0, rng);
  for (Index i = 1; i <= 6; ++i) CHECK(forward(s, Token(i)).isZero(0.0));
}

TEST_CASE("init_model: entry variance for m = 512, d = 64") {
  RngStream rng(1, 0);
  const ModelState s = init_model(512, 64, 1.0, 1.0, rng);
  const double mean = s.E.mean();
  const double var = (s.E.array() - mean).square().sum() / static_cast<double>(s.E.size() - 1);
  CHECK(std::abs(var - 1.0) < 0.02);
  CHECK(s.E.rows() == 512);
  CHECK(s.W.rows() == 64);
  CHECK(s.W.cols() == 512);
}

TEST_CASE("init_model: deterministic and validated") {
  RngStream a(3, 3), b(3, 3);
  CHECK(init_model(5, 4, 1.0, 2.0, a).E == init_model(5, 4, 1.0, 2.0, b).E);
  RngStream rng(0, 0);
  CHECK_THROWS_AS(init_model(4, 4, std::numeric_limits<double>::infinity(), 1.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(init_model(4, 4, 1.0, -1.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(init_model(0, 4, 1.0, 1.0, rng), std::invalid_argument);
}

TEST_CASE("make_targets: residual at init is standard Gaussian") {
  RngStream rng(12, 0);
  const ModelState s = init_model(512, 16, 1.0, 0.5, rng);
  const Targets t = make_targets(s, rng);
  const Matrix R = s.E * s.W - t.matrix();
  const double mean = R.mean();
  const double var = (R.array() - mean).square().sum() / static_cast<double>(R.size() - 1);
  CHECK(std::abs(mean) < 4.0 / 512.0);
  CHECK(std::abs(var - 1.0) < 0.02);

  const Targets exact = make_targets(s, rng, {.zero_noise = true});
  CHECK(population_loss(s, zipf_distribution(512, 1.0), exact) == doctest::Approx(0.0).epsilon(1e-20));
}

TEST_CASE("factored targets refuse dense access") {
  RngStream rng(0, 0);
  const Targets t = make_teacher_targets(8, 2, 1.0, rng);
  CHECK(t.is_factored());
  CHECK(t.rank() == 2);
  CHECK_THROWS_AS(t.matrix(), std::logic_error);
  CHECK(t.materialize().rows() == 8);
  CHECK(t.row(3) == t.materialize().row(3));
}

TEST_CASE("forward: scalar model and one-hot equivalence") {
  ModelState s;
  s.m = s.d = 1;
  s.E = Matrix::Constant(1, 1, 2.0);
  s.W = Matrix::Constant(1, 1, 3.0);
  CHECK(forward(s, Token(1))(0) == 6.0);
  CHECK_THROWS_AS(forward(s, Token(2)), std::out_of_range);
  CHECK_THROWS_AS(forward(s, Token(0)), std::out_of_range);

  RngStream rng(21, 0);
  for (int k = 0; k < 100; ++k) {
    const Index m = 1 + static_cast<Index>(rng.below(40));
    const Index d = 1 + static_cast<Index>(rng.below(12));
    const Token tok(1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(m))));
    const ModelState st = init_model(m, d, 1.0, 1.0, rng);
    RowVector u = RowVector::Zero(m);
    u(tok.index()) = 1.0;
    const RowVector onehot = u * st.E * st.W;
    CHECK((forward(st, tok) - onehot).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, onehot.cwiseAbs().maxCoeff()));
  }

  ModelState z = init_model(4, 3, 1.0, 1.0, rng);
  z.E.row(2).setZero();
  CHECK(forward(z, Token(3)).isZero(0.0));
}

TEST_CASE("population_loss: single token and zero residual") {
  ModelState s;
  s.m = 1;
  s.d = 3;
  s.E = Matrix::Constant(1, 3, 1.0);
  s.W = Matrix::Constant(3, 1, 1.0);
  const Targets t = Targets::dense(Matrix::Constant(1, 1, 3.0 - 0.25));
  CHECK(population_loss(s, zipf_distribution(1, 1.0), t) == doctest::Approx(0.25 * 0.25 / 2.0).epsilon(1e-15));
}

TEST_CASE("population_loss under fresh targets averages 1/2") {
  const auto dist = zipf_distribution(64, 1.0);
  Estimate e;
  for (int k = 0; k < 200; ++k) {
    RngStream rng(99, static_cast<std::uint64_t>(k));
    const ModelState s = init_model(64, 8, 1.0, 1.0, rng);
    e = accumulate(e, population_loss(s, dist, make_targets(s, rng)));
  }
  CHECK(std::abs(e.mean - 0.5) <= 3.0 * e.standard_error());
}

TEST_CASE("dE rows are alpha_i times the residual times W^T") {
  const Instance in = random_instance(24, 5, 7);
  const GradientPair g = infinite_batch_gradients(in.state, in.dist, in.targets, GradientScale::kRawResidual);
  for (Index i = 1; i <= 24; ++i) {
    const RowVector r = forward(in.state, Token(i)) - in.targets.row(i - 1);
    const RowVector expect = in.dist.alpha(Token(i)) * r * in.state.W.transpose();
    CHECK((g.dE.row(i - 1) - expect).cwiseAbs().maxCoeff() <= 1e-13 * expect.cwiseAbs().maxCoeff());
  }
  const GradientPair t = infinite_batch_gradients(in.state, in.dist, in.targets);
  CHECK(max_rel_diff(t.dE * 24.0, g.dE) < 1e-14);
  CHECK(max_rel_diff(t.dW * 24.0, g.dW) < 1e-14);
}

TEST_CASE("unseen tokens get zero embedding gradients") {
  const Instance in = random_instance(6, 3, 8);
  const auto dist = TokenDistribution::from_weights({0.5, 0.3, 0.2, 0.0, 0.0, 0.0});
  const GradientPair g = infinite_batch_gradients(in.state, dist, in.targets);
  for (Index i = 3; i < 6; ++i) CHECK(g.dE.row(i).isZero(0.0));
  CHECK_FALSE(g.dE.row(0).isZero(0.0));
}

TEST_CASE("scaling one frequency scales that dE row") {
  const Instance in = random_instance(10, 4, 9);
  Vector w = in.dist.frequencies();
  const GradientPair base = weighted_gradients(in.state, w, in.targets, GradientScale::kRawResidual);
  Vector w2 = w;
  w2(3) *= 2.0;
  const GradientPair twice = weighted_gradients(in.state, w2, in.targets, GradientScale::kRawResidual);
  CHECK(twice.dE.row(3) == 2.0 * base.dE.row(3));
  w2 = w;
  w2(3) *= 3.0;
  const GradientPair thrice = weighted_gradients(in.state, w2, in.targets, GradientScale::kRawResidual);
  CHECK((thrice.dE.row(3) - 3.0 * base.dE.row(3)).cwiseAbs().maxCoeff() <= 1e-14 * base.dE.row(3).cwiseAbs().maxCoeff());
}

TEST_CASE("gradients match central finite differences on every coordinate (m = 16, d = 8)") {
  for (bool factored : {false, true}) {
    CAPTURE(factored);
    RngStream rng(31, factored ? 1 : 0);
    ModelState s = init_model(16, 8, 0.7, 0.7, rng);
    const Targets t = factored ? make_teacher_targets(16, 3, 1.0, rng) : make_targets(s, rng);
    const auto dist = zipf_distribution(16, 1.0);
    const GradientPair g = infinite_batch_gradients(s, dist, t);
    const double h = 1e-4;  // the loss is quadratic along each coordinate
    double worst = 0.0;
    auto probe = [&](Matrix& param, const Matrix& grad) {
      for (Index k = 0; k < param.size(); ++k) {
        const double keep = param.data()[k];
        param.data()[k] = keep + h;
        const double up = population_loss(s, dist, t);
        param.data()[k] = keep - h;
        const double down = population_loss(s, dist, t);
        param.data()[k] = keep;
        const double fd = (up - down) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - grad.data()[k]) / std::abs(grad.data()[k]));
      }
    };
    probe(s.E, g.dE);
    probe(s.W, g.dW);
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("dense kernel matches the reference loops") {
  const Instance in = random_instance(33, 7, 10);
  const Vector w = in.dist.frequencies();
  const auto fast = kernels::dense_loss_and_gradients(in.state.E, in.state.W, in.targets.matrix(), w, 0.25, true, 4);
  const auto ref = kernels::reference::loss_and_gradients(in.state.E, in.state.W, in.targets.matrix(), w, 0.25);
  CHECK(fast.loss == doctest::Approx(ref.loss).epsilon(1e-13));
  CHECK(max_rel_diff(fast.dE, ref.dE) < 1e-13);
  CHECK(max_rel_diff(fast.dW, ref.dW) < 1e-13);
}

TEST_CASE("factored kernel matches the dense kernel on materialized targets") {
  RngStream rng(14, 0);
  const ModelState s = init_model(40, 6, 0.9, 0.4, rng);
  const Targets t = make_teacher_targets(40, 5, 1.3, rng);
  const Matrix Z = t.materialize();
  const Vector w = zipf_distribution(40, 1.1).frequencies();
  const Matrix BBt = t.right() * t.right().transpose();
  const auto fac = kernels::factored_loss_and_gradients(s.E, s.W, t.left(), t.right(), BBt, w, 0.5, true, 2);
  const auto den = kernels::dense_loss_and_gradients(s.E, s.W, Z, w, 0.5, true, 2);
  CHECK(fac.loss == doctest::Approx(den.loss).epsilon(1e-12));
  CHECK(max_rel_diff(fac.dE, den.dE) < 1e-12);
  CHECK(max_rel_diff(fac.dW, den.dW) < 1e-12);
}

TEST_CASE("element-wise kernels are bit-identical across thread counts") {
  RngStream rng(15, 0);
  const Matrix P = gaussian_matrix(300, 70, 1.0, rng);
  const Matrix G = gaussian_matrix(300, 70, 1.0, rng);
  Matrix a = P, b = P, r = P;
  kernels::sign_descent(a, G, 0.01, 1);
  kernels::sign_descent(b, G, 0.01, 4);
  kernels::reference::sign_descent(r, G, 0.01);
  CHECK(a == b);
  CHECK(a == r);

  const Instance in = random_instance(64, 8, 16);
  const Vector w = in.dist.frequencies();
  const auto one = kernels::dense_loss_and_gradients(in.state.E, in.state.W, in.targets.matrix(), w, 1.0, true, 1);
  const auto four = kernels::dense_loss_and_gradients(in.state.E, in.state.W, in.targets.matrix(), w, 1.0, true, 4);
  CHECK(one.loss == four.loss);
  CHECK(one.dE == four.dE);
  CHECK(one.dW == four.dW);
}

TEST_CASE("finite batch: large N approaches the infinite-batch gradient") {
  const Instance in = random_instance(16, 4, 17);
  const GradientPair exact = infinite_batch_gradients(in.state, in.dist, in.targets);
  RngStream rng(17, 1);
  const std::uint64_t n = 1'000'000;
  const GradientPair approx = finite_batch_gradients(in.state, in.dist, in.targets, n, rng);
  const double c = 1.0 / 16.0;
  for (Index i = 0; i < 16; ++i) {
    const double a = in.dist.alphas()[static_cast<std::size_t>(i)];
    const double se = std::sqrt(a * (1.0 - a) / static_cast<double>(n));
    const RowVector r = forward(in.state, Token(i + 1)) - in.targets.row(i);
    const RowVector unit = c * r * in.state.W.transpose();
    for (Index k = 0; k < 4; ++k) CHECK(std::abs(approx.dE(i, k) - exact.dE(i, k)) <= 4.0 * se * std::abs(unit(k)) + 1e-15);
  }
}

TEST_CASE("finite batch: one draw touches one embedding row") {
  const Instance in = random_instance(16, 4, 18);
  RngStream a(5, 5), b(5, 5);
  const GradientPair g = finite_batch_gradients(in.state, in.dist, in.targets, 1, a);
  int nonzero = 0;
  for (Index i = 0; i < 16; ++i) nonzero += !g.dE.row(i).isZero(0.0);
  CHECK(nonzero == 1);
  CHECK(g.dE == finite_batch_gradients(in.state, in.dist, in.targets, 1, b).dE);
  CHECK_THROWS_AS(finite_batch_gradients(in.state, in.dist, in.targets, 0, a), std::invalid_argument);
}

TEST_CASE("finite batch error decays like N^(-1/2)") {
  const Instance in = random_instance(16, 4, 19);
  const GradientPair exact = infinite_batch_gradients(in.state, in.dist, in.targets);
  std::vector<double> xs, ys;
  for (std::uint64_t n = 1000; n <= 1'024'000; n *= 2) {
    double mean_err = 0.0;
    const int reps = 24;
    for (int r = 0; r < reps; ++r) {
      RngStream rng(n, static_cast<std::uint64_t>(r));
      const GradientPair g = finite_batch_gradients(in.state, in.dist, in.targets, n, rng);
      mean_err += std::max((g.dE - exact.dE).cwiseAbs().maxCoeff(), (g.dW - exact.dW).cwiseAbs().maxCoeff());
    }
    xs.push_back(std::log(static_cast<double>(n)));
    ys.push_back(std::log(mean_err / reps));
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= xs.size();
  my /= ys.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxy += (xs[k] - mx) * (ys[k] - my);
    sxx += (xs[k] - mx) * (xs[k] - mx);
  }
  CHECK(std::abs(sxy / sxx + 0.5) <= 0.15);
}

TEST_CASE("sign_map ties and idempotence") {
  Matrix M(1, 4);
  M << 0.0, -3.2, 5.0, -0.0;
  const Matrix S = sign_map(M);
  CHECK(S(0, 0) == 1.0);
  CHECK(S(0, 1) == -1.0);
  CHECK(S(0, 2) == 1.0);
  CHECK(S(0, 3) == 1.0);
  CHECK(sign_map(S) == S);
}

TEST_CASE("SignSGD with positive gradients subtracts eta exactly") {
  RngStream rng(20, 0);
  const ModelState s = init_model(5, 3, 1.0, 1.0, rng);
  GradientPair g{Matrix::Constant(5, 3, 0.7), Matrix::Constant(3, 5, 2.0)};
  Optimizer opt = Optimizer::sign_sgd();
  const ModelState next = step(s, g, opt, 0.1, 0.25);
  for (Index k = 0; k < s.E.size(); ++k) CHECK(next.E.data()[k] == s.E.data()[k] - 0.1);
  for (Index k = 0; k < s.W.size(); ++k) CHECK(next.W.data()[k] == s.W.data()[k] - 0.25);
}

TEST_CASE("SignSGD moves unseen tokens by eta (sign(0) = +1)") {
  const Instance in = random_instance(6, 3, 22);
  const auto dist = TokenDistribution::from_weights({0.6, 0.4, 0.0, 0.0, 0.0, 0.0});
  Optimizer opt = Optimizer::sign_sgd();
  const ModelState next = step(in.state, infinite_batch_gradients(in.state, dist, in.targets), opt, 0.05, 0.0);
  for (Index i = 2; i < 6; ++i)
    for (Index j = 0; j < 3; ++j) CHECK(next.E(i, j) == in.state.E(i, j) - 0.05);
}

TEST_CASE("SGD with zero learning rate leaves the state unchanged") {
  const Instance in = random_instance(7, 3, 21);
  Optimizer opt = Optimizer::sgd();
  const ModelState next = step(in.state, infinite_batch_gradients(in.state, in.dist, in.targets), opt, 0.0, 0.0);
  CHECK(next.E == in.state.E);
  CHECK(next.W == in.state.W);
}

TEST_CASE("Adam with zero moments and tiny epsilon moves like SignSGD") {
  const Instance in = random_instance(12, 5, 22);
  const GradientPair g = infinite_batch_gradients(in.state, in.dist, in.targets);
  Optimizer adam = Optimizer::adam(0.0, 0.0, 1e-300);
  Optimizer sign = Optimizer::sign_sgd();
  const ModelState a = step(in.state, g, adam, 0.01, 0.02);
  const ModelState b = step(in.state, g, sign, 0.01, 0.02);
  CHECK(max_rel_diff(a.E - in.state.E, b.E - in.state.E) < 1e-12);
  CHECK(max_rel_diff(a.W - in.state.W, b.W - in.state.W) < 1e-12);
  CHECK(adam.steps_taken() == 1);
}

TEST_CASE("optimizer validation and shape checks") {
  CHECK_THROWS_AS(Optimizer::adam(1.0, 0.9, 1e-8), std::invalid_argument);
  CHECK_THROWS_AS(Optimizer::adam(0.9, -0.1, 1e-8), std::invalid_argument);
  CHECK_THROWS_AS(Optimizer::adam(0.9, 0.99, 0.0), std::invalid_argument);
  CHECK(parse_optimizer("SignSGD").kind() == OptimizerKind::kSignSGD);
  CHECK(parse_optimizer("adam").kind() == OptimizerKind::kAdam);
  CHECK_THROWS_AS(parse_optimizer("lion"), std::invalid_argument);

  const Instance in = random_instance(6, 3, 23);
  Optimizer opt = Optimizer::sign_sgd();
  GradientPair bad{Matrix::Zero(6, 2), Matrix::Zero(3, 6)};
  CHECK_THROWS_AS(step(in.state, bad, opt, 0.1, 0.1), std::invalid_argument);
}

TEST_CASE("train: zero learning rates give a flat trajectory") {
  TrainConfig c = small_config();
  c.eta_E = c.eta_W = 0.0;
  const TrainResult r = train(c, zipf_distribution(c.m, 1.0));
  REQUIRE(r.losses.size() == 51);
  for (double l : r.losses) CHECK(l == doctest::Approx(r.losses.front()).epsilon(1e-14));
  CHECK_FALSE(r.diverged);
}

TEST_CASE("train: small-step SGD decreases the loss monotonically") {
  TrainConfig c = small_config();
  c.optimizer = OptimizerKind::kSGD;
  c.eta_E = c.eta_W = 1.0;
  const TrainResult r = train(c, zipf_distribution(c.m, 1.0));
  for (std::size_t t = 1; t < r.losses.size(); ++t) CHECK(r.losses[t] < r.losses[t - 1]);
}

TEST_CASE("train: huge SignSGD steps are flagged as divergent") {
  TrainConfig c = small_config();
  c.eta_E = c.eta_W = 1e7;
  const TrainResult r = train(c, zipf_distribution(c.m, 1.0));
  CHECK(r.diverged);
  CHECK(r.diverged_at >= 0);
  CHECK(std::isinf(r.final_loss()));
  std::ostringstream os;
  write_trajectory_csv(os, r);
  CHECK(os.str().rfind("step,loss,diverged\n0,", 0) == 0);
  CHECK(os.str().find(",inf,1\n") != std::string::npos);
}

TEST_CASE("train: deterministic and independent of the thread count") {
  for (auto kind : {TargetKind::kGaussianResidual, TargetKind::kTeacher})
    for (auto prec : {Precision::kDouble, Precision::kFloat}) {
      TrainConfig c = small_config();
      c.m = 96;
      c.d = 24;
      c.steps = 20;
      c.targets = kind;
      c.precision = prec;
      c.eta_E = c.eta_W = 0.005;
      const auto dist = zipf_distribution(c.m, 1.0);
      set_thread_count(1);
      const TrainResult one = train(c, dist);
      set_thread_count(4);
      const TrainResult four = train(c, dist);
      set_thread_count(0);
      const TrainResult again = train(c, dist);
      for (std::size_t t = 0; t < one.losses.size(); ++t) {
        CHECK(one.losses[t] == four.losses[t]);
        CHECK(one.losses[t] == again.losses[t]);
      }
    }
}

TEST_CASE("train: float and double runs agree closely") {
  TrainConfig c = small_config();
  c.targets = TargetKind::kTeacher;
  c.eta_E = c.eta_W = 0.003;
  const auto dist = zipf_distribution(c.m, 1.0);
  const TrainResult d = train(c, dist);
  c.precision = Precision::kFloat;
  const TrainResult f = train(c, dist);
  CHECK(f.final_loss() == doctest::Approx(d.final_loss()).epsilon(1e-3));
}

TEST_CASE("train: only the endpoints are computed without a trajectory") {
  TrainConfig c = small_config();
  c.record_trajectory = false;
  const auto dist = zipf_distribution(c.m, 1.0);
  const TrainResult sparse = train(c, dist);
  c.record_trajectory = true;
  const TrainResult full = train(c, dist);
  CHECK(std::isnan(sparse.losses[10]));
  CHECK(sparse.losses.front() == full.losses.front());
  CHECK(sparse.final_loss() == full.final_loss());
}

TEST_CASE("train rejects inconsistent inputs") {
  TrainConfig c = small_config();
  c.eta_E = -1.0;
  CHECK_THROWS_AS(train(c, zipf_distribution(c.m, 1.0)), std::invalid_argument);
  c = small_config();
  CHECK_THROWS_AS(train(c, zipf_distribution(c.m + 1, 1.0)), std::invalid_argument);
}
