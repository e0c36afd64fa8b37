#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "socnav/nn.hpp"
#include "support.hpp"

using namespace socnav;
using nn::Matrix;
using nn::Vector;

namespace {

bool params_bit_equal(const nn::MlpParams& a, const nn::MlpParams& b) {
  if (a.weights.size() != b.weights.size()) return false;
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    if (a.weights[l].size() != b.weights[l].size()) return false;
    if (std::memcmp(a.weights[l].data(), b.weights[l].data(),
                    sizeof(double) * a.weights[l].size()) != 0)
      return false;
    if (std::memcmp(a.biases[l].data(), b.biases[l].data(),
                    sizeof(double) * a.biases[l].size()) != 0)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("init_params is deterministic in the seed") {
  nn::MlpSpec spec{{2, 3}, nn::Activation::ReLU, 7};
  const auto a = nn::init_params(spec);
  const auto b = nn::init_params(spec);
  CHECK(params_bit_equal(a, b));

  nn::MlpSpec other = spec;
  other.seed = 8;
  CHECK_FALSE(params_bit_equal(a, nn::init_params(other)));
}

TEST_CASE("init_params zeroes all biases") {
  const auto p = nn::init_params({{2, 3}, nn::Activation::ReLU, 7});
  for (const auto& b : p.biases) CHECK(b.isZero(0.0));
}

TEST_CASE("init_params respects the fan-in bound per layer") {
  const auto p = nn::init_params({{4, 8, 2}, nn::Activation::ReLU, 11});
  CHECK(p.weights[0].array().abs().maxCoeff() <= std::sqrt(1.0 / 4.0));
  CHECK(p.weights[1].array().abs().maxCoeff() <= std::sqrt(1.0 / 8.0));
  //.. and actually explores a good part of the range
  CHECK(p.weights[0].array().abs().maxCoeff() > 0.5 * std::sqrt(1.0 / 4.0));
}

TEST_CASE("init_params rejects invalid widths") {
  CHECK_THROWS_AS(nn::init_params({{3}, nn::Activation::ReLU, 0}), std::invalid_argument);
  CHECK_THROWS_AS(nn::init_params({{3, 0, 2}, nn::Activation::ReLU, 0}), std::invalid_argument);
}

TEST_CASE("forward of an all-zero net is the zero map") {
  auto p = nn::init_params({{3, 4, 2}, nn::Activation::ReLU, 1});
  for (auto& w : p.weights) w.setZero();
  const Vector in = Vector::Constant(3, 1.7);
  const Vector out = nn::forward(p, in);
  CHECK(out.isZero(0.0));
}

TEST_CASE("forward of an identity single-layer net returns its input") {
  auto p = nn::init_params({{2, 2}, nn::Activation::ReLU, 1});
  p.weights[0] = Matrix::Identity(2, 2);
  Vector in(2);
  in << 1.5, -2.0;
  const Vector out = nn::forward(p, in);
  CHECK(out[0] == doctest::Approx(1.5));
  CHECK(out[1] == doctest::Approx(-2.0));
}

TEST_CASE("forward matches a naive matrix-multiply oracle") {
  const auto p = nn::init_params({{3, 4, 2}, nn::Activation::ReLU, 42});
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Vector in(3);
    for (int i = 0; i < 3; ++i) in[i] = rng.uniform(-2.0, 2.0);

    // independent oracle: explicit loops
    std::vector<double> hidden(4, 0.0);
    for (int r = 0; r < 4; ++r) {
      double z = p.biases[0][r];
      for (int c = 0; c < 3; ++c) z += p.weights[0](r, c) * in[c];
      hidden[r] = z > 0.0 ? z : 0.0;
    }
    std::vector<double> expected(2, 0.0);
    for (int r = 0; r < 2; ++r) {
      double z = p.biases[1][r];
      for (int c = 0; c < 4; ++c) z += p.weights[1](r, c) * hidden[c];
      expected[r] = z;
    }

    const Vector out = nn::forward(p, in);
    CHECK(std::abs(out[0] - expected[0]) < 1e-12);
    CHECK(std::abs(out[1] - expected[1]) < 1e-12);
  }
}

TEST_CASE("forward rejects a length mismatch") {
  const auto p = nn::init_params({{3, 2}, nn::Activation::ReLU, 0});
  const Vector bad = Vector::Zero(4);
  CHECK_THROWS_AS(nn::forward(p, bad), std::invalid_argument);
}

TEST_CASE("gaussian_nll analytic values") {
  Vector target(2);
  target << 0.3, -0.4;

  SUBCASE("mean = target, unit scale -> log(2*pi)") {
    const double nll = nn::gaussian_nll({target, Vector::Ones(2)}, target);
    CHECK(nll == doctest::Approx(std::log(2.0 * std::numbers::pi)).epsilon(1e-12));
  }
  SUBCASE("mean = target, scale sigma -> log(2*pi*sigma^2)") {
    const double sigma = 1.7;
    const double nll = nn::gaussian_nll({target, Vector::Constant(2, sigma)}, target);
    CHECK(nll ==
          doctest::Approx(std::log(2.0 * std::numbers::pi * sigma * sigma)).epsilon(1e-12));
  }
  SUBCASE("matches a direct density-formula oracle") {
    Vector mean(2), scale(2), t(2);
    mean << 0.0, 0.0;
    scale << 1.0, 2.0;
    t << 1.0, 1.0;
    // oracle: -log prod_i N(t_i | mean_i, scale_i^2), evaluated directly
    double density_log = 0.0;
    for (int i = 0; i < 2; ++i) {
      const double z = (t[i] - mean[i]) / scale[i];
      density_log +=
          -0.5 * z * z - std::log(scale[i] * std::sqrt(2.0 * std::numbers::pi));
    }
    const double nll = nn::gaussian_nll({mean, scale}, t);
    CHECK(std::abs(nll - (-density_log)) < 1e-10);
  }
  SUBCASE("nonpositive scale is a domain error") {
    Vector bad(2);
    bad << 1.0, 0.0;
    CHECK_THROWS_AS(nn::gaussian_nll({target, bad}, target), std::domain_error);
  }
}

TEST_CASE("gaussian_nll is minimized over the mean at the target") {
  Rng rng(99);
  Vector target(3), scale(3);
  for (int i = 0; i < 3; ++i) {
    target[i] = rng.normal();
    scale[i] = 0.5 + rng.uniform();
  }
  const double at_target = nn::gaussian_nll({target, scale}, target);
  for (int trial = 0; trial < 50; ++trial) {
    Vector perturbed = target;
    perturbed[rng.uniform_int(0, 2)] += rng.uniform(-1.0, 1.0) * 0.1 + 0.01;
    CHECK(nn::gaussian_nll({perturbed, scale}, target) > at_target);
  }
}

TEST_CASE("softplus values and floor") {
  CHECK(nn::softplus(0.0) == doctest::Approx(std::log(2.0) + 1e-6).epsilon(1e-12));
  CHECK(nn::softplus(-50.0) >= 1e-6);
  // direct formula evaluation oracle
  CHECK(nn::softplus(10.0) == doctest::Approx(std::log1p(std::exp(-10.0)) + 10.0 + 1e-6));
  CHECK(nn::softplus(10.0) == doctest::Approx(10.0000454).epsilon(1e-6));
}

TEST_CASE("softplus is strictly positive and monotone over a huge range") {
  double prev = nn::softplus(-1e6);
  CHECK(prev > 0.0);
  for (double x : {-1e5, -100.0, -30.0, -1.0, 0.0, 1.0, 30.0, 100.0, 1e5, 1e6}) {
    const double v = nn::softplus(x);
    CHECK(v > 0.0);
    CHECK(v >= prev);
    CHECK(std::isfinite(v));
    prev = v;
  }
}

TEST_CASE("grad of a constant loss is zero") {
  const auto p = nn::init_params({{2, 5, 2}, nn::Activation::ReLU, 3});
  const auto g = nn::grad(p, [](nn::Tape& tape, const nn::MlpParams&, nn::MlpGrads&) {
    return tape.constant(Matrix::Constant(1, 1, 4.2));
  });
  for (const auto& w : g.weights) CHECK(w.isZero(0.0));
  for (const auto& b : g.biases) CHECK(b.isZero(0.0));
}

TEST_CASE("grad of a scalar linear net is the input") {
  auto p = nn::init_params({{1, 1}, nn::Activation::Identity, 0});
  p.weights[0](0, 0) = 0.37;
  Matrix input = Matrix::Constant(1, 1, 3.0);
  const auto g = nn::grad(p, [&](nn::Tape& tape, const nn::MlpParams& params, nn::MlpGrads& gr) {
    return tape.sum_all(tape.mlp(params, tape.constant(input), &gr));
  });
  CHECK(g.weights[0](0, 0) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(g.biases[0][0] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("reverse-mode gradients match central finite differences") {
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 25; ++trial) {
    auto c = testsupport::make_random_loss_case(rng);
    const auto analytic = nn::grad(c.params, c.loss);
    const auto fd = testsupport::finite_difference_grads(c.params, c.loss);
    worst = std::max(worst, testsupport::max_relative_error(analytic, fd));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("two-network composition gradients match finite differences") {
  // CNP-style: mean of encoder outputs feeds a query net; both nets tracked.
  Rng rng(77);
  nn::MlpParams enc = nn::init_params({{3, 8, 4}, nn::Activation::ELU, rng.raw()});
  nn::MlpParams qry = nn::init_params({{6, 8, 4}, nn::Activation::ELU, rng.raw()});
  Matrix obs(3, 5);
  for (Eigen::Index i = 0; i < obs.size(); ++i) obs.data()[i] = rng.normal();
  Matrix extra(2, 1);
  extra << 0.3, -1.1;
  Matrix target(2, 1);
  target << 0.5, 0.25;

  auto build = [&](nn::Tape& tape, nn::MlpGrads* ge, nn::MlpGrads* gq) {
    const auto latent = tape.col_mean(tape.mlp(enc, tape.constant(obs), ge));
    const auto joined = tape.vcat(latent, tape.constant(extra));
    const auto out = tape.mlp(qry, joined, gq);
    const auto mean = tape.rows(out, 0, 2);
    const auto scale = tape.softplus(tape.rows(out, 2, 2));
    return tape.gaussian_nll(mean, scale, target);
  };

  nn::MlpGrads ge = nn::zero_grads(enc), gq = nn::zero_grads(qry);
  {
    nn::Tape tape;
    tape.backward(build(tape, &ge, &gq));
  }

  auto eval = [&] {
    nn::Tape tape;
    return tape.scalar(build(tape, nullptr, nullptr));
  };
  auto fd_check = [&](nn::MlpParams& net, const nn::MlpGrads& analytic) {
    const double eps = 1e-5;
    double worst = 0.0;
    for (std::size_t l = 0; l < net.weights.size(); ++l)
      for (Eigen::Index i = 0; i < net.weights[l].size(); i += 3) {
        double* entry = net.weights[l].data() + i;
        const double saved = *entry;
        *entry = saved + eps;
        const double up = eval();
        *entry = saved - eps;
        const double down = eval();
        *entry = saved;
        worst = std::max(
            worst, testsupport::relative_error(analytic.weights[l].data()[i],
                                               (up - down) / (2.0 * eps)));
      }
    return worst;
  };
  CHECK(fd_check(enc, ge) < 1e-4);
  CHECK(fd_check(qry, gq) < 1e-4);
}

TEST_CASE("optimizer_step leaves params unchanged on zero gradient") {
  auto p = nn::init_params({{2, 3}, nn::Activation::ReLU, 5});
  const auto before = p;
  auto g = nn::zero_grads(p);

  auto adam = nn::OptimizerState::adam(p, 1e-3);
  nn::optimizer_step(adam, p, g);
  CHECK(params_bit_equal(p, before));

  auto sgd = nn::OptimizerState::sgd(0.1);
  nn::optimizer_step(sgd, p, g);
  CHECK(params_bit_equal(p, before));
}

TEST_CASE("first Adam step moves each param by -lr*sign(g)") {
  auto p = nn::init_params({{2, 3}, nn::Activation::ReLU, 5});
  const auto before = p;
  auto g = nn::zero_grads(p);
  Rng rng(8);
  for (auto& w : g.weights)
    for (Eigen::Index i = 0; i < w.size(); ++i)
      w.data()[i] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.05, 2.0);
  for (auto& b : g.biases)
    for (Eigen::Index i = 0; i < b.size(); ++i)
      b.data()[i] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.05, 2.0);

  const double lr = 1e-4;
  auto adam = nn::OptimizerState::adam(p, lr);
  nn::optimizer_step(adam, p, g);
  for (std::size_t l = 0; l < p.weights.size(); ++l)
    for (Eigen::Index i = 0; i < p.weights[l].size(); ++i) {
      const double moved = p.weights[l].data()[i] - before.weights[l].data()[i];
      const double expect = -lr * (g.weights[l].data()[i] > 0 ? 1.0 : -1.0);
      CHECK(std::abs(moved - expect) < 1e-9);
    }
}

TEST_CASE("plain SGD step") {
  auto p = nn::init_params({{1, 1}, nn::Activation::Identity, 0});
  p.weights[0](0, 0) = 1.0;
  auto g = nn::zero_grads(p);
  g.weights[0](0, 0) = 2.0;
  auto sgd = nn::OptimizerState::sgd(0.1);
  nn::optimizer_step(sgd, p, g);
  CHECK(p.weights[0](0, 0) == doctest::Approx(0.8).epsilon(1e-14));
}

TEST_CASE("optimizer_step rejects shape mismatches") {
  auto p = nn::init_params({{2, 3}, nn::Activation::ReLU, 5});
  auto other = nn::init_params({{2, 4}, nn::Activation::ReLU, 5});
  auto g = nn::zero_grads(other);
  auto adam = nn::OptimizerState::adam(p, 1e-3);
  CHECK_THROWS_AS(nn::optimizer_step(adam, p, g), std::invalid_argument);
}

TEST_CASE("identical seeds give bit-identical training runs") {
  auto run = [] {
    auto p = nn::init_params({{2, 8, 1}, nn::Activation::ELU, 31});
    auto opt = nn::OptimizerState::adam(p, 1e-3);
    Rng rng(17);
    std::vector<double> losses;
    for (int step = 0; step < 50; ++step) {
      Matrix input(2, 1), target(1, 1);
      input << rng.normal(), rng.normal();
      target << std::sin(input(0, 0)) * input(1, 0);
      nn::MlpGrads g = nn::zero_grads(p);
      nn::Tape tape;
      const auto loss =
          tape.mse(tape.mlp(p, tape.constant(input), &g), target);
      tape.backward(loss);
      losses.push_back(tape.scalar(loss));
      nn::optimizer_step(opt, p, g);
    }
    return losses;
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("short Adam training actually reduces the loss") {
  auto p = nn::init_params({{1, 16, 1}, nn::Activation::ELU, 3});
  auto opt = nn::OptimizerState::adam(p, 1e-2);
  Rng rng(4);
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 400; ++step) {
    Matrix input = Matrix::Constant(1, 1, rng.uniform(-2.0, 2.0));
    Matrix target = Matrix::Constant(1, 1, std::tanh(2.0 * input(0, 0)));
    nn::MlpGrads g = nn::zero_grads(p);
    nn::Tape tape;
    const auto loss = tape.mse(tape.mlp(p, tape.constant(input), &g), target);
    tape.backward(loss);
    if (step < 50) first += tape.scalar(loss);
    if (step >= 350) last += tape.scalar(loss);
    nn::optimizer_step(opt, p, g);
  }
  CHECK(last < first);
}

TEST_CASE("checkpoint round-trips params and optimizer state bit-exactly") {
  auto p = nn::init_params({{3, 7, 2}, nn::Activation::ELU, 123});
  auto opt = nn::OptimizerState::adam(p, 1e-4);
  // run a couple of steps so the moments are non-trivial
  for (int step = 0; step < 3; ++step) {
    nn::MlpGrads g = nn::zero_grads(p);
    nn::Tape tape;
    const auto loss = tape.mse(tape.mlp(p, tape.constant(Matrix::Random(3, 2)), &g),
                               Matrix::Random(2, 2));
    tape.backward(loss);
    nn::optimizer_step(opt, p, g);
  }

  const auto dir = std::filesystem::temp_directory_path() / "socnav_nn_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "mlp.json").string();
  nlohmann::json payload;
  payload["params"] = nn::to_json(p);
  payload["optimizer"] = nn::to_json(opt);
  nn::save_model_file(path, "mlp-test", payload);

  const auto loaded = nn::load_model_file(path, "mlp-test");
  const auto p2 = nn::mlp_params_from_json(loaded.at("params"));
  const auto opt2 = nn::optimizer_state_from_json(loaded.at("optimizer"));
  CHECK(params_bit_equal(p, p2));
  CHECK(opt2.step_count == opt.step_count);
  for (std::size_t l = 0; l < opt.m_weights.size(); ++l) {
    CHECK(opt.m_weights[l] == opt2.m_weights[l]);
    CHECK(opt.v_weights[l] == opt2.v_weights[l]);
  }
  CHECK_THROWS(nn::load_model_file(path, "other-kind"));
  std::filesystem::remove_all(dir);
}
