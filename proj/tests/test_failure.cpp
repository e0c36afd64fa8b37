#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "socnav/failure.hpp"

using namespace socnav;
using fpm::GanModel;
using fpm::GanTrainer;
using fpm::RndModel;
using nn::Matrix;
using nn::Vector;

namespace {

/// In-distribution pool: d_goal anywhere in the workspace offsets, d_ped
/// within a few meters or the sentinel.
Matrix demo_like_states(int count, std::uint64_t seed) {
  Rng rng(seed);
  Matrix states(4, count);
  for (int i = 0; i < count; ++i) {
    states(0, i) = rng.uniform(-8.0, 8.0);
    states(1, i) = rng.uniform(-8.0, 8.0);
    if (rng.bernoulli(0.15)) {
      states(2, i) = 100.0;
      states(3, i) = 100.0;
    } else {
      states(2, i) = rng.uniform(-5.0, 5.0);
      states(3, i) = rng.uniform(-5.0, 5.0);
    }
  }
  return states;
}

}  // namespace

TEST_CASE("monitored_state is the (d_goal || d_ped) concatenation") {
  const Vector v = fpm::monitored_state({1, 0}, {0, 2});
  REQUIRE(v.size() == 4);
  CHECK(v[0] == 1.0);
  CHECK(v[1] == 0.0);
  CHECK(v[2] == 0.0);
  CHECK(v[3] == 2.0);

  const Vector s = fpm::monitored_state({1.5, -2.0}, {100.0, 100.0});
  CHECK(s[2] == 100.0);
  CHECK(s[3] == 100.0);

  // serialization round-trip keeps the exact bits
  nlohmann::json j = std::vector<double>(s.data(), s.data() + s.size());
  const auto text = j.dump();
  const auto back = nlohmann::json::parse(text).get<std::vector<double>>();
  for (int i = 0; i < 4; ++i) CHECK(back[static_cast<std::size_t>(i)] == s[i]);
}

TEST_CASE("untrained discriminator is uncalibrated but centered across seeds") {
  Rng rng(31);
  const Matrix probe = demo_like_states(20, 5);
  for (int input = 0; input < 20; ++input) {
    double mean_prob = 0.0;
    const int seeds = 12;
    for (int s = 0; s < seeds; ++s) {
      auto model = GanModel::make(4, 1000 + static_cast<std::uint64_t>(s));
      // scaler as fitted during training
      std::vector<const Matrix*> sources{&probe};
      model.state_scaler = nn::FeatureScaler::fit(sources);
      mean_prob += 1.0 - fpm::novelty_score(model, probe.col(input));
    }
    mean_prob /= seeds;
    CHECK(mean_prob > 0.3);
    CHECK(mean_prob < 0.7);
  }
}

TEST_CASE("gan learns to separate a tight cluster from a distant point") {
  Rng rng(7);
  Matrix cluster(4, 400);
  for (int i = 0; i < 400; ++i) {
    cluster(0, i) = 2.0 + 0.3 * rng.normal();
    cluster(1, i) = -1.0 + 0.3 * rng.normal();
    cluster(2, i) = 0.5 + 0.2 * rng.normal();
    cluster(3, i) = 1.5 + 0.2 * rng.normal();
  }
  auto trainer = GanTrainer::make(4, 11);
  const auto history = fpm::gan_train(trainer, cluster, 5000, 16, 13);
  for (const auto& h : history) {
    CHECK(std::isfinite(h.d_loss));
    CHECK(std::isfinite(h.g_loss));
  }

  Vector center(4), far(4);
  center << 2.0, -1.0, 0.5, 1.5;
  far << 52.0, -51.0, 50.5, 51.5;
  // higher novelty (lower D probability) far away from the data
  CHECK(fpm::novelty_score(trainer.model, far) > fpm::novelty_score(trainer.model, center));
}

TEST_CASE("gan_train_step rejects malformed batches") {
  auto trainer = GanTrainer::make(4, 3);
  const Matrix bad = Matrix::Zero(3, 8);
  CHECK_THROWS_AS(fpm::gan_train_step(trainer, bad, 1), std::invalid_argument);
}

TEST_CASE("rnd target network stays frozen through training") {
  auto model = RndModel::make(4, 21, 16);
  std::vector<Matrix> target_before = model.target.weights;

  const Matrix states = demo_like_states(500, 9);
  fpm::RndHyper hyper;
  hyper.steps = 300;
  hyper.seed = 2;
  fpm::rnd_train(model, states, hyper);

  for (std::size_t l = 0; l < target_before.size(); ++l)
    CHECK(std::memcmp(target_before[l].data(), model.target.weights[l].data(),
                      sizeof(double) * target_before[l].size()) == 0);
}

TEST_CASE("rnd with predictor = target scores zero") {
  auto model = RndModel::make(4, 23, 16);
  model.predictor = model.target;  // test-only construction
  const Vector state = fpm::monitored_state({1, 2}, {3, 4});
  CHECK(fpm::novelty_score(model, state) == 0.0);
}

TEST_CASE("rnd training drives in-distribution scores down") {
  auto model = RndModel::make(4, 25, 32);
  const Matrix train_states = demo_like_states(2000, 17);
  const Matrix held_out = demo_like_states(200, 18);

  // scores at init, with the scaler the trained model will use
  {
    std::vector<const Matrix*> sources{&train_states};
    model.state_scaler = nn::FeatureScaler::fit(sources);
  }
  double initial = 0.0;
  for (int i = 0; i < held_out.cols(); ++i)
    initial += fpm::novelty_score(model, held_out.col(i));

  fpm::RndHyper hyper;
  hyper.steps = 3000;
  hyper.learning_rate = 1e-3;
  hyper.seed = 3;
  fpm::rnd_train(model, train_states, hyper);

  double trained = 0.0;
  for (int i = 0; i < held_out.cols(); ++i)
    trained += fpm::novelty_score(model, held_out.col(i));
  CHECK(trained < 0.1 * initial);
}

TEST_CASE("rnd separates a synthetic out-of-distribution split") {
  auto model = RndModel::make(4, 27, 32);
  const Matrix train_states = demo_like_states(2000, 19);
  fpm::RndHyper hyper;
  hyper.steps = 3000;
  hyper.learning_rate = 1e-3;
  hyper.seed = 5;
  fpm::rnd_train(model, train_states, hyper);

  Rng rng(29);
  double in_mean = 0.0, out_mean = 0.0;
  const int n = 200;
  const Matrix in_states = demo_like_states(n, 23);
  for (int i = 0; i < n; ++i) {
    in_mean += fpm::novelty_score(model, in_states.col(i));
    // pedestrian offsets far outside the training box
    Vector ood(4);
    ood << rng.uniform(-8.0, 8.0), rng.uniform(-8.0, 8.0),
        (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(20.0, 40.0),
        (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(20.0, 40.0);
    out_mean += fpm::novelty_score(model, ood);
  }
  CHECK(in_mean / n < out_mean / n);
}

TEST_CASE("novelty scores are nonnegative and deterministic") {
  auto gan = GanModel::make(4, 33);
  auto rnd = RndModel::make(4, 35, 16);
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const Vector s = fpm::monitored_state({rng.uniform(-9.0, 9.0), rng.uniform(-9.0, 9.0)},
                                          {rng.uniform(-9.0, 9.0), rng.uniform(-9.0, 9.0)});
    const double g = fpm::novelty_score(gan, s);
    const double r = fpm::novelty_score(rnd, s);
    CHECK(g >= 0.0);
    CHECK(g <= 1.0);
    CHECK(r >= 0.0);
    CHECK(g == fpm::novelty_score(gan, s));
    CHECK(r == fpm::novelty_score(rnd, s));
  }
}

TEST_CASE("calibrate_threshold") {
  SUBCASE("constant scores give the constant") {
    std::vector<double> scores(150, 3.25);
    CHECK(fpm::calibrate_threshold(scores, 99.0) == 3.25);
  }
  SUBCASE("1..100 at p=99 interpolates to 99.01") {
    std::vector<double> scores;
    for (int i = 1; i <= 100; ++i) scores.push_back(i);
    // closed-form percentile oracle: rank = 0.99 * 99 = 98.01,
    // s[98] + 0.01 * (s[99] - s[98]) = 99 + 0.01
    CHECK(fpm::calibrate_threshold(scores, 99.0) == doctest::Approx(99.01).epsilon(1e-12));
  }
  SUBCASE("monotone in the percentile") {
    Rng rng(6);
    std::vector<double> scores;
    for (int i = 0; i < 400; ++i) scores.push_back(rng.normal());
    double prev = -1e9;
    for (double p : {50.0, 75.0, 90.0, 95.0, 99.0, 100.0}) {
      const double t = fpm::calibrate_threshold(scores, p);
      CHECK(t >= prev);
      prev = t;
    }
  }
  SUBCASE("too few scores is an error") {
    std::vector<double> scores(99, 1.0);
    CHECK_THROWS_AS(fpm::calibrate_threshold(scores, 99.0), std::invalid_argument);
  }
}

TEST_CASE("failure monitor verdict matches the score/threshold rule") {
  auto rnd = RndModel::make(4, 41, 16);
  const fpm::FailureMonitor monitor(rnd, 0.5);
  Rng rng(8);
  for (int i = 0; i < 40; ++i) {
    const Vector s = fpm::monitored_state({rng.uniform(-9.0, 9.0), rng.uniform(-9.0, 9.0)},
                                          {rng.uniform(-9.0, 9.0), rng.uniform(-9.0, 9.0)});
    const auto v = monitor.judge(s);
    CHECK(v.threshold == 0.5);
    CHECK(v.is_ood == (v.score > 0.5));
  }
}

TEST_CASE("calibration report shape") {
  std::vector<double> scores;
  Rng rng(10);
  for (int i = 0; i < 500; ++i) scores.push_back(std::abs(rng.normal()));
  const double threshold = fpm::calibrate_threshold(scores, 99.0);
  const auto report = fpm::calibration_report(scores, 99.0, threshold);
  CHECK(report.at("percentile").get<double>() == 99.0);
  CHECK(report.at("threshold").get<double>() == threshold);
  int total = 0;
  for (const auto& c : report.at("histogram").at("counts")) total += c.get<int>();
  CHECK(total == 500);
}

TEST_CASE("gan score is invariant under re-serialization") {
  const auto dir = std::filesystem::temp_directory_path() / "socnav_fpm_ckpt";
  std::filesystem::create_directories(dir);

  Rng rng(12);
  auto trainer = GanTrainer::make(4, 43);
  const Matrix states = demo_like_states(300, 21);
  fpm::gan_train(trainer, states, 200, 16, 7);

  const auto gan_path = (dir / "gan.json").string();
  fpm::save_gan(gan_path, trainer.model);
  const auto loaded = fpm::load_gan(gan_path);
  for (int i = 0; i < 25; ++i) {
    const Vector s = fpm::monitored_state({rng.uniform(-9.0, 9.0), rng.uniform(-9.0, 9.0)},
                                          {rng.uniform(-9.0, 9.0), rng.uniform(-9.0, 9.0)});
    CHECK(fpm::novelty_score(trainer.model, s) == fpm::novelty_score(loaded, s));
  }

  auto rnd = RndModel::make(4, 45, 16);
  const auto rnd_path = (dir / "rnd.json").string();
  fpm::save_rnd(rnd_path, rnd);
  const auto rnd_loaded = fpm::load_rnd(rnd_path);
  const Vector s = fpm::monitored_state({1, 2}, {3, 4});
  CHECK(fpm::novelty_score(rnd, s) == fpm::novelty_score(rnd_loaded, s));

  std::filesystem::remove_all(dir);
}
