#include "socnav/failure.hpp"

#include <algorithm>
#include <cmath>

namespace socnav::fpm {

Vector monitored_state(Vec2 d_goal, Vec2 d_ped) {
  if (!d_goal.finite() || !d_ped.finite())
    throw std::invalid_argument("monitored_state: non-finite input");
  Vector v(4);
  v << d_goal.x, d_goal.y, d_ped.x, d_ped.y;
  return v;
}

Matrix monitored_state_matrix(std::span<const LocalSample> samples) {
  Matrix m(4, static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i)
    m.col(static_cast<Eigen::Index>(i)) =
        monitored_state(samples[i].d_goal, samples[i].d_ped);
  return m;
}

Matrix monitored_state_matrix(const data::CnpTrainData& local_tuples) {
  Eigen::Index total = 0;
  for (const auto& traj : local_tuples.trajectories) total += traj.x.cols();
  Matrix m(4, total);
  Eigen::Index at = 0;
  for (const auto& traj : local_tuples.trajectories) {
    m.block(0, at, 2, traj.x.cols()) = traj.x;
    m.block(2, at, 2, traj.gamma.cols()) = traj.gamma;
    at += traj.x.cols();
  }
  return m;
}

// --- GAN ------------------------------------------------------------------------

GanModel GanModel::make(int state_dim, std::uint64_t seed) {
  GanModel m;
  m.state_dim = state_dim;
  m.noise_dim = 64;
  m.generator = nn::init_params(
      {{m.noise_dim, 128, 128, state_dim}, nn::Activation::ReLU, splitmix64(seed)});
  m.discriminator = nn::init_params(
      {{state_dim, 128, 128, 1}, nn::Activation::ReLU, splitmix64(seed ^ 0xd1b54a32d192ed03ull)});
  m.state_scaler = nn::FeatureScaler::identity(state_dim);
  return m;
}

void GanModel::validate() const {
  if (generator.spec.output_width() != state_dim)
    throw std::invalid_argument("GanModel: generator output width mismatch");
  if (discriminator.spec.input_width() != state_dim)
    throw std::invalid_argument("GanModel: discriminator input width mismatch");
  if (discriminator.spec.output_width() != 1)
    throw std::invalid_argument("GanModel: discriminator must output one logit");
  if (generator.spec.input_width() != noise_dim)
    throw std::invalid_argument("GanModel: generator input width mismatch");
}

GanTrainer GanTrainer::make(int state_dim, std::uint64_t seed, double learning_rate) {
  GanTrainer t;
  t.model = GanModel::make(state_dim, seed);
  t.gen_opt = nn::OptimizerState::adam(t.model.generator, learning_rate);
  t.disc_opt = nn::OptimizerState::adam(t.model.discriminator, learning_rate);
  return t;
}

namespace {

Matrix gaussian_noise(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix z(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) z(r, c) = rng.normal();
  return z;
}

}  // namespace

GanStepStats gan_train_step(GanTrainer& trainer, const Matrix& real_batch,
                            std::uint64_t noise_seed) {
  GanModel& model = trainer.model;
  model.validate();
  if (real_batch.rows() != model.state_dim)
    throw std::invalid_argument("gan_train_step: batch row mismatch");
  const Eigen::Index batch = real_batch.cols();
  if (batch == 0) throw std::invalid_argument("gan_train_step: empty batch");

  const Matrix real_std = model.state_scaler.transform(real_batch);
  const double inv_batch = 1.0 / static_cast<double>(batch);
  GanStepStats stats;

  // discriminator step: minimize -[log D(real) + log(1 - D(G(z)))]
  {
    const Matrix fake =
        nn::forward(model.generator, gaussian_noise(model.noise_dim, batch, noise_seed));
    nn::MlpGrads d_grads = nn::zero_grads(model.discriminator);
    nn::Tape tape;
    const auto real_logit = tape.mlp(model.discriminator, tape.constant(real_std), &d_grads);
    const auto fake_logit = tape.mlp(model.discriminator, tape.constant(fake), &d_grads);
    // log(1 - sigmoid(l)) == log_sigmoid(-l)
    const auto loss = tape.add(
        tape.scaled(tape.sum_all(tape.log_sigmoid(real_logit)), -inv_batch),
        tape.scaled(tape.sum_all(tape.log_sigmoid(tape.scaled(fake_logit, -1.0))), -inv_batch));
    stats.d_loss = tape.scalar(loss);
    if (!std::isfinite(stats.d_loss))
      throw nn::TrainingError(static_cast<int>(trainer.step_index),
                              "gan_train_step: non-finite discriminator loss");
    tape.backward(loss);
    nn::optimizer_step(trainer.disc_opt, model.discriminator, d_grads);
  }

  // generator step, non-saturating: minimize -log D(G(z))
  {
    nn::MlpGrads g_grads = nn::zero_grads(model.generator);
    nn::Tape tape;
    const auto fake = tape.mlp(
        model.generator,
        tape.constant(gaussian_noise(model.noise_dim, batch, splitmix64(noise_seed))), &g_grads);
    const auto fake_logit = tape.mlp(model.discriminator, fake, nullptr);
    const auto loss = tape.scaled(tape.sum_all(tape.log_sigmoid(fake_logit)), -inv_batch);
    stats.g_loss = tape.scalar(loss);
    if (!std::isfinite(stats.g_loss))
      throw nn::TrainingError(static_cast<int>(trainer.step_index),
                              "gan_train_step: non-finite generator loss");
    tape.backward(loss);
    nn::optimizer_step(trainer.gen_opt, model.generator, g_grads);
  }

  ++trainer.step_index;
  return stats;
}

std::vector<GanStepStats> gan_train(GanTrainer& trainer, const Matrix& states, int steps,
                                    int batch_size, std::uint64_t seed) {
  if (states.cols() < batch_size)
    throw std::invalid_argument("gan_train: fewer states than one batch");
  std::vector<const Matrix*> sources{&states};
  trainer.model.state_scaler = nn::FeatureScaler::fit(sources);

  Rng rng(seed);
  std::vector<GanStepStats> history;
  history.reserve(static_cast<std::size_t>(steps));
  Matrix batch(states.rows(), batch_size);
  for (int step = 0; step < steps; ++step) {
    for (int i = 0; i < batch_size; ++i)
      batch.col(i) = states.col(rng.uniform_int(0, static_cast<int>(states.cols()) - 1));
    history.push_back(gan_train_step(trainer, batch, rng.raw()));
  }
  return history;
}

// --- RND ------------------------------------------------------------------------

RndModel RndModel::make(int state_dim, std::uint64_t seed, int output_dim) {
  RndModel m;
  m.state_dim = state_dim;
  m.output_dim = output_dim;
  m.target = nn::init_params(
      {{state_dim, 512, 512, 512, output_dim}, nn::Activation::ELU, splitmix64(seed)});
  m.predictor = nn::init_params({{state_dim, 512, 512, 512, output_dim},
                                 nn::Activation::ELU,
                                 splitmix64(seed ^ 0x94d049bb133111ebull)});
  m.state_scaler = nn::FeatureScaler::identity(state_dim);
  return m;
}

void RndModel::validate() const {
  if (target.spec.input_width() != state_dim || predictor.spec.input_width() != state_dim)
    throw std::invalid_argument("RndModel: input width mismatch");
  if (target.spec.output_width() != predictor.spec.output_width())
    throw std::invalid_argument("RndModel: target/predictor output widths differ");
}

std::vector<double> rnd_train(RndModel& model, const Matrix& states, const RndHyper& hyper) {
  model.validate();
  if (states.rows() != model.state_dim)
    throw std::invalid_argument("rnd_train: state row mismatch");
  if (states.cols() < hyper.batch_size)
    throw std::invalid_argument("rnd_train: fewer states than one batch");

  std::vector<const Matrix*> sources{&states};
  model.state_scaler = nn::FeatureScaler::fit(sources);
  const Matrix states_std = model.state_scaler.transform(states);

  Rng rng(hyper.seed);
  auto opt = nn::OptimizerState::adam(model.predictor, hyper.learning_rate);
  nn::MlpGrads grads = nn::zero_grads(model.predictor);

  std::vector<double> losses;
  losses.reserve(static_cast<std::size_t>(hyper.steps));
  Matrix batch(model.state_dim, hyper.batch_size);
  for (int step = 0; step < hyper.steps; ++step) {
    for (int i = 0; i < hyper.batch_size; ++i)
      batch.col(i) = states_std.col(rng.uniform_int(0, static_cast<int>(states_std.cols()) - 1));
    const Matrix target_out = nn::forward(model.target, batch);

    grads.set_zero();
    nn::Tape tape;
    const auto loss =
        tape.mse(tape.mlp(model.predictor, tape.constant(batch), &grads), target_out);
    const double loss_value = tape.scalar(loss);
    if (!std::isfinite(loss_value))
      throw nn::TrainingError(step, "rnd_train: non-finite loss at step " + std::to_string(step));
    losses.push_back(loss_value);
    tape.backward(loss);
    nn::optimizer_step(opt, model.predictor, grads);
  }
  return losses;
}

double novelty_score(const RndModel& model, const Vector& state) {
  const Vector s = model.state_scaler.transform(state);
  return (nn::forward(model.target, s) - nn::forward(model.predictor, s)).squaredNorm();
}

double novelty_score(const GanModel& model, const Vector& state) {
  const Vector s = model.state_scaler.transform(state);
  const double logit = nn::forward(model.discriminator, s)[0];
  const double prob =
      logit >= 0.0 ? 1.0 / (1.0 + std::exp(-logit)) : std::exp(logit) / (1.0 + std::exp(logit));
  return 1.0 - prob;
}

// --- thresholding ------------------------------------------------------------------

double calibrate_threshold(std::vector<double> scores, double percentile) {
  if (scores.size() < 100)
    throw std::invalid_argument("calibrate_threshold: need at least 100 scores");
  if (percentile < 0.0 || percentile > 100.0)
    throw std::invalid_argument("calibrate_threshold: percentile out of range");
  std::sort(scores.begin(), scores.end());
  const double rank = percentile / 100.0 * static_cast<double>(scores.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, scores.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return scores[lo] + frac * (scores[hi] - scores[lo]);
}

FailureMonitor::FailureMonitor(RndModel model, double threshold)
    : kind_(Kind::Rnd), rnd_(std::move(model)), threshold_(threshold) {}

FailureMonitor::FailureMonitor(GanModel model, double threshold)
    : kind_(Kind::Gan), gan_(std::move(model)), threshold_(threshold) {}

OodVerdict FailureMonitor::judge(const Vector& state) const {
  OodVerdict verdict;
  verdict.threshold = threshold_;
  verdict.score = kind_ == Kind::Rnd ? novelty_score(*rnd_, state) : novelty_score(*gan_, state);
  verdict.is_ood = verdict.score > threshold_;
  return verdict;
}

nlohmann::json calibration_report(const std::vector<double>& scores, double percentile,
                                  double threshold, int histogram_bins) {
  nlohmann::json report;
  report["schema_version"] = 1;
  report["percentile"] = percentile;
  report["threshold"] = threshold;
  report["count"] = scores.size();
  const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const double width = (hi - lo) / histogram_bins;
  std::vector<int> counts(static_cast<std::size_t>(histogram_bins), 0);
  for (double s : scores) {
    int bin = width > 0.0 ? static_cast<int>((s - lo) / width) : 0;
    bin = std::clamp(bin, 0, histogram_bins - 1);
    ++counts[static_cast<std::size_t>(bin)];
  }
  report["histogram"] = {{"min", lo}, {"max", hi}, {"counts", counts}};
  return report;
}

// --- checkpoints ----------------------------------------------------------------

void save_gan(const std::string& path, const GanModel& model) {
  nlohmann::json payload;
  payload["state_dim"] = model.state_dim;
  payload["noise_dim"] = model.noise_dim;
  payload["generator"] = nn::to_json(model.generator);
  payload["discriminator"] = nn::to_json(model.discriminator);
  payload["state_scaler"] = nn::to_json(model.state_scaler);
  nn::save_model_file(path, "gan", payload);
}

GanModel load_gan(const std::string& path) {
  const auto payload = nn::load_model_file(path, "gan");
  GanModel m;
  m.state_dim = payload.at("state_dim").get<int>();
  m.noise_dim = payload.at("noise_dim").get<int>();
  m.generator = nn::mlp_params_from_json(payload.at("generator"));
  m.discriminator = nn::mlp_params_from_json(payload.at("discriminator"));
  m.state_scaler = nn::feature_scaler_from_json(payload.at("state_scaler"));
  m.validate();
  return m;
}

void save_rnd(const std::string& path, const RndModel& model) {
  nlohmann::json payload;
  payload["state_dim"] = model.state_dim;
  payload["output_dim"] = model.output_dim;
  payload["target"] = nn::to_json(model.target);
  payload["predictor"] = nn::to_json(model.predictor);
  payload["state_scaler"] = nn::to_json(model.state_scaler);
  nn::save_model_file(path, "rnd", payload);
}

RndModel load_rnd(const std::string& path) {
  const auto payload = nn::load_model_file(path, "rnd");
  RndModel m;
  m.state_dim = payload.at("state_dim").get<int>();
  m.output_dim = payload.at("output_dim").get<int>();
  m.target = nn::mlp_params_from_json(payload.at("target"));
  m.predictor = nn::mlp_params_from_json(payload.at("predictor"));
  m.state_scaler = nn::feature_scaler_from_json(payload.at("state_scaler"));
  m.validate();
  return m;
}

}  // namespace socnav::fpm
