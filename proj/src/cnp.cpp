#include "socnav/cnp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace socnav::cnp {

void CnpModel::validate() const {
  encoder.spec.validate();
  query.spec.validate();
  if (encoder.spec.input_width() != dims.input_dim + dims.task_dim + dims.output_dim)
    throw std::invalid_argument("CnpModel: encoder input width mismatch");
  if (encoder.spec.output_width() != dims.latent_dim)
    throw std::invalid_argument("CnpModel: encoder output width mismatch");
  if (query.spec.input_width() != dims.latent_dim + dims.input_dim + dims.task_dim)
    throw std::invalid_argument("CnpModel: query input width mismatch");
  if (query.spec.output_width() != 2 * dims.output_dim)
    throw std::invalid_argument("CnpModel: query output width mismatch");
  if (n_max < 0) throw std::invalid_argument("CnpModel: n_max must be >= 0");
}

CnpModel CnpModel::global_controller(std::uint64_t seed) {
  CnpModel m;
  m.role = CnpRole::Global;
  m.dims = {1, 2 + 2 * SceneConfig::k_max + 2, 2, 128};
  m.n_max = 10;
  const int enc_in = m.dims.input_dim + m.dims.task_dim + m.dims.output_dim;
  const int qry_in = m.dims.latent_dim + m.dims.input_dim + m.dims.task_dim;
  m.encoder = nn::init_params(
      {{enc_in, 256, 256, 256, m.dims.latent_dim}, nn::Activation::ReLU, splitmix64(seed)});
  m.query = nn::init_params({{qry_in, 256, 256, 256, 2 * m.dims.output_dim},
                             nn::Activation::ReLU,
                             splitmix64(seed ^ 0x517cc1b727220a95ull)});
  m.x_scaler = nn::FeatureScaler::identity(m.dims.input_dim);
  m.gamma_scaler = nn::FeatureScaler::identity(m.dims.task_dim);
  m.y_scaler = nn::FeatureScaler::identity(m.dims.output_dim);
  return m;
}

CnpModel CnpModel::local_controller(std::uint64_t seed) {
  CnpModel m;
  m.role = CnpRole::Local;
  m.dims = {2, 2, 2, 128};
  m.n_max = 20;
  const int enc_in = m.dims.input_dim + m.dims.task_dim + m.dims.output_dim;
  const int qry_in = m.dims.latent_dim + m.dims.input_dim + m.dims.task_dim;
  m.encoder = nn::init_params(
      {{enc_in, 256, 384, 512, m.dims.latent_dim}, nn::Activation::ReLU, splitmix64(seed)});
  m.query = nn::init_params({{qry_in, 512, 384, 256, 2 * m.dims.output_dim},
                             nn::Activation::ReLU,
                             splitmix64(seed ^ 0x2545f4914f6cdd1dull)});
  m.x_scaler = nn::FeatureScaler::identity(m.dims.input_dim);
  m.gamma_scaler = nn::FeatureScaler::identity(m.dims.task_dim);
  m.y_scaler = nn::FeatureScaler::identity(m.dims.output_dim);
  return m;
}

Vector encode(const CnpModel& model, std::span<const ObservationTuple> observations) {
  if (static_cast<int>(observations.size()) > model.n_max)
    throw std::invalid_argument("encode: more observations than n_max");
  if (observations.empty()) return Vector::Zero(model.dims.latent_dim);

  const int n = static_cast<int>(observations.size());
  Matrix inputs(model.encoder.spec.input_width(), n);
  for (int i = 0; i < n; ++i) {
    const auto& obs = observations[static_cast<std::size_t>(i)];
    if (obs.x.size() != model.dims.input_dim || obs.gamma.size() != model.dims.task_dim ||
        obs.y.size() != model.dims.output_dim)
      throw std::invalid_argument("encode: observation dimension mismatch");
    inputs.col(i) << model.x_scaler.transform(obs.x), model.gamma_scaler.transform(obs.gamma),
        model.y_scaler.transform(obs.y);
  }
  const Matrix latents = nn::forward(model.encoder, inputs);

  // sorted summation per dimension: permutation invariance holds bit-exactly
  Vector mean(model.dims.latent_dim);
  std::vector<double> row(static_cast<std::size_t>(n));
  for (int d = 0; d < model.dims.latent_dim; ++d) {
    for (int i = 0; i < n; ++i) row[static_cast<std::size_t>(i)] = latents(d, i);
    std::sort(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += v;
    mean[d] = sum / n;
  }
  return mean;
}

GaussianPrediction query(const CnpModel& model, const Vector& latent, const Vector& x,
                         const Vector& gamma) {
  if (latent.size() != model.dims.latent_dim || x.size() != model.dims.input_dim ||
      gamma.size() != model.dims.task_dim)
    throw std::invalid_argument("query: dimension mismatch");
  Vector input(model.query.spec.input_width());
  input << latent, model.x_scaler.transform(x), model.gamma_scaler.transform(gamma);
  const Vector out = nn::forward(model.query, input);
  GaussianPrediction pred;
  pred.mean = model.y_scaler.untransform(out.head(model.dims.output_dim));
  pred.scale = model.y_scaler.unscale(nn::softplus(out.tail(model.dims.output_dim)));
  return pred;
}

double TrainResult::mean_loss(std::size_t first, std::size_t count) const {
  double sum = 0.0;
  for (std::size_t i = first; i < first + count && i < losses.size(); ++i) sum += losses[i];
  return sum / static_cast<double>(count);
}

void TrainResult::save_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << "step,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < losses.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, losses[i]);
    out << buf;
  }
}

namespace {

void check_data_dims(const CnpDims& dims, const CnpTrainData& dataset) {
  if (dataset.trajectories.empty())
    throw std::invalid_argument("train: dataset must be non-empty");
  if (dataset.input_dim() != dims.input_dim || dataset.task_dim() != dims.task_dim ||
      dataset.output_dim() != dims.output_dim)
    throw std::invalid_argument("train: dataset dimensions do not match the model");
}

}  // namespace

namespace {

struct StandardizedData {
  std::vector<data::TupleTrajectory> trajectories;
};

StandardizedData standardize(const CnpTrainData& dataset, const nn::FeatureScaler& sx,
                             const nn::FeatureScaler& sg, const nn::FeatureScaler& sy) {
  StandardizedData out;
  out.trajectories.reserve(dataset.trajectories.size());
  for (const auto& traj : dataset.trajectories)
    out.trajectories.push_back(
        {sx.transform(traj.x), sg.transform(traj.gamma), sy.transform(traj.y)});
  return out;
}

void fit_scalers(const CnpTrainData& dataset, nn::FeatureScaler& sx, nn::FeatureScaler& sg,
                 nn::FeatureScaler& sy) {
  std::vector<const Matrix*> xs, gs, ys;
  for (const auto& traj : dataset.trajectories) {
    xs.push_back(&traj.x);
    gs.push_back(&traj.gamma);
    ys.push_back(&traj.y);
  }
  sx = nn::FeatureScaler::fit(xs);
  sg = nn::FeatureScaler::fit(gs);
  sy = nn::FeatureScaler::fit(ys);
}

}  // namespace

TrainResult train_cnp(CnpModel& model, const CnpTrainData& dataset, const CnpHyper& hyper) {
  model.validate();
  check_data_dims(model.dims, dataset);

  TrainResult result;
  if (hyper.steps <= 0) return result;

  fit_scalers(dataset, model.x_scaler, model.gamma_scaler, model.y_scaler);
  const StandardizedData std_data =
      standardize(dataset, model.x_scaler, model.gamma_scaler, model.y_scaler);
  // constant offset turning standardized-space NLL into raw-space NLL
  const double raw_offset = model.y_scaler.log_scale_sum();

  Rng rng(hyper.seed);
  auto enc_opt = nn::OptimizerState::adam(model.encoder, hyper.learning_rate);
  auto qry_opt = nn::OptimizerState::adam(model.query, hyper.learning_rate);
  nn::MlpGrads enc_grads = nn::zero_grads(model.encoder);
  nn::MlpGrads qry_grads = nn::zero_grads(model.query);

  result.losses.reserve(static_cast<std::size_t>(hyper.steps));

  for (int step = 0; step < hyper.steps; ++step) {
    const auto& traj =
        std_data.trajectories[static_cast<std::size_t>(rng.uniform_int(
            0, static_cast<int>(std_data.trajectories.size()) - 1))];
    const int m = traj.size();
    const int n = std::min(rng.uniform_int(0, model.n_max), m);
    const auto context_idx = sample_without_replacement(rng, m, n);
    const int query_idx = rng.uniform_int(0, m - 1);

    enc_grads.set_zero();
    qry_grads.set_zero();
    nn::Tape tape;

    nn::Tape::Ref latent;
    if (n > 0) {
      Matrix enc_in(model.encoder.spec.input_width(), n);
      for (int i = 0; i < n; ++i) {
        const int c = context_idx[static_cast<std::size_t>(i)];
        enc_in.col(i) << traj.x.col(c), traj.gamma.col(c), traj.y.col(c);
      }
      latent = tape.col_mean(tape.mlp(model.encoder, tape.constant(std::move(enc_in)), &enc_grads));
    } else {
      latent = tape.constant(Matrix::Zero(model.dims.latent_dim, 1));
    }

    Matrix query_tail(model.dims.input_dim + model.dims.task_dim, 1);
    query_tail.col(0) << traj.x.col(query_idx), traj.gamma.col(query_idx);
    const auto qry_in = tape.vcat(latent, tape.constant(std::move(query_tail)));
    const auto out = tape.mlp(model.query, qry_in, &qry_grads);
    const auto mean = tape.rows(out, 0, model.dims.output_dim);
    const auto scale = tape.softplus(tape.rows(out, model.dims.output_dim, model.dims.output_dim));
    const auto loss = tape.gaussian_nll(mean, scale, traj.y.col(query_idx));

    const double loss_value = tape.scalar(loss) + raw_offset;
    if (!std::isfinite(loss_value))
      throw nn::TrainingError(step, "train_cnp: non-finite loss at step " + std::to_string(step));
    result.losses.push_back(loss_value);

    tape.backward(loss);
    nn::optimizer_step(enc_opt, model.encoder, enc_grads);
    nn::optimizer_step(qry_opt, model.query, qry_grads);
  }
  return result;
}

GeneratedTrajectory generate_global_trajectory(const CnpModel& model, const SceneConfig& config,
                                               int T) {
  model.validate();
  if (model.role != CnpRole::Global)
    throw std::invalid_argument("generate_global_trajectory: needs a Global model");
  if (T < 2) throw std::invalid_argument("generate_global_trajectory: T must be >= 2");

  const Vector gamma = config.flatten();
  std::vector<ObservationTuple> anchors(2);
  anchors[0] = {Vector::Constant(1, 0.0), gamma,
                (Vector(2) << config.start.x, config.start.y).finished()};
  anchors[1] = {Vector::Constant(1, 1.0), gamma,
                (Vector(2) << config.goal.x, config.goal.y).finished()};
  const Vector latent = encode(model, anchors);

  GeneratedTrajectory traj;
  traj.points.reserve(static_cast<std::size_t>(T));
  traj.scales.reserve(static_cast<std::size_t>(T));
  for (int j = 0; j < T; ++j) {
    const double t = static_cast<double>(j) / (T - 1);
    const auto pred = query(model, latent, Vector::Constant(1, t), gamma);
    traj.points.push_back({pred.mean[0], pred.mean[1]});
    traj.scales.push_back({pred.scale[0], pred.scale[1]});
  }
  return traj;
}

Vec2 local_command(const CnpModel& model, Vec2 d_goal, Vec2 d_ped,
                   std::span<const ObservationTuple> context, double v_max, bool* fault) {
  if (model.role != CnpRole::Local)
    throw std::invalid_argument("local_command: needs a Local model");
  const Vector latent = encode(model, context);
  Vector x(2), gamma(2);
  x << d_goal.x, d_goal.y;
  gamma << d_ped.x, d_ped.y;
  const auto pred = query(model, latent, x, gamma);
  const Vec2 v{pred.mean[0], pred.mean[1]};
  if (!v.finite()) {
    if (fault != nullptr) *fault = true;
    return {0.0, 0.0};
  }
  return clamp_norm(v, v_max);
}

// --- FFNN baseline ------------------------------------------------------------

FfnnModel FfnnModel::global_baseline(std::uint64_t seed) {
  FfnnModel m;
  m.dims = {1, 2 + 2 * SceneConfig::k_max + 2, 2, 0};
  m.net = nn::init_params({{m.dims.input_dim + m.dims.task_dim, 256, 512, 1024, m.dims.output_dim},
                           nn::Activation::ReLU,
                           splitmix64(seed ^ 0x9e3779b97f4a7c15ull)});
  m.x_scaler = nn::FeatureScaler::identity(m.dims.input_dim);
  m.gamma_scaler = nn::FeatureScaler::identity(m.dims.task_dim);
  m.y_scaler = nn::FeatureScaler::identity(m.dims.output_dim);
  return m;
}

void FfnnModel::validate() const {
  net.spec.validate();
  if (net.spec.input_width() != dims.input_dim + dims.task_dim)
    throw std::invalid_argument("FfnnModel: input width mismatch");
  if (net.spec.output_width() != dims.output_dim)
    throw std::invalid_argument("FfnnModel: output width mismatch");
}

TrainResult train_ffnn(FfnnModel& model, const CnpTrainData& dataset, const FfnnHyper& hyper) {
  model.validate();
  check_data_dims(model.dims, dataset);

  TrainResult result;
  if (hyper.steps <= 0) return result;

  fit_scalers(dataset, model.x_scaler, model.gamma_scaler, model.y_scaler);
  const StandardizedData std_data =
      standardize(dataset, model.x_scaler, model.gamma_scaler, model.y_scaler);

  Rng rng(hyper.seed);
  auto opt = nn::OptimizerState::sgd(hyper.learning_rate);
  nn::MlpGrads grads = nn::zero_grads(model.net);

  result.losses.reserve(static_cast<std::size_t>(hyper.steps));
  for (int step = 0; step < hyper.steps; ++step) {
    const auto& traj =
        std_data.trajectories[static_cast<std::size_t>(rng.uniform_int(
            0, static_cast<int>(std_data.trajectories.size()) - 1))];
    const int idx = rng.uniform_int(0, traj.size() - 1);
    Matrix input(model.net.spec.input_width(), 1);
    input.col(0) << traj.x.col(idx), traj.gamma.col(idx);

    grads.set_zero();
    nn::Tape tape;
    const auto loss = tape.mse(tape.mlp(model.net, tape.constant(std::move(input)), &grads),
                               traj.y.col(idx));
    const double loss_value = tape.scalar(loss);
    if (!std::isfinite(loss_value))
      throw nn::TrainingError(step, "train_ffnn: non-finite loss at step " + std::to_string(step));
    result.losses.push_back(loss_value);
    tape.backward(loss);
    nn::optimizer_step(opt, model.net, grads);
  }
  return result;
}

Vector ffnn_predict(const FfnnModel& model, const Vector& x, const Vector& gamma) {
  if (x.size() != model.dims.input_dim || gamma.size() != model.dims.task_dim)
    throw std::invalid_argument("ffnn_predict: dimension mismatch");
  Vector input(model.net.spec.input_width());
  input << model.x_scaler.transform(x), model.gamma_scaler.transform(gamma);
  return model.y_scaler.untransform(nn::forward(model.net, input));
}

GeneratedTrajectory generate_ffnn_trajectory(const FfnnModel& model, const SceneConfig& config,
                                             int T) {
  if (T < 2) throw std::invalid_argument("generate_ffnn_trajectory: T must be >= 2");
  const Vector gamma = config.flatten();
  GeneratedTrajectory traj;
  traj.points.reserve(static_cast<std::size_t>(T));
  for (int j = 0; j < T; ++j) {
    const double t = static_cast<double>(j) / (T - 1);
    const Vector out = ffnn_predict(model, Vector::Constant(1, t), gamma);
    traj.points.push_back({out[0], out[1]});
  }
  return traj;
}

// --- checkpoints ----------------------------------------------------------------

void save_cnp(const std::string& path, const CnpModel& model) {
  nlohmann::json payload;
  payload["role"] = model.role == CnpRole::Global ? "global" : "local";
  payload["dims"] = {{"input_dim", model.dims.input_dim},
                     {"task_dim", model.dims.task_dim},
                     {"output_dim", model.dims.output_dim},
                     {"latent_dim", model.dims.latent_dim}};
  payload["n_max"] = model.n_max;
  payload["encoder"] = nn::to_json(model.encoder);
  payload["query"] = nn::to_json(model.query);
  payload["x_scaler"] = nn::to_json(model.x_scaler);
  payload["gamma_scaler"] = nn::to_json(model.gamma_scaler);
  payload["y_scaler"] = nn::to_json(model.y_scaler);
  nn::save_model_file(path, "cnp", payload);
}

CnpModel load_cnp(const std::string& path) {
  const auto payload = nn::load_model_file(path, "cnp");
  CnpModel m;
  m.role = payload.at("role").get<std::string>() == "global" ? CnpRole::Global : CnpRole::Local;
  const auto& d = payload.at("dims");
  m.dims = {d.at("input_dim").get<int>(), d.at("task_dim").get<int>(),
            d.at("output_dim").get<int>(), d.at("latent_dim").get<int>()};
  m.n_max = payload.at("n_max").get<int>();
  m.encoder = nn::mlp_params_from_json(payload.at("encoder"));
  m.query = nn::mlp_params_from_json(payload.at("query"));
  m.x_scaler = nn::feature_scaler_from_json(payload.at("x_scaler"));
  m.gamma_scaler = nn::feature_scaler_from_json(payload.at("gamma_scaler"));
  m.y_scaler = nn::feature_scaler_from_json(payload.at("y_scaler"));
  m.validate();
  return m;
}

void save_ffnn(const std::string& path, const FfnnModel& model) {
  nlohmann::json payload;
  payload["dims"] = {{"input_dim", model.dims.input_dim},
                     {"task_dim", model.dims.task_dim},
                     {"output_dim", model.dims.output_dim}};
  payload["net"] = nn::to_json(model.net);
  payload["x_scaler"] = nn::to_json(model.x_scaler);
  payload["gamma_scaler"] = nn::to_json(model.gamma_scaler);
  payload["y_scaler"] = nn::to_json(model.y_scaler);
  nn::save_model_file(path, "ffnn", payload);
}

FfnnModel load_ffnn(const std::string& path) {
  const auto payload = nn::load_model_file(path, "ffnn");
  FfnnModel m;
  const auto& d = payload.at("dims");
  m.dims = {d.at("input_dim").get<int>(), d.at("task_dim").get<int>(),
            d.at("output_dim").get<int>(), 0};
  m.net = nn::mlp_params_from_json(payload.at("net"));
  m.x_scaler = nn::feature_scaler_from_json(payload.at("x_scaler"));
  m.gamma_scaler = nn::feature_scaler_from_json(payload.at("gamma_scaler"));
  m.y_scaler = nn::feature_scaler_from_json(payload.at("y_scaler"));
  m.validate();
  return m;
}

}  // namespace socnav::cnp
