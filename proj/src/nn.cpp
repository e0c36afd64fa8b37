#include "socnav/nn.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

namespace socnav::nn {

namespace {

constexpr double log_two_pi = 1.8378770664093453;  // log(2*pi)

double softplus_raw(double x) {
  // log(1 + exp(x)) without the floor.
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  if (x < -30.0) return std::exp(x);  // log1p(e^x) ~ e^x
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double activate(Activation a, double z) {
  switch (a) {
    case Activation::ReLU:
      return z > 0.0 ? z : 0.0;
    case Activation::ELU:
      return z > 0.0 ? z : std::expm1(z);
    case Activation::Identity:
      return z;
  }
  return z;
}

double activate_deriv(Activation a, double z) {
  switch (a) {
    case Activation::ReLU:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::ELU:
      return z > 0.0 ? 1.0 : std::exp(z);
    case Activation::Identity:
      return 1.0;
  }
  return 1.0;
}

}  // namespace

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::ReLU:
      return "relu";
    case Activation::ELU:
      return "elu";
    case Activation::Identity:
      return "identity";
  }
  return "relu";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "elu") return Activation::ELU;
  if (name == "identity") return Activation::Identity;
  throw std::invalid_argument("unknown activation: " + name);
}

void MlpSpec::validate() const {
  if (layer_widths.size() < 2)
    throw std::invalid_argument("MlpSpec needs at least 2 layers");
  for (int w : layer_widths)
    if (w < 1) throw std::invalid_argument("MlpSpec widths must be >= 1");
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
  for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
  return n;
}

bool MlpParams::all_finite() const {
  for (const auto& w : weights)
    if (!w.allFinite()) return false;
  for (const auto& b : biases)
    if (!b.allFinite()) return false;
  return true;
}

MlpParams init_params(const MlpSpec& spec) {
  spec.validate();
  MlpParams p;
  p.spec = spec;
  Rng rng(spec.seed);
  for (int l = 0; l + 1 < static_cast<int>(spec.layer_widths.size()); ++l) {
    const int fan_in = spec.layer_widths[l];
    const int fan_out = spec.layer_widths[l + 1];
    const double bound = std::sqrt(1.0 / fan_in);
    Matrix w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = rng.uniform(-bound, bound);
    p.weights.push_back(std::move(w));
    p.biases.push_back(Vector::Zero(fan_out));
  }
  return p;
}

Matrix forward(const MlpParams& params, const Matrix& inputs) {
  if (inputs.rows() != params.spec.input_width())
    throw std::invalid_argument("forward: input width mismatch");
  const int depth = params.spec.depth();
  Matrix a = inputs;
  for (int l = 0; l < depth; ++l) {
    Matrix z = params.weights[l] * a;
    z.colwise() += params.biases[l];
    if (l + 1 < depth) {
      const Activation act = params.spec.activation;
      a = z.unaryExpr([act](double v) { return activate(act, v); });
    } else {
      a = std::move(z);  // linear output layer
    }
  }
  return a;
}

Vector forward(const MlpParams& params, const Vector& input) {
  return forward(params, Matrix(input)).col(0);
}

void GaussianPrediction::validate() const {
  if (mean.size() != scale.size())
    throw std::invalid_argument("GaussianPrediction: mean/scale length mismatch");
  if (!mean.allFinite() || !scale.allFinite())
    throw std::domain_error("GaussianPrediction: non-finite entries");
  if ((scale.array() <= 0.0).any())
    throw std::domain_error("GaussianPrediction: scale must be strictly positive");
}

double gaussian_nll(const GaussianPrediction& pred, const Vector& target) {
  pred.validate();
  if (target.size() != pred.mean.size())
    throw std::invalid_argument("gaussian_nll: target length mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < target.size(); ++i) {
    const double s = pred.scale[i];
    const double r = target[i] - pred.mean[i];
    total += 0.5 * (log_two_pi + 2.0 * std::log(s)) + r * r / (2.0 * s * s);
  }
  return total;
}

double softplus(double x) { return softplus_raw(x) + softplus_floor; }

Vector softplus(const Vector& x) {
  return x.unaryExpr([](double v) { return softplus(v); });
}

bool MlpGrads::all_finite() const {
  for (const auto& w : weights)
    if (!w.allFinite()) return false;
  for (const auto& b : biases)
    if (!b.allFinite()) return false;
  return true;
}

void MlpGrads::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

void MlpGrads::add_scaled(const MlpGrads& other, double factor) {
  for (std::size_t i = 0; i < weights.size(); ++i) weights[i] += factor * other.weights[i];
  for (std::size_t i = 0; i < biases.size(); ++i) biases[i] += factor * other.biases[i];
}

MlpGrads zero_grads(const MlpParams& params) {
  MlpGrads g;
  for (const auto& w : params.weights) g.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
  for (const auto& b : params.biases) g.biases.push_back(Vector::Zero(b.size()));
  return g;
}

// --- Tape -------------------------------------------------------------------

Tape::Ref Tape::push(Matrix value) {
  Node node;
  node.grad = Matrix::Zero(value.rows(), value.cols());
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return static_cast<Ref>(nodes_.size() - 1);
}

Tape::Ref Tape::constant(Matrix value) { return push(std::move(value)); }

Tape::Ref Tape::mlp(const MlpParams& params, Ref input, MlpGrads* grads) {
  const Matrix& x = nodes_[input].value;
  if (x.rows() != params.spec.input_width())
    throw std::invalid_argument("Tape::mlp: input width mismatch");
  const int depth = params.spec.depth();
  const Activation act = params.spec.activation;

  auto acts = std::make_shared<std::vector<Matrix>>();    // a_0 .. a_depth
  auto derivs = std::make_shared<std::vector<Matrix>>();  // act'(z_l), hidden only
  acts->push_back(x);
  Matrix a = x;
  for (int l = 0; l < depth; ++l) {
    Matrix z = params.weights[l] * a;
    z.colwise() += params.biases[l];
    if (l + 1 < depth) {
      derivs->push_back(z.unaryExpr([act](double v) { return activate_deriv(act, v); }));
      a = z.unaryExpr([act](double v) { return activate(act, v); });
    } else {
      a = std::move(z);
    }
    acts->push_back(a);
  }

  const Ref out = push(std::move(a));
  const MlpParams* pp = &params;
  nodes_[out].back = [this, out, input, grads, pp, acts, derivs, depth] {
    Matrix upstream = nodes_[out].grad;
    for (int l = depth - 1; l >= 0; --l) {
      Matrix dz;
      if (l == depth - 1)
        dz = std::move(upstream);
      else
        dz = (upstream.array() * (*derivs)[l].array()).matrix();
      if (grads != nullptr) {
        grads->weights[l].noalias() += dz * (*acts)[l].transpose();
        grads->biases[l] += dz.rowwise().sum();
      }
      upstream = pp->weights[l].transpose() * dz;
    }
    nodes_[input].grad += upstream;
  };
  return out;
}

Tape::Ref Tape::vcat(Ref top, Ref bottom) {
  const Matrix& a = nodes_[top].value;
  const Matrix& b = nodes_[bottom].value;
  if (a.cols() != b.cols()) throw std::invalid_argument("Tape::vcat: column mismatch");
  Matrix v(a.rows() + b.rows(), a.cols());
  v.topRows(a.rows()) = a;
  v.bottomRows(b.rows()) = b;
  const Eigen::Index top_rows = a.rows();  // before push: it may reallocate nodes_
  const Ref out = push(std::move(v));
  nodes_[out].back = [this, out, top, bottom, top_rows] {
    const Matrix& g = nodes_[out].grad;
    nodes_[top].grad += g.topRows(top_rows);
    nodes_[bottom].grad += g.bottomRows(g.rows() - top_rows);
  };
  return out;
}

Tape::Ref Tape::col_mean(Ref m) {
  const Matrix& x = nodes_[m].value;
  if (x.cols() == 0) throw std::invalid_argument("Tape::col_mean: empty matrix");
  const double inv = 1.0 / static_cast<double>(x.cols());
  const Ref out = push(x.rowwise().sum() * inv);
  nodes_[out].back = [this, out, m, inv] {
    const Matrix& g = nodes_[out].grad;
    nodes_[m].grad += (g * inv).replicate(1, nodes_[m].value.cols());
  };
  return out;
}

Tape::Ref Tape::rows(Ref m, int first, int count) {
  const Matrix& x = nodes_[m].value;
  if (first < 0 || count < 0 || first + count > x.rows())
    throw std::invalid_argument("Tape::rows: slice out of range");
  const Ref out = push(x.middleRows(first, count));
  nodes_[out].back = [this, out, m, first, count] {
    nodes_[m].grad.middleRows(first, count) += nodes_[out].grad;
  };
  return out;
}

Tape::Ref Tape::softplus(Ref m) {
  const Matrix& x = nodes_[m].value;
  const Ref out = push(x.unaryExpr([](double v) { return nn::softplus(v); }));
  nodes_[out].back = [this, out, m] {
    const Matrix& x_in = nodes_[m].value;
    nodes_[m].grad +=
        (nodes_[out].grad.array() * x_in.unaryExpr([](double v) { return sigmoid(v); }).array())
            .matrix();
  };
  return out;
}

Tape::Ref Tape::log_sigmoid(Ref m) {
  const Matrix& x = nodes_[m].value;
  const Ref out = push(x.unaryExpr([](double v) { return -softplus_raw(-v); }));
  nodes_[out].back = [this, out, m] {
    const Matrix& x_in = nodes_[m].value;
    nodes_[m].grad +=
        (nodes_[out].grad.array() * x_in.unaryExpr([](double v) { return sigmoid(-v); }).array())
            .matrix();
  };
  return out;
}

Tape::Ref Tape::add(Ref a, Ref b) {
  const Matrix& x = nodes_[a].value;
  const Matrix& y = nodes_[b].value;
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw std::invalid_argument("Tape::add: shape mismatch");
  const Ref out = push(x + y);
  nodes_[out].back = [this, out, a, b] {
    nodes_[a].grad += nodes_[out].grad;
    nodes_[b].grad += nodes_[out].grad;
  };
  return out;
}

Tape::Ref Tape::scaled(Ref a, double factor) {
  const Ref out = push(nodes_[a].value * factor);
  nodes_[out].back = [this, out, a, factor] { nodes_[a].grad += factor * nodes_[out].grad; };
  return out;
}

Tape::Ref Tape::sum_all(Ref m) {
  const Ref out = push(Matrix::Constant(1, 1, nodes_[m].value.sum()));
  nodes_[out].back = [this, out, m] {
    nodes_[m].grad.array() += nodes_[out].grad(0, 0);
  };
  return out;
}

Tape::Ref Tape::gaussian_nll(Ref mean, Ref scale, Matrix target) {
  const Matrix& mu = nodes_[mean].value;
  const Matrix& sg = nodes_[scale].value;
  if (mu.rows() != target.rows() || mu.cols() != target.cols() || sg.rows() != mu.rows() ||
      sg.cols() != mu.cols())
    throw std::invalid_argument("Tape::gaussian_nll: shape mismatch");
  if ((sg.array() <= 0.0).any())
    throw std::domain_error("Tape::gaussian_nll: scale must be strictly positive");
  const double inv_cols = 1.0 / static_cast<double>(mu.cols());
  double total = 0.0;
  for (Eigen::Index c = 0; c < mu.cols(); ++c)
    for (Eigen::Index r = 0; r < mu.rows(); ++r) {
      const double s = sg(r, c);
      const double d = target(r, c) - mu(r, c);
      total += 0.5 * (log_two_pi + 2.0 * std::log(s)) + d * d / (2.0 * s * s);
    }
  const Ref out = push(Matrix::Constant(1, 1, total * inv_cols));
  auto tgt = std::make_shared<Matrix>(std::move(target));
  nodes_[out].back = [this, out, mean, scale, tgt, inv_cols] {
    const double g = nodes_[out].grad(0, 0) * inv_cols;
    const Matrix& mu_v = nodes_[mean].value;
    const Matrix& sg_v = nodes_[scale].value;
    nodes_[mean].grad.array() +=
        g * (mu_v.array() - tgt->array()) / sg_v.array().square();
    nodes_[scale].grad.array() +=
        g * (1.0 / sg_v.array() -
             (tgt->array() - mu_v.array()).square() / sg_v.array().cube());
  };
  return out;
}

Tape::Ref Tape::mse(Ref pred, Matrix target) {
  const Matrix& p = nodes_[pred].value;
  if (p.rows() != target.rows() || p.cols() != target.cols())
    throw std::invalid_argument("Tape::mse: shape mismatch");
  const double inv_cols = 1.0 / static_cast<double>(p.cols());
  const double total = (p - target).squaredNorm() * inv_cols;
  const Ref out = push(Matrix::Constant(1, 1, total));
  auto tgt = std::make_shared<Matrix>(std::move(target));
  nodes_[out].back = [this, out, pred, tgt, inv_cols] {
    const double g = nodes_[out].grad(0, 0) * inv_cols;
    nodes_[pred].grad += 2.0 * g * (nodes_[pred].value - *tgt);
  };
  return out;
}

double Tape::scalar(Ref id) const {
  const Matrix& v = nodes_[id].value;
  if (v.rows() != 1 || v.cols() != 1) throw std::invalid_argument("Tape::scalar: not a scalar node");
  return v(0, 0);
}

void Tape::backward(Ref loss) {
  const Matrix& v = nodes_[loss].value;
  if (v.rows() != 1 || v.cols() != 1)
    throw std::invalid_argument("Tape::backward: loss must be scalar");
  nodes_[loss].grad(0, 0) = 1.0;
  for (Ref id = loss; id >= 0; --id)
    if (nodes_[id].back) nodes_[id].back();
}

MlpGrads grad(const MlpParams& params,
              const std::function<Tape::Ref(Tape&, const MlpParams&, MlpGrads&)>& loss_closure) {
  MlpGrads grads = zero_grads(params);
  Tape tape;
  const Tape::Ref loss = loss_closure(tape, params, grads);
  tape.backward(loss);
  return grads;
}

// --- optimizers ---------------------------------------------------------------

OptimizerState OptimizerState::adam(const MlpParams& params, double learning_rate) {
  OptimizerState s;
  s.kind = OptimizerKind::Adam;
  s.learning_rate = learning_rate;
  for (const auto& w : params.weights) {
    s.m_weights.push_back(Matrix::Zero(w.rows(), w.cols()));
    s.v_weights.push_back(Matrix::Zero(w.rows(), w.cols()));
  }
  for (const auto& b : params.biases) {
    s.m_biases.push_back(Vector::Zero(b.size()));
    s.v_biases.push_back(Vector::Zero(b.size()));
  }
  return s;
}

OptimizerState OptimizerState::sgd(double learning_rate) {
  OptimizerState s;
  s.kind = OptimizerKind::Sgd;
  s.learning_rate = learning_rate;
  return s;
}

namespace {

void check_grad_shapes(const MlpParams& params, const MlpGrads& grads) {
  if (grads.weights.size() != params.weights.size() ||
      grads.biases.size() != params.biases.size())
    throw std::invalid_argument("optimizer_step: gradient layer count mismatch");
  for (std::size_t i = 0; i < params.weights.size(); ++i)
    if (grads.weights[i].rows() != params.weights[i].rows() ||
        grads.weights[i].cols() != params.weights[i].cols())
      throw std::invalid_argument("optimizer_step: gradient shape mismatch");
  for (std::size_t i = 0; i < params.biases.size(); ++i)
    if (grads.biases[i].size() != params.biases[i].size())
      throw std::invalid_argument("optimizer_step: gradient shape mismatch");
}

template <typename T>
void adam_update(T& param, T& m, T& v, const T& g, const OptimizerState& s, double bc1,
                 double bc2) {
  m = s.beta1 * m + (1.0 - s.beta1) * g;
  v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseProduct(g);
  param.array() -=
      s.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + s.epsilon);
}

}  // namespace

void optimizer_step(OptimizerState& state, MlpParams& params, const MlpGrads& grads) {
  check_grad_shapes(params, grads);
  if (state.kind == OptimizerKind::Sgd) {
    ++state.step_count;
    for (std::size_t i = 0; i < params.weights.size(); ++i)
      params.weights[i] -= state.learning_rate * grads.weights[i];
    for (std::size_t i = 0; i < params.biases.size(); ++i)
      params.biases[i] -= state.learning_rate * grads.biases[i];
    return;
  }
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < params.weights.size(); ++i)
    adam_update(params.weights[i], state.m_weights[i], state.v_weights[i], grads.weights[i],
                state, bc1, bc2);
  for (std::size_t i = 0; i < params.biases.size(); ++i)
    adam_update(params.biases[i], state.m_biases[i], state.v_biases[i], grads.biases[i], state,
                bc1, bc2);
}

// --- feature scaling ------------------------------------------------------------

FeatureScaler FeatureScaler::identity(int dim) {
  return {Vector::Zero(dim), Vector::Ones(dim)};
}

FeatureScaler FeatureScaler::fit(const std::vector<const Matrix*>& sources) {
  if (sources.empty() || sources.front()->rows() == 0)
    throw std::invalid_argument("FeatureScaler::fit: no data");
  const Eigen::Index dim = sources.front()->rows();
  Eigen::Index count = 0;
  Vector sum = Vector::Zero(dim);
  for (const Matrix* m : sources) {
    if (m->rows() != dim) throw std::invalid_argument("FeatureScaler::fit: row mismatch");
    sum += m->rowwise().sum();
    count += m->cols();
  }
  if (count == 0) throw std::invalid_argument("FeatureScaler::fit: no columns");
  FeatureScaler s;
  s.shift = sum / static_cast<double>(count);
  Vector sq = Vector::Zero(dim);
  for (const Matrix* m : sources)
    sq += (m->colwise() - s.shift).array().square().matrix().rowwise().sum();
  s.scale = (sq / static_cast<double>(count)).array().sqrt().max(1.0).matrix();
  return s;
}

Vector FeatureScaler::transform(const Vector& v) const {
  return ((v - shift).array() / scale.array()).matrix();
}

Matrix FeatureScaler::transform(const Matrix& m) const {
  return ((m.colwise() - shift).array().colwise() / scale.array()).matrix();
}

Vector FeatureScaler::untransform(const Vector& v) const {
  return (v.array() * scale.array()).matrix() + shift;
}

Vector FeatureScaler::unscale(const Vector& v) const {
  return (v.array() * scale.array()).matrix();
}

double FeatureScaler::log_scale_sum() const {
  return scale.array().log().sum();
}

nlohmann::json to_json(const FeatureScaler& s) {
  return {{"shift", std::vector<double>(s.shift.data(), s.shift.data() + s.shift.size())},
          {"scale", std::vector<double>(s.scale.data(), s.scale.data() + s.scale.size())}};
}

FeatureScaler feature_scaler_from_json(const nlohmann::json& j) {
  const auto shift = j.at("shift").get<std::vector<double>>();
  const auto scale = j.at("scale").get<std::vector<double>>();
  FeatureScaler s;
  s.shift = Eigen::Map<const Vector>(shift.data(), static_cast<Eigen::Index>(shift.size()));
  s.scale = Eigen::Map<const Vector>(scale.data(), static_cast<Eigen::Index>(scale.size()));
  return s;
}

// --- checkpoint io ------------------------------------------------------------

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> flat(static_cast<std::size_t>(m.size()));
  Eigen::Map<Matrix>(flat.data(), m.rows(), m.cols()) = m;
  j["data"] = flat;
  return j;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto flat = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
    throw std::runtime_error("checkpoint: matrix size mismatch");
  Matrix m(rows, cols);
  Eigen::Map<Matrix>(m.data(), rows, cols) =
      Eigen::Map<const Matrix>(flat.data(), rows, cols);
  return m;
}

nlohmann::json vector_to_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vector vector_from_json(const nlohmann::json& j) {
  const auto flat = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

}  // namespace

nlohmann::json to_json(const MlpSpec& spec) {
  return {{"layer_widths", spec.layer_widths},
          {"activation", activation_name(spec.activation)},
          {"seed", spec.seed}};
}

MlpSpec mlp_spec_from_json(const nlohmann::json& j) {
  MlpSpec spec;
  spec.layer_widths = j.at("layer_widths").get<std::vector<int>>();
  spec.activation = activation_from_name(j.at("activation").get<std::string>());
  spec.seed = j.at("seed").get<std::uint64_t>();
  spec.validate();
  return spec;
}

nlohmann::json to_json(const MlpParams& params) {
  nlohmann::json j;
  j["spec"] = to_json(params.spec);
  j["weights"] = nlohmann::json::array();
  for (const auto& w : params.weights) j["weights"].push_back(matrix_to_json(w));
  j["biases"] = nlohmann::json::array();
  for (const auto& b : params.biases) j["biases"].push_back(vector_to_json(b));
  return j;
}

MlpParams mlp_params_from_json(const nlohmann::json& j) {
  MlpParams p;
  p.spec = mlp_spec_from_json(j.at("spec"));
  for (const auto& w : j.at("weights")) p.weights.push_back(matrix_from_json(w));
  for (const auto& b : j.at("biases")) p.biases.push_back(vector_from_json(b));
  if (static_cast<int>(p.weights.size()) != p.spec.depth())
    throw std::runtime_error("checkpoint: layer count mismatch");
  return p;
}

nlohmann::json to_json(const OptimizerState& state) {
  nlohmann::json j;
  j["kind"] = state.kind == OptimizerKind::Adam ? "adam" : "sgd";
  j["learning_rate"] = state.learning_rate;
  j["step_count"] = state.step_count;
  j["beta1"] = state.beta1;
  j["beta2"] = state.beta2;
  j["epsilon"] = state.epsilon;
  j["m_weights"] = nlohmann::json::array();
  for (const auto& m : state.m_weights) j["m_weights"].push_back(matrix_to_json(m));
  j["v_weights"] = nlohmann::json::array();
  for (const auto& m : state.v_weights) j["v_weights"].push_back(matrix_to_json(m));
  j["m_biases"] = nlohmann::json::array();
  for (const auto& b : state.m_biases) j["m_biases"].push_back(vector_to_json(b));
  j["v_biases"] = nlohmann::json::array();
  for (const auto& b : state.v_biases) j["v_biases"].push_back(vector_to_json(b));
  return j;
}

OptimizerState optimizer_state_from_json(const nlohmann::json& j) {
  OptimizerState s;
  s.kind = j.at("kind").get<std::string>() == "adam" ? OptimizerKind::Adam : OptimizerKind::Sgd;
  s.learning_rate = j.at("learning_rate").get<double>();
  s.step_count = j.at("step_count").get<long>();
  s.beta1 = j.at("beta1").get<double>();
  s.beta2 = j.at("beta2").get<double>();
  s.epsilon = j.at("epsilon").get<double>();
  for (const auto& m : j.at("m_weights")) s.m_weights.push_back(matrix_from_json(m));
  for (const auto& m : j.at("v_weights")) s.v_weights.push_back(matrix_from_json(m));
  for (const auto& b : j.at("m_biases")) s.m_biases.push_back(vector_from_json(b));
  for (const auto& b : j.at("v_biases")) s.v_biases.push_back(vector_from_json(b));
  return s;
}

void save_model_file(const std::string& path, const std::string& kind,
                     const nlohmann::json& payload) {
  nlohmann::json root;
  root["schema_version"] = 1;
  root["kind"] = kind;
  root["payload"] = payload;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << root.dump();
}

nlohmann::json load_model_file(const std::string& path, const std::string& expected_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  nlohmann::json root = nlohmann::json::parse(in);
  if (root.at("schema_version").get<int>() != 1)
    throw std::runtime_error("unsupported checkpoint schema version in " + path);
  if (root.at("kind").get<std::string>() != expected_kind)
    throw std::runtime_error("checkpoint kind mismatch in " + path + ": expected " +
                             expected_kind + ", found " + root.at("kind").get<std::string>());
  return root.at("payload");
}

}  // namespace socnav::nn
