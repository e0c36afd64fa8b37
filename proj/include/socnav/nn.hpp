#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "socnav/rng.hpp"

namespace socnav::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { ReLU, ELU, Identity };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

/// Dense network shape: layer widths from input to output, the hidden
/// activation, and the seed that fixes the initial weights.
struct MlpSpec {
  std::vector<int> layer_widths;
  Activation activation = Activation::ReLU;
  std::uint64_t seed = 0;

  int input_width() const { return layer_widths.front(); }
  int output_width() const { return layer_widths.back(); }
  /// Number of weight layers (= layer_widths.size() - 1).
  int depth() const { return static_cast<int>(layer_widths.size()) - 1; }
  void validate() const;
};

struct MlpParams {
  MlpSpec spec;
  std::vector<Matrix> weights;  // weights[l]: layer_widths[l+1] x layer_widths[l]
  std::vector<Vector> biases;

  std::size_t parameter_count() const;
  bool all_finite() const;
};

/// Zero-mean uniform fan-in initialization, bound = sqrt(1/fan_in),
/// biases zero. Deterministic in spec.seed.
MlpParams init_params(const MlpSpec& spec);

Vector forward(const MlpParams& params, const Vector& input);
/// Columnwise batch forward.
Matrix forward(const MlpParams& params, const Matrix& inputs);

/// Diagonal Gaussian over a small vector: mean plus strictly positive scale.
struct GaussianPrediction {
  Vector mean;
  Vector scale;
  void validate() const;
};

/// Sum_i [ 0.5*log(2*pi*scale_i^2) + (target_i - mean_i)^2 / (2*scale_i^2) ].
double gaussian_nll(const GaussianPrediction& pred, const Vector& target);

inline constexpr double softplus_floor = 1e-6;

/// log(1 + exp(x)) + softplus_floor, numerically stable for |x| up to 1e6.
double softplus(double x);
Vector softplus(const Vector& x);

struct MlpGrads {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  bool all_finite() const;
  void set_zero();
  void add_scaled(const MlpGrads& other, double factor);
};

MlpGrads zero_grads(const MlpParams& params);

/// Reverse-mode tape over matrix-valued nodes (columns act as a batch).
/// The op set is closed: dense forward passes, concatenation, column mean,
/// row slices, softplus, log-sigmoid, and the scalar losses the system
/// needs. Parameters referenced by mlp() must outlive the tape.
class Tape {
 public:
  using Ref = int;

  Ref constant(Matrix value);
  /// Forward pass through params; if grads is non-null the backward pass
  /// accumulates parameter gradients there. Input gradients always flow.
  Ref mlp(const MlpParams& params, Ref input, MlpGrads* grads = nullptr);
  Ref vcat(Ref top, Ref bottom);
  Ref col_mean(Ref m);
  Ref rows(Ref m, int first, int count);
  Ref softplus(Ref m);
  Ref log_sigmoid(Ref m);
  Ref add(Ref a, Ref b);
  Ref scaled(Ref a, double factor);
  Ref sum_all(Ref m);
  /// Mean over columns of the per-column NLL sums; scalar node.
  Ref gaussian_nll(Ref mean, Ref scale, Matrix target);
  /// Mean over columns of squared-error column sums; scalar node.
  Ref mse(Ref pred, Matrix target);

  const Matrix& value(Ref id) const { return nodes_[id].value; }
  double scalar(Ref id) const;
  const Matrix& gradient(Ref id) const { return nodes_[id].grad; }

  /// Seeds the scalar loss node with 1 and runs the reverse sweep.
  void backward(Ref loss);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void()> back;
  };
  std::vector<Node> nodes_;

  Ref push(Matrix value);
};

/// Exact reverse-mode gradients of a scalar loss built on a Tape from the
/// supported ops. Non-finite intermediates propagate into the gradients.
MlpGrads grad(const MlpParams& params,
              const std::function<Tape::Ref(Tape&, const MlpParams&, MlpGrads&)>& loss_closure);

enum class OptimizerKind { Adam, Sgd };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-4;
  long step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<Matrix> m_weights, v_weights;
  std::vector<Vector> m_biases, v_biases;

  static OptimizerState adam(const MlpParams& params, double learning_rate);
  static OptimizerState sgd(double learning_rate);
};

void optimizer_step(OptimizerState& state, MlpParams& params, const MlpGrads& grads);

struct TrainingError : std::runtime_error {
  int step;
  TrainingError(int step_index, const std::string& message)
      : std::runtime_error(message), step(step_index) {}
};

/// Per-dimension affine feature map (v - shift) / scale fitted on training
/// data. The scale is floored at 1 so constant or tiny-range dimensions are
/// centered but never blown up.
struct FeatureScaler {
  Vector shift;
  Vector scale;

  static FeatureScaler identity(int dim);
  static FeatureScaler fit(const std::vector<const Matrix*>& sources);

  Vector transform(const Vector& v) const;
  Matrix transform(const Matrix& m) const;
  Vector untransform(const Vector& v) const;
  /// Maps a standardized stddev back to raw units (no shift).
  Vector unscale(const Vector& v) const;
  /// log|det| correction: sum of log(scale), turning standardized-space
  /// NLL into raw-space NLL.
  double log_scale_sum() const;
};

nlohmann::json to_json(const FeatureScaler& s);
FeatureScaler feature_scaler_from_json(const nlohmann::json& j);

// --- checkpoint container -------------------------------------------------
//
// Versioned JSON files: {"schema_version": 1, "kind": <tag>, "payload": ...}.
// Doubles survive the round trip bit-exactly (shortest-round-trip encoding).

nlohmann::json to_json(const MlpSpec& spec);
MlpSpec mlp_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MlpParams& params);
MlpParams mlp_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const OptimizerState& state);
OptimizerState optimizer_state_from_json(const nlohmann::json& j);

void save_model_file(const std::string& path, const std::string& kind,
                     const nlohmann::json& payload);
nlohmann::json load_model_file(const std::string& path, const std::string& expected_kind);

}  // namespace socnav::nn
