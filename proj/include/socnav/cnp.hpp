#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "socnav/dataset.hpp"
#include "socnav/nn.hpp"

namespace socnav::cnp {

using data::CnpTrainData;
using data::ObservationTuple;
using data::SceneConfig;
using nn::GaussianPrediction;
using nn::Matrix;
using nn::Vector;

struct CnpDims {
  int input_dim = 0;
  int task_dim = 0;
  int output_dim = 0;
  int latent_dim = 0;
};

enum class CnpRole { Global, Local };

/// Conditional Neural Process: encoder over (x, gamma, y) tuples whose
/// latents are averaged, and a query net mapping (latent, x, gamma) to a
/// Gaussian over y (mean and scale logits).
struct CnpModel {
  CnpRole role = CnpRole::Global;
  CnpDims dims{};
  int n_max = 10;
  nn::MlpParams encoder;
  nn::MlpParams query;
  // input/target standardization fitted at train time; identity until then
  nn::FeatureScaler x_scaler;
  nn::FeatureScaler gamma_scaler;
  nn::FeatureScaler y_scaler;

  void validate() const;

  /// Trajectory generator over normalized time conditioned on the scene
  /// configuration: x = t_norm (1), gamma = flattened config (10),
  /// y = position (2). Encoder 3x256 -> 128, query 3x256, n_max 10.
  static CnpModel global_controller(std::uint64_t seed);

  /// Velocity controller: x = d_goal (2), gamma = d_ped (2), y = v (2).
  /// Encoder 256/384/512 -> 128, query 512/384/256, n_max 20.
  static CnpModel local_controller(std::uint64_t seed);
};

/// Mean of the per-tuple encoder outputs; the empty set is the zero latent
/// (the trained prior). Summation is sorted per dimension so permutations
/// of the set give bit-identical results.
Vector encode(const CnpModel& model, std::span<const ObservationTuple> observations);

GaussianPrediction query(const CnpModel& model, const Vector& latent, const Vector& x,
                         const Vector& gamma);

struct CnpHyper {
  int steps = 10000;
  double learning_rate = 1e-4;  // Adam
  std::uint64_t seed = 0;
};

struct TrainResult {
  std::vector<double> losses;  // one NLL per step

  double mean_loss(std::size_t first, std::size_t count) const;
  void save_csv(const std::string& path) const;
};

/// One step = one trajectory, n ~ U{0..n_max} context tuples sampled
/// without replacement, one query point, Adam on the Gaussian NLL.
/// Throws TrainingError on a non-finite loss.
TrainResult train_cnp(CnpModel& model, const CnpTrainData& dataset, const CnpHyper& hyper);

struct GeneratedTrajectory {
  std::vector<Vec2> points;
  std::vector<Vec2> scales;
};

/// Conditions on the two anchor observations (t=0 -> start, t=1 -> goal)
/// and queries T uniform normalized-time points with the shared latent.
GeneratedTrajectory generate_global_trajectory(const CnpModel& model, const SceneConfig& config,
                                               int T);

/// Predicted mean velocity clamped to v_max; empty context means the zero
/// latent. A non-finite prediction falls back to a zero command and sets
/// *fault when provided.
Vec2 local_command(const CnpModel& model, Vec2 d_goal, Vec2 d_ped,
                   std::span<const ObservationTuple> context = {}, double v_max = 2.5,
                   bool* fault = nullptr);

// --- FFNN baseline ------------------------------------------------------------

/// Plain feed-forward regressor (x, gamma) -> y used as the comparison
/// baseline for the global controller. Hidden 256/512/1024, ReLU.
struct FfnnModel {
  CnpDims dims{};  // latent_dim unused
  nn::MlpParams net;
  nn::FeatureScaler x_scaler;
  nn::FeatureScaler gamma_scaler;
  nn::FeatureScaler y_scaler;

  static FfnnModel global_baseline(std::uint64_t seed);
  void validate() const;
};

struct FfnnHyper {
  int steps = 10000;
  double learning_rate = 1e-3;  // plain SGD
  std::uint64_t seed = 0;
};

TrainResult train_ffnn(FfnnModel& model, const CnpTrainData& dataset, const FfnnHyper& hyper);

Vector ffnn_predict(const FfnnModel& model, const Vector& x, const Vector& gamma);

GeneratedTrajectory generate_ffnn_trajectory(const FfnnModel& model, const SceneConfig& config,
                                             int T);

// --- checkpoints ----------------------------------------------------------------

void save_cnp(const std::string& path, const CnpModel& model);
CnpModel load_cnp(const std::string& path);
void save_ffnn(const std::string& path, const FfnnModel& model);
FfnnModel load_ffnn(const std::string& path);

}  // namespace socnav::cnp
