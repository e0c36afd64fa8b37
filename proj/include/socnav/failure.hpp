#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "socnav/dataset.hpp"
#include "socnav/nn.hpp"

namespace socnav::fpm {

using data::LocalSample;
using nn::Matrix;
using nn::Vector;

/// The monitored state is the local controller's input: (d_goal || d_ped).
Vector monitored_state(Vec2 d_goal, Vec2 d_ped);

/// Column per sample, 4 rows.
Matrix monitored_state_matrix(std::span<const LocalSample> samples);
Matrix monitored_state_matrix(const data::CnpTrainData& local_tuples);

// --- GAN ------------------------------------------------------------------------

/// Vanilla GAN over monitored states. Generator 64-dim Gaussian noise
/// through two 128 hidden layers; discriminator mirrors it down to one
/// logit.
struct GanModel {
  int state_dim = 4;
  int noise_dim = 64;
  nn::MlpParams generator;
  nn::MlpParams discriminator;
  nn::FeatureScaler state_scaler;

  static GanModel make(int state_dim, std::uint64_t seed);
  void validate() const;
};

struct GanTrainer {
  GanModel model;
  nn::OptimizerState gen_opt;
  nn::OptimizerState disc_opt;
  long step_index = 0;

  static GanTrainer make(int state_dim, std::uint64_t seed, double learning_rate = 1e-4);
};

struct GanStepStats {
  double d_loss = 0.0;
  double g_loss = 0.0;
};

/// One discriminator ascent step on log D(d) + log(1 - D(G(z))) and one
/// non-saturating generator step on log D(G(z)). Throws TrainingError on a
/// non-finite loss.
GanStepStats gan_train_step(GanTrainer& trainer, const Matrix& real_batch,
                            std::uint64_t noise_seed);

/// Fits the scaler, then runs `steps` minibatch train steps over the state
/// pool. Deterministic in seed.
std::vector<GanStepStats> gan_train(GanTrainer& trainer, const Matrix& states, int steps,
                                    int batch_size, std::uint64_t seed);

// --- RND ------------------------------------------------------------------------

/// Random Network Distillation: a frozen random target net and a predictor
/// trained to mimic it on in-distribution states.
struct RndModel {
  int state_dim = 4;
  int output_dim = 64;
  nn::MlpParams target;  // never updated after init
  nn::MlpParams predictor;
  nn::FeatureScaler state_scaler;

  static RndModel make(int state_dim, std::uint64_t seed, int output_dim = 64);
  void validate() const;
};

struct RndHyper {
  int steps = 20000;
  int batch_size = 16;
  double learning_rate = 1e-4;  // Adam
  std::uint64_t seed = 0;
};

/// Trains the predictor toward the frozen target; returns per-step losses.
std::vector<double> rnd_train(RndModel& model, const Matrix& states, const RndHyper& hyper);

/// RND: squared distance between target and predictor outputs.
double novelty_score(const RndModel& model, const Vector& state);
/// GAN: 1 - sigmoid(discriminator logit).
double novelty_score(const GanModel& model, const Vector& state);

// --- thresholding ------------------------------------------------------------------

/// Empirical percentile with linear interpolation over >= 100 held-out
/// in-distribution scores.
double calibrate_threshold(std::vector<double> scores, double percentile = 99.0);

struct OodVerdict {
  double score = 0.0;
  double threshold = 0.0;
  bool is_ood = false;
};

/// Calibrated monitor wrapping either detector behind one scoring
/// interface.
class FailureMonitor {
 public:
  enum class Kind { Rnd, Gan };

  FailureMonitor(RndModel model, double threshold);
  FailureMonitor(GanModel model, double threshold);

  OodVerdict judge(const Vector& state) const;
  double threshold() const { return threshold_; }
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
  std::optional<RndModel> rnd_;
  std::optional<GanModel> gan_;
  double threshold_;
};

/// Calibration report: percentile, threshold and a histogram of the
/// held-out scores.
nlohmann::json calibration_report(const std::vector<double>& scores, double percentile,
                                  double threshold, int histogram_bins = 20);

// --- checkpoints ----------------------------------------------------------------

void save_gan(const std::string& path, const GanModel& model);
GanModel load_gan(const std::string& path);
void save_rnd(const std::string& path, const RndModel& model);
RndModel load_rnd(const std::string& path);

}  // namespace socnav::fpm
