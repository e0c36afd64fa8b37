#pragma once

// Helpers shared between the unit tests and the acceptance suite:
// finite-difference gradient oracles and random loss-case generation.

#include <functional>
#include <vector>

#include "socnav/nn.hpp"
#include "socnav/rng.hpp"

namespace socnav::testsupport {

using LossClosure =
    std::function<nn::Tape::Ref(nn::Tape&, const nn::MlpParams&, nn::MlpGrads&)>;

inline double eval_loss(const nn::MlpParams& params, const LossClosure& loss) {
  nn::MlpGrads scratch = nn::zero_grads(params);
  nn::Tape tape;
  return tape.scalar(loss(tape, params, scratch));
}

/// Central finite differences over every parameter entry.
inline nn::MlpGrads finite_difference_grads(const nn::MlpParams& params,
                                            const LossClosure& loss, double eps = 1e-5) {
  nn::MlpGrads fd = nn::zero_grads(params);
  nn::MlpParams work = params;
  for (std::size_t l = 0; l < work.weights.size(); ++l) {
    for (Eigen::Index i = 0; i < work.weights[l].size(); ++i) {
      double* entry = work.weights[l].data() + i;
      const double saved = *entry;
      *entry = saved + eps;
      const double up = eval_loss(work, loss);
      *entry = saved - eps;
      const double down = eval_loss(work, loss);
      *entry = saved;
      fd.weights[l].data()[i] = (up - down) / (2.0 * eps);
    }
    for (Eigen::Index i = 0; i < work.biases[l].size(); ++i) {
      double* entry = work.biases[l].data() + i;
      const double saved = *entry;
      *entry = saved + eps;
      const double up = eval_loss(work, loss);
      *entry = saved - eps;
      const double down = eval_loss(work, loss);
      *entry = saved;
      fd.biases[l].data()[i] = (up - down) / (2.0 * eps);
    }
  }
  return fd;
}

/// Relative error with an absolute floor at the tolerance scale, so that
/// finite-difference noise on near-zero gradients does not dominate.
inline double relative_error(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-4});
  return std::abs(a - b) / denom;
}

inline double max_relative_error(const nn::MlpGrads& a, const nn::MlpGrads& b) {
  double worst = 0.0;
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    for (Eigen::Index i = 0; i < a.weights[l].size(); ++i)
      worst = std::max(worst, relative_error(a.weights[l].data()[i], b.weights[l].data()[i]));
    for (Eigen::Index i = 0; i < a.biases[l].size(); ++i)
      worst = std::max(worst, relative_error(a.biases[l].data()[i], b.biases[l].data()[i]));
  }
  return worst;
}

struct RandomLossCase {
  nn::MlpParams params;
  LossClosure loss;
};

/// Random small network plus a random loss composed from the supported op
/// set. ReLU cases are redrawn while any hidden pre-activation sits within
/// a guard band of the kink, where the gradient is not defined.
inline RandomLossCase make_random_loss_case(Rng& rng) {
  using nn::Matrix;

  for (int attempt = 0;; ++attempt) {
    nn::MlpSpec spec;
    const int hidden_layers = rng.uniform_int(0, 3);
    const int kind = rng.uniform_int(0, 3);
    const int in_dim = rng.uniform_int(1, 4);
    int out_dim = rng.uniform_int(1, 4);
    if (kind == 1) out_dim = 2 * rng.uniform_int(1, 2);  // mean || scale logits
    spec.layer_widths.push_back(in_dim);
    for (int h = 0; h < hidden_layers; ++h) spec.layer_widths.push_back(rng.uniform_int(2, 16));
    spec.layer_widths.push_back(out_dim);
    const int act = rng.uniform_int(0, 2);
    spec.activation = act == 0   ? nn::Activation::ReLU
                      : act == 1 ? nn::Activation::ELU
                                 : nn::Activation::Identity;
    spec.seed = rng.raw();

    nn::MlpParams params = nn::init_params(spec);

    const int batch = rng.uniform_int(1, 3);
    Matrix input(in_dim, batch);
    for (Eigen::Index i = 0; i < input.size(); ++i) input.data()[i] = 2.0 * rng.normal();

    // Guard band: keep ReLU kinks away from the finite-difference window.
    if (spec.activation == nn::Activation::ReLU && hidden_layers > 0) {
      bool near_kink = false;
      Matrix a = input;
      for (int l = 0; l + 1 < spec.depth() + 1 && !near_kink; ++l) {
        if (l >= spec.depth()) break;
        Matrix z = params.weights[l] * a;
        z.colwise() += params.biases[l];
        if (l + 1 < spec.depth()) {
          if ((z.array().abs() < 1e-3).any()) near_kink = true;
          a = z.cwiseMax(0.0);
        }
      }
      if (near_kink && attempt < 64) continue;
    }

    LossClosure loss;
    if (kind == 0) {
      Matrix target(out_dim, batch);
      for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = rng.normal();
      loss = [input, target](nn::Tape& tape, const nn::MlpParams& p, nn::MlpGrads& g) {
        const auto out = tape.mlp(p, tape.constant(input), &g);
        return tape.mse(out, target);
      };
    } else if (kind == 1) {
      const int half = out_dim / 2;
      Matrix target(half, batch);
      for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = rng.normal();
      loss = [input, target, half, out_dim, batch](nn::Tape& tape, const nn::MlpParams& p,
                                                   nn::MlpGrads& g) {
        const auto out = tape.mlp(p, tape.constant(input), &g);
        const auto mean = tape.rows(out, 0, half);
        // Shift logits up so the scale stays away from tiny values where
        // the loss curvature would swamp the finite-difference oracle.
        const auto shifted =
            tape.add(tape.rows(out, half, half), tape.constant(Matrix::Constant(half, batch, 2.0)));
        const auto scale = tape.softplus(shifted);
        return tape.gaussian_nll(mean, scale, target);
      };
    } else if (kind == 2) {
      loss = [input](nn::Tape& tape, const nn::MlpParams& p, nn::MlpGrads& g) {
        const auto out = tape.mlp(p, tape.constant(input), &g);
        return tape.scaled(tape.sum_all(tape.log_sigmoid(out)), -1.0);
      };
    } else {
      Matrix target(out_dim, batch);
      for (Eigen::Index i = 0; i < target.size(); ++i)
        target.data()[i] = std::abs(rng.normal()) + 0.5;
      loss = [input, target](nn::Tape& tape, const nn::MlpParams& p, nn::MlpGrads& g) {
        const auto out = tape.mlp(p, tape.constant(input), &g);
        const auto positive = tape.softplus(out);
        const auto a = tape.mse(positive, target);
        const auto b = tape.scaled(tape.sum_all(tape.log_sigmoid(out)), -0.1);
        return tape.add(a, b);
      };
    }
    return {std::move(params), std::move(loss)};
  }
}

}  // namespace socnav::testsupport
