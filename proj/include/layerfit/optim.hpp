#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "layerfit/dataset.hpp"
#include "layerfit/exprdsl.hpp"

namespace layerfit::optim {

enum class Loss { mse, cross_entropy };

struct FitConfig {
  Loss loss = Loss::mse;
  double learning_rate = 0.01;
  int iterations = 2000;
  int restarts = 5;
  double init_scale = 1.0;
  std::uint64_t seed = 0;
  bool record_trace = false;  // keep the winning restart's best-so-far curve
};

struct FitResult {
  std::vector<double> theta_hat;
  double train_loss = 0.0;
  // true when the winning restart completed every iteration with finite loss
  bool converged = false;
  int restarts_tried = 0;
  std::vector<double> trace;  // best-so-far per iterate, when recorded
};

// (1/N) sum (pred - target)^2 over flattened vectors.
double mse_loss(std::span<const double> preds, std::span<const double> targets);

// -(1/N) sum_rows sum_c label_c log(pred_c) over flattened (row, 2) pairs,
// predictions clamped to [1e-12, 1 - 1e-12]. N counts rows.
double cross_entropy_loss(std::span<const double> pred_pairs,
                          std::span<const double> label_pairs);

// Fraction of rows whose predicted pair puts the larger probability on the
// labeled class.
double pair_accuracy(std::span<const double> pred_pairs,
                     std::span<const double> label_pairs);

// dLoss/dpred for the two losses above, written into grad (same length).
void mse_loss_grad(std::span<const double> preds,
                   std::span<const double> targets, std::span<double> grad);
void cross_entropy_loss_grad(std::span<const double> pred_pairs,
                             std::span<const double> label_pairs,
                             std::span<double> grad);

// Fits theta by full-batch adaptive-moment descent with multi-restart
// initialization: restart r draws theta^0 uniform on [-init_scale,
// +init_scale] from seed+r, runs cfg.iterations steps, and the best finite
// iterate across all restarts wins (ties toward the earlier restart).
// Deterministic given (seed, data, model). Throws eval_error if the data
// violates the model's domain, fit_failure if every restart is nonfinite.
FitResult fit(const exprdsl::CandidateModel& model, const Dataset& data,
              const FitConfig& cfg);

}  // namespace layerfit::optim
