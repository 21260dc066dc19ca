#include "layerfit/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "layerfit/errors.hpp"
#include "layerfit/rng.hpp"

namespace layerfit::optim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kProbClamp = 1e-12;

double clamp_prob(double p) {
  return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
}

}  // namespace

double mse_loss(std::span<const double> preds,
                std::span<const double> targets) {
  if (preds.empty()) throw std::domain_error("mse_loss: empty input");
  if (preds.size() != targets.size())
    throw std::domain_error("mse_loss: length mismatch");
  double sum = 0.0;
  for (size_t i = 0; i < preds.size(); ++i) {
    const double d = preds[i] - targets[i];
    sum += d * d;
  }
  return sum / static_cast<double>(preds.size());
}

double cross_entropy_loss(std::span<const double> pred_pairs,
                          std::span<const double> label_pairs) {
  if (pred_pairs.empty())
    throw std::domain_error("cross_entropy_loss: empty input");
  if (pred_pairs.size() != label_pairs.size() || pred_pairs.size() % 2 != 0)
    throw std::domain_error("cross_entropy_loss: length mismatch");
  const size_t rows = pred_pairs.size() / 2;
  double sum = 0.0;
  for (size_t i = 0; i < pred_pairs.size(); ++i)
    sum -= label_pairs[i] * std::log(clamp_prob(pred_pairs[i]));
  return sum / static_cast<double>(rows);
}

double pair_accuracy(std::span<const double> pred_pairs,
                     std::span<const double> label_pairs) {
  if (pred_pairs.empty())
    throw std::domain_error("pair_accuracy: empty input");
  if (pred_pairs.size() != label_pairs.size() || pred_pairs.size() % 2 != 0)
    throw std::domain_error("pair_accuracy: length mismatch");
  const size_t rows = pred_pairs.size() / 2;
  size_t hits = 0;
  for (size_t i = 0; i < rows; ++i) {
    const bool pred_one = pred_pairs[2 * i + 1] > pred_pairs[2 * i];
    const bool label_one = label_pairs[2 * i + 1] > label_pairs[2 * i];
    if (pred_one == label_one) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(rows);
}

void mse_loss_grad(std::span<const double> preds,
                   std::span<const double> targets, std::span<double> grad) {
  const double inv_n = 1.0 / static_cast<double>(preds.size());
  for (size_t i = 0; i < preds.size(); ++i)
    grad[i] = 2.0 * (preds[i] - targets[i]) * inv_n;
}

void cross_entropy_loss_grad(std::span<const double> pred_pairs,
                             std::span<const double> label_pairs,
                             std::span<double> grad) {
  const double inv_rows = 2.0 / static_cast<double>(pred_pairs.size());
  for (size_t i = 0; i < pred_pairs.size(); ++i)
    grad[i] = -label_pairs[i] / clamp_prob(pred_pairs[i]) * inv_rows;
}

FitResult fit(const exprdsl::CandidateModel& model, const Dataset& data,
              const FitConfig& cfg) {
  if (cfg.learning_rate <= 0.0 || cfg.iterations < 1 || cfg.restarts < 1 ||
      cfg.init_scale < 0.0)
    throw config_error("fit: learning_rate must be positive, iterations and "
                       "restarts at least 1, init_scale nonnegative");
  if (cfg.loss == Loss::cross_entropy) {
    if (model.output_width() != 2 || data.target_width != 2)
      throw config_error(
          "fit: cross-entropy needs a two-column head and two-column targets");
  } else if (static_cast<size_t>(model.output_width()) != data.target_width) {
    throw config_error("fit: model output width does not match targets");
  }

  exprdsl::BatchEvaluator be(model, data);
  const int p = model.theta_size();
  const std::span<const double> targets(data.targets);

  const auto loss_of = [&](std::span<const double> preds) {
    return cfg.loss == Loss::mse ? mse_loss(preds, targets)
                                 : cross_entropy_loss(preds, targets);
  };

  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;

  std::vector<double> theta(p), m(p), v(p), grad(p), preds, upstream;
  std::vector<double> best_theta;          // overall winner
  double best_loss = kInf;
  bool best_clean = false;
  std::vector<double> best_trace;

  for (int r = 0; r < cfg.restarts; ++r) {
    Rng rng(cfg.seed + static_cast<std::uint64_t>(r));
    for (double& t : theta) t = rng.uniform(-cfg.init_scale, cfg.init_scale);
    std::fill(m.begin(), m.end(), 0.0);
    std::fill(v.begin(), v.end(), 0.0);

    double restart_best = kInf;
    std::vector<double> restart_theta;
    std::vector<double> trace;
    bool clean = true;

    be.forward(theta, preds);
    upstream.resize(preds.size());
    double loss = loss_of(preds);
    const auto note = [&]() {
      if (std::isfinite(loss) && loss < restart_best) {
        restart_best = loss;
        restart_theta = theta;
      }
      if (cfg.record_trace) trace.push_back(restart_best);
    };
    note();

    double b1t = 1.0, b2t = 1.0;
    for (int it = 0; it < cfg.iterations; ++it) {
      if (!std::isfinite(loss)) {
        clean = false;
        break;
      }
      if (cfg.loss == Loss::mse)
        mse_loss_grad(preds, targets, upstream);
      else
        cross_entropy_loss_grad(preds, targets, upstream);
      be.backward(theta, upstream, grad);

      b1t *= kBeta1;
      b2t *= kBeta2;
      bool grad_ok = true;
      for (int i = 0; i < p; ++i) {
        if (!std::isfinite(grad[i])) {
          grad_ok = false;
          break;
        }
        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grad[i];
        v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
        const double m_hat = m[i] / (1.0 - b1t);
        const double v_hat = v[i] / (1.0 - b2t);
        theta[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + kEps);
      }
      if (!grad_ok) {  // a poisoned moment estimate never recovers
        clean = false;
        break;
      }
      be.forward(theta, preds);
      loss = loss_of(preds);
      note();
    }
    if (!std::isfinite(loss)) clean = false;

    if (restart_best < best_loss) {
      best_loss = restart_best;
      best_theta = std::move(restart_theta);
      best_clean = clean;
      best_trace = std::move(trace);
    }
  }

  if (!std::isfinite(best_loss))
    throw fit_failure(model.model_id, "no restart reached a finite loss");

  FitResult result;
  result.theta_hat = std::move(best_theta);
  be.forward(result.theta_hat, preds);
  result.train_loss = loss_of(preds);
  result.converged = best_clean;
  result.restarts_tried = cfg.restarts;
  result.trace = std::move(best_trace);
  return result;
}

}  // namespace layerfit::optim
