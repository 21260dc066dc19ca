#include "layerfit/modelselect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "layerfit/errors.hpp"
#include "layerfit/parallel.hpp"
#include "layerfit/rng.hpp"
#include "layerfit/statcore.hpp"

namespace layerfit::modelselect {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// substream tags so candidate fits, network fits, and the final refit never
// share an RNG stream
constexpr std::uint64_t kMlpStream = 101;

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

}  // namespace

double mallows_cp(double sse_k, double sigma2_hat, int n, int p_k) {
  if (!(sigma2_hat > 0.0))
    throw std::domain_error("mallows_cp: sigma2_hat must be positive");
  return sse_k / sigma2_hat - n + 2.0 * p_k;
}

double mc_statistic(double mse_k, double mse_full, double lambda, double r_k) {
  if (!(mse_full > 0.0))
    throw std::domain_error("mc_statistic: mse_full must be positive");
  return mse_k / mse_full - 1.0 + lambda * r_k;
}

std::vector<std::size_t> CvPlan::fold_rows(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> CvPlan::train_rows(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] != fold) out.push_back(i);
  return out;
}

CvPlan make_cv_plan(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2 || static_cast<std::size_t>(folds) > n)
    throw config_error("make_cv_plan: need 2 <= D <= N");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(perm);

  CvPlan plan;
  plan.folds = folds;
  plan.seed = seed;
  plan.assignments.assign(n, 0);
  const std::size_t base = n / folds;
  const std::size_t rem = n % folds;  // first folds take one extra row
  std::size_t at = 0;
  for (int f = 0; f < folds; ++f) {
    const std::size_t size = base + (static_cast<std::size_t>(f) < rem);
    for (std::size_t i = 0; i < size; ++i) plan.assignments[perm[at++]] = f;
  }
  return plan;
}

namespace {

struct FoldCell {
  double train = kInf;
  double val = kInf;
  double acc_train = kNan;
  double acc_val = kNan;
  bool ok = false;
};

void run_candidate_fold(const exprdsl::CandidateModel& cand,
                        const Dataset& train_ds, const Dataset& val_ds,
                        const optim::FitConfig& fit_cfg, int fold,
                        bool classify, FoldCell& cell) {
  optim::FitConfig cfg = fit_cfg;
  cfg.seed = derive_seed(fit_cfg.seed, static_cast<std::uint64_t>(cand.model_id),
                         static_cast<std::uint64_t>(fold) + 1);
  try {
    const optim::FitResult res = optim::fit(cand, train_ds, cfg);
    cell.train = res.train_loss;

    exprdsl::BatchEvaluator val_ev(cand, val_ds);
    std::vector<double> val_preds;
    val_ev.forward(res.theta_hat, val_preds);
    cell.val = classify
                   ? optim::cross_entropy_loss(val_preds, val_ds.targets)
                   : optim::mse_loss(val_preds, val_ds.targets);
    if (!std::isfinite(cell.val)) cell.val = kInf;

    if (classify && std::isfinite(cell.val)) {
      exprdsl::BatchEvaluator train_ev(cand, train_ds);
      std::vector<double> train_preds;
      train_ev.forward(res.theta_hat, train_preds);
      cell.acc_train = optim::pair_accuracy(train_preds, train_ds.targets);
      cell.acc_val = optim::pair_accuracy(val_preds, val_ds.targets);
    }
  } catch (const fit_failure&) {
    return;  // infeasible on this fold
  } catch (const eval_error&) {
    return;
  }
  cell.ok = std::isfinite(cell.train) && std::isfinite(cell.val);
}

void run_mlp_fold(const mlpnet::MlpSpec& spec, const Dataset& train_ds,
                  const Dataset& val_ds, int fold, bool classify,
                  FoldCell& cell) {
  mlpnet::MlpSpec fold_spec = spec;
  fold_spec.seed =
      derive_seed(spec.seed, kMlpStream, static_cast<std::uint64_t>(fold) + 1);
  const mlpnet::MlpState state = mlpnet::train(fold_spec, train_ds);
  cell.train = mlpnet::dataset_loss(state, train_ds);
  cell.val = mlpnet::dataset_loss(state, val_ds);
  if (classify) {
    cell.acc_train = mlpnet::dataset_accuracy(state, train_ds);
    cell.acc_val = mlpnet::dataset_accuracy(state, val_ds);
  }
  cell.ok = std::isfinite(cell.train) && std::isfinite(cell.val);
}

MlpCvRecord assemble_mlp(const std::vector<FoldCell>& cells, bool classify) {
  MlpCvRecord rec;
  for (const FoldCell& c : cells) {
    rec.fold_train.push_back(c.train);
    rec.fold_val.push_back(c.val);
  }
  rec.loss_cv = mean(rec.fold_train);
  rec.loss_cv_val = mean(rec.fold_val);
  rec.acc_cv = rec.acc_cv_val = kNan;
  if (classify) {
    double at = 0.0, av = 0.0;
    for (const FoldCell& c : cells) {
      at += c.acc_train;
      av += c.acc_val;
    }
    rec.acc_cv = at / static_cast<double>(cells.size());
    rec.acc_cv_val = av / static_cast<double>(cells.size());
  }
  return rec;
}

void check_cv_inputs(const std::vector<exprdsl::CandidateModel>& candidates,
                     const mlpnet::MlpSpec& full_spec, const Dataset& data,
                     const CvPlan& plan, const optim::FitConfig& fit_cfg) {
  if (plan.assignments.size() != data.rows)
    throw config_error("cross_validate: plan does not cover the dataset");
  for (int a : plan.assignments)
    if (a < 0 || a >= plan.folds)
      throw config_error("cross_validate: fold index out of range");
  const bool classify = data.task == Task::classification;
  if (classify != (fit_cfg.loss == optim::Loss::cross_entropy))
    throw config_error("cross_validate: loss does not match the task");
  if (classify !=
      (full_spec.output_activation == mlpnet::OutputActivation::softmax))
    throw config_error("cross_validate: network head does not match the task");
  for (const auto& cand : candidates)
    if (static_cast<std::size_t>(cand.output_width()) != data.target_width)
      throw config_error("cross_validate: candidate output width mismatch");
}

}  // namespace

CvResult cross_validate(const std::vector<exprdsl::CandidateModel>& candidates,
                        const mlpnet::MlpSpec& full_spec, const Dataset& data,
                        const CvPlan& plan, const optim::FitConfig& fit_cfg,
                        const CvOptions& opts) {
  check_cv_inputs(candidates, full_spec, data, plan, fit_cfg);
  const bool classify = data.task == Task::classification;
  const int d_folds = plan.folds;
  const std::size_t k_models = candidates.size();

  std::vector<Dataset> train_ds(d_folds), val_ds(d_folds);
  for (int d = 0; d < d_folds; ++d) {
    train_ds[d] = data.subset(plan.train_rows(d));
    val_ds[d] = data.subset(plan.fold_rows(d));
  }

  std::vector<FoldCell> cells(k_models * d_folds);
  std::vector<FoldCell> full_cells(d_folds);
  parallel_for(
      k_models * d_folds + d_folds,
      [&](std::size_t t) {
        if (t < k_models * d_folds) {
          const std::size_t k = t / d_folds;
          const int d = static_cast<int>(t % d_folds);
          run_candidate_fold(candidates[k], train_ds[d], val_ds[d], fit_cfg, d,
                             classify, cells[t]);
        } else {
          const int d = static_cast<int>(t - k_models * d_folds);
          run_mlp_fold(full_spec, train_ds[d], val_ds[d], d, classify,
                       full_cells[d]);
        }
      },
      opts.max_threads);

  CvResult out;
  out.records.reserve(k_models);
  for (std::size_t k = 0; k < k_models; ++k) {
    CandidateCvRecord rec;
    rec.model_id = candidates[k].model_id;
    rec.form = candidates[k].form_label(data.feature_names);
    rec.r = exprdsl::complexity(candidates[k], opts.complexity);
    bool all_ok = true;
    for (int d = 0; d < d_folds; ++d) {
      const FoldCell& c = cells[k * d_folds + d];
      rec.fold_train.push_back(c.train);
      rec.fold_val.push_back(c.val);
      all_ok = all_ok && c.ok;
    }
    rec.feasible = all_ok;
    rec.loss_cv = mean(rec.fold_train);
    rec.loss_cv_val = mean(rec.fold_val);
    rec.acc_cv = rec.acc_cv_val = kNan;
    if (classify && all_ok) {
      double at = 0.0, av = 0.0;
      for (int d = 0; d < d_folds; ++d) {
        at += cells[k * d_folds + d].acc_train;
        av += cells[k * d_folds + d].acc_val;
      }
      rec.acc_cv = at / d_folds;
      rec.acc_cv_val = av / d_folds;
    }
    out.records.push_back(std::move(rec));
  }
  out.full = assemble_mlp(full_cells, classify);
  return out;
}

MlpCvRecord cross_validate_mlp(const mlpnet::MlpSpec& spec, const Dataset& data,
                               const CvPlan& plan, unsigned max_threads) {
  if (plan.assignments.size() != data.rows)
    throw config_error("cross_validate_mlp: plan does not cover the dataset");
  const bool classify = data.task == Task::classification;
  const int d_folds = plan.folds;
  std::vector<FoldCell> cells(d_folds);
  std::vector<Dataset> train_ds(d_folds), val_ds(d_folds);
  for (int d = 0; d < d_folds; ++d) {
    train_ds[d] = data.subset(plan.train_rows(d));
    val_ds[d] = data.subset(plan.fold_rows(d));
  }
  parallel_for(
      d_folds,
      [&](std::size_t d) {
        run_mlp_fold(spec, train_ds[d], val_ds[d], static_cast<int>(d),
                     classify, cells[d]);
      },
      max_threads);
  return assemble_mlp(cells, classify);
}

LambdaSearch lambda_search(const std::vector<CandidateCvRecord>& records,
                           const MlpCvRecord& full, const LambdaGrid& grid,
                           CorrelationKind corr) {
  if (!(grid.step > 0.0) || grid.min < 0.0 || grid.max < grid.min)
    throw config_error("lambda_search: need 0 <= min <= max and step > 0");
  if (!(full.loss_cv > 0.0) || !(full.loss_cv_val > 0.0))
    throw selection_error("lambda_search: full-model loss must be positive");

  std::vector<const CandidateCvRecord*> feasible;
  for (const auto& rec : records)
    if (rec.feasible && std::isfinite(rec.loss_cv) &&
        std::isfinite(rec.loss_cv_val))
      feasible.push_back(&rec);
  if (feasible.size() < 2)
    throw selection_error(
        "lambda_search: need at least two feasible candidates");

  const int points =
      static_cast<int>(std::floor((grid.max - grid.min) / grid.step + 1e-9)) +
      1;
  LambdaSearch out;
  out.lambda_opt = kNan;
  out.best_correlation = -kInf;
  std::vector<double> x(feasible.size()), y(feasible.size());
  for (int i = 0; i < points; ++i) {
    const double lam = grid.min + i * grid.step;
    for (std::size_t k = 0; k < feasible.size(); ++k) {
      x[k] = mc_statistic(feasible[k]->loss_cv, full.loss_cv, lam,
                          feasible[k]->r.value);
      y[k] = mc_statistic(feasible[k]->loss_cv_val, full.loss_cv_val, lam,
                          feasible[k]->r.value);
    }
    const auto rho = corr == CorrelationKind::pearson
                         ? statcore::pearson_correlation(x, y)
                         : statcore::spearman_correlation(x, y);
    out.grid.push_back(lam);
    out.correlations.push_back(rho.value_or(kNan));
    if (rho && *rho > out.best_correlation) {  // strict: ties keep smaller lam
      out.best_correlation = *rho;
      out.lambda_opt = lam;
    }
  }
  if (!std::isfinite(out.lambda_opt))
    throw selection_error(
        "lambda_search: correlation degenerate at every grid point; try a "
        "different grid");
  return out;
}

SelectionReport select_final(
    const std::vector<exprdsl::CandidateModel>& candidates,
    const CvResult& cv, double lambda_opt, const Dataset& data,
    const optim::FitConfig& fit_cfg) {
  if (cv.records.empty()) throw selection_error("select_final: no candidates");
  if (!(cv.full.loss_cv > 0.0) || !(cv.full.loss_cv_val > 0.0))
    throw selection_error("select_final: full-model loss must be positive");

  SelectionReport report;
  report.records = cv.records;
  report.full = cv.full;
  report.lambda_opt = lambda_opt;

  int best = -1;
  for (std::size_t i = 0; i < cv.records.size(); ++i) {
    const auto& rec = cv.records[i];
    report.mc_cv.push_back(
        mc_statistic(rec.loss_cv, cv.full.loss_cv, lambda_opt, rec.r.value));
    report.mc_cv_val.push_back(mc_statistic(rec.loss_cv_val,
                                            cv.full.loss_cv_val, lambda_opt,
                                            rec.r.value));
    if (!rec.feasible || !std::isfinite(report.mc_cv_val.back())) continue;
    if (best < 0) {
      best = static_cast<int>(i);
      continue;
    }
    const auto& cur = cv.records[best];
    const double mc_i = report.mc_cv_val.back();
    const double mc_b = report.mc_cv_val[best];
    if (mc_i < mc_b) {
      best = static_cast<int>(i);
    } else if (mc_i == mc_b) {
      report.tie_break_applied = true;
      if (rec.r.value < cur.r.value ||
          (rec.r.value == cur.r.value && rec.model_id < cur.model_id))
        best = static_cast<int>(i);
    }
  }
  if (best < 0)
    throw selection_error("select_final: every candidate is infeasible");

  report.selected_id = cv.records[best].model_id;

  const auto cand =
      std::find_if(candidates.begin(), candidates.end(), [&](const auto& c) {
        return c.model_id == report.selected_id;
      });
  if (cand == candidates.end())
    throw selection_error("select_final: selected candidate not in list");

  optim::FitConfig cfg = fit_cfg;
  cfg.seed = derive_seed(fit_cfg.seed,
                         static_cast<std::uint64_t>(report.selected_id), 0);
  const optim::FitResult refit = optim::fit(*cand, data, cfg);
  report.selected_theta = refit.theta_hat;
  report.selected_train_loss = refit.train_loss;
  return report;
}

}  // namespace layerfit::modelselect
