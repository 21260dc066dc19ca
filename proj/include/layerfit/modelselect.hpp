#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "layerfit/dataset.hpp"
#include "layerfit/exprdsl.hpp"
#include "layerfit/mlpnet.hpp"
#include "layerfit/optim.hpp"

namespace layerfit::modelselect {

// Classical statistic: SSE_k / sigma2_hat - N + 2 p_k.
double mallows_cp(double sse_k, double sigma2_hat, int n, int p_k);

// Modified statistic: mse_k / mse_full - 1 + lambda * r_k. An infinite mse_k
// (infeasible candidate) propagates.
double mc_statistic(double mse_k, double mse_full, double lambda, double r_k);

// --- cross-validation plan --------------------------------------------------

struct CvPlan {
  int folds = 0;
  std::vector<int> assignments;  // per row: fold index in [0, folds)
  std::uint64_t seed = 0;

  std::vector<std::size_t> fold_rows(int fold) const;
  std::vector<std::size_t> train_rows(int fold) const;  // complement
};

// Uniform random split into D folds whose sizes differ by at most one; the
// (N mod D) leftover rows go one each to the first folds. Deterministic.
CvPlan make_cv_plan(std::size_t n, int folds, std::uint64_t seed);

// --- cross-validated losses -------------------------------------------------

struct CandidateCvRecord {
  int model_id = 0;
  std::string form;
  exprdsl::ComplexityMeasure r{exprdsl::ComplexityKind::total_params, 0.0, 0};
  double loss_cv = 0.0;      // mean per-fold training loss; +inf if infeasible
  double loss_cv_val = 0.0;  // mean per-fold validation loss
  std::vector<double> fold_train, fold_val;
  // classification only (else NaN): mean training/validation accuracy
  double acc_cv = 0.0, acc_cv_val = 0.0;
  bool feasible = true;
};

// The same per-fold quantities for one network (the saturated full model or
// the benchmark).
struct MlpCvRecord {
  double loss_cv = 0.0, loss_cv_val = 0.0;
  std::vector<double> fold_train, fold_val;
  double acc_cv = 0.0, acc_cv_val = 0.0;
};

struct CvOptions {
  exprdsl::ComplexityKind complexity = exprdsl::ComplexityKind::total_params;
  unsigned max_threads = 0;  // 0 = hardware default
};

struct CvResult {
  std::vector<CandidateCvRecord> records;
  MlpCvRecord full;
};

// For every fold: fits each candidate and the full network on the other D-1
// folds (per-fit seeds derived from fit_cfg.seed / full_spec.seed and the
// fold), records the training loss there and the validation loss on the held
// fold, then averages. Candidates that fail a fold carry +inf; the failure is
// recorded, not fatal.
CvResult cross_validate(const std::vector<exprdsl::CandidateModel>& candidates,
                        const mlpnet::MlpSpec& full_spec, const Dataset& data,
                        const CvPlan& plan, const optim::FitConfig& fit_cfg,
                        const CvOptions& opts = {});

// Cross-validates one network alone (used for the benchmark row).
MlpCvRecord cross_validate_mlp(const mlpnet::MlpSpec& spec, const Dataset& data,
                               const CvPlan& plan, unsigned max_threads = 0);

// --- lambda search ----------------------------------------------------------

struct LambdaGrid {
  double min = 0.0;
  double max = 1.0;
  double step = 0.01;
};

enum class CorrelationKind { pearson, spearman };

struct LambdaSearch {
  double lambda_opt = 0.0;
  double best_correlation = 0.0;
  std::vector<double> grid;          // evaluated lambda values
  std::vector<double> correlations;  // NaN where degenerate
};

// Maximizes the correlation between the feasible candidates' {MC_cv} and
// {MC'_cv} vectors over the grid; ties resolve toward the smallest lambda.
// Throws selection_error when fewer than two candidates are feasible or the
// correlation is degenerate at every grid point.
LambdaSearch lambda_search(const std::vector<CandidateCvRecord>& records,
                           const MlpCvRecord& full, const LambdaGrid& grid,
                           CorrelationKind corr = CorrelationKind::pearson);

// --- final selection --------------------------------------------------------

struct SelectionReport {
  std::vector<CandidateCvRecord> records;
  MlpCvRecord full;
  double lambda_opt = 0.0;
  std::vector<double> mc_cv, mc_cv_val;  // aligned with records
  int selected_id = 0;
  bool tie_break_applied = false;
  std::vector<double> selected_theta;  // refit on all rows
  double selected_train_loss = 0.0;
};

// Computes MC_cv / MC'_cv at lambda_opt, picks the feasible candidate with
// the smallest MC'_cv (ties: smaller r, then smaller model_id), and refits
// the winner on the complete dataset. Throws selection_error when every
// candidate is infeasible.
SelectionReport select_final(
    const std::vector<exprdsl::CandidateModel>& candidates,
    const CvResult& cv, double lambda_opt, const Dataset& data,
    const optim::FitConfig& fit_cfg);

}  // namespace layerfit::modelselect
