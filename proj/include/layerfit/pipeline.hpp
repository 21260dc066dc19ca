#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "layerfit/casestudies.hpp"
#include "layerfit/dataset.hpp"
#include "layerfit/exprdsl.hpp"
#include "layerfit/mlpnet.hpp"
#include "layerfit/modelselect.hpp"
#include "layerfit/optim.hpp"

namespace layerfit::pipeline {

// --- run configuration ------------------------------------------------------

enum class Study { sim1, sim2, sim3, tabular };

std::string study_name(Study s);
Study parse_study(const std::string& name);

// Target rescaling for ingested tables: y' = (y + add) / div, applied to y
// directly (affine) or to log(y) (log_affine).
enum class TargetTransform { none, affine, log_affine };

struct CsvSource {
  std::string path;
  std::string target_column;  // empty = last column
  TargetTransform transform = TargetTransform::none;
  double add = 0.0;
  double div = 1.0;
  bool standardize = false;  // covariates to mean 0, sample SD 1
};

struct MlpSettings {
  std::vector<int> hidden;  // hidden widths; in/out come from the dataset
  double dropout = 0.0;
  int epochs = 100;
  int batch_size = 10;
  double learning_rate = 0.005;
};

// Complete description of one batch run. Every field has a per-study default;
// a config file overrides selectively and the merged result is echoed into
// report.json, so runs are reproducible from their own artifacts.
struct RunConfig {
  Study study = Study::sim1;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  std::size_t rows = 1000;  // generated datasets only
  int folds = 5;
  int j = 2;             // second-layer slots
  int subset_size = -1;  // covariates per candidate (-1 = all features)
  std::string f1_family;
  std::string f2_family;
  exprdsl::ComplexityKind complexity = exprdsl::ComplexityKind::total_params;
  modelselect::LambdaGrid lambda_grid;
  modelselect::CorrelationKind correlation =
      modelselect::CorrelationKind::pearson;
  optim::FitConfig fit;  // loss and seed are derived, not user-set
  MlpSettings full_mlp;  // saturated network, the MC denominator
  MlpSettings benchmark_mlp;
  unsigned threads = 0;  // 0 = hardware default
  int heatmap_steps = 50;
  // study-specific sources
  casestudies::TrialRanges trial;  // sim1
  casestudies::GngRanges gng;      // sim2
  casestudies::GngInputMode gng_mode = casestudies::GngInputMode::original;
  casestudies::FisherDesign fisher;  // sim3
  bool fisher_exhaustive = false;
  CsvSource csv;  // tabular
};

RunConfig default_config(Study study);
// Strict JSON loader: starts from the study's defaults, overlays the file,
// and rejects unknown keys and missing seeds.
RunConfig load_config(const std::string& path);
RunConfig config_from_json_text(const std::string& text);
std::string config_to_json(const RunConfig& cfg);  // stable key order

// --- ingestion --------------------------------------------------------------

struct IngestInfo {
  std::string target_column;
  TargetTransform transform = TargetTransform::none;
  double add = 0.0;
  double div = 1.0;
  std::size_t dropped_rows = 0;  // listwise deletions (missing cells)
  bool standardized = false;
  std::vector<double> feature_means, feature_sds;  // when standardized
};

struct IngestResult {
  Dataset data;
  IngestInfo info;
};

// Header CSV -> regression dataset. Rows with missing (empty) cells are
// dropped and counted; non-numeric cells are a data error listing every
// offending line; an empty result is fatal.
IngestResult ingest_csv(const std::string& path, const CsvSource& spec);

// Dataset CSVs round-trip at 17 significant digits.
void write_dataset_csv(const Dataset& data, const std::string& path);
Dataset read_dataset_csv(const std::string& path);

// --- pipeline ---------------------------------------------------------------

struct PipelineResult {
  RunConfig config;
  Dataset data;
  IngestInfo ingest;  // meaningful for tabular runs
  modelselect::SelectionReport report;
  modelselect::LambdaSearch lambda;
  modelselect::MlpCvRecord benchmark;
  exprdsl::ComplexityMeasure full_r{exprdsl::ComplexityKind::total_params, 0,
                                    0};
  exprdsl::ComplexityMeasure benchmark_r{
      exprdsl::ComplexityKind::total_params, 0, 0};
  std::vector<int> full_widths, benchmark_widths;
  // winning candidate with its refit parameters installed
  exprdsl::CandidateModel selected_model;
  std::string selected_form;
  exprdsl::ComplexityMeasure selected_r{exprdsl::ComplexityKind::total_params,
                                        0, 0};
};

Dataset build_dataset(const RunConfig& cfg, IngestInfo* info = nullptr);
std::vector<exprdsl::CandidateModel> build_candidates(
    const RunConfig& cfg, std::size_t feature_count);

// generate/ingest -> cross-validate -> lambda search -> final selection and
// refit; pure computation, no files touched.
PipelineResult run_pipeline(const RunConfig& cfg);

// dataset.csv + report.csv + report.json (+ tabular heatmaps) under
// cfg.out_dir; returns the paths written. Byte-identical for identical runs.
std::vector<std::string> write_artifacts(const PipelineResult& result);

void write_report_csv(const PipelineResult& result, const std::string& path);
void write_report_json(const PipelineResult& result, const std::string& path);

// Exit-code policy shared by the executable and tests: 2 config, 3 data,
// 4 selection/training failure, 1 anything else.
int exit_code_for(const std::exception& e);

// --- heatmap grids ----------------------------------------------------------

struct HeatmapAxis {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
  int steps = 50;
};

// view: "full" (model output), "f1" (first layer over its slot inputs,
// axes z1/z2), or "f2_<j>" (1-based second-layer slot over its covariates).
// Omitted axes default to the observed data ranges of the view's inputs;
// non-axis inputs are held at their dataset means.
struct HeatmapRequest {
  std::string view = "full";
  std::optional<HeatmapAxis> x, y;
};

struct HeatmapGrid {
  std::string view;
  HeatmapAxis x, y;
  std::vector<double> values;  // y-major: values[iy * x.steps + ix]
};

HeatmapGrid emit_heatmap(const exprdsl::CandidateModel& model,
                         const Dataset& data, const HeatmapRequest& req);

// first row = x-axis values, first column = y-axis values, body = outputs
void write_heatmap_csv(const HeatmapGrid& grid, const std::string& path);

}  // namespace layerfit::pipeline
