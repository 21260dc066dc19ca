// Command-line front end: generate datasets, run the selection pipeline,
// redraw heatmaps from a finished run directory, and check the statistical
// oracles. Errors print one line to stderr; exit codes follow the shared
// policy (2 config, 3 data, 4 selection/training, 1 other).

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "layerfit/errors.hpp"
#include "layerfit/pipeline.hpp"
#include "layerfit/verify.hpp"

namespace {

namespace pl = layerfit::pipeline;
namespace fs = std::filesystem;

struct CommonOpts {
  std::string config_path;
  std::string study;
  std::uint64_t seed = 0;
  std::string out_dir;
  CLI::Option* config_opt = nullptr;
  CLI::Option* study_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* out_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  o.config_opt =
      cmd->add_option("--config", o.config_path, "JSON run configuration");
  o.study_opt = cmd->add_option(
      "--study", o.study, "study defaults (sim1|sim2|sim3|tabular)");
  o.seed_opt = cmd->add_option("--seed", o.seed, "run seed (overrides config)");
  o.out_opt =
      cmd->add_option("--out", o.out_dir, "output directory (overrides config)");
}

pl::RunConfig build_config(const CommonOpts& o) {
  pl::RunConfig cfg;
  if (o.config_opt->count()) {
    cfg = pl::load_config(o.config_path);
    if (o.study_opt->count() && pl::parse_study(o.study) != cfg.study)
      throw layerfit::config_error("--study conflicts with the study in '" +
                                   o.config_path + "'");
  } else if (o.study_opt->count()) {
    cfg = pl::default_config(pl::parse_study(o.study));
  } else {
    throw layerfit::config_error("pass --config FILE or --study NAME");
  }
  if (o.seed_opt->count()) cfg.seed = o.seed;
  if (o.out_opt->count()) cfg.out_dir = o.out_dir;
  return cfg;
}

int cmd_gen(const CommonOpts& o) {
  const pl::RunConfig cfg = build_config(o);
  pl::IngestInfo info;
  const layerfit::Dataset data = pl::build_dataset(cfg, &info);
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec)
    throw layerfit::data_error("cannot create output directory '" +
                               cfg.out_dir + "': " + ec.message());
  const std::string path = (fs::path(cfg.out_dir) / "dataset.csv").string();
  pl::write_dataset_csv(data, path);
  std::printf("wrote %s (%zu rows x %zu features", path.c_str(), data.rows,
              data.cols);
  if (info.dropped_rows)
    std::printf(", %zu incomplete rows dropped", info.dropped_rows);
  std::printf(")\n");
  return 0;
}

int cmd_run(const CommonOpts& o) {
  const pl::RunConfig cfg = build_config(o);
  const pl::PipelineResult res = pl::run_pipeline(cfg);
  const std::vector<std::string> paths = pl::write_artifacts(res);

  const auto& rep = res.report;
  const layerfit::modelselect::CandidateCvRecord* win = nullptr;
  for (const auto& rec : rep.records)
    if (rec.model_id == rep.selected_id) win = &rec;
  std::printf("study %s  seed %llu  rows %zu  candidates %zu\n",
              pl::study_name(cfg.study).c_str(),
              static_cast<unsigned long long>(cfg.seed), res.data.rows,
              rep.records.size());
  std::printf("lambda_opt %.2f  correlation %.6g%s\n", rep.lambda_opt,
              res.lambda.best_correlation,
              rep.tie_break_applied ? "  (tie broken)" : "");
  if (win) {
    std::printf("selected model %d: %s  (r %d, loss_cv_val %.6g)\n",
                rep.selected_id, win->form.c_str(), win->r.display,
                win->loss_cv_val);
    if (res.data.task == layerfit::Task::classification)
      std::printf("selected accuracy_cv_val %.4f  complex DNN %.4f\n",
                  win->acc_cv_val, rep.full.acc_cv_val);
  }
  std::printf("complex DNN loss_cv_val %.6g  benchmark loss_cv_val %.6g\n",
              rep.full.loss_cv_val, res.benchmark.loss_cv_val);
  for (const std::string& p : paths) std::printf("wrote %s\n", p.c_str());
  return 0;
}

int cmd_heatmap(const CommonOpts& o, const std::vector<std::string>& views) {
  // The run directory: --out wins, else the config file names it.
  std::string dir;
  if (o.out_opt->count())
    dir = o.out_dir;
  else if (o.config_opt->count())
    dir = pl::load_config(o.config_path).out_dir;
  else
    throw layerfit::config_error(
        "pass --out RUN_DIR (holding report.json and dataset.csv)");

  const std::string report_path = (fs::path(dir) / "report.json").string();
  std::ifstream is(report_path);
  if (!is) throw layerfit::data_error("cannot open '" + report_path + "'");
  nlohmann::ordered_json report;
  pl::RunConfig cfg;
  int selected_id = 0;
  std::vector<double> theta;
  try {
    report = nlohmann::ordered_json::parse(is);
    cfg = pl::config_from_json_text(report.at("config").dump());
    selected_id = report.at("selected").at("model_id").get<int>();
    theta = report.at("selected").at("theta").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw layerfit::data_error("'" + report_path +
                               "' is not a usable run report: " + e.what());
  }

  const layerfit::Dataset data =
      pl::read_dataset_csv((fs::path(dir) / "dataset.csv").string());
  const std::vector<layerfit::exprdsl::CandidateModel> candidates =
      pl::build_candidates(cfg, data.cols);
  layerfit::exprdsl::CandidateModel model;
  bool found = false;
  for (const auto& c : candidates)
    if (c.model_id == selected_id) {
      model = c;
      found = true;
    }
  if (!found)
    throw layerfit::data_error("selected model " +
                               std::to_string(selected_id) +
                               " is not in the candidate set");
  model.theta = theta;

  std::vector<std::string> wanted = views;
  if (wanted.empty()) {
    wanted = {"full", "f1"};
    for (std::size_t s = 0; s < model.second_layer.size(); ++s)
      wanted.push_back("f2_" + std::to_string(s + 1));
  }
  for (const std::string& view : wanted) {
    pl::HeatmapRequest req;
    req.view = view;
    pl::HeatmapAxis axis;  // empty name + zero range = view defaults
    axis.steps = cfg.heatmap_steps;
    req.x = axis;
    req.y = axis;
    const pl::HeatmapGrid grid = pl::emit_heatmap(model, data, req);
    const std::string path =
        (fs::path(dir) / ("heatmap_" + view + ".csv")).string();
    pl::write_heatmap_csv(grid, path);
    std::printf("wrote %s\n", path.c_str());
  }
  return 0;
}

int cmd_verify() {
  const std::vector<layerfit::verify::CheckResult> results =
      layerfit::verify::run_all_checks();
  bool all = true;
  for (const auto& r : results) {
    std::printf("%s %s — %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                r.detail.c_str());
    all = all && r.passed;
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"interpretable two-layer model selection"};
  app.require_subcommand(1);

  CLI::App* gen =
      app.add_subcommand("gen", "generate a study dataset (dataset.csv)");
  CommonOpts gen_o;
  add_common(gen, gen_o);

  CLI::App* run = app.add_subcommand(
      "run", "run the selection pipeline and write all artifacts");
  CommonOpts run_o;
  add_common(run, run_o);

  CLI::App* heat = app.add_subcommand(
      "heatmap", "redraw heatmaps from a finished run directory");
  CommonOpts heat_o;
  add_common(heat, heat_o);
  std::vector<std::string> views;
  heat->add_option("--view", views,
                   "views to draw (full, f1, f2_<slot>); default all");

  CLI::App* verify =
      app.add_subcommand("verify", "run the statistical oracle suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_o);
    if (run->parsed()) return cmd_run(run_o);
    if (heat->parsed()) return cmd_heatmap(heat_o, views);
    if (verify->parsed()) return cmd_verify();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return pl::exit_code_for(e);
  }
  return 0;
}
