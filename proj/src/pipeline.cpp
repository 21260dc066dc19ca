#include "layerfit/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "json.hpp"
#include "layerfit/csv.hpp"
#include "layerfit/errors.hpp"
#include "layerfit/rng.hpp"

namespace layerfit::pipeline {

namespace {

using nlohmann::ordered_json;

// --- enum <-> string --------------------------------------------------------

std::string transform_name(TargetTransform t) {
  switch (t) {
    case TargetTransform::none:
      return "none";
    case TargetTransform::affine:
      return "affine";
    case TargetTransform::log_affine:
      return "log_affine";
  }
  throw config_error("unknown target transform value");
}

TargetTransform parse_transform(const std::string& name) {
  if (name == "none") return TargetTransform::none;
  if (name == "affine") return TargetTransform::affine;
  if (name == "log_affine") return TargetTransform::log_affine;
  throw config_error("unknown csv.transform '" + name +
                     "' (expected none|affine|log_affine)");
}

std::string complexity_name(exprdsl::ComplexityKind k) {
  return k == exprdsl::ComplexityKind::total_params ? "total_params"
                                                    : "avg_params_per_layer";
}

exprdsl::ComplexityKind parse_complexity(const std::string& name) {
  if (name == "total_params") return exprdsl::ComplexityKind::total_params;
  if (name == "avg_params_per_layer")
    return exprdsl::ComplexityKind::avg_params_per_layer;
  throw config_error("unknown complexity '" + name +
                     "' (expected total_params|avg_params_per_layer)");
}

std::string correlation_name(modelselect::CorrelationKind k) {
  return k == modelselect::CorrelationKind::pearson ? "pearson" : "spearman";
}

modelselect::CorrelationKind parse_correlation(const std::string& name) {
  if (name == "pearson") return modelselect::CorrelationKind::pearson;
  if (name == "spearman") return modelselect::CorrelationKind::spearman;
  throw config_error("unknown correlation '" + name +
                     "' (expected pearson|spearman)");
}

std::string gng_mode_name(casestudies::GngInputMode m) {
  return m == casestudies::GngInputMode::original ? "original" : "intermediate";
}

casestudies::GngInputMode parse_gng_mode(const std::string& name) {
  if (name == "original") return casestudies::GngInputMode::original;
  if (name == "intermediate") return casestudies::GngInputMode::intermediate;
  throw config_error("unknown gng.input_mode '" + name +
                     "' (expected original|intermediate)");
}

// --- JSON plumbing ----------------------------------------------------------

ordered_json mlp_to_json(const MlpSettings& s) {
  return {{"hidden", s.hidden},
          {"dropout", s.dropout},
          {"epochs", s.epochs},
          {"batch_size", s.batch_size},
          {"learning_rate", s.learning_rate}};
}

// Overlay src onto dst, refusing keys the schema does not know and scalar
// writes into object-valued keys (and vice versa).
void merge_strict(ordered_json& dst, const ordered_json& src,
                  const std::string& prefix) {
  for (const auto& [key, value] : src.items()) {
    if (!dst.contains(key))
      throw config_error("unknown config key '" + prefix + key + "'");
    ordered_json& slot = dst[key];
    if (slot.is_object()) {
      if (!value.is_object())
        throw config_error("config key '" + prefix + key +
                           "' must be an object");
      merge_strict(slot, value, prefix + key + ".");
    } else {
      if (value.is_object())
        throw config_error("config key '" + prefix + key +
                           "' must be a value");
      slot = value;
    }
  }
}

// Typed field access over the merged document; every key exists because the
// merge started from a complete default echo, so only types can be wrong.
struct Reader {
  const ordered_json* j;
  std::string prefix;

  [[noreturn]] void bad(const char* key, const char* want) const {
    throw config_error("config key '" + prefix + key + "' must be " + want);
  }
  const ordered_json& at(const char* key) const { return j->at(key); }
  Reader sub(const char* key) const { return {&at(key), prefix + key + "."}; }

  std::string str(const char* key) const {
    const ordered_json& v = at(key);
    if (!v.is_string()) bad(key, "a string");
    return v.get<std::string>();
  }
  bool flag(const char* key) const {
    const ordered_json& v = at(key);
    if (!v.is_boolean()) bad(key, "true or false");
    return v.get<bool>();
  }
  double num(const char* key) const {
    const ordered_json& v = at(key);
    if (!v.is_number()) bad(key, "a number");
    return v.get<double>();
  }
  long long integer(const char* key) const {
    const ordered_json& v = at(key);
    if (!v.is_number_integer()) bad(key, "an integer");
    return v.get<long long>();
  }
  long long nonneg(const char* key) const {
    const long long v = integer(key);
    if (v < 0) bad(key, "a nonnegative integer");
    return v;
  }
  std::vector<int> int_list(const char* key) const {
    const ordered_json& v = at(key);
    if (!v.is_array()) bad(key, "an array of integers");
    std::vector<int> out;
    for (const ordered_json& e : v) {
      if (!e.is_number_integer()) bad(key, "an array of integers");
      out.push_back(e.get<int>());
    }
    return out;
  }
};

void read_mlp(const Reader& r, MlpSettings& s) {
  s.hidden = r.int_list("hidden");
  s.dropout = r.num("dropout");
  s.epochs = static_cast<int>(r.integer("epochs"));
  s.batch_size = static_cast<int>(r.integer("batch_size"));
  s.learning_rate = r.num("learning_rate");
}

RunConfig config_from_merged(const ordered_json& merged) {
  Reader r{&merged, ""};
  RunConfig cfg = default_config(parse_study(r.str("study")));
  cfg.seed = static_cast<std::uint64_t>(r.nonneg("seed"));
  cfg.out_dir = r.str("out_dir");
  cfg.rows = static_cast<std::size_t>(r.nonneg("rows"));
  cfg.folds = static_cast<int>(r.integer("folds"));
  cfg.j = static_cast<int>(r.integer("j"));
  cfg.subset_size = static_cast<int>(r.integer("subset_size"));
  cfg.f1_family = r.str("f1_family");
  cfg.f2_family = r.str("f2_family");
  cfg.complexity = parse_complexity(r.str("complexity"));
  {
    Reader g = r.sub("lambda_grid");
    cfg.lambda_grid.min = g.num("min");
    cfg.lambda_grid.max = g.num("max");
    cfg.lambda_grid.step = g.num("step");
  }
  cfg.correlation = parse_correlation(r.str("correlation"));
  {
    Reader f = r.sub("fit");
    cfg.fit.learning_rate = f.num("learning_rate");
    cfg.fit.iterations = static_cast<int>(f.integer("iterations"));
    cfg.fit.restarts = static_cast<int>(f.integer("restarts"));
    cfg.fit.init_scale = f.num("init_scale");
  }
  {
    Reader m = r.sub("full_mlp");
    read_mlp(m, cfg.full_mlp);
  }
  {
    Reader m = r.sub("benchmark_mlp");
    read_mlp(m, cfg.benchmark_mlp);
  }
  cfg.threads = static_cast<unsigned>(r.nonneg("threads"));
  cfg.heatmap_steps = static_cast<int>(r.integer("heatmap_steps"));
  {
    Reader t = r.sub("trial");
    cfg.trial.mu0_lo = t.num("mu0_lo");
    cfg.trial.mu0_hi = t.num("mu0_hi");
    cfg.trial.alpha_lo = t.num("alpha_lo");
    cfg.trial.alpha_hi = t.num("alpha_hi");
    cfg.trial.n1_lo = static_cast<int>(t.integer("n1_lo"));
    cfg.trial.n1_hi = static_cast<int>(t.integer("n1_hi"));
    cfg.trial.delta = t.num("delta");
    cfg.trial.sigma_t = t.num("sigma_t");
    cfg.trial.sigma_p = t.num("sigma_p");
    cfg.trial.mc_reps = static_cast<int>(t.integer("mc_reps"));
  }
  {
    Reader g = r.sub("gng");
    cfg.gng.n = static_cast<int>(g.integer("n"));
    cfg.gng.q_a = g.num("q_a");
    cfg.gng.q_b = g.num("q_b");
    cfg.gng.tau_min = g.num("tau_min");
    cfg.gng.tau_base = g.num("tau_base");
    cfg.gng.tmin_lo = g.num("tmin_lo");
    cfg.gng.tmin_hi = g.num("tmin_hi");
    cfg.gng.tbase_add_lo = g.num("tbase_add_lo");
    cfg.gng.tbase_add_hi = g.num("tbase_add_hi");
    cfg.gng.q0_lo = g.num("q0_lo");
    cfg.gng.q0_hi = g.num("q0_hi");
    cfg.gng_mode = parse_gng_mode(g.str("input_mode"));
  }
  {
    Reader f = r.sub("fisher");
    cfg.fisher.n = static_cast<int>(f.integer("n"));
    cfg.fisher.alpha_level = f.num("alpha_level");
    cfg.fisher_exhaustive = f.flag("exhaustive");
  }
  {
    Reader c = r.sub("csv");
    cfg.csv.path = c.str("path");
    cfg.csv.target_column = c.str("target_column");
    cfg.csv.transform = parse_transform(c.str("transform"));
    cfg.csv.add = c.num("add");
    cfg.csv.div = c.num("div");
    cfg.csv.standardize = c.flag("standardize");
  }
  return cfg;
}

// Cheap structural checks before any expensive work; numeric training
// parameters are validated by the optimizer and network they configure.
void validate_config(const RunConfig& cfg) {
  if (cfg.folds < 2)
    throw config_error("cross-validation needs at least 2 folds");
  if (cfg.j < 1) throw config_error("second layer needs at least one slot");
  if (cfg.subset_size != -1 && cfg.subset_size < 1)
    throw config_error("subset_size must be positive, or -1 for all features");
  if (cfg.heatmap_steps < 1)
    throw config_error("heatmap_steps must be at least 1");
  if (cfg.full_mlp.hidden.empty() || cfg.benchmark_mlp.hidden.empty())
    throw config_error("networks need at least one hidden layer");
  const bool generated =
      cfg.study != Study::tabular &&
      !(cfg.study == Study::sim3 && cfg.fisher_exhaustive);
  if (generated && cfg.rows == 0) throw config_error("rows must be positive");
  if (cfg.study == Study::tabular) {
    if (cfg.csv.path.empty())
      throw config_error("tabular study needs csv.path");
    if (cfg.csv.transform != TargetTransform::none && cfg.csv.div == 0.0)
      throw config_error("csv.div must be nonzero");
  }
}

// --- numeric cell parsing ---------------------------------------------------

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

// Strict finite-number parse; a leading '+' is tolerated, anything else
// partial or nonfinite is rejected.
bool parse_number(const std::string& field, double& out) {
  const char* b = field.data();
  const char* e = b + field.size();
  if (b != e && *b == '+') ++b;
  if (b == e) return false;
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e && std::isfinite(out);
}

std::string line_list(const std::vector<std::size_t>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(lines[i]);
  }
  return out;
}

}  // namespace

// --- study names ------------------------------------------------------------

std::string study_name(Study s) {
  switch (s) {
    case Study::sim1:
      return "sim1";
    case Study::sim2:
      return "sim2";
    case Study::sim3:
      return "sim3";
    case Study::tabular:
      return "tabular";
  }
  throw config_error("unknown study enum value");
}

Study parse_study(const std::string& name) {
  if (name == "sim1") return Study::sim1;
  if (name == "sim2") return Study::sim2;
  if (name == "sim3") return Study::sim3;
  if (name == "tabular") return Study::tabular;
  throw config_error("unknown study '" + name +
                     "' (expected sim1|sim2|sim3|tabular)");
}

// --- defaults and config I/O ------------------------------------------------

RunConfig default_config(Study study) {
  RunConfig cfg;
  cfg.study = study;
  // Rank correlation reproduces the published lambda choice; the raw losses
  // span two orders of magnitude, which pins Pearson near 1 at every lambda.
  cfg.correlation = modelselect::CorrelationKind::spearman;
  cfg.full_mlp.hidden = {60, 60};
  cfg.full_mlp.dropout = 0.2;
  cfg.benchmark_mlp.hidden = {2};
  switch (study) {
    case Study::sim1:
      cfg.f1_family = "sim1.f1";
      cfg.f2_family = "sim1.f2";
      break;
    case Study::sim2:
      cfg.f1_family = "sim1.f1";
      cfg.f2_family = "sim2.f2";
      break;
    case Study::sim3:
      cfg.f1_family = "sim3.f1";
      cfg.f2_family = "sim3.f2";
      cfg.complexity = exprdsl::ComplexityKind::avg_params_per_layer;
      cfg.fit.loss = optim::Loss::cross_entropy;
      cfg.full_mlp.learning_rate = 0.0005;
      break;
    case Study::tabular:
      cfg.folds = 4;
      cfg.f1_family = "nhanes.f1";
      cfg.f2_family = "nhanes.f2";
      cfg.subset_size = 2;
      cfg.csv.transform = TargetTransform::log_affine;
      cfg.csv.add = 3.0;
      cfg.csv.div = 14.0;
      cfg.csv.standardize = true;
      break;
  }
  return cfg;
}

std::string config_to_json(const RunConfig& cfg) {
  ordered_json j;
  j["study"] = study_name(cfg.study);
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  j["rows"] = cfg.rows;
  j["folds"] = cfg.folds;
  j["j"] = cfg.j;
  j["subset_size"] = cfg.subset_size;
  j["f1_family"] = cfg.f1_family;
  j["f2_family"] = cfg.f2_family;
  j["complexity"] = complexity_name(cfg.complexity);
  j["lambda_grid"] = {{"min", cfg.lambda_grid.min},
                      {"max", cfg.lambda_grid.max},
                      {"step", cfg.lambda_grid.step}};
  j["correlation"] = correlation_name(cfg.correlation);
  j["fit"] = {{"learning_rate", cfg.fit.learning_rate},
              {"iterations", cfg.fit.iterations},
              {"restarts", cfg.fit.restarts},
              {"init_scale", cfg.fit.init_scale}};
  j["full_mlp"] = mlp_to_json(cfg.full_mlp);
  j["benchmark_mlp"] = mlp_to_json(cfg.benchmark_mlp);
  j["threads"] = cfg.threads;
  j["heatmap_steps"] = cfg.heatmap_steps;
  j["trial"] = {{"mu0_lo", cfg.trial.mu0_lo},
                {"mu0_hi", cfg.trial.mu0_hi},
                {"alpha_lo", cfg.trial.alpha_lo},
                {"alpha_hi", cfg.trial.alpha_hi},
                {"n1_lo", cfg.trial.n1_lo},
                {"n1_hi", cfg.trial.n1_hi},
                {"delta", cfg.trial.delta},
                {"sigma_t", cfg.trial.sigma_t},
                {"sigma_p", cfg.trial.sigma_p},
                {"mc_reps", cfg.trial.mc_reps}};
  j["gng"] = {{"n", cfg.gng.n},
              {"q_a", cfg.gng.q_a},
              {"q_b", cfg.gng.q_b},
              {"tau_min", cfg.gng.tau_min},
              {"tau_base", cfg.gng.tau_base},
              {"tmin_lo", cfg.gng.tmin_lo},
              {"tmin_hi", cfg.gng.tmin_hi},
              {"tbase_add_lo", cfg.gng.tbase_add_lo},
              {"tbase_add_hi", cfg.gng.tbase_add_hi},
              {"q0_lo", cfg.gng.q0_lo},
              {"q0_hi", cfg.gng.q0_hi},
              {"input_mode", gng_mode_name(cfg.gng_mode)}};
  j["fisher"] = {{"n", cfg.fisher.n},
                 {"alpha_level", cfg.fisher.alpha_level},
                 {"exhaustive", cfg.fisher_exhaustive}};
  j["csv"] = {{"path", cfg.csv.path},
              {"target_column", cfg.csv.target_column},
              {"transform", transform_name(cfg.csv.transform)},
              {"add", cfg.csv.add},
              {"div", cfg.csv.div},
              {"standardize", cfg.csv.standardize}};
  return j.dump(2) + "\n";
}

RunConfig config_from_json_text(const std::string& text) {
  ordered_json file;
  try {
    file = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("config parse: ") + e.what());
  }
  if (!file.is_object())
    throw config_error("config root must be a JSON object");
  if (!file.contains("study") || !file["study"].is_string())
    throw config_error("config must name a study (sim1|sim2|sim3|tabular)");
  if (!file.contains("seed")) throw config_error("config must pin a seed");
  const RunConfig defaults =
      default_config(parse_study(file["study"].get<std::string>()));
  ordered_json merged = ordered_json::parse(config_to_json(defaults));
  merge_strict(merged, file, "");
  return config_from_merged(merged);
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw config_error("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  return config_from_json_text(buf.str());
}

// --- ingestion --------------------------------------------------------------

IngestResult ingest_csv(const std::string& path, const CsvSource& spec) {
  std::ifstream is(path);
  if (!is) throw data_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(is, line) || trim(line).empty())
    throw data_error("'" + path + "' has no header line");
  std::vector<std::string> header = csv::split_line(line);
  for (std::string& h : header) {
    h = trim(h);
    if (h.empty())
      throw data_error("'" + path + "' has an empty column name");
  }
  if (header.size() < 2)
    throw data_error("'" + path +
                     "' needs at least one feature and one target column");

  std::size_t tcol = header.size() - 1;
  if (!spec.target_column.empty()) {
    auto it = std::find(header.begin(), header.end(), spec.target_column);
    if (it == header.end())
      throw config_error("target column '" + spec.target_column +
                         "' not found in '" + path + "'");
    tcol = static_cast<std::size_t>(it - header.begin());
  }
  if (spec.transform != TargetTransform::none && spec.div == 0.0)
    throw config_error("csv.div must be nonzero");

  std::vector<std::vector<double>> kept;  // all columns, header order
  std::vector<std::size_t> kept_lines;    // source line of each kept row
  std::vector<std::size_t> bad_lines;     // non-numeric or ragged rows
  std::size_t dropped = 0;
  std::size_t lineno = 1;
  std::vector<double> rowbuf;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = csv::split_line(line);
    if (fields.size() != header.size()) {
      bad_lines.push_back(lineno);
      continue;
    }
    bool missing = false, bad = false;
    rowbuf.clear();
    for (const std::string& f : fields) {
      const std::string cell = trim(f);
      double v = 0.0;
      if (cell.empty())
        missing = true;
      else if (!parse_number(cell, v))
        bad = true;
      rowbuf.push_back(v);
    }
    if (bad) {
      bad_lines.push_back(lineno);
    } else if (missing) {
      ++dropped;  // listwise deletion
    } else {
      kept.push_back(rowbuf);
      kept_lines.push_back(lineno);
    }
  }
  if (!bad_lines.empty())
    throw data_error("'" + path + "' has non-numeric rows at line(s) " +
                     line_list(bad_lines));
  if (kept.empty())
    throw data_error("'" + path + "' has no complete data rows");

  Dataset d;
  d.task = Task::regression;
  d.rows = kept.size();
  d.cols = header.size() - 1;
  d.target_width = 1;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != tcol) d.feature_names.push_back(header[c]);
  d.target_names = {header[tcol]};
  d.features.reserve(d.rows * d.cols);
  d.targets.reserve(d.rows);
  std::vector<std::size_t> nonpositive;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (c != tcol) d.features.push_back(kept[i][c]);
    double y = kept[i][tcol];
    switch (spec.transform) {
      case TargetTransform::none:
        break;
      case TargetTransform::affine:
        y = (y + spec.add) / spec.div;
        break;
      case TargetTransform::log_affine:
        if (y <= 0.0) {
          nonpositive.push_back(kept_lines[i]);
          y = 0.0;
        } else {
          y = (std::log(y) + spec.add) / spec.div;
        }
        break;
    }
    d.targets.push_back(y);
  }
  if (!nonpositive.empty())
    throw data_error("'" + path +
                     "' log transform needs positive targets; offending "
                     "line(s) " +
                     line_list(nonpositive));

  IngestInfo info;
  info.target_column = header[tcol];
  info.transform = spec.transform;
  info.add = spec.add;
  info.div = spec.div;
  info.dropped_rows = dropped;
  if (spec.standardize) {
    if (d.rows < 2)
      throw data_error("standardization needs at least two rows");
    info.standardized = true;
    info.feature_means.resize(d.cols);
    info.feature_sds.resize(d.cols);
    for (std::size_t c = 0; c < d.cols; ++c) {
      double mean = 0.0;
      for (std::size_t i = 0; i < d.rows; ++i)
        mean += d.features[i * d.cols + c];
      mean /= static_cast<double>(d.rows);
      double ss = 0.0;
      for (std::size_t i = 0; i < d.rows; ++i) {
        const double dv = d.features[i * d.cols + c] - mean;
        ss += dv * dv;
      }
      const double sd = std::sqrt(ss / static_cast<double>(d.rows - 1));
      if (sd == 0.0)
        throw data_error("column '" + d.feature_names[c] +
                         "' is constant and cannot be standardized");
      for (std::size_t i = 0; i < d.rows; ++i) {
        double& v = d.features[i * d.cols + c];
        v = (v - mean) / sd;
      }
      info.feature_means[c] = mean;
      info.feature_sds[c] = sd;
    }
  }
  return {std::move(d), std::move(info)};
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw data_error("cannot write '" + path + "'");
  std::vector<std::string> fields = data.feature_names;
  fields.insert(fields.end(), data.target_names.begin(),
                data.target_names.end());
  os << csv::join(fields) << '\n';
  for (std::size_t i = 0; i < data.rows; ++i) {
    fields.clear();
    for (std::size_t c = 0; c < data.cols; ++c)
      fields.push_back(csv::format_double(data.features[i * data.cols + c]));
    for (std::size_t t = 0; t < data.target_width; ++t)
      fields.push_back(
          csv::format_double(data.targets[i * data.target_width + t]));
    os << csv::join(fields) << '\n';
  }
  os.flush();
  if (!os) throw data_error("write failed for '" + path + "'");
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw data_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(is, line) || trim(line).empty())
    throw data_error("'" + path + "' has no header line");
  std::vector<std::string> header = csv::split_line(line);
  for (std::string& h : header) h = trim(h);
  const std::size_t n = header.size();
  const bool classification =
      n >= 3 && header[n - 2] == "y0" && header[n - 1] == "y1";
  Dataset d;
  d.task = classification ? Task::classification : Task::regression;
  d.target_width = classification ? 2 : 1;
  if (n < d.target_width + 1)
    throw data_error("'" + path +
                     "' needs at least one feature and one target column");
  d.cols = n - d.target_width;
  d.feature_names.assign(header.begin(), header.begin() + d.cols);
  d.target_names.assign(header.begin() + d.cols, header.end());

  std::vector<std::size_t> bad_lines;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = csv::split_line(line);
    if (fields.size() != n) {
      bad_lines.push_back(lineno);
      continue;
    }
    bool bad = false;
    std::vector<double> row(n);
    for (std::size_t c = 0; c < n; ++c)
      if (!parse_number(trim(fields[c]), row[c])) bad = true;
    if (bad) {
      bad_lines.push_back(lineno);
      continue;
    }
    d.features.insert(d.features.end(), row.begin(), row.begin() + d.cols);
    d.targets.insert(d.targets.end(), row.begin() + d.cols, row.end());
    ++d.rows;
  }
  if (!bad_lines.empty())
    throw data_error("'" + path + "' has non-numeric rows at line(s) " +
                     line_list(bad_lines));
  if (d.rows == 0) throw data_error("'" + path + "' has no data rows");
  return d;
}

// --- pipeline ---------------------------------------------------------------

Dataset build_dataset(const RunConfig& cfg, IngestInfo* info) {
  const std::uint64_t gen_seed = derive_seed(cfg.seed, 301);
  switch (cfg.study) {
    case Study::sim1:
      return casestudies::gen_trial_dataset(cfg.rows, cfg.trial, gen_seed);
    case Study::sim2:
      return casestudies::gng_dataset(cfg.rows, cfg.gng, cfg.gng_mode,
                                      gen_seed);
    case Study::sim3:
      if (cfg.fisher_exhaustive)
        return casestudies::fisher_dataset_exhaustive(cfg.fisher);
      return casestudies::fisher_dataset(cfg.rows, cfg.fisher, gen_seed);
    case Study::tabular: {
      if (cfg.csv.path.empty())
        throw config_error("tabular study needs csv.path");
      IngestResult r = ingest_csv(cfg.csv.path, cfg.csv);
      if (info) *info = r.info;
      return std::move(r.data);
    }
  }
  throw config_error("unknown study enum value");
}

std::vector<exprdsl::CandidateModel> build_candidates(
    const RunConfig& cfg, std::size_t feature_count) {
  exprdsl::EnumerationSpec spec;
  spec.f1_set = exprdsl::builtin_family(cfg.f1_family);
  spec.f2_set = exprdsl::builtin_family(cfg.f2_family);
  spec.J = cfg.j;
  spec.mode = exprdsl::PairMode::distinct_pairs;
  spec.covariate_pool.resize(feature_count);
  std::iota(spec.covariate_pool.begin(), spec.covariate_pool.end(), 0);
  spec.subset_size = cfg.subset_size;
  spec.link = cfg.study == Study::sim3 ? exprdsl::OutputLink::softmax_pair
                                       : exprdsl::OutputLink::identity;
  return exprdsl::enumerate_candidates(spec);
}

namespace {

mlpnet::MlpSpec make_mlp_spec(const MlpSettings& s, const Dataset& data,
                              std::uint64_t seed) {
  mlpnet::MlpSpec spec;
  spec.layer_widths.push_back(static_cast<int>(data.cols));
  for (int h : s.hidden) spec.layer_widths.push_back(h);
  spec.layer_widths.push_back(static_cast<int>(data.target_width));
  spec.output_activation = data.task == Task::classification
                               ? mlpnet::OutputActivation::softmax
                               : mlpnet::OutputActivation::sigmoid;
  spec.dropout_rate = s.dropout;
  spec.epochs = s.epochs;
  spec.batch_size = s.batch_size;
  spec.learning_rate = s.learning_rate;
  spec.seed = seed;
  return spec;
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& cfg) {
  validate_config(cfg);
  PipelineResult out;
  out.config = cfg;
  out.data = build_dataset(cfg, &out.ingest);
  const std::vector<exprdsl::CandidateModel> candidates =
      build_candidates(cfg, out.data.cols);

  const modelselect::CvPlan plan = modelselect::make_cv_plan(
      out.data.rows, cfg.folds, derive_seed(cfg.seed, 302));

  optim::FitConfig fit = cfg.fit;
  fit.loss = cfg.study == Study::sim3 ? optim::Loss::cross_entropy
                                      : optim::Loss::mse;
  fit.seed = derive_seed(cfg.seed, 303);

  const mlpnet::MlpSpec full =
      make_mlp_spec(cfg.full_mlp, out.data, derive_seed(cfg.seed, 304));
  const mlpnet::MlpSpec bench =
      make_mlp_spec(cfg.benchmark_mlp, out.data, derive_seed(cfg.seed, 305));

  modelselect::CvOptions opts;
  opts.complexity = cfg.complexity;
  opts.max_threads = cfg.threads;

  const modelselect::CvResult cv =
      modelselect::cross_validate(candidates, full, out.data, plan, fit, opts);
  out.lambda =
      modelselect::lambda_search(cv.records, cv.full, cfg.lambda_grid,
                                 cfg.correlation);
  out.report = modelselect::select_final(candidates, cv, out.lambda.lambda_opt,
                                         out.data, fit);
  out.benchmark =
      modelselect::cross_validate_mlp(bench, out.data, plan, cfg.threads);

  out.full_r = mlpnet::complexity(full, cfg.complexity);
  out.benchmark_r = mlpnet::complexity(bench, cfg.complexity);
  out.full_widths = full.layer_widths;
  out.benchmark_widths = bench.layer_widths;

  for (const exprdsl::CandidateModel& c : candidates)
    if (c.model_id == out.report.selected_id) out.selected_model = c;
  out.selected_model.theta = out.report.selected_theta;
  for (const modelselect::CandidateCvRecord& rec : out.report.records)
    if (rec.model_id == out.report.selected_id) {
      out.selected_form = rec.form;
      out.selected_r = rec.r;
    }
  return out;
}

// --- report writers ---------------------------------------------------------

namespace {

std::string mlp_label(const std::vector<int>& widths) {
  std::string out = "mlp ";
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i) out.push_back('-');
    out += std::to_string(widths[i]);
  }
  return out;
}

std::string quoted(const std::string& s) { return '"' + s + '"'; }

// JSON null for nonfinite values so the artifact stays valid JSON.
ordered_json jnum(double v) {
  return std::isfinite(v) ? ordered_json(v) : ordered_json();
}

ordered_json complexity_json(const exprdsl::ComplexityMeasure& r) {
  return {{"kind", complexity_name(r.kind)},
          {"exact", r.value},
          {"display", r.display}};
}

}  // namespace

void write_report_csv(const PipelineResult& res, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw data_error("cannot write '" + path + "'");
  const bool cls = res.data.task == Task::classification;
  std::vector<std::string> fields = {"model_id", "form",  "r",
                                     "loss_cv",  "loss_cv_val", "mc_cv",
                                     "mc_cv_val"};
  if (cls) {
    fields.push_back("acc_cv");
    fields.push_back("acc_cv_val");
  }
  os << csv::join(fields) << '\n';

  auto emit = [&](const std::string& id, const std::string& form, int r_disp,
                  double loss, double loss_val, double mc, double mc_val,
                  double acc, double acc_val) {
    fields = {id,
              quoted(form),
              std::to_string(r_disp),
              csv::format_double(loss),
              csv::format_double(loss_val),
              csv::format_double(mc),
              csv::format_double(mc_val)};
    if (cls) {
      fields.push_back(csv::format_double(acc));
      fields.push_back(csv::format_double(acc_val));
    }
    os << csv::join(fields) << '\n';
  };

  const modelselect::SelectionReport& rep = res.report;
  for (std::size_t i = 0; i < rep.records.size(); ++i) {
    const modelselect::CandidateCvRecord& rec = rep.records[i];
    emit(std::to_string(rec.model_id), rec.form, rec.r.display, rec.loss_cv,
         rec.loss_cv_val, rep.mc_cv[i], rep.mc_cv_val[i], rec.acc_cv,
         rec.acc_cv_val);
  }
  const double lam = rep.lambda_opt;
  emit("Benchmark", mlp_label(res.benchmark_widths), res.benchmark_r.display,
       res.benchmark.loss_cv, res.benchmark.loss_cv_val,
       modelselect::mc_statistic(res.benchmark.loss_cv, rep.full.loss_cv, lam,
                                 res.benchmark_r.value),
       modelselect::mc_statistic(res.benchmark.loss_cv_val,
                                 rep.full.loss_cv_val, lam,
                                 res.benchmark_r.value),
       res.benchmark.acc_cv, res.benchmark.acc_cv_val);
  emit("Complex DNN", mlp_label(res.full_widths), res.full_r.display,
       rep.full.loss_cv, rep.full.loss_cv_val,
       modelselect::mc_statistic(rep.full.loss_cv, rep.full.loss_cv, lam,
                                 res.full_r.value),
       modelselect::mc_statistic(rep.full.loss_cv_val, rep.full.loss_cv_val,
                                 lam, res.full_r.value),
       rep.full.acc_cv, rep.full.acc_cv_val);
  os.flush();
  if (!os) throw data_error("write failed for '" + path + "'");
}

void write_report_json(const PipelineResult& res, const std::string& path) {
  const bool cls = res.data.task == Task::classification;
  const modelselect::SelectionReport& rep = res.report;
  ordered_json root;
  root["study"] = study_name(res.config.study);
  root["seed"] = res.config.seed;
  root["lambda_opt"] = rep.lambda_opt;
  root["best_correlation"] = jnum(res.lambda.best_correlation);

  std::size_t sel = rep.records.size();
  for (std::size_t i = 0; i < rep.records.size(); ++i)
    if (rep.records[i].model_id == rep.selected_id) sel = i;
  if (sel == rep.records.size())
    throw selection_error("selected model has no cross-validation record");
  const modelselect::CandidateCvRecord& win = rep.records[sel];

  ordered_json selected;
  selected["model_id"] = rep.selected_id;
  selected["form"] = win.form;
  selected["r"] = complexity_json(win.r);
  selected["theta"] = rep.selected_theta;
  selected["train_loss"] = jnum(rep.selected_train_loss);
  selected["loss_cv"] = jnum(win.loss_cv);
  selected["loss_cv_val"] = jnum(win.loss_cv_val);
  selected["mc_cv"] = jnum(rep.mc_cv[sel]);
  selected["mc_cv_val"] = jnum(rep.mc_cv_val[sel]);
  if (cls) {
    selected["acc_cv"] = jnum(win.acc_cv);
    selected["acc_cv_val"] = jnum(win.acc_cv_val);
  }
  selected["tie_break_applied"] = rep.tie_break_applied;
  root["selected"] = selected;

  auto mlp_json = [&](const std::vector<int>& widths,
                      const exprdsl::ComplexityMeasure& r,
                      const modelselect::MlpCvRecord& rec) {
    ordered_json m;
    m["widths"] = widths;
    m["r"] = complexity_json(r);
    m["loss_cv"] = jnum(rec.loss_cv);
    m["loss_cv_val"] = jnum(rec.loss_cv_val);
    if (cls) {
      m["acc_cv"] = jnum(rec.acc_cv);
      m["acc_cv_val"] = jnum(rec.acc_cv_val);
    }
    return m;
  };
  root["full_model"] = mlp_json(res.full_widths, res.full_r, rep.full);
  root["benchmark"] = mlp_json(res.benchmark_widths, res.benchmark_r,
                               res.benchmark);

  ordered_json cands = ordered_json::array();
  for (std::size_t i = 0; i < rep.records.size(); ++i) {
    const modelselect::CandidateCvRecord& rec = rep.records[i];
    ordered_json c;
    c["model_id"] = rec.model_id;
    c["form"] = rec.form;
    c["r"] = complexity_json(rec.r);
    c["feasible"] = rec.feasible;
    c["loss_cv"] = jnum(rec.loss_cv);
    c["loss_cv_val"] = jnum(rec.loss_cv_val);
    c["mc_cv"] = jnum(rep.mc_cv[i]);
    c["mc_cv_val"] = jnum(rep.mc_cv_val[i]);
    if (cls) {
      c["acc_cv"] = jnum(rec.acc_cv);
      c["acc_cv_val"] = jnum(rec.acc_cv_val);
    }
    cands.push_back(c);
  }
  root["candidates"] = cands;
  root["dropped_rows"] = res.ingest.dropped_rows;
  if (res.config.study == Study::tabular) {
    ordered_json ing;
    ing["target_column"] = res.ingest.target_column;
    ing["transform"] = transform_name(res.ingest.transform);
    ing["add"] = res.ingest.add;
    ing["div"] = res.ingest.div;
    ing["standardized"] = res.ingest.standardized;
    ing["feature_means"] = res.ingest.feature_means;
    ing["feature_sds"] = res.ingest.feature_sds;
    root["ingest"] = ing;
  }
  root["config"] = ordered_json::parse(config_to_json(res.config));

  std::ofstream os(path);
  if (!os) throw data_error("cannot write '" + path + "'");
  os << root.dump(2) << '\n';
  os.flush();
  if (!os) throw data_error("write failed for '" + path + "'");
}

std::vector<std::string> write_artifacts(const PipelineResult& res) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(res.config.out_dir, ec);
  if (ec)
    throw data_error("cannot create output directory '" + res.config.out_dir +
                     "': " + ec.message());
  auto at = [&](const std::string& name) {
    return (fs::path(res.config.out_dir) / name).string();
  };
  std::vector<std::string> paths;
  write_dataset_csv(res.data, at("dataset.csv"));
  paths.push_back(at("dataset.csv"));
  write_report_csv(res, at("report.csv"));
  paths.push_back(at("report.csv"));
  write_report_json(res, at("report.json"));
  paths.push_back(at("report.json"));
  if (res.config.study == Study::tabular) {
    std::vector<std::string> views = {"full", "f1"};
    for (std::size_t s = 0; s < res.selected_model.second_layer.size(); ++s)
      views.push_back("f2_" + std::to_string(s + 1));
    for (const std::string& view : views) {
      HeatmapRequest req;
      req.view = view;
      HeatmapAxis axis;  // empty name + zero range = view defaults
      axis.steps = res.config.heatmap_steps;
      req.x = axis;
      req.y = axis;
      const HeatmapGrid grid =
          emit_heatmap(res.selected_model, res.data, req);
      const std::string name = "heatmap_" + view + ".csv";
      write_heatmap_csv(grid, at(name));
      paths.push_back(at(name));
    }
  }
  return paths;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const config_error*>(&e)) return 2;
  if (dynamic_cast<const data_error*>(&e)) return 3;
  if (dynamic_cast<const eval_error*>(&e)) return 3;
  if (dynamic_cast<const selection_error*>(&e)) return 4;
  if (dynamic_cast<const fit_failure*>(&e)) return 4;
  if (dynamic_cast<const train_failure*>(&e)) return 4;
  return 1;
}

// --- heatmaps ---------------------------------------------------------------

namespace {

std::vector<double> linspace(const HeatmapAxis& a) {
  if (a.steps < 1)
    throw config_error("heatmap axis '" + a.name +
                       "' needs at least one step");
  if (!(a.lo <= a.hi))
    throw config_error("heatmap axis '" + a.name + "' has lo > hi");
  std::vector<double> v(static_cast<std::size_t>(a.steps));
  if (a.steps == 1) {
    v[0] = a.lo;
    return v;
  }
  for (int i = 0; i < a.steps; ++i)
    v[static_cast<std::size_t>(i)] =
        i == a.steps - 1 ? a.hi : a.lo + (a.hi - a.lo) * i / (a.steps - 1);
  return v;
}

// A view exposes named inputs with observed ranges; the two grid axes are
// chosen among them and everything else is pinned to the listed hold value.
struct ViewInputs {
  std::vector<std::string> names;
  std::vector<double> lo, hi;
  std::vector<double> hold;  // value for inputs that are not an axis
};

int resolve_input(const ViewInputs& in, const std::string& name,
                  const std::string& view) {
  for (std::size_t i = 0; i < in.names.size(); ++i)
    if (in.names[i] == name) return static_cast<int>(i);
  std::string valid;
  for (std::size_t i = 0; i < in.names.size(); ++i) {
    if (i) valid += "|";
    valid += in.names[i];
  }
  throw config_error("axis '" + name + "' is not an input of view '" + view +
                     "' (expected " + valid + ")");
}

// Fill one axis: index defaults positionally, an empty range ([0,0]) defaults
// to the observed range of the resolved input.
std::pair<int, HeatmapAxis> resolve_axis(const ViewInputs& in,
                                         const std::optional<HeatmapAxis>& req,
                                         int default_index,
                                         const std::string& view) {
  int idx = default_index;
  HeatmapAxis axis;
  if (req) axis = *req;
  if (!axis.name.empty()) idx = resolve_input(in, axis.name, view);
  axis.name = in.names[static_cast<std::size_t>(idx)];
  if (axis.lo == 0.0 && axis.hi == 0.0) {
    axis.lo = in.lo[static_cast<std::size_t>(idx)];
    axis.hi = in.hi[static_cast<std::size_t>(idx)];
  }
  return {idx, axis};
}

HeatmapGrid fill_grid(const std::string& view, const ViewInputs& in,
                      const HeatmapRequest& req,
                      const std::function<double(std::span<const double>)>&
                          value_at) {
  if (in.names.size() < 2)
    throw config_error("view '" + view +
                       "' has fewer than two inputs; cannot draw a grid");
  auto [xi, xaxis] = resolve_axis(in, req.x, 0, view);
  auto [yi, yaxis] = resolve_axis(in, req.y, 1, view);
  if (xi == yi)
    throw config_error("heatmap axes must be two different inputs");
  const std::vector<double> xs = linspace(xaxis);
  const std::vector<double> ys = linspace(yaxis);
  HeatmapGrid grid;
  grid.view = view;
  grid.x = xaxis;
  grid.y = yaxis;
  grid.values.resize(xs.size() * ys.size());
  std::vector<double> point = in.hold;
  for (std::size_t iy = 0; iy < ys.size(); ++iy) {
    point[static_cast<std::size_t>(yi)] = ys[iy];
    for (std::size_t ix = 0; ix < xs.size(); ++ix) {
      point[static_cast<std::size_t>(xi)] = xs[ix];
      grid.values[iy * xs.size() + ix] = value_at(point);
    }
  }
  return grid;
}

// Transforms first, then the body; heatmaps walk the same path as model
// evaluation.
double eval_base(const exprdsl::BaseFunction& fn, std::span<const double> raw,
                 std::span<const double> theta) {
  std::vector<double> in(static_cast<std::size_t>(fn.arity));
  for (int i = 0; i < fn.arity; ++i)
    in[static_cast<std::size_t>(i)] = exprdsl::apply_transform(
        fn.transforms[static_cast<std::size_t>(i)],
        raw[static_cast<std::size_t>(i)], fn.id);
  std::vector<double> values(fn.nodes.size());
  const double v = fn.eval_body(in, theta, values);
  if (!std::isfinite(v)) throw eval_error(fn.id, "nonfinite heatmap value");
  return v;
}

struct ColumnStats {
  std::vector<double> mean, lo, hi;
};

ColumnStats column_stats(const Dataset& data) {
  ColumnStats s;
  s.mean.assign(data.cols, 0.0);
  s.lo.assign(data.cols, std::numeric_limits<double>::infinity());
  s.hi.assign(data.cols, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < data.rows; ++i)
    for (std::size_t c = 0; c < data.cols; ++c) {
      const double v = data.features[i * data.cols + c];
      s.mean[c] += v;
      s.lo[c] = std::min(s.lo[c], v);
      s.hi[c] = std::max(s.hi[c], v);
    }
  for (std::size_t c = 0; c < data.cols; ++c)
    s.mean[c] /= static_cast<double>(data.rows);
  return s;
}

int slot_theta_offset(const exprdsl::CandidateModel& m, std::size_t slot) {
  int off = m.first_layer->param_count;
  for (std::size_t s = 0; s < slot; ++s)
    off += m.second_layer[s].fn->param_count;
  return off;
}

}  // namespace

HeatmapGrid emit_heatmap(const exprdsl::CandidateModel& model,
                         const Dataset& data, const HeatmapRequest& req) {
  if (data.rows == 0) throw data_error("heatmap needs a nonempty dataset");
  if (static_cast<int>(model.theta.size()) != model.theta_size())
    throw config_error("model has no fitted parameters");
  const ColumnStats stats = column_stats(data);
  const std::string& view = req.view;

  if (view == "full") {
    // Axes range over the covariates the model actually reads, slot order.
    std::vector<int> used;
    for (const exprdsl::SecondLayerSlot& slot : model.second_layer)
      for (int c : slot.covariates)
        if (std::find(used.begin(), used.end(), c) == used.end())
          used.push_back(c);
    ViewInputs in;
    for (int c : used) {
      in.names.push_back(data.feature_names[static_cast<std::size_t>(c)]);
      in.lo.push_back(stats.lo[static_cast<std::size_t>(c)]);
      in.hi.push_back(stats.hi[static_cast<std::size_t>(c)]);
      in.hold.push_back(stats.mean[static_cast<std::size_t>(c)]);
    }
    std::vector<double> row = stats.mean;
    return fill_grid(view, in, req, [&](std::span<const double> point) {
      for (std::size_t k = 0; k < used.size(); ++k)
        row[static_cast<std::size_t>(used[k])] = point[k];
      const std::vector<double> out = exprdsl::evaluate(model, row);
      return out.size() == 2 ? out[1] : out[0];
    });
  }

  if (view == "f1") {
    const exprdsl::BaseFunction& f1 = *model.first_layer;
    if (f1.arity != 2 || model.second_layer.size() != 2)
      throw config_error("view 'f1' needs a two-slot model");
    // Observed slot outputs give the default z-ranges.
    ViewInputs in;
    in.names = {"z1", "z2"};
    in.lo.assign(2, std::numeric_limits<double>::infinity());
    in.hi.assign(2, -std::numeric_limits<double>::infinity());
    in.hold.assign(2, 0.0);
    std::vector<double> zsum(2, 0.0);
    std::vector<double> raw;
    for (std::size_t i = 0; i < data.rows; ++i) {
      const std::span<const double> x = data.row(i);
      for (std::size_t s = 0; s < model.second_layer.size(); ++s) {
        const exprdsl::SecondLayerSlot& slot = model.second_layer[s];
        raw.clear();
        for (int c : slot.covariates)
          raw.push_back(x[static_cast<std::size_t>(c)]);
        const std::span<const double> theta =
            std::span<const double>(model.theta)
                .subspan(static_cast<std::size_t>(slot_theta_offset(model, s)),
                         static_cast<std::size_t>(slot.fn->param_count));
        const double z = eval_base(*slot.fn, raw, theta);
        in.lo[s] = std::min(in.lo[s], z);
        in.hi[s] = std::max(in.hi[s], z);
        zsum[s] += z;
      }
    }
    for (std::size_t s = 0; s < 2; ++s)
      in.hold[s] = zsum[s] / static_cast<double>(data.rows);
    const std::span<const double> theta =
        std::span<const double>(model.theta)
            .subspan(0, static_cast<std::size_t>(f1.param_count));
    return fill_grid(view, in, req, [&](std::span<const double> point) {
      return eval_base(f1, point, theta);
    });
  }

  if (view.rfind("f2_", 0) == 0) {
    int slot_no = 0;
    const std::string tail = view.substr(3);
    auto [p, ec] = std::from_chars(tail.data(), tail.data() + tail.size(),
                                   slot_no);
    const int slots = static_cast<int>(model.second_layer.size());
    if (ec != std::errc() || p != tail.data() + tail.size() || slot_no < 1 ||
        slot_no > slots)
      throw config_error("view '" + view + "' does not name a slot (1-" +
                         std::to_string(slots) + ")");
    const exprdsl::SecondLayerSlot& slot =
        model.second_layer[static_cast<std::size_t>(slot_no - 1)];
    if (slot.fn->arity < 2)
      throw config_error("view '" + view +
                         "' has fewer than two inputs; cannot draw a grid");
    ViewInputs in;
    for (int c : slot.covariates) {
      in.names.push_back(data.feature_names[static_cast<std::size_t>(c)]);
      in.lo.push_back(stats.lo[static_cast<std::size_t>(c)]);
      in.hi.push_back(stats.hi[static_cast<std::size_t>(c)]);
      in.hold.push_back(stats.mean[static_cast<std::size_t>(c)]);
    }
    const std::span<const double> theta =
        std::span<const double>(model.theta)
            .subspan(static_cast<std::size_t>(
                         slot_theta_offset(model, slot_no - 1)),
                     static_cast<std::size_t>(slot.fn->param_count));
    return fill_grid(view, in, req, [&](std::span<const double> point) {
      return eval_base(*slot.fn, point, theta);
    });
  }

  throw config_error("unknown heatmap view '" + view +
                     "' (expected full|f1|f2_<slot>)");
}

void write_heatmap_csv(const HeatmapGrid& grid, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw data_error("cannot write '" + path + "'");
  const std::vector<double> xs = linspace(grid.x);
  const std::vector<double> ys = linspace(grid.y);
  std::vector<std::string> fields = {""};
  for (double x : xs) fields.push_back(csv::format_double(x));
  os << csv::join(fields) << '\n';
  for (std::size_t iy = 0; iy < ys.size(); ++iy) {
    fields = {csv::format_double(ys[iy])};
    for (std::size_t ix = 0; ix < xs.size(); ++ix)
      fields.push_back(csv::format_double(grid.values[iy * xs.size() + ix]));
    os << csv::join(fields) << '\n';
  }
  os.flush();
  if (!os) throw data_error("write failed for '" + path + "'");
}

}  // namespace layerfit::pipeline
