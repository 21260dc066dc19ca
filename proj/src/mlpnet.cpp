#include "layerfit/mlpnet.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include "layerfit/csv.hpp"
#include "layerfit/errors.hpp"
#include "layerfit/optim.hpp"
#include "layerfit/rng.hpp"

namespace layerfit::mlpnet {

namespace {

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void validate_spec(const MlpSpec& spec) {
  if (spec.layer_widths.size() < 3)
    throw config_error("mlp: need input, at least one hidden, and output");
  for (int w : spec.layer_widths)
    if (w < 1) throw config_error("mlp: layer widths must be at least 1");
  if (spec.dropout_rate < 0.0 || spec.dropout_rate >= 1.0)
    throw config_error("mlp: dropout_rate must lie in [0, 1)");
  if (spec.epochs < 1 || spec.batch_size < 1)
    throw config_error("mlp: epochs and batch_size must be at least 1");
  if (spec.learning_rate <= 0.0)
    throw config_error("mlp: learning_rate must be positive");
}

int weight_layers(const MlpSpec& spec) {
  return static_cast<int>(spec.layer_widths.size()) - 1;
}

// acts[0] is the input copy, acts[l+1] the activation after weight layer l;
// zs[l] the pre-activation. drop_scale (per hidden layer, 0 or 1/(1-rate))
// may be null for inference.
void forward_pass(const MlpState& s, std::span<const double> x,
                  std::vector<std::vector<double>>& acts,
                  std::vector<std::vector<double>>& zs,
                  const std::vector<std::vector<double>>* drop_scale) {
  const auto& widths = s.spec.layer_widths;
  const int wl = weight_layers(s.spec);
  acts.resize(widths.size());
  zs.resize(wl);
  acts[0].assign(x.begin(), x.end());
  for (int l = 0; l < wl; ++l) {
    const int fan_in = widths[l];
    const int fan_out = widths[l + 1];
    zs[l].assign(s.biases[l].begin(), s.biases[l].end());
    for (int i = 0; i < fan_in; ++i) {
      const double a = acts[l][i];
      if (a == 0.0) continue;
      const double* wrow = s.weights[l].data() + static_cast<size_t>(i) * fan_out;
      for (int j = 0; j < fan_out; ++j) zs[l][j] += a * wrow[j];
    }
    acts[l + 1].resize(fan_out);
    if (l < wl - 1) {
      for (int j = 0; j < fan_out; ++j) {
        double a = zs[l][j] > 0.0 ? zs[l][j] : 0.0;
        if (drop_scale) a *= (*drop_scale)[l][j];
        acts[l + 1][j] = a;
      }
    } else {
      if (s.spec.output_activation == OutputActivation::sigmoid) {
        for (int j = 0; j < fan_out; ++j)
          acts[l + 1][j] = stable_sigmoid(zs[l][j]);
      } else {
        double zmax = zs[l][0];
        for (int j = 1; j < fan_out; ++j) zmax = std::max(zmax, zs[l][j]);
        double sum = 0.0;
        for (int j = 0; j < fan_out; ++j) {
          acts[l + 1][j] = std::exp(zs[l][j] - zmax);
          sum += acts[l + 1][j];
        }
        for (int j = 0; j < fan_out; ++j) acts[l + 1][j] /= sum;
      }
    }
  }
}

// Per-sample loss (MSE averaged over output width; clamped cross-entropy) and
// dLoss/dz at the head, without the 1/batch factor.
double head_loss_and_delta(const MlpState& s, std::span<const double> target,
                           const std::vector<double>& probs,
                           std::vector<double>& dz) {
  const size_t w = probs.size();
  dz.resize(w);
  double loss = 0.0;
  if (s.spec.output_activation == OutputActivation::sigmoid) {
    for (size_t j = 0; j < w; ++j) {
      const double d = probs[j] - target[j];
      loss += d * d;
      dz[j] = 2.0 * d / static_cast<double>(w) * probs[j] * (1.0 - probs[j]);
    }
    loss /= static_cast<double>(w);
  } else {
    for (size_t j = 0; j < w; ++j) {
      loss -= target[j] *
              std::log(std::clamp(probs[j], 1e-12, 1.0 - 1e-12));
      dz[j] = probs[j] - target[j];
    }
  }
  return loss;
}

// Accumulates one sample's parameter gradients (no batch normalization).
void backward_pass(const MlpState& s,
                   const std::vector<std::vector<double>>& acts,
                   const std::vector<std::vector<double>>& zs,
                   const std::vector<std::vector<double>>* drop_scale,
                   std::vector<double>& dz,
                   std::vector<std::vector<double>>& gw,
                   std::vector<std::vector<double>>& gb) {
  const auto& widths = s.spec.layer_widths;
  const int wl = weight_layers(s.spec);
  std::vector<double> da;
  for (int l = wl - 1; l >= 0; --l) {
    const int fan_in = widths[l];
    const int fan_out = widths[l + 1];
    for (int j = 0; j < fan_out; ++j) gb[l][j] += dz[j];
    for (int i = 0; i < fan_in; ++i) {
      const double a = acts[l][i];
      if (a == 0.0) continue;
      double* grow = gw[l].data() + static_cast<size_t>(i) * fan_out;
      for (int j = 0; j < fan_out; ++j) grow[j] += a * dz[j];
    }
    if (l == 0) break;
    da.assign(fan_in, 0.0);
    for (int i = 0; i < fan_in; ++i) {
      const double* wrow = s.weights[l].data() + static_cast<size_t>(i) * fan_out;
      double acc = 0.0;
      for (int j = 0; j < fan_out; ++j) acc += wrow[j] * dz[j];
      da[i] = acc;
    }
    // through the hidden layer l-1's dropout scale and ReLU gate
    dz.resize(fan_in);
    for (int i = 0; i < fan_in; ++i) {
      double g = da[i];
      if (drop_scale) g *= (*drop_scale)[l - 1][i];
      dz[i] = zs[l - 1][i] > 0.0 ? g : 0.0;
    }
  }
}

struct AdamBuffers {
  std::vector<std::vector<double>> mw, vw, mb, vb;
  double b1t = 1.0, b2t = 1.0;

  explicit AdamBuffers(const MlpState& s) {
    for (const auto& w : s.weights) {
      mw.emplace_back(w.size(), 0.0);
      vw.emplace_back(w.size(), 0.0);
    }
    for (const auto& b : s.biases) {
      mb.emplace_back(b.size(), 0.0);
      vb.emplace_back(b.size(), 0.0);
    }
  }

  void step(MlpState& s, const std::vector<std::vector<double>>& gw,
            const std::vector<std::vector<double>>& gb, double lr) {
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    b1t *= kBeta1;
    b2t *= kBeta2;
    const auto update = [&](std::vector<double>& p, std::vector<double>& m,
                            std::vector<double>& v,
                            const std::vector<double>& g) {
      for (size_t i = 0; i < p.size(); ++i) {
        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
        v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
        const double m_hat = m[i] / (1.0 - b1t);
        const double v_hat = v[i] / (1.0 - b2t);
        p[i] -= lr * m_hat / (std::sqrt(v_hat) + kEps);
      }
    };
    for (size_t l = 0; l < s.weights.size(); ++l) {
      update(s.weights[l], mw[l], vw[l], gw[l]);
      update(s.biases[l], mb[l], vb[l], gb[l]);
    }
  }
};

void check_data(const MlpSpec& spec, const Dataset& data) {
  if (data.rows == 0) throw data_error("mlp train: empty dataset");
  if (static_cast<int>(data.cols) != spec.layer_widths.front())
    throw config_error("mlp: feature width does not match the input layer");
  if (static_cast<int>(data.target_width) != spec.layer_widths.back())
    throw config_error("mlp: target width does not match the output layer");
}

}  // namespace

int param_count(const MlpSpec& spec) {
  validate_spec(spec);
  int total = 0;
  for (int l = 0; l + 1 < static_cast<int>(spec.layer_widths.size()); ++l)
    total += spec.layer_widths[l] * spec.layer_widths[l + 1] +
             spec.layer_widths[l + 1];
  return total;
}

exprdsl::ComplexityMeasure complexity(const MlpSpec& spec,
                                      exprdsl::ComplexityKind kind) {
  const int total = param_count(spec);
  double value = static_cast<double>(total);
  if (kind == exprdsl::ComplexityKind::avg_params_per_layer)
    value /= static_cast<double>(weight_layers(spec));
  return {kind, value, exprdsl::display_round(value)};
}

MlpState init_state(const MlpSpec& spec) {
  validate_spec(spec);
  MlpState s;
  s.spec = spec;
  Rng rng(derive_seed(spec.seed, 1));
  for (int l = 0; l + 1 < static_cast<int>(spec.layer_widths.size()); ++l) {
    const int fan_in = spec.layer_widths[l];
    const int fan_out = spec.layer_widths[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> w(static_cast<size_t>(fan_in) * fan_out);
    for (double& x : w) x = rng.uniform(-limit, limit);
    s.weights.push_back(std::move(w));
    s.biases.emplace_back(fan_out, 0.0);
  }
  return s;
}

MlpState train(const MlpSpec& spec, const Dataset& data) {
  MlpState s = init_state(spec);
  check_data(spec, data);
  const size_t n = data.rows;
  const size_t batch = std::min<size_t>(spec.batch_size, n);
  const int wl = weight_layers(spec);
  const bool drop = spec.dropout_rate > 0.0;
  const double keep_scale = 1.0 / (1.0 - spec.dropout_rate);

  Rng sched(derive_seed(spec.seed, 2));
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  AdamBuffers adam(s);
  std::vector<std::vector<double>> gw, gb, acts, zs, masks;
  for (const auto& w : s.weights) gw.emplace_back(w.size(), 0.0);
  for (const auto& b : s.biases) gb.emplace_back(b.size(), 0.0);
  if (drop)
    for (int l = 0; l + 1 < wl; ++l)
      masks.emplace_back(spec.layer_widths[l + 1], 1.0);
  std::vector<double> dz;
  std::vector<size_t> batch_rows;

  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    sched.shuffle(order);
    for (size_t start = 0; start < n; start += batch) {
      const size_t stop = std::min(n, start + batch);
      batch_rows.assign(order.begin() + start, order.begin() + stop);
      // ascending visit order keeps batch sums independent of the shuffle
      std::sort(batch_rows.begin(), batch_rows.end());

      for (auto& g : gw) std::fill(g.begin(), g.end(), 0.0);
      for (auto& g : gb) std::fill(g.begin(), g.end(), 0.0);
      double loss = 0.0;
      for (size_t row : batch_rows) {
        if (drop)
          for (auto& mask : masks)
            for (double& m : mask)
              m = sched.uniform() >= spec.dropout_rate ? keep_scale : 0.0;
        forward_pass(s, data.row(row), acts, zs, drop ? &masks : nullptr);
        loss += head_loss_and_delta(s, data.target(row), acts.back(), dz);
        backward_pass(s, acts, zs, drop ? &masks : nullptr, dz, gw, gb);
      }
      const double inv_b = 1.0 / static_cast<double>(batch_rows.size());
      loss *= inv_b;
      if (!std::isfinite(loss))
        throw train_failure("mlp train: nonfinite minibatch loss at epoch " +
                            std::to_string(epoch));
      for (auto& g : gw)
        for (double& x : g) x *= inv_b;
      for (auto& g : gb)
        for (double& x : g) x *= inv_b;
      adam.step(s, gw, gb, spec.learning_rate);
    }
  }
  s.trained = true;
  return s;
}

std::vector<double> predict(const MlpState& state, std::span<const double> x) {
  if (static_cast<int>(x.size()) != state.spec.layer_widths.front())
    throw std::domain_error("mlp predict: input width mismatch");
  std::vector<std::vector<double>> acts, zs;
  forward_pass(state, x, acts, zs, nullptr);
  return acts.back();
}

void predict_all(const MlpState& state, const Dataset& data,
                 std::vector<double>& preds) {
  if (static_cast<int>(data.cols) != state.spec.layer_widths.front())
    throw std::domain_error("mlp predict: input width mismatch");
  const int w = state.spec.layer_widths.back();
  preds.resize(data.rows * static_cast<size_t>(w));
  std::vector<std::vector<double>> acts, zs;
  for (size_t i = 0; i < data.rows; ++i) {
    forward_pass(state, data.row(i), acts, zs, nullptr);
    std::copy(acts.back().begin(), acts.back().end(),
              preds.begin() + static_cast<size_t>(i) * w);
  }
}

double dataset_loss(const MlpState& state, const Dataset& data) {
  std::vector<double> preds;
  predict_all(state, data, preds);
  return state.spec.output_activation == OutputActivation::sigmoid
             ? optim::mse_loss(preds, data.targets)
             : optim::cross_entropy_loss(preds, data.targets);
}

double dataset_accuracy(const MlpState& state, const Dataset& data) {
  if (state.spec.output_activation != OutputActivation::softmax)
    throw std::domain_error("mlp accuracy: needs a softmax head");
  std::vector<double> preds;
  predict_all(state, data, preds);
  return optim::pair_accuracy(preds, data.targets);
}

double loss_and_grad(const MlpState& state, const Dataset& data,
                     std::vector<double>& grad) {
  check_data(state.spec, data);
  std::vector<std::vector<double>> gw, gb, acts, zs;
  for (const auto& w : state.weights) gw.emplace_back(w.size(), 0.0);
  for (const auto& b : state.biases) gb.emplace_back(b.size(), 0.0);
  std::vector<double> dz;
  double loss = 0.0;
  for (size_t i = 0; i < data.rows; ++i) {
    forward_pass(state, data.row(i), acts, zs, nullptr);
    loss += head_loss_and_delta(state, data.target(i), acts.back(), dz);
    backward_pass(state, acts, zs, nullptr, dz, gw, gb);
  }
  const double inv_n = 1.0 / static_cast<double>(data.rows);
  grad.clear();
  for (size_t l = 0; l < gw.size(); ++l) {
    for (double g : gw[l]) grad.push_back(g * inv_n);
    for (double g : gb[l]) grad.push_back(g * inv_n);
  }
  return loss * inv_n;
}

std::vector<double> flatten_params(const MlpState& state) {
  std::vector<double> flat;
  for (size_t l = 0; l < state.weights.size(); ++l) {
    flat.insert(flat.end(), state.weights[l].begin(), state.weights[l].end());
    flat.insert(flat.end(), state.biases[l].begin(), state.biases[l].end());
  }
  return flat;
}

void unflatten_params(MlpState& state, std::span<const double> flat) {
  size_t at = 0;
  for (size_t l = 0; l < state.weights.size(); ++l) {
    for (double& w : state.weights[l]) w = flat[at++];
    for (double& b : state.biases[l]) b = flat[at++];
  }
  if (at != flat.size())
    throw std::invalid_argument("mlp unflatten: length mismatch");
}

void save_text(const MlpState& state, std::ostream& os) {
  os << "layerfit-mlp 1\n";
  os << "widths " << state.spec.layer_widths.size();
  for (int w : state.spec.layer_widths) os << ' ' << w;
  os << '\n';
  os << "head "
     << (state.spec.output_activation == OutputActivation::sigmoid ? "sigmoid"
                                                                   : "softmax")
     << '\n';
  os << "trained " << (state.trained ? 1 : 0) << '\n';
  for (size_t l = 0; l < state.weights.size(); ++l) {
    os << "layer " << l << '\n';
    const int fan_in = state.spec.layer_widths[l];
    const int fan_out = state.spec.layer_widths[l + 1];
    for (int j = 0; j < fan_out; ++j)
      os << (j ? " " : "") << csv::format_double(state.biases[l][j]);
    os << '\n';
    for (int i = 0; i < fan_in; ++i) {
      for (int j = 0; j < fan_out; ++j)
        os << (j ? " " : "")
           << csv::format_double(
                  state.weights[l][static_cast<size_t>(i) * fan_out + j]);
      os << '\n';
    }
  }
}

namespace {

double parse_double_token(std::istream& is) {
  std::string tok;
  if (!(is >> tok)) throw data_error("mlp load: truncated file");
  double v = 0.0;
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size())
    throw data_error("mlp load: bad number '" + tok + "'");
  return v;
}

}  // namespace

MlpState load_text(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "layerfit-mlp" || version != 1)
    throw data_error("mlp load: unrecognized header");
  std::string key;
  size_t count = 0;
  if (!(is >> key >> count) || key != "widths" || count < 3)
    throw data_error("mlp load: bad widths line");
  MlpSpec spec;
  spec.layer_widths.resize(count);
  for (auto& w : spec.layer_widths)
    if (!(is >> w)) throw data_error("mlp load: truncated widths");
  std::string head;
  if (!(is >> key >> head) || key != "head" ||
      (head != "sigmoid" && head != "softmax"))
    throw data_error("mlp load: bad head line");
  spec.output_activation = head == "sigmoid" ? OutputActivation::sigmoid
                                             : OutputActivation::softmax;
  int trained = 0;
  if (!(is >> key >> trained) || key != "trained")
    throw data_error("mlp load: bad trained line");

  MlpState s;
  s.spec = spec;
  s.trained = trained != 0;
  for (size_t l = 0; l + 1 < count; ++l) {
    size_t idx = 0;
    if (!(is >> key >> idx) || key != "layer" || idx != l)
      throw data_error("mlp load: bad layer marker");
    const int fan_in = spec.layer_widths[l];
    const int fan_out = spec.layer_widths[l + 1];
    std::vector<double> b(fan_out);
    for (auto& x : b) x = parse_double_token(is);
    std::vector<double> w(static_cast<size_t>(fan_in) * fan_out);
    for (auto& x : w) x = parse_double_token(is);
    s.biases.push_back(std::move(b));
    s.weights.push_back(std::move(w));
  }
  validate_spec(s.spec);
  return s;
}

}  // namespace layerfit::mlpnet
