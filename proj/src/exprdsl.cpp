#include "layerfit/exprdsl.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "layerfit/statcore.hpp"

namespace layerfit::exprdsl {
namespace {

void eval_nodes(std::span<const ExprNode> nodes, std::span<const double> inputs,
                std::span<const double> theta, std::span<double> values) {
  for (size_t i = 0; i < nodes.size(); ++i) {
    const ExprNode& n = nodes[i];
    switch (n.kind) {
      case NodeKind::constant:
        values[i] = n.value;
        break;
      case NodeKind::parameter:
        values[i] = theta[n.index];
        break;
      case NodeKind::input:
        values[i] = inputs[n.index];
        break;
      case NodeKind::add:
        values[i] = values[n.lhs] + values[n.rhs];
        break;
      case NodeKind::sub:
        values[i] = values[n.lhs] - values[n.rhs];
        break;
      case NodeKind::mul:
        values[i] = values[n.lhs] * values[n.rhs];
        break;
      case NodeKind::div:
        values[i] = values[n.lhs] / values[n.rhs];
        break;
      case NodeKind::neg:
        values[i] = -values[n.lhs];
        break;
      case NodeKind::pow_int: {
        double p = 1.0;
        for (int k = 0; k < n.exponent; ++k) p *= values[n.lhs];
        values[i] = p;
        break;
      }
    }
  }
}

void backward_nodes(std::span<const ExprNode> nodes, int root,
                    std::span<const double> values, double upstream,
                    std::span<double> theta_adj, std::span<double> input_adj,
                    std::span<double> adj) {
  std::fill(adj.begin(), adj.end(), 0.0);
  adj[root] = upstream;
  for (size_t ri = nodes.size(); ri-- > 0;) {
    const double a = adj[ri];
    if (a == 0.0) continue;
    const ExprNode& n = nodes[ri];
    switch (n.kind) {
      case NodeKind::constant:
        break;
      case NodeKind::parameter:
        theta_adj[n.index] += a;
        break;
      case NodeKind::input:
        if (!input_adj.empty()) input_adj[n.index] += a;
        break;
      case NodeKind::add:
        adj[n.lhs] += a;
        adj[n.rhs] += a;
        break;
      case NodeKind::sub:
        adj[n.lhs] += a;
        adj[n.rhs] -= a;
        break;
      case NodeKind::mul:
        adj[n.lhs] += a * values[n.rhs];
        adj[n.rhs] += a * values[n.lhs];
        break;
      case NodeKind::div:
        adj[n.lhs] += a / values[n.rhs];
        adj[n.rhs] -= a * values[ri] / values[n.rhs];
        break;
      case NodeKind::neg:
        adj[n.lhs] -= a;
        break;
      case NodeKind::pow_int: {
        double p = 1.0;
        for (int k = 0; k < n.exponent - 1; ++k) p *= values[n.lhs];
        adj[n.lhs] += a * n.exponent * p;
        break;
      }
    }
  }
}

double stable_sigmoid(double y) {
  if (y >= 0.0) return 1.0 / (1.0 + std::exp(-y));
  const double e = std::exp(y);
  return e / (1.0 + e);
}

void apply_link(OutputLink link, double y, std::span<double> out) {
  switch (link) {
    case OutputLink::identity:
      out[0] = y;
      break;
    case OutputLink::sigmoid:
      out[0] = stable_sigmoid(y);
      break;
    case OutputLink::softmax_pair: {
      const double s = stable_sigmoid(y);
      out[0] = 1.0 - s;
      out[1] = s;
      break;
    }
  }
}

double link_backward(OutputLink link, double y, std::span<const double> up) {
  switch (link) {
    case OutputLink::identity:
      return up[0];
    case OutputLink::sigmoid: {
      const double s = stable_sigmoid(y);
      return up[0] * s * (1.0 - s);
    }
    case OutputLink::softmax_pair: {
      const double s = stable_sigmoid(y);
      return (up[1] - up[0]) * s * (1.0 - s);
    }
  }
  return 0.0;
}

}  // namespace

double apply_transform(TransformKind kind, double v, const std::string& fn_id) {
  switch (kind) {
    case TransformKind::identity:
      return v;
    case TransformKind::upper_quantile:
      if (!(v > 0.0 && v < 1.0))
        throw eval_error(fn_id, "quantile transform input outside (0, 1)");
      return statcore::normal_quantile(1.0 - v);
    case TransformKind::square:
      return v * v;
    case TransformKind::cube:
      return v * v * v;
  }
  return v;
}

double BaseFunction::eval_body(std::span<const double> inputs,
                               std::span<const double> theta,
                               std::span<double> values) const {
  eval_nodes(nodes, inputs, theta, values);
  return values[root];
}

void BaseFunction::backward_body(std::span<const double> values,
                                 double upstream, std::span<double> theta_adj,
                                 std::span<double> input_adj,
                                 std::span<double> adj) const {
  backward_nodes(nodes, root, values, upstream, theta_adj, input_adj, adj);
}

// --- builder ----------------------------------------------------------------

int ExprBuilder::add_node(ExprNode n) {
  nodes_.push_back(n);
  return static_cast<int>(nodes_.size()) - 1;
}

Handle ExprBuilder::input(int i) {
  return {this, add_node({.kind = NodeKind::input, .index = i})};
}

Handle ExprBuilder::param(int i) {
  return {this, add_node({.kind = NodeKind::parameter, .index = i})};
}

Handle ExprBuilder::constant(double v) {
  return {this, add_node({.kind = NodeKind::constant, .value = v})};
}

namespace {
Handle binary(NodeKind kind, Handle a, Handle b) {
  return {a.b, a.b->add_node({.kind = kind, .lhs = a.node, .rhs = b.node})};
}
}  // namespace

Handle operator+(Handle a, Handle b) { return binary(NodeKind::add, a, b); }
Handle operator-(Handle a, Handle b) { return binary(NodeKind::sub, a, b); }
Handle operator*(Handle a, Handle b) { return binary(NodeKind::mul, a, b); }
Handle operator/(Handle a, Handle b) { return binary(NodeKind::div, a, b); }
Handle operator+(Handle a, double c) { return a + a.b->constant(c); }
Handle operator+(double c, Handle a) { return a.b->constant(c) + a; }
Handle operator-(Handle a, double c) { return a - a.b->constant(c); }
Handle operator-(double c, Handle a) { return a.b->constant(c) - a; }
Handle operator*(double c, Handle a) { return a.b->constant(c) * a; }
Handle operator-(Handle a) {
  return {a.b, a.b->add_node({.kind = NodeKind::neg, .lhs = a.node})};
}
Handle pow_int(Handle a, int e) {
  return {a.b,
          a.b->add_node({.kind = NodeKind::pow_int, .exponent = e, .lhs = a.node})};
}

BaseFunction ExprBuilder::finish(std::string id, int arity,
                                 std::vector<TransformKind> transforms,
                                 Handle root) const {
  if (static_cast<int>(transforms.size()) != arity)
    throw config_error("base function " + id + ": one transform per input");
  int max_param = -1;
  for (const ExprNode& n : nodes_) {
    if (n.kind == NodeKind::parameter) max_param = std::max(max_param, n.index);
    if (n.kind == NodeKind::input && n.index >= arity)
      throw config_error("base function " + id + ": input index out of range");
  }
  BaseFunction fn;
  fn.id = std::move(id);
  fn.arity = arity;
  fn.param_count = max_param + 1;
  fn.transforms = std::move(transforms);
  fn.nodes = nodes_;
  fn.root = root.node;
  return fn;
}

// --- candidate models -------------------------------------------------------

int CandidateModel::theta_size() const {
  int total = first_layer->param_count;
  for (const SecondLayerSlot& s : second_layer) total += s.fn->param_count;
  return total;
}

namespace {

// "sim1.f2.3" -> "f2^(3)"; ids without a trailing index keep their last part
std::string fn_display(const std::string& id) {
  const size_t last = id.rfind('.');
  if (last == std::string::npos) return id;
  const std::string tail = id.substr(last + 1);
  const size_t prev = id.rfind('.', last - 1);
  const std::string head =
      prev == std::string::npos ? id.substr(0, last)
                                : id.substr(prev + 1, last - prev - 1);
  if (head.size() >= 2 && head[0] == 'f') return head + "^(" + tail + ")";
  return tail;
}

}  // namespace

std::string CandidateModel::form_label(
    const std::vector<std::string>& feature_names) const {
  std::ostringstream out;
  out << fn_display(first_layer->id) << "{";
  for (size_t j = 0; j < second_layer.size(); ++j) {
    if (j) out << ", ";
    out << fn_display(second_layer[j].fn->id);
  }
  out << "}";

  // annotate covariates unless every slot sees the full feature vector in
  // natural order
  const auto full_order = [&](const std::vector<int>& cov) {
    if (cov.size() != feature_names.size()) return false;
    for (size_t i = 0; i < cov.size(); ++i)
      if (cov[i] != static_cast<int>(i)) return false;
    return true;
  };
  bool shared = true;
  for (const SecondLayerSlot& s : second_layer)
    if (s.covariates != second_layer.front().covariates) shared = false;
  const auto names = [&](const std::vector<int>& cov) {
    std::string r;
    for (size_t i = 0; i < cov.size(); ++i) {
      if (i) r += ",";
      r += cov[i] < static_cast<int>(feature_names.size())
               ? feature_names[cov[i]]
               : "x" + std::to_string(cov[i]);
    }
    return r;
  };
  if (shared && full_order(second_layer.front().covariates)) return out.str();
  if (shared) return out.str() + " [" + names(second_layer.front().covariates) + "]";
  std::string r = fn_display(first_layer->id) + "{";
  for (size_t j = 0; j < second_layer.size(); ++j) {
    if (j) r += ", ";
    r += fn_display(second_layer[j].fn->id) + "(" +
         names(second_layer[j].covariates) + ")";
  }
  return r + "}";
}

int display_round(double v) { return static_cast<int>(std::floor(v + 0.5)); }

ComplexityMeasure complexity(const CandidateModel& model, ComplexityKind kind) {
  const double total = model.theta_size();
  if (kind == ComplexityKind::total_params)
    return {kind, total, static_cast<int>(total)};
  const double avg = total / 2.0;  // two layers by construction
  return {kind, avg, display_round(avg)};
}

// --- single-row evaluation --------------------------------------------------

namespace {

void check_x(const CandidateModel& model, std::span<const double> x) {
  for (const SecondLayerSlot& s : model.second_layer)
    for (int c : s.covariates)
      if (c < 0 || c >= static_cast<int>(x.size()))
        throw std::invalid_argument("input vector does not cover covariates");
}

}  // namespace

std::vector<double> evaluate(const CandidateModel& model,
                             std::span<const double> x) {
  check_x(model, x);
  const size_t J = model.second_layer.size();
  std::vector<double> x1(J);
  std::vector<double> scratch;
  std::span<const double> theta = model.theta;
  int off = model.first_layer->param_count;
  for (size_t j = 0; j < J; ++j) {
    const SecondLayerSlot& s = model.second_layer[j];
    std::vector<double> in(s.fn->arity);
    for (int i = 0; i < s.fn->arity; ++i)
      in[i] = apply_transform(s.fn->transforms[i], x[s.covariates[i]], s.fn->id);
    scratch.resize(s.fn->nodes.size());
    x1[j] = s.fn->eval_body(in, theta.subspan(off, s.fn->param_count), scratch);
    if (!std::isfinite(x1[j]))
      throw eval_error(s.fn->id, "nonfinite output");
    off += s.fn->param_count;
  }
  scratch.resize(model.first_layer->nodes.size());
  const double y = model.first_layer->eval_body(
      x1, theta.subspan(0, model.first_layer->param_count), scratch);
  if (!std::isfinite(y)) throw eval_error(model.first_layer->id, "nonfinite output");
  std::vector<double> out(model.output_width());
  apply_link(model.link, y, out);
  return out;
}

std::vector<double> gradient(const CandidateModel& model,
                             std::span<const double> x,
                             std::span<const double> upstream) {
  check_x(model, x);
  if (static_cast<int>(upstream.size()) != model.output_width())
    throw std::invalid_argument("upstream width mismatch");
  const size_t J = model.second_layer.size();
  std::span<const double> theta = model.theta;
  const BaseFunction& f1 = *model.first_layer;

  // forward, keeping tapes
  std::vector<std::vector<double>> slot_in(J), slot_vals(J);
  std::vector<double> x1(J);
  int off = f1.param_count;
  for (size_t j = 0; j < J; ++j) {
    const SecondLayerSlot& s = model.second_layer[j];
    slot_in[j].resize(s.fn->arity);
    for (int i = 0; i < s.fn->arity; ++i)
      slot_in[j][i] =
          apply_transform(s.fn->transforms[i], x[s.covariates[i]], s.fn->id);
    slot_vals[j].resize(s.fn->nodes.size());
    x1[j] = s.fn->eval_body(slot_in[j], theta.subspan(off, s.fn->param_count),
                            slot_vals[j]);
    off += s.fn->param_count;
  }
  std::vector<double> f1_vals(f1.nodes.size());
  const double y = f1.eval_body(x1, theta.subspan(0, f1.param_count), f1_vals);

  // reverse
  std::vector<double> grad(model.theta_size(), 0.0);
  std::vector<double> x1_adj(J, 0.0);
  std::vector<double> adj(f1.nodes.size());
  const double dy = link_backward(model.link, y, upstream);
  f1.backward_body(f1_vals, dy, std::span(grad).subspan(0, f1.param_count),
                   x1_adj, adj);
  off = f1.param_count;
  for (size_t j = 0; j < J; ++j) {
    const SecondLayerSlot& s = model.second_layer[j];
    adj.resize(s.fn->nodes.size());
    s.fn->backward_body(slot_vals[j], x1_adj[j],
                        std::span(grad).subspan(off, s.fn->param_count), {},
                        adj);
    off += s.fn->param_count;
  }
  return grad;
}

// --- batch evaluation -------------------------------------------------------

BatchEvaluator::BatchEvaluator(const CandidateModel& model, const Dataset& data)
    : model_(&model), rows_(data.rows) {
  const size_t J = model.second_layer.size();
  theta_offsets_.resize(J + 1);
  theta_offsets_[0] = 0;  // first layer
  int off = model.first_layer->param_count;
  for (size_t j = 0; j < J; ++j) {
    theta_offsets_[j + 1] = off;
    off += model.second_layer[j].fn->param_count;
  }

  slot_inputs_.resize(J);
  slot_values_.resize(J);
  for (size_t j = 0; j < J; ++j) {
    const SecondLayerSlot& s = model.second_layer[j];
    for (int c : s.covariates)
      if (c < 0 || c >= static_cast<int>(data.cols))
        throw std::invalid_argument("covariate index out of range");
    slot_inputs_[j].resize(rows_ * s.fn->arity);
    for (size_t r = 0; r < rows_; ++r) {
      const auto x = data.row(r);
      for (int i = 0; i < s.fn->arity; ++i)
        slot_inputs_[j][r * s.fn->arity + i] =
            apply_transform(s.fn->transforms[i], x[s.covariates[i]], s.fn->id);
    }
    slot_values_[j].resize(rows_ * s.fn->nodes.size());
  }
  f1_values_.resize(rows_ * model.first_layer->nodes.size());
  f1_inputs_.resize(rows_ * J);
  raw_y_.resize(rows_);
}

void BatchEvaluator::forward(std::span<const double> theta,
                             std::vector<double>& preds) {
  const CandidateModel& m = *model_;
  const size_t J = m.second_layer.size();
  const BaseFunction& f1 = *m.first_layer;
  const int width = m.output_width();
  preds.resize(rows_ * width);
  for (size_t r = 0; r < rows_; ++r) {
    for (size_t j = 0; j < J; ++j) {
      const BaseFunction& fn = *m.second_layer[j].fn;
      const size_t nn = fn.nodes.size();
      f1_inputs_[r * J + j] = fn.eval_body(
          std::span(slot_inputs_[j]).subspan(r * fn.arity, fn.arity),
          theta.subspan(theta_offsets_[j + 1], fn.param_count),
          std::span(slot_values_[j]).subspan(r * nn, nn));
    }
    const size_t fn1 = f1.nodes.size();
    raw_y_[r] = f1.eval_body(
        std::span(f1_inputs_).subspan(r * J, J),
        theta.subspan(0, f1.param_count),
        std::span(f1_values_).subspan(r * fn1, fn1));
    apply_link(m.link, raw_y_[r], std::span(preds).subspan(r * width, width));
  }
}

void BatchEvaluator::backward(std::span<const double> theta,
                              std::span<const double> upstream,
                              std::span<double> grad) const {
  (void)theta;
  const CandidateModel& m = *model_;
  const size_t J = m.second_layer.size();
  const BaseFunction& f1 = *m.first_layer;
  const int width = m.output_width();
  std::fill(grad.begin(), grad.end(), 0.0);

  size_t max_nodes = f1.nodes.size();
  for (const SecondLayerSlot& s : m.second_layer)
    max_nodes = std::max(max_nodes, s.fn->nodes.size());
  std::vector<double> adj(max_nodes);
  std::vector<double> x1_adj(J);

  for (size_t r = 0; r < rows_; ++r) {
    const double dy = link_backward(
        m.link, raw_y_[r], upstream.subspan(r * width, width));
    if (dy == 0.0) continue;
    std::fill(x1_adj.begin(), x1_adj.end(), 0.0);
    const size_t fn1 = f1.nodes.size();
    f1.backward_body(std::span(f1_values_).subspan(r * fn1, fn1), dy,
                     grad.subspan(0, f1.param_count), x1_adj,
                     std::span(adj).subspan(0, fn1));
    for (size_t j = 0; j < J; ++j) {
      if (x1_adj[j] == 0.0) continue;
      const BaseFunction& fn = *m.second_layer[j].fn;
      const size_t nn = fn.nodes.size();
      fn.backward_body(std::span(slot_values_[j]).subspan(r * nn, nn),
                       x1_adj[j],
                       grad.subspan(theta_offsets_[j + 1], fn.param_count), {},
                       std::span(adj).subspan(0, nn));
    }
  }
}

// --- enumeration ------------------------------------------------------------

namespace {

// lexicographic k-combinations of {0, ..., n-1}
void for_each_combination(int n, int k,
                          const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  if (k == 0) {
    fn(idx);
    return;
  }
  while (true) {
    fn(idx);
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace

std::vector<CandidateModel> enumerate_candidates(const EnumerationSpec& spec) {
  if (spec.f1_set.empty()) throw config_error("empty first-layer function set");
  if (spec.J < 1) throw config_error("J must be at least 1");

  std::vector<CandidateModel> out;
  int next_id = 1;

  const auto emit = [&](const std::shared_ptr<const BaseFunction>& f1,
                        std::vector<SecondLayerSlot> slots) {
    CandidateModel m;
    m.model_id = next_id++;
    m.first_layer = f1;
    m.second_layer = std::move(slots);
    m.link = spec.link;
    for (const SecondLayerSlot& s : m.second_layer)
      if (static_cast<int>(s.covariates.size()) != s.fn->arity)
        throw config_error("covariate count does not match arity of " +
                           s.fn->id);
    m.theta.assign(m.theta_size(), 0.0);
    out.push_back(std::move(m));
  };

  if (spec.mode == PairMode::listed_explicitly) {
    if (spec.listed.empty()) throw config_error("empty explicit candidate list");
    for (const auto& f1 : spec.f1_set)
      for (const std::vector<ExplicitSlot>& entry : spec.listed) {
        if (static_cast<int>(entry.size()) != spec.J)
          throw config_error("explicit candidate does not have J slots");
        std::vector<SecondLayerSlot> slots;
        for (const ExplicitSlot& e : entry) {
          if (e.fn_index < 0 ||
              e.fn_index >= static_cast<int>(spec.f2_set.size()))
            throw config_error("explicit slot function index out of range");
          slots.push_back({spec.f2_set[e.fn_index], e.covariates});
        }
        emit(f1, std::move(slots));
      }
    return out;
  }

  if (spec.f2_set.empty()) throw config_error("empty second-layer function set");
  if (static_cast<int>(spec.f2_set.size()) < spec.J)
    throw config_error("need at least J distinct second-layer functions");
  const int pool = static_cast<int>(spec.covariate_pool.size());
  const int subset = spec.subset_size < 0 ? pool : spec.subset_size;
  if (subset > pool)
    throw config_error("covariate subset size exceeds pool size");

  for (const auto& f1 : spec.f1_set)
    for_each_combination(
        static_cast<int>(spec.f2_set.size()), spec.J,
        [&](const std::vector<int>& pair) {
          for_each_combination(pool, subset, [&](const std::vector<int>& sub) {
            std::vector<int> cov(subset);
            for (int i = 0; i < subset; ++i)
              cov[i] = spec.covariate_pool[sub[i]];
            std::vector<SecondLayerSlot> slots;
            for (int j = 0; j < spec.J; ++j)
              slots.push_back({spec.f2_set[pair[j]], cov});
            emit(f1, std::move(slots));
          });
        });
  return out;
}

// --- builtin families -------------------------------------------------------

namespace {

using FamilyMap =
    std::map<std::string, std::vector<std::shared_ptr<const BaseFunction>>>;

FamilyMap build_families() {
  FamilyMap fam;
  const auto reg = [&](const std::string& family, BaseFunction fn) {
    fam[family].push_back(std::make_shared<const BaseFunction>(std::move(fn)));
  };
  const TransformKind id_ = TransformKind::identity;

  // two-stage trial sample-size study: x = (mu0, alpha, beta); the second
  // layer sees (mu0, Z_{1-alpha}, Z_{1-beta})
  {
    ExprBuilder b;
    reg("sim1.f1", b.finish("sim1.f1.1", 2, {id_, id_},
                            b.param(0) * (pow_int(b.input(0), 2) +
                                          pow_int(b.input(1), 2))));
  }
  {
    ExprBuilder b;
    reg("sim1.f1", b.finish("sim1.f1.2", 2, {id_, id_},
                            b.param(0) * b.input(0) + b.param(1) * b.input(1)));
  }
  {
    ExprBuilder b;
    reg("sim1.f1",
        b.finish("sim1.f1.3", 2, {id_, id_},
                 b.param(0) * b.input(0) + b.param(1) * b.input(1) + b.param(2)));
  }
  const std::vector<TransformKind> trial_tf{
      TransformKind::identity, TransformKind::upper_quantile,
      TransformKind::upper_quantile};
  {
    ExprBuilder b;
    reg("sim1.f2",
        b.finish("sim1.f2.1", 3, trial_tf,
                 pow_int((b.input(1) + b.input(2)) / b.input(0), 2) + b.param(0)));
  }
  {
    ExprBuilder b;
    reg("sim1.f2",
        b.finish("sim1.f2.2", 3, trial_tf,
                 b.param(0) *
                     pow_int((b.input(1) + b.input(2) + b.param(1)) / b.input(0),
                             2)));
  }
  {
    ExprBuilder b;
    reg("sim1.f2",
        b.finish("sim1.f2.3", 3, trial_tf,
                 b.param(0) *
                     pow_int((b.input(1) + b.input(2) + b.param(1)) / b.input(0) +
                                 b.param(2),
                             2)));
  }
  {
    ExprBuilder b;
    reg("sim1.f2",
        b.finish("sim1.f2.4", 3, trial_tf,
                 pow_int((b.param(0) * b.input(1) + b.param(1) * b.input(2)) /
                                 b.input(0) +
                             b.param(2),
                         2) +
                     b.param(3)));
  }

  // go/no-go study second layer: linear forms over three inputs
  {
    ExprBuilder b;
    reg("sim2.f2", b.finish("sim2.f2.1", 3, {id_, id_, id_},
                            b.param(0) * (pow_int(b.input(0), 2) +
                                          pow_int(b.input(1), 2) +
                                          pow_int(b.input(2), 2))));
  }
  {
    ExprBuilder b;
    reg("sim2.f2",
        b.finish("sim2.f2.2", 3, {id_, id_, id_},
                 b.param(0) * (b.input(0) + b.input(1) + b.input(2)) +
                     b.param(1)));
  }
  {
    ExprBuilder b;
    reg("sim2.f2", b.finish("sim2.f2.3", 3, {id_, id_, id_},
                            b.param(0) * b.input(0) + b.param(1) * b.input(1) +
                                b.param(2) * b.input(2)));
  }
  {
    ExprBuilder b;
    reg("sim2.f2", b.finish("sim2.f2.4", 3, {id_, id_, id_},
                            b.param(0) * b.input(0) + b.param(1) * b.input(1) +
                                b.param(2) * b.input(2) + b.param(3)));
  }

  // Fisher-test classification study: scalar linear score under a
  // softmax-pair head; x = (q1, q2, n)
  {
    ExprBuilder b;
    reg("sim3.f1", b.finish("sim3.f1.1", 2, {id_, id_},
                            b.param(0) * b.input(0) + b.param(0) * b.input(1)));
  }
  {
    ExprBuilder b;
    reg("sim3.f1", b.finish("sim3.f1.2", 2, {id_, id_},
                            b.param(0) * b.input(0) + b.param(1) * b.input(1)));
  }
  {
    ExprBuilder b;
    reg("sim3.f1",
        b.finish("sim3.f1.3", 2, {id_, id_},
                 b.param(0) * b.input(0) + b.param(1) * b.input(1) + b.param(2)));
  }
  {
    ExprBuilder b;
    reg("sim3.f2",
        b.finish("sim3.f2.1", 3, {id_, id_, id_},
                 (b.param(0) * b.input(0) + b.param(0) * b.input(1)) /
                     b.input(2)));
  }
  {
    ExprBuilder b;
    reg("sim3.f2",
        b.finish("sim3.f2.2", 3, {id_, id_, id_},
                 (b.param(0) * b.input(0) + b.param(1) * b.input(1)) /
                     b.input(2)));
  }
  {
    ExprBuilder b;
    reg("sim3.f2",
        b.finish("sim3.f2.3", 3, {id_, id_, id_},
                 (b.param(0) * b.input(0) + b.param(1) * b.input(1)) /
                     (b.input(2) + b.param(2))));
  }

  // lab-value regression study: both layers draw from the same three shapes
  const auto shapes3 = [&](const std::string& family, const std::string& prefix) {
    {
      ExprBuilder b;
      reg(family, b.finish(prefix + ".1", 2, {id_, id_},
                           b.param(0) * pow_int(b.input(0) + b.input(1), 2)));
    }
    {
      ExprBuilder b;
      reg(family, b.finish(prefix + ".2", 2, {id_, id_},
                           b.param(0) * pow_int(b.input(0), 3) +
                               b.param(1) * pow_int(b.input(1), 3)));
    }
    {
      ExprBuilder b;
      reg(family,
          b.finish(prefix + ".3", 2, {id_, id_},
                   b.param(0) * b.input(0) + b.param(1) * b.input(1) +
                       b.param(2)));
    }
  };
  shapes3("nhanes.f1", "nhanes.f1");
  shapes3("nhanes.f2", "nhanes.f2");

  // didactic squared-sum example: (th1 u + th2 v)^2 over squared/cubed inputs
  {
    ExprBuilder b;
    reg("ex1.f1", b.finish("ex1.f1.1", 2, {id_, id_},
                           pow_int(b.input(0) + b.input(1), 2)));
  }
  {
    ExprBuilder b;
    reg("ex1.f2", b.finish("ex1.f2.sq", 1, {TransformKind::square},
                           b.param(0) * b.input(0)));
  }
  {
    ExprBuilder b;
    reg("ex1.f2", b.finish("ex1.f2.cu", 1, {TransformKind::cube},
                           b.param(0) * b.input(0)));
  }
  return fam;
}

const FamilyMap& families() {
  static const FamilyMap fam = build_families();
  return fam;
}

}  // namespace

std::shared_ptr<const BaseFunction> builtin(const std::string& id) {
  const size_t last = id.rfind('.');
  if (last != std::string::npos) {
    const auto it = families().find(id.substr(0, last));
    if (it != families().end())
      for (const auto& fn : it->second)
        if (fn->id == id) return fn;
  }
  throw config_error("unknown base function: " + id);
}

std::vector<std::shared_ptr<const BaseFunction>> builtin_family(
    const std::string& family) {
  const auto it = families().find(family);
  if (it == families().end())
    throw config_error("unknown base-function family: " + family);
  return it->second;
}

}  // namespace layerfit::exprdsl
