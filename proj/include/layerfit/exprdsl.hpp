#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "layerfit/dataset.hpp"
#include "layerfit/errors.hpp"

namespace layerfit::exprdsl {

// --- expression trees -------------------------------------------------------

enum class NodeKind {
  constant,   // fixed literal
  parameter,  // free theta slot (index local to the owning function)
  input,      // transformed input slot
  add,
  sub,
  mul,
  div,
  neg,
  pow_int,  // integer power of a single child
};

struct ExprNode {
  NodeKind kind;
  double value = 0.0;  // constant
  int index = -1;      // parameter / input slot
  int exponent = 0;    // pow_int
  int lhs = -1;
  int rhs = -1;
};

// Named per-input feature transforms, applied to raw covariates before the
// expression body sees them. All are constant with respect to theta.
enum class TransformKind {
  identity,
  upper_quantile,  // normal_quantile(1 - v); v must lie strictly in (0, 1)
  square,
  cube,
};

double apply_transform(TransformKind kind, double v, const std::string& fn_id);

// A parametric base function: an expression body over transformed inputs and
// parameter slots. Nodes are stored in evaluation order (children first), so
// a single forward sweep evaluates the body and a reverse sweep accumulates
// exact adjoints.
struct BaseFunction {
  std::string id;     // e.g. "sim1.f2.2"
  int arity = 0;      // raw input count
  int param_count = 0;
  std::vector<TransformKind> transforms;  // one per input
  std::vector<ExprNode> nodes;
  int root = -1;

  // forward pass; values must have nodes.size() slots
  double eval_body(std::span<const double> inputs, std::span<const double> theta,
                   std::span<double> values) const;
  // reverse pass over the values filled by eval_body; accumulates into
  // theta_adj and input_adj (input_adj may be empty to skip); adj is caller
  // scratch of nodes.size() slots
  void backward_body(std::span<const double> values, double upstream,
                     std::span<double> theta_adj, std::span<double> input_adj,
                     std::span<double> adj) const;
};

// Fluent builder so base-function bodies read like the formulas they encode.
class ExprBuilder {
 public:
  struct Handle {
    ExprBuilder* b;
    int node;
  };

  Handle input(int i);
  Handle param(int i);
  Handle constant(double v);

  BaseFunction finish(std::string id, int arity,
                      std::vector<TransformKind> transforms, Handle root) const;

  int add_node(ExprNode n);

 private:
  std::vector<ExprNode> nodes_;
};

using Handle = ExprBuilder::Handle;
Handle operator+(Handle a, Handle b);
Handle operator-(Handle a, Handle b);
Handle operator*(Handle a, Handle b);
Handle operator/(Handle a, Handle b);
Handle operator+(Handle a, double c);
Handle operator+(double c, Handle a);
Handle operator-(Handle a, double c);
Handle operator-(double c, Handle a);
Handle operator*(double c, Handle a);
Handle operator-(Handle a);
Handle pow_int(Handle a, int e);

// --- candidate models -------------------------------------------------------

enum class OutputLink { identity, sigmoid, softmax_pair };

// One second-layer position: which base function fills it and which raw
// covariates (by index into the dataset's feature vector) feed it.
struct SecondLayerSlot {
  std::shared_ptr<const BaseFunction> fn;
  std::vector<int> covariates;  // length = fn->arity
};

struct CandidateModel {
  int model_id = 0;
  std::shared_ptr<const BaseFunction> first_layer;
  std::vector<SecondLayerSlot> second_layer;
  OutputLink link = OutputLink::identity;
  std::vector<double> theta;

  int theta_size() const;
  int output_width() const {
    return link == OutputLink::softmax_pair ? 2 : 1;
  }
  // "f1^(2){f2^(2), f2^(3)}", with covariate names appended when the slots
  // use a proper subset of the features
  std::string form_label(const std::vector<std::string>& feature_names) const;
};

enum class ComplexityKind { total_params, avg_params_per_layer };

struct ComplexityMeasure {
  ComplexityKind kind;
  double value;        // exact (real-valued for averages)
  int display;         // value rounded half up for tables
};

ComplexityMeasure complexity(const CandidateModel& model, ComplexityKind kind);

// round half up to the nearest integer (display convention for r)
int display_round(double v);

// --- evaluation -------------------------------------------------------------

// Single-row evaluation: second layer, first layer, output link.
// Throws eval_error when a row violates a base-function domain or the result
// is nonfinite.
std::vector<double> evaluate(const CandidateModel& model,
                             std::span<const double> x);

// d(output . upstream)/d(theta), exact reverse mode, flat-theta order.
std::vector<double> gradient(const CandidateModel& model,
                             std::span<const double> x,
                             std::span<const double> upstream);

// Evaluates one candidate over a whole dataset. Feature transforms are
// applied once at construction (they do not depend on theta); forward() keeps
// the per-node tape that backward() consumes. Each concurrent fit owns its
// own evaluator.
class BatchEvaluator {
 public:
  BatchEvaluator(const CandidateModel& model, const Dataset& data);

  size_t rows() const { return rows_; }
  int out_width() const { return model_->output_width(); }

  // preds is resized to rows x out_width (row-major)
  void forward(std::span<const double> theta, std::vector<double>& preds);
  // upstream: dLoss/dpred, rows x out_width; grad (theta-sized) is overwritten
  void backward(std::span<const double> theta, std::span<const double> upstream,
                std::span<double> grad) const;

 private:
  const CandidateModel* model_;
  size_t rows_ = 0;
  std::vector<std::vector<double>> slot_inputs_;  // per slot: rows x arity
  std::vector<std::vector<double>> slot_values_;  // per slot: rows x nodes
  std::vector<double> f1_values_;                 // rows x nodes
  std::vector<double> f1_inputs_;                 // rows x J
  std::vector<double> raw_y_;                     // pre-link outputs
  std::vector<int> theta_offsets_;                // f1 at 0, then slots
};

// --- enumeration ------------------------------------------------------------

enum class PairMode { distinct_pairs, listed_explicitly };

// Explicit slot layout for PairMode::listed_explicitly: per candidate, one
// (function index into f2_set, covariate list) pair per slot.
struct ExplicitSlot {
  int fn_index;
  std::vector<int> covariates;
};

struct EnumerationSpec {
  std::vector<std::shared_ptr<const BaseFunction>> f1_set;
  std::vector<std::shared_ptr<const BaseFunction>> f2_set;
  int J = 2;
  PairMode mode = PairMode::distinct_pairs;
  // distinct_pairs: pool of covariate indices and the subset size drawn from
  // it ("all" = subset_size equal to pool size); every slot receives the
  // chosen subset in index order
  std::vector<int> covariate_pool;
  int subset_size = -1;  // -1 = all
  OutputLink link = OutputLink::identity;
  // listed_explicitly only
  std::vector<std::vector<ExplicitSlot>> listed;
};

// Deterministic candidate enumeration: first-layer index major, then
// lexicographic second-layer combination, then lexicographic covariate
// subset. model_id is 1-based in this order.
std::vector<CandidateModel> enumerate_candidates(const EnumerationSpec& spec);

// --- builtin families -------------------------------------------------------

// Named built-in base functions, e.g. "sim1.f2.2"; throws config_error for
// unknown ids.
std::shared_ptr<const BaseFunction> builtin(const std::string& id);
// All members of a family, e.g. "sim1.f2" -> 4 functions in display order.
std::vector<std::shared_ptr<const BaseFunction>> builtin_family(
    const std::string& family);

}  // namespace layerfit::exprdsl
