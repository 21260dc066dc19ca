#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "layerfit/dataset.hpp"
#include "layerfit/exprdsl.hpp"

namespace layerfit::mlpnet {

enum class OutputActivation { sigmoid, softmax };

// Dense ReLU network: layer_widths = {input, hidden..., output}. The head
// activation implies the training loss (sigmoid -> MSE, softmax ->
// cross-entropy against one-hot targets).
struct MlpSpec {
  std::vector<int> layer_widths;
  OutputActivation output_activation = OutputActivation::sigmoid;
  double dropout_rate = 0.0;  // hidden activations, training only, inverted
  int epochs = 100;
  int batch_size = 10;
  double learning_rate = 0.005;
  std::uint64_t seed = 0;
};

struct MlpState {
  MlpSpec spec;
  // weights[l]: row-major fan_in x fan_out for weight layer l; biases[l]:
  // fan_out entries
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
  bool trained = false;
};

// Sum over weight layers of fan_in*fan_out + fan_out.
int param_count(const MlpSpec& spec);

// total_params, or the average per weight layer (kept exact; display rounds).
exprdsl::ComplexityMeasure complexity(const MlpSpec& spec,
                                      exprdsl::ComplexityKind kind);

// Glorot-uniform weights (limit sqrt(6/(fan_in+fan_out))) and zero biases,
// drawn from Rng(derive_seed(spec.seed, 1)). Validates the spec.
MlpState init_state(const MlpSpec& spec);

// Runs `epochs` passes over per-epoch-shuffled minibatches (schedule and
// dropout stream: Rng(derive_seed(spec.seed, 2)); samples inside a minibatch
// are visited in ascending row order), adaptive-moment updates per minibatch.
// Deterministic given spec.seed. Throws train_failure on nonfinite loss.
MlpState train(const MlpSpec& spec, const Dataset& data);

// Dropout-free forward pass.
std::vector<double> predict(const MlpState& state, std::span<const double> x);

// Dropout-free predictions for every row, row-major into preds.
void predict_all(const MlpState& state, const Dataset& data,
                 std::vector<double>& preds);

// Head-matched dataset loss (MSE for sigmoid, clamped cross-entropy for
// softmax) and argmax accuracy (softmax head only).
double dataset_loss(const MlpState& state, const Dataset& data);
double dataset_accuracy(const MlpState& state, const Dataset& data);

// Full-batch, dropout-free loss and gradient at the current weights; grad is
// resized to param_count in flat order (per layer: weights row-major, then
// biases).
double loss_and_grad(const MlpState& state, const Dataset& data,
                     std::vector<double>& grad);

// Flat parameter order matching loss_and_grad.
std::vector<double> flatten_params(const MlpState& state);
void unflatten_params(MlpState& state, std::span<const double> flat);

// Plain-text serialization: versioned header (widths, head, trained flag),
// then per layer one bias line and fan_in weight lines, full precision,
// locale-independent.
void save_text(const MlpState& state, std::ostream& os);
MlpState load_text(std::istream& is);

}  // namespace layerfit::mlpnet
