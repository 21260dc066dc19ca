#pragma once

#include <stdexcept>
#include <string>

namespace layerfit {

// Bad run configuration (unknown family name, invalid fold count, ...).
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unusable input data (unparseable CSV, empty after filtering, ...).
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// No feasible candidate survived selection.
struct selection_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A base function was evaluated outside its domain; carries the id of the
// offending function.
struct eval_error : std::runtime_error {
  eval_error(std::string fn_id, const std::string& what)
      : std::runtime_error("eval error in " + fn_id + ": " + what),
        function_id(std::move(fn_id)) {}
  std::string function_id;
};

// Network training hit a nonfinite loss and cannot continue.
struct train_failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Every restart of a candidate fit diverged; the selection layer records the
// candidate as infeasible.
struct fit_failure : std::runtime_error {
  fit_failure(int id, const std::string& what)
      : std::runtime_error("fit failure for model " + std::to_string(id) +
                           ": " + what),
        model_id(id) {}
  int model_id;
};

}  // namespace layerfit
