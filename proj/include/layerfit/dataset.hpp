#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace layerfit {

enum class Task { regression, classification };

// N rows of (features, target). Targets are width 1 for regression and a
// width-2 one-hot row for two-class classification.
struct Dataset {
  Task task = Task::regression;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t target_width = 1;
  std::vector<std::string> feature_names;
  std::vector<std::string> target_names;
  std::vector<double> features;  // row-major rows x cols
  std::vector<double> targets;   // row-major rows x target_width

  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * cols, cols};
  }
  std::span<const double> target(std::size_t i) const {
    return {targets.data() + i * target_width, target_width};
  }

  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.task = task;
    out.rows = indices.size();
    out.cols = cols;
    out.target_width = target_width;
    out.feature_names = feature_names;
    out.target_names = target_names;
    out.features.reserve(out.rows * cols);
    out.targets.reserve(out.rows * target_width);
    for (std::size_t i : indices) {
      if (i >= rows) throw std::out_of_range("Dataset::subset: row index");
      out.features.insert(out.features.end(), features.begin() + i * cols,
                          features.begin() + (i + 1) * cols);
      out.targets.insert(out.targets.end(),
                         targets.begin() + i * target_width,
                         targets.begin() + (i + 1) * target_width);
    }
    return out;
  }
};

}  // namespace layerfit
