#pragma once

// Shared builders for the test suites: small datasets and hand-assembled
// candidate models.

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "layerfit/dataset.hpp"
#include "layerfit/exprdsl.hpp"

namespace testutil {

inline layerfit::Dataset make_dataset(
    std::vector<std::vector<double>> rows, std::vector<std::vector<double>> ys,
    layerfit::Task task = layerfit::Task::regression) {
  layerfit::Dataset d;
  d.task = task;
  d.rows = rows.size();
  d.cols = rows.empty() ? 0 : rows[0].size();
  d.target_width = ys.empty() ? 1 : ys[0].size();
  for (std::size_t c = 0; c < d.cols; ++c)
    d.feature_names.push_back("x" + std::to_string(c));
  for (std::size_t c = 0; c < d.target_width; ++c)
    d.target_names.push_back(d.target_width == 1 ? "y"
                                                 : "y" + std::to_string(c));
  for (const auto& r : rows)
    d.features.insert(d.features.end(), r.begin(), r.end());
  for (const auto& y : ys) d.targets.insert(d.targets.end(), y.begin(), y.end());
  return d;
}

// theta0 * x behind an identity transform
inline std::shared_ptr<const layerfit::exprdsl::BaseFunction> scaled_input_fn() {
  layerfit::exprdsl::ExprBuilder b;
  return std::make_shared<layerfit::exprdsl::BaseFunction>(
      b.finish("probe.scale", 1, {layerfit::exprdsl::TransformKind::identity},
               b.param(0) * b.input(0)));
}

inline std::shared_ptr<const layerfit::exprdsl::BaseFunction> passthrough_fn() {
  layerfit::exprdsl::ExprBuilder b;
  return std::make_shared<layerfit::exprdsl::BaseFunction>(
      b.finish("probe.pass", 1, {layerfit::exprdsl::TransformKind::identity},
               b.input(0)));
}

inline std::shared_ptr<const layerfit::exprdsl::BaseFunction> zero_fn() {
  layerfit::exprdsl::ExprBuilder b;
  return std::make_shared<layerfit::exprdsl::BaseFunction>(
      b.finish("probe.zero", 1, {layerfit::exprdsl::TransformKind::identity},
               b.constant(0.0)));
}

inline layerfit::exprdsl::CandidateModel two_slot_model(
    int model_id,
    std::shared_ptr<const layerfit::exprdsl::BaseFunction> f1,
    std::shared_ptr<const layerfit::exprdsl::BaseFunction> fa,
    std::shared_ptr<const layerfit::exprdsl::BaseFunction> fb,
    std::vector<int> cov_a, std::vector<int> cov_b,
    layerfit::exprdsl::OutputLink link =
        layerfit::exprdsl::OutputLink::identity) {
  layerfit::exprdsl::CandidateModel m;
  m.model_id = model_id;
  m.first_layer = std::move(f1);
  m.second_layer.push_back({std::move(fa), std::move(cov_a)});
  m.second_layer.push_back({std::move(fb), std::move(cov_b)});
  m.link = link;
  m.theta.assign(m.theta_size(), 0.0);
  return m;
}

}  // namespace testutil
