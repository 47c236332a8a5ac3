// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace neuroflow::ensemble {

inline constexpr int kHidden1 = 16;
inline constexpr int kHidden2 = 8;

struct StackerHyper {
  int epochs = 500;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
};

/// MLP [d_in, 16, 8, 1]: ReLU hidden layers, logistic output.
class StackerModel {
 public:
  /// Zero weights. Rejects anything but [d_in, 16, 8, 1] with d_in in {3, 6, 8}.
  explicit StackerModel(std::vector<int> layer_sizes);

  /// Glorot-uniform weights, zero biases.
  static StackerModel initialized(int d_in, std::uint64_t seed);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }

  /// Layer l maps sizes[l] -> sizes[l+1]; weights are (out x in).
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  StackerHyper hyper;

  /// Output-layer pre-activations (logits), one per row.
  Eigen::VectorXd logits(const Eigen::MatrixXd& x) const;

  /// Mean binary cross-entropy.
  double loss(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) const;

  struct Gradient {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
  };
  Gradient gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) const;

  std::size_t parameter_count() const;
  double& parameter(std::size_t i);
  double gradient_entry(const Gradient& g, std::size_t i) const;

 private:
  std::vector<int> sizes_;
};

/// Full-batch gradient descent on mean binary cross-entropy. A non-finite loss throws Error.
StackerModel train_stacker(const Eigen::MatrixXd& x, const std::vector<int>& labels, const StackerHyper& hyper);

Eigen::VectorXd predict_stacker(const StackerModel& model, const Eigen::MatrixXd& x);

/// Max over parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-6); central differences, h = 1e-5.
double grad_check(const StackerModel& model, const Eigen::MatrixXd& x, const std::vector<int>& labels);

}  // namespace neuroflow::ensemble
