// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/ensemble/stacker.hpp"
#include "neuroflow/common/error.hpp"
#include "neuroflow/common/random.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace neuroflow::ensemble {

namespace {

std::string shape(const std::vector<int>& sizes) {
  std::ostringstream s;
  s << "[";
  for (std::size_t i = 0; i < sizes.size(); ++i) s << (i ? ", " : "") << sizes[i];
  return s.str() + "]";
}

Eigen::VectorXd labels_vector(const std::vector<int>& labels) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ConfigError("stacker labels must be 0 or 1");
    y(static_cast<Eigen::Index>(i)) = labels[i];
  }
  return y;
}

/// log(1 + e^z) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z))); }

struct Forward {
  std::vector<Eigen::MatrixXd> z;  // pre-activations per layer, rows = samples
  std::vector<Eigen::MatrixXd> a;  // a[0] = input, a[l+1] = activation of layer l
};

Forward forward(const StackerModel& m, const Eigen::MatrixXd& x) {
  if (x.cols() != m.input_dim())
    throw ConfigError("stacker expects " + std::to_string(m.input_dim()) + " features, got " + std::to_string(x.cols()));
  Forward f;
  f.a.push_back(x);
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    Eigen::MatrixXd z = f.a.back() * m.weights[l].transpose();
    z.rowwise() += m.biases[l].transpose();
    f.z.push_back(z);
    if (l + 1 < m.weights.size())
      f.a.push_back(z.cwiseMax(0.0));
    else
      f.a.push_back(z);  // output stays a logit; the logistic is folded into the loss
  }
  return f;
}

}  // namespace

StackerModel::StackerModel(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() != 4 || sizes_[1] != kHidden1 || sizes_[2] != kHidden2 || sizes_[3] != 1)
    throw ConfigError("stacker layers must be [d_in, 16, 8, 1], got " + shape(sizes_));
  if (sizes_[0] != 3 && sizes_[0] != 6 && sizes_[0] != 8)
    throw ConfigError("stacker input width must be 3, 6 or 8, got " + std::to_string(sizes_[0]));
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    weights.push_back(Eigen::MatrixXd::Zero(sizes_[l + 1], sizes_[l]));
    biases.push_back(Eigen::VectorXd::Zero(sizes_[l + 1]));
  }
}

StackerModel StackerModel::initialized(int d_in, std::uint64_t seed) {
  StackerModel m({d_in, kHidden1, kHidden2, 1});
  m.hyper.seed = seed;
  Rng rng(seed);
  for (auto& w : m.weights) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-limit, limit);
  }
  return m;
}

Eigen::VectorXd StackerModel::logits(const Eigen::MatrixXd& x) const { return forward(*this, x).a.back().col(0); }

double StackerModel::loss(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) const {
  const auto z = logits(x);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) sum += softplus(z(i)) - y(i) * z(i);
  return sum / static_cast<double>(z.size());
}

StackerModel::Gradient StackerModel::gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) const {
  const auto f = forward(*this, x);
  const auto n = static_cast<double>(x.rows());
  Gradient g;
  g.weights.resize(weights.size());
  g.biases.resize(biases.size());
  // d(loss)/dz at the output is (sigmoid(z) - y) / n.
  Eigen::MatrixXd delta = f.z.back().unaryExpr([](double z) {
    return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  });
  delta.col(0) -= y;
  delta /= n;
  for (std::size_t l = weights.size(); l-- > 0;) {
    g.weights[l] = delta.transpose() * f.a[l];
    g.biases[l] = delta.colwise().sum().transpose();
    if (l == 0) break;
    Eigen::MatrixXd back = delta * weights[l];
    delta = back.cwiseProduct(f.z[l - 1].unaryExpr([](double z) { return z > 0 ? 1.0 : 0.0; }));
  }
  return g;
}

std::size_t StackerModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  return n;
}

double& StackerModel::parameter(std::size_t i) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const auto w = static_cast<std::size_t>(weights[l].size());
    if (i < w) return weights[l].data()[i];
    i -= w;
    const auto b = static_cast<std::size_t>(biases[l].size());
    if (i < b) return biases[l].data()[i];
    i -= b;
  }
  throw ConfigError("parameter index out of range");
}

double StackerModel::gradient_entry(const Gradient& g, std::size_t i) const {
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    const auto w = static_cast<std::size_t>(g.weights[l].size());
    if (i < w) return g.weights[l].data()[i];
    i -= w;
    const auto b = static_cast<std::size_t>(g.biases[l].size());
    if (i < b) return g.biases[l].data()[i];
    i -= b;
  }
  throw ConfigError("parameter index out of range");
}

StackerModel train_stacker(const Eigen::MatrixXd& x, const std::vector<int>& labels, const StackerHyper& hyper) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw ConfigError("features and labels differ in length");
  if (x.rows() == 0) throw ConfigError("cannot train on an empty set");
  if (hyper.epochs < 0 || !(hyper.learning_rate > 0.0)) throw ConfigError("epochs must be >= 0 and learning rate > 0");
  const auto y = labels_vector(labels);
  auto m = StackerModel::initialized(static_cast<int>(x.cols()), hyper.seed);
  m.hyper = hyper;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    const auto g = m.gradient(x, y);
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
      m.weights[l] -= hyper.learning_rate * g.weights[l];
      m.biases[l] -= hyper.learning_rate * g.biases[l];
    }
    if (epoch % 50 == 49 || epoch + 1 == hyper.epochs) {
      const double loss = m.loss(x, y);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "stacker loss became non-finite at epoch " << epoch + 1 << " (learning rate " << hyper.learning_rate
            << ", " << x.rows() << " samples, max |input| " << x.cwiseAbs().maxCoeff() << ")";
        throw Error(msg.str());
      }
    }
  }
  return m;
}

Eigen::VectorXd predict_stacker(const StackerModel& model, const Eigen::MatrixXd& x) {
  return model.logits(x).unaryExpr([](double z) {
    return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  });
}

double grad_check(const StackerModel& model, const Eigen::MatrixXd& x, const std::vector<int>& labels) {
  constexpr double h = 1e-5;
  const auto y = labels_vector(labels);
  const auto g = model.gradient(x, y);
  auto probe = model;
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.parameter_count(); ++i) {
    double& p = probe.parameter(i);
    const double saved = p;
    p = saved + h;
    const double up = probe.loss(x, y);
    p = saved - h;
    const double down = probe.loss(x, y);
    p = saved;
    const double numeric = (up - down) / (2 * h);
    const double analytic = model.gradient_entry(g, i);
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-6});
    worst = std::max(worst, std::fabs(analytic - numeric) / denom);
  }
  return worst;
}

}  // namespace neuroflow::ensemble
