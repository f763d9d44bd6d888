// Copyright 2026 The gutsim Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#ifndef GUTSIM_MODELS_HPP
#define GUTSIM_MODELS_HPP

#include "gutsim/common.hpp"
#include "gutsim/partition.hpp"
#include "gutsim/rng.hpp"

#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gutsim {

enum class ProblemKind { quadratic, softmax, mlp };

inline std::string_view to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::quadratic: return "quadratic";
    case ProblemKind::softmax: return "softmax";
    case ProblemKind::mlp: return "mlp";
  }
  return "quadratic";
}

inline ProblemKind parse_problem_kind(std::string_view name) {
  if (name == "quadratic") return ProblemKind::quadratic;
  if (name == "softmax") return ProblemKind::softmax;
  if (name == "mlp") return ProblemKind::mlp;
  throw InvalidArgument("unknown problem kind '" + std::string(name) +
                        "' (expected quadratic, softmax or mlp)");
}

/// Knobs for the desk-scale problem families.
///
/// For quadratics `d` is the parameter dimension. For the classification kinds
/// it is the input feature dimension; the parameter dimension follows from the
/// model (see Problem::dim()).
struct SyntheticProblemSpec {
  ProblemKind kind = ProblemKind::quadratic;
  std::size_t d = 10;
  std::size_t n_agents = 16;
  double zeta = 1.0;
  double sigma = 0.0;
  double L = 1.0;
  std::uint64_t seed = 0;

  std::size_t classes = 10;
  std::size_t samples = 4000;
  std::size_t test_samples = 2000;
  std::size_t hidden = 16;
  double separation = 1.0;
  double alpha = 0.1;
  std::uint64_t partition_seed = 0;
  std::size_t min_per_agent = 1;
};

/// Sample indices (classification) and the RNG substream for noise draws.
struct Batch {
  std::size_t agent = 0;
  std::uint64_t round = 0;
  std::uint64_t stream = 0;
  std::vector<std::size_t> indices;
};

struct LossGrad {
  double loss = 0.0;
  Vector grad;
};

struct Evaluation {
  double loss = 0.0;
  std::optional<double> accuracy;  // absent for regression problems
};

/// Per-agent objectives f_i with a stochastic gradient oracle. Immutable after
/// construction, so every method is safe to call concurrently.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual ProblemKind kind() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::size_t num_agents() const = 0;

  /// Draws agent's mini-batch for a round. Deterministic in (agent, round, seed).
  virtual Batch sample_batch(std::size_t agent, std::uint64_t round, std::size_t batch_size,
                             std::uint64_t seed) const = 0;

  /// Stochastic loss and gradient; unbiased for f_i and grad f_i.
  virtual LossGrad loss_and_grad(const Vector& x, const Batch& batch) const = 0;

  /// Exact f_i and grad f_i (full local data, no noise).
  virtual LossGrad local_objective(std::size_t agent, const Vector& x) const = 0;

  /// Held-out evaluation of a single (typically averaged) parameter vector.
  virtual Evaluation evaluate(const Vector& x) const = 0;

  virtual std::optional<double> optimum_value() const { return std::nullopt; }

  /// Shared starting point for every agent.
  virtual Vector initial_point(std::uint64_t seed) const {
    Rng rng(mix64(seed ^ 0x5eed));
    Vector x(static_cast<Eigen::Index>(dim()));
    for (auto& v : x) v = 0.1 * rng.normal();
    return x;
  }

  /// f = mean_i f_i and its gradient.
  LossGrad global_objective(const Vector& x) const {
    LossGrad out{0.0, Vector::Zero(static_cast<Eigen::Index>(dim()))};
    for (std::size_t i = 0; i < num_agents(); ++i) {
      auto part = local_objective(i, x);
      out.loss += part.loss;
      out.grad += part.grad;
    }
    const double n = static_cast<double>(num_agents());
    out.loss /= n;
    out.grad /= n;
    return out;
  }
};

inline void require_finite(const Vector& x, std::string_view where) {
  if (!x.allFinite()) throw InvalidArgument(std::string(where) + ": non-finite parameters");
}

// ---------------------------------------------------------------------------
// Quadratics
// ---------------------------------------------------------------------------

/// f_i(x) = (L/2) ||x - b_i||^2 with injected Gaussian gradient noise whose
/// total variance is sigma^2.
class QuadraticProblem final : public Problem {
 public:
  static QuadraticProblem from_targets(std::vector<Vector> targets, double sigma = 0.0,
                                       double L = 1.0) {
    if (targets.empty()) throw InvalidArgument("quadratic: need at least one agent");
    if (!(L > 0.0)) throw InvalidArgument("quadratic: L must be positive");
    if (sigma < 0.0) throw InvalidArgument("quadratic: sigma must be non-negative");
    const auto d = targets.front().size();
    Vector mean = Vector::Zero(d);
    for (const auto& b : targets) {
      if (b.size() != d) throw InvalidArgument("quadratic: targets differ in dimension");
      mean += b;
    }
    mean /= static_cast<double>(targets.size());
    double spread = 0.0;
    for (const auto& b : targets) spread += (b - mean).squaredNorm();
    spread /= static_cast<double>(targets.size());
    QuadraticProblem p;
    p.targets_ = std::move(targets);
    p.sigma_ = sigma;
    p.L_ = L;
    p.optimum_ = mean;
    p.optimum_value_ = 0.5 * L * spread;
    return p;
  }

  ProblemKind kind() const override { return ProblemKind::quadratic; }
  std::size_t dim() const override { return static_cast<std::size_t>(optimum_.size()); }
  std::size_t num_agents() const override { return targets_.size(); }
  double sigma() const { return sigma_; }
  double smoothness() const { return L_; }
  const Vector& target(std::size_t agent) const { return targets_.at(agent); }
  const Vector& optimum() const { return optimum_; }
  std::optional<double> optimum_value() const override { return optimum_value_; }

  Batch sample_batch(std::size_t agent, std::uint64_t round, std::size_t /*batch_size*/,
                     std::uint64_t seed) const override {
    return Batch{agent, round, substream_seed(seed, agent, round), {}};
  }

  LossGrad loss_and_grad(const Vector& x, const Batch& batch) const override {
    require_finite(x, "loss_and_grad");
    LossGrad out = local_objective(batch.agent, x);
    if (sigma_ > 0.0) {
      Rng rng(batch.stream);
      const double scale = sigma_ / std::sqrt(static_cast<double>(dim()));
      for (auto& g : out.grad) g += scale * rng.normal();
    }
    return out;
  }

  LossGrad local_objective(std::size_t agent, const Vector& x) const override {
    const Vector diff = x - targets_.at(agent);
    return {0.5 * L_ * diff.squaredNorm(), L_ * diff};
  }

  Evaluation evaluate(const Vector& x) const override {
    require_finite(x, "evaluate");
    return {global_objective(x).loss, std::nullopt};
  }

  Vector initial_point(std::uint64_t seed) const override {
    Rng rng(mix64(seed ^ 0x5eed));
    Vector x(static_cast<Eigen::Index>(dim()));
    for (auto& v : x) v = rng.normal();
    return x;
  }

 private:
  QuadraticProblem() = default;

  std::vector<Vector> targets_;
  double sigma_ = 0.0;
  double L_ = 1.0;
  Vector optimum_;
  double optimum_value_ = 0.0;
};

/// Targets b_i = b_bar + (zeta / L) u_i with sum_i u_i = 0 and
/// (1/n) sum_i ||u_i||^2 = 1, so the gradient dissimilarity equals zeta^2 at
/// every x.
inline QuadraticProblem make_quadratic(const SyntheticProblemSpec& spec) {
  if (spec.kind != ProblemKind::quadratic) throw InvalidArgument("make_quadratic: kind must be quadratic");
  if (spec.d == 0 || spec.n_agents == 0) throw InvalidArgument("make_quadratic: d and n_agents must be positive");
  if (spec.zeta < 0.0 || spec.sigma < 0.0 || !(spec.L > 0.0)) {
    throw InvalidArgument("make_quadratic: need zeta >= 0, sigma >= 0, L > 0");
  }
  if (spec.n_agents < 2 && spec.zeta > 0.0) {
    throw InvalidArgument("make_quadratic: heterogeneity zeta > 0 needs at least 2 agents");
  }
  const auto d = static_cast<Eigen::Index>(spec.d);
  Rng rng(spec.seed);
  Vector center(d);
  for (auto& v : center) v = rng.normal();

  std::vector<Vector> dirs(spec.n_agents, Vector::Zero(d));
  if (spec.zeta > 0.0) {
    Vector mean = Vector::Zero(d);
    for (auto& u : dirs) {
      for (auto& v : u) v = rng.normal();
      mean += u;
    }
    mean /= static_cast<double>(spec.n_agents);
    double power = 0.0;
    for (auto& u : dirs) {
      u -= mean;
      power += u.squaredNorm();
    }
    const double scale = std::sqrt(static_cast<double>(spec.n_agents) / power);
    for (auto& u : dirs) u *= scale;
  }
  std::vector<Vector> targets;
  targets.reserve(spec.n_agents);
  for (const auto& u : dirs) targets.push_back(center + (spec.zeta / spec.L) * u);
  return QuadraticProblem::from_targets(std::move(targets), spec.sigma, spec.L);
}

/// (1/n) sum_i ||grad f_i(x) - grad f(x)||^2.
inline double gradient_dissimilarity(const Problem& p, const Vector& x) {
  const Vector global = p.global_objective(x).grad;
  double acc = 0.0;
  for (std::size_t i = 0; i < p.num_agents(); ++i) {
    acc += (p.local_objective(i, x).grad - global).squaredNorm();
  }
  return acc / static_cast<double>(p.num_agents());
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

struct Dataset {
  Matrix features;  // samples x feature dim
  std::vector<int> labels;
  std::size_t classes = 0;

  std::size_t size() const { return labels.size(); }
};

/// Isotropic unit-variance Gaussian clusters, one per class, with means drawn
/// N(0, separation^2 I).
class GaussianMixture {
 public:
  GaussianMixture(std::size_t classes, std::size_t features, double separation,
                  std::uint64_t seed)
      : means_(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(features)) {
    if (classes < 2 || features == 0) throw InvalidArgument("gaussian mixture: need >= 2 classes and >= 1 feature");
    Rng rng(seed);
    for (Eigen::Index c = 0; c < means_.rows(); ++c) {
      for (Eigen::Index k = 0; k < means_.cols(); ++k) means_(c, k) = separation * rng.normal();
    }
  }

  const Matrix& means() const { return means_; }

  /// Balanced labels (sample i has class i mod classes).
  Dataset sample(std::size_t count, std::uint64_t seed) const {
    Dataset ds;
    ds.classes = static_cast<std::size_t>(means_.rows());
    ds.features.resize(static_cast<Eigen::Index>(count), means_.cols());
    ds.labels.resize(count);
    Rng rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
      const auto c = static_cast<int>(i % ds.classes);
      ds.labels[i] = c;
      for (Eigen::Index k = 0; k < means_.cols(); ++k) {
        ds.features(static_cast<Eigen::Index>(i), k) = means_(c, k) + rng.normal();
      }
    }
    return ds;
  }

 private:
  Matrix means_;
};

namespace detail {

/// Cross-entropy of logits against label; writes softmax - onehot into dlogits.
inline double cross_entropy(const Vector& logits, int label, Vector& dlogits) {
  const double top = logits.maxCoeff();
  dlogits = (logits.array() - top).exp().matrix();
  const double z = dlogits.sum();
  dlogits /= z;
  const double loss = std::log(z) + top - logits(label);
  dlogits(label) -= 1.0;
  return loss;
}

}  // namespace detail

/// Multinomial logistic regression. Parameters are laid out class by class:
/// [w_c (features), b_c] for c = 0..classes-1.
struct SoftmaxModel {
  std::size_t features = 0;
  std::size_t classes = 0;

  std::size_t dim() const { return classes * (features + 1); }

  Vector logits(const Vector& theta, const Eigen::RowVectorXd& x) const {
    const auto f = static_cast<Eigen::Index>(features);
    Vector z(static_cast<Eigen::Index>(classes));
    for (Eigen::Index c = 0; c < z.size(); ++c) {
      z(c) = theta.segment(c * (f + 1), f).dot(x.transpose()) + theta(c * (f + 1) + f);
    }
    return z;
  }

  /// Adds the sample's gradient into grad and returns its loss.
  double accumulate(const Vector& theta, const Eigen::RowVectorXd& x, int label,
                    Vector& grad) const {
    const auto f = static_cast<Eigen::Index>(features);
    Vector dz;
    const double loss = detail::cross_entropy(logits(theta, x), label, dz);
    for (Eigen::Index c = 0; c < dz.size(); ++c) {
      grad.segment(c * (f + 1), f) += dz(c) * x.transpose();
      grad(c * (f + 1) + f) += dz(c);
    }
    return loss;
  }
};

/// One hidden tanh layer. Layout: W1 (hidden x features, row-major), b1,
/// W2 (classes x hidden, row-major), b2.
struct MlpModel {
  std::size_t features = 0;
  std::size_t hidden = 0;
  std::size_t classes = 0;

  std::size_t dim() const { return hidden * features + hidden + classes * hidden + classes; }

  struct Layout {
    Eigen::Index w1, b1, w2, b2;
  };

  Layout layout() const {
    const auto h = static_cast<Eigen::Index>(hidden);
    const auto f = static_cast<Eigen::Index>(features);
    const auto c = static_cast<Eigen::Index>(classes);
    return {0, h * f, h * f + h, h * f + h + c * h};
  }

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Vector hidden_act(const Vector& theta, const Eigen::RowVectorXd& x) const {
    const auto lay = layout();
    const auto h = static_cast<Eigen::Index>(hidden);
    const auto f = static_cast<Eigen::Index>(features);
    Eigen::Map<const RowMajor> w1(theta.data() + lay.w1, h, f);
    return (w1 * x.transpose() + theta.segment(lay.b1, h)).array().tanh().matrix();
  }

  Vector logits_from_hidden(const Vector& theta, const Vector& act) const {
    const auto lay = layout();
    const auto h = static_cast<Eigen::Index>(hidden);
    const auto c = static_cast<Eigen::Index>(classes);
    Eigen::Map<const RowMajor> w2(theta.data() + lay.w2, c, h);
    return w2 * act + theta.segment(lay.b2, c);
  }

  Vector logits(const Vector& theta, const Eigen::RowVectorXd& x) const {
    return logits_from_hidden(theta, hidden_act(theta, x));
  }

  double accumulate(const Vector& theta, const Eigen::RowVectorXd& x, int label,
                    Vector& grad) const {
    const auto lay = layout();
    const auto h = static_cast<Eigen::Index>(hidden);
    const auto f = static_cast<Eigen::Index>(features);
    const auto c = static_cast<Eigen::Index>(classes);
    const Vector act = hidden_act(theta, x);
    Vector dz;
    const double loss = detail::cross_entropy(logits_from_hidden(theta, act), label, dz);

    Eigen::Map<const RowMajor> w2(theta.data() + lay.w2, c, h);
    Eigen::Map<RowMajor> gw2(grad.data() + lay.w2, c, h);
    gw2 += dz * act.transpose();
    grad.segment(lay.b2, c) += dz;

    const Vector da = ((w2.transpose() * dz).array() * (1.0 - act.array().square())).matrix();
    Eigen::Map<RowMajor> gw1(grad.data() + lay.w1, h, f);
    gw1 += da * x;
    grad.segment(lay.b1, h) += da;
    return loss;
  }
};

/// Mean loss and accuracy of model(theta) over a dataset.
template <class Model>
Evaluation evaluate_classifier(const Model& model, const Vector& theta, const Dataset& data) {
  if (data.size() == 0) throw InvalidArgument("evaluate: empty test set");
  require_finite(theta, "evaluate");
  double loss = 0.0;
  std::size_t correct = 0;
  Vector dz;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Vector z = model.logits(theta, data.features.row(static_cast<Eigen::Index>(i)));
    loss += detail::cross_entropy(z, data.labels[i], dz);
    Eigen::Index best = 0;
    z.maxCoeff(&best);
    if (best == data.labels[i]) ++correct;
  }
  const double n = static_cast<double>(data.size());
  return {loss / n, static_cast<double>(correct) / n};
}

/// Classifier over a partitioned training set. Batches are drawn uniformly
/// with replacement from the agent's own partition entry.
template <class Model>
class ClassificationProblem final : public Problem {
 public:
  ClassificationProblem(Model model, ProblemKind kind, Dataset train, Dataset test,
                        Partition partition)
      : model_(std::move(model)),
        kind_(kind),
        train_(std::move(train)),
        test_(std::move(test)),
        partition_(std::move(partition)) {
    if (test_.size() == 0) throw InvalidArgument("classification problem: empty test set");
  }

  ProblemKind kind() const override { return kind_; }
  std::size_t dim() const override { return model_.dim(); }
  std::size_t num_agents() const override { return partition_.num_agents(); }
  const Model& model() const { return model_; }
  const Dataset& train() const { return train_; }
  const Dataset& test() const { return test_; }
  const Partition& partition() const { return partition_; }

  Batch sample_batch(std::size_t agent, std::uint64_t round, std::size_t batch_size,
                     std::uint64_t seed) const override {
    Batch b{agent, round, substream_seed(seed, agent, round), {}};
    const auto& own = partition_.assignments.at(agent);
    if (own.empty()) return b;
    Rng rng(b.stream);
    b.indices.resize(std::max<std::size_t>(batch_size, 1));
    for (auto& idx : b.indices) idx = own[rng.below(own.size())];
    return b;
  }

  LossGrad loss_and_grad(const Vector& x, const Batch& batch) const override {
    require_finite(x, "loss_and_grad");
    return average(x, batch.indices);
  }

  LossGrad local_objective(std::size_t agent, const Vector& x) const override {
    return average(x, partition_.assignments.at(agent));
  }

  Evaluation evaluate(const Vector& x) const override { return evaluate_on(x, test_); }

  Evaluation evaluate_on(const Vector& x, const Dataset& data) const {
    return evaluate_classifier(model_, x, data);
  }

 private:
  // An agent without data has f_i = 0: it only relays.
  LossGrad average(const Vector& x, std::span<const std::size_t> indices) const {
    LossGrad out{0.0, Vector::Zero(x.size())};
    if (indices.empty()) return out;
    for (std::size_t idx : indices) {
      out.loss += model_.accumulate(x, train_.features.row(static_cast<Eigen::Index>(idx)),
                                    train_.labels[idx], out.grad);
    }
    const double n = static_cast<double>(indices.size());
    out.loss /= n;
    out.grad /= n;
    return out;
  }

  Model model_;
  ProblemKind kind_;
  Dataset train_;
  Dataset test_;
  Partition partition_;
};

/// Train and test draws of the spec's Gaussian cluster data.
inline std::pair<Dataset, Dataset> make_datasets(const SyntheticProblemSpec& spec) {
  GaussianMixture mixture(spec.classes, spec.d, spec.separation, spec.seed);
  return {mixture.sample(spec.samples, mix64(spec.seed ^ 0x7a1)),
          mixture.sample(spec.test_samples, mix64(spec.seed ^ 0x7e57))};
}

/// Builds the problem a spec describes. Classification kinds draw a Gaussian
/// cluster dataset and split it with a Dirichlet(alpha) partition.
inline std::shared_ptr<const Problem> make_problem(const SyntheticProblemSpec& spec) {
  if (spec.kind == ProblemKind::quadratic) {
    return std::make_shared<QuadraticProblem>(make_quadratic(spec));
  }
  if (spec.samples < spec.n_agents) throw InvalidArgument("make_problem: fewer samples than agents");
  auto [train, test] = make_datasets(spec);
  Partition part = dirichlet_partition(train.labels, spec.n_agents, spec.alpha,
                                       spec.partition_seed, spec.min_per_agent);
  if (spec.kind == ProblemKind::softmax) {
    return std::make_shared<ClassificationProblem<SoftmaxModel>>(
        SoftmaxModel{spec.d, spec.classes}, spec.kind, std::move(train), std::move(test),
        std::move(part));
  }
  if (spec.hidden == 0 || spec.hidden > 64) throw InvalidArgument("make_problem: mlp hidden units must be in [1, 64]");
  return std::make_shared<ClassificationProblem<MlpModel>>(
      MlpModel{spec.d, spec.hidden, spec.classes}, spec.kind, std::move(train), std::move(test),
      std::move(part));
}

/// Max over coordinates of |analytic - central difference| / max(1, |a|, |n|)
/// on the global objective.
inline double finite_diff_check(const Problem& p, const Vector& x, double eps) {
  if (!(eps >= 1e-8 && eps <= 1e-3)) throw InvalidArgument("finite_diff_check: eps must be in [1e-8, 1e-3]");
  const Vector analytic = p.global_objective(x).grad;
  double worst = 0.0;
  Vector probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    probe(j) = x(j) + eps;
    const double up = p.global_objective(probe).loss;
    probe(j) = x(j) - eps;
    const double down = p.global_objective(probe).loss;
    probe(j) = x(j);
    const double numeric = (up - down) / (2.0 * eps);
    const double scale = std::max({1.0, std::abs(analytic(j)), std::abs(numeric)});
    worst = std::max(worst, std::abs(analytic(j) - numeric) / scale);
  }
  return worst;
}

}  // namespace gutsim

#endif  // GUTSIM_MODELS_HPP
