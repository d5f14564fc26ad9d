#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "agcn/autodiff.hpp"
#include "agcn/data.hpp"
#include "agcn/errors.hpp"
#include "agcn/gcn.hpp"
#include "agcn/grad_check.hpp"
#include "agcn/labelgraph.hpp"
#include "agcn/matrix.hpp"
#include "agcn/metrics.hpp"
#include "agcn/rng.hpp"

namespace agcn {

struct OptimizerConfig {
  double lr = 1e-2;
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

struct ScheduleConfig {
  double decay_factor = 10.0;
  std::size_t decay_every = 30;  // epochs between learning-rate divisions
  std::size_t total_epochs = 65;
};

struct ModelConfig {
  double alpha = 1.0;  // weight of the graph-sparsity term
  LgVariant variant = LgVariant::Default;
  std::size_t latent_dim = 0;  // projection width of the graph builder; 0 = embed dim
  bool lg_bias = false;
  // GCN widths between embed dim and feature dim; unset = one hidden layer
  // of twice the embedding dimension, empty = single linear layer.
  std::optional<std::vector<std::size_t>> hidden_dims;
  double leaky_slope = 0.2;
  SparseReduction sparse_reduction = SparseReduction::Sum;
  double degree_floor = 1e-6;
  OptimizerConfig optimizer;
  ScheduleConfig schedule;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const {
    if (alpha < 0.0) throw config_error("alpha must be >= 0, got " + std::to_string(alpha));
    if (!(optimizer.lr > 0.0)) throw config_error("learning rate must be positive");
    if (optimizer.momentum < 0.0 || optimizer.momentum >= 1.0)
      throw config_error("momentum must lie in [0,1)");
    if (optimizer.weight_decay < 0.0) throw config_error("weight decay must be >= 0");
    if (!(schedule.decay_factor >= 1.0))
      throw config_error("schedule decay factor must be >= 1");
    if (schedule.decay_every == 0) throw config_error("schedule decay interval is 0 epochs");
    if (schedule.total_epochs == 0) throw config_error("total epochs must be >= 1");
    if (batch_size == 0) throw config_error("batch size must be >= 1");
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0))
      throw config_error("leaky slope must lie in (0,1)");
    if (!(degree_floor > 0.0)) throw config_error("degree floor must be positive");
    if (hidden_dims)
      for (std::size_t d : *hidden_dims)
        if (d == 0) throw config_error("hidden layer width 0");
  }

  std::vector<std::size_t> stack_dims(std::size_t embed_dim, std::size_t feature_dim) const {
    std::vector<std::size_t> dims{embed_dim};
    if (hidden_dims)
      dims.insert(dims.end(), hidden_dims->begin(), hidden_dims->end());
    else
      dims.push_back(2 * embed_dim);
    dims.push_back(feature_dim);
    return dims;
  }
};

enum class GraphSource { Adaptive, Fixed };

// The trainable system: label embeddings feed a graph builder (or a fixed
// supplied graph), the GCN propagates embeddings over that graph into one
// classifier row per label, and logits are inner products with sample
// features.
struct Model {
  ModelConfig config;
  EmbeddingMatrix embeddings;
  std::size_t feature_dim = 0;
  GraphSource graph_source = GraphSource::Adaptive;
  Matrix fixed_graph;  // used as the normalized graph when source is Fixed
  LgParams lg;
  GcnStack stack;
  std::vector<Matrix> velocities;  // parallel to named_params()
  Rng rng{0};

  std::vector<NamedParam> named_params() {
    std::vector<NamedParam> out;
    if (graph_source == GraphSource::Adaptive)
      for (auto& p : lg.named_params()) out.push_back(p);
    for (auto& p : stack.named_params()) out.push_back(p);
    return out;
  }

  void zero_grad() {
    for (auto& np : named_params()) np.param->zero_grad();
  }
};

// Parameter draw order: graph-builder weights first, then GCN layers; the
// same stream then drives epoch shuffles, so a seed pins the whole run.
inline Model make_model(EmbeddingMatrix embeddings, std::size_t feature_dim,
                        const ModelConfig& config) {
  config.validate();
  embeddings.validate();
  if (feature_dim == 0) throw config_error("feature dimension must be >= 1");
  Model m;
  m.config = config;
  m.embeddings = std::move(embeddings);
  m.feature_dim = feature_dim;
  m.rng = Rng(config.seed);
  m.lg = LgParams::create(config.variant, m.embeddings.dim(), m.embeddings.count(),
                          config.latent_dim, m.rng, config.lg_bias);
  m.stack = GcnStack::create(config.stack_dims(m.embeddings.dim(), feature_dim),
                             config.leaky_slope, m.rng);
  for (auto& np : m.named_params())
    m.velocities.emplace_back(np.param->value.rows(), np.param->value.cols());
  return m;
}

// Ablation: the supplied matrix is used directly as the normalized graph;
// no graph builder, no graph gradient.
inline Model make_model_fixed(EmbeddingMatrix embeddings, std::size_t feature_dim,
                              const ModelConfig& config, Matrix fixed_graph) {
  config.validate();
  embeddings.validate();
  if (feature_dim == 0) throw config_error("feature dimension must be >= 1");
  if (fixed_graph.rows() != embeddings.count() || fixed_graph.cols() != embeddings.count())
    throw input_error("fixed graph is " + fixed_graph.shape_str() + " but there are " +
                      std::to_string(embeddings.count()) + " labels");
  if (!fixed_graph.all_finite()) throw input_error("fixed graph has non-finite entries");
  Model m;
  m.config = config;
  m.embeddings = std::move(embeddings);
  m.feature_dim = feature_dim;
  m.graph_source = GraphSource::Fixed;
  m.fixed_graph = std::move(fixed_graph);
  m.rng = Rng(config.seed);
  m.stack = GcnStack::create(config.stack_dims(m.embeddings.dim(), feature_dim),
                             config.leaky_slope, m.rng);
  for (auto& np : m.named_params())
    m.velocities.emplace_back(np.param->value.rows(), np.param->value.cols());
  return m;
}

// ---- forward pieces

struct StepVars {
  Var a_hat;   // C x C normalized graph
  Var bank;    // C x D classifier rows
  Var l_cls;   // 1x1 mean binary cross entropy
  Var l_a;     // 1x1 graph sparsity term
  Var total;   // l_cls + alpha * l_a
};

inline Var taped_graph(Tape& tape, Model& m) {
  if (m.graph_source == GraphSource::Fixed) return tape.constant(m.fixed_graph);
  return normalize_graph(tape, lg_raw(tape, m.embeddings, m.lg), m.config.degree_floor);
}

// Records one full training objective on the tape: graph, classifier bank,
// batch-mean classification loss, sparsity term, weighted total.
inline StepVars build_step(Tape& tape, Model& m, const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows())
    throw std::invalid_argument("build_step: " + std::to_string(x.rows()) +
                                " feature rows vs " + std::to_string(y.rows()) +
                                " label rows");
  if (x.cols() != m.feature_dim)
    throw std::invalid_argument("build_step: features are " + x.shape_str() +
                                ", expected cols " + std::to_string(m.feature_dim));
  if (y.cols() != m.embeddings.count())
    throw std::invalid_argument("build_step: labels are " + y.shape_str() +
                                ", expected cols " + std::to_string(m.embeddings.count()));
  StepVars sv;
  sv.a_hat = taped_graph(tape, m);
  sv.bank = build_classifiers(tape, sv.a_hat, tape.constant(m.embeddings.values), m.stack);
  Var logits = tape.matmul(tape.constant(x), tape.transpose(sv.bank));
  const double n = static_cast<double>(x.rows() * m.embeddings.count());
  sv.l_cls = tape.scale(tape.reduce_sum(tape.bce_with_logits(logits, y)), 1.0 / n);
  sv.l_a = sparse_graph_loss(tape, sv.a_hat, m.config.sparse_reduction);
  sv.total = tape.add(sv.l_cls, tape.scale(sv.l_a, m.config.alpha));
  return sv;
}

// Mean elementwise binary cross entropy from logits; equals the per-sample
// `-(1/C) sum_j [y log s + (1-y) log(1-s)]` averaged over samples.
inline double bce_loss(const Matrix& logits, const Matrix& targets) {
  Tape tape;
  Var l = tape.bce_with_logits(tape.constant(logits), targets);
  return sum(tape.value(l)) / static_cast<double>(logits.size());
}

inline double total_loss(double l_cls, double l_a, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("total_loss: alpha must be >= 0");
  return l_cls + alpha * l_a;
}

// Logits of one feature vector under a classifier bank: p = bank * x.
inline std::vector<double> predict(const Matrix& bank, const std::vector<double>& x) {
  if (bank.cols() != x.size())
    throw std::invalid_argument("predict: bank is " + bank.shape_str() + " but x has " +
                                std::to_string(x.size()) + " dims");
  std::vector<double> p(bank.rows(), 0.0);
  for (std::size_t i = 0; i < bank.rows(); ++i)
    for (std::size_t j = 0; j < bank.cols(); ++j) p[i] += bank(i, j) * x[j];
  return p;
}

// Frozen-parameter views (throwaway tape, no gradients).
inline Matrix current_graph(Model& m) {
  Tape tape;
  return tape.value(taped_graph(tape, m));
}

inline Matrix raw_graph(Model& m) {
  if (m.graph_source == GraphSource::Fixed) return m.fixed_graph;
  return lg_matrix(m.embeddings, m.lg);
}

inline Matrix classifier_bank(Model& m) {
  Tape tape;
  Var a_hat = taped_graph(tape, m);
  return tape.value(
      build_classifiers(tape, a_hat, tape.constant(m.embeddings.values), m.stack));
}

// Confidences sigma(x bank^T) for a stack of features.
inline Matrix predict_scores(Model& m, const Matrix& x) {
  if (x.cols() != m.feature_dim)
    throw std::invalid_argument("predict_scores: features are " + x.shape_str() +
                                ", expected cols " + std::to_string(m.feature_dim));
  Matrix logits = matmul(x, transpose(classifier_bank(m)));
  for (double& v : logits.raw()) v = Tape::stable_sigmoid(v);
  return logits;
}

// ---- optimization

// Momentum SGD with L2 applied to the gradient:
//   v <- momentum v + (g + weight_decay w);  w <- w - lr v
inline void sgd_step(Parameter& p, Matrix& velocity, double lr, double momentum,
                     double weight_decay) {
  if (!(lr > 0.0)) throw std::invalid_argument("sgd_step: lr must be positive");
  if (!velocity.same_shape(p.value))
    throw std::invalid_argument("sgd_step: velocity " + velocity.shape_str() +
                                " vs parameter " + p.value.shape_str());
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const double g = p.grad.raw()[i] + weight_decay * p.value.raw()[i];
    const double v = momentum * velocity.raw()[i] + g;
    velocity.raw()[i] = v;
    p.value.raw()[i] -= lr * v;
  }
}

inline double scheduled_lr(const OptimizerConfig& opt, const ScheduleConfig& sched,
                           std::size_t epoch) {
  return opt.lr / std::pow(sched.decay_factor,
                           static_cast<double>(epoch / sched.decay_every));
}

struct EpochStats {
  std::size_t epoch = 0;
  double lr = 0.0;
  double l_cls = 0.0;   // sample-weighted epoch mean
  double l_a = 0.0;     // sample-weighted epoch mean
  double l_total = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
};

// Seeded minibatch training: shuffle, slice into batches (last one short),
// rebuild the tape per step, backpropagate, momentum-SGD every parameter.
// A non-finite total loss aborts with the offending epoch and step; after
// the last epoch all parameters are checked finite.
inline TrainResult train(Model& m, const std::vector<LabeledSample>& data) {
  if (data.empty()) throw input_error("train: empty dataset");
  const std::size_t c = m.embeddings.count();
  for (std::size_t i = 0; i < data.size(); ++i) {
    bool any = false;
    for (int l : data[i].labels) any = any || (l != 0);
    if (!any)
      throw input_error("train: sample " + std::to_string(i) + " has no active labels");
  }
  const Matrix x_all = features_matrix(data);
  const Matrix y_all = labels_matrix(data, c);
  if (x_all.cols() != m.feature_dim)
    throw input_error("train: dataset feature dim " + std::to_string(x_all.cols()) +
                      " does not match model " + std::to_string(m.feature_dim));

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<NamedParam> params = m.named_params();

  TrainResult result;
  for (std::size_t epoch = 0; epoch < m.config.schedule.total_epochs; ++epoch) {
    const double lr = scheduled_lr(m.config.optimizer, m.config.schedule, epoch);
    m.rng.shuffle(order);
    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    std::size_t step = 0;
    for (std::size_t start = 0; start < order.size(); start += m.config.batch_size, ++step) {
      const std::size_t b = std::min(m.config.batch_size, order.size() - start);
      Matrix x(b, m.feature_dim), y(b, c);
      for (std::size_t r = 0; r < b; ++r) {
        const std::size_t src = order[start + r];
        for (std::size_t j = 0; j < m.feature_dim; ++j) x(r, j) = x_all(src, j);
        for (std::size_t j = 0; j < c; ++j) y(r, j) = y_all(src, j);
      }
      Tape tape;
      StepVars sv = build_step(tape, m, x, y);
      const double cls = tape.value(sv.l_cls)(0, 0);
      const double la = tape.value(sv.l_a)(0, 0);
      const double tot = tape.value(sv.total)(0, 0);
      if (!std::isfinite(tot))
        throw divergence_error(epoch, step,
                               "total loss is not finite at epoch " +
                                   std::to_string(epoch) + ", step " +
                                   std::to_string(step));
      m.zero_grad();
      tape.backward(sv.total);
      for (std::size_t p = 0; p < params.size(); ++p)
        sgd_step(*params[p].param, m.velocities[p], lr, m.config.optimizer.momentum,
                 m.config.optimizer.weight_decay);
      const double w = static_cast<double>(b);
      stats.l_cls += w * cls;
      stats.l_a += w * la;
      stats.l_total += w * tot;
    }
    const double n = static_cast<double>(order.size());
    stats.l_cls /= n;
    stats.l_a /= n;
    stats.l_total /= n;
    result.history.push_back(stats);
  }
  for (auto& np : params)
    if (!np.param->value.all_finite())
      throw divergence_error(m.config.schedule.total_epochs, 0,
                             "parameter " + np.name + " is not finite after training");
  return result;
}

// Metric battery on frozen parameters.
inline MetricReport evaluate(Model& m, const std::vector<LabeledSample>& data,
                             double threshold = 0.5, std::size_t top_k = 3) {
  if (data.empty()) throw input_error("evaluate: empty dataset");
  const Matrix x = features_matrix(data);
  const Matrix y = labels_matrix(data, m.embeddings.count());
  if (x.cols() != m.feature_dim)
    throw input_error("evaluate: dataset feature dim " + std::to_string(x.cols()) +
                      " does not match model " + std::to_string(m.feature_dim));
  const Matrix scores = predict_scores(m, x);
  return compute_report(scores, y, m.embeddings.labels, threshold,
                        std::min(top_k, m.embeddings.count()));
}

}  // namespace agcn
