#include "lbcnn/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <random>

#include "lbcnn/error.hpp"
#include "lbcnn/poly_filters.hpp"

namespace lbcnn {

// ---------------------------------------------------------------------------
// Layers

Eigen::MatrixXd conv_forward(const NormalizedOperator& op, const Eigen::MatrixXd& X, const ConvParams& params,
                             ConvCache* cache, Exec exec) {
  if (X.rows() != op.size()) throw InputError("conv_forward: signal rows do not match operator size");
  if (X.cols() != params.in) throw InputError("conv_forward: channel count does not match theta");
  if (params.K < 1 || params.theta == nullptr) throw InputError("conv_forward: missing filter coefficients");

  std::vector<Eigen::MatrixXd> basis = poly_basis_apply(op, X, params.K, false, exec);
  Eigen::MatrixXd Y = basis[0] * params.slice(0);
  for (int k = 1; k < params.K; ++k) Y.noalias() += basis[k] * params.slice(k);
  if (params.bias != nullptr) {
    Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(params.bias, params.out);
  }
  if (cache != nullptr) {
    cache->op = &op;
    cache->params = params;
    cache->basis = std::move(basis);
  }
  return Y;
}

ConvGrads conv_backward(const ConvCache& cache, const Eigen::MatrixXd& dY, Exec exec) {
  const ConvParams& p = cache.params;
  if (cache.op == nullptr || static_cast<int>(cache.basis.size()) != p.K) {
    throw InputError("conv_backward: cache does not come from a forward pass");
  }
  if (dY.rows() != cache.op->size() || dY.cols() != p.out) throw InputError("conv_backward: dY shape mismatch");

  ConvGrads g;
  g.dTheta.reserve(static_cast<std::size_t>(p.K));
  for (int k = 0; k < p.K; ++k) g.dTheta.push_back(cache.basis[k].transpose() * dY);
  g.dBias = dY.colwise().sum().transpose();

  // P_k(Delta~)^T = P_k(Delta~^T): run the recurrence on the transpose over dY.
  const std::vector<Eigen::MatrixXd> tbasis = poly_basis_apply(*cache.op, dY, p.K, true, exec);
  g.dX = tbasis[0] * p.slice(0).transpose();
  for (int k = 1; k < p.K; ++k) g.dX.noalias() += tbasis[k] * p.slice(k).transpose();
  return g;
}

Eigen::MatrixXd relu(const Eigen::MatrixXd& X) { return X.cwiseMax(0.0); }

Eigen::MatrixXd relu_backward(const Eigen::MatrixXd& X, const Eigen::MatrixXd& dY) {
  return (X.array() > 0.0).select(dY, 0.0);
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const Eigen::ArrayXd e = (logits.array() - logits.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

double cross_entropy(const Eigen::VectorXd& probabilities, int label) {
  if (label < 0 || label >= probabilities.size()) throw InputError("label " + std::to_string(label) + " out of range");
  return -std::log(std::max(probabilities[label], std::numeric_limits<double>::min()));
}

// ---------------------------------------------------------------------------
// Model

namespace {

// Runs body(i) for i in [0, n), possibly across threads. Exceptions cannot
// leave an OpenMP region, so one is captured and rethrown after the loop.
template <class Body>
void for_each_index(std::ptrdiff_t n, bool parallel, Body body) {
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(lbcnn_loop_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

// Fake slots carry no signal: their conv outputs (bias only) are pinned to zero.
void zero_fake_rows(const HierarchyLevel& level, Eigen::MatrixXd& X) {
  for (Eigen::Index s = 0; s < X.rows(); ++s)
    if (level.fake_mask[s]) X.row(s).setZero();
}

}  // namespace

struct ForwardTrace {
  std::vector<ConvCache> conv;
  std::vector<Eigen::MatrixXd> pre;     // conv outputs before ReLU
  std::vector<Eigen::MatrixXd> pooled;  // stage outputs after pooling
  Eigen::VectorXd features;
  Eigen::VectorXd hidden_pre;
  Eigen::VectorXd hidden;
  Eigen::VectorXd probs;
};

Model::Model(NetworkSpec spec, CoarseningHierarchy hierarchy, PolyFamily family, std::uint64_t seed, double inflation)
    : spec_(std::move(spec)), hierarchy_(std::move(hierarchy)), family_(family) {
  if (spec_.layers.empty()) throw InputError("network needs at least one conv layer");
  if (spec_.hidden < 1 || spec_.classes < 2) throw InputError("network needs hidden >= 1 and classes >= 2");

  std::ptrdiff_t offset = 0;
  int level = 0;
  int channels = 1;
  level_op_index_.assign(static_cast<std::size_t>(hierarchy_.depth()) + 1, -1);
  for (const LayerSpec& ls : spec_.layers) {
    if (ls.filters_out < 1 || ls.K < 1 || ls.pool_p < 0) throw InputError("invalid layer spec");
    if (level + ls.pool_p > hierarchy_.depth()) {
      throw InputError("layer pooling needs " + std::to_string(level + ls.pool_p) +
                       " hierarchy levels, hierarchy has " + std::to_string(hierarchy_.depth()));
    }
    ParamLayout::Conv c;
    c.level = level;
    c.K = ls.K;
    c.in = channels;
    c.out = ls.filters_out;
    c.theta = offset;
    offset += static_cast<std::ptrdiff_t>(c.K) * c.in * c.out;
    if (spec_.conv_bias) {
      c.bias = offset;
      offset += c.out;
    }
    layout_.conv.push_back(c);
    if (level_op_index_[level] < 0) {
      level_op_index_[level] = static_cast<int>(level_ops_.size());
      level_ops_.push_back(hierarchy_.normalized(level, family_, inflation));
    }
    level += ls.pool_p;
    channels = ls.filters_out;
  }
  layout_.top_level = level;
  layout_.features = hierarchy_.levels[level].padded_size() * channels;
  layout_.hidden = spec_.hidden;
  layout_.classes = spec_.classes;
  layout_.w1 = offset;
  offset += layout_.features * spec_.hidden;
  layout_.b1 = offset;
  offset += spec_.hidden;
  layout_.w2 = offset;
  offset += static_cast<std::ptrdiff_t>(spec_.hidden) * spec_.classes;
  layout_.b2 = offset;
  offset += spec_.classes;
  layout_.total = offset;

  params_ = Eigen::VectorXd::Zero(layout_.total);
  std::mt19937_64 rng(seed);
  auto fill_uniform = [&](std::ptrdiff_t start, std::ptrdiff_t count, double fan_in) {
    std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
    for (std::ptrdiff_t i = 0; i < count; ++i) params_[start + i] = dist(rng);
  };
  for (const auto& c : layout_.conv) fill_uniform(c.theta, static_cast<std::ptrdiff_t>(c.K) * c.in * c.out, c.K * c.in);
  fill_uniform(layout_.w1, layout_.features * spec_.hidden, static_cast<double>(layout_.features));
  fill_uniform(layout_.w2, static_cast<std::ptrdiff_t>(spec_.hidden) * spec_.classes, spec_.hidden);
}

ConvParams Model::conv_params(std::size_t layer) const {
  const auto& c = layout_.conv[layer];
  return ConvParams{c.K, c.in, c.out, params_.data() + c.theta, c.bias >= 0 ? params_.data() + c.bias : nullptr};
}

void Model::forward(const Eigen::VectorXd& signal, ForwardTrace& t) const {
  if (signal.size() != input_size()) throw InputError("signal length does not match the model's mesh");
  const std::size_t L = layout_.conv.size();
  t.conv.assign(L, {});
  t.pre.resize(L);
  t.pooled.resize(L);

  Eigen::MatrixXd x = hierarchy_.scatter(signal);
  for (std::size_t l = 0; l < L; ++l) {
    const auto& c = layout_.conv[l];
    const NormalizedOperator& op = level_ops_[level_op_index_[c.level]];
    // Inner kernels run serially: batch-level parallelism sits one level up.
    t.pre[l] = conv_forward(op, x, conv_params(l), &t.conv[l], Exec::serial);
    zero_fake_rows(hierarchy_.levels[c.level], t.pre[l]);
    t.pooled[l] = pool_signal(hierarchy_, c.level, relu(t.pre[l]), 1 << spec_.layers[l].pool_p, spec_.pool_mode);
    x = t.pooled[l];
  }
  t.features = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());

  const Eigen::Map<const Eigen::MatrixXd> W1(params_.data() + layout_.w1, layout_.hidden, layout_.features);
  const Eigen::Map<const Eigen::VectorXd> b1(params_.data() + layout_.b1, layout_.hidden);
  const Eigen::Map<const Eigen::MatrixXd> W2(params_.data() + layout_.w2, layout_.classes, layout_.hidden);
  const Eigen::Map<const Eigen::VectorXd> b2(params_.data() + layout_.b2, layout_.classes);
  t.hidden_pre = W1 * t.features + b1;
  t.hidden = t.hidden_pre.cwiseMax(0.0);
  t.probs = softmax(W2 * t.hidden + b2);
}

Eigen::VectorXd Model::predict_proba(const Eigen::VectorXd& signal) const {
  ForwardTrace t;
  forward(signal, t);
  return t.probs;
}

int Model::predict(const Eigen::VectorXd& signal) const {
  const Eigen::VectorXd p = predict_proba(signal);
  Eigen::Index best = 0;
  p.maxCoeff(&best);
  return static_cast<int>(best);
}

double Model::sample_loss_and_gradient(const Eigen::VectorXd& signal, int label, double scale,
                                       Eigen::VectorXd* grad) const {
  ForwardTrace t;
  forward(signal, t);
  const double loss = cross_entropy(t.probs, label);
  if (grad == nullptr) return loss;

  Eigen::VectorXd& g = *grad;
  const Eigen::Map<const Eigen::MatrixXd> W1(params_.data() + layout_.w1, layout_.hidden, layout_.features);
  const Eigen::Map<const Eigen::MatrixXd> W2(params_.data() + layout_.w2, layout_.classes, layout_.hidden);

  Eigen::VectorXd dlogits = t.probs;
  dlogits[label] -= 1.0;
  dlogits *= scale;
  Eigen::Map<Eigen::MatrixXd>(g.data() + layout_.w2, layout_.classes, layout_.hidden) = dlogits * t.hidden.transpose();
  Eigen::Map<Eigen::VectorXd>(g.data() + layout_.b2, layout_.classes) = dlogits;
  const Eigen::VectorXd dhidden = (t.hidden_pre.array() > 0.0).select(W2.transpose() * dlogits, 0.0);
  Eigen::Map<Eigen::MatrixXd>(g.data() + layout_.w1, layout_.hidden, layout_.features) =
      dhidden * t.features.transpose();
  Eigen::Map<Eigen::VectorXd>(g.data() + layout_.b1, layout_.hidden) = dhidden;
  const Eigen::VectorXd dfeatures = W1.transpose() * dhidden;

  const std::size_t L = layout_.conv.size();
  Eigen::MatrixXd dpooled = Eigen::Map<const Eigen::MatrixXd>(dfeatures.data(), t.pooled[L - 1].rows(),
                                                              t.pooled[L - 1].cols());
  for (std::size_t l = L; l-- > 0;) {
    const auto& c = layout_.conv[l];
    const Eigen::MatrixXd drelu =
        unpool_signal(hierarchy_, c.level, dpooled, 1 << spec_.layers[l].pool_p, spec_.pool_mode);
    Eigen::MatrixXd dpre = relu_backward(t.pre[l], drelu);
    zero_fake_rows(hierarchy_.levels[c.level], dpre);
    ConvGrads cg = conv_backward(t.conv[l], dpre, Exec::serial);
    for (int k = 0; k < c.K; ++k) {
      Eigen::Map<Eigen::MatrixXd>(g.data() + c.theta + static_cast<std::ptrdiff_t>(k) * c.in * c.out, c.in, c.out) =
          cg.dTheta[k];
    }
    if (c.bias >= 0) Eigen::Map<Eigen::VectorXd>(g.data() + c.bias, c.out) = cg.dBias;
    if (l > 0) dpooled = std::move(cg.dX);
  }
  return loss;
}

double Model::l2_penalty(double l2_weight) const {
  double sq = params_.segment(layout_.w1, layout_.features * layout_.hidden).squaredNorm() +
              params_.segment(layout_.w2, static_cast<std::ptrdiff_t>(layout_.hidden) * layout_.classes).squaredNorm();
  if (spec_.l2_on_conv) {
    for (const auto& c : layout_.conv) sq += params_.segment(c.theta, static_cast<std::ptrdiff_t>(c.K) * c.in * c.out).squaredNorm();
  }
  return l2_weight * sq;
}

double Model::loss_and_gradient(const LabeledSignals& data, const std::vector<int>& batch, double l2_weight,
                                Eigen::VectorXd* grad, Exec exec) const {
  if (batch.empty()) throw InputError("loss_and_gradient: empty batch");
  const auto B = static_cast<std::ptrdiff_t>(batch.size());
  const double scale = 1.0 / static_cast<double>(B);
  std::vector<double> losses(batch.size(), 0.0);
  std::vector<Eigen::VectorXd> sample_grads(grad != nullptr ? batch.size() : 0);

  for_each_index(B, exec == Exec::parallel, [&](std::ptrdiff_t b) {
    const auto row = static_cast<std::size_t>(batch[b]);
    if (row >= data.size()) throw InputError("batch index " + std::to_string(row) + " out of range");
    Eigen::VectorXd* g = nullptr;
    if (grad != nullptr) {
      sample_grads[b] = Eigen::VectorXd::Zero(layout_.total);
      g = &sample_grads[b];
    }
    losses[b] = sample_loss_and_gradient(data.sample(row), data.labels[row], scale, g);
  });

  double loss = 0.0;
  for (double l : losses) loss += l;
  loss = loss * scale + l2_penalty(l2_weight);

  if (grad != nullptr) {
    *grad = Eigen::VectorXd::Zero(layout_.total);
    for (const auto& g : sample_grads) *grad += g;
    auto add_l2 = [&](std::ptrdiff_t start, std::ptrdiff_t count) {
      grad->segment(start, count) += 2.0 * l2_weight * params_.segment(start, count);
    };
    add_l2(layout_.w1, layout_.features * layout_.hidden);
    add_l2(layout_.w2, static_cast<std::ptrdiff_t>(layout_.hidden) * layout_.classes);
    if (spec_.l2_on_conv) {
      for (const auto& c : layout_.conv) add_l2(c.theta, static_cast<std::ptrdiff_t>(c.K) * c.in * c.out);
    }
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Optimization

std::string to_string(LrSchedule schedule) {
  switch (schedule) {
    case LrSchedule::multiplicative: return "multiplicative";
    case LrSchedule::subtractive: return "subtractive";
    case LrSchedule::constant: return "constant";
  }
  return "unknown";
}

LrSchedule parse_lr_schedule(const std::string& name) {
  if (name == "multiplicative") return LrSchedule::multiplicative;
  if (name == "subtractive") return LrSchedule::subtractive;
  if (name == "constant") return LrSchedule::constant;
  throw InputError("unknown learning-rate schedule '" + name + "'");
}

double learning_rate(const TrainConfig& config, int epoch) {
  const int steps = config.decay_every > 0 ? epoch / config.decay_every : 0;
  switch (config.schedule) {
    case LrSchedule::multiplicative: return config.lr0 * std::pow(config.lr_decay, steps);
    case LrSchedule::subtractive: return std::max(config.lr0 - config.lr_decay * steps, 0.0);
    case LrSchedule::constant: return config.lr0;
  }
  return config.lr0;
}

void sgd_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, Eigen::VectorXd& velocity,
              const TrainConfig& config, int epoch) {
  if (grads.size() != params.size()) throw InputError("sgd_step: gradient size mismatch");
  if (velocity.size() != params.size()) velocity = Eigen::VectorXd::Zero(params.size());
  const double lr = learning_rate(config, epoch);
  velocity = config.momentum * velocity - lr * grads;
  params += velocity;
}

double gmean(double sensitivity, double specificity) { return std::sqrt(sensitivity * specificity); }

Metrics metrics_from_confusion(std::size_t tp, std::size_t tn, std::size_t fp, std::size_t fn) {
  Metrics m;
  m.tp = tp;
  m.tn = tn;
  m.fp = fp;
  m.fn = fn;
  m.total = tp + tn + fp + fn;
  auto pct = [](std::size_t num, std::size_t den) { return den == 0 ? 0.0 : 100.0 * num / static_cast<double>(den); };
  m.accuracy = pct(tp + tn, m.total);
  m.sensitivity = pct(tp, tp + fn);
  m.specificity = pct(tn, tn + fp);
  m.gmean = gmean(m.sensitivity, m.specificity);
  return m;
}

Metrics evaluate(const Model& model, const LabeledSignals& data, int positive_class) {
  if (data.size() == 0) throw InputError("evaluate: empty dataset");
  const auto N = static_cast<std::ptrdiff_t>(data.size());
  std::vector<int> pred(data.size());
  for_each_index(N, true, [&](std::ptrdiff_t i) { pred[i] = model.predict(data.sample(static_cast<std::size_t>(i))); });

  std::size_t tp = 0, tn = 0, fp = 0, fn = 0, correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const bool truth = data.labels[i] == positive_class;
    const bool said = pred[i] == positive_class;
    if (pred[i] == data.labels[i]) ++correct;
    if (truth && said) ++tp;
    else if (truth) ++fn;
    else if (said) ++fp;
    else ++tn;
  }
  Metrics m = metrics_from_confusion(tp, tn, fp, fn);
  // Multi-class accuracy counts exact label matches.
  m.accuracy = 100.0 * correct / static_cast<double>(data.size());
  return m;
}

double dataset_loss(const Model& model, const LabeledSignals& data, Exec exec) {
  if (data.size() == 0) throw InputError("dataset_loss: empty dataset");
  std::vector<int> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  return model.loss_and_gradient(data, all, 0.0, nullptr, exec);
}

std::vector<EpochRecord> train(Model& model, const LabeledSignals& train_set, const LabeledSignals& val_set,
                               const TrainConfig& config, Exec exec) {
  if (train_set.size() == 0) throw InputError("train: empty training split");
  if (val_set.size() == 0) throw InputError("train: empty validation split");
  if (config.batch_size < 1 || config.epochs < 1) throw InputError("train: epochs and batch size must be positive");
  for (int c = 0; c < model.spec().classes; ++c) {
    if (std::find(train_set.labels.begin(), train_set.labels.end(), c) == train_set.labels.end()) {
      throw InputError("train: class " + std::to_string(c) + " absent from training split");
    }
  }

  std::mt19937_64 rng(config.seed);
  std::vector<int> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(model.params().size());
  Eigen::VectorXd grad;

  std::vector<EpochRecord> history;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::vector<int> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(stop));
      const double loss = model.loss_and_gradient(train_set, batch, config.l2_weight, &grad, exec);
      if (!std::isfinite(loss) || !grad.allFinite()) {
        throw NumericalError("train: non-finite loss or gradient in epoch " + std::to_string(epoch));
      }
      loss_sum += loss;
      sgd_step(model.params(), grad, velocity, config, epoch);
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = learning_rate(config, epoch);
    rec.train_loss = loss_sum / batches;
    rec.val_loss = dataset_loss(model, val_set, exec);
    rec.val_acc = evaluate(model, val_set, config.positive_class).accuracy;
    history.push_back(rec);
  }
  return history;
}

// ---------------------------------------------------------------------------
// Checkpoints

void write_params(const std::string& path, const Eigen::VectorXd& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write parameter file " + path);
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(params[i]);
    char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
    out.write(bytes, 8);
  }
}

Eigen::VectorXd read_params(const std::string& path, std::ptrdiff_t expected_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open parameter file " + path);
  Eigen::VectorXd params(expected_count);
  for (std::ptrdiff_t i = 0; i < expected_count; ++i) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
      throw InputError("parameter file " + path + " holds fewer than " + std::to_string(expected_count) + " values");
    }
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    params[i] = std::bit_cast<double>(bits);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw InputError("parameter file " + path + " holds more than " + std::to_string(expected_count) + " values");
  }
  return params;
}

}  // namespace lbcnn
