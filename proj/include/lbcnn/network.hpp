#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lbcnn/coarsening.hpp"
#include "lbcnn/dataset.hpp"
#include "lbcnn/kernels.hpp"
#include "lbcnn/lb_operator.hpp"

namespace lbcnn {

// ---------------------------------------------------------------------------
// Layers

/// Non-owning view of one convolution's parameters. theta holds K blocks of
/// (in x out) column-major matrices: theta[k][i, o] = theta[k * in * out + o * in + i].
struct ConvParams {
  int K = 1;
  int in = 1;
  int out = 1;
  const double* theta = nullptr;
  const double* bias = nullptr;  // null: no bias

  Eigen::Map<const Eigen::MatrixXd> slice(int k) const {
    return Eigen::Map<const Eigen::MatrixXd>(theta + static_cast<std::ptrdiff_t>(k) * in * out, in, out);
  }
};

struct ConvCache {
  const NormalizedOperator* op = nullptr;
  ConvParams params;
  std::vector<Eigen::MatrixXd> basis;  // P_k(Delta~) X, k = 0..K-1
};

struct ConvGrads {
  Eigen::MatrixXd dX;
  std::vector<Eigen::MatrixXd> dTheta;  // K blocks of (in x out)
  Eigen::VectorXd dBias;
};

/// Y[:, o] = sum_i sum_k theta[k, i, o] P_k(Delta~) X[:, i] + bias[o].
Eigen::MatrixXd conv_forward(const NormalizedOperator& op, const Eigen::MatrixXd& X, const ConvParams& params,
                             ConvCache* cache = nullptr, Exec exec = Exec::parallel);

/// Gradients through a cached convolution. dX uses the transposed recurrence
/// because Delta~ is not symmetric.
ConvGrads conv_backward(const ConvCache& cache, const Eigen::MatrixXd& dY, Exec exec = Exec::parallel);

Eigen::MatrixXd relu(const Eigen::MatrixXd& X);
/// Passes dY where X > 0; the subgradient at 0 is 0.
Eigen::MatrixXd relu_backward(const Eigen::MatrixXd& X, const Eigen::MatrixXd& dY);

/// Numerically stable softmax of a logit vector.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);
/// -log p[label]; throws InputError when label is out of range.
double cross_entropy(const Eigen::VectorXd& probabilities, int label);

// ---------------------------------------------------------------------------
// Model

struct LayerSpec {
  int filters_out = 8;
  int K = 6;
  int pool_p = 1;
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  int hidden = 128;
  int classes = 2;
  bool conv_bias = true;
  bool l2_on_conv = false;
  PoolMode pool_mode = PoolMode::real_only;
};

/// Offsets of each parameter block inside the flat parameter vector, in the
/// order conv layers (theta, bias), W1, b1, W2, b2.
struct ParamLayout {
  struct Conv {
    int level = 0;  // hierarchy level the layer runs on
    int K = 1, in = 1, out = 1;
    std::ptrdiff_t theta = 0, bias = -1;
  };
  std::vector<Conv> conv;
  std::ptrdiff_t features = 0;  // flattened feature count entering the FC layer
  int top_level = 0;            // level of the final pooled features
  int hidden = 0, classes = 0;
  std::ptrdiff_t w1 = 0, b1 = 0, w2 = 0, b2 = 0;
  std::ptrdiff_t total = 0;
};

struct ForwardTrace;

class Model {
 public:
  /// The hierarchy must be deep enough for the summed pooling exponents.
  Model(NetworkSpec spec, CoarseningHierarchy hierarchy, PolyFamily family, std::uint64_t seed,
        double inflation = kDefaultLambdaInflation);

  const NetworkSpec& spec() const { return spec_; }
  const ParamLayout& layout() const { return layout_; }
  const CoarseningHierarchy& hierarchy() const { return hierarchy_; }
  PolyFamily family() const { return family_; }
  Eigen::Index input_size() const { return hierarchy_.levels.front().real_size(); }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  /// Class probabilities for one real-vertex signal.
  Eigen::VectorXd predict_proba(const Eigen::VectorXd& signal) const;
  int predict(const Eigen::VectorXd& signal) const;

  /// Mean cross-entropy over the batch plus the l2 penalty; fills `grad`
  /// (resized to the parameter count) when non-null. Samples run concurrently
  /// under Exec::parallel and are reduced in sample order, so the result does
  /// not depend on the thread count.
  double loss_and_gradient(const LabeledSignals& data, const std::vector<int>& batch, double l2_weight, Eigen::VectorXd* grad,
                           Exec exec = Exec::parallel) const;

  /// l2_weight * (|W1|^2 + |W2|^2 [+ |theta|^2 when l2_on_conv]).
  double l2_penalty(double l2_weight) const;

 private:
  double sample_loss_and_gradient(const Eigen::VectorXd& signal, int label, double scale, Eigen::VectorXd* grad) const;
  void forward(const Eigen::VectorXd& signal, ForwardTrace& trace) const;
  ConvParams conv_params(std::size_t layer) const;

  NetworkSpec spec_;
  CoarseningHierarchy hierarchy_;
  PolyFamily family_;
  std::vector<NormalizedOperator> level_ops_;  // one per hierarchy level used by a conv layer
  std::vector<int> level_op_index_;            // hierarchy level -> index into level_ops_, -1 if unused
  ParamLayout layout_;
  Eigen::VectorXd params_;
};

// ---------------------------------------------------------------------------
// Optimization

enum class LrSchedule { multiplicative, subtractive, constant };

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  double lr0 = 1e-3;
  double lr_decay = 0.05;
  int decay_every = 20;
  double momentum = 0.9;
  double l2_weight = 5e-4;
  std::uint64_t seed = 0;
  LrSchedule schedule = LrSchedule::multiplicative;
  int positive_class = 1;
};

std::string to_string(LrSchedule schedule);
LrSchedule parse_lr_schedule(const std::string& name);

/// multiplicative: lr0 * decay^floor(epoch / every); subtractive: max(lr0 - decay * floor(epoch / every), 0).
double learning_rate(const TrainConfig& config, int epoch);

/// v <- momentum * v - lr * g;  p <- p + v.
void sgd_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, Eigen::VectorXd& velocity,
              const TrainConfig& config, int epoch);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

struct Metrics {
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double gmean = 0.0;
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::size_t total = 0;
};

/// Percentages from binary confusion counts; an empty class gives 0.
Metrics metrics_from_confusion(std::size_t tp, std::size_t tn, std::size_t fp, std::size_t fn);
double gmean(double sensitivity, double specificity);

/// Mini-batch SGD. Deterministic for a given config.seed.
std::vector<EpochRecord> train(Model& model, const LabeledSignals& train_set, const LabeledSignals& val_set,
                               const TrainConfig& config, Exec exec = Exec::parallel);

Metrics evaluate(const Model& model, const LabeledSignals& data, int positive_class = 1);
/// Mean cross-entropy (no regularizer) over a dataset.
double dataset_loss(const Model& model, const LabeledSignals& data, Exec exec = Exec::parallel);

// ---------------------------------------------------------------------------
// Checkpoints: flat little-endian float64 parameter file.

void write_params(const std::string& path, const Eigen::VectorXd& params);
Eigen::VectorXd read_params(const std::string& path, std::ptrdiff_t expected_count);

}  // namespace lbcnn
