#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "hgs/sampler.hpp"
#include "hgs/tensor.hpp"

namespace hgs {

enum class ModelKind { gcn, sage };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view s);

inline constexpr std::size_t matrices_per_layer(ModelKind kind) noexcept {
  return kind == ModelKind::gcn ? 1 : 2;
}

// [f0, hidden, ..., hidden, classes] for a model with `layers` layers.
std::vector<std::size_t> model_dims(std::size_t num_features, std::size_t hidden,
                                    std::size_t num_classes, std::size_t layers);

/// Layer weights. GCN layer l holds {W}; GraphSAGE holds {W_self, W_neigh},
/// each layer_dims[l] x layer_dims[l + 1].
template <typename T>
struct ModelParamsT {
  ModelKind kind = ModelKind::gcn;
  std::vector<std::size_t> layer_dims;
  std::vector<std::vector<MatrixT<T>>> weights;

  std::size_t num_layers() const noexcept { return weights.size(); }
  std::size_t num_scalars() const noexcept;
  // Throws ContractError when dims and matrices disagree.
  void validate() const;

  template <typename U>
  ModelParamsT<U> cast() const {
    ModelParamsT<U> out{kind, layer_dims, {}};
    for (const auto& layer : weights) {
      auto& dst = out.weights.emplace_back();
      for (const auto& w : layer) dst.push_back(w.template cast<U>());
    }
    return out;
  }
};

template <typename T>
struct GradientsT {
  std::vector<std::vector<MatrixT<T>>> weights;
  std::size_t sample_count = 0;
};

using ModelParams = ModelParamsT<float>;
using Gradients = GradientsT<float>;

// Glorot-uniform initialization from a stream keyed by seed.
ModelParams init_params(ModelKind kind, std::span<const std::size_t> layer_dims,
                        std::uint64_t seed);

/// Per-edge aggregation weights for one block, aligned with block.edges.
///
/// GCN: 1/sqrt((in(v)+1)(out(u)+1)) per edge plus a self term 1/(in(v)+1)
/// per dst row, on block-local degrees. SAGE: mean weights 1/in(v), no self
/// term.
struct AggregationWeights {
  std::vector<double> edge;
  std::vector<double> self;  // empty for SAGE
};

AggregationWeights normalize_block(const Block& block, ModelKind kind);

enum class Activation { relu, identity };

struct ForwardOptions {
  // Applied on every layer but the last. identity is a test hook.
  Activation activation = Activation::relu;
  // When set, incremented once per accumulate term the aggregation performs.
  std::uint64_t* aggregation_counter = nullptr;
};

template <typename T>
struct LayerState {
  MatrixT<T> aggregated;  // num_dst x in_dim
  MatrixT<T> pre;         // num_dst x out_dim, before the activation
  MatrixT<T> out;         // num_dst x out_dim
  AggregationWeights norm;
};

template <typename T>
struct ActivationsT {
  MatrixT<T> input;
  std::vector<LayerState<T>> layers;
  Activation activation = Activation::relu;

  const MatrixT<T>& logits() const { return layers.back().out; }
  const MatrixT<T>& layer_input(std::size_t l) const {
    return l == 0 ? input : layers[l - 1].out;
  }
};

using Activations = ActivationsT<float>;

/// Runs every layer of the batch. `input` row i holds the features of
/// batch.input_nodes()[i]. Aggregation accumulates each dst row's terms in
/// ascending src order. Throws ContractError on shape mismatch.
template <typename T>
ActivationsT<T> forward(const ModelParamsT<T>& params, const MiniBatch& batch,
                        const MatrixT<T>& input, const ForwardOptions& opts = {});

template <typename T>
struct LossAndGradT {
  double loss = 0.0;
  GradientsT<T> grads;
};

/// Mean softmax cross-entropy over the seed rows and its exact gradient.
template <typename T>
LossAndGradT<T> loss_and_grad(const ModelParamsT<T>& params, const ActivationsT<T>& acts,
                              const MiniBatch& batch);

// Loss only, for finite-difference checks.
template <typename T>
double cross_entropy(const MatrixT<T>& logits, std::span<const std::int32_t> labels);

// W <- W - lr * G. Throws ContractError on shape mismatch.
template <typename T>
ModelParamsT<T> sgd_step(const ModelParamsT<T>& params, const GradientsT<T>& grads, double lr);

/// Mean of the inputs weighted by sample_count, reduced in input order with
/// double accumulators. Inputs with sample_count 0 contribute nothing.
Gradients average_gradients(std::span<const Gradients> grads);

enum class OptimizerKind { sgd, adam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view s);

class Optimizer {
public:
  virtual ~Optimizer() = default;
  virtual ModelParams step(const ModelParams& params, const Gradients& grads) = 0;
};

class SgdOptimizer final : public Optimizer {
public:
  explicit SgdOptimizer(double lr) : lr_(lr) {}
  ModelParams step(const ModelParams& params, const Gradients& grads) override;

private:
  double lr_;
};

class AdamOptimizer final : public Optimizer {
public:
  explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  ModelParams step(const ModelParams& params, const Gradients& grads) override;

private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<MatrixT<double>>> m_, v_;
};

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, double lr);

}  // namespace hgs
