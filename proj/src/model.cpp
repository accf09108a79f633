#include "hgs/model.hpp"

#include <cmath>
#include <string>

#include "hgs/error.hpp"
#include "hgs/rng.hpp"

namespace hgs {

std::string_view to_string(ModelKind kind) { return kind == ModelKind::gcn ? "gcn" : "sage"; }

ModelKind parse_model_kind(std::string_view s) {
  if (s == "gcn") return ModelKind::gcn;
  if (s == "sage") return ModelKind::sage;
  throw ContractError("unknown model \"" + std::string(s) + "\"");
}

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

OptimizerKind parse_optimizer_kind(std::string_view s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ContractError("unknown optimizer \"" + std::string(s) + "\"");
}

std::vector<std::size_t> model_dims(std::size_t num_features, std::size_t hidden,
                                    std::size_t num_classes, std::size_t layers) {
  if (layers == 0) throw ContractError("a model needs at least one layer");
  std::vector<std::size_t> dims{num_features};
  for (std::size_t l = 1; l < layers; ++l) dims.push_back(hidden);
  dims.push_back(num_classes);
  return dims;
}

template <typename T>
std::size_t ModelParamsT<T>::num_scalars() const noexcept {
  std::size_t n = 0;
  for (const auto& layer : weights) {
    for (const auto& w : layer) n += static_cast<std::size_t>(w.size());
  }
  return n;
}

template <typename T>
void ModelParamsT<T>::validate() const {
  if (layer_dims.size() != weights.size() + 1) {
    throw ContractError("layer_dims must have one more entry than there are layers");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].size() != matrices_per_layer(kind)) {
      throw ContractError("layer " + std::to_string(l) + " has the wrong number of matrices");
    }
    for (const auto& w : weights[l]) {
      if (static_cast<std::size_t>(w.rows()) != layer_dims[l] ||
          static_cast<std::size_t>(w.cols()) != layer_dims[l + 1]) {
        throw ContractError("layer " + std::to_string(l) + " weight shape does not chain");
      }
    }
  }
}

ModelParams init_params(ModelKind kind, std::span<const std::size_t> layer_dims,
                        std::uint64_t seed) {
  if (layer_dims.size() < 2) throw ContractError("need at least input and output dims");
  ModelParams p;
  p.kind = kind;
  p.layer_dims.assign(layer_dims.begin(), layer_dims.end());
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const auto in = layer_dims[l];
    const auto out = layer_dims[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    auto& layer = p.weights.emplace_back();
    for (std::size_t m = 0; m < matrices_per_layer(kind); ++m) {
      CounterRng rng(seed, {0x3a11, l, m});
      Matrix w(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out));
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        w.data()[i] = static_cast<float>(rng.uniform(-limit, limit));
      }
      layer.push_back(std::move(w));
    }
  }
  return p;
}

AggregationWeights normalize_block(const Block& block, ModelKind kind) {
  std::vector<std::size_t> in_deg(block.num_dst, 0);
  std::vector<std::size_t> out_deg(block.num_src(), 0);
  for (const Edge& e : block.edges) {
    ++in_deg[e.dst];
    ++out_deg[e.src];
  }
  AggregationWeights w;
  w.edge.reserve(block.edges.size());
  if (kind == ModelKind::gcn) {
    for (const Edge& e : block.edges) {
      w.edge.push_back(1.0 / std::sqrt(static_cast<double>(in_deg[e.dst] + 1) *
                                       static_cast<double>(out_deg[e.src] + 1)));
    }
    w.self.reserve(block.num_dst);
    for (auto d : in_deg) w.self.push_back(1.0 / static_cast<double>(d + 1));
  } else {
    for (const Edge& e : block.edges) w.edge.push_back(1.0 / static_cast<double>(in_deg[e.dst]));
  }
  return w;
}

namespace {

// Visits the accumulate terms of every dst row in ascending src order. The
// GCN self term of row i sits at src index i.
template <typename Fn>
void for_each_term(const Block& block, const AggregationWeights& norm, Fn&& fn) {
  const bool self = !norm.self.empty();
  std::size_t k = 0;
  for (std::uint32_t i = 0; i < block.num_dst; ++i) {
    bool self_done = !self;
    for (; k < block.edges.size() && block.edges[k].dst == i; ++k) {
      if (!self_done && block.edges[k].src > i) {
        fn(i, i, norm.self[i]);
        self_done = true;
      }
      fn(block.edges[k].src, i, norm.edge[k]);
    }
    if (!self_done) fn(i, i, norm.self[i]);
  }
}

template <typename T>
void check_shapes(const ModelParamsT<T>& params, const MiniBatch& batch, const MatrixT<T>& input) {
  params.validate();
  if (batch.blocks.size() != params.num_layers()) {
    throw ContractError("batch has " + std::to_string(batch.blocks.size()) +
                        " blocks but the model has " + std::to_string(params.num_layers()) +
                        " layers");
  }
  if (static_cast<std::size_t>(input.rows()) != batch.input_nodes().size()) {
    throw ContractError("input rows must align with batch input nodes");
  }
  if (static_cast<std::size_t>(input.cols()) != params.layer_dims.front()) {
    throw ContractError("input width does not match the first layer");
  }
  for (std::size_t l = 0; l + 1 < batch.blocks.size(); ++l) {
    if (batch.blocks[l].num_dst != batch.blocks[l + 1].num_src()) {
      throw ContractError("block " + std::to_string(l) + " does not chain into the next");
    }
  }
}

}  // namespace

template <typename T>
ActivationsT<T> forward(const ModelParamsT<T>& params, const MiniBatch& batch,
                        const MatrixT<T>& input, const ForwardOptions& opts) {
  check_shapes(params, batch, input);
  ActivationsT<T> acts;
  acts.input = input;
  acts.activation = opts.activation;
  const std::size_t layers = params.num_layers();
  acts.layers.resize(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const Block& block = batch.blocks[l];
    const MatrixT<T>& h = acts.layer_input(l);
    LayerState<T>& st = acts.layers[l];
    const auto nd = static_cast<Eigen::Index>(block.num_dst);

    st.norm = normalize_block(block, params.kind);
    st.aggregated = MatrixT<T>::Zero(nd, h.cols());
    std::uint64_t terms = 0;
    for_each_term(block, st.norm, [&](std::uint32_t src, std::uint32_t dst, double w) {
      st.aggregated.row(dst) += static_cast<T>(w) * h.row(src);
      ++terms;
    });
    if (opts.aggregation_counter) *opts.aggregation_counter += terms;

    const auto& w = params.weights[l];
    if (params.kind == ModelKind::gcn) {
      st.pre.noalias() = st.aggregated * w[0];
    } else {
      st.pre.noalias() = h.topRows(nd) * w[0];
      st.pre.noalias() += st.aggregated * w[1];
    }
    if (l + 1 < layers && opts.activation == Activation::relu) {
      st.out = st.pre.cwiseMax(T(0));
    } else {
      st.out = st.pre;
    }
  }
  return acts;
}

template <typename T>
double cross_entropy(const MatrixT<T>& logits, std::span<const std::int32_t> labels) {
  if (labels.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const auto row = logits.row(static_cast<Eigen::Index>(r));
    const double mx = static_cast<double>(row.maxCoeff());
    double sum = 0.0;
    for (Eigen::Index c = 0; c < row.size(); ++c) {
      sum += std::exp(static_cast<double>(row(c)) - mx);
    }
    total += mx + std::log(sum) - static_cast<double>(row(labels[r]));
  }
  return total / static_cast<double>(labels.size());
}

template <typename T>
LossAndGradT<T> loss_and_grad(const ModelParamsT<T>& params, const ActivationsT<T>& acts,
                              const MiniBatch& batch) {
  const std::size_t layers = params.num_layers();
  if (acts.layers.size() != layers) throw ContractError("activations do not match the model");
  const MatrixT<T>& logits = acts.logits();
  const std::size_t num_seeds = batch.seeds.size();
  const auto classes = logits.cols();
  if (num_seeds > static_cast<std::size_t>(logits.rows()) || batch.labels.size() != num_seeds) {
    throw ContractError("seed rows do not fit the logits");
  }
  for (auto y : batch.labels) {
    if (y < 0 || y >= classes) throw ContractError("label outside the class range");
  }

  LossAndGradT<T> res;
  res.loss = cross_entropy<T>(logits, batch.labels);
  res.grads.sample_count = num_seeds;
  res.grads.weights.resize(layers);

  // d loss / d logits; rows past the seeds carry no loss.
  MatrixT<T> d_out = MatrixT<T>::Zero(logits.rows(), classes);
  const double inv_b = num_seeds ? 1.0 / static_cast<double>(num_seeds) : 0.0;
  for (std::size_t r = 0; r < num_seeds; ++r) {
    const auto row = logits.row(static_cast<Eigen::Index>(r));
    const double mx = static_cast<double>(row.maxCoeff());
    double sum = 0.0;
    for (Eigen::Index c = 0; c < classes; ++c) sum += std::exp(static_cast<double>(row(c)) - mx);
    for (Eigen::Index c = 0; c < classes; ++c) {
      const double p = std::exp(static_cast<double>(row(c)) - mx) / sum;
      const double target = c == batch.labels[r] ? 1.0 : 0.0;
      d_out(static_cast<Eigen::Index>(r), c) = static_cast<T>((p - target) * inv_b);
    }
  }

  for (std::size_t l = layers; l-- > 0;) {
    const Block& block = batch.blocks[l];
    const LayerState<T>& st = acts.layers[l];
    const MatrixT<T>& h = acts.layer_input(l);
    const auto nd = static_cast<Eigen::Index>(block.num_dst);
    const auto& w = params.weights[l];

    MatrixT<T> d_pre = d_out;
    if (l + 1 < layers && acts.activation == Activation::relu) {
      d_pre = (st.pre.array() > T(0)).select(d_out, T(0));
    }
    auto& gw = res.grads.weights[l];
    const std::size_t agg_idx = params.kind == ModelKind::gcn ? 0 : 1;
    gw.resize(matrices_per_layer(params.kind));
    gw[agg_idx].noalias() = st.aggregated.transpose() * d_pre;
    if (params.kind == ModelKind::sage) gw[0].noalias() = h.topRows(nd).transpose() * d_pre;

    if (l == 0) break;
    MatrixT<T> d_agg = d_pre * w[agg_idx].transpose();
    MatrixT<T> d_h = MatrixT<T>::Zero(h.rows(), h.cols());
    if (params.kind == ModelKind::sage) d_h.topRows(nd).noalias() = d_pre * w[0].transpose();
    for_each_term(block, st.norm, [&](std::uint32_t src, std::uint32_t dst, double wt) {
      d_h.row(src) += static_cast<T>(wt) * d_agg.row(dst);
    });
    d_out = std::move(d_h);
  }
  return res;
}

template <typename T>
ModelParamsT<T> sgd_step(const ModelParamsT<T>& params, const GradientsT<T>& grads, double lr) {
  if (grads.weights.size() != params.weights.size()) {
    throw ContractError("gradient tree does not match the parameters");
  }
  ModelParamsT<T> out = params;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    if (grads.weights[l].size() != params.weights[l].size()) {
      throw ContractError("gradient tree does not match the parameters");
    }
    for (std::size_t m = 0; m < params.weights[l].size(); ++m) {
      const auto& g = grads.weights[l][m];
      auto& w = out.weights[l][m];
      if (g.rows() != w.rows() || g.cols() != w.cols()) {
        throw ContractError("gradient shape does not match weight shape");
      }
      w -= static_cast<T>(lr) * g;
    }
  }
  return out;
}

Gradients average_gradients(std::span<const Gradients> grads) {
  std::size_t total = 0;
  const Gradients* shape = nullptr;
  for (const auto& g : grads) {
    if (g.sample_count == 0) continue;
    total += g.sample_count;
    if (!shape) shape = &g;
  }
  if (!shape) return Gradients{};
  std::vector<std::vector<MatrixT<double>>> acc;
  for (const auto& layer : shape->weights) {
    auto& a = acc.emplace_back();
    for (const auto& w : layer) a.push_back(MatrixT<double>::Zero(w.rows(), w.cols()));
  }
  for (const auto& g : grads) {
    if (g.sample_count == 0) continue;
    if (g.weights.size() != acc.size()) throw ContractError("gradient trees differ");
    const double n = static_cast<double>(g.sample_count);
    for (std::size_t l = 0; l < acc.size(); ++l) {
      if (g.weights[l].size() != acc[l].size()) throw ContractError("gradient trees differ");
      for (std::size_t m = 0; m < acc[l].size(); ++m) {
        if (g.weights[l][m].rows() != acc[l][m].rows() ||
            g.weights[l][m].cols() != acc[l][m].cols()) {
          throw ContractError("gradient shapes differ");
        }
        acc[l][m] += n * g.weights[l][m].cast<double>();
      }
    }
  }
  Gradients out;
  out.sample_count = total;
  const double n = static_cast<double>(total);
  for (auto& layer : acc) {
    auto& o = out.weights.emplace_back();
    for (auto& a : layer) o.push_back((a / n).cast<float>());
  }
  return out;
}

ModelParams SgdOptimizer::step(const ModelParams& params, const Gradients& grads) {
  return sgd_step(params, grads, lr_);
}

ModelParams AdamOptimizer::step(const ModelParams& params, const Gradients& grads) {
  if (grads.weights.size() != params.weights.size()) {
    throw ContractError("gradient tree does not match the parameters");
  }
  if (m_.empty()) {
    for (const auto& layer : params.weights) {
      auto& m = m_.emplace_back();
      auto& v = v_.emplace_back();
      for (const auto& w : layer) {
        m.push_back(MatrixT<double>::Zero(w.rows(), w.cols()));
        v.push_back(MatrixT<double>::Zero(w.rows(), w.cols()));
      }
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  ModelParams out = params;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    for (std::size_t k = 0; k < params.weights[l].size(); ++k) {
      const MatrixT<double> g = grads.weights[l][k].cast<double>();
      if (g.rows() != m_[l][k].rows() || g.cols() != m_[l][k].cols()) {
        throw ContractError("gradient shape does not match weight shape");
      }
      m_[l][k] = beta1_ * m_[l][k] + (1.0 - beta1_) * g;
      v_[l][k] = beta2_ * v_[l][k] + (1.0 - beta2_) * g.cwiseProduct(g);
      const MatrixT<double> update =
          ((m_[l][k] / c1).array() / ((v_[l][k] / c2).array().sqrt() + eps_)).matrix();
      out.weights[l][k] -= (lr_ * update).cast<float>();
    }
  }
  return out;
}

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, double lr) {
  if (kind == OptimizerKind::adam) return std::make_unique<AdamOptimizer>(lr);
  return std::make_unique<SgdOptimizer>(lr);
}

#define HGS_INSTANTIATE(T)                                                                     \
  template struct ModelParamsT<T>;                                                             \
  template ActivationsT<T> forward(const ModelParamsT<T>&, const MiniBatch&, const MatrixT<T>&, \
                                   const ForwardOptions&);                                     \
  template LossAndGradT<T> loss_and_grad(const ModelParamsT<T>&, const ActivationsT<T>&,       \
                                         const MiniBatch&);                                    \
  template double cross_entropy(const MatrixT<T>&, std::span<const std::int32_t>);             \
  template ModelParamsT<T> sgd_step(const ModelParamsT<T>&, const GradientsT<T>&, double);

HGS_INSTANTIATE(float)
HGS_INSTANTIATE(double)

#undef HGS_INSTANTIATE

}  // namespace hgs
