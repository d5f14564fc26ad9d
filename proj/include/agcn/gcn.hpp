#pragma once

#include <string>
#include <vector>

#include "agcn/autodiff.hpp"
#include "agcn/grad_check.hpp"
#include "agcn/init.hpp"
#include "agcn/matrix.hpp"
#include "agcn/rng.hpp"

namespace agcn {

struct GcnLayer {
  Parameter weight;   // d_in x d_out
  bool activate = true;
  double slope = 0.2;
};

// Stack of graph-convolution layers; each maps H to act(Ahat H W). The final
// layer is linear so its output can serve directly as a bank of per-label
// classifier weights.
struct GcnStack {
  std::vector<GcnLayer> layers;

  // dims = [input, hidden..., output]; weights drawn layer by layer.
  static GcnStack create(const std::vector<std::size_t>& dims, double slope, Rng& rng) {
    if (dims.size() < 2)
      throw std::invalid_argument("gcn stack needs at least input and output dims");
    for (std::size_t d : dims)
      if (d == 0) throw std::invalid_argument("gcn stack: zero layer dimension");
    GcnStack s;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      GcnLayer layer;
      layer.weight = Parameter(glorot_uniform(dims[i], dims[i + 1], rng));
      layer.activate = (i + 2 < dims.size());
      layer.slope = slope;
      s.layers.push_back(std::move(layer));
    }
    return s;
  }

  std::size_t input_dim() const { return layers.front().weight.value.rows(); }
  std::size_t output_dim() const { return layers.back().weight.value.cols(); }

  std::vector<NamedParam> named_params(const std::string& prefix = "gcn.") {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < layers.size(); ++i)
      out.push_back({prefix + "w" + std::to_string(i), &layers[i].weight});
    return out;
  }
};

inline Var gcn_layer_forward(Tape& tape, Var a_hat, Var h, GcnLayer& layer) {
  Var z = tape.matmul(tape.matmul(a_hat, h), tape.leaf(layer.weight));
  return layer.activate ? tape.leaky_relu(z, layer.slope) : z;
}

// Runs the whole stack from the label embeddings; the result is C x D, one
// classifier row per label.
inline Var build_classifiers(Tape& tape, Var a_hat, Var embeddings, GcnStack& stack) {
  Var h = embeddings;
  for (auto& layer : stack.layers) h = gcn_layer_forward(tape, a_hat, h, layer);
  return h;
}

}  // namespace agcn
