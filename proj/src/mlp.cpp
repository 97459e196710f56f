#include "gensync/mlp.hpp"

#include <cmath>

#include "gensync/rng.hpp"

namespace gensync {

std::vector<Tensor> MLPParams::parameters() const {
  std::vector<Tensor> out;
  for (const auto& l : layers) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

MLPParams make_mlp(const std::vector<int>& widths, RandomStream& rng, bool zero_final) {
  if (widths.size() < 2) throw ContractError("make_mlp: need at least input and output widths");
  MLPParams p;
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l], out = widths[l + 1];
    const bool last = l + 2 == widths.size();
    Tensor w = (zero_final && last)
                   ? Tensor::zeros({out, in}, true)
                   : Tensor::randn({out, in}, rng, 1.0 / std::sqrt(static_cast<double>(in)), true);
    Tensor b = Tensor::zeros({out}, true);
    p.layers.push_back({w, b});
  }
  return p;
}

Tensor mlp_apply(const MLPParams& p, const Tensor& x) {
  if (p.layers.empty()) throw ContractError("mlp_apply: empty network");
  if (x.rank() != 1 && x.rank() != 2) {
    throw DimensionError("mlp_apply: input must be rank-1 or rank-2, got " +
                         shape_str(x.shape()));
  }
  Tensor h = x;
  for (size_t l = 0; l < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    const int in = layer.weight.dim(1);
    const int width = h.rank() == 1 ? h.dim(0) : h.dim(1);
    if (width != in) {
      throw DimensionError("mlp_apply: layer " + std::to_string(l) + " expects width " +
                           std::to_string(in) + ", got " + shape_str(h.shape()));
    }
    if (h.rank() == 1) {
      h = add(matvec(layer.weight, h), layer.bias);
    } else {
      h = add_row_bias(matmul(h, transpose(layer.weight)), layer.bias);
    }
    if (l + 1 < p.layers.size()) h = relu(h);
  }
  return h;
}

}  // namespace gensync
