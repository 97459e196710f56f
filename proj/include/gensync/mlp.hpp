#pragma once

#include <vector>

#include "gensync/tensor.hpp"

namespace gensync {

class RandomStream;

/// Plain fully connected network: affine layers with ReLU between them and a
/// linear final layer.
struct MLPParams {
  struct Layer {
    Tensor weight;  // out x in
    Tensor bias;    // out
  };
  std::vector<Layer> layers;

  int input_width() const { return layers.front().weight.dim(1); }
  int output_width() const { return layers.back().weight.dim(0); }
  std::vector<Tensor> parameters() const;
};

/// Weights drawn from N(0, 1/sqrt(fan_in)), biases zero. `zero_final` zeroes
/// the last layer entirely.
MLPParams make_mlp(const std::vector<int>& widths, RandomStream& rng,
                   bool zero_final = false);

/// Applies the network to a rank-1 sample or row-wise to a rank-2 batch.
Tensor mlp_apply(const MLPParams& p, const Tensor& x);

}  // namespace gensync
