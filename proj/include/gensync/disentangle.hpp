#pragma once

#include <string>
#include <vector>

#include "gensync/tensor.hpp"

namespace gensync {

class RandomStream;

/// Learnable matrices of the identity-audio factorization
///   m = fused_proj . ((audio_proj a) . (identity_proj i)) + audio_skip a + identity_skip i
/// where "." between projections is the elementwise product. No biases.
struct DisentangleParams {
  Tensor audio_proj;     // d_h x d_a
  Tensor identity_proj;  // d_h x d_i
  Tensor fused_proj;     // d_m x d_h
  Tensor audio_skip;     // d_m x d_a
  Tensor identity_skip;  // d_m x d_i

  int audio_dim() const { return audio_proj.dim(1); }
  int identity_dim() const { return identity_proj.dim(1); }
  int latent_dim() const { return audio_proj.dim(0); }
  int out_dim() const { return fused_proj.dim(0); }
  std::vector<Tensor> parameters() const;
};

DisentangleParams make_disentangle_params(int d_a, int d_i, int d_h, int d_m,
                                          RandomStream& rng);

/// The factorized conditioning vector m; differentiable in both inputs and
/// all five matrices.
Tensor disentangle(const Tensor& audio, const Tensor& identity,
                   const DisentangleParams& p);

/// Verifies the additive/multiplicative decomposition numerically:
///   m(a1+a2, i) == m(a1, i) + m(a2, i) - identity_skip i
/// and symmetrically in the identity argument, within 1e-9.
bool bilinear_residual_check(const Tensor& a1, const Tensor& a2, const Tensor& i,
                             const DisentangleParams& p);

/// Per-identity learnable vectors, looked up by label. lookup returns the
/// live tensor so gradients reach the table.
class IdentityTable {
 public:
  void register_identity(const std::string& label, int dim, RandomStream& rng);
  void register_identity(const std::string& label, Tensor vec);
  Tensor lookup(const std::string& label) const;
  bool contains(const std::string& label) const;
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<Tensor>& vectors() const { return vectors_; }

 private:
  std::vector<std::string> labels_;
  std::vector<Tensor> vectors_;
};

/// Identity vectors start near zero so early training behaves like a shared
/// identity-free model.
constexpr double kIdentityInitStddev = 0.01;

}  // namespace gensync
