#include "gensync/disentangle.hpp"

#include <cmath>

#include "gensync/rng.hpp"

namespace gensync {

std::vector<Tensor> DisentangleParams::parameters() const {
  return {audio_proj, identity_proj, fused_proj, audio_skip, identity_skip};
}

DisentangleParams make_disentangle_params(int d_a, int d_i, int d_h, int d_m,
                                          RandomStream& rng) {
  auto init = [&](int rows, int cols) {
    return Tensor::randn({rows, cols}, rng, 1.0 / std::sqrt(static_cast<double>(cols)),
                         true);
  };
  DisentangleParams p;
  p.audio_proj = init(d_h, d_a);
  p.identity_proj = init(d_h, d_i);
  p.fused_proj = init(d_m, d_h);
  p.audio_skip = init(d_m, d_a);
  p.identity_skip = init(d_m, d_i);
  return p;
}

Tensor disentangle(const Tensor& audio, const Tensor& identity,
                   const DisentangleParams& p) {
  if (audio.rank() != 1 || audio.dim(0) != p.audio_dim()) {
    throw DimensionError("disentangle: audio " + shape_str(audio.shape()) +
                         " does not match projection width " +
                         std::to_string(p.audio_dim()));
  }
  if (identity.rank() != 1 || identity.dim(0) != p.identity_dim()) {
    throw DimensionError("disentangle: identity " + shape_str(identity.shape()) +
                         " does not match projection width " +
                         std::to_string(p.identity_dim()));
  }
  Tensor fused = matvec(p.fused_proj,
                        hadamard(matvec(p.audio_proj, audio), matvec(p.identity_proj, identity)));
  return add(fused, add(matvec(p.audio_skip, audio), matvec(p.identity_skip, identity)));
}

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.at(i) - b.at(i)));
  return m;
}

Tensor add_vec(const Tensor& a, const Tensor& b) { return add(a, b); }

}  // namespace

bool bilinear_residual_check(const Tensor& a1, const Tensor& a2, const Tensor& i,
                             const DisentangleParams& p) {
  // linear in the audio argument at fixed identity
  Tensor lhs_a = disentangle(add_vec(a1, a2), i, p);
  Tensor rhs_a = sub(add(disentangle(a1, i, p), disentangle(a2, i, p)),
                     matvec(p.identity_skip, i));
  if (max_abs_diff(lhs_a, rhs_a) > 1e-9) return false;

  // and symmetrically in the identity argument: reuse a1 as the fixed audio
  // and (i, i) as the two identity vectors
  Tensor lhs_i = disentangle(a1, add_vec(i, i), p);
  Tensor rhs_i = sub(add(disentangle(a1, i, p), disentangle(a1, i, p)),
                     matvec(p.audio_skip, a1));
  return max_abs_diff(lhs_i, rhs_i) <= 1e-9;
}

void IdentityTable::register_identity(const std::string& label, int dim,
                                      RandomStream& rng) {
  register_identity(label, Tensor::randn({dim}, rng, kIdentityInitStddev, true));
}

void IdentityTable::register_identity(const std::string& label, Tensor vec) {
  if (contains(label)) throw ContractError("identity '" + label + "' already registered");
  labels_.push_back(label);
  vectors_.push_back(std::move(vec));
}

Tensor IdentityTable::lookup(const std::string& label) const {
  for (size_t k = 0; k < labels_.size(); ++k) {
    if (labels_[k] == label) return vectors_[k];
  }
  std::string known;
  for (size_t k = 0; k < labels_.size(); ++k) {
    if (k) known += ", ";
    known += labels_[k];
  }
  throw LookupError("unknown identity '" + label + "', registered: {" + known + "}");
}

bool IdentityTable::contains(const std::string& label) const {
  for (const auto& l : labels_) {
    if (l == label) return true;
  }
  return false;
}

}  // namespace gensync
