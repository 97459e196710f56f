#include "gensync/attention.hpp"

#include <cmath>

#include "gensync/rng.hpp"

namespace gensync {

std::vector<Tensor> AttentionParams::parameters() const {
  return {cond_proj, eye_proj, view_proj, query_proj};
}

AttentionParams make_attention_params(int d, int d_m, int d_e, int d_v, int d_f,
                                      RandomStream& rng) {
  if (d < 1) throw ContractError("attention width must be >= 1");
  auto init = [&](int rows, int cols) {
    return Tensor::randn({rows, cols}, rng, 1.0 / std::sqrt(static_cast<double>(cols)),
                         true);
  };
  AttentionParams p;
  p.cond_proj = init(d, d_m);
  p.eye_proj = init(d, d_e);
  p.view_proj = init(d, d_v);
  p.query_proj = init(d, d_f);
  return p;
}

Tensor build_condition_tokens(const Tensor& cond, const Tensor& eye, const Tensor& view,
                              const AttentionParams& p) {
  return stack_rows({matvec(p.cond_proj, cond), matvec(p.eye_proj, eye),
                     matvec(p.view_proj, view)});
}

FusedEmbedding spatial_audio_attention(const Tensor& features, const Tensor& tokens,
                                       const AttentionParams& p) {
  const int d = p.width();
  if (d < 1) throw ContractError("spatial_audio_attention: attention width is zero");
  if (features.rank() != 2 || features.dim(1) != p.query_proj.dim(1)) {
    throw DimensionError("spatial_audio_attention: features " +
                         shape_str(features.shape()) + " do not match query projector " +
                         shape_str(p.query_proj.shape()));
  }
  Tensor queries = matmul(features, transpose(p.query_proj));  // N x d
  Tensor logits = scale(matmul(queries, transpose(tokens)),
                        1.0 / std::sqrt(static_cast<double>(d)));
  FusedEmbedding fused;
  fused.weights = softmax_rows(logits);
  fused.values = matmul(fused.weights, tokens);
  return fused;
}

Deformation Deformation::zeros(int n) {
  Deformation d;
  d.dposition = Tensor::zeros({n, 3});
  d.drotation = Tensor::zeros({n, 4});
  d.dlog_scale = Tensor::zeros({n, 3});
  d.dopacity_logit = Tensor::zeros({n, 1});
  return d;
}

Deformation deformation_offsets(const Tensor& fused, const MLPParams& deform_mlp) {
  if (deform_mlp.output_width() != 11) {
    throw ContractError("deformation_offsets: network must emit 11 offsets, emits " +
                        std::to_string(deform_mlp.output_width()));
  }
  Tensor out = mlp_apply(deform_mlp, fused);  // N x 11
  Deformation d;
  d.dposition = clamp_sym(slice_cols(out, 0, 3), kPositionOffsetBound);
  d.drotation = slice_cols(out, 3, 7);
  d.dlog_scale = slice_cols(out, 7, 10);
  d.dopacity_logit = slice_cols(out, 10, 11);
  return d;
}

DeformedState apply_deformation(const GaussianCloud& cloud,
                                const CanonicalAttributes& attrs, const Deformation& d) {
  if (d.dposition.dim(0) != cloud.count) {
    throw DimensionError("apply_deformation: offsets for " +
                         std::to_string(d.dposition.dim(0)) + " Gaussians, cloud has " +
                         std::to_string(cloud.count));
  }
  DeformedState s;
  s.positions = add(cloud.positions, d.dposition);
  s.rotations = normalize_rotations(add(attrs.rotation, d.drotation));
  s.log_scales = add(attrs.log_scale, d.dlog_scale);
  s.opacities = sigmoid(add(attrs.opacity_logit, d.dopacity_logit));
  s.colors = attrs.color;
  return s;
}

}  // namespace gensync
