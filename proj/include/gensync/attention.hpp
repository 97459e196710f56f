#pragma once

#include <array>
#include <vector>

#include "gensync/mlp.hpp"
#include "gensync/scene.hpp"
#include "gensync/tensor.hpp"

namespace gensync {

class RandomStream;

/// Raw per-frame conditioning.
struct FrameCondition {
  std::vector<double> audio;    // d_a
  std::array<double, 2> eye{};  // left/right blink in [0,1]
  std::array<double, 2> view{}; // azimuth, elevation in radians
};

/// Projections of the three conditioning sources into the shared attention
/// width, plus the query projector for canonical features.
struct AttentionParams {
  Tensor cond_proj;   // d x d_m
  Tensor eye_proj;    // d x d_e
  Tensor view_proj;   // d x d_v
  Tensor query_proj;  // d x d_f

  int width() const { return cond_proj.dim(0); }
  std::vector<Tensor> parameters() const;
};

AttentionParams make_attention_params(int d, int d_m, int d_e, int d_v, int d_f,
                                      RandomStream& rng);

/// Key/value token matrix (3 x d): one token each for the disentangled
/// conditioning vector, the eye features and the viewpoint. Keys equal values.
Tensor build_condition_tokens(const Tensor& cond, const Tensor& eye, const Tensor& view,
                              const AttentionParams& p);

/// Scaled dot-product cross attention between per-Gaussian queries and the
/// condition tokens. Weights (N x 3) stay inspectable.
struct FusedEmbedding {
  Tensor values;   // N x d
  Tensor weights;  // N x 3, rows are convex
};

FusedEmbedding spatial_audio_attention(const Tensor& features, const Tensor& tokens,
                                       const AttentionParams& p);

/// Per-Gaussian attribute offsets. Position offsets are clamped to
/// max-norm <= kPositionOffsetBound.
struct Deformation {
  Tensor dposition;       // N x 3
  Tensor drotation;       // N x 4
  Tensor dlog_scale;      // N x 3
  Tensor dopacity_logit;  // N x 1

  static Deformation zeros(int n);
};

constexpr double kPositionOffsetBound = 0.5;

/// Shared deformation network applied per Gaussian; the output splits into
/// the four offset blocks (3 + 4 + 3 + 1).
Deformation deformation_offsets(const Tensor& fused, const MLPParams& deform_mlp);

/// Attributes after applying offsets; colors stay canonical.
struct DeformedState {
  Tensor positions;  // N x 3
  Tensor rotations;  // N x 4, unit rows
  Tensor log_scales; // N x 3
  Tensor opacities;  // N x 1 in (0,1)
  Tensor colors;     // N x 3
};

DeformedState apply_deformation(const GaussianCloud& cloud,
                                const CanonicalAttributes& attrs, const Deformation& d);

}  // namespace gensync
