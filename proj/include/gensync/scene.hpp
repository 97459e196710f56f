#pragma once

#include <cstdint>
#include <vector>

#include "gensync/mlp.hpp"
#include "gensync/tensor.hpp"

namespace gensync {

enum class RegionTag : uint8_t { kFace = 0, kMouth = 1, kEyeLeft = 2, kEyeRight = 3 };

/// Canonical Gaussians: directly optimized positions, learned per-Gaussian
/// feature vectors and the network that maps features to static attributes.
struct GaussianCloud {
  int count = 0;
  Tensor positions;  // N x 3, scene units
  Tensor features;   // N x d_f
  MLPParams canonical_mlp;
  std::vector<RegionTag> region_tags;  // fixed after init
};

enum class CloudLayout { kRandom, kFaceTemplate };

/// Deterministic for fixed (n, seed). The face template scatters 70% of the
/// Gaussians over a head ellipse and 10% each over the two eyes and the
/// mouth bar, tagging regions accordingly.
GaussianCloud init_cloud(int n, uint64_t seed, CloudLayout layout, int feature_dim = 32,
                         int canonical_hidden = 64);

/// Static per-Gaussian attributes. Activations keep every invariant by
/// construction: color in [0,1], opacity in (0,1), unit rotations.
struct CanonicalAttributes {
  Tensor color;          // N x 3
  Tensor opacity;        // N x 1, sigmoid(opacity_logit)
  Tensor opacity_logit;  // N x 1, the pre-activation deformation adds to
  Tensor log_scale;      // N x 3
  Tensor rotation;       // N x 4, unit rows
};

CanonicalAttributes canonical_attributes(const GaussianCloud& cloud);

/// Row-normalizes quaternions; gradient flows through the normalization.
Tensor normalize_rotations(const Tensor& quats);

/// Initial bias of the log-scale head so splats start at a usable size.
constexpr double kLogScaleBias = -3.0;  // exp(-3) ~ 0.05 scene units

// Geometry shared by the face template and the synthetic corpus.
struct FaceLayout {
  double head_center_y = 0.0;
  double head_sx = 0.26, head_sy = 0.34, head_sz = 0.06;
  double eye_x = 0.20, eye_y = 0.18, eye_z = -0.02;
  double eye_sx = 0.055, eye_sy = 0.042;
  double mouth_y = -0.28, mouth_z = -0.03;
  double mouth_half_width = 0.20, mouth_sy = 0.024;
};

}  // namespace gensync
