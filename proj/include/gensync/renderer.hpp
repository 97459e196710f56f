#pragma once

#include "gensync/camera.hpp"
#include "gensync/tensor.hpp"

namespace gensync {

/// Orthographic projection of one Gaussian: 2D mean (camera-plane scene
/// units), symmetric 2x2 covariance [[a,b],[b,c]] regularized by +1e-6 I,
/// and depth (camera z).
struct Projected {
  double mean_x = 0.0;
  double mean_y = 0.0;
  double cov_a = 0.0, cov_b = 0.0, cov_c = 0.0;
  double depth = 0.0;
};

Projected project(const double* position, const double* quaternion,
                  const double* log_scale, const Camera& cam);

constexpr double kCovRegularization = 1e-6;
constexpr double kScaleMin = 1e-4;
constexpr double kScaleMax = 1.0;
constexpr double kAlphaMax = 0.999;
constexpr double kCullSigma = 3.0;

/// Depth-sorted alpha compositing of anisotropic Gaussians over a black
/// background. Differentiable w.r.t. every per-Gaussian input. Ties in depth
/// break by original index so rendering is invariant to input order.
///
/// positions N x 3, rotations N x 4 (unit rows), log_scales N x 3,
/// opacities N x 1 in (0,1), colors N x 3 in [0,1]; output {H, W, 3}.
Tensor render(const Tensor& positions, const Tensor& rotations, const Tensor& log_scales,
              const Tensor& opacities, const Tensor& colors, const Camera& cam);

/// Mean over pixels and channels of 0.8 L1 + 0.2 L2.
Tensor image_loss(const Tensor& rendered, const Tensor& target);

}  // namespace gensync
