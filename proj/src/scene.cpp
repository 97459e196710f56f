#include "gensync/scene.hpp"

#include <cmath>

#include "gensync/rng.hpp"

namespace gensync {

namespace {

MLPParams init_canonical_mlp(int feature_dim, int hidden, RandomStream& rng) {
  // outputs: color raw (3), opacity logit (1), log-scale (3), rotation raw (4)
  MLPParams p = make_mlp({feature_dim, hidden, 11}, rng);
  Tensor bias = p.layers.back().bias;
  bias.at(4) = kLogScaleBias;
  bias.at(5) = kLogScaleBias;
  bias.at(6) = kLogScaleBias;
  bias.at(7) = 1.0;  // rotation starts near identity
  return p;
}

}  // namespace

GaussianCloud init_cloud(int n, uint64_t seed, CloudLayout layout, int feature_dim,
                         int canonical_hidden) {
  if (n < 1) throw ContractError("init_cloud: need at least one Gaussian");
  if (feature_dim < 1) throw ContractError("init_cloud: feature_dim must be >= 1");
  RandomStream rng(seed);
  GaussianCloud cloud;
  cloud.count = n;
  cloud.positions = Tensor::zeros({n, 3}, true);
  cloud.region_tags.assign(static_cast<size_t>(n), RegionTag::kFace);
  double* pos = cloud.positions.data();

  if (layout == CloudLayout::kRandom) {
    for (int i = 0; i < n * 3; ++i) pos[i] = rng.uniform(-1.0, 1.0);
  } else {
    const FaceLayout fl;
    const int n_eye = n / 10;
    const int n_mouth = n / 10;
    const int n_face = n - 2 * n_eye - n_mouth;
    int idx = 0;
    // head ellipse (2 sigma of the synthetic head Gaussian)
    for (int i = 0; i < n_face; ++i, ++idx) {
      double x, y, z;
      do {
        x = rng.uniform(-2.0, 2.0);
        y = rng.uniform(-2.0, 2.0);
        z = rng.uniform(-1.0, 1.0);
      } while (x * x + y * y + z * z > 4.0);
      pos[idx * 3 + 0] = x * fl.head_sx;
      pos[idx * 3 + 1] = fl.head_center_y + y * fl.head_sy;
      pos[idx * 3 + 2] = z * fl.head_sz;
    }
    for (int side = 0; side < 2; ++side) {
      const double cx = side == 0 ? -fl.eye_x : fl.eye_x;
      for (int i = 0; i < n_eye; ++i, ++idx) {
        pos[idx * 3 + 0] = cx + rng.normal(0.0, fl.eye_sx);
        pos[idx * 3 + 1] = fl.eye_y + rng.normal(0.0, fl.eye_sy);
        pos[idx * 3 + 2] = fl.eye_z + rng.normal(0.0, 0.01);
        cloud.region_tags[static_cast<size_t>(idx)] =
            side == 0 ? RegionTag::kEyeLeft : RegionTag::kEyeRight;
      }
    }
    for (int i = 0; i < n_mouth; ++i, ++idx) {
      pos[idx * 3 + 0] = rng.uniform(-fl.mouth_half_width, fl.mouth_half_width);
      pos[idx * 3 + 1] = fl.mouth_y + rng.uniform(-2.0 * fl.mouth_sy, 2.0 * fl.mouth_sy);
      pos[idx * 3 + 2] = fl.mouth_z + rng.uniform(-0.01, 0.01);
      cloud.region_tags[static_cast<size_t>(idx)] = RegionTag::kMouth;
    }
  }

  cloud.features = Tensor::randn({n, feature_dim}, rng, 0.1, true);
  cloud.canonical_mlp = init_canonical_mlp(feature_dim, canonical_hidden, rng);
  return cloud;
}

CanonicalAttributes canonical_attributes(const GaussianCloud& cloud) {
  Tensor raw = mlp_apply(cloud.canonical_mlp, cloud.features);
  CanonicalAttributes attrs;
  attrs.color = add_scalar(scale(tanh_op(slice_cols(raw, 0, 3)), 0.5), 0.5);
  attrs.opacity_logit = slice_cols(raw, 3, 4);
  attrs.opacity = sigmoid(attrs.opacity_logit);
  attrs.log_scale = slice_cols(raw, 4, 7);
  attrs.rotation = normalize_rotations(slice_cols(raw, 7, 11));
  return attrs;
}

Tensor normalize_rotations(const Tensor& quats) { return normalize_rows(quats); }

}  // namespace gensync
