#pragma once

#include <array>
#include <cmath>

namespace gensync {

/// Orthographic camera. The scene is rotated by (-azimuth, -elevation) into
/// camera frame; image x/y are camera x/y in scene units, depth is camera z
/// (smaller z is closer). `ortho_scale` is scene units per half image.
struct Camera {
  double azimuth = 0.0;
  double elevation = 0.0;
  double ortho_scale = 1.1;
  int width = 64;
  int height = 64;

  bool valid() const { return width >= 1 && height >= 1 && ortho_scale > 0.0; }

  /// Row-major world-to-camera rotation: Rx(-elevation) * Ry(-azimuth).
  std::array<double, 9> rotation() const {
    const double ca = std::cos(-azimuth), sa = std::sin(-azimuth);
    const double ce = std::cos(-elevation), se = std::sin(-elevation);
    // Ry(-azimuth)
    const double ry[9] = {ca, 0, sa, 0, 1, 0, -sa, 0, ca};
    // Rx(-elevation)
    const double rx[9] = {1, 0, 0, 0, ce, -se, 0, se, ce};
    std::array<double, 9> out{};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double acc = 0.0;
        for (int k = 0; k < 3; ++k) acc += rx[i * 3 + k] * ry[k * 3 + j];
        out[static_cast<size_t>(i * 3 + j)] = acc;
      }
    }
    return out;
  }

  // Pixel center (row i, col j) in camera-plane scene units.
  double pixel_scene_x(int j) const {
    return (j + 0.5 - width / 2.0) * (2.0 * ortho_scale / width);
  }
  double pixel_scene_y(int i) const {
    return -(i + 0.5 - height / 2.0) * (2.0 * ortho_scale / height);
  }
};

}  // namespace gensync
