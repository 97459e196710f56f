#pragma once

#include <string>
#include <vector>

#include "gensync/tensor.hpp"

namespace gensync {

/// RGB raster, doubles in [0,1] while in memory, 8-bit on export.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;  // height*width*3, row-major, top row first

  static Image from_tensor(const Tensor& t);  // expects shape {H, W, 3}
  Tensor to_tensor() const;
  double at(int row, int col, int ch) const {
    return rgb[(static_cast<size_t>(row) * width + col) * 3 + ch];
  }
};

/// Binary PPM (P6), 8-bit, maxval 255, value = round(255*clamp(v,0,1)).
void write_ppm(const Image& img, const std::string& path);
Image read_ppm(const std::string& path);

/// Lossless PNG re-encoding of the same 8-bit data (stored deflate blocks).
void write_png(const Image& img, const std::string& path);

}  // namespace gensync
