#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "gensync/camera.hpp"
#include "gensync/gradcheck.hpp"
#include "gensync/image.hpp"
#include "gensync/renderer.hpp"
#include "gensync/rng.hpp"

using namespace gensync;

namespace {

struct Scene {
  Tensor positions, rotations, log_scales, opacities, colors;
};

Scene random_scene(int n, uint64_t seed, double opacity_logit_max = 1.5) {
  RandomStream rng(seed);
  Scene s;
  s.positions = Tensor::zeros({n, 3}, true);
  s.rotations = Tensor::zeros({n, 4}, true);
  s.log_scales = Tensor::zeros({n, 3}, true);
  s.opacities = Tensor::zeros({n, 1}, true);
  s.colors = Tensor::zeros({n, 3}, true);
  for (int k = 0; k < n; ++k) {
    for (int a = 0; a < 3; ++a) s.positions.at(k, a) = rng.uniform(-0.6, 0.6);
    double q[4], norm = 0;
    for (int a = 0; a < 4; ++a) {
      q[a] = rng.normal();
      norm += q[a] * q[a];
    }
    norm = std::sqrt(norm);
    for (int a = 0; a < 4; ++a) s.rotations.at(k, a) = q[a] / norm;
    for (int a = 0; a < 3; ++a) s.log_scales.at(k, a) = rng.uniform(-2.6, -1.4);
    s.opacities.at(k, 0) = 1.0 / (1.0 + std::exp(-rng.uniform(-0.5, opacity_logit_max)));
    for (int a = 0; a < 3; ++a) s.colors.at(k, a) = rng.uniform(0.05, 0.95);
  }
  return s;
}

}  // namespace

TEST_CASE("project puts on-axis points at the image center") {
  Camera cam;
  cam.width = 32;
  cam.height = 32;
  for (double z : {-0.5, 0.0, 2.0}) {
    const double pos[3] = {0, 0, z};
    const double quat[4] = {1, 0, 0, 0};
    const double ls[3] = {-2, -2, -2};
    Projected p = project(pos, quat, ls, cam);
    CHECK(p.mean_x == doctest::Approx(0.0));
    CHECK(p.mean_y == doctest::Approx(0.0));
    CHECK(p.depth == doctest::Approx(z));
  }
}

TEST_CASE("project maps isotropic scale to a circular covariance") {
  Camera cam;
  const double pos[3] = {0.1, 0.2, 0.3};
  const double quat[4] = {1, 0, 0, 0};
  const double s = 0.07;
  const double ls[3] = {std::log(s), std::log(s), std::log(s)};
  Projected p = project(pos, quat, ls, cam);
  CHECK(p.cov_a == doctest::Approx(s * s + 1e-6).epsilon(1e-12));
  CHECK(p.cov_c == doctest::Approx(s * s + 1e-6).epsilon(1e-12));
  CHECK(p.cov_b == doctest::Approx(0.0));
}

TEST_CASE("project at azimuth pi/2 sends the x axis to depth") {
  Camera cam;
  cam.azimuth = 3.14159265358979323846 / 2.0;
  const double quat[4] = {1, 0, 0, 0};
  const double ls[3] = {-2, -2, -2};
  const double pos[3] = {0.7, 0.0, 0.0};
  Projected p = project(pos, quat, ls, cam);
  CHECK(p.depth == doctest::Approx(0.7));
  CHECK(std::abs(p.mean_x) < 1e-12);

  // independent check against an explicitly built rotation matrix
  const double a = -cam.azimuth;
  const double ry[9] = {std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a)};
  const double want[3] = {ry[0] * pos[0], ry[3] * pos[0], ry[6] * pos[0]};
  CHECK(p.mean_x == doctest::Approx(want[0]));
  CHECK(p.mean_y == doctest::Approx(want[1]));
  CHECK(p.depth == doctest::Approx(want[2]));
}

TEST_CASE("render with zero Gaussians gives a black image") {
  Camera cam;
  cam.width = 8;
  cam.height = 8;
  Tensor img = render(Tensor::zeros({0, 3}), Tensor::zeros({0, 4}), Tensor::zeros({0, 3}),
                      Tensor::zeros({0, 1}), Tensor::zeros({0, 3}), cam);
  for (int64_t i = 0; i < img.size(); ++i) CHECK(img.at(i) == 0.0);
}

TEST_CASE("single opaque Gaussian covers the center, not the corners") {
  Camera cam;
  cam.width = 33;
  cam.height = 33;
  Tensor pos = Tensor::from_data({1, 3}, {0, 0, 0});
  Tensor rot = Tensor::from_data({1, 4}, {1, 0, 0, 0});
  Tensor ls = Tensor::from_data({1, 3}, {std::log(0.08), std::log(0.08), std::log(0.08)});
  Tensor op = Tensor::from_data({1, 1}, {0.9999});
  Tensor col = Tensor::from_data({1, 3}, {1, 0, 0});
  Tensor img = render(pos, rot, ls, op, col, cam);
  const int c = 16;
  CHECK(img.at((c * 33 + c) * 3 + 0) > 0.99);
  CHECK(img.at((c * 33 + c) * 3 + 1) == 0.0);
  CHECK(img.at(0) < 0.01);                    // top-left corner, red channel
  CHECK(img.at((32 * 33 + 32) * 3) < 0.01);   // bottom-right corner
}

TEST_CASE("render gradients match finite differences") {
  Camera cam;
  cam.width = 16;
  cam.height = 16;
  Scene s = random_scene(5, 99);
  RandomStream trng(1234);
  Tensor target = Tensor::zeros({16, 16, 3});
  // keep the L1 term away from its kink: offset the rendered baseline
  {
    Tensor base = render(s.positions, s.rotations, s.log_scales, s.opacities, s.colors, cam);
    for (int64_t i = 0; i < target.size(); ++i) {
      target.at(i) = base.at(i) - 0.3 + 0.08 * trng.uniform();
    }
  }
  auto f = [&] {
    Tensor img = render(s.positions, s.rotations, s.log_scales, s.opacities, s.colors, cam);
    return image_loss(img, target);
  };
  auto report = grad_check(f,
                           {{"positions", s.positions},
                            {"rotations", s.rotations},
                            {"log_scales", s.log_scales},
                            {"opacities", s.opacities},
                            {"colors", s.colors}},
                           1e-5);
  CAPTURE(report.worst_param);
  CAPTURE(report.worst_index);
  CAPTURE(report.worst_analytic);
  CAPTURE(report.worst_numeric);
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("mean-pixel gradient w.r.t. positions matches finite differences") {
  Camera cam;
  cam.width = 16;
  cam.height = 16;
  Scene s = random_scene(5, 7);
  auto f = [&] {
    Tensor img = render(s.positions, s.rotations, s.log_scales, s.opacities, s.colors, cam);
    return scale(sum(img), 1.0 / static_cast<double>(img.size()));
  };
  auto report = grad_check(f, {{"positions", s.positions}}, 1e-5);
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("rendering is invariant to input permutation") {
  Camera cam;
  cam.width = 24;
  cam.height = 24;
  Scene s = random_scene(12, 41);
  Tensor ref = render(s.positions, s.rotations, s.log_scales, s.opacities, s.colors, cam);

  RandomStream prng(5);
  std::vector<int> perm(12);
  for (int i = 0; i < 12; ++i) perm[i] = i;
  for (int i = 11; i > 0; --i) std::swap(perm[i], perm[prng.uniform_int(i + 1)]);

  Scene p;
  p.positions = Tensor::zeros({12, 3});
  p.rotations = Tensor::zeros({12, 4});
  p.log_scales = Tensor::zeros({12, 3});
  p.opacities = Tensor::zeros({12, 1});
  p.colors = Tensor::zeros({12, 3});
  for (int i = 0; i < 12; ++i) {
    for (int a = 0; a < 3; ++a) p.positions.at(i, a) = s.positions.at(perm[i], a);
    for (int a = 0; a < 4; ++a) p.rotations.at(i, a) = s.rotations.at(perm[i], a);
    for (int a = 0; a < 3; ++a) p.log_scales.at(i, a) = s.log_scales.at(perm[i], a);
    p.opacities.at(i, 0) = s.opacities.at(perm[i], 0);
    for (int a = 0; a < 3; ++a) p.colors.at(i, a) = s.colors.at(perm[i], a);
  }
  Tensor got = render(p.positions, p.rotations, p.log_scales, p.opacities, p.colors, cam);
  for (int64_t i = 0; i < ref.size(); ++i) CHECK(got.at(i) == ref.at(i));
}

TEST_CASE("zero opacity yields the background exactly") {
  Camera cam;
  cam.width = 12;
  cam.height = 12;
  Scene s = random_scene(6, 13);
  for (int k = 0; k < 6; ++k) s.opacities.at(k, 0) = 0.0;
  Tensor img = render(s.positions, s.rotations, s.log_scales, s.opacities, s.colors, cam);
  for (int64_t i = 0; i < img.size(); ++i) CHECK(img.at(i) == 0.0);
}

TEST_CASE("pixel values stay in unit range") {
  Camera cam;
  cam.width = 20;
  cam.height = 20;
  Scene s = random_scene(30, 21, 6.0);
  Tensor img = render(s.positions, s.rotations, s.log_scales, s.opacities, s.colors, cam);
  for (int64_t i = 0; i < img.size(); ++i) {
    CHECK(img.at(i) >= 0.0);
    CHECK(img.at(i) <= 1.0);
  }
}

TEST_CASE("translating the scene shifts the image by whole pixels") {
  Camera cam;
  cam.width = 32;
  cam.height = 32;
  Scene s = random_scene(8, 3);
  Tensor ref = render(s.positions, s.rotations, s.log_scales, s.opacities, s.colors, cam);

  const int shift_px = 3;
  const double dx = shift_px * (2.0 * cam.ortho_scale / cam.width);
  Tensor moved = Tensor::zeros({8, 3});
  for (int k = 0; k < 8; ++k) {
    moved.at(k, 0) = s.positions.at(k, 0) + dx;
    moved.at(k, 1) = s.positions.at(k, 1);
    moved.at(k, 2) = s.positions.at(k, 2);
  }
  Tensor got = render(moved, s.rotations, s.log_scales, s.opacities, s.colors, cam);
  for (int i = 0; i < 32; ++i) {
    for (int j = 0; j < 32 - shift_px; ++j) {
      for (int c = 0; c < 3; ++c) {
        const double a = ref.at((i * 32 + j) * 3 + c);
        const double b = got.at((i * 32 + j + shift_px) * 3 + c);
        CHECK(std::abs(a - b) < 1e-9);
      }
    }
  }
}

TEST_CASE("image loss examples") {
  Tensor a = Tensor::full({4, 4, 3}, 0.0);
  Tensor b = Tensor::full({4, 4, 3}, 0.0);
  CHECK(image_loss(a, b).value() == 0.0);

  Tensor white = Tensor::full({4, 4, 3}, 1.0);
  CHECK(image_loss(a, white).value() == doctest::Approx(1.0));

  RandomStream rng(2);
  Tensor x = Tensor::zeros({3, 5, 3});
  Tensor y = Tensor::zeros({3, 5, 3});
  for (int64_t i = 0; i < x.size(); ++i) {
    x.at(i) = rng.uniform();
    y.at(i) = rng.uniform();
  }
  double l1 = 0, l2 = 0;
  for (int64_t i = 0; i < x.size(); ++i) {
    const double e = x.at(i) - y.at(i);
    l1 += std::abs(e);
    l2 += e * e;
  }
  const double n = static_cast<double>(x.size());
  CHECK(image_loss(x, y).value() ==
        doctest::Approx(0.8 * l1 / n + 0.2 * l2 / n).epsilon(1e-12));

  CHECK_THROWS_AS(image_loss(x, Tensor::zeros({3, 4, 3})), DimensionError);
}

TEST_CASE("ppm export golden bytes and round trip") {
  const std::string path = "test_out_1x1.ppm";
  Image white;
  white.width = 1;
  white.height = 1;
  white.rgb = {1.0, 1.0, 1.0};
  write_ppm(white, path);
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string want = std::string("P6\n1 1\n255\n") + "\xff\xff\xff";
  CHECK(bytes == want);
  std::remove(path.c_str());

  // quantization bound on a round trip
  RandomStream rng(8);
  Image img;
  img.width = 7;
  img.height = 5;
  img.rgb.resize(7 * 5 * 3);
  for (auto& v : img.rgb) v = rng.uniform();
  const std::string p2 = "test_out_rt.ppm";
  write_ppm(img, p2);
  Image back = read_ppm(p2);
  for (size_t i = 0; i < img.rgb.size(); ++i) {
    CHECK(std::abs(back.rgb[i] - img.rgb[i]) <= 1.0 / 510.0 + 1e-12);
  }
  std::remove(p2.c_str());

  // 64x64 file size: header + 3*64*64 payload
  Image big;
  big.width = 64;
  big.height = 64;
  big.rgb.assign(64 * 64 * 3, 0.5);
  const std::string p3 = "test_out_64.ppm";
  write_ppm(big, p3);
  std::ifstream f3(p3, std::ios::binary | std::ios::ate);
  const auto size = f3.tellg();
  CHECK(static_cast<long>(size) == static_cast<long>(std::string("P6\n64 64\n255\n").size()) + 12288);
  std::remove(p3.c_str());
}

TEST_CASE("png export is a valid lossless container") {
  Image img;
  img.width = 3;
  img.height = 2;
  img.rgb = {0, 0, 0, 1, 1, 1, 0.5, 0.25, 0.75, 0.1, 0.2, 0.3, 0.9, 0.8, 0.7, 0.4, 0.5, 0.6};
  const std::string path = "test_out.png";
  write_png(img, path);
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  REQUIRE(bytes.size() > 8);
  CHECK(static_cast<unsigned char>(bytes[0]) == 0x89);
  CHECK(bytes.substr(1, 3) == "PNG");
  std::remove(path.c_str());
}
