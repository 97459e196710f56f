#include "gensync/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace gensync {

namespace {

struct Proj {
  double mx = 0, my = 0, depth = 0;
  double cov[3] = {0, 0, 0};  // a, b, c of [[a,b],[b,c]]
  double inv[3] = {0, 0, 0};
  double rot[9] = {0};   // quaternion rotation
  double rr[9] = {0};    // camera rotation * quaternion rotation
  double s[3] = {0};     // activated scales
  bool s_active[3] = {false, false, false};
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel bounds

  bool empty() const { return x0 > x1 || y0 > y1; }
};

void quat_to_rot(const double* q, double* r) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  r[0] = 1 - 2 * (y * y + z * z);
  r[1] = 2 * (x * y - w * z);
  r[2] = 2 * (x * z + w * y);
  r[3] = 2 * (x * y + w * z);
  r[4] = 1 - 2 * (x * x + z * z);
  r[5] = 2 * (y * z - w * x);
  r[6] = 2 * (x * z - w * y);
  r[7] = 2 * (y * z + w * x);
  r[8] = 1 - 2 * (x * x + y * y);
}

// Adds the adjoint of the rotation matrix back onto the quaternion.
void rot_backward(const double* q, const double* dr, double* dq) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  dq[0] += 2 * (-z * dr[1] + y * dr[2] + z * dr[3] - x * dr[5] - y * dr[6] + x * dr[7]);
  dq[1] += 2 * (y * dr[1] + z * dr[2] + y * dr[3] - 2 * x * dr[4] - w * dr[5] +
                z * dr[6] + w * dr[7] - 2 * x * dr[8]);
  dq[2] += 2 * (-2 * y * dr[0] + x * dr[1] + w * dr[2] + x * dr[3] + z * dr[5] -
                w * dr[6] + z * dr[7] - 2 * y * dr[8]);
  dq[3] += 2 * (-2 * z * dr[0] - w * dr[1] + x * dr[2] + w * dr[3] - 2 * z * dr[4] +
                y * dr[5] + x * dr[6] + y * dr[7]);
}

Proj project_one(const double* pos, const double* quat, const double* ls,
                 const Camera& cam, const double* rc) {
  Proj p;
  p.mx = rc[0] * pos[0] + rc[1] * pos[1] + rc[2] * pos[2];
  p.my = rc[3] * pos[0] + rc[4] * pos[1] + rc[5] * pos[2];
  p.depth = rc[6] * pos[0] + rc[7] * pos[1] + rc[8] * pos[2];

  quat_to_rot(quat, p.rot);
  for (int j = 0; j < 3; ++j) {
    const double e = std::exp(ls[j]);
    p.s[j] = std::clamp(e, kScaleMin, kScaleMax);
    p.s_active[j] = e > kScaleMin && e < kScaleMax;
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += rc[i * 3 + k] * p.rot[k * 3 + j];
      p.rr[i * 3 + j] = acc;
    }
  }
  // camera-frame covariance rows B = (Rc R) S; 2D cov is the top-left 2x2 of B B^T
  double b0[3], b1[3];
  for (int j = 0; j < 3; ++j) {
    b0[j] = p.rr[j] * p.s[j];
    b1[j] = p.rr[3 + j] * p.s[j];
  }
  p.cov[0] = b0[0] * b0[0] + b0[1] * b0[1] + b0[2] * b0[2] + kCovRegularization;
  p.cov[1] = b0[0] * b1[0] + b0[1] * b1[1] + b0[2] * b1[2];
  p.cov[2] = b1[0] * b1[0] + b1[1] * b1[1] + b1[2] * b1[2] + kCovRegularization;

  const double det = p.cov[0] * p.cov[2] - p.cov[1] * p.cov[1];
  p.inv[0] = p.cov[2] / det;
  p.inv[1] = -p.cov[1] / det;
  p.inv[2] = p.cov[0] / det;

  const double px_scale = cam.width / (2.0 * cam.ortho_scale);
  const double py_scale = cam.height / (2.0 * cam.ortho_scale);
  const double pxc = p.mx * px_scale + cam.width / 2.0;
  const double pyc = -p.my * py_scale + cam.height / 2.0;
  const double ex = kCullSigma * std::sqrt(p.cov[0]) * px_scale;
  const double ey = kCullSigma * std::sqrt(p.cov[2]) * py_scale;
  p.x0 = std::max(0, static_cast<int>(std::ceil(pxc - ex - 0.5)));
  p.x1 = std::min(cam.width - 1, static_cast<int>(std::floor(pxc + ex - 0.5)));
  p.y0 = std::max(0, static_cast<int>(std::ceil(pyc - ey - 0.5)));
  p.y1 = std::min(cam.height - 1, static_cast<int>(std::floor(pyc + ey - 0.5)));
  return p;
}

void check_gaussian_arrays(const Tensor& positions, const Tensor& rotations,
                           const Tensor& log_scales, const Tensor& opacities,
                           const Tensor& colors) {
  auto expect = [&](const Tensor& t, int cols, const char* name) {
    if (t.rank() != 2 || t.dim(1) != cols || t.dim(0) != positions.dim(0)) {
      throw DimensionError(std::string("render: ") + name + " has shape " +
                           shape_str(t.shape()) + ", expected [" +
                           std::to_string(positions.dim(0)) + "x" + std::to_string(cols) +
                           "]");
    }
  };
  if (positions.rank() != 2 || positions.dim(1) != 3) {
    throw DimensionError("render: positions have shape " + shape_str(positions.shape()) +
                         ", expected [Nx3]");
  }
  expect(rotations, 4, "rotations");
  expect(log_scales, 3, "log_scales");
  expect(opacities, 1, "opacities");
  expect(colors, 3, "colors");
}

}  // namespace

Projected project(const double* position, const double* quaternion,
                  const double* log_scale, const Camera& cam) {
  if (!cam.valid()) throw ContractError("project: invalid camera");
  const auto rc = cam.rotation();
  Proj p = project_one(position, quaternion, log_scale, cam, rc.data());
  return Projected{p.mx, p.my, p.cov[0], p.cov[1], p.cov[2], p.depth};
}

Tensor render(const Tensor& positions, const Tensor& rotations, const Tensor& log_scales,
              const Tensor& opacities, const Tensor& colors, const Camera& cam) {
  if (!cam.valid()) throw ContractError("render: invalid camera");
  check_gaussian_arrays(positions, rotations, log_scales, opacities, colors);
  const int n = positions.dim(0);
  const int height = cam.height, width = cam.width;

  const auto rc = cam.rotation();
  std::vector<Proj> projs(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    projs[static_cast<size_t>(k)] =
        project_one(positions.data() + 3 * k, rotations.data() + 4 * k,
                    log_scales.data() + 3 * k, cam, rc.data());
  }

  // front-to-back: ascending depth, ties by original index
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double da = projs[static_cast<size_t>(a)].depth;
    const double db = projs[static_cast<size_t>(b)].depth;
    return da != db ? da < db : a < b;
  });

  std::vector<std::vector<int>> row_lists(static_cast<size_t>(height));
  for (int k : order) {
    const Proj& p = projs[static_cast<size_t>(k)];
    if (p.empty()) continue;
    for (int i = p.y0; i <= p.y1; ++i) row_lists[static_cast<size_t>(i)].push_back(k);
  }

  const bool rg = positions.requires_grad() || rotations.requires_grad() ||
                  log_scales.requires_grad() || opacities.requires_grad() ||
                  colors.requires_grad();
  Tensor out = Tensor::zeros({height, width, 3}, rg);
  double* img = out.data();
  const double* opac = opacities.data();
  const double* col = colors.data();

  for (int i = 0; i < height; ++i) {
    const double py = cam.pixel_scene_y(i);
    const auto& list = row_lists[static_cast<size_t>(i)];
    for (int j = 0; j < width; ++j) {
      const double px = cam.pixel_scene_x(j);
      double c0 = 0, c1 = 0, c2 = 0, transmit = 1.0;
      for (int k : list) {
        const Proj& p = projs[static_cast<size_t>(k)];
        if (j < p.x0 || j > p.x1) continue;
        const double dx = px - p.mx;
        const double dy = py - p.my;
        const double q = p.inv[0] * dx * dx + 2.0 * p.inv[1] * dx * dy +
                         p.inv[2] * dy * dy;
        const double g = std::exp(-0.5 * q);
        double alpha = opac[k] * g;
        if (alpha > kAlphaMax) alpha = kAlphaMax;
        const double wa = transmit * alpha;
        c0 += wa * col[3 * k + 0];
        c1 += wa * col[3 * k + 1];
        c2 += wa * col[3 * k + 2];
        transmit *= 1.0 - alpha;
      }
      double* px_out = img + (static_cast<size_t>(i) * width + j) * 3;
      px_out[0] = c0;
      px_out[1] = c1;
      px_out[2] = c2;
    }
  }

  if (Tape::active() && rg) {
    auto pn = positions.node();
    auto qn = rotations.node();
    auto ln = log_scales.node();
    auto an = opacities.node();
    auto cn = colors.node();
    auto on = out.node();
    Camera camera = cam;
    auto rcv = rc;
    Tape::active()->record(
        {pn, qn, ln, an, cn}, on,
        [pn, qn, ln, an, cn, on, camera, rcv, projs = std::move(projs),
         order = std::move(order), n, height, width] {
          const auto& gout = on->grad;
          const double* opac_d = an->data.data();
          const double* col_d = cn->data.data();

          std::vector<double> dmx(static_cast<size_t>(n), 0.0);
          std::vector<double> dmy(static_cast<size_t>(n), 0.0);
          std::vector<double> d_inv(static_cast<size_t>(n) * 3, 0.0);  // ga, gb(double), gc
          std::vector<double> d_opac(static_cast<size_t>(n), 0.0);
          std::vector<double> d_col(static_cast<size_t>(n) * 3, 0.0);

          std::vector<std::vector<int>> rows(static_cast<size_t>(height));
          for (int k : order) {
            const Proj& p = projs[static_cast<size_t>(k)];
            if (p.empty()) continue;
            for (int i = p.y0; i <= p.y1; ++i) rows[static_cast<size_t>(i)].push_back(k);
          }

          struct Hit {
            int k;
            double w, alpha, g, dx, dy;
            bool clamped;
          };
          std::vector<Hit> hits;
          hits.reserve(64);

          for (int i = 0; i < height; ++i) {
            const double py = camera.pixel_scene_y(i);
            const auto& list = rows[static_cast<size_t>(i)];
            if (list.empty()) continue;
            for (int j = 0; j < width; ++j) {
              const double* gpx = gout.data() + (static_cast<size_t>(i) * width + j) * 3;
              if (gpx[0] == 0.0 && gpx[1] == 0.0 && gpx[2] == 0.0) continue;
              const double px = camera.pixel_scene_x(j);
              hits.clear();
              double transmit = 1.0;
              for (int k : list) {
                const Proj& p = projs[static_cast<size_t>(k)];
                if (j < p.x0 || j > p.x1) continue;
                const double dx = px - p.mx;
                const double dy = py - p.my;
                const double q = p.inv[0] * dx * dx + 2.0 * p.inv[1] * dx * dy +
                                 p.inv[2] * dy * dy;
                const double g = std::exp(-0.5 * q);
                const double raw = opac_d[k] * g;
                const bool clamped = raw > kAlphaMax;
                const double alpha = clamped ? kAlphaMax : raw;
                hits.push_back(Hit{k, transmit, alpha, g, dx, dy, clamped});
                transmit *= 1.0 - alpha;
              }
              // reverse walk with exact suffix accumulation
              double s0 = 0, s1 = 0, s2 = 0;
              for (auto it = hits.rbegin(); it != hits.rend(); ++it) {
                const Hit& h = *it;
                const double* ck = col_d + 3 * h.k;
                const double wa = h.w * h.alpha;
                d_col[static_cast<size_t>(3 * h.k) + 0] += gpx[0] * wa;
                d_col[static_cast<size_t>(3 * h.k) + 1] += gpx[1] * wa;
                d_col[static_cast<size_t>(3 * h.k) + 2] += gpx[2] * wa;
                const double inv_rem = 1.0 / (1.0 - h.alpha);
                const double dalpha = gpx[0] * (h.w * ck[0] - s0 * inv_rem) +
                                      gpx[1] * (h.w * ck[1] - s1 * inv_rem) +
                                      gpx[2] * (h.w * ck[2] - s2 * inv_rem);
                if (!h.clamped) {
                  d_opac[static_cast<size_t>(h.k)] += dalpha * h.g;
                  const double dg = dalpha * opac_d[h.k];
                  const double dq = -0.5 * h.g * dg;
                  const Proj& p = projs[static_cast<size_t>(h.k)];
                  const double ddx = 2.0 * dq * (p.inv[0] * h.dx + p.inv[1] * h.dy);
                  const double ddy = 2.0 * dq * (p.inv[1] * h.dx + p.inv[2] * h.dy);
                  dmx[static_cast<size_t>(h.k)] -= ddx;
                  dmy[static_cast<size_t>(h.k)] -= ddy;
                  d_inv[static_cast<size_t>(3 * h.k) + 0] += dq * h.dx * h.dx;
                  d_inv[static_cast<size_t>(3 * h.k) + 1] += dq * h.dx * h.dy;
                  d_inv[static_cast<size_t>(3 * h.k) + 2] += dq * h.dy * h.dy;
                }
                s0 += wa * ck[0];
                s1 += wa * ck[1];
                s2 += wa * ck[2];
              }
            }
          }

          auto ensure = [](TensorNode& node) -> std::vector<double>& {
            if (node.grad.empty()) node.grad.assign(node.data.size(), 0.0);
            return node.grad;
          };

          const double* rcp = rcv.data();
          for (int k = 0; k < n; ++k) {
            const Proj& p = projs[static_cast<size_t>(k)];
            if (an->requires_grad) ensure(*an)[static_cast<size_t>(k)] += d_opac[static_cast<size_t>(k)];
            if (cn->requires_grad) {
              auto& gc = ensure(*cn);
              for (int c = 0; c < 3; ++c) gc[static_cast<size_t>(3 * k + c)] += d_col[static_cast<size_t>(3 * k + c)];
            }
            if (pn->requires_grad) {
              auto& gp = ensure(*pn);
              for (int a = 0; a < 3; ++a) {
                gp[static_cast<size_t>(3 * k + a)] +=
                    rcp[a] * dmx[static_cast<size_t>(k)] + rcp[3 + a] * dmy[static_cast<size_t>(k)];
              }
            }
            const bool need_cov = qn->requires_grad || ln->requires_grad;
            if (!need_cov) continue;
            const double ga = d_inv[static_cast<size_t>(3 * k) + 0];
            const double gb = d_inv[static_cast<size_t>(3 * k) + 1];  // full off-diag adjoint
            const double gcv = d_inv[static_cast<size_t>(3 * k) + 2];
            if (ga == 0.0 && gb == 0.0 && gcv == 0.0) continue;
            // adjoint of Sigma from adjoint of its inverse: -A * G * A
            const double a0 = p.inv[0], a1 = p.inv[1], a2 = p.inv[2];
            // G (full) = [[ga, gb],[gb, gc]]
            const double t00 = a0 * ga + a1 * gb, t01 = a0 * gb + a1 * gcv;
            const double t10 = a1 * ga + a2 * gb, t11 = a1 * gb + a2 * gcv;
            const double dS00 = -(t00 * a0 + t01 * a1);
            const double dS01 = -(t00 * a1 + t01 * a2);
            const double dS11 = -(t10 * a1 + t11 * a2);
            // N = B B^T with B = (Rc R) S; dB = 2 G_N B, G_N zero outside 2x2
            double b0[3], b1[3];
            for (int j = 0; j < 3; ++j) {
              b0[j] = p.rr[j] * p.s[j];
              b1[j] = p.rr[3 + j] * p.s[j];
            }
            double db[9] = {0};
            for (int j = 0; j < 3; ++j) {
              db[j] = 2.0 * (dS00 * b0[j] + dS01 * b1[j]);
              db[3 + j] = 2.0 * (dS01 * b0[j] + dS11 * b1[j]);
            }
            // back through the camera rotation: dRS = Rc^T dB
            double drs[9];
            for (int i2 = 0; i2 < 3; ++i2) {
              for (int j = 0; j < 3; ++j) {
                drs[i2 * 3 + j] = rcp[0 * 3 + i2] * db[0 * 3 + j] +
                                  rcp[1 * 3 + i2] * db[1 * 3 + j] +
                                  rcp[2 * 3 + i2] * db[2 * 3 + j];
              }
            }
            if (ln->requires_grad) {
              auto& gl = ensure(*ln);
              for (int j = 0; j < 3; ++j) {
                if (!p.s_active[j]) continue;
                double ds = 0.0;
                for (int i2 = 0; i2 < 3; ++i2) ds += drs[i2 * 3 + j] * p.rot[i2 * 3 + j];
                gl[static_cast<size_t>(3 * k + j)] += ds * p.s[j];
              }
            }
            if (qn->requires_grad) {
              double dr[9];
              for (int i2 = 0; i2 < 3; ++i2) {
                for (int j = 0; j < 3; ++j) dr[i2 * 3 + j] = drs[i2 * 3 + j] * p.s[j];
              }
              auto& gq = ensure(*qn);
              rot_backward(qn->data.data() + 4 * k, dr, gq.data() + 4 * k);
            }
          }
        });
  }
  return out;
}

Tensor image_loss(const Tensor& rendered, const Tensor& target) {
  if (rendered.shape() != target.shape()) {
    throw DimensionError("image_loss: shape mismatch " + shape_str(rendered.shape()) +
                         " vs " + shape_str(target.shape()));
  }
  const int64_t n = rendered.size();
  const double* r = rendered.data();
  const double* t = target.data();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double e = r[i] - t[i];
    acc += 0.8 * std::abs(e) + 0.2 * e * e;
  }
  Tensor out = Tensor::zeros({1}, rendered.requires_grad() || target.requires_grad());
  out.data()[0] = acc / static_cast<double>(n);

  if (Tape::active() && out.requires_grad()) {
    auto rn = rendered.node();
    auto tn = target.node();
    auto on = out.node();
    Tape::active()->record({rn, tn}, on, [rn, tn, on, n] {
      const double g = on->grad[0] / static_cast<double>(n);
      auto ensure = [](TensorNode& node) -> std::vector<double>& {
        if (node.grad.empty()) node.grad.assign(node.data.size(), 0.0);
        return node.grad;
      };
      for (int64_t i = 0; i < n; ++i) {
        const double e = rn->data[static_cast<size_t>(i)] - tn->data[static_cast<size_t>(i)];
        const double sign = e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0);
        const double d = g * (0.8 * sign + 0.4 * e);
        if (rn->requires_grad) ensure(*rn)[static_cast<size_t>(i)] += d;
        if (tn->requires_grad) ensure(*tn)[static_cast<size_t>(i)] -= d;
      }
    });
  }
  return out;
}

}  // namespace gensync
