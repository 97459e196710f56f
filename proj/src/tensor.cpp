#include "gensync/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

#include "gensync/rng.hpp"

namespace gensync {

namespace {

thread_local Tape* g_active_tape = nullptr;
std::atomic<uint64_t> g_next_node_id{1};

int64_t shape_size(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::shared_ptr<TensorNode> make_node(std::vector<int> shape) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->data.assign(static_cast<size_t>(shape_size(node->shape)), 0.0);
  node->id = g_next_node_id.fetch_add(1);
  return node;
}

std::vector<double>& ensure_grad(TensorNode& n) {
  if (n.grad.empty()) n.grad.assign(n.data.size(), 0.0);
  return n.grad;
}

Tensor make_result(std::vector<int> shape, bool requires_grad) {
  Tensor t = Tensor::wrap(make_node(std::move(shape)));
  t.set_requires_grad(requires_grad);
  return t;
}

void record_op(std::vector<std::shared_ptr<TensorNode>> inputs, const Tensor& out,
               std::function<void()> backward) {
  if (!g_active_tape || !out.requires_grad()) return;
  g_active_tape->record(std::move(inputs), out.node(), std::move(backward));
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

void check_rank2(const char* op, const Tensor& a) {
  if (a.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " +
                         shape_str(a.shape()));
  }
}

}  // namespace

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return make_result(std::move(shape), requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  Tensor t = make_result(std::move(shape), requires_grad);
  for (auto& v : t.node_->data) v = value;
  return t;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data,
                         bool requires_grad) {
  if (shape_size(shape) != static_cast<int64_t>(data.size())) {
    throw DimensionError("from_data: " + shape_str(shape) + " does not hold " +
                         std::to_string(data.size()) + " values");
  }
  Tensor t = make_result(std::move(shape), requires_grad);
  t.node_->data = std::move(data);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::randn(std::vector<int> shape, RandomStream& rng, double stddev,
                     bool requires_grad) {
  Tensor t = make_result(std::move(shape), requires_grad);
  for (auto& v : t.node_->data) v = rng.normal(0.0, stddev);
  return t;
}

double Tensor::value() const {
  if (size() != 1) {
    throw ContractError("value: tensor is not a scalar, shape " + shape_str(shape()));
  }
  return node_->data[0];
}

double Tensor::at(int i, int j) const {
  return node_->data[static_cast<size_t>(i) * node_->shape[1] + j];
}

double& Tensor::at(int i, int j) {
  return node_->data[static_cast<size_t>(i) * node_->shape[1] + j];
}

std::vector<double>& Tensor::grad() { return ensure_grad(*node_); }

bool Tensor::all_finite() const {
  for (double v : node_->data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::vector<std::shared_ptr<TensorNode>> inputs,
                  std::shared_ptr<TensorNode> out, std::function<void()> backward) {
  entries_.push_back(Entry{std::move(inputs), std::move(out), std::move(backward)});
}

std::vector<Tape::OpRecord> Tape::records() const {
  std::vector<OpRecord> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) {
    OpRecord r;
    for (const auto& in : e.inputs) r.input_ids.push_back(in->id);
    r.output_id = e.out->id;
    out.push_back(std::move(r));
  }
  return out;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward: loss must be a scalar, got " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<empty>")));
  }
  ensure_grad(*loss.node())[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (!it->out->grad.empty() && it->backward) it->backward();
  }
}

TapeScope::TapeScope(Tape& tape) : prev_(g_active_tape) { g_active_tape = &tape; }

TapeScope::~TapeScope() { g_active_tape = prev_; }

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  Tensor out = make_result(a.shape(), a.requires_grad() || b.requires_grad());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] + pb[i];
  auto an = a.node(), bn = b.node(), on = out.node();
  record_op({an, bn}, out, [an, bn, on] {
    const auto& g = on->grad;
    if (an->requires_grad) {
      auto& ga = ensure_grad(*an);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (bn->requires_grad) {
      auto& gb = ensure_grad(*bn);
      for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
  });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  Tensor out = make_result(a.shape(), a.requires_grad() || b.requires_grad());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] - pb[i];
  auto an = a.node(), bn = b.node(), on = out.node();
  record_op({an, bn}, out, [an, bn, on] {
    const auto& g = on->grad;
    if (an->requires_grad) {
      auto& ga = ensure_grad(*an);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (bn->requires_grad) {
      auto& gb = ensure_grad(*bn);
      for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  check_same_shape("hadamard", a, b);
  Tensor out = make_result(a.shape(), a.requires_grad() || b.requires_grad());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] * pb[i];
  auto an = a.node(), bn = b.node(), on = out.node();
  record_op({an, bn}, out, [an, bn, on] {
    const auto& g = on->grad;
    if (an->requires_grad) {
      auto& ga = ensure_grad(*an);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bn->data[i];
    }
    if (bn->requires_grad) {
      auto& gb = ensure_grad(*bn);
      for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * an->data[i];
    }
  });
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = make_result(a.shape(), a.requires_grad());
  const double* pa = a.data();
  double* po = out.data();
  for (int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] * c;
  auto an = a.node(), on = out.node();
  record_op({an}, out, [an, on, c] {
    const auto& g = on->grad;
    auto& ga = ensure_grad(*an);
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
  });
  return out;
}

Tensor add_scalar(const Tensor& a, double c) {
  Tensor out = make_result(a.shape(), a.requires_grad());
  const double* pa = a.data();
  double* po = out.data();
  for (int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] + c;
  auto an = a.node(), on = out.node();
  record_op({an}, out, [an, on] {
    const auto& g = on->grad;
    auto& ga = ensure_grad(*an);
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
  return out;
}

Tensor relu(const Tensor& a) {
  Tensor out = make_result(a.shape(), a.requires_grad());
  const double* pa = a.data();
  double* po = out.data();
  for (int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] > 0.0 ? pa[i] : 0.0;
  auto an = a.node(), on = out.node();
  record_op({an}, out, [an, on] {
    const auto& g = on->grad;
    auto& ga = ensure_grad(*an);
    for (size_t i = 0; i < g.size(); ++i) {
      if (an->data[i] > 0.0) ga[i] += g[i];
    }
  });
  return out;
}

Tensor tanh_op(const Tensor& a) {
  Tensor out = make_result(a.shape(), a.requires_grad());
  const double* pa = a.data();
  double* po = out.data();
  for (int64_t i = 0; i < a.size(); ++i) po[i] = std::tanh(pa[i]);
  auto an = a.node(), on = out.node();
  record_op({an}, out, [an, on] {
    const auto& g = on->grad;
    auto& ga = ensure_grad(*an);
    for (size_t i = 0; i < g.size(); ++i) {
      const double y = on->data[i];
      ga[i] += g[i] * (1.0 - y * y);
    }
  });
  return out;
}

Tensor sigmoid(const Tensor& a) {
  Tensor out = make_result(a.shape(), a.requires_grad());
  const double* pa = a.data();
  double* po = out.data();
  for (int64_t i = 0; i < a.size(); ++i) {
    const double x = pa[i];
    if (x >= 0.0) {
      po[i] = 1.0 / (1.0 + std::exp(-x));
    } else {
      const double e = std::exp(x);
      po[i] = e / (1.0 + e);
    }
  }
  auto an = a.node(), on = out.node();
  record_op({an}, out, [an, on] {
    const auto& g = on->grad;
    auto& ga = ensure_grad(*an);
    for (size_t i = 0; i < g.size(); ++i) {
      const double y = on->data[i];
      ga[i] += g[i] * y * (1.0 - y);
    }
  });
  return out;
}

Tensor clamp_sym(const Tensor& a, double bound) {
  if (bound <= 0.0) throw ContractError("clamp_sym: bound must be positive");
  Tensor out = make_result(a.shape(), a.requires_grad());
  const double* pa = a.data();
  double* po = out.data();
  for (int64_t i = 0; i < a.size(); ++i) {
    po[i] = pa[i] > bound ? bound : (pa[i] < -bound ? -bound : pa[i]);
  }
  auto an = a.node(), on = out.node();
  record_op({an}, out, [an, on, bound] {
    const auto& g = on->grad;
    auto& ga = ensure_grad(*an);
    for (size_t i = 0; i < g.size(); ++i) {
      const double x = an->data[i];
      if (x > -bound && x < bound) ga[i] += g[i];
    }
  });
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_rank2("matmul", a);
  check_rank2("matmul", b);
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (k != b.dim(0)) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                         " * " + shape_str(b.shape()));
  }
  Tensor out = make_result({m, n}, a.requires_grad() || b.requires_grad());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int i = 0; i < m; ++i) {
    for (int kk = 0; kk < k; ++kk) {
      const double av = pa[static_cast<size_t>(i) * k + kk];
      if (av == 0.0) continue;
      const double* brow = pb + static_cast<size_t>(kk) * n;
      double* orow = po + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  auto an = a.node(), bn = b.node(), on = out.node();
  record_op({an, bn}, out, [an, bn, on, m, k, n] {
    const auto& g = on->grad;
    if (an->requires_grad) {
      auto& ga = ensure_grad(*an);
      // dA = g . B^T
      for (int i = 0; i < m; ++i) {
        for (int kk = 0; kk < k; ++kk) {
          double acc = 0.0;
          const double* grow = g.data() + static_cast<size_t>(i) * n;
          const double* brow = bn->data.data() + static_cast<size_t>(kk) * n;
          for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[static_cast<size_t>(i) * k + kk] += acc;
        }
      }
    }
    if (bn->requires_grad) {
      auto& gb = ensure_grad(*bn);
      // dB = A^T . g
      for (int i = 0; i < m; ++i) {
        const double* arow = an->data.data() + static_cast<size_t>(i) * k;
        const double* grow = g.data() + static_cast<size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
          const double av = arow[kk];
          if (av == 0.0) continue;
          double* gbrow = gb.data() + static_cast<size_t>(kk) * n;
          for (int j = 0; j < n; ++j) gbrow[j] += av * grow[j];
        }
      }
    }
  });
  return out;
}

Tensor matvec(const Tensor& m, const Tensor& v) {
  check_rank2("matvec", m);
  if (v.rank() != 1) {
    throw DimensionError("matvec: expected rank-1 vector, got " + shape_str(v.shape()));
  }
  const int rows = m.dim(0), cols = m.dim(1);
  if (cols != v.dim(0)) {
    throw DimensionError("matvec: dimensions disagree, " + shape_str(m.shape()) + " * " +
                         shape_str(v.shape()));
  }
  Tensor out = make_result({rows}, m.requires_grad() || v.requires_grad());
  const double* pm = m.data();
  const double* pv = v.data();
  double* po = out.data();
  for (int i = 0; i < rows; ++i) {
    double acc = 0.0;
    const double* mrow = pm + static_cast<size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) acc += mrow[j] * pv[j];
    po[i] = acc;
  }
  auto mn = m.node(), vn = v.node(), on = out.node();
  record_op({mn, vn}, out, [mn, vn, on, rows, cols] {
    const auto& g = on->grad;
    if (mn->requires_grad) {
      auto& gm = ensure_grad(*mn);
      for (int i = 0; i < rows; ++i) {
        double* grow = gm.data() + static_cast<size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) grow[j] += g[i] * vn->data[j];
      }
    }
    if (vn->requires_grad) {
      auto& gv = ensure_grad(*vn);
      for (int i = 0; i < rows; ++i) {
        const double* mrow = mn->data.data() + static_cast<size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) gv[j] += mrow[j] * g[i];
      }
    }
  });
  return out;
}

Tensor transpose(const Tensor& a) {
  check_rank2("transpose", a);
  const int m = a.dim(0), n = a.dim(1);
  Tensor out = make_result({n, m}, a.requires_grad());
  const double* pa = a.data();
  double* po = out.data();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      po[static_cast<size_t>(j) * m + i] = pa[static_cast<size_t>(i) * n + j];
    }
  }
  auto an = a.node(), on = out.node();
  record_op({an}, out, [an, on, m, n] {
    const auto& g = on->grad;
    auto& ga = ensure_grad(*an);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        ga[static_cast<size_t>(i) * n + j] += g[static_cast<size_t>(j) * m + i];
      }
    }
  });
  return out;
}

Tensor sum(const Tensor& a) {
  Tensor out = make_result({1}, a.requires_grad());
  const double* pa = a.data();
  double acc = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) acc += pa[i];
  out.data()[0] = acc;
  auto an = a.node(), on = out.node();
  record_op({an}, out, [an, on] {
    const double g = on->grad[0];
    auto& ga = ensure_grad(*an);
    for (auto& v : ga) v += g;
  });
  return out;
}

Tensor softmax_rows(const Tensor& a) {
  check_rank2("softmax_rows", a);
  const int m = a.dim(0), n = a.dim(1);
  if (n < 1) throw DimensionError("softmax_rows: rows must be non-empty");
  Tensor out = make_result(a.shape(), a.requires_grad());
  const double* pa = a.data();
  double* po = out.data();
  for (int i = 0; i < m; ++i) {
    const double* row = pa + static_cast<size_t>(i) * n;
    double* orow = po + static_cast<size_t>(i) * n;
    double mx = row[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      orow[j] = std::exp(row[j] - mx);
      s += orow[j];
    }
    for (int j = 0; j < n; ++j) orow[j] /= s;
  }
  auto an = a.node(), on = out.node();
  record_op({an}, out, [an, on, m, n] {
    const auto& g = on->grad;
    auto& ga = ensure_grad(*an);
    for (int i = 0; i < m; ++i) {
      const double* y = on->data.data() + static_cast<size_t>(i) * n;
      const double* grow = g.data() + static_cast<size_t>(i) * n;
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += grow[j] * y[j];
      double* garow = ga.data() + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) garow[j] += y[j] * (grow[j] - dot);
    }
  });
  return out;
}

Tensor add_row_bias(const Tensor& a, const Tensor& bias) {
  check_rank2("add_row_bias", a);
  if (bias.rank() != 1 || bias.dim(0) != a.dim(1)) {
    throw DimensionError("add_row_bias: bias " + shape_str(bias.shape()) +
                         " does not match columns of " + shape_str(a.shape()));
  }
  const int m = a.dim(0), n = a.dim(1);
  Tensor out = make_result(a.shape(), a.requires_grad() || bias.requires_grad());
  const double* pa = a.data();
  const double* pb = bias.data();
  double* po = out.data();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      po[static_cast<size_t>(i) * n + j] = pa[static_cast<size_t>(i) * n + j] + pb[j];
    }
  }
  auto an = a.node(), bn = bias.node(), on = out.node();
  record_op({an, bn}, out, [an, bn, on, m, n] {
    const auto& g = on->grad;
    if (an->requires_grad) {
      auto& ga = ensure_grad(*an);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (bn->requires_grad) {
      auto& gb = ensure_grad(*bn);
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) gb[j] += g[static_cast<size_t>(i) * n + j];
      }
    }
  });
  return out;
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw ContractError("stack_rows: no rows given");
  const int n = rows[0].rank() == 1 ? rows[0].dim(0) : -1;
  if (n < 0) throw DimensionError("stack_rows: rows must be rank-1");
  bool rg = false;
  for (const auto& r : rows) {
    if (r.rank() != 1 || r.dim(0) != n) {
      throw DimensionError("stack_rows: row shape " + shape_str(r.shape()) +
                           " does not match [" + std::to_string(n) + "]");
    }
    rg = rg || r.requires_grad();
  }
  const int k = static_cast<int>(rows.size());
  Tensor out = make_result({k, n}, rg);
  double* po = out.data();
  for (int i = 0; i < k; ++i) {
    const double* pr = rows[static_cast<size_t>(i)].data();
    for (int j = 0; j < n; ++j) po[static_cast<size_t>(i) * n + j] = pr[j];
  }
  std::vector<std::shared_ptr<TensorNode>> ins;
  for (const auto& r : rows) ins.push_back(r.node());
  auto on = out.node();
  record_op(ins, out, [ins, on, n] {
    const auto& g = on->grad;
    for (size_t i = 0; i < ins.size(); ++i) {
      if (!ins[i]->requires_grad) continue;
      auto& gr = ensure_grad(*ins[i]);
      for (int j = 0; j < n; ++j) gr[j] += g[i * n + j];
    }
  });
  return out;
}

Tensor slice_cols(const Tensor& a, int col_begin, int col_end) {
  check_rank2("slice_cols", a);
  const int m = a.dim(0), n = a.dim(1);
  if (col_begin < 0 || col_end > n || col_begin >= col_end) {
    throw DimensionError("slice_cols: range [" + std::to_string(col_begin) + ", " +
                         std::to_string(col_end) + ") invalid for " + shape_str(a.shape()));
  }
  const int w = col_end - col_begin;
  Tensor out = make_result({m, w}, a.requires_grad());
  const double* pa = a.data();
  double* po = out.data();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < w; ++j) {
      po[static_cast<size_t>(i) * w + j] = pa[static_cast<size_t>(i) * n + col_begin + j];
    }
  }
  auto an = a.node(), on = out.node();
  record_op({an}, out, [an, on, m, n, w, col_begin] {
    const auto& g = on->grad;
    auto& ga = ensure_grad(*an);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < w; ++j) {
        ga[static_cast<size_t>(i) * n + col_begin + j] += g[static_cast<size_t>(i) * w + j];
      }
    }
  });
  return out;
}

Tensor normalize_rows(const Tensor& a) {
  check_rank2("normalize_rows", a);
  const int m = a.dim(0), n = a.dim(1);
  Tensor out = make_result(a.shape(), a.requires_grad());
  const double* pa = a.data();
  double* po = out.data();
  for (int i = 0; i < m; ++i) {
    const double* row = pa + static_cast<size_t>(i) * n;
    double sq = 0.0;
    for (int j = 0; j < n; ++j) sq += row[j] * row[j];
    const double norm = std::sqrt(sq);
    if (norm < 1e-12) {
      throw DegenerateRotationError("normalize_rows: row " + std::to_string(i) +
                                    " has norm " + std::to_string(norm));
    }
    double* orow = po + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) orow[j] = row[j] / norm;
  }
  auto an = a.node(), on = out.node();
  record_op({an}, out, [an, on, m, n] {
    const auto& g = on->grad;
    auto& ga = ensure_grad(*an);
    for (int i = 0; i < m; ++i) {
      const double* row = an->data.data() + static_cast<size_t>(i) * n;
      const double* u = on->data.data() + static_cast<size_t>(i) * n;
      const double* grow = g.data() + static_cast<size_t>(i) * n;
      double sq = 0.0;
      for (int j = 0; j < n; ++j) sq += row[j] * row[j];
      const double norm = std::sqrt(sq);
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += grow[j] * u[j];
      double* garow = ga.data() + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) garow[j] += (grow[j] - dot * u[j]) / norm;
    }
  });
  return out;
}

}  // namespace gensync
