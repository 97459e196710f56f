#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gensync/errors.hpp"

namespace gensync {

class RandomStream;

/// One node of the dynamic computation graph: a dense row-major double
/// buffer plus a lazily allocated adjoint of the same shape.
struct TensorNode {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until backward touches the node
  bool requires_grad = false;
  uint64_t id = 0;  // creation order, used to check tape topology
};

/// Value-semantics handle to a TensorNode. Copies alias the same node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
  static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor randn(std::vector<int> shape, RandomStream& rng, double stddev,
                      bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int64_t size() const { return static_cast<int64_t>(node_->data.size()); }

  double* data() { return node_->data.data(); }
  const double* data() const { return node_->data.data(); }
  std::vector<double>& data_vec() { return node_->data; }
  const std::vector<double>& data_vec() const { return node_->data; }

  double value() const;  // scalar convenience
  double at(int64_t i) const { return node_->data[static_cast<size_t>(i)]; }
  double& at(int64_t i) { return node_->data[static_cast<size_t>(i)]; }
  double at(int i, int j) const;
  double& at(int i, int j);

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }

  bool has_grad() const { return !node_->grad.empty(); }
  /// Adjoint buffer, allocated as zeros on first access.
  std::vector<double>& grad();
  const std::vector<double>& grad_vec() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  bool all_finite() const;

  std::shared_ptr<TensorNode> node() const { return node_; }
  static Tensor wrap(std::shared_ptr<TensorNode> n) { return Tensor(std::move(n)); }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}
  std::shared_ptr<TensorNode> node_;
};

/// Record of recorded operations. Ops append themselves while a TapeScope is
/// active and any input requires gradients; backward replays in reverse.
class Tape {
 public:
  struct OpRecord {
    std::vector<uint64_t> input_ids;
    uint64_t output_id;
  };

  /// Reverse sweep from a scalar loss. Seeds d(loss)/d(loss) += 1 and
  /// accumulates adjoints additively into every requires_grad ancestor.
  void backward(const Tensor& loss);

  void record(std::vector<std::shared_ptr<TensorNode>> inputs,
              std::shared_ptr<TensorNode> out, std::function<void()> backward);

  size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }
  std::vector<OpRecord> records() const;

  static Tape* active();

 private:
  struct Entry {
    std::vector<std::shared_ptr<TensorNode>> inputs;
    std::shared_ptr<TensorNode> out;
    std::function<void()> backward;
  };
  std::vector<Entry> entries_;
  friend class TapeScope;
};

/// RAII activation of a tape for the current thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

std::string shape_str(const std::vector<int>& shape);

// Elementwise ops (identical shapes unless noted).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor sigmoid(const Tensor& a);
/// Clamp to [-bound, bound]; gradient passes only strictly inside.
Tensor clamp_sym(const Tensor& a, double bound);

// Linear algebra (rank-2 unless noted).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matvec(const Tensor& m, const Tensor& v);  // rank-2 x rank-1 -> rank-1
Tensor transpose(const Tensor& a);

// Reductions and structure.
Tensor sum(const Tensor& a);  // -> scalar
Tensor softmax_rows(const Tensor& a);
Tensor add_row_bias(const Tensor& a, const Tensor& bias);
Tensor stack_rows(const std::vector<Tensor>& rows);  // k rank-1 vectors -> k x n
Tensor slice_cols(const Tensor& a, int col_begin, int col_end);
/// Row-wise L2 normalization; throws DegenerateRotationError when a row norm
/// falls under 1e-12.
Tensor normalize_rows(const Tensor& a);

}  // namespace gensync
