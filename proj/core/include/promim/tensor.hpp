#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace promim {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first needed
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  double* ensure_grad();
};

}  // namespace detail

/// Dense float64 array that records the operations applied to it.
///
/// Copies share storage and graph identity. Leaves created with
/// requires_grad accumulate gradients across backward() calls until
/// zero_grad(); intermediate nodes are reset at the start of every backward.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> data, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Writable view of a leaf's values (optimizer updates, initialization).
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t flat_index) const { return data()[flat_index]; }
  double at(std::size_t row, std::size_t col) const;
  std::vector<double> to_vector() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool is_leaf() const;
  const char* op_name() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Reverse-mode sweep from this scalar. Throws a contract error when the
  /// tensor is not a scalar or does not depend on any requires_grad leaf.
  void backward() const;

  /// Same values, cut from the graph.
  Tensor detach() const;

  bool same_node(const Tensor& other) const noexcept { return node_ == other.node_; }

  // Internal: used by op implementations.
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  const detail::Node& checked() const;
  std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

// Norm denominators below this are treated as degenerate; layer norm floors
// its variance at this value.
inline constexpr double kNormEpsilon = 1e-8;

// ---- operations ------------------------------------------------------------
// Shapes: "matrix" means rank 2, "vector" rank 1. Shape violations raise
// ErrorKind::kDimension tagged "numerics".

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// a * s for a scalar tensor s.
Tensor scale_by(const Tensor& a, const Tensor& s);
/// x[r, c] + bias[c] for every row r.
Tensor add_row(const Tensor& x, const Tensor& bias);
/// x W + b, the affine map used throughout the encoders.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);

Tensor softmax(const Tensor& logits, std::size_t axis);
Tensor log_softmax(const Tensor& logits, std::size_t axis);

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);
/// Each row scaled to unit L2 norm; rank-1 input is treated as one row.
Tensor l2_normalize(const Tensor& x);
Tensor cosine_similarity(const Tensor& a, const Tensor& b);

/// Rows of a matrix at the given indices (repeats allowed).
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
Tensor concat_rows(std::span<const Tensor> parts);
/// Row r of a matrix as a vector.
Tensor row(const Tensor& x, std::size_t r);
/// Flat elements at the given indices, as a vector.
Tensor select(const Tensor& x, std::span<const std::size_t> flat_indices);

/// Multi-head self-attention over `batch` sequences of `seq_len` tokens.
/// qkv holds [Q | K | V] column blocks, shape [batch*seq_len, 3*width];
/// the result has shape [batch*seq_len, width].
Tensor self_attention(const Tensor& qkv, std::size_t batch, std::size_t seq_len,
                      std::size_t heads);

}  // namespace promim
