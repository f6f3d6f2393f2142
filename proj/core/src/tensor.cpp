#include "promim/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include "promim/error.hpp"

namespace promim {

namespace {

constexpr std::string_view kModule = "numerics";

thread_local bool g_grad_enabled = true;

using NodePtr = std::shared_ptr<detail::Node>;

[[noreturn]] void dim_error(const std::string& message) {
  raise(ErrorKind::kDimension, kModule, message);
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    dim_error(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
              shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    dim_error(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
              shape_string(b.shape()));
  }
}

// Builds the output node. The backward closure is only kept when some input
// participates in differentiation.
Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::vector<NodePtr> parents, std::function<void(detail::Node&)> backward) {
  for (double v : value) {
    if (!std::isfinite(v)) {
      raise(ErrorKind::kNumeric, kModule, std::string(op) + " produced a non-finite value");
    }
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  bool track = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) track = track || p->requires_grad;
  }
  if (track) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

// Accumulation target for a parent, or nullptr when it does not need grads.
double* grad_of(const NodePtr& p) { return p->requires_grad ? p->ensure_grad() : nullptr; }

struct AxisLayout {
  std::size_t outer;
  std::size_t len;
  std::size_t inner;
};

AxisLayout axis_layout(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) dim_error(std::string(op) + ": axis out of range");
  AxisLayout l{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) l.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) l.inner *= shape[i];
  if (l.len == 0) dim_error(std::string(op) + ": empty axis");
  return l;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

double* detail::Node::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad.data();
}

// ---- Tensor ------------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> data(shape_numel(shape), 0.0);
  return from_data(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    dim_error("from_data: shape " + shape_string(shape) + " needs " +
              std::to_string(shape_numel(shape)) + " values, got " + std::to_string(data.size()));
  }
  for (double v : data) {
    if (!std::isfinite(v)) raise(ErrorKind::kNumeric, kModule, "from_data: non-finite value");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> data, bool requires_grad) {
  const std::size_t n = data.size();
  return from_data({n}, std::move(data), requires_grad);
}

const detail::Node& Tensor::checked() const {
  if (!node_) raise(ErrorKind::kContract, kModule, "use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return checked().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) dim_error("dim: axis out of range for shape " + shape_string(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return checked().value.size(); }

std::span<const double> Tensor::data() const { return checked().value; }

std::span<double> Tensor::mutable_data() {
  checked();
  if (!is_leaf()) raise(ErrorKind::kContract, kModule, "mutable_data on a non-leaf tensor");
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) {
    raise(ErrorKind::kContract, kModule, "item() on tensor of shape " + shape_string(shape()));
  }
  return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  require_rank(*this, 2, "at");
  return node_->value[r * node_->shape[1] + c];
}

std::vector<double> Tensor::to_vector() const { return checked().value; }

bool Tensor::requires_grad() const { return checked().requires_grad; }

void Tensor::set_requires_grad(bool on) {
  checked();
  if (!is_leaf()) raise(ErrorKind::kContract, kModule, "set_requires_grad on a non-leaf tensor");
  node_->requires_grad = on;
  if (!on) node_->grad.clear();
}

bool Tensor::is_leaf() const { return checked().parents.empty(); }

const char* Tensor::op_name() const { return checked().op; }

bool Tensor::has_grad() const { return !checked().grad.empty(); }

std::span<const double> Tensor::grad() const { return checked().grad; }

std::span<double> Tensor::mutable_grad() {
  checked();
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  checked();
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  auto node = std::make_shared<detail::Node>();
  node->shape = checked().shape;
  node->value = node_->value;
  return Tensor(std::move(node));
}

void Tensor::backward() const {
  const detail::Node& root = checked();
  if (root.value.size() != 1) {
    raise(ErrorKind::kContract, kModule,
          "backward() requires a scalar loss, got shape " + shape_string(root.shape));
  }
  if (!root.requires_grad) {
    raise(ErrorKind::kContract, kModule, "backward() on a loss not connected to any parameter");
  }

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (detail::Node* n : order) {
    if (!n->parents.empty()) n->grad.assign(n->value.size(), 0.0);
  }
  node_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_mode_enabled() { return g_grad_enabled; }

// ---- linear algebra ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    dim_error("matmul: inner dimensions disagree " + shape_string(a.shape()) + " x " +
              shape_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return make_result("matmul", {m, n}, std::move(out), {a.node(), b.node()},
                     [m, k, n](detail::Node& self) {
                       const NodePtr& A = self.parents[0];
                       const NodePtr& B = self.parents[1];
                       const double* g = self.grad.data();
                       if (double* ga = grad_of(A)) {
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             const double* brow = B->value.data() + p * n;
                             const double* grow = g + i * n;
                             double acc = 0.0;
                             for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                             ga[i * k + p] += acc;
                           }
                       }
                       if (double* gb = grad_of(B)) {
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             const double av = A->value[i * k + p];
                             const double* grow = g + i * n;
                             double* gbrow = gb + p * n;
                             for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                           }
                       }
                     });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(r * c);
  const auto in = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = in[i * c + j];
  return make_result("transpose", {c, r}, std::move(out), {a.node()}, [r, c](detail::Node& self) {
    if (double* ga = grad_of(self.parents[0])) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += self.grad[j * r + i];
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    dim_error("reshape: cannot view " + shape_string(a.shape()) + " as " + shape_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result("reshape", std::move(shape), std::move(out), {a.node()},
                     [](detail::Node& self) {
                       if (double* ga = grad_of(self.parents[0])) {
                         for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
                       }
                     });
}

// ---- elementwise ----------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return make_result("add", a.shape(), std::move(out), {a.node(), b.node()},
                     [](detail::Node& self) {
                       for (const NodePtr& p : self.parents) {
                         if (double* gp = grad_of(p)) {
                           for (std::size_t i = 0; i < self.grad.size(); ++i) gp[i] += self.grad[i];
                         }
                       }
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return make_result("sub", a.shape(), std::move(out), {a.node(), b.node()},
                     [](detail::Node& self) {
                       if (double* ga = grad_of(self.parents[0])) {
                         for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
                       }
                       if (double* gb = grad_of(self.parents[1])) {
                         for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i] -= self.grad[i];
                       }
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return make_result("mul", a.shape(), std::move(out), {a.node(), b.node()},
                     [](detail::Node& self) {
                       const NodePtr& A = self.parents[0];
                       const NodePtr& B = self.parents[1];
                       if (double* ga = grad_of(A)) {
                         for (std::size_t i = 0; i < self.grad.size(); ++i)
                           ga[i] += self.grad[i] * B->value[i];
                       }
                       if (double* gb = grad_of(B)) {
                         for (std::size_t i = 0; i < self.grad.size(); ++i)
                           gb[i] += self.grad[i] * A->value[i];
                       }
                     });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  return make_result("scale", a.shape(), std::move(out), {a.node()}, [factor](detail::Node& self) {
    if (double* ga = grad_of(self.parents[0])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * factor;
    }
  });
}

Tensor scale_by(const Tensor& a, const Tensor& s) {
  if (s.numel() != 1) dim_error("scale_by: factor must be a scalar");
  const double f = s.item();
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * f;
  return make_result("scale_by", a.shape(), std::move(out), {a.node(), s.node()},
                     [](detail::Node& self) {
                       const NodePtr& A = self.parents[0];
                       const NodePtr& S = self.parents[1];
                       const double f = S->value[0];
                       if (double* ga = grad_of(A)) {
                         for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * f;
                       }
                       if (double* gs = grad_of(S)) {
                         double acc = 0.0;
                         for (std::size_t i = 0; i < self.grad.size(); ++i)
                           acc += self.grad[i] * A->value[i];
                         gs[0] += acc;
                       }
                     });
}

Tensor add_row(const Tensor& x, const Tensor& bias) {
  require_rank(x, 2, "add_row");
  require_rank(bias, 1, "add_row");
  const std::size_t r = x.dim(0), c = x.dim(1);
  if (bias.dim(0) != c) {
    dim_error("add_row: bias " + shape_string(bias.shape()) + " vs rows of width " +
              std::to_string(c));
  }
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] + bias[j];
  return make_result("add_row", {r, c}, std::move(out), {x.node(), bias.node()},
                     [r, c](detail::Node& self) {
                       if (double* gx = grad_of(self.parents[0])) {
                         for (std::size_t i = 0; i < r * c; ++i) gx[i] += self.grad[i];
                       }
                       if (double* gb = grad_of(self.parents[1])) {
                         for (std::size_t i = 0; i < r; ++i)
                           for (std::size_t j = 0; j < c; ++j) gb[j] += self.grad[i * c + j];
                       }
                     });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return add_row(matmul(x, weight), bias);
}

namespace {

template <typename F, typename D>
Tensor unary(const char* op, const Tensor& a, F f, D dfdx) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i]);
  return make_result(op, a.shape(), std::move(out), {a.node()}, [dfdx](detail::Node& self) {
    const NodePtr& A = self.parents[0];
    if (double* ga = grad_of(A)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        ga[i] += self.grad[i] * dfdx(A->value[i], self.value[i]);
    }
  });
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

}  // namespace

Tensor relu(const Tensor& a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& a) {
  return unary(
      "gelu", a,
      [](double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x))); },
      [](double x, double) {
        const double u = kGeluC * (x + 0.044715 * x * x * x);
        const double t = std::tanh(u);
        const double du = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
      });
}

Tensor exp(const Tensor& a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double v : a.data()) {
    if (!(v > 0.0)) raise(ErrorKind::kDegenerateInput, kModule, "log of a non-positive value");
  }
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

// ---- reductions ------------------------------------------------------------------

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return make_result("sum", {}, {acc}, {a.node()}, [](detail::Node& self) {
    if (double* ga = grad_of(self.parents[0])) {
      const double g = self.grad[0];
      for (std::size_t i = 0; i < self.parents[0]->value.size(); ++i) ga[i] += g;
    }
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) dim_error("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor dot(const Tensor& a, const Tensor& b) {
  require_rank(a, 1, "dot");
  require_same_shape(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += a[i] * b[i];
  return make_result("dot", {}, {acc}, {a.node(), b.node()}, [](detail::Node& self) {
    const NodePtr& A = self.parents[0];
    const NodePtr& B = self.parents[1];
    const double g = self.grad[0];
    if (double* ga = grad_of(A)) {
      for (std::size_t i = 0; i < A->value.size(); ++i) ga[i] += g * B->value[i];
    }
    if (double* gb = grad_of(B)) {
      for (std::size_t i = 0; i < B->value.size(); ++i) gb[i] += g * A->value[i];
    }
  });
}

// ---- softmax family ------------------------------------------------------------------

Tensor softmax(const Tensor& logits, std::size_t axis) {
  const AxisLayout l = axis_layout(logits.shape(), axis, "softmax");
  const auto x = logits.data();
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < l.outer; ++o)
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.len * l.inner + in;
      double mx = x[base];
      for (std::size_t k = 1; k < l.len; ++k) mx = std::max(mx, x[base + k * l.inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < l.len; ++k) {
        const double e = std::exp(x[base + k * l.inner] - mx);
        out[base + k * l.inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < l.len; ++k) out[base + k * l.inner] /= total;
    }
  return make_result("softmax", logits.shape(), std::move(out), {logits.node()},
                     [l](detail::Node& self) {
                       double* gx = grad_of(self.parents[0]);
                       if (!gx) return;
                       const auto& y = self.value;
                       const auto& g = self.grad;
                       for (std::size_t o = 0; o < l.outer; ++o)
                         for (std::size_t in = 0; in < l.inner; ++in) {
                           const std::size_t base = o * l.len * l.inner + in;
                           double s = 0.0;
                           for (std::size_t k = 0; k < l.len; ++k) {
                             const std::size_t idx = base + k * l.inner;
                             s += y[idx] * g[idx];
                           }
                           for (std::size_t k = 0; k < l.len; ++k) {
                             const std::size_t idx = base + k * l.inner;
                             gx[idx] += y[idx] * (g[idx] - s);
                           }
                         }
                     });
}

Tensor log_softmax(const Tensor& logits, std::size_t axis) {
  const AxisLayout l = axis_layout(logits.shape(), axis, "log_softmax");
  const auto x = logits.data();
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < l.outer; ++o)
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.len * l.inner + in;
      double mx = x[base];
      for (std::size_t k = 1; k < l.len; ++k) mx = std::max(mx, x[base + k * l.inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < l.len; ++k) total += std::exp(x[base + k * l.inner] - mx);
      const double lse = mx + std::log(total);
      for (std::size_t k = 0; k < l.len; ++k) out[base + k * l.inner] = x[base + k * l.inner] - lse;
    }
  return make_result("log_softmax", logits.shape(), std::move(out), {logits.node()},
                     [l](detail::Node& self) {
                       double* gx = grad_of(self.parents[0]);
                       if (!gx) return;
                       const auto& y = self.value;
                       const auto& g = self.grad;
                       for (std::size_t o = 0; o < l.outer; ++o)
                         for (std::size_t in = 0; in < l.inner; ++in) {
                           const std::size_t base = o * l.len * l.inner + in;
                           double s = 0.0;
                           for (std::size_t k = 0; k < l.len; ++k) s += g[base + k * l.inner];
                           for (std::size_t k = 0; k < l.len; ++k) {
                             const std::size_t idx = base + k * l.inner;
                             gx[idx] += g[idx] - std::exp(y[idx]) * s;
                           }
                         }
                     });
}

// ---- normalization -------------------------------------------------------------------

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  require_rank(x, 2, "layer_norm");
  const std::size_t r = x.dim(0), c = x.dim(1);
  if (c < 2) dim_error("layer_norm: last dimension must be at least 2");
  if (gain.shape() != Shape{c} || bias.shape() != Shape{c}) {
    dim_error("layer_norm: gain/bias must have shape [" + std::to_string(c) + "]");
  }
  auto xhat = std::make_shared<std::vector<double>>(r * c);
  auto inv_std = std::make_shared<std::vector<double>>(r);
  auto floored = std::make_shared<std::vector<char>>(r);
  std::vector<double> out(r * c);
  const auto in = x.data();
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = in.data() + i * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(c);
    (*floored)[i] = var < kNormEpsilon;
    const double is = 1.0 / std::sqrt(std::max(var, kNormEpsilon));
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (row[j] - mu) * is;
      (*xhat)[i * c + j] = h;
      out[i * c + j] = h * gain[j] + bias[j];
    }
  }
  return make_result(
      "layer_norm", {r, c}, std::move(out), {x.node(), gain.node(), bias.node()},
      [r, c, xhat, inv_std, floored](detail::Node& self) {
        const NodePtr& G = self.parents[1];
        const auto& g = self.grad;
        if (double* gg = grad_of(G)) {
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gg[j] += g[i * c + j] * (*xhat)[i * c + j];
        }
        if (double* gb = grad_of(self.parents[2])) {
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
        }
        if (double* gx = grad_of(self.parents[0])) {
          const double inv_c = 1.0 / static_cast<double>(c);
          for (std::size_t i = 0; i < r; ++i) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const double dh = g[i * c + j] * G->value[j];
              m1 += dh;
              m2 += dh * (*xhat)[i * c + j];
            }
            m1 *= inv_c;
            m2 *= inv_c;
            // With the variance floor active the denominator is a constant.
            if ((*floored)[i]) m2 = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const double dh = g[i * c + j] * G->value[j];
              gx[i * c + j] += (*inv_std)[i] * (dh - m1 - (*xhat)[i * c + j] * m2);
            }
          }
        }
      });
}

Tensor l2_normalize(const Tensor& x) {
  if (x.rank() != 1 && x.rank() != 2) dim_error("l2_normalize: expected a vector or matrix");
  const std::size_t c = x.shape().back();
  const std::size_t r = x.numel() / std::max<std::size_t>(c, 1);
  if (c == 0) dim_error("l2_normalize: empty rows");
  auto norms = std::make_shared<std::vector<double>>(r);
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < r; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < c; ++j) ss += x[i * c + j] * x[i * c + j];
    const double n = std::sqrt(ss);
    if (n < kNormEpsilon) {
      raise(ErrorKind::kDegenerateInput, kModule, "l2_normalize: zero-norm row " + std::to_string(i));
    }
    (*norms)[i] = n;
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] / n;
  }
  return make_result("l2_normalize", x.shape(), std::move(out), {x.node()},
                     [r, c, norms](detail::Node& self) {
                       double* gx = grad_of(self.parents[0]);
                       if (!gx) return;
                       const auto& y = self.value;
                       const auto& g = self.grad;
                       for (std::size_t i = 0; i < r; ++i) {
                         double yg = 0.0;
                         for (std::size_t j = 0; j < c; ++j) yg += y[i * c + j] * g[i * c + j];
                         for (std::size_t j = 0; j < c; ++j)
                           gx[i * c + j] += (g[i * c + j] - y[i * c + j] * yg) / (*norms)[i];
                       }
                     });
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
  require_rank(a, 1, "cosine_similarity");
  require_same_shape(a, b, "cosine_similarity");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  const double na = std::sqrt(aa), nb = std::sqrt(bb);
  if (na < kNormEpsilon || nb < kNormEpsilon) {
    raise(ErrorKind::kDegenerateInput, kModule, "cosine_similarity: zero-norm input");
  }
  const double cosv = std::clamp(ab / (na * nb), -1.0, 1.0);
  const double raw = ab / (na * nb);
  return make_result("cosine_similarity", {}, {cosv}, {a.node(), b.node()},
                     [na, nb, raw](detail::Node& self) {
                       const NodePtr& A = self.parents[0];
                       const NodePtr& B = self.parents[1];
                       const double g = self.grad[0];
                       if (double* ga = grad_of(A)) {
                         for (std::size_t i = 0; i < A->value.size(); ++i)
                           ga[i] += g * (B->value[i] / (na * nb) - raw * A->value[i] / (na * na));
                       }
                       if (double* gb = grad_of(B)) {
                         for (std::size_t i = 0; i < B->value.size(); ++i)
                           gb[i] += g * (A->value[i] / (na * nb) - raw * B->value[i] / (nb * nb));
                       }
                     });
}

// ---- indexing --------------------------------------------------------------------------

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  require_rank(x, 2, "gather_rows");
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> out(rows.size() * c);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= r) dim_error("gather_rows: row index out of range");
    std::copy_n(x.data().data() + rows[i] * c, c, out.data() + i * c);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result("gather_rows", {rows.size(), c}, std::move(out), {x.node()},
                     [idx = std::move(idx), c](detail::Node& self) {
                       if (double* gx = grad_of(self.parents[0])) {
                         for (std::size_t i = 0; i < idx.size(); ++i)
                           for (std::size_t j = 0; j < c; ++j)
                             gx[idx[i] * c + j] += self.grad[i * c + j];
                       }
                     });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) dim_error("concat_rows: nothing to concatenate");
  const std::size_t c = parts.front().rank() == 2 ? parts.front().dim(1) : 0;
  std::size_t rows = 0;
  std::vector<NodePtr> parents;
  std::vector<std::size_t> offsets;
  for (const Tensor& p : parts) {
    require_rank(p, 2, "concat_rows");
    if (p.dim(1) != c) dim_error("concat_rows: column count mismatch");
    offsets.push_back(rows * c);
    rows += p.dim(0);
    parents.push_back(p.node());
  }
  std::vector<double> out;
  out.reserve(rows * c);
  for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return make_result("concat_rows", {rows, c}, std::move(out), std::move(parents),
                     [offsets = std::move(offsets)](detail::Node& self) {
                       for (std::size_t k = 0; k < self.parents.size(); ++k) {
                         if (double* gp = grad_of(self.parents[k])) {
                           const std::size_t n = self.parents[k]->value.size();
                           for (std::size_t i = 0; i < n; ++i) gp[i] += self.grad[offsets[k] + i];
                         }
                       }
                     });
}

Tensor row(const Tensor& x, std::size_t r) {
  require_rank(x, 2, "row");
  if (r >= x.dim(0)) dim_error("row: index out of range");
  const std::size_t c = x.dim(1);
  std::vector<std::size_t> idx(c);
  for (std::size_t j = 0; j < c; ++j) idx[j] = r * c + j;
  return select(x, idx);
}

Tensor select(const Tensor& x, std::span<const std::size_t> flat_indices) {
  std::vector<double> out(flat_indices.size());
  for (std::size_t i = 0; i < flat_indices.size(); ++i) {
    if (flat_indices[i] >= x.numel()) dim_error("select: index out of range");
    out[i] = x[flat_indices[i]];
  }
  std::vector<std::size_t> idx(flat_indices.begin(), flat_indices.end());
  return make_result("select", {idx.size()}, std::move(out), {x.node()},
                     [idx](detail::Node& self) {
                       if (double* gx = grad_of(self.parents[0])) {
                         for (std::size_t i = 0; i < idx.size(); ++i) gx[idx[i]] += self.grad[i];
                       }
                     });
}

// ---- attention --------------------------------------------------------------------------

Tensor self_attention(const Tensor& qkv, std::size_t batch, std::size_t seq_len,
                      std::size_t heads) {
  require_rank(qkv, 2, "self_attention");
  const std::size_t rows = qkv.dim(0), cols = qkv.dim(1);
  if (rows != batch * seq_len || cols % 3 != 0 || heads == 0 || (cols / 3) % heads != 0 ||
      seq_len == 0) {
    dim_error("self_attention: incompatible shape " + shape_string(qkv.shape()) + " for batch " +
              std::to_string(batch) + ", length " + std::to_string(seq_len) + ", heads " +
              std::to_string(heads));
  }
  const std::size_t width = cols / 3, hd = width / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  const double* in = qkv.data().data();
  // probabilities per (batch, head): [seq_len, seq_len]
  auto probs = std::make_shared<std::vector<double>>(batch * heads * seq_len * seq_len);
  std::vector<double> out(rows * width, 0.0);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t h = 0; h < heads; ++h) {
      double* P = probs->data() + (b * heads + h) * seq_len * seq_len;
      for (std::size_t i = 0; i < seq_len; ++i) {
        const double* q = in + (b * seq_len + i) * cols + h * hd;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < seq_len; ++j) {
          const double* k = in + (b * seq_len + j) * cols + width + h * hd;
          double s = 0.0;
          for (std::size_t d = 0; d < hd; ++d) s += q[d] * k[d];
          s *= inv_sqrt;
          P[i * seq_len + j] = s;
          mx = std::max(mx, s);
        }
        double total = 0.0;
        for (std::size_t j = 0; j < seq_len; ++j) {
          P[i * seq_len + j] = std::exp(P[i * seq_len + j] - mx);
          total += P[i * seq_len + j];
        }
        double* o = out.data() + (b * seq_len + i) * width + h * hd;
        for (std::size_t j = 0; j < seq_len; ++j) {
          P[i * seq_len + j] /= total;
          const double p = P[i * seq_len + j];
          const double* v = in + (b * seq_len + j) * cols + 2 * width + h * hd;
          for (std::size_t d = 0; d < hd; ++d) o[d] += p * v[d];
        }
      }
    }
  return make_result(
      "self_attention", {rows, width}, std::move(out), {qkv.node()},
      [=](detail::Node& self) {
        double* gin = grad_of(self.parents[0]);
        if (!gin) return;
        const double* x = self.parents[0]->value.data();
        const double* g = self.grad.data();
        std::vector<double> dP(seq_len);
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t h = 0; h < heads; ++h) {
            const double* P = probs->data() + (b * heads + h) * seq_len * seq_len;
            for (std::size_t i = 0; i < seq_len; ++i) {
              const double* go = g + (b * seq_len + i) * width + h * hd;
              // dV and dP
              double s = 0.0;
              for (std::size_t j = 0; j < seq_len; ++j) {
                const double* v = x + (b * seq_len + j) * cols + 2 * width + h * hd;
                double* gv = gin + (b * seq_len + j) * cols + 2 * width + h * hd;
                const double p = P[i * seq_len + j];
                double acc = 0.0;
                for (std::size_t d = 0; d < hd; ++d) {
                  gv[d] += p * go[d];
                  acc += go[d] * v[d];
                }
                dP[j] = acc;
                s += p * acc;
              }
              // dS = P * (dP - s), then into Q and K
              const double* q = x + (b * seq_len + i) * cols + h * hd;
              double* gq = gin + (b * seq_len + i) * cols + h * hd;
              for (std::size_t j = 0; j < seq_len; ++j) {
                const double ds = P[i * seq_len + j] * (dP[j] - s) * inv_sqrt;
                const double* k = x + (b * seq_len + j) * cols + width + h * hd;
                double* gk = gin + (b * seq_len + j) * cols + width + h * hd;
                for (std::size_t d = 0; d < hd; ++d) {
                  gq[d] += ds * k[d];
                  gk[d] += ds * q[d];
                }
              }
            }
          }
      });
}

}  // namespace promim
