#pragma once

// Reverse-mode tape over batched vector primitives.
//
// Every node is a `rows x batch` row-major block. Operations execute eagerly
// while they are recorded, so values are available immediately (rollouts
// inspect them to detect divergence). After backward(), the first-order
// adjoints stay on the tape and hessian_vector() reuses them: one forward
// tangent sweep plus one reverse sweep per product (forward-over-reverse).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <vector>

#include "dynnet/ad/param_vector.hpp"

namespace dynnet::ad {

struct Node {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Affine map y = W x + b with W (out x in) at w_offset and b (out) at b_offset
// inside the parameter vector.
struct AffineRef {
  std::size_t w_offset = 0;
  std::size_t b_offset = 0;
  std::size_t out = 0;
  std::size_t in = 0;
};

double leaky_relu(double x, double slope);
double leaky_relu_derivative(double x, double slope);

class Tape {
 public:
  // params must outlive the tape.
  Tape(std::span<const double> params, std::size_t batch);

  std::size_t batch() const { return batch_; }
  std::size_t param_count() const { return params_.size(); }

  // Constant rows x batch block.
  Node input(std::span<const double> data, std::size_t rows);
  // Parameter slice broadcast across the batch.
  Node param(std::size_t offset, std::size_t rows);
  Node affine(const AffineRef& layer, Node x);
  // y = A x with a constant (out x in) matrix.
  Node linear_const(std::span<const double> a, std::size_t out, Node x);
  Node leaky_relu(Node x, double slope);
  Node add(Node a, Node b);
  Node concat(std::initializer_list<Node> parts);
  Node slice(Node x, std::size_t row0, std::size_t rows);
  // y[:, k] = x[:, k] * scale[k]; a zero scale yields exact zeros even for
  // non-finite x.
  Node column_scale(Node x, std::span<const double> scale);

  // loss += weight * sum min((x - target)^2, cap). Clamped elements carry no
  // gradient. Per-column contributions are accumulated in column_losses().
  void squared_error(Node x, std::span<const double> target, double weight,
                     double cap = std::numeric_limits<double>::infinity());

  // Adds a parameter-independent term to one column's loss.
  void add_constant_loss(std::size_t column, double value);

  double loss() const { return loss_; }
  std::span<const double> column_losses() const { return column_losses_; }

  std::size_t rows(Node n) const;
  std::span<const double> value(Node n) const;
  bool depends_on_params(Node n) const;

  // grad += d loss / d params. Keeps adjoints for hessian_vector().
  void backward(std::span<double> grad);
  // hv += H v. Requires backward() first.
  void hessian_vector(std::span<const double> v, std::span<double> hv);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t arena_size() const { return val_.size(); }

 private:
  enum class Op : std::uint8_t {
    Input, Param, Affine, LinearConst, LeakyRelu, Add, Concat, Slice, ColumnScale,
    SquaredError,
  };
  struct Rec {
    Op op;
    bool live = false;  // depends on parameters
    std::size_t rows = 0;
    std::size_t out = 0;  // value offset
    std::int32_t a = -1, b = -1;
    std::size_t p0 = 0, p1 = 0, p2 = 0;
    double scalar = 0.0, scalar2 = 0.0;
  };

  Node push(Rec r);
  const Rec& rec(Node n) const;
  double* v(std::size_t off) { return val_.data() + off; }

  std::span<const double> params_;
  std::size_t batch_;
  std::vector<Rec> nodes_;
  std::vector<double> val_;
  std::vector<double> consts_;
  std::vector<std::int32_t> concat_parts_;
  std::vector<double> adj_, tan_, adt_;
  std::vector<double> column_losses_;
  double loss_ = 0.0;
  bool has_adjoints_ = false;
};

// f records a scalar loss on the tape it is given (batch size 1).
using ScalarFunction = std::function<void(Tape&)>;

struct ValueAndGradient {
  double value = 0.0;
  std::vector<double> gradient;
};

ValueAndGradient value_and_gradient(const ScalarFunction& f, std::span<const double> w);
std::vector<double> hessian_vector_product(const ScalarFunction& f,
                                           std::span<const double> w,
                                           std::span<const double> v);

}  // namespace dynnet::ad
