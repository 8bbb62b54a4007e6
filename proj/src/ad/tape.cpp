#include "dynnet/ad/tape.hpp"

#include <algorithm>
#include <cmath>

#include "dynnet/errors.hpp"
#include "dynnet/simd/kernels.hpp"

namespace dynnet::ad {

double leaky_relu(double x, double slope) { return x >= 0.0 ? x : slope * x; }
double leaky_relu_derivative(double x, double slope) { return x >= 0.0 ? 1.0 : slope; }

Tape::Tape(std::span<const double> params, std::size_t batch)
    : params_(params), batch_(batch), column_losses_(batch, 0.0) {
  if (batch == 0) throw DomainError("Tape: batch must be >= 1");
}

Node Tape::push(Rec r) {
  r.out = val_.size();
  if (r.op != Op::SquaredError) val_.resize(val_.size() + r.rows * batch_, 0.0);
  nodes_.push_back(r);
  has_adjoints_ = false;
  return Node{static_cast<std::int32_t>(nodes_.size() - 1)};
}

const Tape::Rec& Tape::rec(Node n) const {
  if (n.id < 0 || static_cast<std::size_t>(n.id) >= nodes_.size()) {
    throw DomainError("Tape: invalid node");
  }
  return nodes_[static_cast<std::size_t>(n.id)];
}

std::size_t Tape::rows(Node n) const { return rec(n).rows; }

bool Tape::depends_on_params(Node n) const { return rec(n).live; }

std::span<const double> Tape::value(Node n) const {
  const Rec& r = rec(n);
  return std::span(val_).subspan(r.out, r.rows * batch_);
}

Node Tape::input(std::span<const double> data, std::size_t rows) {
  if (data.size() != rows * batch_) throw DomainError("Tape::input: size mismatch");
  Node n = push({Op::Input, false, rows});
  std::copy(data.begin(), data.end(), v(rec(n).out));
  return n;
}

Node Tape::param(std::size_t offset, std::size_t rows) {
  if (offset + rows > params_.size()) throw DomainError("Tape::param: out of range");
  Rec r{Op::Param, true, rows};
  r.p0 = offset;
  Node n = push(r);
  double* y = v(rec(n).out);
  for (std::size_t i = 0; i < rows; ++i) std::fill_n(y + i * batch_, batch_, params_[offset + i]);
  return n;
}

Node Tape::affine(const AffineRef& layer, Node x) {
  const Rec& rx = rec(x);
  if (rx.rows != layer.in) throw DomainError("Tape::affine: input rows mismatch");
  if (layer.w_offset + layer.out * layer.in > params_.size() ||
      layer.b_offset + layer.out > params_.size()) {
    throw DomainError("Tape::affine: parameter range out of bounds");
  }
  Rec r{Op::Affine, true, layer.out};
  r.a = x.id;
  r.p0 = layer.w_offset;
  r.p1 = layer.b_offset;
  r.p2 = layer.in;
  Node n = push(r);
  const std::size_t xo = rec(x).out;
  simd::active_kernels().affine(params_.data() + layer.w_offset,
                                params_.data() + layer.b_offset, v(xo), v(rec(n).out),
                                layer.out, layer.in, batch_);
  return n;
}

Node Tape::linear_const(std::span<const double> a, std::size_t out, Node x) {
  const std::size_t in = rec(x).rows;
  if (a.size() != out * in) throw DomainError("Tape::linear_const: matrix size mismatch");
  Rec r{Op::LinearConst, rec(x).live, out};
  r.a = x.id;
  r.p0 = consts_.size();
  r.p2 = in;
  consts_.insert(consts_.end(), a.begin(), a.end());
  Node n = push(r);
  simd::active_kernels().affine(consts_.data() + r.p0, nullptr, v(rec(x).out),
                                v(rec(n).out), out, in, batch_);
  return n;
}

Node Tape::leaky_relu(Node x, double slope) {
  Rec r{Op::LeakyRelu, rec(x).live, rec(x).rows};
  r.a = x.id;
  r.scalar = slope;
  Node n = push(r);
  simd::active_kernels().leaky_relu(v(rec(x).out), v(rec(n).out), r.rows * batch_, slope);
  return n;
}

Node Tape::add(Node a, Node b) {
  if (rec(a).rows != rec(b).rows) throw DomainError("Tape::add: shape mismatch");
  Rec r{Op::Add, rec(a).live || rec(b).live, rec(a).rows};
  r.a = a.id;
  r.b = b.id;
  Node n = push(r);
  const double* pa = v(rec(a).out);
  const double* pb = v(rec(b).out);
  double* y = v(rec(n).out);
  for (std::size_t i = 0; i < r.rows * batch_; ++i) y[i] = pa[i] + pb[i];
  return n;
}

Node Tape::concat(std::initializer_list<Node> parts) {
  Rec r{Op::Concat, false, 0};
  r.p0 = concat_parts_.size();
  r.p1 = parts.size();
  for (Node p : parts) {
    r.rows += rec(p).rows;
    r.live = r.live || rec(p).live;
    concat_parts_.push_back(p.id);
  }
  Node n = push(r);
  double* y = v(rec(n).out);
  for (Node p : parts) {
    const Rec& rp = rec(p);
    y = std::copy_n(v(rp.out), rp.rows * batch_, y);
  }
  return n;
}

Node Tape::slice(Node x, std::size_t row0, std::size_t rows) {
  if (row0 + rows > rec(x).rows) throw DomainError("Tape::slice: out of range");
  Rec r{Op::Slice, rec(x).live, rows};
  r.a = x.id;
  r.p0 = row0;
  Node n = push(r);
  std::copy_n(v(rec(x).out + row0 * batch_), rows * batch_, v(rec(n).out));
  return n;
}

Node Tape::column_scale(Node x, std::span<const double> scale) {
  if (scale.size() != batch_) throw DomainError("Tape::column_scale: size mismatch");
  Rec r{Op::ColumnScale, rec(x).live, rec(x).rows};
  r.a = x.id;
  r.p0 = consts_.size();
  consts_.insert(consts_.end(), scale.begin(), scale.end());
  Node n = push(r);
  const double* px = v(rec(x).out);
  double* y = v(rec(n).out);
  for (std::size_t i = 0; i < r.rows; ++i) {
    for (std::size_t k = 0; k < batch_; ++k) {
      y[i * batch_ + k] = scale[k] == 0.0 ? 0.0 : px[i * batch_ + k] * scale[k];
    }
  }
  return n;
}

void Tape::add_constant_loss(std::size_t column, double value) {
  if (column >= batch_) throw DomainError("Tape::add_constant_loss: column out of range");
  column_losses_[column] += value;
  loss_ += value;
}

void Tape::squared_error(Node x, std::span<const double> target, double weight, double cap) {
  const std::size_t rows = rec(x).rows;
  if (target.size() != rows * batch_) throw DomainError("Tape::squared_error: size mismatch");
  Rec r{Op::SquaredError, rec(x).live, rows};
  r.a = x.id;
  r.p0 = consts_.size();
  r.scalar = weight;
  r.scalar2 = cap;
  consts_.insert(consts_.end(), target.begin(), target.end());
  push(r);
  const double* px = v(rec(x).out);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t k = 0; k < batch_; ++k) {
      const double d = px[i * batch_ + k] - target[i * batch_ + k];
      const double e = std::min(d * d, cap);
      const double c = weight * (std::isnan(e) ? cap : e);
      column_losses_[k] += c;
      loss_ += c;
    }
  }
}

void Tape::backward(std::span<double> grad) {
  if (grad.size() != params_.size()) throw DomainError("Tape::backward: gradient size mismatch");
  const auto& K = simd::active_kernels();
  adj_.assign(val_.size(), 0.0);
  const std::size_t B = batch_;
  for (std::size_t idx = nodes_.size(); idx-- > 0;) {
    const Rec& r = nodes_[idx];
    if (!r.live) continue;
    const double* ybar = adj_.data() + r.out;
    switch (r.op) {
      case Op::Input:
        break;
      case Op::Param:
        for (std::size_t i = 0; i < r.rows; ++i) {
          double s = 0.0;
          for (std::size_t k = 0; k < B; ++k) s += ybar[i * B + k];
          grad[r.p0 + i] += s;
        }
        break;
      case Op::Affine: {
        const Rec& rx = nodes_[static_cast<std::size_t>(r.a)];
        const double* w = params_.data() + r.p0;
        if (rx.live) K.gemm_t_acc(w, ybar, adj_.data() + rx.out, r.rows, r.p2, B);
        K.outer_acc(ybar, val_.data() + rx.out, grad.data() + r.p0, grad.data() + r.p1,
                    r.rows, r.p2, B);
        break;
      }
      case Op::LinearConst: {
        const Rec& rx = nodes_[static_cast<std::size_t>(r.a)];
        K.gemm_t_acc(consts_.data() + r.p0, ybar, adj_.data() + rx.out, r.rows, r.p2, B);
        break;
      }
      case Op::LeakyRelu: {
        const Rec& rx = nodes_[static_cast<std::size_t>(r.a)];
        K.leaky_relu_grad_acc(val_.data() + rx.out, ybar, adj_.data() + rx.out, r.rows * B,
                              r.scalar);
        break;
      }
      case Op::Add:
        for (std::int32_t in : {r.a, r.b}) {
          const Rec& ri = nodes_[static_cast<std::size_t>(in)];
          if (ri.live) K.axpy(1.0, ybar, adj_.data() + ri.out, r.rows * B);
        }
        break;
      case Op::Concat: {
        std::size_t off = 0;
        for (std::size_t p = 0; p < r.p1; ++p) {
          const Rec& rp = nodes_[static_cast<std::size_t>(concat_parts_[r.p0 + p])];
          if (rp.live) K.axpy(1.0, ybar + off, adj_.data() + rp.out, rp.rows * B);
          off += rp.rows * B;
        }
        break;
      }
      case Op::Slice: {
        const Rec& rx = nodes_[static_cast<std::size_t>(r.a)];
        K.axpy(1.0, ybar, adj_.data() + rx.out + r.p0 * B, r.rows * B);
        break;
      }
      case Op::ColumnScale: {
        const Rec& rx = nodes_[static_cast<std::size_t>(r.a)];
        const double* s = consts_.data() + r.p0;
        double* xbar = adj_.data() + rx.out;
        for (std::size_t i = 0; i < r.rows; ++i) {
          for (std::size_t k = 0; k < B; ++k) xbar[i * B + k] += s[k] * ybar[i * B + k];
        }
        break;
      }
      case Op::SquaredError: {
        const Rec& rx = nodes_[static_cast<std::size_t>(r.a)];
        const double* x = val_.data() + rx.out;
        const double* t = consts_.data() + r.p0;
        double* xbar = adj_.data() + rx.out;
        for (std::size_t i = 0; i < r.rows * B; ++i) {
          const double d = x[i] - t[i];
          if (d * d <= r.scalar2) xbar[i] += 2.0 * r.scalar * d;
        }
        break;
      }
    }
  }
  has_adjoints_ = true;
}

void Tape::hessian_vector(std::span<const double> vec, std::span<double> hv) {
  if (!has_adjoints_) throw DomainError("Tape::hessian_vector: call backward() first");
  if (vec.size() != params_.size() || hv.size() != params_.size()) {
    throw DomainError("Tape::hessian_vector: dimension mismatch");
  }
  const auto& K = simd::active_kernels();
  const std::size_t B = batch_;
  tan_.assign(val_.size(), 0.0);

  // Forward tangent sweep.
  for (const Rec& r : nodes_) {
    if (!r.live || r.op == Op::SquaredError) continue;
    double* yt = tan_.data() + r.out;
    switch (r.op) {
      case Op::Param:
        for (std::size_t i = 0; i < r.rows; ++i) std::fill_n(yt + i * B, B, vec[r.p0 + i]);
        break;
      case Op::Affine: {
        const Rec& rx = nodes_[static_cast<std::size_t>(r.a)];
        K.affine(vec.data() + r.p0, vec.data() + r.p1, val_.data() + rx.out, yt, r.rows,
                 r.p2, B);
        if (rx.live) K.gemm_acc(params_.data() + r.p0, tan_.data() + rx.out, yt, r.rows, r.p2, B);
        break;
      }
      case Op::LinearConst: {
        const Rec& rx = nodes_[static_cast<std::size_t>(r.a)];
        K.gemm_acc(consts_.data() + r.p0, tan_.data() + rx.out, yt, r.rows, r.p2, B);
        break;
      }
      case Op::LeakyRelu: {
        const Rec& rx = nodes_[static_cast<std::size_t>(r.a)];
        K.leaky_relu_grad_acc(val_.data() + rx.out, tan_.data() + rx.out, yt, r.rows * B,
                              r.scalar);
        break;
      }
      case Op::Add:
        for (std::int32_t in : {r.a, r.b}) {
          const Rec& ri = nodes_[static_cast<std::size_t>(in)];
          if (ri.live) K.axpy(1.0, tan_.data() + ri.out, yt, r.rows * B);
        }
        break;
      case Op::Concat: {
        std::size_t off = 0;
        for (std::size_t p = 0; p < r.p1; ++p) {
          const Rec& rp = nodes_[static_cast<std::size_t>(concat_parts_[r.p0 + p])];
          if (rp.live) std::copy_n(tan_.data() + rp.out, rp.rows * B, yt + off);
          off += rp.rows * B;
        }
        break;
      }
      case Op::Slice: {
        const Rec& rx = nodes_[static_cast<std::size_t>(r.a)];
        std::copy_n(tan_.data() + rx.out + r.p0 * B, r.rows * B, yt);
        break;
      }
      case Op::ColumnScale: {
        const Rec& rx = nodes_[static_cast<std::size_t>(r.a)];
        const double* s = consts_.data() + r.p0;
        const double* xt = tan_.data() + rx.out;
        for (std::size_t i = 0; i < r.rows; ++i) {
          for (std::size_t k = 0; k < B; ++k) yt[i * B + k] = s[k] * xt[i * B + k];
        }
        break;
      }
      case Op::Input:
      case Op::SquaredError:
        break;
    }
  }

  // Reverse sweep for the tangent of the adjoints.
  adt_.assign(val_.size(), 0.0);
  for (std::size_t idx = nodes_.size(); idx-- > 0;) {
    const Rec& r = nodes_[idx];
    if (!r.live) continue;
    const double* ybar = adj_.data() + r.out;
    const double* ydot = adt_.data() + r.out;
    switch (r.op) {
      case Op::Input:
        break;
      case Op::Param:
        for (std::size_t i = 0; i < r.rows; ++i) {
          double s = 0.0;
          for (std::size_t k = 0; k < B; ++k) s += ydot[i * B + k];
          hv[r.p0 + i] += s;
        }
        break;
      case Op::Affine: {
        const Rec& rx = nodes_[static_cast<std::size_t>(r.a)];
        if (rx.live) {
          double* xdot = adt_.data() + rx.out;
          K.gemm_t_acc(params_.data() + r.p0, ydot, xdot, r.rows, r.p2, B);
          K.gemm_t_acc(vec.data() + r.p0, ybar, xdot, r.rows, r.p2, B);
          K.outer_acc(ybar, tan_.data() + rx.out, hv.data() + r.p0, nullptr, r.rows, r.p2, B);
        }
        K.outer_acc(ydot, val_.data() + rx.out, hv.data() + r.p0, hv.data() + r.p1, r.rows,
                    r.p2, B);
        break;
      }
      case Op::LinearConst: {
        const Rec& rx = nodes_[static_cast<std::size_t>(r.a)];
        K.gemm_t_acc(consts_.data() + r.p0, ydot, adt_.data() + rx.out, r.rows, r.p2, B);
        break;
      }
      case Op::LeakyRelu: {
        const Rec& rx = nodes_[static_cast<std::size_t>(r.a)];
        K.leaky_relu_grad_acc(val_.data() + rx.out, ydot, adt_.data() + rx.out, r.rows * B,
                              r.scalar);
        break;
      }
      case Op::Add:
        for (std::int32_t in : {r.a, r.b}) {
          const Rec& ri = nodes_[static_cast<std::size_t>(in)];
          if (ri.live) K.axpy(1.0, ydot, adt_.data() + ri.out, r.rows * B);
        }
        break;
      case Op::Concat: {
        std::size_t off = 0;
        for (std::size_t p = 0; p < r.p1; ++p) {
          const Rec& rp = nodes_[static_cast<std::size_t>(concat_parts_[r.p0 + p])];
          if (rp.live) K.axpy(1.0, ydot + off, adt_.data() + rp.out, rp.rows * B);
          off += rp.rows * B;
        }
        break;
      }
      case Op::Slice: {
        const Rec& rx = nodes_[static_cast<std::size_t>(r.a)];
        K.axpy(1.0, ydot, adt_.data() + rx.out + r.p0 * B, r.rows * B);
        break;
      }
      case Op::ColumnScale: {
        const Rec& rx = nodes_[static_cast<std::size_t>(r.a)];
        const double* s = consts_.data() + r.p0;
        double* xdot = adt_.data() + rx.out;
        for (std::size_t i = 0; i < r.rows; ++i) {
          for (std::size_t k = 0; k < B; ++k) xdot[i * B + k] += s[k] * ydot[i * B + k];
        }
        break;
      }
      case Op::SquaredError: {
        const Rec& rx = nodes_[static_cast<std::size_t>(r.a)];
        const double* x = val_.data() + rx.out;
        const double* t = consts_.data() + r.p0;
        const double* xt = tan_.data() + rx.out;
        double* xdot = adt_.data() + rx.out;
        for (std::size_t i = 0; i < r.rows * B; ++i) {
          const double d = x[i] - t[i];
          if (d * d <= r.scalar2) xdot[i] += 2.0 * r.scalar * xt[i];
        }
        break;
      }
    }
  }
}

ValueAndGradient value_and_gradient(const ScalarFunction& f, std::span<const double> w) {
  Tape tape(w, 1);
  f(tape);
  ValueAndGradient out;
  out.value = tape.loss();
  out.gradient.assign(w.size(), 0.0);
  tape.backward(out.gradient);
  return out;
}

std::vector<double> hessian_vector_product(const ScalarFunction& f,
                                           std::span<const double> w,
                                           std::span<const double> v) {
  if (v.size() != w.size()) throw DomainError("hessian_vector_product: dimension mismatch");
  Tape tape(w, 1);
  f(tape);
  std::vector<double> g(w.size(), 0.0), hv(w.size(), 0.0);
  tape.backward(g);
  tape.hessian_vector(v, hv);
  return hv;
}

}  // namespace dynnet::ad
