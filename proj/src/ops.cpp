#include "proto_ood/ops.hpp"

#include <cmath>
#include <string>

#include "proto_ood/errors.hpp"

namespace proto_ood {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMajorMatrix>;
using ConstMatMap = Eigen::Map<const RowMajorMatrix>;

ConstMatMap mat_of(const detail::TensorNode& n) {
  return ConstMatMap(n.values.data(), n.shape[0], n.shape[1]);
}

MatMap grad_mat_of(detail::TensorNode& n) {
  return MatMap(n.grad.data(), n.shape[0], n.shape[1]);
}

ConstMatMap grad_mat_of_const(const detail::TensorNode& n) {
  return ConstMatMap(n.grad.data(), n.shape[0], n.shape[1]);
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected rank-2 tensor, got shape " +
                     shape_to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
}

using NodePtr = std::shared_ptr<detail::TensorNode>;

}  // namespace

Tensor add(const Tensor& a, const Tensor& b, Tape& tape) {
  require_same_shape(a, b, "add");
  Tensor out = tape.make_output(a.shape(), a.requires_grad() || b.requires_grad());
  out.values() = a.values() + b.values();
  if (out.requires_grad()) {
    tape.record([an = a.node_ptr(), bn = b.node_ptr(), on = out.node_ptr()] {
      if (an->requires_grad) an->grad += on->grad;
      if (bn->requires_grad) bn->grad += on->grad;
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b, Tape& tape) {
  require_same_shape(a, b, "mul");
  Tensor out = tape.make_output(a.shape(), a.requires_grad() || b.requires_grad());
  out.values() = a.values() * b.values();
  if (out.requires_grad()) {
    tape.record([an = a.node_ptr(), bn = b.node_ptr(), on = out.node_ptr()] {
      if (an->requires_grad) an->grad += on->grad * bn->values;
      if (bn->requires_grad) bn->grad += on->grad * an->values;
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double factor, Tape& tape) {
  Tensor out = tape.make_output(a.shape(), a.requires_grad());
  out.values() = a.values() * factor;
  if (out.requires_grad()) {
    tape.record([an = a.node_ptr(), on = out.node_ptr(), factor] {
      if (an->requires_grad) an->grad += on->grad * factor;
    });
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b, Tape& tape) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree, " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
  Tensor out = tape.make_output({a.rows(), b.cols()}, a.requires_grad() || b.requires_grad());
  {
    MatMap o(out.values().data(), a.rows(), b.cols());
    o.noalias() = mat_of(*a.node()) * mat_of(*b.node());
  }
  if (out.requires_grad()) {
    tape.record([an = a.node_ptr(), bn = b.node_ptr(), on = out.node_ptr()] {
      auto dC = grad_mat_of_const(*on);
      if (an->requires_grad) grad_mat_of(*an).noalias() += dC * mat_of(*bn).transpose();
      if (bn->requires_grad) grad_mat_of(*bn).noalias() += mat_of(*an).transpose() * dC;
    });
  }
  return out;
}

Tensor transpose(const Tensor& a, Tape& tape) {
  require_rank2(a, "transpose");
  Tensor out = tape.make_output({a.cols(), a.rows()}, a.requires_grad());
  MatMap(out.values().data(), a.cols(), a.rows()) = mat_of(*a.node()).transpose();
  if (out.requires_grad()) {
    tape.record([an = a.node_ptr(), on = out.node_ptr()] {
      if (an->requires_grad) grad_mat_of(*an) += grad_mat_of_const(*on).transpose();
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& a, Index start, Index count, Tape& tape) {
  require_rank2(a, "slice_cols");
  if (start < 0 || count <= 0 || start + count > a.cols()) {
    throw IndexError("slice_cols: columns [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of range for shape " +
                     shape_to_string(a.shape()));
  }
  Tensor out = tape.make_output({a.rows(), count}, a.requires_grad());
  MatMap(out.values().data(), a.rows(), count) = mat_of(*a.node()).middleCols(start, count);
  if (out.requires_grad()) {
    tape.record([an = a.node_ptr(), on = out.node_ptr(), start, count] {
      if (an->requires_grad) {
        grad_mat_of(*an).middleCols(start, count) += grad_mat_of_const(*on);
      }
    });
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts, Tape& tape) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  const Index rows = parts.front().rows();
  Index total = 0;
  bool any_grad = false;
  for (const Tensor& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: row mismatch " + shape_to_string(parts.front().shape()) +
                       " vs " + shape_to_string(p.shape()));
    }
    total += p.cols();
    any_grad = any_grad || p.requires_grad();
  }
  Tensor out = tape.make_output({rows, total}, any_grad);
  {
    MatMap o(out.values().data(), rows, total);
    Index at = 0;
    for (const Tensor& p : parts) {
      o.middleCols(at, p.cols()) = mat_of(*p.node());
      at += p.cols();
    }
  }
  if (out.requires_grad()) {
    std::vector<NodePtr> nodes;
    nodes.reserve(parts.size());
    for (const Tensor& p : parts) nodes.push_back(p.node_ptr());
    tape.record([nodes, on = out.node_ptr(), rows, total] {
      auto dO = grad_mat_of_const(*on);
      Index at = 0;
      for (const NodePtr& n : nodes) {
        const Index c = n->shape[1];
        if (n->requires_grad) grad_mat_of(*n) += dO.middleCols(at, c);
        at += c;
      }
    });
  }
  return out;
}

namespace {

Index part_rows(const Tensor& p) { return p.rank() == 1 ? 1 : p.shape()[0]; }
Index part_cols(const Tensor& p) { return p.rank() == 1 ? p.shape()[0] : p.shape()[1]; }

}  // namespace

Tensor concat_rows(const std::vector<Tensor>& parts, Tape& tape) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  Index width = -1;
  Index total = 0;
  bool any_grad = false;
  for (const Tensor& p : parts) {
    if (p.rank() != 1 && p.rank() != 2) {
      throw ShapeError("concat_rows: parts must be rank-1 or rank-2, got " +
                       shape_to_string(p.shape()));
    }
    if (width < 0) width = part_cols(p);
    if (part_cols(p) != width) {
      throw ShapeError("concat_rows: width mismatch, expected " + std::to_string(width) +
                       " got " + shape_to_string(p.shape()));
    }
    total += part_rows(p);
    any_grad = any_grad || p.requires_grad();
  }
  Tensor out = tape.make_output({total, width}, any_grad);
  {
    Index at = 0;
    for (const Tensor& p : parts) {
      const Index n = p.numel();
      out.values().segment(at, n) = p.values();
      at += n;
    }
  }
  if (out.requires_grad()) {
    std::vector<NodePtr> nodes;
    nodes.reserve(parts.size());
    for (const Tensor& p : parts) nodes.push_back(p.node_ptr());
    tape.record([nodes, on = out.node_ptr()] {
      Index at = 0;
      for (const NodePtr& n : nodes) {
        const Index count = n->values.size();
        if (n->requires_grad) n->grad += on->grad.segment(at, count);
        at += count;
      }
    });
  }
  return out;
}

Tensor row(const Tensor& a, Index i, Tape& tape) {
  require_rank2(a, "row");
  if (i < 0 || i >= a.rows()) {
    throw IndexError("row: index " + std::to_string(i) + " out of range for shape " +
                     shape_to_string(a.shape()));
  }
  const Index width = a.cols();
  Tensor out = tape.make_output({width}, a.requires_grad());
  out.values() = a.values().segment(i * width, width);
  if (out.requires_grad()) {
    tape.record([an = a.node_ptr(), on = out.node_ptr(), i, width] {
      if (an->requires_grad) an->grad.segment(i * width, width) += on->grad;
    });
  }
  return out;
}

Tensor reshape(const Tensor& a, const Shape& shape, Tape& tape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_to_string(a.shape()) + " as " +
                     shape_to_string(shape));
  }
  Tensor out = tape.make_output(shape, a.requires_grad());
  out.values() = a.values();
  if (out.requires_grad()) {
    tape.record([an = a.node_ptr(), on = out.node_ptr()] {
      if (an->requires_grad) an->grad += on->grad;
    });
  }
  return out;
}

Tensor silu(const Tensor& a, Tape& tape) {
  Tensor out = tape.make_output(a.shape(), a.requires_grad());
  const Eigen::ArrayXd sig = 1.0 / (1.0 + (-a.values()).exp());
  out.values() = a.values() * sig;
  if (out.requires_grad()) {
    tape.record([an = a.node_ptr(), on = out.node_ptr(), sig] {
      if (an->requires_grad) {
        an->grad += on->grad * sig * (1.0 + an->values * (1.0 - sig));
      }
    });
  }
  return out;
}

Tensor rms_norm(const Tensor& x, const Tensor& gain, double eps, Tape& tape) {
  require_rank2(x, "rms_norm");
  if (gain.rank() != 1 || gain.shape()[0] != x.cols()) {
    throw ShapeError("rms_norm: gain shape " + shape_to_string(gain.shape()) +
                     " does not match row width of " + shape_to_string(x.shape()));
  }
  const Index rows = x.rows(), d = x.cols();
  Tensor out = tape.make_output(x.shape(), x.requires_grad() || gain.requires_grad());
  Eigen::ArrayXd inv_rms(rows);
  for (Index r = 0; r < rows; ++r) {
    const auto xr = x.values().segment(r * d, d);
    inv_rms[r] = 1.0 / std::sqrt(xr.square().mean() + eps);
    out.values().segment(r * d, d) = gain.values() * xr * inv_rms[r];
  }
  if (out.requires_grad()) {
    tape.record([xn = x.node_ptr(), gn = gain.node_ptr(), on = out.node_ptr(), inv_rms, d] {
      const Index rows2 = xn->shape[0];
      for (Index r = 0; r < rows2; ++r) {
        const auto xr = xn->values.segment(r * d, d);
        const auto dy = on->grad.segment(r * d, d);
        const double inv = inv_rms[r];
        if (xn->requires_grad) {
          const double dot = (dy * gn->values * xr).sum();
          xn->grad.segment(r * d, d) +=
              gn->values * dy * inv - xr * (inv * inv * inv * dot / static_cast<double>(d));
        }
        if (gn->requires_grad) gn->grad += dy * xr * inv;
      }
    });
  }
  return out;
}

Tensor softmax_causal(const Tensor& scores, Tape& tape) {
  require_rank2(scores, "softmax_causal");
  if (scores.rows() != scores.cols()) {
    throw ShapeError("softmax_causal: expected square scores, got " +
                     shape_to_string(scores.shape()));
  }
  const Index n = scores.rows();
  Tensor out = tape.make_output(scores.shape(), scores.requires_grad());
  for (Index i = 0; i < n; ++i) {
    const auto si = scores.values().segment(i * n, i + 1);
    const double m = si.maxCoeff();
    Eigen::ArrayXd e = (si - m).exp();
    out.values().segment(i * n, i + 1) = e / e.sum();
    // columns j > i stay zero
  }
  if (out.requires_grad()) {
    tape.record([sn = scores.node_ptr(), on = out.node_ptr(), n] {
      if (!sn->requires_grad) return;
      for (Index i = 0; i < n; ++i) {
        const auto p = on->values.segment(i * n, i + 1);
        const auto dy = on->grad.segment(i * n, i + 1);
        const double dot = (p * dy).sum();
        sn->grad.segment(i * n, i + 1) += p * (dy - dot);
      }
    });
  }
  return out;
}

Tensor cosine(const Tensor& a, const Tensor& b, Tape& tape) {
  if (a.rank() != 1 || b.rank() != 1 || a.numel() != b.numel()) {
    throw ShapeError("cosine: expected equal-length vectors, got " +
                     shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
  }
  const double saa = a.values().square().sum();
  const double sbb = b.values().square().sum();
  if (saa < 1e-24 || sbb < 1e-24) {
    throw ValueError("cosine: degenerate vector with norm < 1e-12");
  }
  const double sab = (a.values() * b.values()).sum();
  const double denom = std::sqrt(saa * sbb);
  const double value = sab / denom;
  Tensor out = tape.make_output({1}, a.requires_grad() || b.requires_grad());
  out.values()[0] = value;
  if (out.requires_grad()) {
    tape.record([an = a.node_ptr(), bn = b.node_ptr(), on = out.node_ptr(), saa, sbb, denom,
                 value] {
      const double g = on->grad[0];
      if (an->requires_grad) an->grad += g * (bn->values / denom - an->values * (value / saa));
      if (bn->requires_grad) bn->grad += g * (an->values / denom - bn->values * (value / sbb));
    });
  }
  return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, Index target, Tape& tape) {
  if (logits.rank() != 1) {
    throw ShapeError("softmax_cross_entropy: expected rank-1 logits, got " +
                     shape_to_string(logits.shape()));
  }
  const Index k = logits.numel();
  if (target < 0 || target >= k) {
    throw IndexError("softmax_cross_entropy: target " + std::to_string(target) +
                     " out of range for " + std::to_string(k) + " classes");
  }
  const double m = logits.values().maxCoeff();
  const double lse = m + std::log((logits.values() - m).exp().sum());
  Tensor out = tape.make_output({1}, logits.requires_grad());
  out.values()[0] = lse - logits.values()[target];
  if (out.requires_grad()) {
    tape.record([ln = logits.node_ptr(), on = out.node_ptr(), target, lse] {
      if (!ln->requires_grad) return;
      const double g = on->grad[0];
      Eigen::ArrayXd p = (ln->values - lse).exp();
      p[target] -= 1.0;
      ln->grad += g * p;
    });
  }
  return out;
}

Tensor sum(const Tensor& a, Tape& tape) {
  Tensor out = tape.make_output({1}, a.requires_grad());
  out.values()[0] = a.values().sum();
  if (out.requires_grad()) {
    tape.record([an = a.node_ptr(), on = out.node_ptr()] {
      if (an->requires_grad) an->grad += on->grad[0];
    });
  }
  return out;
}

Tensor stack_scalars(const std::vector<Tensor>& scalars, Tape& tape) {
  if (scalars.empty()) throw ShapeError("stack_scalars: no inputs");
  bool any_grad = false;
  for (const Tensor& s : scalars) {
    if (s.numel() != 1) {
      throw ShapeError("stack_scalars: expected scalars, got " + shape_to_string(s.shape()));
    }
    any_grad = any_grad || s.requires_grad();
  }
  Tensor out = tape.make_output({static_cast<Index>(scalars.size())}, any_grad);
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    out.values()[static_cast<Index>(i)] = scalars[i].values()[0];
  }
  if (out.requires_grad()) {
    std::vector<NodePtr> nodes;
    nodes.reserve(scalars.size());
    for (const Tensor& s : scalars) nodes.push_back(s.node_ptr());
    tape.record([nodes, on = out.node_ptr()] {
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i]->requires_grad) nodes[i]->grad[0] += on->grad[static_cast<Index>(i)];
      }
    });
  }
  return out;
}

Tensor mean_scalars(const std::vector<Tensor>& scalars, Tape& tape) {
  Tensor total = sum(stack_scalars(scalars, tape), tape);
  return scale(total, 1.0 / static_cast<double>(scalars.size()), tape);
}

}  // namespace proto_ood
