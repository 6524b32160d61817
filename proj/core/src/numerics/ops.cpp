#include "kgqa/numerics/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "kgqa/error.hpp"

namespace kgqa::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

Eigen::Map<RowMat> map(Tensor& t) {
  return {t.data(), static_cast<Index>(t.rows()), static_cast<Index>(t.cols())};
}
Eigen::Map<const RowMat> map(const Tensor& t) {
  return {t.data(), static_cast<Index>(t.rows()), static_cast<Index>(t.cols())};
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                       shape_string(b));
}

Tape& common_tape(Var a, Var b) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    throw InvalidArgument("operands live on different tapes");
  }
  return a.tape();
}

void require_same(const char* op, Var a, Var b) {
  if (!a.value().same_shape(b.value())) shape_fail(op, a.value(), b.value());
}

void require_row(const char* op, Var v) {
  if (v.rows() != 1) throw DimensionError(std::string(op) + ": expected a row, got " + shape_string(v.value()));
}

// Elementwise unary op; `deriv(x, y)` is dy/dx given input and output.
template <class F, class D>
Var unary(const char* tag, Var a, F f, D deriv) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  Tensor y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const auto ia = a.id();
  return t.record(tag, {ia}, std::move(y), [ia, deriv](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    const Tensor& xv = tp.value(ia);
    const Tensor& yv = tp.value(self);
    Tensor& ga = tp.grad_ref(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(xv[i], yv[i]);
  });
}

// Elementwise binary op; `da(x, z, y)` and `db(x, z, y)` are partials.
template <class F, class DA, class DB>
Var binary(const char* tag, Var a, Var b, F f, DA da, DB db) {
  Tape& t = common_tape(a, b);
  require_same(tag, a, b);
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  Tensor y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i], z[i]);
  const auto ia = a.id();
  const auto ib = b.id();
  return t.record(tag, {ia, ib}, std::move(y), [ia, ib, da, db](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    const Tensor& xv = tp.value(ia);
    const Tensor& zv = tp.value(ib);
    const Tensor& yv = tp.value(self);
    if (tp.needs_grad(ia)) {
      Tensor& ga = tp.grad_ref(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * da(xv[i], zv[i], yv[i]);
    }
    if (tp.needs_grad(ib)) {
      Tensor& gb = tp.grad_ref(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * db(xv[i], zv[i], yv[i]);
    }
  });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      "add", a, b, [](double x, double z) { return x + z; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      "sub", a, b, [](double x, double z) { return x - z; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      "mul", a, b, [](double x, double z) { return x * z; },
      [](double, double z, double) { return z; }, [](double x, double, double) { return x; });
}

Var div(Var a, Var b) {
  return binary(
      "div", a, b, [](double x, double z) { return x / z; },
      [](double, double z, double) { return 1.0 / z; },
      [](double x, double z, double) { return -x / (z * z); });
}

Var maximum(Var a, Var b) {
  return binary(
      "maximum", a, b, [](double x, double z) { return std::max(x, z); },
      [](double x, double z, double) { return x >= z ? 1.0 : 0.0; },
      [](double x, double z, double) { return x >= z ? 0.0 : 1.0; });
}

Var scale(Var a, double s) {
  return unary(
      "scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary(
      "add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var one_minus(Var a) {
  return unary(
      "one_minus", a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

Var tanh(Var a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary("sigmoid", a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var leaky_relu(Var a, double slope) {
  return unary(
      "leaky_relu", a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var exp(Var a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var relu(Var a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var add_row(Var a, Var row) {
  Tape& t = common_tape(a, row);
  require_row("add_row", row);
  if (row.cols() != a.cols()) shape_fail("add_row", a.value(), row.value());
  Tensor y = a.value();
  map(y).rowwise() += map(row.value()).row(0);
  const auto ia = a.id();
  const auto ir = row.id();
  return t.record("add_row", {ia, ir}, std::move(y), [ia, ir](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    if (tp.needs_grad(ia)) tp.grad_ref(ia).accumulate(g);
    if (tp.needs_grad(ir)) map(tp.grad_ref(ir)).row(0) += map(g).colwise().sum();
  });
}

Var sub_row(Var a, Var row) {
  Tape& t = common_tape(a, row);
  require_row("sub_row", row);
  if (row.cols() != a.cols()) shape_fail("sub_row", a.value(), row.value());
  Tensor y = a.value();
  map(y).rowwise() -= map(row.value()).row(0);
  const auto ia = a.id();
  const auto ir = row.id();
  return t.record("sub_row", {ia, ir}, std::move(y), [ia, ir](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    if (tp.needs_grad(ia)) tp.grad_ref(ia).accumulate(g);
    if (tp.needs_grad(ir)) map(tp.grad_ref(ir)).row(0) -= map(g).colwise().sum();
  });
}

Var scale_rows(Var a, Var w) {
  Tape& t = common_tape(a, w);
  if (w.cols() != 1 || w.rows() != a.rows()) shape_fail("scale_rows", a.value(), w.value());
  Tensor y = a.value();
  map(y).array().colwise() *= map(w.value()).col(0).array();
  const auto ia = a.id();
  const auto iw = w.id();
  return t.record("scale_rows", {ia, iw}, std::move(y), [ia, iw](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    if (tp.needs_grad(ia)) {
      map(tp.grad_ref(ia)).array() += map(g).array().colwise() * map(tp.value(iw)).col(0).array();
    }
    if (tp.needs_grad(iw)) {
      map(tp.grad_ref(iw)).col(0).array() +=
          (map(g).array() * map(tp.value(ia)).array()).rowwise().sum();
    }
  });
}

Var matmul(Var a, Var b) {
  Tape& t = common_tape(a, b);
  if (a.cols() != b.rows()) shape_fail("matmul", a.value(), b.value());
  Tensor y(a.rows(), b.cols());
  map(y).noalias() = map(a.value()) * map(b.value());
  const auto ia = a.id();
  const auto ib = b.id();
  return t.record("matmul", {ia, ib}, std::move(y), [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    if (tp.needs_grad(ia)) map(tp.grad_ref(ia)).noalias() += map(g) * map(tp.value(ib)).transpose();
    if (tp.needs_grad(ib)) map(tp.grad_ref(ib)).noalias() += map(tp.value(ia)).transpose() * map(g);
  });
}

Var linear(Var x, Var w) {
  Tape& t = common_tape(x, w);
  if (x.cols() != w.cols()) shape_fail("linear", x.value(), w.value());
  Tensor y(x.rows(), w.rows());
  map(y).noalias() = map(x.value()) * map(w.value()).transpose();
  const auto ix = x.id();
  const auto iw = w.id();
  return t.record("linear", {ix, iw}, std::move(y), [ix, iw](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    if (tp.needs_grad(ix)) map(tp.grad_ref(ix)).noalias() += map(g) * map(tp.value(iw));
    if (tp.needs_grad(iw)) map(tp.grad_ref(iw)).noalias() += map(g).transpose() * map(tp.value(ix));
  });
}

Var concat_cols(Var a, Var b) {
  Tape& t = common_tape(a, b);
  if (a.rows() != b.rows()) shape_fail("concat_cols", a.value(), b.value());
  const auto ca = static_cast<Index>(a.cols());
  const auto cb = static_cast<Index>(b.cols());
  Tensor y(a.rows(), a.cols() + b.cols());
  map(y).leftCols(ca) = map(a.value());
  map(y).rightCols(cb) = map(b.value());
  const auto ia = a.id();
  const auto ib = b.id();
  return t.record("concat_cols", {ia, ib}, std::move(y), [ia, ib, ca, cb](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    if (tp.needs_grad(ia)) map(tp.grad_ref(ia)) += map(g).leftCols(ca);
    if (tp.needs_grad(ib)) map(tp.grad_ref(ib)) += map(g).rightCols(cb);
  });
}

Var concat_rows(Var a, Var b) {
  Tape& t = common_tape(a, b);
  if (a.cols() != b.cols()) shape_fail("concat_rows", a.value(), b.value());
  const auto ra = static_cast<Index>(a.rows());
  const auto rb = static_cast<Index>(b.rows());
  Tensor y(a.rows() + b.rows(), a.cols());
  map(y).topRows(ra) = map(a.value());
  map(y).bottomRows(rb) = map(b.value());
  const auto ia = a.id();
  const auto ib = b.id();
  return t.record("concat_rows", {ia, ib}, std::move(y), [ia, ib, ra, rb](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    if (tp.needs_grad(ia)) map(tp.grad_ref(ia)) += map(g).topRows(ra);
    if (tp.needs_grad(ib)) map(tp.grad_ref(ib)) += map(g).bottomRows(rb);
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  if (begin + count > a.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") exceeds " + shape_string(a.value()));
  }
  const auto b = static_cast<Index>(begin);
  const auto c = static_cast<Index>(count);
  Tensor y(a.rows(), count);
  map(y) = map(a.value()).middleCols(b, c);
  const auto ia = a.id();
  return a.tape().record("slice_cols", {ia}, std::move(y), [ia, b, c](Tape& tp, std::size_t self) {
    map(tp.grad_ref(ia)).middleCols(b, c) += map(tp.out_grad(self));
  });
}

Var gather_rows(Var a, std::span<const std::uint32_t> rows) {
  const Tensor& x = a.value();
  const std::size_t d = x.cols();
  Tensor y(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.rows()) {
      throw DimensionError("gather_rows: row " + std::to_string(rows[i]) + " out of range for " +
                           shape_string(x));
    }
    std::copy_n(x.data() + rows[i] * d, d, y.data() + i * d);
  }
  const auto ia = a.id();
  std::vector<std::uint32_t> idx(rows.begin(), rows.end());
  return a.tape().record("gather_rows", {ia}, std::move(y),
                         [ia, idx = std::move(idx), d](Tape& tp, std::size_t self) {
                           const Tensor& g = tp.out_grad(self);
                           Tensor& ga = tp.grad_ref(ia);
                           for (std::size_t i = 0; i < idx.size(); ++i) {
                             const double* src = g.data() + i * d;
                             double* dst = ga.data() + idx[i] * d;
                             for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                           }
                         });
}

Var where_rows(const std::vector<bool>& mask, Var a, Var b) {
  Tape& t = common_tape(a, b);
  require_same("where_rows", a, b);
  if (mask.size() != a.rows()) {
    throw DimensionError("where_rows: mask of " + std::to_string(mask.size()) + " rows for " +
                         shape_string(a.value()));
  }
  Tensor y = b.value();
  const std::size_t d = y.cols();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) std::copy_n(a.value().data() + i * d, d, y.data() + i * d);
  }
  const auto ia = a.id();
  const auto ib = b.id();
  return t.record("where_rows", {ia, ib}, std::move(y), [ia, ib, mask, d](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      const auto target = mask[i] ? ia : ib;
      if (!tp.needs_grad(target)) continue;
      double* dst = tp.grad_ref(target).data() + i * d;
      const double* src = g.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
  });
}

Var sum(Var a) {
  const auto ia = a.id();
  return a.tape().record("sum", {ia}, Tensor::scalar(map(a.value()).sum()),
                         [ia](Tape& tp, std::size_t self) {
                           map(tp.grad_ref(ia)).array() += tp.out_grad(self)[0];
                         });
}

Var mean(Var a) {
  if (a.value().size() == 0) throw DimensionError("mean of an empty tensor");
  const double n = static_cast<double>(a.value().size());
  const auto ia = a.id();
  return a.tape().record("mean", {ia}, Tensor::scalar(map(a.value()).sum() / n),
                         [ia, n](Tape& tp, std::size_t self) {
                           map(tp.grad_ref(ia)).array() += tp.out_grad(self)[0] / n;
                         });
}

Var max_all(Var a) {
  const Tensor& x = a.value();
  if (x.size() == 0) throw DimensionError("max of an empty tensor");
  std::size_t best = 0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (x[i] > x[best]) best = i;
  }
  const auto ia = a.id();
  return a.tape().record("max_all", {ia}, Tensor::scalar(x[best]), [ia, best](Tape& tp, std::size_t self) {
    tp.grad_ref(ia)[best] += tp.out_grad(self)[0];
  });
}

Var row_norm(Var a) {
  const Tensor& x = a.value();
  Tensor y(x.rows(), 1);
  map(y).col(0) = map(x).rowwise().norm();
  const auto ia = a.id();
  return a.tape().record("row_norm", {ia}, std::move(y), [ia](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    const Tensor& xv = tp.value(ia);
    const Tensor& yv = tp.value(self);
    Tensor& ga = tp.grad_ref(ia);
    for (std::size_t r = 0; r < xv.rows(); ++r) {
      if (yv[r] == 0.0) continue;
      const double s = g[r] / yv[r];
      for (std::size_t c = 0; c < xv.cols(); ++c) ga(r, c) += s * xv(r, c);
    }
  });
}

Var norm(Var a) {
  require_row("norm", a);
  return row_norm(a);
}

Var dot(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require_row("dot", a);
  require_same("dot", a, b);
  const double v = map(a.value()).row(0).dot(map(b.value()).row(0));
  const auto ia = a.id();
  const auto ib = b.id();
  return t.record("dot", {ia, ib}, Tensor::scalar(v), [ia, ib](Tape& tp, std::size_t self) {
    const double g = tp.out_grad(self)[0];
    if (tp.needs_grad(ia)) map(tp.grad_ref(ia)) += g * map(tp.value(ib));
    if (tp.needs_grad(ib)) map(tp.grad_ref(ib)) += g * map(tp.value(ia));
  });
}

Var cosine_rows(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require_row("cosine_rows", b);
  if (a.cols() != b.cols()) shape_fail("cosine_rows", a.value(), b.value());
  const auto A = map(a.value());
  const auto B = map(b.value()).row(0);
  const double nb = B.norm();
  if (nb == 0.0) throw NumericError("cosine similarity with a zero vector");
  Tensor y(a.rows(), 1);
  for (Index r = 0; r < A.rows(); ++r) {
    const double na = A.row(r).norm();
    if (na == 0.0) throw NumericError("cosine similarity with a zero vector");
    y[static_cast<std::size_t>(r)] = A.row(r).dot(B) / (na * nb);
  }
  const auto ia = a.id();
  const auto ib = b.id();
  return t.record("cosine_rows", {ia, ib}, std::move(y), [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    const auto Av = map(tp.value(ia));
    const auto Bv = map(tp.value(ib)).row(0);
    const Tensor& cv = tp.value(self);
    const double nbv = Bv.norm();
    for (Index r = 0; r < Av.rows(); ++r) {
      const double gr = g[static_cast<std::size_t>(r)];
      if (gr == 0.0) continue;
      const double c = cv[static_cast<std::size_t>(r)];
      const double na = Av.row(r).norm();
      // dc/da = b/(|a||b|) - c a/|a|^2, symmetric for b.
      if (tp.needs_grad(ia)) {
        map(tp.grad_ref(ia)).row(r) += gr * (Bv / (na * nbv) - c * Av.row(r) / (na * na));
      }
      if (tp.needs_grad(ib)) {
        map(tp.grad_ref(ib)).row(0) += gr * (Av.row(r) / (na * nbv) - c * Bv / (nbv * nbv));
      }
    }
  });
}

Var cosine(Var a, Var b) {
  require_row("cosine", a);
  return cosine_rows(a, b);
}

Var segment_softmax(Var scores, std::span<const std::uint32_t> segment, std::size_t segments) {
  const Tensor& s = scores.value();
  if (s.cols() != 1 || s.rows() != segment.size()) {
    throw DimensionError("segment_softmax: scores " + shape_string(s) + " with " +
                         std::to_string(segment.size()) + " segment ids");
  }
  std::vector<double> seg_max(segments, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < segment.size(); ++i) {
    if (segment[i] >= segments) throw DimensionError("segment_softmax: segment id out of range");
    seg_max[segment[i]] = std::max(seg_max[segment[i]], s[i]);
  }
  Tensor w(s.rows(), 1);
  std::vector<double> seg_sum(segments, 0.0);
  for (std::size_t i = 0; i < segment.size(); ++i) {
    w[i] = std::exp(s[i] - seg_max[segment[i]]);
    seg_sum[segment[i]] += w[i];
  }
  for (std::size_t i = 0; i < segment.size(); ++i) w[i] /= seg_sum[segment[i]];
  const auto is = scores.id();
  std::vector<std::uint32_t> seg(segment.begin(), segment.end());
  return scores.tape().record(
      "segment_softmax", {is}, std::move(w),
      [is, seg = std::move(seg), segments](Tape& tp, std::size_t self) {
        const Tensor& g = tp.out_grad(self);
        const Tensor& wv = tp.value(self);
        std::vector<double> inner(segments, 0.0);
        for (std::size_t i = 0; i < seg.size(); ++i) inner[seg[i]] += wv[i] * g[i];
        Tensor& gs = tp.grad_ref(is);
        for (std::size_t i = 0; i < seg.size(); ++i) gs[i] += wv[i] * (g[i] - inner[seg[i]]);
      });
}

Var segment_sum(Var a, std::span<const std::uint32_t> segment, std::size_t segments) {
  const Tensor& x = a.value();
  if (x.rows() != segment.size()) {
    throw DimensionError("segment_sum: " + shape_string(x) + " with " +
                         std::to_string(segment.size()) + " segment ids");
  }
  const std::size_t d = x.cols();
  Tensor y(segments, d);
  for (std::size_t i = 0; i < segment.size(); ++i) {
    if (segment[i] >= segments) throw DimensionError("segment_sum: segment id out of range");
    double* dst = y.data() + segment[i] * d;
    const double* src = x.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
  }
  const auto ia = a.id();
  std::vector<std::uint32_t> seg(segment.begin(), segment.end());
  return a.tape().record("segment_sum", {ia}, std::move(y),
                         [ia, seg = std::move(seg), d](Tape& tp, std::size_t self) {
                           const Tensor& g = tp.out_grad(self);
                           Tensor& ga = tp.grad_ref(ia);
                           for (std::size_t i = 0; i < seg.size(); ++i) {
                             const double* src = g.data() + seg[i] * d;
                             double* dst = ga.data() + i * d;
                             for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                           }
                         });
}

}  // namespace kgqa::nn
