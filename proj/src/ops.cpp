#include "cpgm/ops.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <utility>

namespace cpgm {

namespace {

using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ColMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
using RowMap = Eigen::Map<RowMatrix>;
using ConstRowMap = Eigen::Map<const RowMatrix>;

void require_same_shape(const TensorPtr& a, const TensorPtr& b, const char* op) {
  if (a->shape != b->shape) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a->shape) +
                     " vs " + shape_to_string(b->shape));
  }
}

TensorPtr make_node(Shape shape, Array values, std::vector<TensorPtr> parents,
                    std::function<void(Tensor&)> backprop) {
  const bool track = track_gradients(parents);
  auto out = Tensor::create(std::move(shape), std::move(values), track);
  if (track) {
    out->parents = std::move(parents);
    out->backprop = std::move(backprop);
  }
  return out;
}

}  // namespace

// ---- elementwise -----------------------------------------------------------

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
  require_same_shape(a, b, "add");
  return make_node(a->shape, a->values + b->values, {a, b}, [a, b](Tensor& self) {
    a->accumulate(self.grad);
    b->accumulate(self.grad);
  });
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
  require_same_shape(a, b, "sub");
  return make_node(a->shape, a->values - b->values, {a, b}, [a, b](Tensor& self) {
    a->accumulate(self.grad);
    b->accumulate(-self.grad);
  });
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
  require_same_shape(a, b, "mul");
  return make_node(a->shape, a->values * b->values, {a, b}, [a, b](Tensor& self) {
    if (a->grad_enabled) a->accumulate(self.grad * b->values);
    if (b->grad_enabled) b->accumulate(self.grad * a->values);
  });
}

TensorPtr cdiv(const TensorPtr& a, const TensorPtr& b) {
  require_same_shape(a, b, "cdiv");
  return make_node(a->shape, a->values / b->values, {a, b}, [a, b](Tensor& self) {
    if (a->grad_enabled) a->accumulate(self.grad / b->values);
    if (b->grad_enabled) b->accumulate(-self.grad * a->values / (b->values * b->values));
  });
}

TensorPtr neg(const TensorPtr& a) {
  return make_node(a->shape, -a->values, {a},
                   [a](Tensor& self) { a->accumulate(-self.grad); });
}

TensorPtr add_scalar(const TensorPtr& a, Scalar c) {
  return make_node(a->shape, a->values + c, {a},
                   [a](Tensor& self) { a->accumulate(self.grad); });
}

TensorPtr mul_scalar(const TensorPtr& a, Scalar c) {
  return make_node(a->shape, a->values * c, {a},
                   [a, c](Tensor& self) { a->accumulate(self.grad * c); });
}

TensorPtr reciprocal(const TensorPtr& a) {
  Array out = a->values.inverse();
  return make_node(a->shape, out, {a}, [a](Tensor& self) {
    a->accumulate(-self.grad * (self.values * self.values));
  });
}

TensorPtr log_t(const TensorPtr& a) {
  if ((a->values <= 0.0).any()) {
    throw DomainError("log of non-positive value");
  }
  return make_node(a->shape, a->values.log(), {a},
                   [a](Tensor& self) { a->accumulate(self.grad / a->values); });
}

TensorPtr sqrt_t(const TensorPtr& a) {
  if ((a->values < 0.0).any()) {
    throw DomainError("sqrt of negative value");
  }
  Array out = a->values.sqrt();
  return make_node(a->shape, out, {a}, [a](Tensor& self) {
    // Subgradient 0 at exactly zero input.
    Array denom = 2.0 * self.values;
    Array g = (denom > 0.0).select(self.grad / denom, Array::Zero(denom.size()));
    a->accumulate(g);
  });
}

TensorPtr sigmoid(const TensorPtr& a) {
  Array out = a->values.unaryExpr([](Scalar v) {
    return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  });
  return make_node(a->shape, out, {a}, [a](Tensor& self) {
    a->accumulate(self.grad * self.values * (1.0 - self.values));
  });
}

TensorPtr softplus(const TensorPtr& a) {
  // log(1 + exp(x)) = max(x, 0) + log1p(exp(-|x|)): exact and overflow-safe.
  Array out = a->values.unaryExpr(
      [](Scalar v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); });
  return make_node(a->shape, out, {a}, [a](Tensor& self) {
    Array s = a->values.unaryExpr([](Scalar v) {
      return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    });
    a->accumulate(self.grad * s);
  });
}

// ---- reductions ------------------------------------------------------------

TensorPtr sum_all(const TensorPtr& a) {
  Array out(1);
  out[0] = a->values.sum();
  return make_node({}, std::move(out), {a}, [a](Tensor& self) {
    a->accumulate(Array::Constant(a->size(), self.grad[0]));
  });
}

TensorPtr mean_all(const TensorPtr& a) {
  if (a->size() == 0) throw ContractError("mean_all on empty tensor");
  return mul_scalar(sum_all(a), 1.0 / static_cast<Scalar>(a->size()));
}

TensorPtr squared_distance(const TensorPtr& a, const TensorPtr& b) {
  require_same_shape(a, b, "squared_distance");
  Array diff = a->values - b->values;
  Array out(1);
  out[0] = (diff * diff).sum();
  return make_node({}, std::move(out), {a, b},
                   [a, b, diff = std::move(diff)](Tensor& self) {
                     const Scalar g = self.grad[0];
                     if (a->grad_enabled) a->accumulate(2.0 * g * diff);
                     if (b->grad_enabled) b->accumulate(-2.0 * g * diff);
                   });
}

// ---- shape -----------------------------------------------------------------

TensorPtr reshape(const TensorPtr& a, Shape shape) {
  if (shape_numel(shape) != a->size()) {
    throw ShapeError("reshape to " + shape_to_string(shape) + " from " +
                     shape_to_string(a->shape) + " changes element count");
  }
  return make_node(std::move(shape), a->values, {a},
                   [a](Tensor& self) { a->accumulate(self.grad); });
}

TensorPtr flatten(const TensorPtr& a) {
  if (a->rank() < 2) {
    throw ShapeError("flatten expects rank >= 2, got " + shape_to_string(a->shape));
  }
  const Eigen::Index n = a->shape[0];
  return reshape(a, {n, a->size() / std::max<Eigen::Index>(n, 1)});
}

TensorPtr unflatten(const TensorPtr& a, Shape shape) { return reshape(a, std::move(shape)); }

TensorPtr concat_cols(const TensorPtr& a, const TensorPtr& b) {
  if (a->rank() != 2 || b->rank() != 2 || a->shape[0] != b->shape[0]) {
    throw ShapeError("concat_cols expects (N,Ca) and (N,Cb) with equal N");
  }
  const Eigen::Index n = a->shape[0], ca = a->shape[1], cb = b->shape[1];
  Array out(n * (ca + cb));
  for (Eigen::Index r = 0; r < n; ++r) {
    out.segment(r * (ca + cb), ca) = a->values.segment(r * ca, ca);
    out.segment(r * (ca + cb) + ca, cb) = b->values.segment(r * cb, cb);
  }
  return make_node({n, ca + cb}, std::move(out), {a, b}, [a, b, n, ca, cb](Tensor& self) {
    if (a->grad_enabled) {
      Array ga(n * ca);
      for (Eigen::Index r = 0; r < n; ++r)
        ga.segment(r * ca, ca) = self.grad.segment(r * (ca + cb), ca);
      a->accumulate(ga);
    }
    if (b->grad_enabled) {
      Array gb(n * cb);
      for (Eigen::Index r = 0; r < n; ++r)
        gb.segment(r * cb, cb) = self.grad.segment(r * (ca + cb) + ca, cb);
      b->accumulate(gb);
    }
  });
}

// ---- linear algebra --------------------------------------------------------

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
  if (a->rank() != 2 || b->rank() != 2 || a->shape[1] != b->shape[0]) {
    throw ShapeError("matmul: incompatible shapes " + shape_to_string(a->shape) + " x " +
                     shape_to_string(b->shape));
  }
  const Eigen::Index m = a->shape[0], k = a->shape[1], n = b->shape[1];
  ConstRowMap am(a->values.data(), m, k);
  ConstRowMap bm(b->values.data(), k, n);
  Array out(m * n);
  RowMap(out.data(), m, n) = am * bm;
  return make_node({m, n}, std::move(out), {a, b}, [a, b, m, k, n](Tensor& self) {
    ConstRowMap g(self.grad.data(), m, n);
    if (a->grad_enabled) {
      ConstRowMap bm2(b->values.data(), k, n);
      Array ga(m * k);
      RowMap(ga.data(), m, k) = g * bm2.transpose();
      a->accumulate(ga);
    }
    if (b->grad_enabled) {
      ConstRowMap am2(a->values.data(), m, k);
      Array gb(k * n);
      RowMap(gb.data(), k, n) = am2.transpose() * g;
      b->accumulate(gb);
    }
  });
}

TensorPtr linear(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b) {
  if (x->rank() != 2 || w->rank() != 2) {
    throw ShapeError("linear expects x (N,Din) and w (Dout,Din)");
  }
  const Eigen::Index n = x->shape[0], din = x->shape[1], dout = w->shape[0];
  if (w->shape[1] != din) {
    throw ShapeError("linear: input dim " + std::to_string(din) + " vs weight " +
                     shape_to_string(w->shape));
  }
  if (b->size() != dout) {
    throw ShapeError("linear: bias size " + std::to_string(b->size()) + " vs Dout " +
                     std::to_string(dout));
  }
  ConstRowMap xm(x->values.data(), n, din);
  ConstRowMap wm(w->values.data(), dout, din);
  Array out(n * dout);
  RowMap om(out.data(), n, dout);
  om = xm * wm.transpose();
  om.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b->values.data(), dout);
  return make_node({n, dout}, std::move(out), {x, w, b},
                   [x, w, b, n, din, dout](Tensor& self) {
                     ConstRowMap g(self.grad.data(), n, dout);
                     if (x->grad_enabled) {
                       ConstRowMap wm2(w->values.data(), dout, din);
                       Array gx(n * din);
                       RowMap(gx.data(), n, din) = g * wm2;
                       x->accumulate(gx);
                     }
                     if (w->grad_enabled) {
                       ConstRowMap xm2(x->values.data(), n, din);
                       Array gw(dout * din);
                       RowMap(gw.data(), dout, din) = g.transpose() * xm2;
                       w->accumulate(gw);
                     }
                     if (b->grad_enabled) {
                       Array gb(dout);
                       Eigen::Map<Eigen::RowVectorXd>(gb.data(), dout) = g.colwise().sum();
                       b->accumulate(gb);
                     }
                   });
}

// ---- convolution -----------------------------------------------------------

namespace {

struct ConvGeom {
  Eigen::Index n, c, h, w;      // input
  Eigen::Index f, kh, kw;       // filters
  Eigen::Index ho, wo;          // output spatial
  int stride, padding;
};

// Gathers kernel-sized patches into a (C*kh*kw) x (N*Ho*Wo) matrix.
ColMatrix im2col(const Array& x, const ConvGeom& g) {
  const Eigen::Index K = g.c * g.kh * g.kw;
  const Eigen::Index M = g.n * g.ho * g.wo;
  ColMatrix cols = ColMatrix::Zero(K, M);
  for (Eigen::Index n = 0; n < g.n; ++n) {
    for (Eigen::Index ho = 0; ho < g.ho; ++ho) {
      for (Eigen::Index wo = 0; wo < g.wo; ++wo) {
        const Eigen::Index m = (n * g.ho + ho) * g.wo + wo;
        for (Eigen::Index c = 0; c < g.c; ++c) {
          for (Eigen::Index i = 0; i < g.kh; ++i) {
            const Eigen::Index hi = ho * g.stride - g.padding + i;
            if (hi < 0 || hi >= g.h) continue;
            const Eigen::Index base = ((n * g.c + c) * g.h + hi) * g.w;
            for (Eigen::Index j = 0; j < g.kw; ++j) {
              const Eigen::Index wi = wo * g.stride - g.padding + j;
              if (wi < 0 || wi >= g.w) continue;
              cols((c * g.kh + i) * g.kw + j, m) = x[base + wi];
            }
          }
        }
      }
    }
  }
  return cols;
}

// Adjoint of im2col: scatter-adds columns back into an (N,C,H,W) buffer.
void col2im_add(const ColMatrix& cols, const ConvGeom& g, Array& out) {
  for (Eigen::Index n = 0; n < g.n; ++n) {
    for (Eigen::Index ho = 0; ho < g.ho; ++ho) {
      for (Eigen::Index wo = 0; wo < g.wo; ++wo) {
        const Eigen::Index m = (n * g.ho + ho) * g.wo + wo;
        for (Eigen::Index c = 0; c < g.c; ++c) {
          for (Eigen::Index i = 0; i < g.kh; ++i) {
            const Eigen::Index hi = ho * g.stride - g.padding + i;
            if (hi < 0 || hi >= g.h) continue;
            const Eigen::Index base = ((n * g.c + c) * g.h + hi) * g.w;
            for (Eigen::Index j = 0; j < g.kw; ++j) {
              const Eigen::Index wi = wo * g.stride - g.padding + j;
              if (wi < 0 || wi >= g.w) continue;
              out[base + wi] += cols((c * g.kh + i) * g.kw + j, m);
            }
          }
        }
      }
    }
  }
}

}  // namespace

TensorPtr conv2d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b,
                 int stride, int padding) {
  if (x->rank() != 4 || w->rank() != 4) {
    throw ShapeError("conv2d expects x (N,C,H,W) and w (F,C,kh,kw)");
  }
  if (stride < 1 || padding < 0) throw ContractError("conv2d: stride >= 1, padding >= 0");
  ConvGeom g{};
  g.n = x->shape[0];
  g.c = x->shape[1];
  g.h = x->shape[2];
  g.w = x->shape[3];
  g.f = w->shape[0];
  g.kh = w->shape[2];
  g.kw = w->shape[3];
  g.stride = stride;
  g.padding = padding;
  if (w->shape[1] != g.c) {
    throw ShapeError("conv2d: input channels " + std::to_string(g.c) +
                     " vs weight channels " + std::to_string(w->shape[1]));
  }
  if (g.kh > g.h + 2 * padding || g.kw > g.w + 2 * padding) {
    throw ShapeError("conv2d: kernel larger than padded input");
  }
  if (b->size() != g.f) throw ShapeError("conv2d: bias size must equal filter count");
  g.ho = (g.h + 2 * padding - g.kh) / stride + 1;
  g.wo = (g.w + 2 * padding - g.kw) / stride + 1;

  const Eigen::Index K = g.c * g.kh * g.kw;
  const Eigen::Index M = g.n * g.ho * g.wo;
  ColMatrix cols = im2col(x->values, g);
  ConstRowMap wm(w->values.data(), g.f, K);
  RowMatrix om = wm * cols;  // (F, M)

  Array out(g.n * g.f * g.ho * g.wo);
  const Eigen::Index plane = g.ho * g.wo;
  for (Eigen::Index n = 0; n < g.n; ++n) {
    for (Eigen::Index f = 0; f < g.f; ++f) {
      const Scalar bias = b->values[f];
      for (Eigen::Index p = 0; p < plane; ++p) {
        out[(n * g.f + f) * plane + p] = om(f, n * plane + p) + bias;
      }
    }
  }

  return make_node(
      {g.n, g.f, g.ho, g.wo}, std::move(out), {x, w, b},
      [x, w, b, g, K, M, plane, cols = std::move(cols)](Tensor& self) {
        // Regroup incoming gradient as (F, M).
        RowMatrix gm(g.f, M);
        for (Eigen::Index n = 0; n < g.n; ++n) {
          for (Eigen::Index f = 0; f < g.f; ++f) {
            for (Eigen::Index p = 0; p < plane; ++p) {
              gm(f, n * plane + p) = self.grad[(n * g.f + f) * plane + p];
            }
          }
        }
        if (b->grad_enabled) {
          Array gb(g.f);
          Eigen::Map<Eigen::VectorXd>(gb.data(), g.f) = gm.rowwise().sum();
          b->accumulate(gb);
        }
        if (w->grad_enabled) {
          Array gw(g.f * K);
          RowMap(gw.data(), g.f, K) = gm * cols.transpose();
          w->accumulate(gw);
        }
        if (x->grad_enabled) {
          ConstRowMap wm2(w->values.data(), g.f, K);
          ColMatrix gcols = wm2.transpose() * gm;
          Array gx = Array::Zero(x->size());
          col2im_add(gcols, g, gx);
          x->accumulate(gx);
        }
      });
}

TensorPtr conv_transpose2d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b,
                           int stride, int padding, std::pair<int, int> out_hw) {
  if (x->rank() != 4 || w->rank() != 4) {
    throw ShapeError("conv_transpose2d expects x (N,F,H,W) and w (F,C,kh,kw)");
  }
  if (stride < 1 || padding < 0) {
    throw ContractError("conv_transpose2d: stride >= 1, padding >= 0");
  }
  const Eigen::Index n = x->shape[0], f = x->shape[1], hi = x->shape[2], wi = x->shape[3];
  if (w->shape[0] != f) {
    throw ShapeError("conv_transpose2d: input channels " + std::to_string(f) +
                     " vs weight filters " + std::to_string(w->shape[0]));
  }
  const Eigen::Index c = w->shape[1], kh = w->shape[2], kw = w->shape[3];
  if (b->size() != c) throw ShapeError("conv_transpose2d: bias size must equal C");

  Eigen::Index ho = (hi - 1) * stride - 2 * padding + kh;
  Eigen::Index wo = (wi - 1) * stride - 2 * padding + kw;
  if (out_hw.first >= 0) ho = out_hw.first;
  if (out_hw.second >= 0) wo = out_hw.second;
  // The requested output must be a valid conv2d preimage of the input shape.
  if (ho < kh - 2 * padding || (ho + 2 * padding - kh) / stride + 1 != hi ||
      wo < kw - 2 * padding || (wo + 2 * padding - kw) / stride + 1 != wi) {
    throw ShapeError("conv_transpose2d: output size " + std::to_string(ho) + "x" +
                     std::to_string(wo) + " is not a conv2d preimage of input " +
                     shape_to_string(x->shape));
  }

  // Geometry of the adjoint conv2d: output (N,C,Ho,Wo) -> input (N,F,Hi,Wi).
  ConvGeom g{};
  g.n = n;
  g.c = c;
  g.h = ho;
  g.w = wo;
  g.f = f;
  g.kh = kh;
  g.kw = kw;
  g.ho = hi;
  g.wo = wi;
  g.stride = stride;
  g.padding = padding;

  const Eigen::Index K = c * kh * kw;
  const Eigen::Index M = n * hi * wi;
  const Eigen::Index plane = hi * wi;

  // Regroup input as (F, M) columns of the adjoint conv output.
  RowMatrix xm(f, M);
  for (Eigen::Index in = 0; in < n; ++in) {
    for (Eigen::Index ff = 0; ff < f; ++ff) {
      for (Eigen::Index p = 0; p < plane; ++p) {
        xm(ff, in * plane + p) = x->values[(in * f + ff) * plane + p];
      }
    }
  }
  ConstRowMap wm(w->values.data(), f, K);
  ColMatrix cols = wm.transpose() * xm;

  Array out = Array::Zero(n * c * ho * wo);
  col2im_add(cols, g, out);
  const Eigen::Index out_plane = ho * wo;
  for (Eigen::Index in = 0; in < n; ++in) {
    for (Eigen::Index cc = 0; cc < c; ++cc) {
      out.segment((in * c + cc) * out_plane, out_plane) += b->values[cc];
    }
  }

  return make_node(
      {n, c, ho, wo}, std::move(out), {x, w, b},
      [x, w, b, g, K, M, plane, n, c, f, xm = std::move(xm)](Tensor& self) {
        ColMatrix gcols = im2col(self.grad, g);  // (K, M)
        if (b->grad_enabled) {
          const Eigen::Index out_plane = g.h * g.w;
          Array gb = Array::Zero(c);
          for (Eigen::Index in = 0; in < n; ++in) {
            for (Eigen::Index cc = 0; cc < c; ++cc) {
              gb[cc] += self.grad.segment((in * c + cc) * out_plane, out_plane).sum();
            }
          }
          b->accumulate(gb);
        }
        if (w->grad_enabled) {
          Array gw(f * K);
          RowMap(gw.data(), f, K) = xm * gcols.transpose();
          w->accumulate(gw);
        }
        if (x->grad_enabled) {
          ConstRowMap wm2(w->values.data(), f, K);
          RowMatrix gxm = wm2 * gcols;  // (F, M)
          Array gx(x->size());
          for (Eigen::Index in = 0; in < n; ++in) {
            for (Eigen::Index ff = 0; ff < f; ++ff) {
              for (Eigen::Index p = 0; p < plane; ++p) {
                gx[(in * f + ff) * plane + p] = gxm(ff, in * plane + p);
              }
            }
          }
          x->accumulate(gx);
        }
      });
}

// ---- normalization / activations ------------------------------------------

TensorPtr batchnorm(const TensorPtr& x, const TensorPtr& gamma, const TensorPtr& beta,
                    BatchNormState& state, bool training, Scalar momentum, Scalar eps) {
  Eigen::Index n, c, plane;
  if (x->rank() == 4) {
    n = x->shape[0];
    c = x->shape[1];
    plane = x->shape[2] * x->shape[3];
  } else if (x->rank() == 2) {
    n = x->shape[0];
    c = x->shape[1];
    plane = 1;
  } else {
    throw ShapeError("batchnorm expects (N,C,H,W) or (N,C), got " +
                     shape_to_string(x->shape));
  }
  if (gamma->size() != c || beta->size() != c) {
    throw ShapeError("batchnorm: gamma/beta must have one entry per channel");
  }
  if (state.running_mean.size() != c) {
    throw ShapeError("batchnorm: running stats sized for different channel count");
  }
  if (training && n < 2) {
    throw ContractError("batchnorm: training mode needs batch size >= 2");
  }

  const Eigen::Index per_channel = n * plane;
  Array mean(c), var(c);
  if (training) {
    mean.setZero();
    var.setZero();
    for (Eigen::Index in = 0; in < n; ++in) {
      for (Eigen::Index cc = 0; cc < c; ++cc) {
        mean[cc] += x->values.segment(((in * c + cc) * plane), plane).sum();
      }
    }
    mean /= static_cast<Scalar>(per_channel);
    for (Eigen::Index in = 0; in < n; ++in) {
      for (Eigen::Index cc = 0; cc < c; ++cc) {
        var[cc] +=
            (x->values.segment((in * c + cc) * plane, plane) - mean[cc]).square().sum();
      }
    }
    var /= static_cast<Scalar>(per_channel);
    state.running_mean = momentum * state.running_mean + (1.0 - momentum) * mean;
    state.running_var = momentum * state.running_var + (1.0 - momentum) * var;
  } else {
    mean = state.running_mean;
    var = state.running_var;
  }

  Array invstd = (var + eps).rsqrt();
  Array xhat(x->size());
  Array out(x->size());
  for (Eigen::Index in = 0; in < n; ++in) {
    for (Eigen::Index cc = 0; cc < c; ++cc) {
      auto seg = x->values.segment((in * c + cc) * plane, plane);
      auto xh = (seg - mean[cc]) * invstd[cc];
      xhat.segment((in * c + cc) * plane, plane) = xh;
      out.segment((in * c + cc) * plane, plane) = xh * gamma->values[cc] + beta->values[cc];
    }
  }

  return make_node(
      x->shape, std::move(out), {x, gamma, beta},
      [x, gamma, beta, n, c, plane, per_channel, training, invstd = std::move(invstd),
       xhat = std::move(xhat)](Tensor& self) {
        Array sum_dy = Array::Zero(c), sum_dy_xhat = Array::Zero(c);
        for (Eigen::Index in = 0; in < n; ++in) {
          for (Eigen::Index cc = 0; cc < c; ++cc) {
            auto gseg = self.grad.segment((in * c + cc) * plane, plane);
            sum_dy[cc] += gseg.sum();
            sum_dy_xhat[cc] +=
                (gseg * xhat.segment((in * c + cc) * plane, plane)).sum();
          }
        }
        if (beta->grad_enabled) beta->accumulate(sum_dy);
        if (gamma->grad_enabled) gamma->accumulate(sum_dy_xhat);
        if (x->grad_enabled) {
          Array gx(x->size());
          const Scalar m = static_cast<Scalar>(per_channel);
          for (Eigen::Index in = 0; in < n; ++in) {
            for (Eigen::Index cc = 0; cc < c; ++cc) {
              auto gseg = self.grad.segment((in * c + cc) * plane, plane);
              auto xh = xhat.segment((in * c + cc) * plane, plane);
              if (training) {
                gx.segment((in * c + cc) * plane, plane) =
                    (gamma->values[cc] * invstd[cc] / m) *
                    (m * gseg - sum_dy[cc] - xh * sum_dy_xhat[cc]);
              } else {
                gx.segment((in * c + cc) * plane, plane) =
                    gamma->values[cc] * invstd[cc] * gseg;
              }
            }
          }
          x->accumulate(gx);
        }
      });
}

TensorPtr prelu(const TensorPtr& x, const TensorPtr& slope) {
  if (slope->size() != 1) throw ShapeError("prelu expects a one-element slope tensor");
  const Scalar s = slope->values[0];
  Array out = (x->values >= 0.0).select(x->values, s * x->values);
  return make_node(x->shape, std::move(out), {x, slope}, [x, slope, s](Tensor& self) {
    if (x->grad_enabled) {
      Array gx = (x->values >= 0.0).select(self.grad, s * self.grad);
      x->accumulate(gx);
    }
    if (slope->grad_enabled) {
      Array gs(1);
      gs[0] = ((x->values < 0.0).select(self.grad * x->values, Array::Zero(x->size()))).sum();
      slope->accumulate(gs);
    }
  });
}

// ---- rows of class scores --------------------------------------------------

TensorPtr softmax(const TensorPtr& logits) {
  if (logits->rank() != 2) throw ShapeError("softmax expects (N,K)");
  const Eigen::Index n = logits->shape[0], k = logits->shape[1];
  if (k < 1) throw ShapeError("softmax: K >= 1 required");
  Array out(n * k);
  for (Eigen::Index r = 0; r < n; ++r) {
    auto row = logits->values.segment(r * k, k);
    const Scalar m = row.maxCoeff();
    Array e = (row - m).exp();
    out.segment(r * k, k) = e / e.sum();
  }
  return make_node(logits->shape, std::move(out), {logits}, [logits, n, k](Tensor& self) {
    Array gx(n * k);
    for (Eigen::Index r = 0; r < n; ++r) {
      auto y = self.values.segment(r * k, k);
      auto gy = self.grad.segment(r * k, k);
      const Scalar dot = (y * gy).sum();
      gx.segment(r * k, k) = y * (gy - dot);
    }
    logits->accumulate(gx);
  });
}

TensorPtr cross_entropy(const TensorPtr& logits, const std::vector<int>& labels) {
  if (logits->rank() != 2) throw ShapeError("cross_entropy expects (N,K)");
  const Eigen::Index n = logits->shape[0], k = logits->shape[1];
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw ContractError("cross_entropy: one label per row required");
  }
  for (int lbl : labels) {
    if (lbl < 0 || lbl >= k) throw ContractError("cross_entropy: label out of range");
  }
  Array probs(n * k);
  Scalar loss = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    auto row = logits->values.segment(r * k, k);
    const Scalar m = row.maxCoeff();
    Array e = (row - m).exp();
    const Scalar denom = e.sum();
    probs.segment(r * k, k) = e / denom;
    loss += std::log(denom) + m - row[labels[static_cast<std::size_t>(r)]];
  }
  loss /= static_cast<Scalar>(n);
  Array out(1);
  out[0] = loss;
  return make_node({}, std::move(out), {logits},
                   [logits, labels, n, k, probs = std::move(probs)](Tensor& self) {
                     Array gx = probs;
                     for (Eigen::Index r = 0; r < n; ++r) {
                       gx[r * k + labels[static_cast<std::size_t>(r)]] -= 1.0;
                     }
                     gx *= self.grad[0] / static_cast<Scalar>(n);
                     logits->accumulate(gx);
                   });
}

TensorPtr binary_cross_entropy_logits(const TensorPtr& logits, Scalar target) {
  if (target != 0.0 && target != 1.0) {
    throw ContractError("binary_cross_entropy_logits: target must be 0 or 1");
  }
  constexpr Scalar kClamp = 1e-7;
  const Eigen::Index n = logits->size();
  if (n == 0) throw ContractError("binary_cross_entropy_logits: empty input");
  Array p = logits->values.unaryExpr([](Scalar v) {
    return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  });
  Array pc = p.min(1.0 - kClamp).max(kClamp);
  Array out(1);
  out[0] = -(target * pc.log() + (1.0 - target) * (1.0 - pc).log()).mean();
  return make_node({}, std::move(out), {logits},
                   [logits, target, n, p = std::move(p), pc = std::move(pc)](Tensor& self) {
                     // d/dlogit = (p - t) inside the clamp band, 0 where clamped.
                     Array inside =
                         ((p > 1e-7) && (p < 1.0 - 1e-7)).cast<Scalar>();
                     Array g = inside * (pc - target) * self.grad[0] /
                               static_cast<Scalar>(n);
                     logits->accumulate(g);
                   });
}

// ---- sampling --------------------------------------------------------------

TensorPtr reparameterize(const TensorPtr& mu, const TensorPtr& var, RandomSource& rng) {
  require_same_shape(mu, var, "reparameterize");
  if ((var->values < 0.0).any()) {
    throw DomainError("reparameterize: variance must be non-negative");
  }
  Array eps(mu->size());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
  Array sigma = var->values.sqrt();
  Array out = mu->values + sigma * eps;
  return make_node(mu->shape, std::move(out), {mu, var},
                   [mu, var, eps = std::move(eps), sigma = std::move(sigma)](Tensor& self) {
                     if (mu->grad_enabled) mu->accumulate(self.grad);
                     if (var->grad_enabled) {
                       Array denom = 2.0 * sigma;
                       Array g = (denom > 0.0)
                                     .select(self.grad * eps / denom,
                                             Array::Zero(denom.size()));
                       var->accumulate(g);
                     }
                   });
}

// ---- helpers ---------------------------------------------------------------

TensorPtr one_hot(const std::vector<int>& labels, int num_classes) {
  if (num_classes < 1) throw ContractError("one_hot: num_classes >= 1");
  const Eigen::Index n = static_cast<Eigen::Index>(labels.size());
  Array out = Array::Zero(n * num_classes);
  for (Eigen::Index r = 0; r < n; ++r) {
    const int lbl = labels[static_cast<std::size_t>(r)];
    if (lbl < 0 || lbl >= num_classes) throw ContractError("one_hot: label out of range");
    out[r * num_classes + lbl] = 1.0;
  }
  return Tensor::create({n, num_classes}, std::move(out), false);
}

}  // namespace cpgm
