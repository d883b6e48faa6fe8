// Copyright (c) the RDC Toolkit Project Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rdc/autodiff.h"

#include <Eigen/Core>
#include <cmath>
#include <cstring>
#include <utility>

namespace rdc {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

// C (M x N) = or += op(A) * op(B). Row-major storage; when transposed, the
// stored matrix has the swapped dimensions.
void Gemm(bool ta, bool tb, int m, int n, int k, const double* a,
          const double* b, double* c, bool accumulate) {
  MapMat C(c, m, n);
  CMapMat A(a, ta ? k : m, ta ? m : k);
  CMapMat B(b, tb ? n : k, tb ? k : n);
  if (!ta && !tb) {
    if (accumulate) C.noalias() += A * B; else C.noalias() = A * B;
  } else if (ta && !tb) {
    if (accumulate) C.noalias() += A.transpose() * B; else C.noalias() = A.transpose() * B;
  } else if (!ta && tb) {
    if (accumulate) C.noalias() += A * B.transpose(); else C.noalias() = A * B.transpose();
  } else {
    if (accumulate) C.noalias() += A.transpose() * B.transpose();
    else C.noalias() = A.transpose() * B.transpose();
  }
}

struct ConvDims {
  int hin, win, cin, k, hout, wout;
};

// Patch extraction for NHWC single-image convs; rows are output positions,
// columns are (ky, kx, cin) with cin fastest, matching the flattened layout
// of a (k,k,cin,cout) weight tensor.
void Im2Col(const double* x, const ConvDims& d, const ConvGeom& g, double* col) {
  const int k = d.k, cin = d.cin;
  const int row_len = k * k * cin;
  for (int oy = 0; oy < d.hout; ++oy) {
    for (int ox = 0; ox < d.wout; ++ox) {
      double* row = col + (int64_t(oy) * d.wout + ox) * row_len;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * g.stride - g.pad_t + ky;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * g.stride - g.pad_l + kx;
          double* dst = row + (ky * k + kx) * cin;
          if (iy >= 0 && iy < d.hin && ix >= 0 && ix < d.win) {
            std::memcpy(dst, x + (int64_t(iy) * d.win + ix) * cin,
                        sizeof(double) * size_t(cin));
          } else {
            std::memset(dst, 0, sizeof(double) * size_t(cin));
          }
        }
      }
    }
  }
}

// Adjoint of Im2Col: scatter-adds columns back into the image.
void Col2Im(const double* col, const ConvDims& d, const ConvGeom& g, double* x) {
  const int k = d.k, cin = d.cin;
  const int row_len = k * k * cin;
  for (int oy = 0; oy < d.hout; ++oy) {
    for (int ox = 0; ox < d.wout; ++ox) {
      const double* row = col + (int64_t(oy) * d.wout + ox) * row_len;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * g.stride - g.pad_t + ky;
        if (iy < 0 || iy >= d.hin) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * g.stride - g.pad_l + kx;
          if (ix < 0 || ix >= d.win) continue;
          const double* src = row + (ky * k + kx) * cin;
          double* dst = x + (int64_t(iy) * d.win + ix) * cin;
          for (int c = 0; c < cin; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

int ReflectIndex(int i, int n) {
  // Mirror without repeating the border sample; n >= 2 when padding > 0.
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

void WindowPartTensor(const Tensor& x, int win, Tensor* out) {
  const int n = x.n(), h = x.h(), w = x.w(), c = x.c();
  const int nh = h / win, nw = w / win;
  *out = Tensor({n * nh * nw, win * win, c});
  for (int in = 0; in < n; ++in) {
    for (int by = 0; by < nh; ++by) {
      for (int bx = 0; bx < nw; ++bx) {
        const int64_t blk = (int64_t(in) * nh + by) * nw + bx;
        for (int iy = 0; iy < win; ++iy) {
          const double* src = x.ptr() +
              ((int64_t(in) * h + by * win + iy) * w + int64_t(bx) * win) * c;
          double* dst = out->ptr() + (blk * win * win + int64_t(iy) * win) * c;
          std::memcpy(dst, src, sizeof(double) * size_t(win) * size_t(c));
        }
      }
    }
  }
}

void WindowMergeTensor(const Tensor& t, int win, int n, int h, int w, int c,
                       bool accumulate, Tensor* out) {
  const int nh = h / win, nw = w / win;
  if (!accumulate) *out = Tensor({n, h, w, c});
  for (int in = 0; in < n; ++in) {
    for (int by = 0; by < nh; ++by) {
      for (int bx = 0; bx < nw; ++bx) {
        const int64_t blk = (int64_t(in) * nh + by) * nw + bx;
        for (int iy = 0; iy < win; ++iy) {
          const double* src = t.ptr() + (blk * win * win + int64_t(iy) * win) * c;
          double* dst = out->ptr() +
              ((int64_t(in) * h + by * win + iy) * w + int64_t(bx) * win) * c;
          if (accumulate) {
            for (int i = 0; i < win * c; ++i) dst[i] += src[i];
          } else {
            std::memcpy(dst, src, sizeof(double) * size_t(win) * size_t(c));
          }
        }
      }
    }
  }
}

}  // namespace

ConvGeom ConvGeom::Same(int k, int stride) {
  ConvGeom g;
  g.stride = stride;
  int total = std::max(k - stride, 0);
  g.pad_t = g.pad_l = total / 2;
  g.pad_b = g.pad_r = total - total / 2;
  return g;
}

Var Tape::MakeNode(Tensor value, bool needs_grad, std::function<void()> backprop) {
  Node node;
  node.value = std::move(value);
  node.needs_grad = recording_ && needs_grad;
  if (node.needs_grad) node.backprop = std::move(backprop);
  nodes_.push_back(std::move(node));
  return Var{int(nodes_.size()) - 1};
}

Tensor& Tape::GradRef(int id) {
  Node& node = nodes_[size_t(id)];
  if (node.grad.empty() && node.value.size() > 0) {
    node.grad = Tensor::Zeros(node.value.shape);
  }
  return node.grad;
}

void Tape::Accum(int id, const Tensor& g) {
  Node& node = nodes_[size_t(id)];
  if (!node.needs_grad) return;
  Tensor& dst = GradRef(id);
  RDC_CHECK(dst.size() == g.size(), ContractError, "gradient shape mismatch");
  for (int64_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

Var Tape::Constant(Tensor value) { return MakeNode(std::move(value), false, {}); }

Var Tape::Leaf(Tensor value) { return MakeNode(std::move(value), true, {}); }

Var Tape::Param(Parameter* p) {
  auto it = bound_params_.find(p);
  if (it != bound_params_.end()) return Var{it->second};
  Var v = MakeNode(p->value, true, {});
  nodes_[size_t(v.id)].bound = p;
  bound_params_[p] = v.id;
  return v;
}

void Tape::Backward(Var root) {
  RDC_CHECK(recording_, ContractError, "Backward() on a non-recording tape");
  RDC_CHECK(!backward_done_, ContractError, "Backward() may run once per tape");
  RDC_CHECK(value(root).size() == 1, ContractError, "Backward root must be scalar");
  backward_done_ = true;
  GradRef(root.id);
  nodes_[size_t(root.id)].grad[0] = 1.0;
  for (int i = root.id; i >= 0; --i) {
    Node& node = nodes_[size_t(i)];
    if (node.backprop && !node.grad.empty()) node.backprop();
  }
  for (auto& [param, id] : bound_params_) {
    const Tensor& g = nodes_[size_t(id)].grad;
    if (g.empty()) continue;
    if (param->grad.empty()) param->grad = Tensor::Zeros(param->value.shape);
    for (int64_t i = 0; i < g.size(); ++i) param->grad[i] += g[i];
  }
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

Var Tape::Add(Var a, Var b) {
  RDC_CHECK(SameShape(value(a).shape, value(b).shape), ContractError,
            "Add: shape mismatch " + ShapeToString(value(a).shape) + " vs " +
                ShapeToString(value(b).shape));
  Tensor out = value(a);
  const Tensor& vb = value(b);
  for (int64_t i = 0; i < out.size(); ++i) out[i] += vb[i];
  bool ng = NeedsGrad(a) || NeedsGrad(b);
  Var r;
  r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    nodes_[size_t(r.id)].backprop = [this, a, b, r]() {
      Accum(a.id, nodes_[size_t(r.id)].grad);
      Accum(b.id, nodes_[size_t(r.id)].grad);
    };
  }
  return r;
}

Var Tape::Sub(Var a, Var b) {
  RDC_CHECK(SameShape(value(a).shape, value(b).shape), ContractError,
            "Sub: shape mismatch");
  Tensor out = value(a);
  const Tensor& vb = value(b);
  for (int64_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
  bool ng = NeedsGrad(a) || NeedsGrad(b);
  Var r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    nodes_[size_t(r.id)].backprop = [this, a, b, r]() {
      const Tensor& g = nodes_[size_t(r.id)].grad;
      Accum(a.id, g);
      if (NeedsGrad(b)) {
        Tensor neg = g;
        for (auto& v : neg.data) v = -v;
        Accum(b.id, neg);
      }
    };
  }
  return r;
}

Var Tape::Mul(Var a, Var b) {
  RDC_CHECK(SameShape(value(a).shape, value(b).shape), ContractError,
            "Mul: shape mismatch");
  Tensor out = value(a);
  const Tensor& vb = value(b);
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
  bool ng = NeedsGrad(a) || NeedsGrad(b);
  Var r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    nodes_[size_t(r.id)].backprop = [this, a, b, r]() {
      const Tensor& g = nodes_[size_t(r.id)].grad;
      if (NeedsGrad(a)) {
        Tensor da = g;
        const Tensor& vb2 = value(b);
        for (int64_t i = 0; i < da.size(); ++i) da[i] *= vb2[i];
        Accum(a.id, da);
      }
      if (NeedsGrad(b)) {
        Tensor db = g;
        const Tensor& va = value(a);
        for (int64_t i = 0; i < db.size(); ++i) db[i] *= va[i];
        Accum(b.id, db);
      }
    };
  }
  return r;
}

Var Tape::Div(Var a, Var b) {
  RDC_CHECK(SameShape(value(a).shape, value(b).shape), ContractError,
            "Div: shape mismatch");
  Tensor out = value(a);
  const Tensor& vb = value(b);
  for (int64_t i = 0; i < out.size(); ++i) out[i] /= vb[i];
  bool ng = NeedsGrad(a) || NeedsGrad(b);
  Var r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    nodes_[size_t(r.id)].backprop = [this, a, b, r]() {
      const Tensor& g = nodes_[size_t(r.id)].grad;
      const Tensor& vb2 = value(b);
      if (NeedsGrad(a)) {
        Tensor da = g;
        for (int64_t i = 0; i < da.size(); ++i) da[i] /= vb2[i];
        Accum(a.id, da);
      }
      if (NeedsGrad(b)) {
        Tensor db = g;
        const Tensor& y = value(r);
        for (int64_t i = 0; i < db.size(); ++i) db[i] *= -y[i] / vb2[i];
        Accum(b.id, db);
      }
    };
  }
  return r;
}

Var Tape::AddScalar(Var a, double s) {
  Tensor out = value(a);
  for (auto& v : out.data) v += s;
  bool ng = NeedsGrad(a);
  Var r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    nodes_[size_t(r.id)].backprop = [this, a, r]() {
      Accum(a.id, nodes_[size_t(r.id)].grad);
    };
  }
  return r;
}

Var Tape::MulScalar(Var a, double s) {
  Tensor out = value(a);
  for (auto& v : out.data) v *= s;
  bool ng = NeedsGrad(a);
  Var r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    nodes_[size_t(r.id)].backprop = [this, a, r, s]() {
      Tensor g = nodes_[size_t(r.id)].grad;
      for (auto& v : g.data) v *= s;
      Accum(a.id, g);
    };
  }
  return r;
}

namespace {
// Checks that b's shape is a suffix of a's shape and returns the number of
// leading (broadcast) elements.
int64_t BcastLead(const Tensor& a, const Tensor& b) {
  RDC_CHECK(b.ndim() <= a.ndim(), ContractError, "broadcast rank mismatch");
  int off = a.ndim() - b.ndim();
  for (int i = 0; i < b.ndim(); ++i) {
    RDC_CHECK(a.shape[size_t(off + i)] == b.shape[size_t(i)], ContractError,
              "broadcast shape mismatch: " + ShapeToString(a.shape) + " vs " +
                  ShapeToString(b.shape));
  }
  return b.size() == 0 ? 0 : a.size() / b.size();
}
}  // namespace

Var Tape::AddBcast(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  int64_t lead = BcastLead(va, vb);
  int64_t blen = vb.size();
  Tensor out = va;
  for (int64_t l = 0; l < lead; ++l) {
    double* dst = out.ptr() + l * blen;
    for (int64_t i = 0; i < blen; ++i) dst[i] += vb[i];
  }
  bool ng = NeedsGrad(a) || NeedsGrad(b);
  Var r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    nodes_[size_t(r.id)].backprop = [this, a, b, r, lead, blen]() {
      const Tensor& g = nodes_[size_t(r.id)].grad;
      Accum(a.id, g);
      if (NeedsGrad(b)) {
        Tensor db = Tensor::Zeros(value(b).shape);
        for (int64_t l = 0; l < lead; ++l) {
          const double* src = g.ptr() + l * blen;
          for (int64_t i = 0; i < blen; ++i) db[i] += src[i];
        }
        Accum(b.id, db);
      }
    };
  }
  return r;
}

Var Tape::MulBcast(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  int64_t lead = BcastLead(va, vb);
  int64_t blen = vb.size();
  Tensor out = va;
  for (int64_t l = 0; l < lead; ++l) {
    double* dst = out.ptr() + l * blen;
    for (int64_t i = 0; i < blen; ++i) dst[i] *= vb[i];
  }
  bool ng = NeedsGrad(a) || NeedsGrad(b);
  Var r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    nodes_[size_t(r.id)].backprop = [this, a, b, r, lead, blen]() {
      const Tensor& g = nodes_[size_t(r.id)].grad;
      const Tensor& va2 = value(a);
      const Tensor& vb2 = value(b);
      if (NeedsGrad(a)) {
        Tensor da = g;
        for (int64_t l = 0; l < lead; ++l) {
          double* dst = da.ptr() + l * blen;
          for (int64_t i = 0; i < blen; ++i) dst[i] *= vb2[i];
        }
        Accum(a.id, da);
      }
      if (NeedsGrad(b)) {
        Tensor db = Tensor::Zeros(vb2.shape);
        for (int64_t l = 0; l < lead; ++l) {
          const double* gs = g.ptr() + l * blen;
          const double* as = va2.ptr() + l * blen;
          for (int64_t i = 0; i < blen; ++i) db[i] += gs[i] * as[i];
        }
        Accum(b.id, db);
      }
    };
  }
  return r;
}

// ---------------------------------------------------------------------------
// Unary
// ---------------------------------------------------------------------------

Var Tape::Unary(Var a, std::function<void(const Tensor&, Tensor&)> fwd,
                std::function<double(double, double, double)> dfn) {
  Tensor out(value(a).shape);
  fwd(value(a), out);
  bool ng = NeedsGrad(a);
  Var r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    nodes_[size_t(r.id)].backprop = [this, a, r, dfn]() {
      const Tensor& g = nodes_[size_t(r.id)].grad;
      const Tensor& x = value(a);
      const Tensor& y = value(r);
      Tensor dx(x.shape);
      for (int64_t i = 0; i < x.size(); ++i) dx[i] = dfn(x[i], y[i], g[i]);
      Accum(a.id, dx);
    };
  }
  return r;
}

Var Tape::Square(Var a) {
  return Unary(
      a,
      [](const Tensor& x, Tensor& y) {
        for (int64_t i = 0; i < x.size(); ++i) y[i] = x[i] * x[i];
      },
      [](double x, double, double dy) { return 2.0 * x * dy; });
}

Var Tape::Sqrt(Var a) {
  return Unary(
      a,
      [](const Tensor& x, Tensor& y) {
        for (int64_t i = 0; i < x.size(); ++i) y[i] = std::sqrt(x[i]);
      },
      [](double, double y, double dy) { return dy * 0.5 / y; });
}

Var Tape::Rsqrt(Var a) {
  return Unary(
      a,
      [](const Tensor& x, Tensor& y) {
        for (int64_t i = 0; i < x.size(); ++i) y[i] = 1.0 / std::sqrt(x[i]);
      },
      [](double, double y, double dy) { return dy * (-0.5) * y * y * y; });
}

Var Tape::Exp(Var a) {
  return Unary(
      a,
      [](const Tensor& x, Tensor& y) {
        for (int64_t i = 0; i < x.size(); ++i) y[i] = std::exp(x[i]);
      },
      [](double, double y, double dy) { return dy * y; });
}

Var Tape::Log(Var a) {
  return Unary(
      a,
      [](const Tensor& x, Tensor& y) {
        for (int64_t i = 0; i < x.size(); ++i) y[i] = std::log(x[i]);
      },
      [](double x, double, double dy) { return dy / x; });
}

Var Tape::Tanh(Var a) {
  return Unary(
      a,
      [](const Tensor& x, Tensor& y) {
        for (int64_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
      },
      [](double, double y, double dy) { return dy * (1.0 - y * y); });
}

Var Tape::Sigmoid(Var a) {
  return Unary(
      a,
      [](const Tensor& x, Tensor& y) {
        for (int64_t i = 0; i < x.size(); ++i) {
          y[i] = x[i] >= 0 ? 1.0 / (1.0 + std::exp(-x[i]))
                           : std::exp(x[i]) / (1.0 + std::exp(x[i]));
        }
      },
      [](double, double y, double dy) { return dy * y * (1.0 - y); });
}

Var Tape::Softplus(Var a) {
  return Unary(
      a,
      [](const Tensor& x, Tensor& y) {
        for (int64_t i = 0; i < x.size(); ++i) {
          y[i] = x[i] > 30.0 ? x[i] : std::log1p(std::exp(x[i]));
        }
      },
      [](double x, double, double dy) {
        double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                          : std::exp(x) / (1.0 + std::exp(x));
        return dy * s;
      });
}

Var Tape::Erf(Var a) {
  return Unary(
      a,
      [](const Tensor& x, Tensor& y) {
        for (int64_t i = 0; i < x.size(); ++i) y[i] = std::erf(x[i]);
      },
      [](double x, double, double dy) {
        return dy * (2.0 / std::sqrt(M_PI)) * std::exp(-x * x);
      });
}

Var Tape::LeakyRelu(Var a, double slope) {
  return Unary(
      a,
      [slope](const Tensor& x, Tensor& y) {
        for (int64_t i = 0; i < x.size(); ++i) {
          y[i] = x[i] >= 0 ? x[i] : slope * x[i];
        }
      },
      [slope](double x, double, double dy) { return x >= 0 ? dy : slope * dy; });
}

Var Tape::Gelu(Var a) {
  constexpr double kInvSqrt2 = 0.7071067811865475244;
  constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  return Unary(
      a,
      [](const Tensor& x, Tensor& y) {
        for (int64_t i = 0; i < x.size(); ++i) {
          y[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] * kInvSqrt2));
        }
      },
      [](double x, double, double dy) {
        double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
        double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
        return dy * (cdf + x * pdf);
      });
}

Var Tape::ClampMin(Var a, double lo) {
  return Unary(
      a,
      [lo](const Tensor& x, Tensor& y) {
        for (int64_t i = 0; i < x.size(); ++i) y[i] = std::max(x[i], lo);
      },
      [lo](double x, double, double dy) { return x > lo ? dy : 0.0; });
}

// ---------------------------------------------------------------------------
// Shape
// ---------------------------------------------------------------------------

Var Tape::Reshape(Var a, Shape s) {
  RDC_CHECK(NumElements(s) == value(a).size(), ContractError,
            "Reshape: element count mismatch");
  Tensor out(std::move(s), value(a).data);
  bool ng = NeedsGrad(a);
  Var r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    nodes_[size_t(r.id)].backprop = [this, a, r]() {
      Tensor g(value(a).shape, nodes_[size_t(r.id)].grad.data);
      Accum(a.id, g);
    };
  }
  return r;
}

Var Tape::ConcatLast(const std::vector<Var>& parts) {
  RDC_CHECK(!parts.empty(), ContractError, "ConcatLast: empty input list");
  Shape s = value(parts[0]).shape;
  int total_c = 0;
  std::vector<int> widths;
  for (Var p : parts) {
    const Shape& ps = value(p).shape;
    RDC_CHECK(ps.size() == s.size(), ContractError, "ConcatLast: rank mismatch");
    for (size_t i = 0; i + 1 < s.size(); ++i) {
      RDC_CHECK(ps[i] == s[i], ContractError, "ConcatLast: leading dim mismatch");
    }
    widths.push_back(ps.back());
    total_c += ps.back();
  }
  Shape out_shape = s;
  out_shape.back() = total_c;
  Tensor out(out_shape);
  int64_t rows = out.size() / total_c;
  int64_t off = 0;
  for (size_t pi = 0; pi < parts.size(); ++pi) {
    const Tensor& v = value(parts[pi]);
    int wlen = widths[pi];
    for (int64_t row = 0; row < rows; ++row) {
      std::memcpy(out.ptr() + row * total_c + off, v.ptr() + row * wlen,
                  sizeof(double) * size_t(wlen));
    }
    off += wlen;
  }
  bool ng = false;
  for (Var p : parts) ng = ng || NeedsGrad(p);
  Var r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    std::vector<Var> ps = parts;
    nodes_[size_t(r.id)].backprop = [this, ps, widths, r, rows, total_c]() {
      const Tensor& g = nodes_[size_t(r.id)].grad;
      int64_t off2 = 0;
      for (size_t pi = 0; pi < ps.size(); ++pi) {
        int wlen = widths[pi];
        if (NeedsGrad(ps[pi])) {
          Tensor dp(value(ps[pi]).shape);
          for (int64_t row = 0; row < rows; ++row) {
            std::memcpy(dp.ptr() + row * wlen, g.ptr() + row * total_c + off2,
                        sizeof(double) * size_t(wlen));
          }
          Accum(ps[pi].id, dp);
        }
        off2 += wlen;
      }
    };
  }
  return r;
}

Var Tape::SliceLast(Var a, int c0, int c1) {
  const Tensor& v = value(a);
  int cw = v.shape.back();
  RDC_CHECK(0 <= c0 && c0 < c1 && c1 <= cw, ContractError,
            "SliceLast: bad channel range");
  Shape out_shape = v.shape;
  out_shape.back() = c1 - c0;
  Tensor out(out_shape);
  int64_t rows = v.size() / cw;
  int wlen = c1 - c0;
  for (int64_t row = 0; row < rows; ++row) {
    std::memcpy(out.ptr() + row * wlen, v.ptr() + row * cw + c0,
                sizeof(double) * size_t(wlen));
  }
  bool ng = NeedsGrad(a);
  Var r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    nodes_[size_t(r.id)].backprop = [this, a, r, c0, cw, rows, wlen]() {
      const Tensor& g = nodes_[size_t(r.id)].grad;
      Tensor da = Tensor::Zeros(value(a).shape);
      for (int64_t row = 0; row < rows; ++row) {
        std::memcpy(da.ptr() + row * cw + c0, g.ptr() + row * wlen,
                    sizeof(double) * size_t(wlen));
      }
      Accum(a.id, da);
    };
  }
  return r;
}

Var Tape::ReflectPad(Var a, int t, int b, int l, int rgt) {
  const Tensor& v = value(a);
  RDC_CHECK(v.ndim() == 4, ContractError, "ReflectPad expects NHWC");
  const int n = v.n(), h = v.h(), w = v.w(), c = v.c();
  RDC_CHECK(t < h && b < h && l < w && rgt < w, ContractError,
            "ReflectPad: padding must be smaller than the image");
  Tensor out({n, h + t + b, w + l + rgt, c});
  for (int in = 0; in < n; ++in) {
    for (int oy = 0; oy < h + t + b; ++oy) {
      int iy = ReflectIndex(oy - t, h);
      for (int ox = 0; ox < w + l + rgt; ++ox) {
        int ix = ReflectIndex(ox - l, w);
        double* dst = out.ptr() +
            ((int64_t(in) * out.h() + oy) * out.w() + ox) * c;
        const double* src = v.ptr() + ((int64_t(in) * h + iy) * w + ix) * c;
        std::memcpy(dst, src, sizeof(double) * size_t(c));
      }
    }
  }
  bool ng = NeedsGrad(a);
  Var r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    nodes_[size_t(r.id)].backprop = [this, a, r, t, l, n, h, w, c, b, rgt]() {
      const Tensor& g = nodes_[size_t(r.id)].grad;
      Tensor da = Tensor::Zeros(value(a).shape);
      for (int in = 0; in < n; ++in) {
        for (int oy = 0; oy < h + t + b; ++oy) {
          int iy = ReflectIndex(oy - t, h);
          for (int ox = 0; ox < w + l + rgt; ++ox) {
            int ix = ReflectIndex(ox - l, w);
            for (int ic = 0; ic < c; ++ic) {
              da.at(in, iy, ix, ic) += g.at(in, oy, ox, ic);
            }
          }
        }
      }
      Accum(a.id, da);
    };
  }
  return r;
}

Var Tape::Crop(Var a, int top, int left, int out_h, int out_w) {
  const Tensor& v = value(a);
  RDC_CHECK(v.ndim() == 4, ContractError, "Crop expects NHWC");
  const int n = v.n(), c = v.c();
  RDC_CHECK(top + out_h <= v.h() && left + out_w <= v.w(), ContractError,
            "Crop: window exceeds input");
  Tensor out({n, out_h, out_w, c});
  for (int in = 0; in < n; ++in) {
    for (int oy = 0; oy < out_h; ++oy) {
      double* dst = out.ptr() + ((int64_t(in) * out_h + oy) * out_w) * c;
      const double* src =
          v.ptr() + ((int64_t(in) * v.h() + top + oy) * v.w() + left) * c;
      std::memcpy(dst, src, sizeof(double) * size_t(out_w) * size_t(c));
    }
  }
  bool ng = NeedsGrad(a);
  Var r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    nodes_[size_t(r.id)].backprop = [this, a, r, top, left, out_h, out_w, n, c]() {
      const Tensor& g = nodes_[size_t(r.id)].grad;
      Tensor da = Tensor::Zeros(value(a).shape);
      for (int in = 0; in < n; ++in) {
        for (int oy = 0; oy < out_h; ++oy) {
          for (int ox = 0; ox < out_w; ++ox) {
            for (int ic = 0; ic < c; ++ic) {
              da.at(in, top + oy, left + ox, ic) += g.at(in, oy, ox, ic);
            }
          }
        }
      }
      Accum(a.id, da);
    };
  }
  return r;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

Var Tape::SumAll(Var a) {
  double s = 0.0;
  for (double v : value(a).data) s += v;
  bool ng = NeedsGrad(a);
  Var r = MakeNode(Tensor::Scalar(s), ng, {});
  if (recording_ && ng) {
    nodes_[size_t(r.id)].backprop = [this, a, r]() {
      double g = nodes_[size_t(r.id)].grad[0];
      Tensor da = Tensor::Full(value(a).shape, g);
      Accum(a.id, da);
    };
  }
  return r;
}

Var Tape::MeanAll(Var a) {
  return MulScalar(SumAll(a), 1.0 / double(value(a).size()));
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

Var Tape::MatMul(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  RDC_CHECK(va.ndim() == 2 && vb.ndim() == 2 && va.shape[1] == vb.shape[0],
            ContractError, "MatMul: bad shapes");
  int m = va.shape[0], k = va.shape[1], n = vb.shape[1];
  Tensor out({m, n});
  Gemm(false, false, m, n, k, va.ptr(), vb.ptr(), out.ptr(), false);
  bool ng = NeedsGrad(a) || NeedsGrad(b);
  Var r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    nodes_[size_t(r.id)].backprop = [this, a, b, r, m, k, n]() {
      const Tensor& g = nodes_[size_t(r.id)].grad;
      if (NeedsGrad(a)) {
        Tensor da({m, k});
        Gemm(false, true, m, k, n, g.ptr(), value(b).ptr(), da.ptr(), false);
        Accum(a.id, da);
      }
      if (NeedsGrad(b)) {
        Tensor db({k, n});
        Gemm(true, false, k, n, m, value(a).ptr(), g.ptr(), db.ptr(), false);
        Accum(b.id, db);
      }
    };
  }
  return r;
}

Var Tape::Bmm(Var a, Var b, bool ta, bool tb) {
  RDC_CHECK(!ta, ContractError, "Bmm: transposed A not supported");
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  RDC_CHECK(va.ndim() == 3 && vb.ndim() == 3 && va.shape[0] == vb.shape[0],
            ContractError, "Bmm: bad shapes");
  int bs = va.shape[0];
  int m = va.shape[1], k = va.shape[2];
  int n = tb ? vb.shape[1] : vb.shape[2];
  int kb = tb ? vb.shape[2] : vb.shape[1];
  RDC_CHECK(kb == k, ContractError, "Bmm: inner dim mismatch");
  Tensor out({bs, m, n});
  int64_t as = int64_t(m) * k, bstr = int64_t(vb.shape[1]) * vb.shape[2],
          cs = int64_t(m) * n;
  for (int i = 0; i < bs; ++i) {
    Gemm(false, tb, m, n, k, va.ptr() + i * as, vb.ptr() + i * bstr,
         out.ptr() + i * cs, false);
  }
  bool ng = NeedsGrad(a) || NeedsGrad(b);
  Var r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    nodes_[size_t(r.id)].backprop = [this, a, b, r, tb, bs, m, k, n, as, bstr, cs]() {
      const Tensor& g = nodes_[size_t(r.id)].grad;
      const Tensor& va2 = value(a);
      const Tensor& vb2 = value(b);
      if (NeedsGrad(a)) {
        // dA = dC * op(B)^T: for tb=false: dC (m,n) * B^T (n,k);
        // for tb=true: dC (m,n) * B (n,k).
        Tensor da(va2.shape);
        for (int i = 0; i < bs; ++i) {
          Gemm(false, !tb, m, k, n, g.ptr() + i * cs, vb2.ptr() + i * bstr,
               da.ptr() + i * as, false);
        }
        Accum(a.id, da);
      }
      if (NeedsGrad(b)) {
        Tensor db(vb2.shape);
        for (int i = 0; i < bs; ++i) {
          if (!tb) {
            // dB = A^T (k,m) * dC (m,n)
            Gemm(true, false, k, n, m, va2.ptr() + i * as, g.ptr() + i * cs,
                 db.ptr() + i * bstr, false);
          } else {
            // B is (n,k); dB = dC^T (n,m) * A (m,k)
            Gemm(true, false, n, k, m, g.ptr() + i * cs, va2.ptr() + i * as,
                 db.ptr() + i * bstr, false);
          }
        }
        Accum(b.id, db);
      }
    };
  }
  return r;
}

Var Tape::Conv2d(Var x, Var w, Var b, ConvGeom g) {
  const Tensor& vx = value(x);
  const Tensor& vw = value(w);
  RDC_CHECK(vx.ndim() == 4 && vw.ndim() == 4, ContractError, "Conv2d: bad rank");
  const int n = vx.n(), hin = vx.h(), win = vx.w(), cin = vx.c();
  const int k = vw.shape[0], cout = vw.shape[3];
  RDC_CHECK(vw.shape[1] == k && vw.shape[2] == cin, ContractError,
            "Conv2d: weight shape mismatch " + ShapeToString(vw.shape));
  const int hpad = hin + g.pad_t + g.pad_b, wpad = win + g.pad_l + g.pad_r;
  RDC_CHECK((hpad - k) % g.stride == 0 && (wpad - k) % g.stride == 0,
            ContractError, "Conv2d: geometry does not tile the input");
  ConvDims d{hin, win, cin, k, (hpad - k) / g.stride + 1, (wpad - k) / g.stride + 1};
  const int kk = k * k * cin;
  const int64_t p = int64_t(d.hout) * d.wout;

  // With k=1, stride 1 and no padding the input already is the column matrix.
  const bool trivial = (k == 1 && g.stride == 1 && g.pad_t == 0 && g.pad_l == 0 &&
                        g.pad_b == 0 && g.pad_r == 0);

  Tensor out({n, d.hout, d.wout, cout});
  auto cols = std::make_shared<std::vector<Tensor>>();
  for (int i = 0; i < n; ++i) {
    const double* colp;
    Tensor col;
    if (trivial) {
      colp = vx.ptr() + int64_t(i) * hin * win * cin;
    } else {
      col = Tensor({int(p), kk});
      Im2Col(vx.ptr() + int64_t(i) * hin * win * cin, d, g, col.ptr());
      colp = col.ptr();
    }
    Gemm(false, false, int(p), cout, kk, colp, vw.ptr(),
         out.ptr() + int64_t(i) * p * cout, false);
    if (recording_ && !trivial && (NeedsGrad(x) || NeedsGrad(w))) {
      cols->push_back(std::move(col));
    }
  }
  if (b.valid()) {
    const Tensor& vb = value(b);
    RDC_CHECK(vb.size() == cout, ContractError, "Conv2d: bias size mismatch");
    for (int64_t site = 0; site < int64_t(n) * p; ++site) {
      double* dst = out.ptr() + site * cout;
      for (int c = 0; c < cout; ++c) dst[c] += vb[c];
    }
  }
  bool ng = NeedsGrad(x) || NeedsGrad(w) || (b.valid() && NeedsGrad(b));
  Var r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    nodes_[size_t(r.id)].backprop = [this, x, w, b, r, g, d, n, cin, cout, kk, p,
                                     trivial, cols]() {
      const Tensor& gout = nodes_[size_t(r.id)].grad;
      const Tensor& vx2 = value(x);
      const Tensor& vw2 = value(w);
      Tensor dw, dx;
      if (NeedsGrad(w)) dw = Tensor::Zeros(vw2.shape);
      if (NeedsGrad(x)) dx = Tensor::Zeros(vx2.shape);
      Tensor dcol({int(p), kk});
      for (int i = 0; i < n; ++i) {
        const double* gp = gout.ptr() + int64_t(i) * p * cout;
        const double* colp = nullptr;
        if (trivial) {
          colp = vx2.ptr() + int64_t(i) * d.hin * d.win * cin;
        } else if (!cols->empty()) {
          colp = (*cols)[size_t(i)].ptr();
        }
        if (NeedsGrad(w)) {
          Gemm(true, false, kk, cout, int(p), colp, gp, dw.ptr(), true);
        }
        if (NeedsGrad(x)) {
          if (trivial) {
            Gemm(false, true, int(p), cin, cout, gp, vw2.ptr(),
                 dx.ptr() + int64_t(i) * p * cin, false);
          } else {
            Gemm(false, true, int(p), kk, cout, gp, vw2.ptr(), dcol.ptr(), false);
            Col2Im(dcol.ptr(), d, g, dx.ptr() + int64_t(i) * d.hin * d.win * cin);
          }
        }
      }
      if (NeedsGrad(w)) Accum(w.id, dw);
      if (NeedsGrad(x)) Accum(x.id, dx);
      if (b.valid() && NeedsGrad(b)) {
        Tensor db = Tensor::Zeros(value(b).shape);
        for (int64_t site = 0; site < int64_t(n) * p; ++site) {
          const double* src = gout.ptr() + site * cout;
          for (int c = 0; c < cout; ++c) db[c] += src[c];
        }
        Accum(b.id, db);
      }
    };
  }
  return r;
}

Var Tape::TConv2d(Var x, Var w, Var b, ConvGeom g) {
  const Tensor& vx = value(x);
  const Tensor& vw = value(w);
  RDC_CHECK(vx.ndim() == 4 && vw.ndim() == 4, ContractError, "TConv2d: bad rank");
  const int n = vx.n(), hin = vx.h(), win = vx.w(), cin = vx.c();
  const int k = vw.shape[0], cout = vw.shape[2];
  RDC_CHECK(vw.shape[1] == k && vw.shape[3] == cin, ContractError,
            "TConv2d: weight shape mismatch " + ShapeToString(vw.shape));
  // Output dims are the conv-input dims for geometry g.
  const int hout = (hin - 1) * g.stride + k - g.pad_t - g.pad_b;
  const int wout = (win - 1) * g.stride + k - g.pad_l - g.pad_r;
  RDC_CHECK(hout > 0 && wout > 0, ContractError, "TConv2d: degenerate output");
  ConvDims d{hout, wout, cout, k, hin, win};
  const int kk = k * k * cout;
  const int64_t p = int64_t(hin) * win;

  Tensor out = Tensor::Zeros({n, hout, wout, cout});
  Tensor ycol({int(p), kk});
  for (int i = 0; i < n; ++i) {
    // ycol = x_mat (p,cin) * W'^T (cin,kk)
    Gemm(false, true, int(p), kk, cin, vx.ptr() + int64_t(i) * p * cin, vw.ptr(),
         ycol.ptr(), false);
    Col2Im(ycol.ptr(), d, g, out.ptr() + int64_t(i) * hout * wout * cout);
  }
  if (b.valid()) {
    const Tensor& vb = value(b);
    RDC_CHECK(vb.size() == cout, ContractError, "TConv2d: bias size mismatch");
    for (int64_t site = 0; site < int64_t(n) * hout * wout; ++site) {
      double* dst = out.ptr() + site * cout;
      for (int c = 0; c < cout; ++c) dst[c] += vb[c];
    }
  }
  bool ng = NeedsGrad(x) || NeedsGrad(w) || (b.valid() && NeedsGrad(b));
  Var r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    nodes_[size_t(r.id)].backprop = [this, x, w, b, r, g, d, n, cin, cout, kk, p,
                                     hout, wout]() {
      const Tensor& gout = nodes_[size_t(r.id)].grad;
      const Tensor& vx2 = value(x);
      const Tensor& vw2 = value(w);
      Tensor dw, dx;
      if (NeedsGrad(w)) dw = Tensor::Zeros(vw2.shape);
      if (NeedsGrad(x)) dx = Tensor::Zeros(vx2.shape);
      Tensor gcol({int(p), kk});
      for (int i = 0; i < n; ++i) {
        Im2Col(gout.ptr() + int64_t(i) * hout * wout * cout, d, g, gcol.ptr());
        if (NeedsGrad(x)) {
          // dX = gcol (p,kk) * W' (kk,cin)
          Gemm(false, false, int(p), cin, kk, gcol.ptr(), vw2.ptr(),
               dx.ptr() + int64_t(i) * p * cin, false);
        }
        if (NeedsGrad(w)) {
          // dW' = gcol^T (kk,p) * x (p,cin)
          Gemm(true, false, kk, cin, int(p), gcol.ptr(),
               vx2.ptr() + int64_t(i) * p * cin, dw.ptr(), true);
        }
      }
      if (NeedsGrad(w)) Accum(w.id, dw);
      if (NeedsGrad(x)) Accum(x.id, dx);
      if (b.valid() && NeedsGrad(b)) {
        Tensor db = Tensor::Zeros(value(b).shape);
        for (int64_t site = 0; site < int64_t(n) * hout * wout; ++site) {
          const double* src = gout.ptr() + site * cout;
          for (int c = 0; c < cout; ++c) db[c] += src[c];
        }
        Accum(b.id, db);
      }
    };
  }
  return r;
}

Var Tape::ChannelMatVec(Var a_mats, Var x) {
  const Tensor& va = value(a_mats);
  const Tensor& vx = value(x);
  RDC_CHECK(va.ndim() == 3 && vx.ndim() == 3, ContractError,
            "ChannelMatVec: bad rank");
  const int c = va.shape[0], pdim = va.shape[1], q = va.shape[2];
  const int64_t m = vx.shape[0];
  RDC_CHECK(vx.shape[1] == c && vx.shape[2] == q, ContractError,
            "ChannelMatVec: input shape mismatch");
  Tensor out({int(m), c, pdim});
  for (int64_t im = 0; im < m; ++im) {
    for (int ic = 0; ic < c; ++ic) {
      const double* amat = va.ptr() + int64_t(ic) * pdim * q;
      const double* xin = vx.ptr() + (im * c + ic) * q;
      double* yo = out.ptr() + (im * c + ic) * pdim;
      for (int ip = 0; ip < pdim; ++ip) {
        double s = 0.0;
        for (int iq = 0; iq < q; ++iq) s += amat[ip * q + iq] * xin[iq];
        yo[ip] = s;
      }
    }
  }
  bool ng = NeedsGrad(a_mats) || NeedsGrad(x);
  Var r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    nodes_[size_t(r.id)].backprop = [this, a_mats, x, r, c, pdim, q, m]() {
      const Tensor& g = nodes_[size_t(r.id)].grad;
      const Tensor& va2 = value(a_mats);
      const Tensor& vx2 = value(x);
      if (NeedsGrad(a_mats)) {
        Tensor da = Tensor::Zeros(va2.shape);
        for (int64_t im = 0; im < m; ++im) {
          for (int ic = 0; ic < c; ++ic) {
            const double* gi = g.ptr() + (im * c + ic) * pdim;
            const double* xin = vx2.ptr() + (im * c + ic) * q;
            double* dst = da.ptr() + int64_t(ic) * pdim * q;
            for (int ip = 0; ip < pdim; ++ip) {
              for (int iq = 0; iq < q; ++iq) dst[ip * q + iq] += gi[ip] * xin[iq];
            }
          }
        }
        Accum(a_mats.id, da);
      }
      if (NeedsGrad(x)) {
        Tensor dx = Tensor::Zeros(vx2.shape);
        for (int64_t im = 0; im < m; ++im) {
          for (int ic = 0; ic < c; ++ic) {
            const double* gi = g.ptr() + (im * c + ic) * pdim;
            const double* amat = va2.ptr() + int64_t(ic) * pdim * q;
            double* dst = dx.ptr() + (im * c + ic) * q;
            for (int ip = 0; ip < pdim; ++ip) {
              for (int iq = 0; iq < q; ++iq) dst[iq] += amat[ip * q + iq] * gi[ip];
            }
          }
        }
        Accum(x.id, dx);
      }
    };
  }
  return r;
}

// ---------------------------------------------------------------------------
// Attention helpers
// ---------------------------------------------------------------------------

Var Tape::Softmax(Var a) {
  const Tensor& v = value(a);
  const int l = v.shape.back();
  const int64_t rows = v.size() / l;
  Tensor out(v.shape);
  for (int64_t row = 0; row < rows; ++row) {
    const double* xr = v.ptr() + row * l;
    double* yr = out.ptr() + row * l;
    double mx = xr[0];
    for (int i = 1; i < l; ++i) mx = std::max(mx, xr[i]);
    double sum = 0.0;
    for (int i = 0; i < l; ++i) {
      yr[i] = std::exp(xr[i] - mx);
      sum += yr[i];
    }
    for (int i = 0; i < l; ++i) yr[i] /= sum;
  }
  bool ng = NeedsGrad(a);
  Var r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    nodes_[size_t(r.id)].backprop = [this, a, r, l, rows]() {
      const Tensor& g = nodes_[size_t(r.id)].grad;
      const Tensor& y = value(r);
      Tensor dx(y.shape);
      for (int64_t row = 0; row < rows; ++row) {
        const double* yr = y.ptr() + row * l;
        const double* gr = g.ptr() + row * l;
        double dot = 0.0;
        for (int i = 0; i < l; ++i) dot += yr[i] * gr[i];
        double* dr = dx.ptr() + row * l;
        for (int i = 0; i < l; ++i) dr[i] = yr[i] * (gr[i] - dot);
      }
      Accum(a.id, dx);
    };
  }
  return r;
}

Var Tape::LayerNormLast(Var a, double eps) {
  const Tensor& v = value(a);
  const int l = v.shape.back();
  const int64_t rows = v.size() / l;
  Tensor out(v.shape);
  std::vector<double> inv_std(static_cast<size_t>(rows));
  for (int64_t row = 0; row < rows; ++row) {
    const double* xr = v.ptr() + row * l;
    double mu = 0.0;
    for (int i = 0; i < l; ++i) mu += xr[i];
    mu /= l;
    double var = 0.0;
    for (int i = 0; i < l; ++i) var += (xr[i] - mu) * (xr[i] - mu);
    var /= l;
    double is = 1.0 / std::sqrt(var + eps);
    inv_std[size_t(row)] = is;
    double* yr = out.ptr() + row * l;
    for (int i = 0; i < l; ++i) yr[i] = (xr[i] - mu) * is;
  }
  bool ng = NeedsGrad(a);
  Var r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    auto istd = std::make_shared<std::vector<double>>(std::move(inv_std));
    nodes_[size_t(r.id)].backprop = [this, a, r, l, rows, istd]() {
      const Tensor& g = nodes_[size_t(r.id)].grad;
      const Tensor& y = value(r);
      Tensor dx(y.shape);
      for (int64_t row = 0; row < rows; ++row) {
        const double* yr = y.ptr() + row * l;
        const double* gr = g.ptr() + row * l;
        double mean_g = 0.0, mean_gy = 0.0;
        for (int i = 0; i < l; ++i) {
          mean_g += gr[i];
          mean_gy += gr[i] * yr[i];
        }
        mean_g /= l;
        mean_gy /= l;
        double is = (*istd)[size_t(row)];
        double* dr = dx.ptr() + row * l;
        for (int i = 0; i < l; ++i) {
          dr[i] = is * (gr[i] - mean_g - yr[i] * mean_gy);
        }
      }
      Accum(a.id, dx);
    };
  }
  return r;
}

Var Tape::WindowPartition(Var x, int win) {
  const Tensor& v = value(x);
  RDC_CHECK(v.ndim() == 4, ContractError, "WindowPartition expects NHWC");
  RDC_CHECK(v.h() % win == 0 && v.w() % win == 0, ContractError,
            "WindowPartition: window must divide spatial dims");
  const int n = v.n(), h = v.h(), w = v.w(), c = v.c();
  Tensor out;
  WindowPartTensor(v, win, &out);
  bool ng = NeedsGrad(x);
  Var r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    nodes_[size_t(r.id)].backprop = [this, x, r, win, n, h, w, c]() {
      Tensor dx = Tensor::Zeros({n, h, w, c});
      WindowMergeTensor(nodes_[size_t(r.id)].grad, win, n, h, w, c, true, &dx);
      Accum(x.id, dx);
    };
  }
  return r;
}

Var Tape::WindowMerge(Var t, int win, int n, int h, int w, int c) {
  const Tensor& v = value(t);
  RDC_CHECK(v.ndim() == 3 && v.shape[0] == n * (h / win) * (w / win) &&
                v.shape[1] == win * win && v.shape[2] == c,
            ContractError, "WindowMerge: shape mismatch");
  Tensor out;
  WindowMergeTensor(v, win, n, h, w, c, false, &out);
  bool ng = NeedsGrad(t);
  Var r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    nodes_[size_t(r.id)].backprop = [this, t, r, win]() {
      Tensor dt;
      WindowPartTensor(nodes_[size_t(r.id)].grad, win, &dt);
      Accum(t.id, dt);
    };
  }
  return r;
}

namespace {
void HeadSplitTensor(const Tensor& x, int heads, Tensor* out) {
  const int b = x.shape[0], t = x.shape[1], c = x.shape[2];
  const int dh = c / heads;
  *out = Tensor({b * heads, t, dh});
  for (int ib = 0; ib < b; ++ib) {
    for (int it = 0; it < t; ++it) {
      const double* src = x.ptr() + (int64_t(ib) * t + it) * c;
      for (int ih = 0; ih < heads; ++ih) {
        double* dst = out->ptr() + ((int64_t(ib) * heads + ih) * t + it) * dh;
        std::memcpy(dst, src + ih * dh, sizeof(double) * size_t(dh));
      }
    }
  }
}

void HeadMergeTensor(const Tensor& x, int heads, Tensor* out) {
  const int bh = x.shape[0], t = x.shape[1], dh = x.shape[2];
  const int b = bh / heads, c = dh * heads;
  *out = Tensor({b, t, c});
  for (int ib = 0; ib < b; ++ib) {
    for (int it = 0; it < t; ++it) {
      double* dst = out->ptr() + (int64_t(ib) * t + it) * c;
      for (int ih = 0; ih < heads; ++ih) {
        const double* src = x.ptr() + ((int64_t(ib) * heads + ih) * t + it) * dh;
        std::memcpy(dst + ih * dh, src, sizeof(double) * size_t(dh));
      }
    }
  }
}
}  // namespace

Var Tape::HeadSplit(Var x, int heads) {
  const Tensor& v = value(x);
  RDC_CHECK(v.ndim() == 3 && v.shape[2] % heads == 0, ContractError,
            "HeadSplit: channels must divide by heads");
  Tensor out;
  HeadSplitTensor(v, heads, &out);
  bool ng = NeedsGrad(x);
  Var r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    nodes_[size_t(r.id)].backprop = [this, x, r, heads]() {
      Tensor dx;
      HeadMergeTensor(nodes_[size_t(r.id)].grad, heads, &dx);
      Accum(x.id, dx);
    };
  }
  return r;
}

Var Tape::HeadMerge(Var x, int heads) {
  const Tensor& v = value(x);
  RDC_CHECK(v.ndim() == 3 && v.shape[0] % heads == 0, ContractError,
            "HeadMerge: batch must divide by heads");
  Tensor out;
  HeadMergeTensor(v, heads, &out);
  bool ng = NeedsGrad(x);
  Var r = MakeNode(std::move(out), ng, {});
  if (recording_ && ng) {
    nodes_[size_t(r.id)].backprop = [this, x, r, heads]() {
      Tensor dx;
      HeadSplitTensor(nodes_[size_t(r.id)].grad, heads, &dx);
      Accum(x.id, dx);
    };
  }
  return r;
}

}  // namespace rdc
