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

#ifndef RDC_AUTODIFF_H_
#define RDC_AUTODIFF_H_

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rdc/tensor.h"

namespace rdc {

// A named trainable tensor. Gradients accumulate into `grad` when a tape
// that bound the parameter runs Backward().
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  void ZeroGrad() {
    grad = Tensor::Zeros(value.shape);
  }
};

// Convolution geometry: stride plus explicit (possibly asymmetric) padding.
struct ConvGeom {
  int stride = 1;
  int pad_t = 0, pad_l = 0, pad_b = 0, pad_r = 0;

  // SAME-style geometry: for inputs divisible by `stride` the output is
  // exactly in/stride; pad_total = k - stride, split small-side-first.
  static ConvGeom Same(int k, int stride);
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Node ids increase in creation order, so the reverse
// sweep over ids is a topological order. With recording disabled the ops
// compute values only (evaluation mode); results are identical.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }

  // Leaves.
  Var Constant(Tensor value);             // no gradient
  Var Leaf(Tensor value);                 // gradient kept on the tape
  Var Param(Parameter* p);                // gradient accumulated into p->grad

  const Tensor& value(Var v) const { return nodes_[size_t(v.id)].value; }
  // Gradient of the last Backward() root w.r.t. v (empty if unreached).
  const Tensor& grad(Var v) const { return nodes_[size_t(v.id)].grad; }

  // Reverse sweep from a scalar root. May be called once per tape.
  void Backward(Var root);

  // --- Elementwise (same shape) ---
  Var Add(Var a, Var b);
  Var Sub(Var a, Var b);
  Var Mul(Var a, Var b);
  Var Div(Var a, Var b);

  // --- Scalar and broadcast ---
  Var AddScalar(Var a, double s);
  Var MulScalar(Var a, double s);
  // b's shape must be a suffix of a's shape; broadcast over leading dims.
  Var AddBcast(Var a, Var b);
  Var MulBcast(Var a, Var b);

  // --- Unary ---
  Var Square(Var a);
  Var Sqrt(Var a);
  Var Rsqrt(Var a);
  Var Exp(Var a);
  Var Log(Var a);
  Var Tanh(Var a);
  Var Sigmoid(Var a);
  Var Softplus(Var a);
  Var Erf(Var a);
  Var LeakyRelu(Var a, double slope);
  Var Gelu(Var a);
  Var ClampMin(Var a, double lo);  // gradient is zero where clamped

  // --- Shape ---
  Var Reshape(Var a, Shape s);
  Var ConcatLast(const std::vector<Var>& parts);
  Var SliceLast(Var a, int c0, int c1);
  // 4D NHWC spatial ops.
  Var ReflectPad(Var a, int t, int b, int l, int r);
  Var Crop(Var a, int top, int left, int out_h, int out_w);

  // --- Reductions ---
  Var SumAll(Var a);
  Var MeanAll(Var a);

  // --- Linear algebra ---
  Var MatMul(Var a, Var b);                       // (M,K)x(K,N)
  Var Bmm(Var a, Var b, bool ta, bool tb);        // (B,M,K)x(B,K,N)
  // x NHWC; w (k,k,cin,cout); optional bias (cout).
  Var Conv2d(Var x, Var w, Var b, ConvGeom g);
  // x NHWC; w (k,k,cout,cin); exact adjoint of Conv2d with the same geometry.
  Var TConv2d(Var x, Var w, Var b, ConvGeom g);
  // A (C,p,q) applied per channel: x (M,C,q) -> (M,C,p).
  Var ChannelMatVec(Var a_mats, Var x);

  // --- Attention helpers ---
  Var Softmax(Var a);        // along last dim
  Var LayerNormLast(Var a, double eps);  // along last dim, no affine
  Var WindowPartition(Var x, int win);   // (N,H,W,C)->(N*nh*nw, win*win, C)
  Var WindowMerge(Var t, int win, int n, int h, int w, int c);
  Var HeadSplit(Var x, int heads);       // (B,T,C)->(B*heads,T,C/heads)
  Var HeadMerge(Var x, int heads);       // inverse of HeadSplit

  size_t NumNodes() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    std::function<void()> backprop;  // empty for leaves / eval mode
    Parameter* bound = nullptr;
  };

  Var MakeNode(Tensor value, bool needs_grad, std::function<void()> backprop);
  Var Unary(Var a, std::function<void(const Tensor&, Tensor&)> fwd,
            std::function<double(double x, double y, double dy)> dfn);
  Tensor& GradRef(int id);
  void Accum(int id, const Tensor& g);
  bool NeedsGrad(Var v) const { return nodes_[size_t(v.id)].needs_grad; }

  bool recording_;
  bool backward_done_ = false;
  std::vector<Node> nodes_;
  std::map<Parameter*, int> bound_params_;
};

}  // namespace rdc

#endif  // RDC_AUTODIFF_H_
