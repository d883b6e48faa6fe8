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

#ifndef RDC_NN_H_
#define RDC_NN_H_

#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "rdc/autodiff.h"
#include "rdc/layer_inventory.h"
#include "rdc/util.h"

namespace rdc {

// Owns all trainable tensors of a model. Parameter pointers stay stable for
// the registry's lifetime; creation order is the serialization order.
class ParamRegistry {
 public:
  Parameter* Add(std::string name, Tensor init);
  Parameter* Find(const std::string& name);

  std::deque<Parameter>& params() { return params_; }
  const std::deque<Parameter>& params() const { return params_; }
  int64_t TotalCount() const;
  void ZeroGrads();

 private:
  std::deque<Parameter> params_;
};

Tensor RandNormalTensor(Rng& rng, Shape shape, double stddev);

// Forward-graph building block. Blocks are immutable after construction and
// safe to share across tapes.
class Block {
 public:
  virtual ~Block() = default;
  virtual Var Forward(Tape& t, Var x) const = 0;
};

using BlockPtr = std::shared_ptr<Block>;

class Sequence : public Block {
 public:
  void Append(BlockPtr b) { blocks_.push_back(std::move(b)); }
  Var Forward(Tape& t, Var x) const override {
    for (const auto& b : blocks_) x = b->Forward(t, x);
    return x;
  }

 private:
  std::vector<BlockPtr> blocks_;
};

class ConvBlock : public Block {
 public:
  ConvBlock(Parameter* w, Parameter* b, ConvGeom g, bool transposed)
      : w_(w), b_(b), g_(g), transposed_(transposed) {}
  Var Forward(Tape& t, Var x) const override;

 private:
  Parameter* w_;
  Parameter* b_;  // may be null
  ConvGeom g_;
  bool transposed_;
};

class LeakyReluBlock : public Block {
 public:
  explicit LeakyReluBlock(double slope) : slope_(slope) {}
  Var Forward(Tape& t, Var x) const override { return t.LeakyRelu(x, slope_); }

 private:
  double slope_;
};

// Generalized divisive normalization; `inverse` multiplies by the
// normalization pool instead of dividing (for synthesis transforms).
// beta/gamma are stored through a softplus reparameterization so they stay
// positive with nonvanishing gradients.
class GdnBlock : public Block {
 public:
  GdnBlock(Parameter* beta_raw, Parameter* gamma_raw, bool inverse)
      : beta_raw_(beta_raw), gamma_raw_(gamma_raw), inverse_(inverse) {}
  Var Forward(Tape& t, Var x) const override;

 private:
  Parameter* beta_raw_;   // (C)
  Parameter* gamma_raw_;  // (1,1,C,C)
  bool inverse_;
};

class ResidualBlock : public Block {
 public:
  ResidualBlock(BlockPtr body) : body_(std::move(body)) {}
  Var Forward(Tape& t, Var x) const override {
    return t.Add(x, body_->Forward(t, x));
  }

 private:
  BlockPtr body_;
};

// Residual attention gate: x + trunk(x) * sigmoid(mask(x)).
class AttnGateBlock : public Block {
 public:
  AttnGateBlock(BlockPtr trunk, BlockPtr mask) : trunk_(std::move(trunk)), mask_(std::move(mask)) {}
  Var Forward(Tape& t, Var x) const override {
    Var trunk = trunk_->Forward(t, x);
    Var gate = t.Sigmoid(mask_->Forward(t, x));
    return t.Add(x, t.Mul(trunk, gate));
  }

 private:
  BlockPtr trunk_;
  BlockPtr mask_;
};

// One windowed-attention transformer block (W-MSA + MLP, pre-norm, no
// affine in the norms). The window shrinks to the largest divisor of the
// spatial dims when the configured window does not fit.
class SwinBlock : public Block {
 public:
  struct Params {
    Parameter *wqkv, *bqkv, *wproj, *bproj, *wm1, *bm1, *wm2, *bm2;
  };
  SwinBlock(Params p, int width, int window, int heads)
      : p_(p), width_(width), window_(window), heads_(heads) {}
  Var Forward(Tape& t, Var x) const override;

  static int EffectiveWindow(int configured, int h, int w);

 private:
  Params p_;
  int width_, window_, heads_;
};

// Dense layer applied to the last dim of a (B,T,C) token tensor.
Var DenseTokens(Tape& t, Var x, Parameter* w, Parameter* b);

// Layer construction context: wires parameters, inventory records, and
// deterministic initialization together.
struct LayerCtx {
  ParamRegistry* reg = nullptr;
  LayerInventory* inv = nullptr;
  Rng* rng = nullptr;
  Phase phase = Phase::kShared;
  std::string prefix;

  std::string Name(const std::string& leaf) const { return prefix + "/" + leaf; }
};

// Factories. `scale` is the log2 downsampling of the layer input relative
// to the reconstructed image; stride-2 convs increase it by 1, stride-2
// transposed convs decrease it by 1.
BlockPtr MakeConv(LayerCtx& ctx, const std::string& name, int k, int cin,
                  int cout, int stride, int in_scale, bool bias = true);
BlockPtr MakeTConv(LayerCtx& ctx, const std::string& name, int k, int cin,
                   int cout, int stride, int in_scale, bool bias = true);
BlockPtr MakeGdn(LayerCtx& ctx, const std::string& name, int channels,
                 int scale, bool inverse);
BlockPtr MakeResidualBottleneck(LayerCtx& ctx, const std::string& name,
                                int channels, int scale);
BlockPtr MakeAttnGate(LayerCtx& ctx, const std::string& name, int channels,
                      int scale);
BlockPtr MakeSwinBlock(LayerCtx& ctx, const std::string& name, int width,
                       int window, int scale);

int SwinHeads(int width);

}  // namespace rdc

#endif  // RDC_NN_H_
