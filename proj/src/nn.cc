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

#include "rdc/nn.h"

#include <cmath>

namespace rdc {

Parameter* ParamRegistry::Add(std::string name, Tensor init) {
  RDC_CHECK(Find(name) == nullptr, ContractError,
            "duplicate parameter name: " + name);
  params_.push_back(Parameter{std::move(name), std::move(init), Tensor()});
  return &params_.back();
}

Parameter* ParamRegistry::Find(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

int64_t ParamRegistry::TotalCount() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamRegistry::ZeroGrads() {
  for (auto& p : params_) p.ZeroGrad();
}

Tensor RandNormalTensor(Rng& rng, Shape shape, double stddev) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = rng.NextNormal() * stddev;
  return t;
}

Var ConvBlock::Forward(Tape& t, Var x) const {
  Var w = t.Param(w_);
  Var b = b_ ? t.Param(b_) : Var{};
  return transposed_ ? t.TConv2d(x, w, b, g_) : t.Conv2d(x, w, b, g_);
}

Var GdnBlock::Forward(Tape& t, Var x) const {
  Var gamma = t.Softplus(t.Param(gamma_raw_));
  Var beta = t.AddScalar(t.Softplus(t.Param(beta_raw_)), 1e-6);
  Var pool = t.Conv2d(t.Square(x), gamma, beta, ConvGeom{});
  return inverse_ ? t.Mul(x, t.Sqrt(pool)) : t.Mul(x, t.Rsqrt(pool));
}

int SwinBlock::EffectiveWindow(int configured, int h, int w) {
  int win = std::min(configured, std::min(h, w));
  while (win > 1 && (h % win != 0 || w % win != 0)) --win;
  return std::max(win, 1);
}

Var DenseTokens(Tape& t, Var x, Parameter* w, Parameter* b) {
  const Shape& s = t.value(x).shape;
  RDC_CHECK(s.size() == 3, ContractError, "DenseTokens expects (B,T,C)");
  int bt = s[0] * s[1];
  int c = s[2];
  int co = w->value.shape[1];
  Var flat = t.Reshape(x, {bt, c});
  Var y = t.MatMul(flat, t.Param(w));
  if (b != nullptr) y = t.AddBcast(y, t.Param(b));
  return t.Reshape(y, {s[0], s[1], co});
}

Var SwinBlock::Forward(Tape& t, Var x) const {
  const Tensor& v = t.value(x);
  RDC_CHECK(v.ndim() == 4 && v.c() == width_, ContractError,
            "SwinBlock: input width mismatch");
  const int n = v.n(), h = v.h(), w = v.w();
  const int win = EffectiveWindow(window_, h, w);
  Var tokens = t.WindowPartition(x, win);  // (B', T, C)

  Var hh = t.LayerNormLast(tokens, 1e-6);
  Var qkv = DenseTokens(t, hh, p_.wqkv, p_.bqkv);
  Var q = t.SliceLast(qkv, 0, width_);
  Var k = t.SliceLast(qkv, width_, 2 * width_);
  Var vv = t.SliceLast(qkv, 2 * width_, 3 * width_);
  q = t.HeadSplit(q, heads_);
  k = t.HeadSplit(k, heads_);
  vv = t.HeadSplit(vv, heads_);
  const double inv_sqrt_dh = 1.0 / std::sqrt(double(width_ / heads_));
  Var scores = t.MulScalar(t.Bmm(q, k, false, true), inv_sqrt_dh);
  Var attn = t.Softmax(scores);
  Var o = t.HeadMerge(t.Bmm(attn, vv, false, false), heads_);
  o = DenseTokens(t, o, p_.wproj, p_.bproj);
  tokens = t.Add(tokens, o);

  Var h2 = t.LayerNormLast(tokens, 1e-6);
  Var m = DenseTokens(t, h2, p_.wm1, p_.bm1);
  m = t.Gelu(m);
  m = DenseTokens(t, m, p_.wm2, p_.bm2);
  tokens = t.Add(tokens, m);

  return t.WindowMerge(tokens, win, n, h, w, width_);
}

namespace {

LayerRecord BaseRecord(const LayerCtx& ctx, const std::string& name,
                       LayerKind kind, int k, int cin, int cout, int stride,
                       int in_scale, int out_scale, bool bias) {
  LayerRecord rec;
  rec.name = ctx.Name(name);
  rec.kind = kind;
  rec.kernel = k;
  rec.cin = cin;
  rec.cout = cout;
  rec.stride = stride;
  rec.has_bias = bias;
  rec.in_scale_log2 = in_scale;
  rec.out_scale_log2 = out_scale;
  rec.scope = SpatialScope::kPerPixel;
  rec.phase = ctx.phase;
  return rec;
}

}  // namespace

BlockPtr MakeConv(LayerCtx& ctx, const std::string& name, int k, int cin,
                  int cout, int stride, int in_scale, bool bias) {
  double stddev = std::sqrt(2.0 / (double(k) * k * cin));
  Parameter* w = ctx.reg->Add(ctx.Name(name) + ".w",
                              RandNormalTensor(*ctx.rng, {k, k, cin, cout}, stddev));
  Parameter* b = bias ? ctx.reg->Add(ctx.Name(name) + ".b", Tensor::Zeros({cout}))
                      : nullptr;
  int out_scale = in_scale + (stride == 2 ? 1 : 0);
  ctx.inv->records.push_back(BaseRecord(ctx, name, LayerKind::kConv, k, cin,
                                        cout, stride, in_scale, out_scale, bias));
  return std::make_shared<ConvBlock>(w, b, ConvGeom::Same(k, stride), false);
}

BlockPtr MakeTConv(LayerCtx& ctx, const std::string& name, int k, int cin,
                   int cout, int stride, int in_scale, bool bias) {
  double stddev = std::sqrt(2.0 / (double(k) * k * cin));
  Parameter* w = ctx.reg->Add(ctx.Name(name) + ".w",
                              RandNormalTensor(*ctx.rng, {k, k, cout, cin}, stddev));
  Parameter* b = bias ? ctx.reg->Add(ctx.Name(name) + ".b", Tensor::Zeros({cout}))
                      : nullptr;
  int out_scale = in_scale - (stride == 2 ? 1 : 0);
  ctx.inv->records.push_back(BaseRecord(ctx, name, LayerKind::kTConv, k, cin,
                                        cout, stride, in_scale, out_scale, bias));
  return std::make_shared<ConvBlock>(w, b, ConvGeom::Same(k, stride), true);
}

BlockPtr MakeGdn(LayerCtx& ctx, const std::string& name, int channels,
                 int scale, bool inverse) {
  // softplus^-1 of the target initial values (beta 1, gamma 0.1 on the
  // diagonal, 1e-3 elsewhere so every entry keeps a live gradient).
  auto inv_softplus = [](double y) { return std::log(std::expm1(y)); };
  Tensor beta = Tensor::Full({channels}, inv_softplus(1.0));
  Tensor gamma({1, 1, channels, channels});
  for (int i = 0; i < channels; ++i) {
    for (int j = 0; j < channels; ++j) {
      gamma.at(0, 0, i, j) = inv_softplus(i == j ? 0.1 : 1e-3);
    }
  }
  Parameter* beta_raw = ctx.reg->Add(ctx.Name(name) + ".beta", std::move(beta));
  Parameter* gamma_raw = ctx.reg->Add(ctx.Name(name) + ".gamma", std::move(gamma));
  // The channel-mixing pool is priced as a per-pixel dense layer; the
  // elementwise sqrt/divide is not.
  LayerRecord rec = BaseRecord(ctx, name, LayerKind::kDense, 1, channels,
                               channels, 1, scale, scale, true);
  ctx.inv->records.push_back(rec);
  ctx.inv->NoteUnpriced("gdn_rsqrt");
  return std::make_shared<GdnBlock>(beta_raw, gamma_raw, inverse);
}

BlockPtr MakeResidualBottleneck(LayerCtx& ctx, const std::string& name,
                                int channels, int scale) {
  int mid = std::max(channels / 2, 4);
  auto body = std::make_shared<Sequence>();
  body->Append(MakeConv(ctx, name + ".reduce", 1, channels, mid, 1, scale));
  body->Append(std::make_shared<LeakyReluBlock>(0.01));
  body->Append(MakeConv(ctx, name + ".conv", 3, mid, mid, 1, scale));
  body->Append(std::make_shared<LeakyReluBlock>(0.01));
  body->Append(MakeConv(ctx, name + ".expand", 1, mid, channels, 1, scale));
  ctx.inv->NoteUnpriced("leaky_relu");
  return std::make_shared<ResidualBlock>(body);
}

BlockPtr MakeAttnGate(LayerCtx& ctx, const std::string& name, int channels,
                      int scale) {
  auto trunk = std::make_shared<Sequence>();
  trunk->Append(MakeResidualBottleneck(ctx, name + ".trunk0", channels, scale));
  trunk->Append(MakeResidualBottleneck(ctx, name + ".trunk1", channels, scale));
  auto mask = std::make_shared<Sequence>();
  mask->Append(MakeResidualBottleneck(ctx, name + ".mask0", channels, scale));
  mask->Append(MakeResidualBottleneck(ctx, name + ".mask1", channels, scale));
  mask->Append(MakeConv(ctx, name + ".mask_proj", 1, channels, channels, 1, scale));
  ctx.inv->NoteUnpriced("sigmoid");
  return std::make_shared<AttnGateBlock>(trunk, mask);
}

int SwinHeads(int width) { return width % 16 == 0 ? width / 16 : 1; }

BlockPtr MakeSwinBlock(LayerCtx& ctx, const std::string& name, int width,
                       int window, int scale) {
  Rng& rng = *ctx.rng;
  const double init = 0.02;
  SwinBlock::Params p;
  p.wqkv = ctx.reg->Add(ctx.Name(name) + ".qkv.w",
                        RandNormalTensor(rng, {width, 3 * width}, init));
  p.bqkv = ctx.reg->Add(ctx.Name(name) + ".qkv.b", Tensor::Zeros({3 * width}));
  p.wproj = ctx.reg->Add(ctx.Name(name) + ".proj.w",
                         RandNormalTensor(rng, {width, width}, init));
  p.bproj = ctx.reg->Add(ctx.Name(name) + ".proj.b", Tensor::Zeros({width}));
  int hidden = 2 * width;
  p.wm1 = ctx.reg->Add(ctx.Name(name) + ".mlp1.w",
                       RandNormalTensor(rng, {width, hidden}, init));
  p.bm1 = ctx.reg->Add(ctx.Name(name) + ".mlp1.b", Tensor::Zeros({hidden}));
  p.wm2 = ctx.reg->Add(ctx.Name(name) + ".mlp2.w",
                       RandNormalTensor(rng, {hidden, width}, init));
  p.bm2 = ctx.reg->Add(ctx.Name(name) + ".mlp2.b", Tensor::Zeros({width}));

  // Records: QKV projection, the two attention matmuls, the output
  // projection, and the MLP as per-token dense layers.
  {
    LayerRecord rec = BaseRecord(ctx, name + ".qkv", LayerKind::kAttentionQkv, 1,
                                 width, 3 * width, 1, scale, scale, true);
    ctx.inv->records.push_back(rec);
    LayerRecord mm = BaseRecord(ctx, name + ".attn", LayerKind::kAttentionMatmul,
                                1, width, width, 1, scale, scale, false);
    mm.window = window;
    mm.scope = SpatialScope::kWindowed;
    ctx.inv->records.push_back(mm);
    ctx.inv->records.push_back(BaseRecord(ctx, name + ".proj", LayerKind::kDense,
                                          1, width, width, 1, scale, scale, true));
    ctx.inv->records.push_back(BaseRecord(ctx, name + ".mlp1", LayerKind::kDense,
                                          1, width, hidden, 1, scale, scale, true));
    ctx.inv->records.push_back(BaseRecord(ctx, name + ".mlp2", LayerKind::kDense,
                                          1, hidden, width, 1, scale, scale, true));
  }
  ctx.inv->NoteUnpriced("layer_norm");
  ctx.inv->NoteUnpriced("softmax");
  ctx.inv->NoteUnpriced("gelu");
  return std::make_shared<SwinBlock>(p, width, window, SwinHeads(width));
}

}  // namespace rdc
