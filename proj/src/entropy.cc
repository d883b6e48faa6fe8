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

#include "rdc/entropy.h"

#include <cmath>

namespace rdc {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvLn2 = 1.4426950408889634074;
}  // namespace

double GaussianBinProb(double offset, double sigma) {
  const double upper = (offset + 0.5) / sigma;
  const double lower = (offset - 0.5) / sigma;
  // erfc-based form keeps precision in the tails.
  double p;
  if (offset >= 0) {
    p = 0.5 * (std::erfc(lower * kInvSqrt2) - std::erfc(upper * kInvSqrt2));
  } else {
    p = 0.5 * (std::erfc(-upper * kInvSqrt2) - std::erfc(-lower * kInvSqrt2));
  }
  return p;
}

BitsResult GaussianBits(Tape& t, Var y, Var mean, Var scale) {
  RDC_CHECK(SameShape(t.value(y).shape, t.value(mean).shape), ContractError,
            "GaussianBits: mean shape mismatch");
  RDC_CHECK(SameShape(t.value(y).shape, t.value(scale).shape), ContractError,
            "GaussianBits: scale shape mismatch");
  Var sigma = t.ClampMin(scale, kScaleFloor);
  Var centered = t.Sub(y, mean);
  Var upper = t.Div(t.AddScalar(centered, 0.5), sigma);
  Var lower = t.Div(t.AddScalar(centered, -0.5), sigma);
  Var p = t.MulScalar(t.Sub(t.Erf(t.MulScalar(upper, kInvSqrt2)),
                            t.Erf(t.MulScalar(lower, kInvSqrt2))),
                      0.5);
  Var floored = t.ClampMin(p, kProbFloor);
  Var bits = t.MulScalar(t.SumAll(t.Log(floored)), -kInvLn2);
  return BitsResult{bits, floored};
}

// ---------------------------------------------------------------------------
// FactorizedPrior
// ---------------------------------------------------------------------------

namespace {
// Univariate network widths per channel.
constexpr int kFactorizedDims[] = {1, 3, 3, 3, 1};
constexpr int kFactorizedLayers = 4;
constexpr double kFactorizedInitScale = 10.0;
}  // namespace

FactorizedPrior::FactorizedPrior(LayerCtx& ctx, int channels)
    : channels_(channels) {
  const double layer_scale =
      std::pow(kFactorizedInitScale, 1.0 / kFactorizedLayers);
  for (int k = 0; k < kFactorizedLayers; ++k) {
    const int din = kFactorizedDims[k], dout = kFactorizedDims[k + 1];
    const double mat_init = std::log(std::expm1(1.0 / layer_scale / dout));
    Tensor mat = Tensor::Full({channels, dout, din}, mat_init);
    Tensor bias({channels, dout});
    for (auto& v : bias.data) v = ctx.rng->NextUniform(-0.5, 0.5);
    mats_.push_back(ctx.reg->Add(ctx.Name("prior.h" + std::to_string(k)),
                                 std::move(mat)));
    biases_.push_back(ctx.reg->Add(ctx.Name("prior.b" + std::to_string(k)),
                                   std::move(bias)));
    if (k + 1 < kFactorizedLayers) {
      gates_.push_back(ctx.reg->Add(ctx.Name("prior.a" + std::to_string(k)),
                                    Tensor::Zeros({channels, dout})));
    }

    // Inventory: the per-channel matrix as a grouped dense layer, the tanh
    // gate as a grouped 1->1 dense without bias.
    LayerRecord rec;
    rec.name = ctx.Name("prior.h" + std::to_string(k));
    rec.kind = LayerKind::kDense;
    rec.kernel = 1;
    rec.cin = channels * din;
    rec.cout = channels * dout;
    rec.groups = channels;
    rec.has_bias = true;
    rec.in_scale_log2 = rec.out_scale_log2 = 6;
    rec.scope = SpatialScope::kPerPixel;
    rec.phase = Phase::kShared;
    ctx.inv->records.push_back(rec);
    if (k + 1 < kFactorizedLayers) {
      LayerRecord gate = rec;
      gate.name = ctx.Name("prior.a" + std::to_string(k));
      gate.cin = gate.cout = channels * dout;
      gate.groups = channels * dout;
      gate.has_bias = false;
      ctx.inv->records.push_back(gate);
    }
  }
  ctx.inv->NoteUnpriced("factorized_tanh_gate");
}

Var FactorizedPrior::Logits(Tape& t, Var x) const {
  Var h = x;
  for (int k = 0; k < kFactorizedLayers; ++k) {
    Var mat = t.Softplus(t.Param(mats_[size_t(k)]));
    h = t.ChannelMatVec(mat, h);
    h = t.AddBcast(h, t.Param(biases_[size_t(k)]));
    if (k + 1 < kFactorizedLayers) {
      // g(u) = u + tanh(a) * tanh(u); |tanh(a)| < 1 keeps it monotone.
      Var gate = t.Tanh(t.Param(gates_[size_t(k)]));
      h = t.Add(h, t.MulBcast(t.Tanh(h), gate));
    }
  }
  return h;
}

BitsResult FactorizedPrior::Bits(Tape& t, Var z) const {
  const Tensor& v = t.value(z);
  RDC_CHECK(v.AllFinite(), NumericError, "factorized_bits: non-finite input");
  RDC_CHECK(v.shape.back() == channels_, ContractError,
            "factorized_bits: channel mismatch");
  const int64_t m = v.size() / channels_;
  Var flat = t.Reshape(z, {int(m), channels_, 1});
  Var upper = t.Sigmoid(Logits(t, t.AddScalar(flat, 0.5)));
  Var lower = t.Sigmoid(Logits(t, t.AddScalar(flat, -0.5)));
  Var p = t.Sub(upper, lower);
  Var floored = t.ClampMin(p, kProbFloor);
  Var bits = t.MulScalar(t.SumAll(t.Log(floored)), -kInvLn2);
  return BitsResult{bits, t.Reshape(floored, v.shape)};
}

double FactorizedPrior::Cdf(int channel, double x) const {
  RDC_CHECK(channel >= 0 && channel < channels_, ContractError,
            "FactorizedPrior::Cdf: bad channel");
  double h[3] = {x, 0, 0};
  int hd = 1;
  auto softplus = [](double v) {
    return v > 30.0 ? v : std::log1p(std::exp(v));
  };
  for (int k = 0; k < kFactorizedLayers; ++k) {
    const int din = kFactorizedDims[k], dout = kFactorizedDims[k + 1];
    const Tensor& mat = mats_[size_t(k)]->value;
    const Tensor& bias = biases_[size_t(k)]->value;
    double out[3] = {0, 0, 0};
    for (int o = 0; o < dout; ++o) {
      double s = bias[int64_t(channel) * dout + o];
      for (int i = 0; i < din; ++i) {
        s += softplus(mat[(int64_t(channel) * dout + o) * din + i]) * h[i];
      }
      out[o] = s;
    }
    if (k + 1 < kFactorizedLayers) {
      const Tensor& gate = gates_[size_t(k)]->value;
      for (int o = 0; o < dout; ++o) {
        out[o] += std::tanh(gate[int64_t(channel) * dout + o]) * std::tanh(out[o]);
      }
    }
    for (int o = 0; o < dout; ++o) h[o] = out[o];
    hd = dout;
    (void)hd;
  }
  double logit = h[0];
  return logit >= 0 ? 1.0 / (1.0 + std::exp(-logit))
                    : std::exp(logit) / (1.0 + std::exp(logit));
}

// ---------------------------------------------------------------------------
// Hyperprior heads
// ---------------------------------------------------------------------------

EntropyParamsVars HyperpriorParams(Tape& t, Var u, int latent_depth) {
  const Tensor& v = t.value(u);
  RDC_CHECK(v.shape.back() == 2 * latent_depth, ContractError,
            "HyperpriorParams: expected 2*C_y channels");
  Var mean = t.SliceLast(u, 0, latent_depth);
  Var scale = t.AddScalar(
      t.Softplus(t.SliceLast(u, latent_depth, 2 * latent_depth)), kScaleFloor);
  return EntropyParamsVars{mean, scale};
}

// ---------------------------------------------------------------------------
// CharmEntropy
// ---------------------------------------------------------------------------

CharmEntropy::CharmEntropy(const ModelConfig& cfg, LayerCtx& ctx) : cfg_(cfg) {
  RDC_CHECK(cfg.entropy_family == EntropyFamily::kCharm, ConfigError,
            "CharmEntropy requires entropy_family = charm");
  const int n = cfg.num_slices;
  const int s = cfg.SliceChannels();
  const int cu = cfg.HyperFeatureChannels();
  const int feat = cfg.hyper_split == HyperSplit::kPerSlice ? cu / n : cu;
  const int hidden = cfg.CharmHiddenWidth();

  if (cfg.hyper_split == HyperSplit::kPerSlice) {
    for (int i = 0; i < n; ++i) {
      split_heads_.push_back(MakeConv(
          ctx, "split_head" + std::to_string(i), 3, cu, feat, 1, 4));
    }
  }
  for (int i = 0; i < n; ++i) {
    auto net = std::make_shared<Sequence>();
    const int cin = feat + i * s;
    const std::string base = "slice" + std::to_string(i);
    net->Append(MakeConv(ctx, base + ".c0", 3, cin, hidden, 1, 4));
    net->Append(std::make_shared<LeakyReluBlock>(0.01));
    net->Append(MakeConv(ctx, base + ".c1", 3, hidden, hidden, 1, 4));
    net->Append(std::make_shared<LeakyReluBlock>(0.01));
    net->Append(MakeConv(ctx, base + ".out", 1, hidden, 3 * s, 1, 4));
    slice_nets_.push_back(net);
  }
  ctx.inv->NoteUnpriced("leaky_relu");
  ctx.inv->NoteUnpriced("softplus_scale");
  if (cfg.lrp_merge == LrpMerge::kConcat1x1) {
    for (int i = 0; i < n; ++i) {
      // Initialized to the identity embedding [I | 0] with zero bias, so the
      // merge starts as a pass-through of the decoded slice.
      Tensor w({1, 1, 2 * s, s});
      for (int j = 0; j < s; ++j) w.at(0, 0, j, j) = 1.0;
      const std::string name = "lrp_merge" + std::to_string(i);
      Parameter* pw = ctx.reg->Add(ctx.Name(name) + ".w", std::move(w));
      Parameter* pb = ctx.reg->Add(ctx.Name(name) + ".b", Tensor::Zeros({s}));
      merge_w_.push_back(pw);
      merge_b_.push_back(pb);
      LayerRecord rec;
      rec.name = ctx.Name(name);
      rec.kind = LayerKind::kConv;
      rec.kernel = 1;
      rec.cin = 2 * s;
      rec.cout = s;
      rec.has_bias = true;
      rec.in_scale_log2 = rec.out_scale_log2 = 4;
      rec.phase = Phase::kDecodeOnly;
      ctx.inv->records.push_back(rec);
    }
  }
}

std::vector<Var> CharmEntropy::SplitHyperFeatures(Tape& t, Var u) const {
  const Tensor& v = t.value(u);
  const int cu = cfg_.HyperFeatureChannels();
  RDC_CHECK(v.shape.back() == cu, ContractError,
            "SplitHyperFeatures: expected C_u channels");
  std::vector<Var> out;
  if (cfg_.hyper_split == HyperSplit::kSingle) {
    out.assign(size_t(cfg_.num_slices), u);
    return out;
  }
  RDC_CHECK(cu % cfg_.num_slices == 0, ConfigError,
            "C_u must be divisible by num_slices");
  for (const auto& head : split_heads_) out.push_back(head->Forward(t, u));
  return out;
}

CharmEntropy::SliceParams CharmEntropy::ParamsForSlice(
    Tape& t, int i, Var hyper_feat_i, const std::vector<Var>& decoded_prev) const {
  RDC_CHECK(i >= 0 && i < cfg_.num_slices, ContractError,
            "ParamsForSlice: slice index out of range");
  RDC_CHECK(int(decoded_prev.size()) == i, ContractError,
            "ParamsForSlice: causality violation - slice " + std::to_string(i) +
                " conditioned on " + std::to_string(decoded_prev.size()) +
                " decoded slices");
  std::vector<Var> parts{hyper_feat_i};
  parts.insert(parts.end(), decoded_prev.begin(), decoded_prev.end());
  Var ctx_in = parts.size() == 1 ? parts[0] : t.ConcatLast(parts);
  Var out = slice_nets_[size_t(i)]->Forward(t, ctx_in);
  const int s = cfg_.SliceChannels();
  Var mean = t.SliceLast(out, 0, s);
  Var scale = t.AddScalar(t.Softplus(t.SliceLast(out, s, 2 * s)), kScaleFloor);
  Var lrp = t.SliceLast(out, 2 * s, 3 * s);
  return SliceParams{mean, scale, lrp};
}

Var CharmEntropy::MergeLrp(Tape& t, int i, Var decoded_slice, Var lrp) const {
  RDC_CHECK(SameShape(t.value(decoded_slice).shape, t.value(lrp).shape),
            ContractError, "MergeLrp: shape mismatch");
  if (cfg_.lrp_merge == LrpMerge::kAdd) {
    return t.Add(decoded_slice, lrp);
  }
  Var cat = t.ConcatLast({decoded_slice, lrp});
  return t.Conv2d(cat, t.Param(merge_w_[size_t(i)]),
                  t.Param(merge_b_[size_t(i)]), ConvGeom{});
}

Parameter* CharmEntropy::merge_weight(int i) const {
  return merge_w_.empty() ? nullptr : merge_w_[size_t(i)];
}

Parameter* CharmEntropy::merge_bias(int i) const {
  return merge_b_.empty() ? nullptr : merge_b_[size_t(i)];
}

Var MergeLrpAdd(Tape& t, Var decoded_slice, Var lrp) {
  RDC_CHECK(SameShape(t.value(decoded_slice).shape, t.value(lrp).shape),
            ContractError, "MergeLrpAdd: shape mismatch");
  return t.Add(decoded_slice, lrp);
}

}  // namespace rdc
