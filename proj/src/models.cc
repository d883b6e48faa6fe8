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

#include "rdc/models.h"

namespace rdc {

Var TransformHandle::Forward(Tape& t, Var x) const {
  const Tensor& v = t.value(x);
  RDC_CHECK(v.ndim() == 4, ContractError, "transform input must be NHWC");
  RDC_CHECK(v.c() == in_channels, ContractError,
            "transform input has " + std::to_string(v.c()) +
                " channels, expected " + std::to_string(in_channels));
  const int down = 1 << (out_scale_log2 - in_scale_log2 > 0
                             ? out_scale_log2 - in_scale_log2
                             : 0);
  if (in_scale_log2 == 0) {
    // Analysis side: the image must already be padded to multiples of 64 so
    // that the full pipeline (including the hyper stage) tiles exactly.
    if (v.h() % 64 != 0 || v.w() % 64 != 0) {
      throw PaddingRequiredError(
          "input dimensions " + std::to_string(v.h()) + "x" +
          std::to_string(v.w()) +
          " are not multiples of 64; reflection-pad the image first");
    }
  } else if (down > 1) {
    RDC_CHECK(v.h() % down == 0 && v.w() % down == 0, ContractError,
              "transform input does not tile by its stride");
  }
  return net->Forward(t, x);
}

namespace {

constexpr double kLeakySlope = 0.01;

void BuildConvAnalysis(const ModelConfig& cfg, LayerCtx& ctx, Sequence* seq) {
  const auto& d = cfg.analysis_depths;
  int chain[5] = {3, d[0], d[1], d[2], cfg.latent_depth};
  for (int i = 0; i < 4; ++i) {
    seq->Append(MakeConv(ctx, "down" + std::to_string(i), 5, chain[i],
                         chain[i + 1], 2, i));
    if (i < 3) {
      seq->Append(MakeGdn(ctx, "gdn" + std::to_string(i), chain[i + 1], i + 1,
                          /*inverse=*/false));
    }
  }
}

void BuildConvSynthesis(const ModelConfig& cfg, LayerCtx& ctx, Sequence* seq) {
  const auto& d = cfg.analysis_depths;
  int chain[5] = {cfg.latent_depth, d[2], d[1], d[0], 3};
  for (int i = 0; i < 4; ++i) {
    seq->Append(MakeTConv(ctx, "up" + std::to_string(i), 5, chain[i],
                          chain[i + 1], 2, 4 - i));
    if (i < 3) {
      seq->Append(MakeGdn(ctx, "igdn" + std::to_string(i), chain[i + 1],
                          3 - i, /*inverse=*/true));
    }
  }
}

void BuildElicAnalysis(const ModelConfig& cfg, LayerCtx& ctx, Sequence* seq) {
  const auto& d = cfg.analysis_depths;
  int chain[5] = {3, d[0], d[1], d[2], cfg.latent_depth};
  for (int i = 0; i < 4; ++i) {
    seq->Append(MakeConv(ctx, "down" + std::to_string(i), 5, chain[i],
                         chain[i + 1], 2, i));
    int scale = i + 1;
    if (i < 3) {
      for (int r = 0; r < cfg.num_residual_blocks; ++r) {
        seq->Append(MakeResidualBottleneck(
            ctx, "rb" + std::to_string(i) + "_" + std::to_string(r),
            chain[i + 1], scale));
      }
    }
    if (i == 1) seq->Append(MakeAttnGate(ctx, "attn0", chain[2], scale));
    if (i == 3) seq->Append(MakeAttnGate(ctx, "attn1", chain[4], scale));
  }
}

void BuildElicSynthesis(const ModelConfig& cfg, LayerCtx& ctx, Sequence* seq) {
  const auto& d = cfg.analysis_depths;
  int chain[5] = {cfg.latent_depth, d[2], d[1], d[0], 3};
  seq->Append(MakeAttnGate(ctx, "attn1", chain[0], 4));
  for (int i = 0; i < 4; ++i) {
    seq->Append(MakeTConv(ctx, "up" + std::to_string(i), 5, chain[i],
                          chain[i + 1], 2, 4 - i));
    int scale = 3 - i;
    if (i == 1) seq->Append(MakeAttnGate(ctx, "attn0", chain[2], scale));
    if (i < 3) {
      for (int r = 0; r < cfg.num_residual_blocks; ++r) {
        seq->Append(MakeResidualBottleneck(
            ctx, "rb" + std::to_string(2 - i) + "_" + std::to_string(r),
            chain[i + 1], scale));
      }
    }
  }
}

void BuildSwintAnalysis(const ModelConfig& cfg, LayerCtx& ctx, Sequence* seq) {
  const auto& w = cfg.swint_stage_widths;
  int prev = 3;
  for (int i = 0; i < 4; ++i) {
    seq->Append(MakeConv(ctx, "patch_merge" + std::to_string(i), 2, prev, w[i],
                         2, i, /*bias=*/true));
    for (int b = 0; b < cfg.swint_stage_depths[size_t(i)]; ++b) {
      seq->Append(MakeSwinBlock(
          ctx, "stage" + std::to_string(i) + "_blk" + std::to_string(b), w[i],
          cfg.swint_window, i + 1));
    }
    prev = w[i];
  }
}

void BuildSwintSynthesis(const ModelConfig& cfg, LayerCtx& ctx, Sequence* seq) {
  const auto& w = cfg.swint_stage_widths;
  for (int i = 3; i >= 0; --i) {
    for (int b = 0; b < cfg.swint_stage_depths[size_t(i)]; ++b) {
      seq->Append(MakeSwinBlock(
          ctx, "stage" + std::to_string(i) + "_blk" + std::to_string(b), w[i],
          cfg.swint_window, i + 1));
    }
    int next = i > 0 ? w[i - 1] : 3;
    seq->Append(MakeTConv(ctx, "patch_split" + std::to_string(i), 2, w[i],
                          next, 2, i + 1, /*bias=*/true));
  }
}

TransformHandle FinishHandle(std::shared_ptr<ParamRegistry> owned,
                             std::shared_ptr<Sequence> seq, LayerInventory inv,
                             int cin, int cout, int in_scale, int out_scale) {
  TransformHandle h;
  h.owned_registry = std::move(owned);
  h.net = std::move(seq);
  h.inventory = std::move(inv);
  h.in_channels = cin;
  h.out_channels = cout;
  h.in_scale_log2 = in_scale;
  h.out_scale_log2 = out_scale;
  return h;
}

}  // namespace

TransformHandle BuildAnalysis(const ModelConfig& cfg, ParamRegistry* reg,
                              Rng* rng) {
  cfg.Validate();
  LayerInventory inv;
  LayerCtx ctx{reg, &inv, rng, Phase::kEncodeOnly, "analysis"};
  auto seq = std::make_shared<Sequence>();
  switch (cfg.transform_family) {
    case TransformFamily::kConv: BuildConvAnalysis(cfg, ctx, seq.get()); break;
    case TransformFamily::kElic: BuildElicAnalysis(cfg, ctx, seq.get()); break;
    case TransformFamily::kSwint: BuildSwintAnalysis(cfg, ctx, seq.get()); break;
  }
  return FinishHandle(nullptr, seq, std::move(inv), 3, cfg.latent_depth, 0, 4);
}

TransformHandle BuildSynthesis(const ModelConfig& cfg, ParamRegistry* reg,
                               Rng* rng) {
  cfg.Validate();
  LayerInventory inv;
  LayerCtx ctx{reg, &inv, rng, Phase::kDecodeOnly, "synthesis"};
  auto seq = std::make_shared<Sequence>();
  switch (cfg.transform_family) {
    case TransformFamily::kConv: BuildConvSynthesis(cfg, ctx, seq.get()); break;
    case TransformFamily::kElic: BuildElicSynthesis(cfg, ctx, seq.get()); break;
    case TransformFamily::kSwint: BuildSwintSynthesis(cfg, ctx, seq.get()); break;
  }
  return FinishHandle(nullptr, seq, std::move(inv), cfg.latent_depth, 3, 4, 0);
}

TransformHandle BuildHyperAnalysis(const ModelConfig& cfg, ParamRegistry* reg,
                                   Rng* rng) {
  cfg.Validate();
  LayerInventory inv;
  LayerCtx ctx{reg, &inv, rng, Phase::kEncodeOnly, "hyper_analysis"};
  auto seq = std::make_shared<Sequence>();
  const int cy = cfg.latent_depth, cz = cfg.hyper_depth;
  if (cfg.hyper_family == HyperFamily::kConv) {
    seq->Append(MakeConv(ctx, "pre", 3, cy, cz, 1, 4));
    seq->Append(std::make_shared<LeakyReluBlock>(kLeakySlope));
    seq->Append(MakeConv(ctx, "down0", 5, cz, cz, 2, 4));
    seq->Append(std::make_shared<LeakyReluBlock>(kLeakySlope));
    seq->Append(MakeConv(ctx, "down1", 5, cz, cz, 2, 5));
    inv.NoteUnpriced("leaky_relu");
  } else {
    const int mid = 2 * cz;
    seq->Append(MakeConv(ctx, "patch_merge0", 2, cy, mid, 2, 4));
    seq->Append(MakeSwinBlock(ctx, "blk0", mid, cfg.swint_window, 5));
    seq->Append(MakeConv(ctx, "patch_merge1", 2, mid, cz, 2, 5));
    seq->Append(MakeSwinBlock(ctx, "blk1", cz, cfg.swint_window, 6));
  }
  return FinishHandle(nullptr, seq, std::move(inv), cy, cz, 4, 6);
}

TransformHandle BuildHyperSynthesis(const ModelConfig& cfg, ParamRegistry* reg,
                                    Rng* rng) {
  cfg.Validate();
  LayerInventory inv;
  LayerCtx ctx{reg, &inv, rng, Phase::kDecodeOnly, "hyper_synthesis"};
  auto seq = std::make_shared<Sequence>();
  const int cz = cfg.hyper_depth;
  const int cu = cfg.HyperFeatureChannels();
  if (cfg.hyper_family == HyperFamily::kConv) {
    const int mid = (3 * cz) / 2;
    seq->Append(MakeTConv(ctx, "up0", 5, cz, cz, 2, 6));
    seq->Append(std::make_shared<LeakyReluBlock>(kLeakySlope));
    seq->Append(MakeTConv(ctx, "up1", 5, cz, mid, 2, 5));
    seq->Append(std::make_shared<LeakyReluBlock>(kLeakySlope));
    seq->Append(MakeConv(ctx, "post", 3, mid, cu, 1, 4));
    inv.NoteUnpriced("leaky_relu");
  } else {
    const int mid = 2 * cz;
    seq->Append(MakeSwinBlock(ctx, "blk0", cz, cfg.swint_window, 6));
    seq->Append(MakeTConv(ctx, "patch_split0", 2, cz, mid, 2, 6));
    seq->Append(MakeSwinBlock(ctx, "blk1", mid, cfg.swint_window, 5));
    seq->Append(MakeTConv(ctx, "patch_split1", 2, mid, mid, 2, 5));
    seq->Append(MakeConv(ctx, "post", 3, mid, cu, 1, 4));
  }
  return FinishHandle(nullptr, seq, std::move(inv), cz, cu, 6, 4);
}

TransformHandle BuildAnalysis(const ModelConfig& cfg, uint64_t seed) {
  auto reg = std::make_shared<ParamRegistry>();
  Rng rng(seed);
  TransformHandle h = BuildAnalysis(cfg, reg.get(), &rng);
  h.owned_registry = reg;
  return h;
}

TransformHandle BuildSynthesis(const ModelConfig& cfg, uint64_t seed) {
  auto reg = std::make_shared<ParamRegistry>();
  Rng rng(seed);
  TransformHandle h = BuildSynthesis(cfg, reg.get(), &rng);
  h.owned_registry = reg;
  return h;
}

}  // namespace rdc
