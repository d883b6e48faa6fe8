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

#include "rdc/model.h"

namespace rdc {

CompressionModel::CompressionModel(const ModelConfig& cfg, uint64_t init_seed)
    : cfg_(cfg), registry_(std::make_shared<ParamRegistry>()) {
  cfg_.Validate();
  Rng rng(init_seed ^ cfg_.IdentityHash());
  analysis_ = BuildAnalysis(cfg_, registry_.get(), &rng);
  synthesis_ = BuildSynthesis(cfg_, registry_.get(), &rng);
  hyper_analysis_ = BuildHyperAnalysis(cfg_, registry_.get(), &rng);
  hyper_synthesis_ = BuildHyperSynthesis(cfg_, registry_.get(), &rng);
  LayerCtx ctx{registry_.get(), &entropy_inventory_, &rng, Phase::kShared,
               "entropy"};
  prior_ = std::make_unique<FactorizedPrior>(ctx, cfg_.hyper_depth);
  if (cfg_.entropy_family == EntropyFamily::kCharm) {
    LayerCtx charm_ctx{registry_.get(), &entropy_inventory_, &rng,
                       Phase::kDecodeOnly, "entropy"};
    charm_ = std::make_unique<CharmEntropy>(cfg_, charm_ctx);
  }
  // Every transform shares the model registry.
  analysis_.owned_registry = registry_;
  synthesis_.owned_registry = registry_;
  hyper_analysis_.owned_registry = registry_;
  hyper_synthesis_.owned_registry = registry_;
}

LayerInventory CompressionModel::FullInventory() const {
  LayerInventory inv;
  inv.Append(analysis_.inventory);
  inv.Append(hyper_analysis_.inventory);
  inv.Append(hyper_synthesis_.inventory);
  inv.Append(entropy_inventory_);
  inv.Append(synthesis_.inventory);
  return inv;
}

CompressionModel::TrainResult CompressionModel::TrainForward(Tape& t,
                                                             const Tensor& images01,
                                                             Rng& noise_rng) {
  RDC_CHECK(images01.ndim() == 4 && images01.c() == 3, ContractError,
            "TrainForward: expected NHWC RGB batch");
  RDC_CHECK(images01.AllFinite(), NumericError, "TrainForward: non-finite input");
  const int64_t num_pixels = int64_t(images01.n()) * images01.h() * images01.w();

  Var x = t.Constant(images01);
  Var y = analysis_.Forward(t, x);
  Var z = hyper_analysis_.Forward(t, y);

  auto noise_like = [&](const Tensor& v) {
    Tensor u(v.shape);
    for (auto& e : u.data) e = noise_rng.NextUniform(-0.5, 0.5);
    return u;
  };
  Var z_tilde = t.Add(z, t.Constant(noise_like(t.value(z))));
  Var y_tilde = t.Add(y, t.Constant(noise_like(t.value(y))));

  BitsResult bits_z = prior_->Bits(t, z_tilde);
  Var u = hyper_synthesis_.Forward(t, z_tilde);

  Var bits_y;
  Var y_dec;
  if (cfg_.entropy_family == EntropyFamily::kHyperprior) {
    EntropyParamsVars ep = HyperpriorParams(t, u, cfg_.latent_depth);
    bits_y = GaussianBits(t, y_tilde, ep.mean, ep.scale).total_bits;
    y_dec = y_tilde;
  } else {
    std::vector<Var> feats = charm_->SplitHyperFeatures(t, u);
    std::vector<Var> refined;
    const int s = cfg_.SliceChannels();
    for (int i = 0; i < cfg_.num_slices; ++i) {
      Var y_i = t.SliceLast(y_tilde, i * s, (i + 1) * s);
      CharmEntropy::SliceParams sp =
          charm_->ParamsForSlice(t, i, feats[size_t(i)], refined);
      Var bits_i = GaussianBits(t, y_i, sp.mean, sp.scale).total_bits;
      bits_y = bits_y.valid() ? t.Add(bits_y, bits_i) : bits_i;
      refined.push_back(charm_->MergeLrp(t, i, y_i, sp.lrp));
    }
    y_dec = t.ConcatLast(refined);
  }

  Var x_hat = synthesis_.Forward(t, y_dec);
  Var mse255 = t.MulScalar(t.MeanAll(t.Square(t.Sub(x, x_hat))), 255.0 * 255.0);
  Var bpp = t.MulScalar(t.Add(bits_z.total_bits, bits_y),
                        1.0 / double(num_pixels));
  Var loss = t.Add(bpp, t.MulScalar(mse255, cfg_.lambda));
  return TrainResult{loss, bpp, mse255};
}

}  // namespace rdc
