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

#ifndef RDC_ENTROPY_H_
#define RDC_ENTROPY_H_

#include <vector>

#include "rdc/model_config.h"
#include "rdc/nn.h"

namespace rdc {

// Coding-stability floors (the paper inherits them silently).
constexpr double kScaleFloor = 1e-6;
constexpr double kProbFloor = 1.0 / 65536.0;  // 2^-16

struct BitsResult {
  Var total_bits;  // scalar
  Var probs;       // per-element probabilities, same shape as the input
};

// Discretized conditional Gaussian: p(y|mu,sigma) is the unit-bin integral
// of N(mu, sigma^2) around y, floored at 2^-16.
BitsResult GaussianBits(Tape& t, Var y, Var mean, Var scale);

// Plain-double evaluation of the same bin integral (shared by the CDF-table
// builder so estimates and tables agree).
double GaussianBinProb(double offset, double sigma);

// Per-channel learned monotone CDF (deep factorized prior). Each channel
// owns a tiny univariate network 1->3->3->3->1 with softplus-positive
// matrices and bounded tanh gates, so its CDF is strictly monotone.
class FactorizedPrior {
 public:
  FactorizedPrior(LayerCtx& ctx, int channels);

  // z is NHWC with C == channels; accepts integer (eval) or noisy
  // (training) values. Throws NumericError on non-finite input.
  BitsResult Bits(Tape& t, Var z) const;

  // Eval-only CDF value for one channel (table building).
  double Cdf(int channel, double x) const;

  int channels() const { return channels_; }

 private:
  Var Logits(Tape& t, Var x) const;  // x (M,C,1) -> (M,C,1)

  int channels_;
  std::vector<Parameter*> mats_;     // (C, d_out, d_in)
  std::vector<Parameter*> biases_;   // (C, d_out)
  std::vector<Parameter*> gates_;    // (C, d_out), one fewer than mats_
};

struct EntropyParamsVars {
  Var mean;
  Var scale;
};

// Mean/scale heads of the hyperprior family: a single non-autoregressive
// pass over the hyper-synthesis output u (channels 2*C_y).
EntropyParamsVars HyperpriorParams(Tape& t, Var u, int latent_depth);

// The channel-wise autoregressive pipeline: N latent slices decoded in
// order, each conditioned on its hyper-feature tensor and the previously
// decoded slices, with a latent-residual prediction merged per slice.
class CharmEntropy {
 public:
  CharmEntropy(const ModelConfig& cfg, LayerCtx& ctx);

  // Applies the N independent projection heads (or fans out the unsplit
  // features when hyper_split = single).
  std::vector<Var> SplitHyperFeatures(Tape& t, Var u) const;

  struct SliceParams {
    Var mean;
    Var scale;
    Var lrp;
  };
  // Strictly causal: reads hyper features for slice i and decoded slices
  // 0..i-1 only. decoded_prev.size() must equal i.
  SliceParams ParamsForSlice(Tape& t, int i, Var hyper_feat_i,
                             const std::vector<Var>& decoded_prev) const;

  // Refines a decoded slice with its LRP tensor per the configured mode.
  Var MergeLrp(Tape& t, int i, Var decoded_slice, Var lrp) const;

  int num_slices() const { return cfg_.num_slices; }

  // Test hook: the 1x1 merge convolution weights of slice i (null in add mode).
  Parameter* merge_weight(int i) const;
  Parameter* merge_bias(int i) const;

 private:
  ModelConfig cfg_;
  std::vector<BlockPtr> split_heads_;
  std::vector<BlockPtr> slice_nets_;
  std::vector<Parameter*> merge_w_;
  std::vector<Parameter*> merge_b_;
};

// Elementwise-add merge for callers without a learned merge layer.
Var MergeLrpAdd(Tape& t, Var decoded_slice, Var lrp);

}  // namespace rdc

#endif  // RDC_ENTROPY_H_
