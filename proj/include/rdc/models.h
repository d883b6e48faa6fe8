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

#ifndef RDC_MODELS_H_
#define RDC_MODELS_H_

#include <memory>
#include <string>

#include "rdc/model_config.h"
#include "rdc/nn.h"

namespace rdc {

// A built transform: an immutable forward network plus its layer inventory.
// Handles built standalone own their registry; handles built into a model
// share the model's.
struct TransformHandle {
  std::shared_ptr<ParamRegistry> owned_registry;  // null when shared
  BlockPtr net;
  LayerInventory inventory;
  int in_channels = 0;
  int out_channels = 0;
  int in_scale_log2 = 0;   // log2 downsampling of the input vs. the image
  int out_scale_log2 = 0;

  // Runs the transform; checks the spatial contract of the input.
  Var Forward(Tape& t, Var x) const;
};

// Image (H,W,3), H and W multiples of 64 -> latent (H/16, W/16, C_y).
TransformHandle BuildAnalysis(const ModelConfig& cfg, ParamRegistry* reg,
                              Rng* rng);
// Latent -> image-range reconstruction (clamping is the caller's eval-time
// concern; the network output is unbounded).
TransformHandle BuildSynthesis(const ModelConfig& cfg, ParamRegistry* reg,
                               Rng* rng);
// Latent (h,w,C_y), h and w multiples of 4 -> hyper-latent (h/4, w/4, C_z).
TransformHandle BuildHyperAnalysis(const ModelConfig& cfg, ParamRegistry* reg,
                                   Rng* rng);
// Hyper-latent -> hyper features (h, w, C_u); C_u = 2*C_y for both entropy
// families (mean/scale heads for the hyperprior, split-head input for charm).
TransformHandle BuildHyperSynthesis(const ModelConfig& cfg, ParamRegistry* reg,
                                    Rng* rng);

// Standalone builders (own their registry; deterministic in `seed`).
TransformHandle BuildAnalysis(const ModelConfig& cfg, uint64_t seed = 1);
TransformHandle BuildSynthesis(const ModelConfig& cfg, uint64_t seed = 1);

}  // namespace rdc

#endif  // RDC_MODELS_H_
