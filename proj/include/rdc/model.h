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

#ifndef RDC_MODEL_H_
#define RDC_MODEL_H_

#include <memory>
#include <optional>

#include "rdc/entropy.h"
#include "rdc/models.h"

namespace rdc {

// A complete compression model: the four transforms, the factorized prior
// for the hyper-latent, and the conditional entropy pipeline for the latent.
// Immutable after construction except for parameter values (training needs
// exclusive access; concurrent read-only inference is safe).
class CompressionModel {
 public:
  CompressionModel(const ModelConfig& cfg, uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  ParamRegistry& params() { return *registry_; }
  const ParamRegistry& params() const { return *registry_; }

  const TransformHandle& analysis() const { return analysis_; }
  const TransformHandle& synthesis() const { return synthesis_; }
  const TransformHandle& hyper_analysis() const { return hyper_analysis_; }
  const TransformHandle& hyper_synthesis() const { return hyper_synthesis_; }
  const FactorizedPrior& prior() const { return *prior_; }
  const CharmEntropy* charm() const { return charm_.get(); }

  // Complete layer inventory in pipeline order.
  LayerInventory FullInventory() const;

  struct TrainResult {
    Var loss;      // bpp + lambda * mse255
    Var bpp;       // estimated bits per pixel (latent + hyper-latent)
    Var mse255;    // mean squared error on the 0..255 scale
  };
  // Training-mode forward pass with uniform-noise quantization. `images01`
  // is an NHWC batch in [0,1] with H,W multiples of 64. Noise is drawn from
  // `noise_rng` for reproducibility.
  TrainResult TrainForward(Tape& t, const Tensor& images01, Rng& noise_rng);

 private:
  ModelConfig cfg_;
  std::shared_ptr<ParamRegistry> registry_;
  TransformHandle analysis_, synthesis_, hyper_analysis_, hyper_synthesis_;
  std::unique_ptr<FactorizedPrior> prior_;
  std::unique_ptr<CharmEntropy> charm_;
  LayerInventory entropy_inventory_;
};

}  // namespace rdc

#endif  // RDC_MODEL_H_
