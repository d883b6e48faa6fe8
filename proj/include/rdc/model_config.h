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

#ifndef RDC_MODEL_CONFIG_H_
#define RDC_MODEL_CONFIG_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace rdc {

enum class TransformFamily { kConv, kElic, kSwint };
enum class EntropyFamily { kHyperprior, kCharm };
enum class HyperFamily { kConv, kSwint };
enum class LrpMerge { kAdd, kConcat1x1 };
enum class HyperSplit { kSingle, kPerSlice };

// Declarative model description. Serializes to a sorted flat key-value text
// document; the first 8 bytes of its SHA-256 are the model identity hash
// carried in every bitstream and checkpoint.
struct ModelConfig {
  TransformFamily transform_family = TransformFamily::kElic;
  EntropyFamily entropy_family = EntropyFamily::kCharm;
  HyperFamily hyper_family = HyperFamily::kSwint;
  std::array<int, 3> analysis_depths = {128, 256, 256};
  int latent_depth = 320;  // C_y
  int hyper_depth = 192;   // C_z
  int num_residual_blocks = 2;
  int num_slices = 10;  // N
  LrpMerge lrp_merge = LrpMerge::kConcat1x1;
  HyperSplit hyper_split = HyperSplit::kPerSlice;
  int swint_window = 8;
  std::array<int, 4> swint_stage_depths = {2, 2, 6, 2};
  std::array<int, 4> swint_stage_widths = {96, 128, 160, 320};
  int charm_hidden = 0;  // 0 = derive from slice width
  double lambda = 0.0125;

  // Stacked-convolution baseline (four stride-2 convolutions per side with
  // GDN, scale hyperprior widths).
  static ModelConfig ConvHyperprior();
  // The improved CHARM-based variant ("model B" shape).
  static ModelConfig ModelB();

  void Validate() const;  // throws ConfigError

  std::string Serialize() const;
  static ModelConfig Parse(const std::string& text);
  static ModelConfig Load(const std::string& path);

  uint64_t IdentityHash() const;

  int SliceChannels() const { return latent_depth / num_slices; }
  int HyperFeatureChannels() const { return 2 * latent_depth; }  // C_u
  int CharmHiddenWidth() const;
};

std::string TransformFamilyName(TransformFamily f);
std::string EntropyFamilyName(EntropyFamily f);
std::string HyperFamilyName(HyperFamily f);

}  // namespace rdc

#endif  // RDC_MODEL_CONFIG_H_
