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

#ifndef RDC_LAYER_INVENTORY_H_
#define RDC_LAYER_INVENTORY_H_

#include <cstdint>
#include <string>
#include <vector>

namespace rdc {

enum class LayerKind { kConv, kTConv, kDense, kAttentionQkv, kAttentionMatmul };

enum class SpatialScope { kPerPixel, kWindowed };

enum class Phase { kEncodeOnly, kDecodeOnly, kShared };

std::string LayerKindName(LayerKind k);
std::string PhaseName(Phase p);
std::string SpatialScopeName(SpatialScope s);

// One parameterized layer (or priced matmul) of a built model. `cin`/`cout`
// are total channel counts; `groups` splits them into independent blocks
// (grouped dense is how the per-channel factorized-prior layers are priced).
// `in_scale_log2`/`out_scale_log2` give the layer's operating resolution as
// a log2 downsampling factor relative to the reconstructed image.
struct LayerRecord {
  std::string name;
  LayerKind kind = LayerKind::kConv;
  int kernel = 1;
  int cin = 0;
  int cout = 0;
  int stride = 1;
  int groups = 1;
  bool has_bias = false;
  int window = 0;  // attention_matmul only: window side length in tokens
  int in_scale_log2 = 0;
  int out_scale_log2 = 0;
  SpatialScope scope = SpatialScope::kPerPixel;
  Phase phase = Phase::kShared;

  // Trainable values implied by the record's geometry.
  int64_t ParamCount() const;
};

struct LayerInventory {
  std::vector<LayerRecord> records;
  // Op families excluded from FLOPs totals (activations, normalizations,
  // softmax, padding); surfaced so reports can itemize them.
  std::vector<std::string> unpriced_ops;

  int64_t TotalParams() const;
  void Append(const LayerInventory& other);
  void NoteUnpriced(const std::string& op);
};

}  // namespace rdc

#endif  // RDC_LAYER_INVENTORY_H_
