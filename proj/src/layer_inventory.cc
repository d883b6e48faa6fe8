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

#include "rdc/layer_inventory.h"

#include <algorithm>

namespace rdc {

std::string LayerKindName(LayerKind k) {
  switch (k) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kTConv: return "tconv";
    case LayerKind::kDense: return "dense";
    case LayerKind::kAttentionQkv: return "attention_qkv";
    case LayerKind::kAttentionMatmul: return "attention_matmul";
  }
  return "?";
}

std::string PhaseName(Phase p) {
  switch (p) {
    case Phase::kEncodeOnly: return "encode_only";
    case Phase::kDecodeOnly: return "decode_only";
    case Phase::kShared: return "shared";
  }
  return "?";
}

std::string SpatialScopeName(SpatialScope s) {
  return s == SpatialScope::kPerPixel ? "per_pixel" : "windowed";
}

int64_t LayerRecord::ParamCount() const {
  if (kind == LayerKind::kAttentionMatmul) return 0;
  int64_t weights = int64_t(kernel) * kernel * cin * cout / groups;
  return weights + (has_bias ? int64_t(cout) : 0);
}

int64_t LayerInventory::TotalParams() const {
  int64_t total = 0;
  for (const auto& rec : records) total += rec.ParamCount();
  return total;
}

void LayerInventory::Append(const LayerInventory& other) {
  records.insert(records.end(), other.records.begin(), other.records.end());
  for (const auto& op : other.unpriced_ops) NoteUnpriced(op);
}

void LayerInventory::NoteUnpriced(const std::string& op) {
  if (std::find(unpriced_ops.begin(), unpriced_ops.end(), op) ==
      unpriced_ops.end()) {
    unpriced_ops.push_back(op);
  }
}

}  // namespace rdc
