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

#ifndef RDC_CDF_H_
#define RDC_CDF_H_

#include <cstdint>
#include <string>
#include <vector>

#include "rdc/entropy.h"

namespace rdc {

// A discretized symbol table at 16-bit precision. Regular symbols cover the
// integer range [min_symbol, min_symbol + num_regular); the final index is
// an escape for outliers, which are then coded as a zigzag u32 with four
// uniform byte symbols. cdf has num_regular + 2 entries, cdf[0] == 0,
// cdf.back() == 2^16, strictly increasing.
struct CdfTable {
  int min_symbol = 0;
  std::vector<uint32_t> cdf;

  int num_regular() const { return int(cdf.size()) - 2; }
  int escape_index() const { return num_regular(); }
  bool InSupport(int64_t symbol) const {
    return symbol >= min_symbol && symbol < min_symbol + num_regular();
  }
  uint32_t Freq(int index) const {
    return cdf[size_t(index) + 1] - cdf[size_t(index)];
  }
  // -log2 of the quantized probability of an in-support symbol.
  double BitsOf(int64_t symbol) const;
  // Index of the symbol interval containing `target` (from DecodeTarget).
  int LookupTarget(uint32_t target) const;

  // Little-endian u32 export of the cdf array (coder handoff format).
  std::string ExportLE() const;
};

// Largest-remainder quantization of a pmf to a strictly increasing 16-bit
// cdf (every symbol keeps frequency >= 1). pmf entries must be >= 0; they
// are normalized to sum to 1.
CdfTable QuantizeCdf(const std::vector<double>& pmf, int min_symbol);

// Tail mass outside the regular symbol range of every table.
constexpr double kTailMass = 1.0 / 256.0;  // 2^-8

// 64 log-spaced scales spanning [scale_floor, 20] with per-scale tables of
// mean-centered Gaussian offsets.
class GaussianCdfSet {
 public:
  static constexpr int kNumScales = 64;
  static constexpr double kMaxScale = 20.0;

  GaussianCdfSet();

  // Nearest scale in log space (clamped).
  int IndexForScale(double sigma) const;
  double ScaleAt(int index) const { return scales_[size_t(index)]; }
  const CdfTable& TableAt(int index) const { return tables_[size_t(index)]; }

 private:
  std::vector<double> scales_;
  std::vector<CdfTable> tables_;
};

// Shared instance (deterministic and model-independent).
const GaussianCdfSet& SharedGaussianCdfSet();

// Per-channel tables for the learned factorized prior; support chosen so the
// tail mass outside is at most 2^-8 per side (capped at +-4096).
CdfTable BuildFactorizedTable(const FactorizedPrior& prior, int channel);
std::vector<CdfTable> BuildFactorizedTables(const FactorizedPrior& prior);

// 256 equiprobable byte symbols (outlier payload coding).
const CdfTable& UniformByteTable();

uint32_t ZigzagEncode(int64_t v);
int64_t ZigzagDecode(uint32_t v);

}  // namespace rdc

#endif  // RDC_CDF_H_
