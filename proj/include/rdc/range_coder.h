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

#ifndef RDC_RANGE_CODER_H_
#define RDC_RANGE_CODER_H_

#include <cstdint>
#include <string>

#include "rdc/base.h"

namespace rdc {

// Byte-oriented range coder with 16-bit frequency precision and carry-less
// renormalization: instead of propagating carries, the encoder shrinks the
// range whenever the top bytes of low and low+range disagree and the range
// has fallen below the frequency resolution. Worst-case overhead is a few
// hundredths of a bit per renormalization, far below the coder-efficiency
// budget.
class RangeEncoder {
 public:
  static constexpr uint32_t kProbBits = 16;
  static constexpr uint32_t kProbScale = 1u << kProbBits;

  // Encodes a symbol occupying [cum, cum+freq) of the 16-bit total.
  void Encode(uint32_t cum, uint32_t freq);

  // Flushes and returns the byte stream. The encoder is spent afterwards.
  std::string Finish();

  size_t ByteCount() const { return bytes_.size(); }

 private:
  void Normalize();

  std::string bytes_;
  uint32_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  bool finished_ = false;
};

class RangeDecoder {
 public:
  RangeDecoder(const uint8_t* data, size_t size);
  explicit RangeDecoder(const std::string& bytes);

  // Returns a value in [0, 2^16) locating the next symbol's interval.
  uint32_t DecodeTarget();
  // Consumes the symbol occupying [cum, cum+freq).
  void Advance(uint32_t cum, uint32_t freq);

  size_t BytesConsumed() const { return pos_; }

 private:
  void Normalize();
  uint8_t NextByte();

  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
  uint32_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t code_ = 0;
};

}  // namespace rdc

#endif  // RDC_RANGE_CODER_H_
