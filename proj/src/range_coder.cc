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

#include "rdc/range_coder.h"

namespace rdc {

namespace {
constexpr uint32_t kTop = 1u << 24;
constexpr uint32_t kBot = 1u << 16;
}  // namespace

void RangeEncoder::Encode(uint32_t cum, uint32_t freq) {
  RDC_CHECK(!finished_, ContractError, "RangeEncoder already finished");
  RDC_CHECK(freq > 0 && cum + freq <= kProbScale, ContractError,
            "range encode: symbol interval outside the 16-bit total");
  const uint32_t r = range_ / kProbScale;
  low_ += cum * r;
  range_ = freq * r;
  Normalize();
}

void RangeEncoder::Normalize() {
  while ((low_ ^ (low_ + range_)) < kTop ||
         (range_ < kBot && ((range_ = (~low_ + 1) & (kBot - 1)), true))) {
    bytes_.push_back(char(low_ >> 24));
    low_ <<= 8;
    range_ <<= 8;
  }
}

std::string RangeEncoder::Finish() {
  RDC_CHECK(!finished_, ContractError, "RangeEncoder already finished");
  finished_ = true;
  for (int i = 0; i < 4; ++i) {
    bytes_.push_back(char(low_ >> 24));
    low_ <<= 8;
  }
  return std::move(bytes_);
}

RangeDecoder::RangeDecoder(const uint8_t* data, size_t size)
    : data_(data), size_(size) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | NextByte();
}

RangeDecoder::RangeDecoder(const std::string& bytes)
    : RangeDecoder(reinterpret_cast<const uint8_t*>(bytes.data()),
                   bytes.size()) {}

uint8_t RangeDecoder::NextByte() {
  if (pos_ >= size_) {
    throw DecodeError("range decode: truncated payload (" +
                      std::to_string(size_) + " bytes)");
  }
  return data_[pos_++];
}

uint32_t RangeDecoder::DecodeTarget() {
  const uint32_t r = range_ / kProbScale;
  uint32_t v = (code_ - low_) / r;
  // The last interval absorbs the rounding slack of range/2^16.
  return v >= kProbScale ? kProbScale - 1 : v;
}

void RangeDecoder::Advance(uint32_t cum, uint32_t freq) {
  RDC_CHECK(freq > 0 && cum + freq <= kProbScale, ContractError,
            "range decode: symbol interval outside the 16-bit total");
  const uint32_t r = range_ / kProbScale;
  low_ += cum * r;
  range_ = freq * r;
  Normalize();
}

void RangeDecoder::Normalize() {
  while ((low_ ^ (low_ + range_)) < kTop ||
         (range_ < kBot && ((range_ = (~low_ + 1) & (kBot - 1)), true))) {
    code_ = (code_ << 8) | NextByte();
    low_ <<= 8;
    range_ <<= 8;
  }
}

namespace {
constexpr uint32_t kProbScaleCheck = RangeEncoder::kProbScale;
static_assert(kProbScaleCheck == kBot, "precision must match renorm bound");
}  // namespace

}  // namespace rdc
