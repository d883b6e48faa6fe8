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

#ifndef RDC_BITSTREAM_H_
#define RDC_BITSTREAM_H_

#include <cstdint>
#include <string>

namespace rdc {

// Self-describing compressed-image container. All header fields are
// little-endian:
//   magic "RDC1" | version u8 | config_hash u64 | orig_height u16 |
//   orig_width u16 | z_payload_len u32 | z_payload | y_payload_len u32 |
//   y_payload
struct Bitstream {
  static constexpr uint8_t kVersion = 1;
  static constexpr size_t kHeaderBytes = 4 + 1 + 8 + 2 + 2 + 4 + 4;

  uint8_t version = kVersion;
  uint64_t config_hash = 0;
  uint16_t orig_height = 0;
  uint16_t orig_width = 0;
  std::string z_payload;
  std::string y_payload;

  size_t TotalBytes() const {
    return kHeaderBytes + z_payload.size() + y_payload.size();
  }

  std::string Serialize() const;
  static Bitstream Parse(const std::string& bytes);  // throws DecodeError

  void Save(const std::string& path) const;
  static Bitstream LoadFile(const std::string& path);
};

}  // namespace rdc

#endif  // RDC_BITSTREAM_H_
