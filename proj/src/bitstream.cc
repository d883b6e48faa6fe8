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

#include "rdc/bitstream.h"

#include "rdc/base.h"
#include "rdc/util.h"

namespace rdc {

namespace {

constexpr char kMagic[4] = {'R', 'D', 'C', '1'};

void PutLE(std::string* out, uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out->push_back(char((v >> (8 * i)) & 0xff));
}

uint64_t GetLE(const std::string& in, size_t pos, int bytes) {
  uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= uint64_t(uint8_t(in[pos + size_t(i)])) << (8 * i);
  }
  return v;
}

}  // namespace

std::string Bitstream::Serialize() const {
  std::string out;
  out.reserve(TotalBytes());
  out.append(kMagic, 4);
  out.push_back(char(version));
  PutLE(&out, config_hash, 8);
  PutLE(&out, orig_height, 2);
  PutLE(&out, orig_width, 2);
  PutLE(&out, z_payload.size(), 4);
  out.append(z_payload);
  PutLE(&out, y_payload.size(), 4);
  out.append(y_payload);
  return out;
}

Bitstream Bitstream::Parse(const std::string& bytes) {
  if (bytes.size() < kHeaderBytes) {
    throw DecodeError("bitstream too short: " + std::to_string(bytes.size()) +
                      " bytes");
  }
  if (std::string(bytes, 0, 4) != std::string(kMagic, 4)) {
    throw DecodeError("bad magic; not an RDC1 bitstream");
  }
  Bitstream bs;
  size_t pos = 4;
  bs.version = uint8_t(bytes[pos]);
  pos += 1;
  if (bs.version != kVersion) {
    throw DecodeError("unsupported bitstream version " +
                      std::to_string(bs.version));
  }
  bs.config_hash = GetLE(bytes, pos, 8);
  pos += 8;
  bs.orig_height = uint16_t(GetLE(bytes, pos, 2));
  pos += 2;
  bs.orig_width = uint16_t(GetLE(bytes, pos, 2));
  pos += 2;
  uint32_t z_len = uint32_t(GetLE(bytes, pos, 4));
  pos += 4;
  if (pos + z_len + 4 > bytes.size()) {
    throw DecodeError("truncated bitstream: z payload exceeds container");
  }
  bs.z_payload = bytes.substr(pos, z_len);
  pos += z_len;
  uint32_t y_len = uint32_t(GetLE(bytes, pos, 4));
  pos += 4;
  if (pos + y_len != bytes.size()) {
    throw DecodeError("bitstream length mismatch: header says " +
                      std::to_string(pos + y_len) + " bytes, container has " +
                      std::to_string(bytes.size()));
  }
  bs.y_payload = bytes.substr(pos, y_len);
  return bs;
}

void Bitstream::Save(const std::string& path) const {
  WriteFile(path, Serialize());
}

Bitstream Bitstream::LoadFile(const std::string& path) {
  return Parse(ReadFile(path));
}

}  // namespace rdc
