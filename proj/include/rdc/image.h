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

#ifndef RDC_IMAGE_H_
#define RDC_IMAGE_H_

#include <cstdint>
#include <string>
#include <vector>

#include "rdc/tensor.h"

namespace rdc {

// 8-bit interleaved RGB image.
struct ImageU8 {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> rgb;  // height * width * 3

  ImageU8() = default;
  ImageU8(int h, int w) : height(h), width(w), rgb(size_t(h) * w * 3, 0) {}

  uint8_t& at(int y, int x, int c) {
    return rgb[(size_t(y) * width + x) * 3 + size_t(c)];
  }
  uint8_t at(int y, int x, int c) const {
    return rgb[(size_t(y) * width + x) * 3 + size_t(c)];
  }
  int64_t Pixels() const { return int64_t(height) * width; }
  bool operator==(const ImageU8& o) const {
    return height == o.height && width == o.width && rgb == o.rgb;
  }
};

ImageU8 ReadPng(const std::string& path);
void WritePng(const std::string& path, const ImageU8& image);

// (1,H,W,3) tensor in [0,1].
Tensor ImageToTensor(const ImageU8& image);
// Rounds to 8 bits with clamping.
ImageU8 TensorToImage(const Tensor& t);

}  // namespace rdc

#endif  // RDC_IMAGE_H_
