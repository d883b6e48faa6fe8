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

#ifndef RDC_TENSOR_H_
#define RDC_TENSOR_H_

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "rdc/base.h"

namespace rdc {

using Shape = std::vector<int>;

int64_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);

// Dense row-major double tensor. Images and feature maps use NHWC layout.
// All model math runs in double; it keeps the gradient checks and the
// coder-side determinism simple, and the desk-scale models are small enough
// that the 2x memory cost does not matter.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), data(size_t(NumElements(shape)), 0.0) {}
  Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    RDC_CHECK(int64_t(data.size()) == NumElements(shape), ContractError,
              "tensor data size does not match shape " + ShapeToString(shape));
  }

  static Tensor Zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor Full(Shape s, double v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }
  static Tensor Scalar(double v) { return Tensor({1}, {v}); }

  int64_t size() const { return int64_t(data.size()); }
  int ndim() const { return int(shape.size()); }
  int dim(int i) const { return shape[size_t(i)]; }
  bool empty() const { return data.empty(); }

  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }

  double& operator[](int64_t i) { return data[size_t(i)]; }
  double operator[](int64_t i) const { return data[size_t(i)]; }

  // NHWC accessors (valid when ndim() == 4).
  int n() const { return shape[0]; }
  int h() const { return shape[1]; }
  int w() const { return shape[2]; }
  int c() const { return shape[3]; }
  double& at(int in, int ih, int iw, int ic) {
    return data[size_t(((int64_t(in) * h() + ih) * w() + iw) * c() + ic)];
  }
  double at(int in, int ih, int iw, int ic) const {
    return data[size_t(((int64_t(in) * h() + ih) * w() + iw) * c() + ic)];
  }

  bool AllFinite() const;
  double MaxAbs() const;
};

bool SameShape(const Shape& a, const Shape& b);

}  // namespace rdc

#endif  // RDC_TENSOR_H_
