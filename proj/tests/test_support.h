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

#ifndef RDC_TESTS_TEST_SUPPORT_H_
#define RDC_TESTS_TEST_SUPPORT_H_

#include <cmath>
#include <functional>
#include <vector>

#include "rdc/model_config.h"
#include "rdc/tensor.h"
#include "rdc/util.h"

namespace rdc_test {

// Central finite differences of a scalar function at x, one coordinate at a
// time. The step follows the usual cube-root-of-eps scaling.
inline std::vector<double> NumericGradient(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double step = 1e-5) {
  std::vector<double> g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    double saved = x[i];
    double h = step * std::max(1.0, std::fabs(saved));
    x[i] = saved + h;
    double fp = f(x);
    x[i] = saved - h;
    double fm = f(x);
    x[i] = saved;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Max relative error between two gradient vectors, with an absolute floor so
// near-zero entries do not blow up the ratio.
inline double MaxRelError(const std::vector<double>& a,
                          const std::vector<double>& b,
                          double abs_floor = 1e-7) {
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double denom = std::max({std::fabs(a[i]), std::fabs(b[i]), abs_floor});
    worst = std::max(worst, std::fabs(a[i] - b[i]) / denom);
  }
  return worst;
}

inline rdc::Tensor RandomTensor(rdc::Rng& rng, rdc::Shape shape, double lo,
                                double hi) {
  rdc::Tensor t(std::move(shape));
  for (auto& v : t.data) v = rng.NextUniform(lo, hi);
  return t;
}

// Tiny configs that keep desk-scale tests fast.
inline rdc::ModelConfig TinyConvHyperprior() {
  rdc::ModelConfig cfg = rdc::ModelConfig::ConvHyperprior();
  cfg.analysis_depths = {8, 8, 8};
  cfg.latent_depth = 8;
  cfg.hyper_depth = 4;
  return cfg;
}

inline rdc::ModelConfig TinyConvCharm(int slices = 2) {
  rdc::ModelConfig cfg = TinyConvHyperprior();
  cfg.entropy_family = rdc::EntropyFamily::kCharm;
  cfg.num_slices = slices;
  cfg.hyper_split = rdc::HyperSplit::kPerSlice;
  cfg.lrp_merge = rdc::LrpMerge::kConcat1x1;
  cfg.charm_hidden = 8;
  return cfg;
}

inline rdc::ModelConfig TinyElicCharm() {
  rdc::ModelConfig cfg = TinyConvCharm(2);
  cfg.transform_family = rdc::TransformFamily::kElic;
  cfg.num_residual_blocks = 2;
  return cfg;
}

inline rdc::ModelConfig TinySwint() {
  rdc::ModelConfig cfg = TinyConvHyperprior();
  cfg.transform_family = rdc::TransformFamily::kSwint;
  cfg.hyper_family = rdc::HyperFamily::kSwint;
  cfg.swint_window = 4;
  cfg.swint_stage_depths = {1, 1, 1, 1};
  cfg.swint_stage_widths = {8, 8, 8, 8};
  return cfg;
}

}  // namespace rdc_test

#endif  // RDC_TESTS_TEST_SUPPORT_H_
