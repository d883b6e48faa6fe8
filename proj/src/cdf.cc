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

#include "rdc/cdf.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rdc {

namespace {
constexpr uint32_t kTotal = 1u << 16;
}  // namespace

double CdfTable::BitsOf(int64_t symbol) const {
  RDC_CHECK(InSupport(symbol), ContractError, "BitsOf: symbol out of support");
  const int idx = int(symbol - min_symbol);
  return -std::log2(double(Freq(idx)) / double(kTotal));
}

int CdfTable::LookupTarget(uint32_t target) const {
  auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
  RDC_CHECK(it != cdf.begin() && it != cdf.end(), DecodeError,
            "cdf lookup out of range");
  return int(it - cdf.begin()) - 1;
}

std::string CdfTable::ExportLE() const {
  std::string out;
  out.reserve(cdf.size() * 4);
  for (uint32_t v : cdf) {
    out.push_back(char(v & 0xff));
    out.push_back(char((v >> 8) & 0xff));
    out.push_back(char((v >> 16) & 0xff));
    out.push_back(char((v >> 24) & 0xff));
  }
  return out;
}

CdfTable QuantizeCdf(const std::vector<double>& pmf, int min_symbol) {
  RDC_CHECK(!pmf.empty(), ContractError, "QuantizeCdf: empty pmf");
  const size_t n = pmf.size();
  RDC_CHECK(n <= kTotal, ContractError, "QuantizeCdf: too many symbols");
  double total = 0.0;
  for (double p : pmf) {
    RDC_CHECK(p >= 0.0 && std::isfinite(p), ContractError,
              "QuantizeCdf: bad probability");
    total += p;
  }
  RDC_CHECK(total > 0.0, ContractError, "QuantizeCdf: zero total mass");

  // Floor of the scaled mass with one guaranteed count each, then hand out
  // the leftover counts by largest remainder (ties broken by index).
  std::vector<uint32_t> freq(n);
  std::vector<double> remainder(n);
  int64_t assigned = 0;
  for (size_t i = 0; i < n; ++i) {
    double target = pmf[i] / total * double(kTotal);
    uint32_t f = uint32_t(std::max(1.0, std::floor(target)));
    freq[i] = f;
    remainder[i] = target - std::floor(target);
    assigned += f;
  }
  if (assigned < int64_t(kTotal)) {
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t(0));
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return remainder[a] > remainder[b];
    });
    int64_t leftover = int64_t(kTotal) - assigned;
    for (size_t rank = 0; leftover > 0; rank = (rank + 1) % n, --leftover) {
      ++freq[order[rank]];
    }
  } else if (assigned > int64_t(kTotal)) {
    // The max(1,...) floors overshot; repeatedly steal from the largest.
    int64_t excess = assigned - int64_t(kTotal);
    while (excess > 0) {
      size_t big = 0;
      for (size_t i = 1; i < n; ++i) {
        if (freq[i] > freq[big]) big = i;
      }
      RDC_CHECK(freq[big] > 1, ContractError, "QuantizeCdf: cannot normalize");
      --freq[big];
      --excess;
    }
  }

  CdfTable table;
  table.min_symbol = min_symbol;
  table.cdf.resize(n + 1);
  table.cdf[0] = 0;
  for (size_t i = 0; i < n; ++i) table.cdf[i + 1] = table.cdf[i] + freq[i];
  RDC_CHECK(table.cdf.back() == kTotal, ContractError,
            "QuantizeCdf: total mismatch");
  return table;
}

GaussianCdfSet::GaussianCdfSet() {
  const double log_lo = std::log(kScaleFloor);
  const double log_hi = std::log(kMaxScale);
  for (int i = 0; i < kNumScales; ++i) {
    double s = std::exp(log_lo + (log_hi - log_lo) * i / (kNumScales - 1));
    scales_.push_back(s);
  }
  for (double s : scales_) {
    // Smallest symmetric support whose outside mass is at most 2^-8.
    int limit = 0;
    while (std::erfc((limit + 0.5) / (s * std::sqrt(2.0))) > kTailMass &&
           limit < (1 << 14)) {
      ++limit;
    }
    std::vector<double> pmf;
    pmf.reserve(size_t(2 * limit + 2));
    double covered = 0.0;
    for (int k = -limit; k <= limit; ++k) {
      double p = GaussianBinProb(k, s);
      pmf.push_back(p);
      covered += p;
    }
    pmf.push_back(std::max(1.0 - covered, 1e-12));  // escape
    tables_.push_back(QuantizeCdf(pmf, -limit));
  }
}

int GaussianCdfSet::IndexForScale(double sigma) const {
  sigma = std::min(std::max(sigma, kScaleFloor), kMaxScale);
  const double log_lo = std::log(kScaleFloor);
  const double log_hi = std::log(kMaxScale);
  const double step = (log_hi - log_lo) / (kNumScales - 1);
  int idx = int(std::lround((std::log(sigma) - log_lo) / step));
  return std::min(std::max(idx, 0), kNumScales - 1);
}

const GaussianCdfSet& SharedGaussianCdfSet() {
  static const GaussianCdfSet set;
  return set;
}

CdfTable BuildFactorizedTable(const FactorizedPrior& prior, int channel) {
  constexpr int kCap = 4096;
  // Expand the support until each tail holds at most half the tail budget.
  int lo = 0, hi = 0;
  while (prior.Cdf(channel, lo - 0.5) > kTailMass / 2 && lo > -kCap) --lo;
  while (1.0 - prior.Cdf(channel, hi + 0.5) > kTailMass / 2 && hi < kCap) ++hi;
  std::vector<double> pmf;
  pmf.reserve(size_t(hi - lo + 2));
  double covered = 0.0;
  for (int k = lo; k <= hi; ++k) {
    double p = std::max(prior.Cdf(channel, k + 0.5) - prior.Cdf(channel, k - 0.5),
                        0.0);
    pmf.push_back(p);
    covered += p;
  }
  pmf.push_back(std::max(1.0 - covered, 1e-12));  // escape
  return QuantizeCdf(pmf, lo);
}

std::vector<CdfTable> BuildFactorizedTables(const FactorizedPrior& prior) {
  std::vector<CdfTable> tables;
  tables.reserve(size_t(prior.channels()));
  for (int c = 0; c < prior.channels(); ++c) {
    tables.push_back(BuildFactorizedTable(prior, c));
  }
  return tables;
}

const CdfTable& UniformByteTable() {
  // 256 symbols of exactly 2^8 each; coded cost is exactly 8 bits per byte.
  // Accessed by raw index (no escape slot).
  static const CdfTable table = QuantizeCdf(std::vector<double>(256, 1.0), 0);
  return table;
}

uint32_t ZigzagEncode(int64_t v) {
  return uint32_t((uint64_t(v) << 1) ^ uint64_t(v >> 63));
}

int64_t ZigzagDecode(uint32_t v) {
  return int64_t(v >> 1) ^ -int64_t(v & 1);
}

}  // namespace rdc
