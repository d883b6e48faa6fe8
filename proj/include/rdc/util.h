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

#ifndef RDC_UTIL_H_
#define RDC_UTIL_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace rdc {

// SHA-256 of a byte string (used for config identity hashes).
std::array<uint8_t, 32> Sha256(const uint8_t* data, size_t len);
std::array<uint8_t, 32> Sha256(const std::string& s);

// First 8 bytes of SHA-256, big-endian, as a u64.
uint64_t Hash64(const std::string& s);

std::string HexU64(uint64_t v);

// Deterministic RNG. std::mt19937_64 has a portable engine, but the
// standard distributions are implementation-defined, so the draws are
// implemented here by hand.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  uint64_t NextU64();
  // Uniform in [0, 1).
  double NextUniform();
  // Uniform in [lo, hi).
  double NextUniform(double lo, double hi);
  // Standard normal via Box-Muller.
  double NextNormal();
  // Uniform integer in [0, n).
  uint64_t NextBelow(uint64_t n);

  std::string SerializeState() const;
  void RestoreState(const std::string& s);

 private:
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Minimal CSV helpers: comma-separated, no quoting (labels in this toolkit
// never contain commas), '#' lines are comments.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int ColumnIndex(const std::string& name) const;  // -1 if absent
};

CsvTable ReadCsv(const std::string& path);
void WriteCsv(const std::string& path, const CsvTable& table);

std::vector<std::string> SplitString(const std::string& s, char delim);
std::string TrimString(const std::string& s);

std::string ReadFile(const std::string& path);
void WriteFile(const std::string& path, const std::string& contents);

// Formats a double with enough digits to round-trip (%.17g would be noisy;
// uses the shortest of %.15g/%.17g that parses back exactly).
std::string FormatDouble(double v);

}  // namespace rdc

#endif  // RDC_UTIL_H_
