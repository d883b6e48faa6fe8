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

#ifndef RDC_BASE_H_
#define RDC_BASE_H_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rdc {

// Error taxonomy. The CLI maps ConfigError/ContractError/InputError/
// DecodeError to exit code 2 (caller mistake) and everything else to 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid or inconsistent model configuration.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// A call violated an operation's precondition (shape mismatch, causality,
// symbol out of support, ...).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Bad user-supplied data (malformed CSV, empty dataset, unknown flag value).
class InputError : public Error {
 public:
  explicit InputError(const std::string& msg) : Error(msg) {}
};

// Input dimensions require padding before the transform contract applies.
class PaddingRequiredError : public ContractError {
 public:
  explicit PaddingRequiredError(const std::string& msg) : ContractError(msg) {}
};

// Corrupt or truncated bitstream, or a config-hash mismatch.
class DecodeError : public Error {
 public:
  explicit DecodeError(const std::string& msg) : Error(msg) {}
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

// File system / image IO failures.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

#define RDC_CHECK(cond, exc, msg)     \
  do {                                \
    if (!(cond)) throw exc(msg);      \
  } while (0)

}  // namespace rdc

#endif  // RDC_BASE_H_
