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

#include "rdc/model_config.h"

#include <algorithm>
#include <map>
#include <sstream>

#include "rdc/base.h"
#include "rdc/util.h"

namespace rdc {

namespace {

template <size_t N>
std::string JoinInts(const std::array<int, N>& a) {
  std::ostringstream os;
  for (size_t i = 0; i < N; ++i) {
    if (i) os << ",";
    os << a[i];
  }
  return os.str();
}

template <size_t N>
std::array<int, N> ParseInts(const std::string& s, const std::string& key) {
  std::vector<std::string> parts = SplitString(s, ',');
  if (parts.size() != N) {
    throw ConfigError("config key '" + key + "' expects " + std::to_string(N) +
                      " comma-separated integers, got '" + s + "'");
  }
  std::array<int, N> out{};
  for (size_t i = 0; i < N; ++i) {
    try {
      out[i] = std::stoi(TrimString(parts[i]));
    } catch (const std::exception&) {
      throw ConfigError("bad integer in config key '" + key + "': " + s);
    }
  }
  return out;
}

int ParseInt(const std::string& s, const std::string& key) {
  try {
    return std::stoi(TrimString(s));
  } catch (const std::exception&) {
    throw ConfigError("bad integer for config key '" + key + "': " + s);
  }
}

double ParseDouble(const std::string& s, const std::string& key) {
  try {
    return std::stod(TrimString(s));
  } catch (const std::exception&) {
    throw ConfigError("bad number for config key '" + key + "': " + s);
  }
}

}  // namespace

std::string TransformFamilyName(TransformFamily f) {
  switch (f) {
    case TransformFamily::kConv: return "conv";
    case TransformFamily::kElic: return "elic";
    case TransformFamily::kSwint: return "swint";
  }
  return "?";
}

std::string EntropyFamilyName(EntropyFamily f) {
  return f == EntropyFamily::kHyperprior ? "hyperprior" : "charm";
}

std::string HyperFamilyName(HyperFamily f) {
  return f == HyperFamily::kConv ? "conv" : "swint";
}

ModelConfig ModelConfig::ConvHyperprior() {
  ModelConfig cfg;
  cfg.transform_family = TransformFamily::kConv;
  cfg.entropy_family = EntropyFamily::kHyperprior;
  cfg.hyper_family = HyperFamily::kConv;
  cfg.analysis_depths = {192, 192, 192};
  cfg.latent_depth = 192;
  cfg.hyper_depth = 128;
  cfg.lrp_merge = LrpMerge::kAdd;
  cfg.hyper_split = HyperSplit::kSingle;
  cfg.swint_stage_widths = {96, 128, 160, 192};
  return cfg;
}

ModelConfig ModelConfig::ModelB() { return ModelConfig(); }

int ModelConfig::CharmHiddenWidth() const {
  if (charm_hidden > 0) return charm_hidden;
  return std::max(16, 3 * SliceChannels());
}

void ModelConfig::Validate() const {
  for (int d : analysis_depths) {
    if (d <= 0) throw ConfigError("analysis_depths entries must be positive");
  }
  if (latent_depth <= 0) throw ConfigError("latent_depth must be positive");
  if (hyper_depth <= 0) throw ConfigError("hyper_depth must be positive");
  if (num_residual_blocks < 0) {
    throw ConfigError("num_residual_blocks must be non-negative");
  }
  if (num_slices < 1) throw ConfigError("num_slices must be at least 1");
  if (entropy_family == EntropyFamily::kCharm &&
      latent_depth % num_slices != 0) {
    throw ConfigError("latent_depth must be divisible by num_slices for the "
                      "charm entropy family (" + std::to_string(latent_depth) +
                      " % " + std::to_string(num_slices) + " != 0)");
  }
  if (entropy_family == EntropyFamily::kCharm &&
      HyperFeatureChannels() % num_slices != 0) {
    throw ConfigError("hyper feature channels must be divisible by num_slices");
  }
  if (swint_window < 1) throw ConfigError("swint_window must be at least 1");
  if (transform_family == TransformFamily::kSwint) {
    for (int d : swint_stage_depths) {
      if (d < 0) throw ConfigError("swint_stage_depths must be non-negative");
    }
    for (int w : swint_stage_widths) {
      if (w <= 0) throw ConfigError("swint_stage_widths must be positive");
    }
    if (swint_stage_widths[3] != latent_depth) {
      throw ConfigError("swint_stage_widths[3] must equal latent_depth");
    }
  }
  if (charm_hidden < 0) throw ConfigError("charm_hidden must be non-negative");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
}

std::string ModelConfig::Serialize() const {
  // Keys emitted in sorted order, one `key = value` per line.
  std::map<std::string, std::string> kv;
  kv["analysis_depths"] = JoinInts(analysis_depths);
  kv["charm_hidden"] = std::to_string(charm_hidden);
  kv["entropy_family"] = EntropyFamilyName(entropy_family);
  kv["hyper_depth"] = std::to_string(hyper_depth);
  kv["hyper_family"] = HyperFamilyName(hyper_family);
  kv["hyper_split"] = hyper_split == HyperSplit::kSingle ? "single" : "per_slice";
  kv["lambda"] = FormatDouble(lambda);
  kv["latent_depth"] = std::to_string(latent_depth);
  kv["lrp_merge"] = lrp_merge == LrpMerge::kAdd ? "add" : "concat_1x1";
  kv["num_residual_blocks"] = std::to_string(num_residual_blocks);
  kv["num_slices"] = std::to_string(num_slices);
  kv["swint_stage_depths"] = JoinInts(swint_stage_depths);
  kv["swint_stage_widths"] = JoinInts(swint_stage_widths);
  kv["swint_window"] = std::to_string(swint_window);
  kv["transform_family"] = TransformFamilyName(transform_family);
  std::ostringstream os;
  for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
  return os.str();
}

ModelConfig ModelConfig::Parse(const std::string& text) {
  ModelConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    std::string t = TrimString(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line is not 'key = value': " + t);
    }
    std::string key = TrimString(t.substr(0, eq));
    std::string val = TrimString(t.substr(eq + 1));
    if (key == "transform_family") {
      if (val == "conv") cfg.transform_family = TransformFamily::kConv;
      else if (val == "elic") cfg.transform_family = TransformFamily::kElic;
      else if (val == "swint") cfg.transform_family = TransformFamily::kSwint;
      else throw ConfigError("unknown transform_family: " + val);
    } else if (key == "entropy_family") {
      if (val == "hyperprior") cfg.entropy_family = EntropyFamily::kHyperprior;
      else if (val == "charm") cfg.entropy_family = EntropyFamily::kCharm;
      else throw ConfigError("unknown entropy_family: " + val);
    } else if (key == "hyper_family") {
      if (val == "conv") cfg.hyper_family = HyperFamily::kConv;
      else if (val == "swint") cfg.hyper_family = HyperFamily::kSwint;
      else throw ConfigError("unknown hyper_family: " + val);
    } else if (key == "analysis_depths") {
      cfg.analysis_depths = ParseInts<3>(val, key);
    } else if (key == "latent_depth") {
      cfg.latent_depth = ParseInt(val, key);
    } else if (key == "hyper_depth") {
      cfg.hyper_depth = ParseInt(val, key);
    } else if (key == "num_residual_blocks") {
      cfg.num_residual_blocks = ParseInt(val, key);
    } else if (key == "num_slices") {
      cfg.num_slices = ParseInt(val, key);
    } else if (key == "lrp_merge") {
      if (val == "add") cfg.lrp_merge = LrpMerge::kAdd;
      else if (val == "concat_1x1") cfg.lrp_merge = LrpMerge::kConcat1x1;
      else throw ConfigError("unknown lrp_merge: " + val);
    } else if (key == "hyper_split") {
      if (val == "single") cfg.hyper_split = HyperSplit::kSingle;
      else if (val == "per_slice") cfg.hyper_split = HyperSplit::kPerSlice;
      else throw ConfigError("unknown hyper_split: " + val);
    } else if (key == "swint_window") {
      cfg.swint_window = ParseInt(val, key);
    } else if (key == "swint_stage_depths") {
      cfg.swint_stage_depths = ParseInts<4>(val, key);
    } else if (key == "swint_stage_widths") {
      cfg.swint_stage_widths = ParseInts<4>(val, key);
    } else if (key == "charm_hidden") {
      cfg.charm_hidden = ParseInt(val, key);
    } else if (key == "lambda") {
      cfg.lambda = ParseDouble(val, key);
    } else {
      throw ConfigError("unknown config key: " + key);
    }
  }
  cfg.Validate();
  return cfg;
}

ModelConfig ModelConfig::Load(const std::string& path) {
  return Parse(ReadFile(path));
}

uint64_t ModelConfig::IdentityHash() const { return Hash64(Serialize()); }

}  // namespace rdc
