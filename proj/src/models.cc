// src/models.cc

// Copyright 2025  assertkit authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "assertkit/models.hpp"

#include <map>
#include <sstream>

namespace assertkit {

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::senet34: return "senet34";
    case ModelKind::senet50: return "senet50";
    case ModelKind::meanstd_resnet: return "meanstd_resnet";
    case ModelKind::dilated_resnet: return "dilated_resnet";
    case ModelKind::afn: return "afn";
  }
  fail("bad model kind");
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "senet34") return ModelKind::senet34;
  if (name == "senet50") return ModelKind::senet50;
  if (name == "meanstd_resnet") return ModelKind::meanstd_resnet;
  if (name == "dilated_resnet") return ModelKind::dilated_resnet;
  if (name == "afn") return ModelKind::afn;
  fail("unknown model kind '", name,
       "' (expected senet34|senet50|meanstd_resnet|dilated_resnet|afn)");
}

ModelConfig ModelConfig::defaults(ModelKind kind, std::size_t n_classes,
                                  std::size_t input_dim) {
  ModelConfig cfg;
  cfg.kind = kind;
  cfg.n_classes = n_classes;
  cfg.input_dim = input_dim;
  switch (kind) {
    case ModelKind::senet34:
    case ModelKind::meanstd_resnet:
      break;  // Basic, (3,4,6,3), (16,32,64,128), dilation 1
    case ModelKind::senet50:
      cfg.unit = UnitKind::bottleneck;
      break;
    case ModelKind::dilated_resnet:
    case ModelKind::afn:
      cfg.units = {5, 5, 5, 5};
      cfg.channels = {8, 16, 32, 64};
      cfg.dilations = {2, 4, 4, 8};
      break;
  }
  return cfg;
}

namespace {

std::string join(const std::vector<std::size_t>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::vector<std::size_t> split_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    tok = strings::trim(tok);
    check(!tok.empty(), "bad size list '", s, "'");
    out.push_back(static_cast<std::size_t>(std::stoull(tok)));
  }
  return out;
}

}  // namespace

std::string model_config_to_text(const ModelConfig& cfg) {
  std::ostringstream os;
  os << "kind = " << model_kind_name(cfg.kind) << '\n'
     << "n_classes = " << cfg.n_classes << '\n'
     << "input_dim = " << cfg.input_dim << '\n'
     << "unit = " << (cfg.unit == UnitKind::basic ? "basic" : "bottleneck") << '\n'
     << "units = " << join(cfg.units) << '\n'
     << "channels = " << join(cfg.channels) << '\n'
     << "dilations = " << join(cfg.dilations) << '\n'
     << "se_reduction = " << cfg.se_reduction << '\n'
     << "bottleneck_expansion = " << cfg.bottleneck_expansion << '\n'
     << "meanstd_eps_var = " << cfg.meanstd_eps_var << '\n'
     << "afn_down_dilations = " << join(cfg.afn_down_dilations) << '\n'
     << "afn_up_dilations = " << join(cfg.afn_up_dilations) << '\n'
     << "afn_channels = " << cfg.afn_channels << '\n'
     << "afn_residual_mask = " << (cfg.afn_residual_mask ? 1 : 0) << '\n'
     << "init_seed = " << cfg.init_seed << '\n';
  return os.str();
}

ModelConfig model_config_from_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    line = strings::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    check(eq != std::string::npos, "bad config line '", line, "'");
    kv[strings::trim(line.substr(0, eq))] = strings::trim(line.substr(eq + 1));
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    check(it != kv.end(), "model config missing key '", key, "'");
    return it->second;
  };
  ModelConfig cfg;
  cfg.kind = parse_model_kind(get("kind"));
  cfg.n_classes = std::stoull(get("n_classes"));
  cfg.input_dim = std::stoull(get("input_dim"));
  const std::string unit = get("unit");
  check(unit == "basic" || unit == "bottleneck", "bad unit kind '", unit, "'");
  cfg.unit = unit == "basic" ? UnitKind::basic : UnitKind::bottleneck;
  cfg.units = split_sizes(get("units"));
  cfg.channels = split_sizes(get("channels"));
  cfg.dilations = split_sizes(get("dilations"));
  cfg.se_reduction = std::stoull(get("se_reduction"));
  cfg.bottleneck_expansion = std::stoull(get("bottleneck_expansion"));
  cfg.meanstd_eps_var = std::stod(get("meanstd_eps_var"));
  cfg.afn_down_dilations = split_sizes(get("afn_down_dilations"));
  cfg.afn_up_dilations = split_sizes(get("afn_up_dilations"));
  cfg.afn_channels = std::stoull(get("afn_channels"));
  cfg.afn_residual_mask = get("afn_residual_mask") == "1";
  cfg.init_seed = std::stoull(get("init_seed"));
  return cfg;
}

}  // namespace assertkit
