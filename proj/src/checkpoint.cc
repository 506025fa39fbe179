// src/checkpoint.cc

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

#include "assertkit/checkpoint.hpp"

#include <fstream>
#include <sstream>

namespace assertkit {

Snapshot snapshot_model(Model<float>& model, const CheckpointMeta& meta) {
  Snapshot snap;
  snap.config = model.config();
  snap.meta = meta;
  for (const auto& [name, p] : model.parameters()) {
    snap.params.emplace_back(name, p.values());
    snap.param_shapes.push_back(p.shape());
  }
  for (const auto& [name, buf] : model.buffers()) snap.buffers.emplace_back(name, *buf);
  return snap;
}

void restore_model(Model<float>& model, const Snapshot& snap) {
  auto& params = model.parameters();
  check(params.size() == snap.params.size(), "restore: parameter count mismatch (",
        params.size(), " vs ", snap.params.size(), ")");
  for (std::size_t i = 0; i < params.size(); ++i) {
    check(params[i].first == snap.params[i].first, "restore: parameter name mismatch at ",
          i, " ('", params[i].first, "' vs '", snap.params[i].first, "')");
    check(params[i].second.numel() == snap.params[i].second.size(),
          "restore: shape mismatch for ", params[i].first);
    params[i].second.values() = snap.params[i].second;
  }
  auto& buffers = model.buffers();
  check(buffers.size() == snap.buffers.size(), "restore: buffer count mismatch");
  for (std::size_t i = 0; i < buffers.size(); ++i) {
    check(buffers[i].first == snap.buffers[i].first, "restore: buffer name mismatch at ", i);
    check(buffers[i].second->size() == snap.buffers[i].second.size(),
          "restore: buffer size mismatch for ", buffers[i].first);
    *buffers[i].second = snap.buffers[i].second;
  }
}

std::unique_ptr<Model<float>> model_from_snapshot(const Snapshot& snap) {
  auto model = std::make_unique<Model<float>>(snap.config);
  restore_model(*model, snap);
  return model;
}

void save_checkpoint(const std::string& path, const Snapshot& snap) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  check(f.good(), "cannot open for writing: ", path);
  f << "assertkit-checkpoint 1\n";
  f << model_config_to_text(snap.config);
  f << "epoch = " << snap.meta.epoch << '\n';
  f << "selection = " << snap.meta.selection << '\n';
  std::ostringstream val;
  val.precision(17);
  val << snap.meta.selection_value;
  f << "selection_value = " << val.str() << '\n';
  f << "[params]\n";
  for (std::size_t i = 0; i < snap.params.size(); ++i) {
    f << snap.params[i].first << ' ';
    const auto& shape = snap.param_shapes[i];
    for (std::size_t d = 0; d < shape.size(); ++d) f << (d ? "," : "") << shape[d];
    f << '\n';
  }
  f << "[buffers]\n";
  for (const auto& [name, buf] : snap.buffers) f << name << ' ' << buf.size() << '\n';
  f << "[data]\n";
  for (const auto& [name, values] : snap.params)
    f.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(float)));
  for (const auto& [name, values] : snap.buffers)
    f.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(float)));
  check(f.good(), "write failed: ", path);
}

Snapshot load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  check(f.good(), "cannot open checkpoint: ", path);
  std::string line;
  check(std::getline(f, line) && strings::trim(line) == "assertkit-checkpoint 1",
        "not an assertkit checkpoint (or unsupported version): ", path);

  Snapshot snap;
  std::ostringstream config_text;
  enum class Section { header, params, buffers } section = Section::header;
  std::vector<std::pair<std::string, std::size_t>> param_manifest;  // name, numel
  std::vector<std::pair<std::string, std::size_t>> buffer_manifest;
  bool saw_data = false;
  while (std::getline(f, line)) {
    const std::string t = strings::trim(line);
    if (t == "[params]") {
      section = Section::params;
      continue;
    }
    if (t == "[buffers]") {
      section = Section::buffers;
      continue;
    }
    if (t == "[data]") {
      saw_data = true;
      break;
    }
    if (t.empty()) continue;
    if (section == Section::header) {
      const std::size_t eq = t.find('=');
      check(eq != std::string::npos, "bad checkpoint header line '", t, "': ", path);
      const std::string key = strings::trim(t.substr(0, eq));
      const std::string value = strings::trim(t.substr(eq + 1));
      if (key == "epoch") {
        snap.meta.epoch = std::stoull(value);
      } else if (key == "selection") {
        snap.meta.selection = value;
      } else if (key == "selection_value") {
        snap.meta.selection_value = std::stod(value);
      } else {
        config_text << t << '\n';
      }
    } else {
      const std::vector<std::string> fields = strings::split_ws(t);
      check(fields.size() == 2, "bad manifest line '", t, "': ", path);
      std::size_t numel = 1;
      std::vector<std::size_t> shape;
      std::istringstream dims(fields[1]);
      std::string dim;
      while (std::getline(dims, dim, ',')) {
        shape.push_back(std::stoull(dim));
        numel *= shape.back();
      }
      if (section == Section::params) {
        param_manifest.emplace_back(fields[0], numel);
        snap.param_shapes.push_back(shape);
      } else {
        buffer_manifest.emplace_back(fields[0], numel);
      }
    }
  }
  check(saw_data, "checkpoint missing [data] section: ", path);
  snap.config = model_config_from_text(config_text.str());

  auto read_array = [&](std::size_t numel) {
    std::vector<float> values(numel);
    f.read(reinterpret_cast<char*>(values.data()),
           static_cast<std::streamsize>(numel * sizeof(float)));
    check(f.good(), "truncated checkpoint data: ", path);
    return values;
  };
  for (const auto& [name, numel] : param_manifest)
    snap.params.emplace_back(name, read_array(numel));
  for (const auto& [name, numel] : buffer_manifest)
    snap.buffers.emplace_back(name, read_array(numel));
  return snap;
}

}  // namespace assertkit
