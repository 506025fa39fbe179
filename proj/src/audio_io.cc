// src/audio_io.cc

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

#include "assertkit/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "assertkit/common.hpp"

namespace assertkit {

namespace {

std::uint16_t read_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16le(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "cannot open file: ", path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

}  // namespace

AudioClip read_wav(const std::string& path) {
  const std::vector<unsigned char> b = read_file_bytes(path);
  check(b.size() >= 12 && std::memcmp(b.data(), "RIFF", 4) == 0 &&
            std::memcmp(b.data() + 8, "WAVE", 4) == 0,
        "malformed WAV header (not RIFF/WAVE): ", path);

  bool have_fmt = false;
  std::uint16_t audio_format = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  const unsigned char* data = nullptr;
  std::uint32_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const char* id = reinterpret_cast<const char*>(b.data() + pos);
    const std::uint32_t size = read_u32le(b.data() + pos + 4);
    check(pos + 8 + size <= b.size(), "malformed WAV chunk (truncated): ", path);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      check(size >= 16, "malformed WAV fmt chunk: ", path);
      const unsigned char* f = b.data() + pos + 8;
      audio_format = read_u16le(f);
      channels = read_u16le(f + 2);
      sample_rate = read_u32le(f + 4);
      bits = read_u16le(f + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = b.data() + pos + 8;
      data_size = size;
    }
    pos += 8 + size + (size & 1);  // chunks are word-aligned
  }
  check(have_fmt && data != nullptr, "malformed WAV (missing fmt or data chunk): ", path);
  check(audio_format == 1, "unsupported WAV encoding (non-PCM, format tag ", audio_format,
        "): ", path);
  check(channels == 1, "unsupported WAV encoding (expected mono, got ", channels,
        " channels): ", path);
  check(bits == 16, "unsupported WAV encoding (expected 16-bit, got ", bits, "): ", path);
  check(sample_rate > 0, "malformed WAV (zero sample rate): ", path);
  check(data_size >= 2, "malformed WAV (empty data chunk): ", path);

  AudioClip clip;
  clip.sample_rate = static_cast<int>(sample_rate);
  const std::size_t n = data_size / 2;
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::int16_t s = static_cast<std::int16_t>(read_u16le(data + 2 * i));
    clip.samples[i] = static_cast<float>(s) / 32768.0f;
  }
  return clip;
}

void write_wav(const std::string& path, const AudioClip& clip) {
  check(!clip.samples.empty(), "write_wav: empty clip");
  check(clip.sample_rate > 0, "write_wav: sample rate must be positive");
  const std::uint32_t data_size = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_size);
  out.append("RIFF");
  put_u32le(out, 36 + data_size);
  out.append("WAVE");
  out.append("fmt ");
  put_u32le(out, 16);
  put_u16le(out, 1);  // PCM
  put_u16le(out, 1);  // mono
  put_u32le(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32le(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);  // byte rate
  put_u16le(out, 2);   // block align
  put_u16le(out, 16);  // bits
  out.append("data");
  put_u32le(out, data_size);
  for (const float s : clip.samples) {
    const double clamped = std::min(1.0, std::max(-1.0, static_cast<double>(s)));
    long q = std::lround(clamped * 32768.0);
    q = std::min<long>(32767, std::max<long>(-32768, q));
    put_u16le(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  check(f.good(), "cannot open for writing: ", path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  check(f.good(), "write failed: ", path);
}

Protocol parse_protocol(const std::string& text) {
  Protocol protocol;
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (strings::trim(line).empty()) continue;
    const std::vector<std::string> fields = strings::split_ws(line);
    check(fields.size() == 5, "protocol line ", lineno, ": expected 5 fields, got ",
          fields.size());
    TrialEntry e;
    e.speaker_id = fields[0];
    e.utt_id = fields[1];
    e.system_id = fields[3];
    const std::string key = strings::lower(fields[4]);
    if (key == "bonafide") {
      e.key = TrialKey::bonafide;
    } else if (key == "spoof") {
      e.key = TrialKey::spoof;
    } else {
      fail("protocol line ", lineno, ": unknown key token '", fields[4], "'");
    }
    check(seen.insert(e.utt_id).second, "protocol line ", lineno, ": duplicate utt_id '",
          e.utt_id, "'");
    protocol.push_back(std::move(e));
  }
  return protocol;
}

Protocol read_protocol_file(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "cannot open protocol file: ", path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_protocol(os.str());
}

void write_protocol_file(const std::string& path, const Protocol& protocol) {
  std::ofstream out(path, std::ios::trunc);
  check(out.good(), "cannot open for writing: ", path);
  for (const TrialEntry& e : protocol) {
    out << e.speaker_id << ' ' << e.utt_id << " - " << e.system_id << ' '
        << (e.key == TrialKey::bonafide ? "bonafide" : "spoof") << '\n';
  }
  check(out.good(), "write failed: ", path);
}

const std::vector<std::string>& spoof_class_ids(CorpusMode mode) {
  static const std::vector<std::string> pa = {"AA", "AB", "AC", "BA", "BB",
                                              "BC", "CA", "CB", "CC"};
  static const std::vector<std::string> la = {"SS_1", "SS_2", "SS_4",
                                              "US_1", "VC_1", "VC_4"};
  return mode == CorpusMode::PA ? pa : la;
}

namespace {

// One-pole low-pass run forward; crude but cheap and clearly audible.
void lowpass(std::vector<float>& x, double cutoff_hz, int fs, int passes) {
  const double a = std::exp(-2.0 * M_PI * cutoff_hz / fs);
  for (int p = 0; p < passes; ++p) {
    double y = 0.0;
    for (float& s : x) {
      y = (1.0 - a) * s + a * y;
      s = static_cast<float>(y);
    }
  }
}

void soft_clip(std::vector<float>& x, double drive) {
  const double norm = std::tanh(drive);
  for (float& s : x) s = static_cast<float>(std::tanh(drive * s) / norm);
}

void comb_reverb(std::vector<float>& x, double delay_s, double feedback, int fs) {
  const std::size_t d = std::max<std::size_t>(1, static_cast<std::size_t>(delay_s * fs));
  for (std::size_t i = d; i < x.size(); ++i)
    x[i] = static_cast<float>(x[i] + feedback * x[i - d]);
  float peak = 0.0f;
  for (const float s : x) peak = std::max(peak, std::abs(s));
  if (peak > 0.95f)
    for (float& s : x) s *= 0.95f / peak;
}

void pre_emphasis(std::vector<float>& x, double alpha) {
  for (std::size_t i = x.size(); i-- > 1;)
    x[i] = static_cast<float>(x[i] - alpha * x[i - 1]);
}

void amplitude_mod(std::vector<float>& x, double rate_hz, double depth, int fs) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double m = 1.0 + depth * std::sin(2.0 * M_PI * rate_hz * i / fs);
    x[i] = static_cast<float>(x[i] * m / (1.0 + depth));
  }
}

void bit_crush(std::vector<float>& x, int bits) {
  const double levels = static_cast<double>(1 << (bits - 1));
  for (float& s : x)
    s = static_cast<float>(std::round(s * levels) / levels);
}

void half_rectify(std::vector<float>& x) {
  for (float& s : x) s = std::max(s, 0.0f) * 1.8f;
}

void chorus(std::vector<float>& x, double rate_ratio, double mix) {
  const std::vector<float> dry = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double src = i * rate_ratio;
    const std::size_t i0 = std::min<std::size_t>(static_cast<std::size_t>(src), dry.size() - 1);
    const std::size_t i1 = std::min(i0 + 1, dry.size() - 1);
    const double frac = src - static_cast<double>(i0);
    const double wet = (1.0 - frac) * dry[i0] + frac * dry[i1];
    x[i] = static_cast<float>((dry[i] + mix * wet) / (1.0 + mix));
  }
}

void ring_mod(std::vector<float>& x, double freq_hz, int fs) {
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = static_cast<float>(x[i] * std::sin(2.0 * M_PI * freq_hz * i / fs));
}

void apply_spoof_transform(std::vector<float>& x, CorpusMode mode,
                           const std::string& system_id, int fs) {
  if (mode == CorpusMode::PA) {
    if (system_id == "AA") return lowpass(x, 600.0, fs, 2);
    if (system_id == "AB") return soft_clip(x, 4.0);
    if (system_id == "AC") return comb_reverb(x, 0.008, 0.7, fs);
    if (system_id == "BA") return pre_emphasis(x, 0.95);
    if (system_id == "BB") return amplitude_mod(x, 4.0, 0.8, fs);
    if (system_id == "BC") return bit_crush(x, 6);
    if (system_id == "CA") return half_rectify(x);
    if (system_id == "CB") return chorus(x, 1.02, 0.8);
    if (system_id == "CC") return ring_mod(x, 1500.0, fs);
  } else {
    if (system_id == "SS_1") return lowpass(x, 500.0, fs, 2);
    if (system_id == "SS_2") return bit_crush(x, 5);
    if (system_id == "SS_4") return ring_mod(x, 1000.0, fs);
    if (system_id == "US_1") return comb_reverb(x, 0.008, 0.7, fs);
    if (system_id == "VC_1") return soft_clip(x, 4.0);
    if (system_id == "VC_4") return pre_emphasis(x, 0.95);
  }
  fail("unknown spoof class '", system_id, "'");
}

}  // namespace

AudioClip synth_utterance(const SynthConfig& cfg, std::size_t utt_index,
                          const std::string& system_id) {
  check(cfg.sample_rate > 0, "synth: sample rate must be positive");
  check(cfg.duration_range.first > 0 && cfg.duration_range.second >= cfg.duration_range.first,
        "synth: bad duration range");
  Rng rng = Rng(cfg.seed).fork(utt_index);

  const double duration = rng.uniform(cfg.duration_range.first, cfg.duration_range.second);
  const std::size_t n =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(duration * cfg.sample_rate)));

  // Multi-harmonic tone with 1/h rolloff plus -40 dB noise.
  const double f0 = rng.uniform(110.0, 220.0);
  const int n_harmonics = 6;
  std::vector<double> phases(n_harmonics);
  for (double& p : phases) p = rng.uniform(0.0, 2.0 * M_PI);

  std::vector<float> x(n);
  double norm = 0.0;
  for (int h = 1; h <= n_harmonics; ++h) norm += 1.0 / h;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (int h = 1; h <= n_harmonics; ++h)
      s += std::sin(2.0 * M_PI * f0 * h * i / cfg.sample_rate + phases[h - 1]) / h;
    s = 0.3 * s / norm + 0.003 * rng.normal();
    x[i] = static_cast<float>(s);
  }

  if (system_id != "bonafide")
    apply_spoof_transform(x, cfg.mode, system_id, cfg.sample_rate);

  for (float& s : x) s = std::min(1.0f, std::max(-1.0f, s));
  AudioClip clip;
  clip.samples = std::move(x);
  clip.sample_rate = cfg.sample_rate;
  return clip;
}

Protocol synth_corpus(const SynthConfig& cfg, const std::string& out_dir) {
  check(cfg.n_bonafide > 0 && cfg.spoof_per_class > 0, "synth: counts must be positive");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "wav", ec);
  check(!ec, "cannot create output directory: ", out_dir, " (", ec.message(), ")");

  const std::vector<std::string>& classes = spoof_class_ids(cfg.mode);
  const std::string prefix =
      cfg.utt_prefix.empty() ? (cfg.mode == CorpusMode::PA ? "PA_T" : "LA_T") : cfg.utt_prefix;

  struct Item {
    std::string system_id;
    TrialKey key;
  };
  std::vector<Item> items;
  items.reserve(cfg.n_bonafide + classes.size() * cfg.spoof_per_class);
  for (std::size_t i = 0; i < cfg.n_bonafide; ++i)
    items.push_back({"bonafide", TrialKey::bonafide});
  for (const std::string& cls : classes)
    for (std::size_t i = 0; i < cfg.spoof_per_class; ++i)
      items.push_back({cls, TrialKey::spoof});

  Protocol protocol(items.size());
  parallel_for(items.size(), [&](std::size_t i) {
    char utt[64];
    std::snprintf(utt, sizeof(utt), "%s_%07zu", prefix.c_str(), i);
    const AudioClip clip = synth_utterance(cfg, i, items[i].system_id);
    write_wav((fs::path(out_dir) / "wav" / (std::string(utt) + ".wav")).string(), clip);
    TrialEntry e;
    char spk[16];
    std::snprintf(spk, sizeof(spk), "S%02zu", 1 + i % 8);
    e.speaker_id = spk;
    e.utt_id = utt;
    e.system_id = items[i].system_id == "bonafide" ? "-" : items[i].system_id;
    e.key = items[i].key;
    protocol[i] = std::move(e);
  });

  write_protocol_file((fs::path(out_dir) / "protocol.txt").string(), protocol);
  return protocol;
}

}  // namespace assertkit
