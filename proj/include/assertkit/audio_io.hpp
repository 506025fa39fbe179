// include/assertkit/audio_io.hpp

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

#ifndef ASSERTKIT_AUDIO_IO_HPP_
#define ASSERTKIT_AUDIO_IO_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace assertkit {

struct AudioClip {
  std::vector<float> samples;  // amplitudes in [-1, 1]
  int sample_rate = 16000;     // Hz
};

// Reads a RIFF/WAVE file.  Only PCM 16-bit mono is supported; samples are
// rescaled to [-1, 1] by division by 32768.  Malformed containers and
// unsupported encodings are reported as distinct errors.
AudioClip read_wav(const std::string& path);

// Writes PCM 16-bit mono little-endian.  Samples are clamped to [-1, 1] and
// rounded, so read_wav(write_wav(clip)) matches clip within 2^-15.
void write_wav(const std::string& path, const AudioClip& clip);

enum class TrialKey { bonafide, spoof };

struct TrialEntry {
  std::string speaker_id;
  std::string utt_id;
  std::string system_id;  // "-" or "bonafide" for bonafide trials
  TrialKey key = TrialKey::bonafide;
};

using Protocol = std::vector<TrialEntry>;

// Parses the 5-field per-line protocol layout:
//   <speaker> <utt_id> <reserved "-"> <system_id> <bonafide|spoof>
// Key tokens are case-insensitive.  Order is preserved.  Errors: wrong field
// count, unknown key token, duplicate utt_id.
Protocol parse_protocol(const std::string& text);

Protocol read_protocol_file(const std::string& path);
void write_protocol_file(const std::string& path, const Protocol& protocol);

enum class CorpusMode { PA, LA };

// Spoof class labels per mode: 9 attack IDs for PA, 6 system IDs for LA.
// Together with "bonafide" these form the 10-/7-way multi-class label spaces.
const std::vector<std::string>& spoof_class_ids(CorpusMode mode);

struct SynthConfig {
  CorpusMode mode = CorpusMode::PA;
  std::size_t n_bonafide = 60;
  std::size_t spoof_per_class = 60;        // 9 classes -> 9:1 spoof:bonafide at equal counts
  std::pair<double, double> duration_range = {1.0, 4.0};  // seconds
  int sample_rate = 16000;
  std::uint64_t seed = 1;
  std::string utt_prefix;  // default "PA_T" / "LA_T" by mode
};

// Generates the deterministic synthetic corpus: WAV files under
// <out_dir>/wav/ and <out_dir>/protocol.txt in parse_protocol format.
// Bonafide clips are multi-harmonic tones (random fundamental, 1/h harmonic
// rolloff, low-level noise); each spoof class applies one fixed transform on
// top of the same generator:
//   PA  AA low-pass 600 Hz         LA  SS_1 low-pass 500 Hz
//       AB soft clipping (tanh)        SS_2 5-bit quantization
//       AC comb-filter reverberation   SS_4 ring modulation 1 kHz
//       BA spectral tilt (pre-emph.)   US_1 comb-filter reverberation
//       BB 4 Hz amplitude modulation   VC_1 soft clipping (tanh)
//       BC 6-bit quantization          VC_4 spectral tilt (pre-emph.)
//       CA half-wave rectification
//       CB detuned chorus (+2%)
//       CC ring modulation 1.5 kHz
// Identical (cfg, seed) produce byte-identical directory trees.
Protocol synth_corpus(const SynthConfig& cfg, const std::string& out_dir);

// Clip synthesis without the file I/O; synth_corpus writes exactly these.
AudioClip synth_utterance(const SynthConfig& cfg, std::size_t utt_index,
                          const std::string& system_id);

}  // namespace assertkit

#endif  // ASSERTKIT_AUDIO_IO_HPP_
