// include/assertkit/models.hpp

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

// The five network variants, all built from the nn primitives:
//   senet34 / senet50   SE-gated residual backbone, fixed-size segments
//   meanstd_resnet      plain residual backbone + masked mean/std pooling,
//                       whole (variable-length) utterances
//   dilated_resnet      residual blocks + maxpool + dilated transition convs,
//                       fixed-size segments
//   afn                 attentive-filtering mask (down/up path, bilinear
//                       upsampling, skip connections) in front of a
//                       dilated_resnet

#ifndef ASSERTKIT_MODELS_HPP_
#define ASSERTKIT_MODELS_HPP_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "assertkit/nn/layers.hpp"
#include "assertkit/nn/ops.hpp"

namespace assertkit {

enum class ModelKind { senet34, senet50, meanstd_resnet, dilated_resnet, afn };
enum class UnitKind { basic, bottleneck };

std::string model_kind_name(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

struct ModelConfig {
  ModelKind kind = ModelKind::senet34;
  std::size_t n_classes = 2;
  std::size_t input_dim = 257;  // feature dimension (spectrogram height)

  UnitKind unit = UnitKind::basic;
  std::vector<std::size_t> units = {3, 4, 6, 3};
  std::vector<std::size_t> channels = {16, 32, 64, 128};
  std::vector<std::size_t> dilations = {1, 1, 1, 1};
  std::size_t se_reduction = 16;
  std::size_t bottleneck_expansion = 2;  // matches the reported SENet50 size
  double meanstd_eps_var = 1e-10;

  std::vector<std::size_t> afn_down_dilations = {1, 2, 4, 8};
  std::vector<std::size_t> afn_up_dilations = {1, 1, 1, 1};
  std::size_t afn_channels = 8;
  bool afn_residual_mask = false;  // true: x + x*mask instead of x*mask

  std::uint64_t init_seed = 1;

  static ModelConfig defaults(ModelKind kind, std::size_t n_classes, std::size_t input_dim);
  bool with_se() const { return kind == ModelKind::senet34 || kind == ModelKind::senet50; }
  bool whole_utterance() const { return kind == ModelKind::meanstd_resnet; }
};

// key = value serialization used inside checkpoints and by the CLI.
std::string model_config_to_text(const ModelConfig& cfg);
ModelConfig model_config_from_text(const std::string& text);

namespace detail {

// Valid-length bookkeeping for the whole-utterance path: a k=3/p=1 stride-2
// conv (or a 1x1/p=0 stride-2 one) keeps outputs whose center lands in the
// valid region.
inline std::size_t shrink_len(std::size_t len) { return (len - 1) / 2 + 1; }

inline std::vector<std::size_t> shrink_lens(const std::vector<std::size_t>& lens) {
  std::vector<std::size_t> out(lens.size());
  for (std::size_t i = 0; i < lens.size(); ++i) out[i] = shrink_len(lens[i]);
  return out;
}

template <typename T>
nn::Tensor<T> maybe_mask(const nn::Tensor<T>& x, const std::vector<std::size_t>* lens) {
  return lens ? nn::time_mask(x, *lens) : x;
}

template <typename T>
struct SeBlock {
  nn::Linear<T> fc1, fc2;

  static SeBlock make(std::size_t channels, std::size_t reduction, Rng& rng) {
    SeBlock se;
    const std::size_t hidden = std::max<std::size_t>(1, (channels + reduction - 1) / reduction);
    se.fc1 = nn::Linear<T>::make(channels, hidden, rng);
    se.fc2 = nn::Linear<T>::make(hidden, channels, rng);
    return se;
  }

  nn::Tensor<T> operator()(const nn::Tensor<T>& x) const {
    auto gate = nn::sigmoid(fc2(nn::relu(fc1(nn::global_avg_pool(x)))));
    return nn::channel_scale(x, gate);
  }

  void collect(const std::string& prefix, nn::NamedParams<T>& params) const {
    fc1.collect(prefix + ".fc1", params);
    fc2.collect(prefix + ".fc2", params);
  }
};

template <typename T>
struct ResUnit {
  UnitKind kind = UnitKind::basic;
  std::size_t stride = 1;
  nn::Conv2d<T> conv1, conv2, conv3;
  nn::BatchNorm2d<T> bn1, bn2, bn3;
  bool has_down = false;
  nn::Conv2d<T> down_conv;
  nn::BatchNorm2d<T> down_bn;
  std::optional<SeBlock<T>> se;

  // width is the Table-1 channel count; basic units output width channels,
  // bottleneck units expand to expansion*width.
  static ResUnit make(std::size_t cin, std::size_t width, std::size_t stride, UnitKind kind,
                      std::size_t expansion, std::optional<std::size_t> se_reduction,
                      Rng& rng) {
    ResUnit u;
    u.kind = kind;
    u.stride = stride;
    const std::size_t cout = kind == UnitKind::basic ? width : expansion * width;
    if (kind == UnitKind::basic) {
      u.conv1 = nn::Conv2d<T>::make(cin, width, 3, {stride, 1, 1}, false, rng);
      u.bn1 = nn::BatchNorm2d<T>::make(width);
      u.conv2 = nn::Conv2d<T>::make(width, width, 3, {1, 1, 1}, false, rng);
      u.bn2 = nn::BatchNorm2d<T>::make(width);
    } else {
      u.conv1 = nn::Conv2d<T>::make(cin, width, 1, {1, 0, 1}, false, rng);
      u.bn1 = nn::BatchNorm2d<T>::make(width);
      u.conv2 = nn::Conv2d<T>::make(width, width, 3, {stride, 1, 1}, false, rng);
      u.bn2 = nn::BatchNorm2d<T>::make(width);
      u.conv3 = nn::Conv2d<T>::make(width, cout, 1, {1, 0, 1}, false, rng);
      u.bn3 = nn::BatchNorm2d<T>::make(cout);
    }
    if (stride != 1 || cin != cout) {
      u.has_down = true;
      u.down_conv = nn::Conv2d<T>::make(cin, cout, 1, {stride, 0, 1}, false, rng);
      u.down_bn = nn::BatchNorm2d<T>::make(cout);
    }
    if (se_reduction) u.se = SeBlock<T>::make(cout, *se_reduction, rng);
    return u;
  }

  // lens_in/lens_out are null for fixed-size inputs; when set, every conv/bn
  // output is re-zeroed past the valid length so padded columns stay exactly
  // zero through the network.
  nn::Tensor<T> forward(const nn::Tensor<T>& x, bool training,
                        const std::vector<std::size_t>* lens_in,
                        const std::vector<std::size_t>* lens_out) {
    nn::Tensor<T> out;
    if (kind == UnitKind::basic) {
      out = nn::relu(maybe_mask(bn1.forward(conv1(x), training), lens_out));
      out = maybe_mask(bn2.forward(conv2(out), training), lens_out);
    } else {
      out = nn::relu(maybe_mask(bn1.forward(conv1(x), training), lens_in));
      out = nn::relu(maybe_mask(bn2.forward(conv2(out), training), lens_out));
      out = maybe_mask(bn3.forward(conv3(out), training), lens_out);
    }
    if (se) out = (*se)(out);
    nn::Tensor<T> skip =
        has_down ? maybe_mask(down_bn.forward(down_conv(x), training), lens_out) : x;
    return nn::relu(nn::add(out, skip));
  }

  void collect(const std::string& prefix, nn::NamedParams<T>& params,
               nn::NamedBuffers<T>& buffers) {
    conv1.collect(prefix + ".conv1", params);
    bn1.collect(prefix + ".bn1", params, buffers);
    conv2.collect(prefix + ".conv2", params);
    bn2.collect(prefix + ".bn2", params, buffers);
    if (kind == UnitKind::bottleneck) {
      conv3.collect(prefix + ".conv3", params);
      bn3.collect(prefix + ".bn3", params, buffers);
    }
    if (has_down) {
      down_conv.collect(prefix + ".down.conv", params);
      down_bn.collect(prefix + ".down.bn", params, buffers);
    }
    if (se) se->collect(prefix + ".se", params);
  }
};

// Stem + four residual blocks; first unit of blocks 2-4 downsamples with
// stride 2.  Covers senet34/senet50 (with SE) and the mean-std backbone.
template <typename T>
struct Backbone {
  nn::Conv2d<T> stem_conv;
  nn::BatchNorm2d<T> stem_bn;
  std::vector<std::vector<ResUnit<T>>> blocks;
  std::size_t out_channels = 0;

  static Backbone make(const ModelConfig& cfg, Rng& rng) {
    Backbone b;
    b.stem_conv = nn::Conv2d<T>::make(1, cfg.channels[0], 3, {1, 1, 1}, false, rng);
    b.stem_bn = nn::BatchNorm2d<T>::make(cfg.channels[0]);
    std::size_t cin = cfg.channels[0];
    const std::size_t expand = cfg.unit == UnitKind::bottleneck ? cfg.bottleneck_expansion : 1;
    for (std::size_t bi = 0; bi < 4; ++bi) {
      std::vector<ResUnit<T>> units;
      for (std::size_t ui = 0; ui < cfg.units[bi]; ++ui) {
        const std::size_t stride = (bi > 0 && ui == 0) ? 2 : 1;
        units.push_back(ResUnit<T>::make(
            cin, cfg.channels[bi], stride, cfg.unit, cfg.bottleneck_expansion,
            cfg.with_se() ? std::optional<std::size_t>(cfg.se_reduction) : std::nullopt, rng));
        cin = expand * cfg.channels[bi];
      }
      b.blocks.push_back(std::move(units));
    }
    b.out_channels = cin;
    return b;
  }

  // lens: null for fixed-size input; otherwise updated in place through the
  // three stride-2 stages.
  nn::Tensor<T> forward(const nn::Tensor<T>& x, bool training,
                        std::vector<std::size_t>* lens) {
    nn::Tensor<T> h = maybe_mask(x, lens);
    h = nn::relu(maybe_mask(stem_bn.forward(stem_conv(h), training), lens));
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      for (std::size_t ui = 0; ui < blocks[bi].size(); ++ui) {
        ResUnit<T>& unit = blocks[bi][ui];
        if (lens && unit.stride == 2) {
          const std::vector<std::size_t> lens_in = *lens;
          *lens = shrink_lens(lens_in);
          h = unit.forward(h, training, &lens_in, lens);
        } else {
          h = unit.forward(h, training, lens, lens);
        }
      }
    }
    return h;
  }

  void collect(nn::NamedParams<T>& params, nn::NamedBuffers<T>& buffers) {
    stem_conv.collect("stem.conv", params);
    stem_bn.collect("stem.bn", params, buffers);
    for (std::size_t bi = 0; bi < blocks.size(); ++bi)
      for (std::size_t ui = 0; ui < blocks[bi].size(); ++ui)
        blocks[bi][ui].collect(
            "block" + std::to_string(bi + 1) + ".unit" + std::to_string(ui), params, buffers);
  }
};

// Four blocks of residual units, each followed by maxpool 2x2 and a dilated
// 3x3 transition conv that doubles the channel count.
template <typename T>
struct DilatedNet {
  nn::Conv2d<T> stem_conv;
  nn::BatchNorm2d<T> stem_bn;
  std::vector<std::vector<ResUnit<T>>> blocks;
  std::vector<nn::Conv2d<T>> trans_conv;
  std::vector<nn::BatchNorm2d<T>> trans_bn;
  std::size_t out_channels = 0;

  static DilatedNet make(const ModelConfig& cfg, Rng& rng) {
    DilatedNet net;
    net.stem_conv = nn::Conv2d<T>::make(1, cfg.channels[0], 3, {1, 1, 1}, false, rng);
    net.stem_bn = nn::BatchNorm2d<T>::make(cfg.channels[0]);
    std::size_t cin = cfg.channels[0];
    for (std::size_t bi = 0; bi < 4; ++bi) {
      std::vector<ResUnit<T>> units;
      for (std::size_t ui = 0; ui < cfg.units[bi]; ++ui) {
        units.push_back(ResUnit<T>::make(cin, cfg.channels[bi], 1, UnitKind::basic, 1,
                                         std::nullopt, rng));
        cin = cfg.channels[bi];
      }
      net.blocks.push_back(std::move(units));
      const std::size_t cout = 2 * cfg.channels[bi];
      const std::size_t dil = cfg.dilations[bi];
      net.trans_conv.push_back(nn::Conv2d<T>::make(cin, cout, 3, {1, dil, dil}, false, rng));
      net.trans_bn.push_back(nn::BatchNorm2d<T>::make(cout));
      cin = cout;
    }
    net.out_channels = cin;
    return net;
  }

  nn::Tensor<T> forward(const nn::Tensor<T>& x, bool training) {
    nn::Tensor<T> h = nn::relu(stem_bn.forward(stem_conv(x), training));
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      for (ResUnit<T>& unit : blocks[bi]) h = unit.forward(h, training, nullptr, nullptr);
      h = nn::maxpool2d(h, 2, 2);
      h = nn::relu(trans_bn[bi].forward(trans_conv[bi](h), training));
    }
    return h;
  }

  void collect(nn::NamedParams<T>& params, nn::NamedBuffers<T>& buffers) {
    stem_conv.collect("stem.conv", params);
    stem_bn.collect("stem.bn", params, buffers);
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      for (std::size_t ui = 0; ui < blocks[bi].size(); ++ui)
        blocks[bi][ui].collect(
            "block" + std::to_string(bi + 1) + ".unit" + std::to_string(ui), params, buffers);
      trans_conv[bi].collect("trans" + std::to_string(bi + 1) + ".conv", params);
      trans_bn[bi].collect("trans" + std::to_string(bi + 1) + ".bn", params, buffers);
    }
  }
};

// Attention path of the attentive-filtering network: four downsampling units
// (maxpool + dilated conv), four upsampling units (conv + bilinear resize to
// the mirrored resolution), additive skip connections, final 1-channel conv
// with sigmoid.  Produces a mask with exactly the input's H x W.
template <typename T>
struct AfnPath {
  std::vector<nn::Conv2d<T>> down_conv;
  std::vector<nn::BatchNorm2d<T>> down_bn;
  std::vector<nn::Conv2d<T>> up_conv;
  std::vector<nn::BatchNorm2d<T>> up_bn;
  nn::Conv2d<T> mask_conv;

  static AfnPath make(const ModelConfig& cfg, Rng& rng) {
    AfnPath path;
    const std::size_t ch = cfg.afn_channels;
    for (std::size_t u = 0; u < 4; ++u) {
      const std::size_t dil = cfg.afn_down_dilations[u];
      path.down_conv.push_back(
          nn::Conv2d<T>::make(u == 0 ? 1 : ch, ch, 3, {1, dil, dil}, false, rng));
      path.down_bn.push_back(nn::BatchNorm2d<T>::make(ch));
    }
    for (std::size_t u = 0; u < 4; ++u) {
      const std::size_t dil = cfg.afn_up_dilations[u];
      path.up_conv.push_back(nn::Conv2d<T>::make(ch, ch, 3, {1, dil, dil}, false, rng));
      path.up_bn.push_back(nn::BatchNorm2d<T>::make(ch));
    }
    path.mask_conv = nn::Conv2d<T>::make(ch, 1, 3, {1, 1, 1}, true, rng);
    return path;
  }

  nn::Tensor<T> mask(const nn::Tensor<T>& x, bool training) {
    check(x.dim(2) >= 16 && x.dim(3) >= 16,
          "afn: input must be at least 16 x 16 for four downsampling units");
    std::vector<nn::Tensor<T>> downs;
    nn::Tensor<T> h = x;
    for (std::size_t u = 0; u < 4; ++u) {
      h = nn::maxpool2d(h, 2, 2);
      h = nn::relu(down_bn[u].forward(down_conv[u](h), training));
      downs.push_back(h);
    }
    nn::Tensor<T> up = downs[3];
    for (std::size_t u = 0; u < 4; ++u) {
      up = nn::relu(up_bn[u].forward(up_conv[u](up), training));
      const bool to_input = u == 3;
      const std::size_t th = to_input ? x.dim(2) : downs[2 - u].dim(2);
      const std::size_t tw = to_input ? x.dim(3) : downs[2 - u].dim(3);
      up = nn::bilinear_resize(up, th, tw);
      if (!to_input) up = nn::add(up, downs[2 - u]);
    }
    return nn::sigmoid(mask_conv(up));
  }

  void collect(nn::NamedParams<T>& params, nn::NamedBuffers<T>& buffers) {
    for (std::size_t u = 0; u < 4; ++u) {
      down_conv[u].collect("afn.down" + std::to_string(u) + ".conv", params);
      down_bn[u].collect("afn.down" + std::to_string(u) + ".bn", params, buffers);
    }
    for (std::size_t u = 0; u < 4; ++u) {
      up_conv[u].collect("afn.up" + std::to_string(u) + ".conv", params);
      up_bn[u].collect("afn.up" + std::to_string(u) + ".bn", params, buffers);
    }
    mask_conv.collect("afn.mask_conv", params);
  }
};

}  // namespace detail

template <typename T>
class Model {
 public:
  explicit Model(const ModelConfig& cfg) : cfg_(cfg) {
    check(cfg.units.size() == 4 && cfg.channels.size() == 4 && cfg.dilations.size() == 4,
          "model: units/channels/dilations must have 4 entries");
    check(cfg.n_classes >= 2, "model: need at least 2 classes");
    for (const std::size_t u : cfg.units) check(u >= 1, "model: empty block");
    Rng rng(cfg.init_seed);
    std::size_t head_in = 0;
    switch (cfg_.kind) {
      case ModelKind::senet34:
      case ModelKind::senet50:
      case ModelKind::meanstd_resnet: {
        backbone_.emplace(detail::Backbone<T>::make(cfg_, rng));
        if (cfg_.kind == ModelKind::meanstd_resnet) {
          std::size_t freq = cfg_.input_dim;
          for (int i = 0; i < 3; ++i) freq = detail::shrink_len(freq);
          head_in = 2 * backbone_->out_channels * freq;
        } else {
          head_in = backbone_->out_channels;
        }
        break;
      }
      case ModelKind::dilated_resnet: {
        dilated_.emplace(detail::DilatedNet<T>::make(cfg_, rng));
        head_in = dilated_->out_channels;
        break;
      }
      case ModelKind::afn: {
        afn_.emplace(detail::AfnPath<T>::make(cfg_, rng));
        dilated_.emplace(detail::DilatedNet<T>::make(cfg_, rng));
        head_in = dilated_->out_channels;
        break;
      }
    }
    head_ = nn::Linear<T>::make(head_in, cfg_.n_classes, rng);
    collect_all();
  }

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }

  // Fixed-size segments as N x 1 x D x M images.  The mean-std model accepts
  // them too (treated as a batch of full-length utterances).
  nn::Tensor<T> forward_fixed(const nn::Tensor<T>& x, bool training) {
    check(x.ndim() == 4 && x.dim(1) == 1, "forward: expected N x 1 x D x M input");
    check(x.dim(2) == cfg_.input_dim, "forward: feature dimension ", x.dim(2),
          " does not match model input_dim ", cfg_.input_dim);
    if (cfg_.kind == ModelKind::meanstd_resnet) {
      const std::vector<std::size_t> lens(x.dim(0), x.dim(3));
      return forward_whole(x, lens, training);
    }
    nn::Tensor<T> h;
    if (cfg_.kind == ModelKind::senet34 || cfg_.kind == ModelKind::senet50) {
      h = backbone_->forward(x, training, nullptr);
    } else if (cfg_.kind == ModelKind::dilated_resnet) {
      h = dilated_->forward(x, training);
    } else {
      nn::Tensor<T> mask = afn_->mask(x, training);
      nn::Tensor<T> masked = nn::mul(x, mask);
      if (cfg_.afn_residual_mask) masked = nn::add(x, masked);
      h = dilated_->forward(masked, training);
    }
    return head_(nn::global_avg_pool(h));
  }

  // Whole-utterance path (mean-std model only): x is N x 1 x D x T_max with
  // per-utterance valid frame counts; padded columns never influence the
  // valid region or the pooled statistics.
  nn::Tensor<T> forward_whole(const nn::Tensor<T>& x, std::vector<std::size_t> valid,
                              bool training) {
    check(cfg_.kind == ModelKind::meanstd_resnet,
          "forward_whole: only the mean-std model accepts variable-length input");
    check(x.ndim() == 4 && x.dim(1) == 1, "forward: expected N x 1 x D x T input");
    check(x.dim(2) == cfg_.input_dim, "forward: feature dimension ", x.dim(2),
          " does not match model input_dim ", cfg_.input_dim);
    check(valid.size() == x.dim(0), "forward_whole: valid length count mismatch");
    nn::Tensor<T> h = backbone_->forward(x, training, &valid);
    h = nn::flatten_time(h);  // N x T' x (C*H)
    h = nn::mean_std_pool(h, valid, static_cast<T>(cfg_.meanstd_eps_var));
    return head_(h);
  }

  // The AFN attention mask, exposed for tests and inspection.
  nn::Tensor<T> afn_mask(const nn::Tensor<T>& x, bool training) {
    check(cfg_.kind == ModelKind::afn, "afn_mask: not an attentive-filtering model");
    return afn_->mask(x, training);
  }

  nn::NamedParams<T>& parameters() { return params_; }
  const nn::NamedParams<T>& parameters() const { return params_; }
  nn::NamedBuffers<T>& buffers() { return buffers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : params_) n += p.numel();
    return n;
  }

  void zero_grad() {
    for (auto& [name, p] : params_) p.zero_grad();
  }

 private:
  void collect_all() {
    params_.clear();
    buffers_.clear();
    if (backbone_) backbone_->collect(params_, buffers_);
    if (afn_) afn_->collect(params_, buffers_);
    if (dilated_) dilated_->collect(params_, buffers_);
    head_.collect("head", params_);
  }

  ModelConfig cfg_;
  std::optional<detail::Backbone<T>> backbone_;
  std::optional<detail::DilatedNet<T>> dilated_;
  std::optional<detail::AfnPath<T>> afn_;
  nn::Linear<T> head_;
  nn::NamedParams<T> params_;
  nn::NamedBuffers<T> buffers_;
};

}  // namespace assertkit

#endif  // ASSERTKIT_MODELS_HPP_
