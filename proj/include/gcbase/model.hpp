// Copyright 2026 The gcbase Authors
// SPDX-License-Identifier: Apache-2.0

// WD-TCN: time-domain target-speaker extraction driven by EEG.
//
//   mixture --AudioEncoder--> w_x ----------------------.
//   EEG ----EegEncoder----> levels --CMCA(w_x, levels)--> fused
//   fused --WD blocks--> mask m in [0,1];  estimate = Decoder(w_x * m)
//
// The WD blocks replace the single dilated depthwise convolution of a
// standard TCN block with several dilation branches mixed by weights from a
// squeeze-and-excite style attention over the branches.

#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gcbase/nn.hpp"

namespace gcbase::model {

using ad::Var;

struct ModelConfig {
  std::size_t enc_kernel = 16;
  std::size_t enc_stride = 8;
  std::size_t feat_dim = 128;
  std::size_t bottleneck_dim = 64;
  std::size_t hidden_dim = 320;
  std::size_t kernel_size = 3;
  std::size_t n_blocks = 4;
  std::size_t n_repeats = 2;
  // One dilation list per block position; empty means {1, 2^b}.
  std::vector<std::vector<std::size_t>> dilation_set_per_block;
  std::size_t se_reduction = 4;
  std::size_t attn_dim = 64;
  // Half-width of the cross-attention window in audio frames; < 0 is global.
  int attn_window = 32;
  std::size_t eeg_in_channels = 128;
  std::size_t eeg_feat_dim = 64;
  std::size_t eeg_hidden_dim = 128;
  std::size_t eeg_n_blocks = 3;
  std::size_t eeg_down_kernel = 3;
  std::size_t eeg_down_stride = 2;
  double audio_rate_hz = 14700.0;
  double eeg_rate_hz = 128.0;
  bool decoder_bias = false;

  /// Dilations used by block position `b` inside a repeat.
  std::vector<std::size_t> dilations(std::size_t b) const {
    if (b < dilation_set_per_block.size()) return dilation_set_per_block[b];
    const std::size_t d = std::size_t{1} << b;
    return d == 1 ? std::vector<std::size_t>{1} : std::vector<std::size_t>{1, d};
  }

  void validate() const {
    auto positive = [](std::size_t v, const char* what) {
      if (v == 0) throw ConfigError(std::string("model config: ") + what + " must be positive");
    };
    positive(enc_kernel, "enc_kernel");
    positive(enc_stride, "enc_stride");
    positive(feat_dim, "feat_dim");
    positive(bottleneck_dim, "bottleneck_dim");
    positive(hidden_dim, "hidden_dim");
    positive(kernel_size, "kernel_size");
    positive(n_blocks, "n_blocks");
    positive(n_repeats, "n_repeats");
    positive(se_reduction, "se_reduction");
    positive(attn_dim, "attn_dim");
    positive(eeg_in_channels, "eeg_in_channels");
    positive(eeg_feat_dim, "eeg_feat_dim");
    positive(eeg_hidden_dim, "eeg_hidden_dim");
    positive(eeg_n_blocks, "eeg_n_blocks");
    positive(eeg_down_kernel, "eeg_down_kernel");
    positive(eeg_down_stride, "eeg_down_stride");
    if (!(audio_rate_hz > 0.0) || !(eeg_rate_hz > 0.0)) throw ConfigError("model config: rates must be positive");
    if (dilation_set_per_block.size() > n_blocks)
      throw ConfigError("model config: more dilation lists than blocks");
    for (std::size_t b = 0; b < n_blocks; ++b) {
      const auto d = dilations(b);
      if (d.empty()) throw ConfigError("model config: empty dilation list for block " + std::to_string(b));
      for (auto v : d)
        if (v == 0) throw ConfigError("model config: dilation must be positive");
    }
  }

  /// Desk-scale profile used by tests and the synthetic task.
  static ModelConfig tiny(std::size_t eeg_channels, double audio_rate_hz, double eeg_rate_hz) {
    ModelConfig c;
    c.feat_dim = 32;
    c.bottleneck_dim = 32;
    c.hidden_dim = 64;
    c.n_blocks = 3;
    c.n_repeats = 1;
    c.se_reduction = 4;
    c.attn_dim = 16;
    c.attn_window = 16;
    c.eeg_in_channels = eeg_channels;
    c.eeg_feat_dim = 16;
    c.eeg_hidden_dim = 32;
    c.eeg_n_blocks = 2;
    c.audio_rate_hz = audio_rate_hz;
    c.eeg_rate_hz = eeg_rate_hz;
    return c;
  }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"enc_kernel", c.enc_kernel},
                     {"enc_stride", c.enc_stride},
                     {"feat_dim", c.feat_dim},
                     {"bottleneck_dim", c.bottleneck_dim},
                     {"hidden_dim", c.hidden_dim},
                     {"kernel_size", c.kernel_size},
                     {"n_blocks", c.n_blocks},
                     {"n_repeats", c.n_repeats},
                     {"dilation_set_per_block", c.dilation_set_per_block},
                     {"se_reduction", c.se_reduction},
                     {"attn_dim", c.attn_dim},
                     {"attn_window", c.attn_window},
                     {"eeg_in_channels", c.eeg_in_channels},
                     {"eeg_feat_dim", c.eeg_feat_dim},
                     {"eeg_hidden_dim", c.eeg_hidden_dim},
                     {"eeg_n_blocks", c.eeg_n_blocks},
                     {"eeg_down_kernel", c.eeg_down_kernel},
                     {"eeg_down_stride", c.eeg_down_stride},
                     {"audio_rate_hz", c.audio_rate_hz},
                     {"eeg_rate_hz", c.eeg_rate_hz},
                     {"decoder_bias", c.decoder_bias}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.enc_kernel = j.value("enc_kernel", d.enc_kernel);
  c.enc_stride = j.value("enc_stride", d.enc_stride);
  c.feat_dim = j.value("feat_dim", d.feat_dim);
  c.bottleneck_dim = j.value("bottleneck_dim", d.bottleneck_dim);
  c.hidden_dim = j.value("hidden_dim", d.hidden_dim);
  c.kernel_size = j.value("kernel_size", d.kernel_size);
  c.n_blocks = j.value("n_blocks", d.n_blocks);
  c.n_repeats = j.value("n_repeats", d.n_repeats);
  c.dilation_set_per_block = j.value("dilation_set_per_block", d.dilation_set_per_block);
  c.se_reduction = j.value("se_reduction", d.se_reduction);
  c.attn_dim = j.value("attn_dim", d.attn_dim);
  c.attn_window = j.value("attn_window", d.attn_window);
  c.eeg_in_channels = j.value("eeg_in_channels", d.eeg_in_channels);
  c.eeg_feat_dim = j.value("eeg_feat_dim", d.eeg_feat_dim);
  c.eeg_hidden_dim = j.value("eeg_hidden_dim", d.eeg_hidden_dim);
  c.eeg_n_blocks = j.value("eeg_n_blocks", d.eeg_n_blocks);
  c.eeg_down_kernel = j.value("eeg_down_kernel", d.eeg_down_kernel);
  c.eeg_down_stride = j.value("eeg_down_stride", d.eeg_down_stride);
  c.audio_rate_hz = j.value("audio_rate_hz", d.audio_rate_hz);
  c.eeg_rate_hz = j.value("eeg_rate_hz", d.eeg_rate_hz);
  c.decoder_bias = j.value("decoder_bias", d.decoder_bias);
}

/// Number of encoder frames for an input of `t` samples.
inline std::size_t frame_count(std::size_t t, const ModelConfig& cfg) {
  if (t < cfg.enc_kernel)
    throw ShapeError("input of " + std::to_string(t) + " samples is shorter than the encoder kernel (" +
                     std::to_string(cfg.enc_kernel) + ")");
  return (t - cfg.enc_kernel) / cfg.enc_stride + 1;
}

// ------------------------------------------------------------------ encoders

template <typename T>
class AudioEncoder {
 public:
  AudioEncoder() = default;
  AudioEncoder(const ModelConfig& cfg, Rng& rng)
      : conv_("audio_encoder.conv", 1, cfg.feat_dim, cfg.enc_kernel, ops::ConvGeometry{cfg.enc_stride, 1, 0, 0}, false,
              rng) {}

  /// Linear analysis stage only; the embedding is relu() of this.
  Var<T> pre_activation(const Var<T>& x) { return conv_(x); }
  Var<T> operator()(const Var<T>& x) { return ops::relu(pre_activation(x)); }

  void collect(nn::ParamList<T>& out) { conv_.collect(out); }

 private:
  nn::Conv1d<T> conv_;
};

/// Strided convolution followed by residual DepthConv1D blocks; the output of
/// every block is one feature level.
template <typename T>
class EegEncoder {
 public:
  EegEncoder() = default;
  EegEncoder(const ModelConfig& cfg, Rng& rng)
      : down_("eeg_encoder.down", cfg.eeg_in_channels, cfg.eeg_feat_dim, cfg.eeg_down_kernel,
              ops::ConvGeometry{cfg.eeg_down_stride, 1, (cfg.eeg_down_kernel - 1) / 2, (cfg.eeg_down_kernel - 1) / 2},
              true, rng),
        in_channels_(cfg.eeg_in_channels) {
    for (std::size_t b = 0; b < cfg.eeg_n_blocks; ++b)
      blocks_.emplace_back("eeg_encoder.block" + std::to_string(b), cfg.eeg_feat_dim, cfg.eeg_hidden_dim,
                           cfg.kernel_size, std::size_t{1} << b, rng);
  }

  std::vector<Var<T>> operator()(const Var<T>& eeg) {
    if (eeg.value().rank() != 2 || eeg.value().dim(0) != in_channels_)
      throw ShapeError("EEG input has shape " + shape_str(eeg.shape()) + ", encoder expects " +
                       std::to_string(in_channels_) + " channels");
    std::vector<Var<T>> levels;
    Var<T> h = down_(eeg);
    for (auto& block : blocks_) {
      h = block(h);
      levels.push_back(h);
    }
    return levels;
  }

  void collect(nn::ParamList<T>& out) {
    down_.collect(out);
    for (auto& b : blocks_) b.collect(out);
  }

 private:
  nn::Conv1d<T> down_;
  std::vector<nn::DepthConv1dBlock<T>> blocks_;
  std::size_t in_channels_ = 0;
};

// --------------------------------------------------------------- WD blocks

/// Branch weighting: each branch is average-pooled over time, passed through
/// a shared bottleneck (C -> C/r -> 1) and the resulting scores are
/// softmax-normalized across branches.
template <typename T>
class SeAttention {
 public:
  SeAttention() = default;
  SeAttention(const std::string& name, std::size_t channels, std::size_t reduction, Rng& rng) {
    const std::size_t squeezed = std::max<std::size_t>(1, channels / reduction);
    squeeze_ = nn::Linear<T>(name + ".squeeze", channels, squeezed, rng);
    score_ = ad::Parameter<T>(name + ".score.weight", Tensor<T>({1, squeezed}));
    nn::uniform_init(score_, 1.0 / std::sqrt(static_cast<double>(squeezed)), rng);
  }

  /// Returns a probability vector over branches (shape [n_branches]).
  Var<T> operator()(const std::vector<Var<T>>& branches) {
    if (branches.empty()) throw ShapeError("SE attention needs at least one branch");
    std::vector<Var<T>> scores;
    scores.reserve(branches.size());
    const Var<T> w = ad::bind(score_);
    for (const auto& br : branches) {
      const auto desc = ops::time_mean(br);
      scores.push_back(ops::linear(ops::relu(squeeze_(desc)), w));
    }
    return ops::softmax(ops::concat(scores));
  }

  void collect(nn::ParamList<T>& out) {
    squeeze_.collect(out);
    out.push_back(&score_);
  }

 private:
  nn::Linear<T> squeeze_;
  ad::Parameter<T> score_;
};

/// Weighted multi-dilation depthwise-separable block. Same layout as
/// nn::DepthConv1dBlock except that the depthwise stage is a set of dilation
/// branches mixed by SeAttention. With a single branch the result equals the
/// standard block exactly.
template <typename T>
class WdBlock {
 public:
  WdBlock() = default;
  WdBlock(const std::string& name, std::size_t channels, std::size_t hidden, std::size_t kernel,
          const std::vector<std::size_t>& dilations, std::size_t se_reduction, Rng& rng)
      : entry_(name + ".entry", channels, hidden, true, rng),
        act1_(name + ".act1"),
        norm1_(name + ".norm1", hidden) {
    if (dilations.empty()) throw ConfigError(name + ": empty dilation list");
    for (std::size_t i = 0; i < dilations.size(); ++i)
      branches_.emplace_back(name + ".branch" + std::to_string(i), hidden, kernel, dilations[i], rng);
    se_ = SeAttention<T>(name + ".se", hidden, se_reduction, rng);
    act2_ = nn::PReLU<T>(name + ".act2");
    norm2_ = nn::GlobalLayerNorm<T>(name + ".norm2", hidden);
    exit_ = nn::Conv1x1<T>(name + ".exit", hidden, channels, true, rng);
  }

  Var<T> operator()(const Var<T>& x, Var<T>* branch_weights = nullptr) {
    auto h = norm1_(act1_(entry_(x)));
    std::vector<Var<T>> outs;
    outs.reserve(branches_.size());
    for (auto& br : branches_) outs.push_back(br(h));
    const Var<T> w = se_(outs);
    if (branch_weights) *branch_weights = w;
    h = norm2_(act2_(ops::weighted_sum(w, outs)));
    return ops::add(x, exit_(h));
  }

  void collect(nn::ParamList<T>& out) {
    entry_.collect(out);
    act1_.collect(out);
    norm1_.collect(out);
    for (auto& br : branches_) br.collect(out);
    se_.collect(out);
    act2_.collect(out);
    norm2_.collect(out);
    exit_.collect(out);
  }

  std::size_t branch_count() const { return branches_.size(); }

 private:
  nn::Conv1x1<T> entry_;
  nn::PReLU<T> act1_;
  nn::GlobalLayerNorm<T> norm1_;
  std::vector<nn::DepthwiseConv<T>> branches_;
  SeAttention<T> se_;
  nn::PReLU<T> act2_;
  nn::GlobalLayerNorm<T> norm2_;
  nn::Conv1x1<T> exit_;
};

// ---------------------------------------------------------------------- CMCA

/// Builds the map from EEG feature-level samples to audio frame centres.
inline ops::InterpolationMap eeg_to_frame_map(std::size_t level_length, std::size_t n_frames, const ModelConfig& cfg) {
  const double level_rate = cfg.eeg_rate_hz / static_cast<double>(cfg.eeg_down_stride);
  std::vector<double> pos(n_frames);
  for (std::size_t f = 0; f < n_frames; ++f) {
    const double centre_s =
        (static_cast<double>(f * cfg.enc_stride) + 0.5 * static_cast<double>(cfg.enc_kernel)) / cfg.audio_rate_hz;
    pos[f] = centre_s * level_rate;
  }
  return ops::InterpolationMap::from_positions(level_length, pos);
}

/// Throws unless EEG and audio cover the same duration within one EEG sample.
inline void check_alignment(std::size_t audio_len, std::size_t eeg_len, const ModelConfig& cfg) {
  const double da = static_cast<double>(audio_len) / cfg.audio_rate_hz;
  const double de = static_cast<double>(eeg_len) / cfg.eeg_rate_hz;
  if (std::abs(da - de) > 1.0 / cfg.eeg_rate_hz + 1e-9)
    throw ShapeError("EEG (" + std::to_string(de) + " s) and audio (" + std::to_string(da) +
                     " s) durations differ by more than one EEG sample");
}

/// Convolutional multi-layer cross attention. Audio frames query each EEG
/// level (after interpolation to the frame rate) within a local time window;
/// level outputs are averaged and added to the projected audio pathway.
template <typename T>
class Cmca {
 public:
  Cmca() = default;
  Cmca(const ModelConfig& cfg, Rng& rng)
      : audio_norm_("cmca.audio_norm", cfg.feat_dim),
        audio_proj_("cmca.audio_proj", cfg.feat_dim, cfg.bottleneck_dim, true, rng),
        query_("cmca.query", cfg.bottleneck_dim, cfg.attn_dim, true, rng),
        window_(cfg.attn_window) {
    for (std::size_t l = 0; l < cfg.eeg_n_blocks; ++l) {
      keys_.emplace_back("cmca.key" + std::to_string(l), cfg.eeg_feat_dim, cfg.attn_dim, true, rng);
      values_.emplace_back("cmca.value" + std::to_string(l), cfg.eeg_feat_dim, cfg.bottleneck_dim, true, rng);
    }
  }

  struct Trace {
    Var<T> audio_path;
    std::vector<std::vector<ops::AttentionRow<T>>> attention;  // per level
  };

  /// `levels` must already be at the audio frame rate.
  Var<T> operator()(const Var<T>& audio, const std::vector<Var<T>>& levels, Trace* trace = nullptr) {
    if (levels.size() != keys_.size())
      throw ShapeError("CMCA expects " + std::to_string(keys_.size()) + " EEG levels, got " +
                       std::to_string(levels.size()));
    const Var<T> a = audio_proj_(audio_norm_(audio));
    const Var<T> q = query_(a);
    std::vector<Var<T>> outs;
    if (trace) {
      trace->audio_path = a;
      trace->attention.assign(levels.size(), {});
    }
    for (std::size_t l = 0; l < levels.size(); ++l) {
      if (levels[l].value().dim(1) != audio.value().dim(1))
        throw ShapeError("CMCA: EEG level " + std::to_string(l) + " not aligned to the audio frames");
      outs.push_back(ops::attention(q, keys_[l](levels[l]), values_[l](levels[l]), window_,
                                    trace ? &trace->attention[l] : nullptr));
    }
    return ops::add(a, ops::mean_n(outs));
  }

  void collect(nn::ParamList<T>& out) {
    audio_norm_.collect(out);
    audio_proj_.collect(out);
    query_.collect(out);
    for (std::size_t l = 0; l < keys_.size(); ++l) {
      keys_[l].collect(out);
      values_[l].collect(out);
    }
  }

 private:
  nn::GlobalLayerNorm<T> audio_norm_;
  nn::Conv1x1<T> audio_proj_;
  nn::Conv1x1<T> query_;
  std::vector<nn::Conv1x1<T>> keys_;
  std::vector<nn::Conv1x1<T>> values_;
  int window_ = -1;
};

// ------------------------------------------------------------------- network

template <typename T>
class WdTcn {
 public:
  struct Trace {
    Var<T> embedding;
    std::vector<Var<T>> eeg_levels;
    Var<T> fused;
    Var<T> mask;
    std::vector<Var<T>> branch_weights;
  };

  WdTcn() = default;
  WdTcn(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    audio_encoder_ = AudioEncoder<T>(cfg_, rng);
    eeg_encoder_ = EegEncoder<T>(cfg_, rng);
    cmca_ = Cmca<T>(cfg_, rng);
    for (std::size_t r = 0; r < cfg_.n_repeats; ++r)
      for (std::size_t b = 0; b < cfg_.n_blocks; ++b)
        blocks_.emplace_back("separator.r" + std::to_string(r) + "b" + std::to_string(b), cfg_.bottleneck_dim,
                             cfg_.hidden_dim, cfg_.kernel_size, cfg_.dilations(b), cfg_.se_reduction, rng);
    mask_act_ = nn::PReLU<T>("separator.mask_act");
    mask_proj_ = nn::Conv1x1<T>("separator.mask_proj", cfg_.bottleneck_dim, cfg_.feat_dim, true, rng);
    decoder_weight_ = ad::Parameter<T>("decoder.weight", Tensor<T>({cfg_.feat_dim, 1, cfg_.enc_kernel}));
    nn::uniform_init(decoder_weight_, 1.0 / std::sqrt(static_cast<double>(cfg_.enc_kernel)), rng);
    if (cfg_.decoder_bias) decoder_bias_ = ad::Parameter<T>("decoder.bias", Tensor<T>({1}));
  }

  const ModelConfig& config() const { return cfg_; }

  /// Waveform [1 x T] -> embedding [feat_dim x n_frames].
  Var<T> audio_encode(const Var<T>& x) {
    check_waveform(x);
    frame_count(x.value().dim(1), cfg_);
    return audio_encoder_(x);
  }
  Var<T> audio_pre_activation(const Var<T>& x) {
    check_waveform(x);
    frame_count(x.value().dim(1), cfg_);
    return audio_encoder_.pre_activation(x);
  }

  /// EEG [eeg_in_channels x T_e] -> feature levels at the EEG feature rate.
  std::vector<Var<T>> eeg_encode(const Var<T>& eeg) { return eeg_encoder_(eeg); }

  /// Interpolates every level to `n_frames` audio frames.
  std::vector<Var<T>> align_levels(const std::vector<Var<T>>& levels, std::size_t n_frames) {
    std::vector<Var<T>> out;
    for (const auto& l : levels)
      out.push_back(ops::interpolate_time(l, eeg_to_frame_map(l.value().dim(1), n_frames, cfg_)));
    return out;
  }

  Var<T> cmca_fuse(const Var<T>& w_x, const std::vector<Var<T>>& aligned, typename Cmca<T>::Trace* trace = nullptr) {
    return cmca_(w_x, aligned, trace);
  }

  /// Mask estimation from the audio embedding and (unaligned) EEG levels.
  Var<T> separate(const Var<T>& w_x, const std::vector<Var<T>>& levels, Trace* trace = nullptr) {
    const auto aligned = align_levels(levels, w_x.value().dim(1));
    Var<T> h = cmca_(w_x, aligned);
    if (trace) trace->fused = h;
    for (auto& block : blocks_) {
      Var<T> w;
      h = block(h, trace ? &w : nullptr);
      if (trace) trace->branch_weights.push_back(w);
    }
    return ops::sigmoid(mask_proj_(mask_act_(h)));
  }

  /// Overlap-add reconstruction of w_x * mask, trimmed or zero-padded to out_len.
  Var<T> decode(const Var<T>& w_x, const Var<T>& mask, std::size_t out_len) {
    require_shape(mask.shape(), w_x.shape(), "decode mask");
    if (out_len < cfg_.enc_kernel || frame_count(out_len, cfg_) != w_x.value().dim(1))
      throw ShapeError("decode: output length " + std::to_string(out_len) + " inconsistent with " +
                       std::to_string(w_x.value().dim(1)) + " frames");
    const Var<T> masked = ops::mul(w_x, mask);
    const Var<T> y = ops::conv_transpose1d(masked, ad::bind(decoder_weight_),
                                           cfg_.decoder_bias ? ad::bind(decoder_bias_) : Var<T>{}, cfg_.enc_stride);
    return ops::fit_length(y, out_len);
  }

  /// Full pipeline: mixture [1 x T], EEG [eeg_in_channels x T_e] -> estimate [1 x T].
  Var<T> forward(const Var<T>& x, const Var<T>& eeg, Trace* trace = nullptr) {
    check_waveform(x);
    if (eeg.value().rank() != 2 || eeg.value().dim(0) != cfg_.eeg_in_channels)
      throw ShapeError("EEG input has shape " + shape_str(eeg.shape()) + ", model expects " +
                       std::to_string(cfg_.eeg_in_channels) + " channels");
    check_alignment(x.value().dim(1), eeg.value().dim(1), cfg_);
    const Var<T> w_x = audio_encode(x);
    const auto levels = eeg_encode(eeg);
    const Var<T> mask = separate(w_x, levels, trace);
    if (trace) {
      trace->embedding = w_x;
      trace->eeg_levels = levels;
      trace->mask = mask;
    }
    return decode(w_x, mask, x.value().dim(1));
  }

  WdBlock<T>& block(std::size_t i) { return blocks_.at(i); }
  std::size_t block_count() const { return blocks_.size(); }

  nn::ParamList<T> parameters() {
    nn::ParamList<T> out;
    audio_encoder_.collect(out);
    eeg_encoder_.collect(out);
    cmca_.collect(out);
    for (auto& b : blocks_) b.collect(out);
    mask_act_.collect(out);
    mask_proj_.collect(out);
    out.push_back(&decoder_weight_);
    if (cfg_.decoder_bias) out.push_back(&decoder_bias_);
    return out;
  }

 private:
  static void check_waveform(const Var<T>& x) {
    if (x.value().rank() != 2 || x.value().dim(0) != 1)
      throw ShapeError("waveform must be a [1 x T] matrix, got " + shape_str(x.shape()));
  }

  ModelConfig cfg_;
  AudioEncoder<T> audio_encoder_;
  EegEncoder<T> eeg_encoder_;
  Cmca<T> cmca_;
  std::vector<WdBlock<T>> blocks_;
  nn::PReLU<T> mask_act_;
  nn::Conv1x1<T> mask_proj_;
  ad::Parameter<T> decoder_weight_;
  ad::Parameter<T> decoder_bias_;
};

/// Exact number of trainable scalars of the backbone built from `cfg`.
inline std::size_t param_count(const ModelConfig& cfg) {
  WdTcn<float> m(cfg, 0);
  return nn::count_parameters(m.parameters());
}

}  // namespace gcbase::model
