#include "vpn/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>

namespace vpn {

namespace {

constexpr double kInitScale = 0.1;

int group_of(int channel, int channels, int groups) {
  return static_cast<int>(static_cast<long long>(channel) * groups / channels);
}

// Connectivity of the 1x1 fusion convolution: the first frame_channels inputs
// are masked-first-layer features and keep the causal group rule (an output
// group may read its own and earlier groups); the trailing context_channels
// derive entirely from previous frames and are open to every output.
MaskSpec fusion_mask(int frame_channels, int context_channels, int out_channels,
                     int color_groups) {
  MaskSpec m;
  m.kind = MaskKind::B;
  m.kh = 1;
  m.kw = 1;
  m.channels_in = frame_channels + context_channels;
  m.channels_out = out_channels;
  m.color_groups = color_groups;
  auto mask = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(m.channels_in) * out_channels, 1.0);
  for (int ci = 0; ci < frame_channels; ++ci) {
    for (int co = 0; co < out_channels; ++co) {
      if (group_of(ci, frame_channels, color_groups) >
          group_of(co, out_channels, color_groups)) {
        (*mask)[static_cast<std::size_t>(ci) * out_channels + co] = 0.0;
      }
    }
  }
  m.weight_mask = std::move(mask);
  return m;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

const CondVector* pick_cond(const ModelParams& p,
                            const std::vector<CondVector>* table, int t,
                            const char* who) {
  if (!p.config.conditioned) return nullptr;
  require(table != nullptr,
          std::string(who) + ": conditioned model needs conditioning vectors");
  require(static_cast<std::size_t>(t) < table->size(),
          std::string(who) + ": conditioning vectors cover too few frames");
  return &(*table)[static_cast<std::size_t>(t)];
}

}  // namespace

Conditioning make_conditioning(const VideoSequence& sequence, int context_frames) {
  require(sequence.conditioned(),
          "make_conditioning: the sequence carries no actions");
  require(context_frames >= 0, "make_conditioning: negative context length");
  const int T = sequence.frames;
  Conditioning cond;
  cond.encoder.assign(static_cast<std::size_t>(T), CondVector{});
  cond.decoder.assign(static_cast<std::size_t>(T), CondVector{});
  for (int t = 0; t < T; ++t) {
    const auto& a = sequence.actions[static_cast<std::size_t>(t)];
    for (int d = 0; d < 5; ++d) cond.encoder[static_cast<std::size_t>(t)][d] = a[d];
    // The state is an observation; it is only available for context steps.
    if (t < context_frames && !sequence.states.empty()) {
      const auto& s = sequence.states[static_cast<std::size_t>(t)];
      for (int d = 0; d < 5; ++d)
        cond.encoder[static_cast<std::size_t>(t)][5 + d] = s[d];
    }
    // Frame t is produced by the action taken at step t-1; frame 0 has none.
    if (t > 0) {
      const auto& ap = sequence.actions[static_cast<std::size_t>(t - 1)];
      for (int d = 0; d < 5; ++d) cond.decoder[static_cast<std::size_t>(t)][d] = ap[d];
      if (t - 1 < context_frames && !sequence.states.empty()) {
        const auto& sp = sequence.states[static_cast<std::size_t>(t - 1)];
        for (int d = 0; d < 5; ++d)
          cond.decoder[static_cast<std::size_t>(t)][5 + d] = sp[d];
      }
    }
  }
  return cond;
}

ModelParams build_model(const ModelConfig& config, Rng& rng) {
  config.validate();
  ModelParams p;
  p.config = config;
  const int width = config.block_width;
  const int C = config.color_channels;
  const int groups = config.color_groups();
  const bool autoregressive = config.kind == ModelKind::vpn;
  const bool gated = config.block_kind == BlockKind::rmb;

  p.enc_input = make_conv_layer(3, 3, C, width, 1, rng, kInitScale, true);
  const std::vector<int> enc_rates =
      config.dilation_scheme.empty()
          ? std::vector<int>(static_cast<std::size_t>(config.encoder_blocks), 1)
          : dilation_schedule(config.encoder_blocks, config.dilation_scheme, true);
  for (int b = 0; b < config.encoder_blocks; ++b) {
    p.enc_blocks.push_back(make_residual_block(
        gated, width, enc_rates[static_cast<std::size_t>(b)], rng, kInitScale));
  }
  p.lstm = make_conv_lstm(width, config.lstm_channels, rng, kInitScale);

  const std::vector<int> dec_rates =
      dilation_schedule(config.decoder_blocks, config.dilation_scheme, false);
  const int out_channels =
      config.head == HeadKind::softmax256 ? C * 256 : C;
  if (autoregressive) {
    p.dec_frame =
        make_conv_layer(3, 3, C, width, 1, rng, kInitScale, true, MaskKind::A, groups);
    p.dec_fuse.weights = Tensor::uniform(
        {1, 1, width + config.lstm_channels, width}, rng, -kInitScale, kInitScale, true);
    p.dec_fuse.bias = Tensor::zeros({width}, true);
    p.dec_fuse.dilation = 1;
    p.dec_fuse.mask = fusion_mask(width, config.lstm_channels, width, groups);
    for (int b = 0; b < config.decoder_blocks; ++b) {
      p.dec_blocks.push_back(
          make_residual_block(gated, width, dec_rates[static_cast<std::size_t>(b)],
                              rng, kInitScale, MaskKind::B, groups));
    }
    p.head_hidden = make_conv_layer(1, 1, width, config.top_channels, 1, rng,
                                    kInitScale, true, MaskKind::B, groups);
    p.head_out = make_conv_layer(1, 1, config.top_channels, out_channels, 1, rng,
                                 kInitScale, true, MaskKind::B, groups);
  } else {
    p.dec_fuse =
        make_conv_layer(1, 1, config.lstm_channels, width, 1, rng, kInitScale, true);
    for (int b = 0; b < config.decoder_blocks; ++b) {
      p.dec_blocks.push_back(make_residual_block(
          gated, width, dec_rates[static_cast<std::size_t>(b)], rng, kInitScale));
    }
    p.head_hidden =
        make_conv_layer(1, 1, width, config.top_channels, 1, rng, kInitScale, true);
    p.head_out = make_conv_layer(1, 1, config.top_channels, out_channels, 1, rng,
                                 kInitScale, true);
  }

  if (config.conditioned) {
    // One projection per seam; no bias, so a zero vector injects exactly
    // nothing and an action-blind run degenerates to the unconditioned model.
    for (int i = 0; i <= config.encoder_blocks; ++i) {
      p.enc_cond.push_back(
          make_conv_layer(1, 1, kCondWidth, width, 1, rng, kInitScale, false));
    }
    for (int i = 0; i <= config.decoder_blocks; ++i) {
      p.dec_cond.push_back(
          make_conv_layer(1, 1, kCondWidth, width, 1, rng, kInitScale, false));
    }
  }
  return p;
}

namespace {

struct ParamLister {
  std::vector<std::pair<std::string, Tensor>> out;

  void layer(const std::string& name, const ConvLayer& l) {
    out.emplace_back(name + ".weights", l.weights);
    if (l.bias.defined()) out.emplace_back(name + ".bias", l.bias);
  }
  void mu(const std::string& name, const MuParams& m) {
    layer(name + ".out_gate", m.out_gate);
    layer(name + ".in_gate", m.in_gate);
    layer(name + ".update_gate", m.update_gate);
    layer(name + ".candidate", m.candidate);
  }
  void block(const std::string& name, const ResidualBlockParams& b) {
    if (const auto* r = std::get_if<RmbParams>(&b)) {
      layer(name + ".project_in", r->project_in);
      mu(name + ".mu1", r->mu_first);
      mu(name + ".mu2", r->mu_second);
      layer(name + ".project_out", r->project_out);
    } else {
      const auto& rb = std::get<ReluBlockParams>(b);
      layer(name + ".project_in", rb.project_in);
      layer(name + ".conv1", rb.conv_first);
      layer(name + ".conv2", rb.conv_second);
      layer(name + ".project_out", rb.project_out);
    }
  }
  void lstm(const ConvLstmParams& l) {
    layer("lstm.input_x", l.input_x);
    layer("lstm.input_h", l.input_h);
    layer("lstm.forget_x", l.forget_x);
    layer("lstm.forget_h", l.forget_h);
    layer("lstm.output_x", l.output_x);
    layer("lstm.output_h", l.output_h);
    layer("lstm.cand_x", l.cand_x);
    layer("lstm.cand_h", l.cand_h);
  }
};

}  // namespace

std::vector<std::pair<std::string, Tensor>> named_params(const ModelParams& p) {
  ParamLister v;
  v.layer("encoder.input", p.enc_input);
  for (std::size_t b = 0; b < p.enc_blocks.size(); ++b) {
    v.block("encoder.block" + std::to_string(b), p.enc_blocks[b]);
  }
  v.lstm(p.lstm);
  if (p.config.kind == ModelKind::vpn) v.layer("decoder.frame", p.dec_frame);
  v.layer("decoder.fuse", p.dec_fuse);
  for (std::size_t b = 0; b < p.dec_blocks.size(); ++b) {
    v.block("decoder.block" + std::to_string(b), p.dec_blocks[b]);
  }
  v.layer("head.hidden", p.head_hidden);
  v.layer("head.out", p.head_out);
  for (std::size_t i = 0; i < p.enc_cond.size(); ++i) {
    v.layer("cond.encoder" + std::to_string(i), p.enc_cond[i]);
  }
  for (std::size_t i = 0; i < p.dec_cond.size(); ++i) {
    v.layer("cond.decoder" + std::to_string(i), p.dec_cond[i]);
  }
  return std::move(v.out);
}

void load_named_values(ModelParams& params,
                       const std::vector<std::pair<std::string, Tensor>>& values) {
  auto own = named_params(params);
  std::unordered_map<std::string, const Tensor*> given;
  for (const auto& [name, tensor] : values) {
    if (!given.emplace(name, &tensor).second) {
      throw std::invalid_argument("load_named_values: duplicate parameter '" +
                                  name + "'");
    }
  }
  if (given.size() != own.size()) {
    throw std::invalid_argument(
        "load_named_values: expected " + std::to_string(own.size()) +
        " parameters, got " + std::to_string(given.size()));
  }
  for (auto& [name, tensor] : own) {
    auto it = given.find(name);
    if (it == given.end()) {
      throw std::invalid_argument("load_named_values: missing parameter '" +
                                  name + "'");
    }
    if (it->second->shape() != tensor.shape()) {
      throw std::invalid_argument(
          "load_named_values: shape mismatch for '" + name + "': have " +
          shape_str(tensor.shape()) + ", got " + shape_str(it->second->shape()));
    }
    tensor.values() = it->second->values();
  }
}

Tensor frame_to_tensor(const VideoSequence& sequence, int t) {
  require(t >= 0 && t < sequence.frames, "frame_to_tensor: frame out of range");
  const std::size_t n = static_cast<std::size_t>(sequence.height) *
                        sequence.width * sequence.channels;
  std::vector<double> data(n);
  const std::uint8_t* src = sequence.pixels.data() + sequence.frame_offset(t);
  for (std::size_t k = 0; k < n; ++k) data[k] = src[k] / 255.0;
  return Tensor::from_data({sequence.height, sequence.width, sequence.channels},
                           std::move(data), false);
}

Tensor zero_context(const ModelParams& params, int height, int width) {
  return Tensor::zeros({height, width, params.config.lstm_channels}, false);
}

Tensor condition_inject(const Tensor& layer_input, const CondVector& cond,
                        const ConvLayer& projection) {
  Tensor c = Tensor::from_data({1, 1, kCondWidth},
                               std::vector<double>(cond.begin(), cond.end()),
                               false);
  Tensor shift = projection.apply(c);
  const Shape& sh = layer_input.shape();
  return layer_input + broadcast_spatial(shift, sh[0], sh[1]);
}

ConvLstmState encode_step(const ModelParams& params, const Tensor& frame,
                          const ConvLstmState& state, const CondVector* cond) {
  if (params.config.conditioned) {
    require(cond != nullptr,
            "encode_step: conditioned model needs a conditioning vector");
  }
  Tensor h = params.enc_input.apply(frame);
  std::size_t site = 0;
  for (const auto& block : params.enc_blocks) {
    if (params.config.conditioned) {
      h = condition_inject(h, *cond, params.enc_cond[site++]);
    }
    h = residual_block_forward(h, block);
  }
  if (params.config.conditioned) {
    h = condition_inject(h, *cond, params.enc_cond[site]);
  }
  return conv_lstm_step(h, state, params.lstm);
}

ContextStack encode_frames(const ModelParams& params, const VideoSequence& video,
                           const Conditioning* cond) {
  require(video.frames >= 1, "encode_frames: need at least one frame");
  require(video.channels == params.config.color_channels,
          "encode_frames: frame channels do not match the model");
  ConvLstmState state =
      make_lstm_state(video.height, video.width, params.config.lstm_channels);
  ContextStack out;
  out.context.reserve(static_cast<std::size_t>(video.frames));
  for (int t = 0; t < video.frames; ++t) {
    const CondVector* c =
        pick_cond(params, cond ? &cond->encoder : nullptr, t, "encode_frames");
    state = encode_step(params, frame_to_tensor(video, t), state, c);
    out.context.push_back(state.hidden);
  }
  return out;
}

namespace {

Tensor apply_head(const ModelParams& p, Tensor h, const CondVector* cond) {
  if (p.config.conditioned) {
    h = condition_inject(h, *cond, p.dec_cond.back());
  }
  Tensor u = relu(p.head_hidden.apply(h));
  Tensor o = p.head_out.apply(u);
  return p.config.head == HeadKind::softmax256 ? o : sigmoid(o);
}

Tensor run_decoder_stack(const ModelParams& p, Tensor h, const CondVector* cond) {
  std::size_t site = 0;
  for (const auto& block : p.dec_blocks) {
    if (p.config.conditioned) {
      h = condition_inject(h, *cond, p.dec_cond[site++]);
    }
    h = residual_block_forward(h, block);
  }
  return apply_head(p, h, cond);
}

}  // namespace

Tensor decode_frame(const ModelParams& params, const Tensor& context,
                    const Tensor& target_frame, const CondVector* cond) {
  require(params.config.kind == ModelKind::vpn,
          "decode_frame: the baseline decoder takes no target frame; use "
          "baseline_decode");
  require(context.defined(),
          "decode_frame: missing context (the first frame takes a zero context)");
  const Shape& cs = context.shape();
  const Shape& fs = target_frame.shape();
  require(cs.size() == 3 && fs.size() == 3 && cs[0] == fs[0] && cs[1] == fs[1],
          "decode_frame: context and frame extents disagree");
  require(fs[2] == params.config.color_channels,
          "decode_frame: frame channels do not match the model");
  require(cs[2] == params.config.lstm_channels,
          "decode_frame: context channels do not match the model");
  if (params.config.conditioned) {
    require(cond != nullptr,
            "decode_frame: conditioned model needs a conditioning vector");
  }
  Tensor f = params.dec_frame.apply(target_frame);
  Tensor h = params.dec_fuse.apply(concat_channels(f, context));
  return run_decoder_stack(params, h, cond);
}

Tensor baseline_decode(const ModelParams& params, const Tensor& context,
                       const CondVector* cond) {
  require(params.config.kind == ModelKind::baseline,
          "baseline_decode: this model's decoder reads the target frame; use "
          "decode_frame");
  require(context.defined() && context.rank() == 3 &&
              context.shape()[2] == params.config.lstm_channels,
          "baseline_decode: context channels do not match the model");
  if (params.config.conditioned) {
    require(cond != nullptr,
            "baseline_decode: conditioned model needs a conditioning vector");
  }
  Tensor h = params.dec_fuse.apply(context);
  return run_decoder_stack(params, h, cond);
}

Tensor sigmoid_ce_loss(const Tensor& targets, const Tensor& predictions) {
  require(targets.defined() && predictions.defined(),
          "sigmoid_ce_loss: undefined input");
  require(targets.shape() == predictions.shape(),
          "sigmoid_ce_loss: target shape " + shape_str(targets.shape()) +
              " does not match prediction shape " +
              shape_str(predictions.shape()));
  for (double v : targets.values()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("sigmoid_ce_loss: targets must lie in [0,1]");
    }
  }
  for (double v : predictions.values()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument(
          "sigmoid_ce_loss: predictions must lie in [0,1]");
    }
  }
  Tensor one_minus_z = add_constant(scale(targets, -1.0), 1.0);
  Tensor one_minus_y = add_constant(scale(predictions, -1.0), 1.0);
  Tensor h = mul(targets, log_floored(predictions)) +
             mul(one_minus_z, log_floored(one_minus_y));
  return scale(reduce_sum(h), -1.0);
}

FrameLosses model_loss(const ModelParams& params, const VideoSequence& video,
                       const Conditioning* cond, int scored_from) {
  require(scored_from >= 0 && scored_from < video.frames,
          "model_loss: scored_from outside the video");
  require(video.channels == params.config.color_channels,
          "model_loss: frame channels do not match the model");
  const bool autoregressive = params.config.kind == ModelKind::vpn;
  const int T = video.frames;
  const int H = video.height, W = video.width, C = video.channels;

  // Contexts 0..T-2 are enough: context[t-1] conditions frame t.
  std::vector<Tensor> context;
  context.reserve(static_cast<std::size_t>(T - 1));
  ConvLstmState state = make_lstm_state(H, W, params.config.lstm_channels);
  for (int t = 0; t + 1 < T; ++t) {
    const CondVector* c =
        pick_cond(params, cond ? &cond->encoder : nullptr, t, "model_loss");
    state = encode_step(params, frame_to_tensor(video, t), state, c);
    context.push_back(state.hidden);
  }

  FrameLosses out;
  Tensor total;
  for (int t = scored_from; t < T; ++t) {
    Tensor ctx = t == 0 ? zero_context(params, H, W)
                        : context[static_cast<std::size_t>(t - 1)];
    const CondVector* c =
        pick_cond(params, cond ? &cond->decoder : nullptr, t, "model_loss");
    Tensor term;
    if (params.config.head == HeadKind::softmax256) {
      Tensor logits = autoregressive
                          ? decode_frame(params, ctx, frame_to_tensor(video, t), c)
                          : baseline_decode(params, ctx, c);
      Tensor flat = reshape(logits, {H * W * C, 256});
      std::vector<int> classes(static_cast<std::size_t>(H) * W * C);
      for (int i = 0; i < H; ++i) {
        for (int j = 0; j < W; ++j) {
          for (int ch = 0; ch < C; ++ch) {
            classes[(static_cast<std::size_t>(i) * W + j) * C + ch] =
                video.at(t, i, j, ch);
          }
        }
      }
      Tensor picked = gather_last(softmax_logits_to_logprob(flat), classes);
      term = scale(reduce_sum(picked), -1.0);
    } else {
      Tensor probs = autoregressive
                         ? decode_frame(params, ctx, frame_to_tensor(video, t), c)
                         : baseline_decode(params, ctx, c);
      term = sigmoid_ce_loss(frame_to_tensor(video, t), probs);
    }
    out.per_frame.push_back(term.scalar());
    total = total.defined() ? total + term : term;
  }
  out.total = total;
  return out;
}

namespace {

Likelihood likelihood_from(const FrameLosses& losses) {
  Likelihood out;
  out.frame_nats = losses.per_frame;
  for (double v : losses.per_frame) out.total_nats += v;
  out.nats_per_frame =
      losses.per_frame.empty()
          ? 0.0
          : out.total_nats / static_cast<double>(losses.per_frame.size());
  return out;
}

}  // namespace

Likelihood vpn_log_likelihood(const ModelParams& params, const VideoSequence& video,
                              const Conditioning* cond, int scored_from) {
  require(params.config.head == HeadKind::softmax256,
          "vpn_log_likelihood: the Bernoulli head has no discrete likelihood; "
          "score it with sigmoid_ce_loss");
  require(params.config.kind == ModelKind::vpn,
          "vpn_log_likelihood: model kind is baseline");
  return likelihood_from(model_loss(params, video, cond, scored_from));
}

Likelihood baseline_log_likelihood(const ModelParams& params,
                                   const VideoSequence& video,
                                   const Conditioning* cond, int scored_from) {
  require(params.config.head == HeadKind::softmax256,
          "baseline_log_likelihood: the Bernoulli head has no discrete "
          "likelihood; score it with sigmoid_ce_loss");
  require(params.config.kind == ModelKind::baseline,
          "baseline_log_likelihood: model kind is vpn");
  return likelihood_from(model_loss(params, video, cond, scored_from));
}

double lower_bound_nats_per_frame(const Dataset& dataset, int scored_from) {
  require(!dataset.sequences.empty(), "lower_bound: empty dataset");
  require(scored_from >= 0, "lower_bound: negative scored_from");
  double total = 0.0;
  long long frames = 0;
  for (const auto& seq : dataset.sequences) {
    for (int t = scored_from; t < seq.frames; ++t) {
      const std::uint8_t* px = seq.pixels.data() + seq.frame_offset(t);
      const std::size_t n =
          static_cast<std::size_t>(seq.height) * seq.width * seq.channels;
      for (std::size_t k = 0; k < n; ++k) {
        const double z = px[k] / 255.0;
        total -= z * std::log(std::max(z, kLogFloor)) +
                 (1.0 - z) * std::log(std::max(1.0 - z, kLogFloor));
      }
      ++frames;
    }
  }
  require(frames > 0, "lower_bound: no frames at or after scored_from");
  return total / static_cast<double>(frames);
}

namespace {

// Stable categorical draw; also reports the log-probability of the choice.
int categorical_draw(const double* logits, int count, Rng& rng, double* log_prob) {
  double mx = logits[0];
  for (int k = 1; k < count; ++k) mx = std::max(mx, logits[k]);
  double sum = 0.0;
  for (int k = 0; k < count; ++k) sum += std::exp(logits[k] - mx);
  const double u = rng.uniform() * sum;
  double cum = 0.0;
  int choice = count - 1;
  for (int k = 0; k < count; ++k) {
    cum += std::exp(logits[k] - mx);
    if (u < cum) {
      choice = k;
      break;
    }
  }
  if (log_prob) *log_prob = logits[choice] - mx - std::log(sum);
  return choice;
}

}  // namespace

int sample_categorical(const double* logits, int count, Rng& rng) {
  require(count > 0, "sample_categorical: need at least one outcome");
  return categorical_draw(logits, count, rng, nullptr);
}

SampledFrame sample_frame_with(const ModelConfig& config, int height, int width,
                               const DecodeFn& decode, Rng& rng) {
  const int C = config.color_channels;
  Tensor partial = Tensor::zeros({height, width, C}, false);
  SampledFrame out;
  out.pixels.assign(static_cast<std::size_t>(height) * width * C, 0);
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      for (int c = 0; c < C; ++c) {
        Tensor dec = decode(partial);
        const std::size_t site = (static_cast<std::size_t>(i) * width + j) * C + c;
        if (config.head == HeadKind::softmax256) {
          require(dec.numel() ==
                      static_cast<long long>(height) * width * C * 256,
                  "sample_frame: decoder output is not [H,W,C*256] logits");
          const double* slice = dec.values().data() + site * 256;
          double lp = 0.0;
          const int value = categorical_draw(slice, 256, rng, &lp);
          out.log_prob += lp;
          out.pixels[site] = static_cast<std::uint8_t>(value);
          partial.values()[site] = value / 255.0;
        } else {
          require(dec.numel() == static_cast<long long>(height) * width * C,
                  "sample_frame: decoder output is not [H,W,C] probabilities");
          const double p = dec.values()[site];
          const bool on = rng.uniform() < p;
          out.log_prob += std::log(std::max(on ? p : 1.0 - p, kLogFloor));
          out.pixels[site] = on ? 255 : 0;
          partial.values()[site] = on ? 1.0 : 0.0;
        }
      }
    }
  }
  return out;
}

SampledFrame sample_frame(const ModelParams& params, const Tensor& context,
                          const CondVector* cond, Rng& rng) {
  require(context.defined() && context.rank() == 3,
          "sample_frame: context must be a [H,W,Ch] tensor");
  const Shape& cs = context.shape();
  return sample_frame_with(
      params.config, cs[0], cs[1],
      [&](const Tensor& partial) {
        return decode_frame(params, context, partial, cond);
      },
      rng);
}

Continuation generate_continuation(const ModelParams& params,
                                   const VideoSequence& seed_video,
                                   int context_frames, int predicted_frames,
                                   const Conditioning* cond, Rng& rng) {
  require(context_frames >= 1 && context_frames <= seed_video.frames,
          "generate_continuation: context frames outside the seed video");
  require(predicted_frames >= 1,
          "generate_continuation: need at least one frame to predict");
  require(seed_video.channels == params.config.color_channels,
          "generate_continuation: seed channels do not match the model");
  const int H = seed_video.height, W = seed_video.width, C = seed_video.channels;
  const int total = context_frames + predicted_frames;

  Continuation out;
  out.video.frames = total;
  out.video.height = H;
  out.video.width = W;
  out.video.channels = C;
  out.video.pixels.assign(
      static_cast<std::size_t>(total) * H * W * C, 0);
  std::copy_n(seed_video.pixels.begin(),
              static_cast<std::size_t>(context_frames) * H * W * C,
              out.video.pixels.begin());

  ConvLstmState state = make_lstm_state(H, W, params.config.lstm_channels);
  auto advance = [&](const Tensor& frame, int t) {
    const CondVector* c =
        pick_cond(params, cond ? &cond->encoder : nullptr, t,
                  "generate_continuation");
    state = encode_step(params, frame, state, c);
    // Generation never backpropagates; cut the graph so memory stays flat.
    state.hidden = state.hidden.detach();
    state.cell = state.cell.detach();
  };
  for (int t = 0; t < context_frames; ++t) {
    advance(frame_to_tensor(seed_video, t), t);
  }
  for (int t = context_frames; t < total; ++t) {
    const CondVector* c =
        pick_cond(params, cond ? &cond->decoder : nullptr, t,
                  "generate_continuation");
    SampledFrame frame = sample_frame(params, state.hidden, c, rng);
    std::copy(frame.pixels.begin(), frame.pixels.end(),
              out.video.pixels.begin() + out.video.frame_offset(t));
    out.log_prob += frame.log_prob;
    if (t + 1 < total) {
      advance(frame_to_tensor(out.video, t), t);
    }
  }
  return out;
}

}  // namespace vpn
