#include "vpn/probes.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "vpn/blocks.hpp"
#include "vpn/gradcheck.hpp"
#include "vpn/model.hpp"
#include "vpn/rng.hpp"
#include "vpn/tensor.hpp"

namespace vpn {

namespace {

VideoSequence random_video(int frames, int size, int channels, Rng& rng) {
  VideoSequence v;
  v.frames = frames;
  v.height = size;
  v.width = size;
  v.channels = channels;
  v.pixels.resize(static_cast<std::size_t>(frames) * size * size * channels);
  for (auto& px : v.pixels) {
    px = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  }
  return v;
}

// Teacher-forced decoder outputs for every frame, as raw buffers.
std::vector<std::vector<double>> frame_outputs(const ModelParams& params,
                                               const VideoSequence& video) {
  ContextStack contexts = encode_frames(params, video, nullptr);
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<std::size_t>(video.frames));
  for (int t = 0; t < video.frames; ++t) {
    Tensor context = t == 0
                         ? zero_context(params, video.height, video.width)
                         : contexts.context[static_cast<std::size_t>(t - 1)];
    Tensor decoded =
        params.config.kind == ModelKind::vpn
            ? decode_frame(params, context, frame_to_tensor(video, t), nullptr)
            : baseline_decode(params, context, nullptr);
    out.push_back(decoded.values());
  }
  return out;
}

}  // namespace

CausalityResult causality_probe(const ModelConfig& config, int size, int frames,
                                std::uint64_t seed) {
  if (config.kind != ModelKind::vpn || config.head != HeadKind::softmax256 ||
      config.conditioned) {
    throw std::invalid_argument(
        "causality_probe: needs the unconditioned autoregressive model with "
        "256-way logits");
  }
  const auto started = std::chrono::steady_clock::now();
  Rng rng(seed);
  ModelParams model = build_model(config, rng);
  const int C = config.color_channels;
  VideoSequence video = random_video(frames, size, C, rng);
  const auto base = frame_outputs(model, video);

  CausalityResult result;
  for (int t = 0; t < frames; ++t) {
    for (int i = 0; i < size; ++i) {
      for (int j = 0; j < size; ++j) {
        for (int c = 0; c < C; ++c) {
          VideoSequence perturbed = video;
          perturbed.at(t, i, j, c) = static_cast<std::uint8_t>(
              (video.at(t, i, j, c) + 128) % 256);
          const auto out = frame_outputs(model, perturbed);
          ++result.perturbations;
          bool any_change = false;
          // Frames before t must be untouched wholesale.
          for (int tp = 0; tp < t; ++tp) {
            const auto& cur = out[static_cast<std::size_t>(tp)];
            const auto& ref = base[static_cast<std::size_t>(tp)];
            for (std::size_t k = 0; k < ref.size(); ++k) {
              if (cur[k] != ref[k]) {
                ++result.leaked_coordinates;
                break;
              }
            }
          }
          // Within frame t, every logit slice up to and including (i,j,c).
          const auto& cur = out[static_cast<std::size_t>(t)];
          const auto& ref = base[static_cast<std::size_t>(t)];
          const std::size_t key =
              (static_cast<std::size_t>(i) * size + j) * C + c;
          for (std::size_t pos = 0; pos <= key; ++pos) {
            for (int k = 0; k < 256; ++k) {
              if (cur[pos * 256 + k] != ref[pos * 256 + k]) {
                ++result.leaked_coordinates;
                break;
              }
            }
          }
          for (std::size_t tp = 0; tp < out.size() && !any_change; ++tp) {
            if (out[tp] != base[tp]) any_change = true;
          }
          if (any_change) result.later_changed = true;
        }
      }
    }
  }
  result.seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - started)
                       .count();
  return result;
}

CausalityResult baseline_independence_probe(const ModelConfig& config, int size,
                                            int frames, std::uint64_t seed) {
  if (config.kind != ModelKind::baseline ||
      config.head != HeadKind::softmax256 || config.conditioned) {
    throw std::invalid_argument(
        "baseline_independence_probe: needs the unconditioned baseline model "
        "with 256-way logits");
  }
  const auto started = std::chrono::steady_clock::now();
  Rng rng(seed);
  ModelParams model = build_model(config, rng);
  const int C = config.color_channels;
  VideoSequence video = random_video(frames, size, C, rng);
  const auto base = frame_outputs(model, video);

  CausalityResult result;
  for (int t = 0; t < frames; ++t) {
    for (int i = 0; i < size; ++i) {
      for (int j = 0; j < size; ++j) {
        for (int c = 0; c < C; ++c) {
          VideoSequence perturbed = video;
          perturbed.at(t, i, j, c) = static_cast<std::uint8_t>(
              (video.at(t, i, j, c) + 128) % 256);
          const auto out = frame_outputs(model, perturbed);
          ++result.perturbations;
          // Frames up to and INCLUDING t are invariant: the decoder of frame
          // t reads only the context built from frames before t.
          for (int tp = 0; tp <= t; ++tp) {
            if (out[static_cast<std::size_t>(tp)] !=
                base[static_cast<std::size_t>(tp)]) {
              ++result.leaked_coordinates;
            }
          }
          for (int tp = t + 1; tp < frames; ++tp) {
            if (out[static_cast<std::size_t>(tp)] !=
                base[static_cast<std::size_t>(tp)]) {
              result.later_changed = true;
            }
          }
        }
      }
    }
  }
  result.seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - started)
                       .count();
  return result;
}

ReceptiveFieldResult receptive_field_probe(bool dilated, int size,
                                           std::uint64_t seed) {
  const int num_blocks = 8;
  const int width = 4;
  Rng rng(seed);
  std::vector<int> dilations =
      dilated ? dilation_schedule(num_blocks, {1, 2, 4, 8}, true)
              : std::vector<int>(num_blocks, 1);

  ConvLayer input = make_conv_layer(3, 3, 1, width, 1, rng, 0.1, true);
  std::vector<RmbParams> blocks;
  for (int b = 0; b < num_blocks; ++b) {
    blocks.push_back(make_rmb(width, dilations[static_cast<std::size_t>(b)], rng, 0.1));
  }

  Tensor x = Tensor::uniform({size, size, 1}, rng, -1.0, 1.0, true);
  Tensor y = input.apply(x);
  for (const RmbParams& block : blocks) y = rmb_forward(y, block);

  // Select the center activation of channel 0 with a one-hot product.
  const int center = size / 2;
  std::vector<double> pick(y.values().size(), 0.0);
  pick[(static_cast<std::size_t>(center) * size + center) * width] = 1.0;
  Tensor loss = reduce_sum(mul(y, Tensor::from_data(y.shape(), std::move(pick))));
  loss.backward();

  int sum_d = 0;
  for (int d : dilations) sum_d += d;
  const int radius = 1 + 2 * sum_d;  // input conv + two 3x3 layers per block

  ReceptiveFieldResult result;
  result.expected_width = 2 * radius + 1;
  const auto& grad = x.grad();
  int min_i = size, max_i = -1, min_j = size, max_j = -1;
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      if (grad[static_cast<std::size_t>(i) * size + j] != 0.0) {
        min_i = std::min(min_i, i);
        max_i = std::max(max_i, i);
        min_j = std::min(min_j, j);
        max_j = std::max(max_j, j);
        if (std::abs(i - center) > radius || std::abs(j - center) > radius) {
          ++result.nonzero_outside;
        }
      }
    }
  }
  if (max_i >= 0) {
    result.measured_rows = max_i - min_i + 1;
    result.measured_cols = max_j - min_j + 1;
    result.centered = min_i == center - radius && max_i == center + radius &&
                      min_j == center - radius && max_j == center + radius;
  }
  return result;
}

GradcheckResult gradcheck_probe(std::uint64_t seed) {
  Rng rng(seed);
  GradcheckResult result;
  result.tolerance = 1e-4;

  auto run = [&](const std::string& name,
                 const std::function<Tensor(const Tensor&)>& f,
                 const Tensor& at) {
    GradCheckReport report = finite_diff_check(f, at, result.tolerance);
    result.checked.push_back(name);
    result.max_rel_error = std::max(result.max_rel_error, report.max_rel_error);
    if (!report.passed()) {
      result.failed.push_back(name + ": " + report.summary());
    }
  };

  {
    ConvLayer layer = make_conv_layer(3, 3, 4, 4, 1, rng, 0.3, true);
    Tensor at = Tensor::uniform({6, 6, 4}, rng, -1.0, 1.0, false);
    run("conv2d", [&](const Tensor& x) { return layer.apply(x); }, at);
  }
  {
    ConvLayer layer = make_conv_layer(3, 3, 4, 4, 2, rng, 0.3, true);
    Tensor at = Tensor::uniform({7, 7, 4}, rng, -1.0, 1.0, false);
    run("conv2d-dilated", [&](const Tensor& x) { return layer.apply(x); }, at);
  }
  {
    ConvLayer layer =
        make_conv_layer(3, 3, 6, 6, 1, rng, 0.3, true, MaskKind::A, 3);
    Tensor at = Tensor::uniform({5, 5, 6}, rng, -1.0, 1.0, false);
    run("conv2d-mask-a", [&](const Tensor& x) { return layer.apply(x); }, at);
  }
  {
    ConvLayer layer =
        make_conv_layer(3, 3, 6, 6, 1, rng, 0.3, true, MaskKind::B, 3);
    Tensor at = Tensor::uniform({5, 5, 6}, rng, -1.0, 1.0, false);
    run("conv2d-mask-b", [&](const Tensor& x) { return layer.apply(x); }, at);
  }
  {
    MuParams unit = make_mu(4, 1, rng, 0.3);
    Tensor at = Tensor::uniform({5, 5, 4}, rng, -1.0, 1.0, false);
    run("mu", [&](const Tensor& x) { return mu_forward(x, unit); }, at);
  }
  {
    MuParams unit = make_mu(4, 2, rng, 0.3);
    Tensor at = Tensor::uniform({6, 6, 4}, rng, -1.0, 1.0, false);
    run("mu-dilated", [&](const Tensor& x) { return mu_forward(x, unit); }, at);
  }
  {
    RmbParams block = make_rmb(8, 1, rng, 0.3);
    Tensor at = Tensor::uniform({5, 5, 8}, rng, -1.0, 1.0, false);
    run("rmb", [&](const Tensor& x) { return rmb_forward(x, block); }, at);
  }
  {
    ResidualBlockParams block =
        make_residual_block(true, 6, 1, rng, 0.3, MaskKind::B, 3);
    Tensor at = Tensor::uniform({5, 5, 6}, rng, -1.0, 1.0, false);
    run("rmb-masked",
        [&](const Tensor& x) { return residual_block_forward(x, block); }, at);
  }
  {
    ResidualBlockParams block = make_residual_block(false, 8, 1, rng, 0.3);
    Tensor at = Tensor::uniform({5, 5, 8}, rng, -1.0, 1.0, false);
    run("relu-block",
        [&](const Tensor& x) { return residual_block_forward(x, block); }, at);
  }
  {
    ConvLstmParams recurrent = make_conv_lstm(4, 4, rng, 0.3);
    ConvLstmState state;
    state.hidden = Tensor::uniform({5, 5, 4}, rng, -1.0, 1.0, false);
    state.cell = Tensor::uniform({5, 5, 4}, rng, -1.0, 1.0, false);
    Tensor at = Tensor::uniform({5, 5, 4}, rng, -1.0, 1.0, false);
    run("conv-lstm-input",
        [&](const Tensor& x) {
          ConvLstmState next = conv_lstm_step(x, state, recurrent);
          return add(next.hidden, next.cell);
        },
        at);
    Tensor frame = Tensor::uniform({5, 5, 4}, rng, -1.0, 1.0, false);
    run("conv-lstm-hidden",
        [&](const Tensor& h) {
          ConvLstmState prev{h, state.cell};
          ConvLstmState next = conv_lstm_step(frame, prev, recurrent);
          return add(next.hidden, next.cell);
        },
        state.hidden);
  }
  {
    std::vector<int> classes;
    Rng cls(Rng::derive(seed, "classes"));
    for (int i = 0; i < 12; ++i) {
      classes.push_back(static_cast<int>(cls.uniform_int(0, 7)));
    }
    Tensor at = Tensor::uniform({12, 8}, rng, -2.0, 2.0, false);
    run("softmax-loss",
        [&](const Tensor& x) {
          Tensor lp = softmax_logits_to_logprob(x);
          return scale(reduce_sum(gather_last(lp, classes)), -1.0);
        },
        at);
  }
  {
    Tensor targets = Tensor::uniform({5, 5, 2}, rng, 0.0, 1.0, false);
    Tensor at = Tensor::uniform({5, 5, 2}, rng, -2.0, 2.0, false);
    run("bernoulli-loss",
        [&](const Tensor& x) { return sigmoid_ce_loss(targets, sigmoid(x)); },
        at);
  }
  {
    // Masked head pair with the interposed rectifier, checked away from the
    // rectifier's kink by construction (random preactivations).
    ConvLayer hidden =
        make_conv_layer(1, 1, 6, 6, 1, rng, 0.3, true, MaskKind::B, 3);
    ConvLayer out =
        make_conv_layer(1, 1, 6, 12, 1, rng, 0.3, true, MaskKind::B, 3);
    Tensor at = Tensor::uniform({4, 4, 6}, rng, -1.0, 1.0, false);
    run("masked-head",
        [&](const Tensor& x) { return out.apply(relu(hidden.apply(x))); }, at);
  }
  return result;
}

NormalizationResult normalization_probe(std::uint64_t seed) {
  NormalizationResult result;
  result.tolerance = 1e-9;

  ModelConfig config;
  config.kind = ModelKind::vpn;
  config.head = HeadKind::softmax256;
  config.block_kind = BlockKind::rmb;
  config.encoder_blocks = 1;
  config.decoder_blocks = 1;
  config.block_width = 8;
  config.lstm_channels = 4;
  config.top_channels = 8;
  config.color_channels = 1;
  Rng rng(seed);
  ModelParams model = build_model(config, rng);

  const int size = 4;
  VideoSequence video = random_video(1, size, 1, rng);
  Tensor logits = decode_frame(model, zero_context(model, size, size),
                               frame_to_tensor(video, 0), nullptr);
  Tensor log_probs =
      softmax_logits_to_logprob(reshape(logits, {size * size, 256}));
  for (int site = 0; site < size * size; ++site) {
    double sum = 0.0;
    for (int k = 0; k < 256; ++k) {
      sum += std::exp(
          log_probs.values()[static_cast<std::size_t>(site) * 256 + k]);
    }
    result.worst_slice_error =
        std::max(result.worst_slice_error, std::fabs(sum - 1.0));
  }

  VideoSequence pixel;
  pixel.frames = 1;
  pixel.height = 1;
  pixel.width = 1;
  pixel.channels = 1;
  pixel.pixels = {0};
  double total = 0.0;
  for (int value = 0; value < 256; ++value) {
    pixel.pixels[0] = static_cast<std::uint8_t>(value);
    total += std::exp(-vpn_log_likelihood(model, pixel, nullptr, 0).total_nats);
  }
  result.enumeration_error = std::fabs(total - 1.0);
  return result;
}

}  // namespace vpn
