#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "vpn/blocks.hpp"
#include "vpn/config.hpp"
#include "vpn/data.hpp"
#include "vpn/rng.hpp"
#include "vpn/tensor.hpp"

namespace vpn {

// Conditioning vectors are always presented to the network as a fixed-width
// input: the action occupies slots 0..4 and the state slots 5..9; a missing
// component is zero-padded.
inline constexpr int kCondWidth = 10;
using CondVector = std::array<double, kCondWidth>;

// Per-frame conditioning inputs. encoder[t] accompanies frame t through the
// frame encoder (its action plus, for context steps, its state); decoder[t]
// conditions the generation of frame t (the action that produced it plus the
// previous state when that frame was a context step).
struct Conditioning {
  std::vector<CondVector> encoder;
  std::vector<CondVector> decoder;
};

Conditioning make_conditioning(const VideoSequence& sequence, int context_frames);

// The full parameter bundle for either model kind. The decoder of the
// autoregressive model reads the target frame through causally masked
// convolutions; the baseline decoder has no frame entry point at all.
struct ModelParams {
  ModelConfig config;

  ConvLayer enc_input;                         // 3x3, C -> width
  std::vector<ResidualBlockParams> enc_blocks; // dilation per schedule
  ConvLstmParams lstm;                         // width -> lstm_channels

  ConvLayer dec_frame;                         // masked 3x3, C -> width (vpn only)
  ConvLayer dec_fuse;                          // 1x1 fusion onto width channels
  std::vector<ResidualBlockParams> dec_blocks;
  ConvLayer head_hidden;                       // 1x1, width -> top_channels
  ConvLayer head_out;                          // 1x1, top -> C*256 or C

  // 1x1 projections of the conditioning vector, one per injection seam:
  // before every encoder block plus before the LSTM; before every decoder
  // block plus before the head. Empty when the model is unconditioned.
  std::vector<ConvLayer> enc_cond;
  std::vector<ConvLayer> dec_cond;
};

// Fresh parameters with a deterministic draw order from the given stream.
ModelParams build_model(const ModelConfig& config, Rng& rng);

// Stable (name, tensor) listing of every trainable parameter. Tensors alias
// the model's storage, so mutating a listed tensor mutates the model.
std::vector<std::pair<std::string, Tensor>> named_params(const ModelParams& params);

// Copies values into the model by name; every name must match in shape, and
// the two listings must cover each other exactly.
void load_named_values(ModelParams& params,
                       const std::vector<std::pair<std::string, Tensor>>& values);

// Frame t of a stored sequence as a real-valued [H,W,C] tensor in [0,1]
// (intensity / 255).
Tensor frame_to_tensor(const VideoSequence& sequence, int t);

// context[t] is the recurrent hidden state after consuming frames 0..t; it
// conditions the generation of frame t+1. Frame 0 is generated from a zero
// context.
struct ContextStack {
  std::vector<Tensor> context;
};

ContextStack encode_frames(const ModelParams& params, const VideoSequence& video,
                           const Conditioning* cond);

// One step of the frame encoder + recurrence; the returned state's hidden
// field is the context for the next frame.
ConvLstmState encode_step(const ModelParams& params, const Tensor& frame,
                          const ConvLstmState& state, const CondVector* cond);

Tensor zero_context(const ModelParams& params, int height, int width);

// cond -> 1x1 convolution to the layer width -> broadcast to every spatial
// position -> added onto the layer input.
Tensor condition_inject(const Tensor& layer_input, const CondVector& cond,
                        const ConvLayer& projection);

// Autoregressive decoder: masked first layer over the target frame, fused
// with the (unmasked) context, masked residual stack, masked head. Returns
// 256-way logits laid out [H,W,C*256] for the softmax head, or per-pixel
// probabilities [H,W,C] for the Bernoulli head.
Tensor decode_frame(const ModelParams& params, const Tensor& context,
                    const Tensor& target_frame, const CondVector* cond);

// Baseline decoder: identical stack shape but unmasked and with no access to
// the frame being predicted.
Tensor baseline_decode(const ModelParams& params, const Tensor& context,
                       const CondVector* cond);

// H(z,y) = -sum_i z_i log y_i + (1-z_i) log(1-y_i), logarithms floored at
// 1e-12. Rejects targets or predictions outside [0,1]. Scalar output.
Tensor sigmoid_ce_loss(const Tensor& targets, const Tensor& predictions);

// Teacher-forced training objective: the sum over frames scored_from..T-1 of
// the per-frame loss (exact negative log-likelihood for the softmax head,
// sigmoid cross-entropy for the Bernoulli head), with a per-frame breakdown.
struct FrameLosses {
  Tensor total;                   // scalar, graph-connected for backward
  std::vector<double> per_frame;  // one entry per scored frame
};

FrameLosses model_loss(const ModelParams& params, const VideoSequence& video,
                       const Conditioning* cond, int scored_from);

// Exact likelihood report in nats (softmax head only; the Bernoulli head has
// no discrete likelihood and must be scored through sigmoid_ce_loss).
struct Likelihood {
  double total_nats = 0.0;
  double nats_per_frame = 0.0;
  std::vector<double> frame_nats;
};

Likelihood vpn_log_likelihood(const ModelParams& params, const VideoSequence& video,
                              const Conditioning* cond, int scored_from);
Likelihood baseline_log_likelihood(const ModelParams& params,
                                   const VideoSequence& video,
                                   const Conditioning* cond, int scored_from);

// Mean over the scored frames of H(z,z): the entropy floor of the real-valued
// targets, the number a perfectly calibrated Bernoulli model attains.
double lower_bound_nats_per_frame(const Dataset& dataset, int scored_from);

// Draws an index from the softmax of `count` logits using one uniform draw.
int sample_categorical(const double* logits, int count, Rng& rng);

// Sequential generation over raster order and color channels. pixels holds
// H*W*C intensities; log_prob accumulates the log-probability of every drawn
// value, matching a teacher-forced rescore of the finished frame.
struct SampledFrame {
  std::vector<std::uint8_t> pixels;
  double log_prob = 0.0;
};

SampledFrame sample_frame(const ModelParams& params, const Tensor& context,
                          const CondVector* cond, Rng& rng);

// The same sampling loop with an arbitrary decoder, used to exercise the loop
// against stub decoders. decode receives the partially filled frame.
using DecodeFn = std::function<Tensor(const Tensor& partial_frame)>;
SampledFrame sample_frame_with(const ModelConfig& config, int height, int width,
                               const DecodeFn& decode, Rng& rng);

// Rolls the model forward: consumes the first context_frames frames of
// seed_video, then appends predicted_frames sampled frames, feeding each back
// through the encoder. Returns the stitched video and the total log-prob of
// all drawn values.
struct Continuation {
  VideoSequence video;
  double log_prob = 0.0;
};

Continuation generate_continuation(const ModelParams& params,
                                   const VideoSequence& seed_video,
                                   int context_frames, int predicted_frames,
                                   const Conditioning* cond, Rng& rng);

}  // namespace vpn
