#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "vpn/tensor.hpp"

namespace vpn {

// Builds the causal connectivity pattern for a kernel. Kernel extents must be
// odd; color_groups is 1 for grayscale and 3 for RGB, and channels split into
// contiguous near-equal group chunks (exactly equal when the count divides).
// Kind A is for the layer that first reads the frame being generated (a
// position may not see its own group); kind B is for every deeper layer.
MaskSpec build_mask(MaskKind kind, int kh, int kw, int channels_in,
                    int channels_out, int color_groups);

// One convolution plus optional bias, dilation, and causal mask. A
// default-constructed (undefined) bias tensor means "no bias term".
struct ConvLayer {
  Tensor weights;  // [kh,kw,Cin,Cout]
  Tensor bias;     // [Cout] or undefined
  int dilation = 1;
  std::optional<MaskSpec> mask;

  Tensor apply(const Tensor& x) const;
};

// Gated convolutional unit: three sigmoid gates and a tanh candidate over the
// same input, combined multiplicatively. Requires Cin == Cout because the
// input re-enters pointwise.
struct MuParams {
  ConvLayer out_gate;     // g1, multiplies the unit output
  ConvLayer in_gate;      // g2, gates the raw input
  ConvLayer update_gate;  // g3, gates the candidate
  ConvLayer candidate;    // u, tanh branch
};

Tensor mu_forward(const Tensor& h, const MuParams& params);

// Bottleneck residual block: 1x1 halving projection (no activation), two
// gated units, 1x1 expansion, additive skip.
struct RmbParams {
  ConvLayer project_in;   // 1x1, 2c -> c
  MuParams mu_first;
  MuParams mu_second;
  ConvLayer project_out;  // 1x1, c -> 2c
};

Tensor rmb_forward(const Tensor& h, const RmbParams& params);

// Plain ReLU bottleneck with the same projection structure and receptive
// field as the gated block; selectable for ablations.
struct ReluBlockParams {
  ConvLayer project_in;
  ConvLayer conv_first;
  ConvLayer conv_second;
  ConvLayer project_out;
};

Tensor relu_block_forward(const Tensor& h, const ReluBlockParams& params);

using ResidualBlockParams = std::variant<RmbParams, ReluBlockParams>;

Tensor residual_block_forward(const Tensor& h, const ResidualBlockParams& params);

// Convolutional LSTM, no peepholes, resolution preserving.
struct ConvLstmState {
  Tensor hidden;  // [H,W,Ch]
  Tensor cell;    // [H,W,Ch]
};

struct ConvLstmParams {
  ConvLayer input_x, input_h;    // i gate
  ConvLayer forget_x, forget_h;  // f gate
  ConvLayer output_x, output_h;  // o gate
  ConvLayer cand_x, cand_h;      // g candidate
};

ConvLstmState conv_lstm_step(const Tensor& x, const ConvLstmState& state,
                             const ConvLstmParams& params);

// Encoder blocks cycle through the scheme; decoder blocks never dilate. The
// rate is constant within each block.
std::vector<int> dilation_schedule(int num_blocks, const std::vector<int>& scheme,
                                   bool in_encoder);

// --- parameter factories -----------------------------------------------------
// Weights drawn uniformly from [-scale, scale], biases zero, everything marked
// trainable. Masked variants apply the given causal kind to every convolution
// in the block (1x1 projections included).

MuParams make_mu(int channels, int dilation, Rng& rng, double scale);
MuParams make_mu(int channels, int dilation, Rng& rng, double scale,
                 MaskKind kind, int color_groups);

RmbParams make_rmb(int width, int dilation, Rng& rng, double scale = 0.1);
RmbParams make_rmb(int width, int dilation, Rng& rng, double scale,
                   MaskKind kind, int color_groups);

ReluBlockParams make_relu_block(int width, int dilation, Rng& rng,
                                double scale = 0.1);
ReluBlockParams make_relu_block(int width, int dilation, Rng& rng, double scale,
                                MaskKind kind, int color_groups);

ResidualBlockParams make_residual_block(bool gated, int width, int dilation,
                                        Rng& rng, double scale);
ResidualBlockParams make_residual_block(bool gated, int width, int dilation,
                                        Rng& rng, double scale, MaskKind kind,
                                        int color_groups);

// A single convolution layer factory; pass color_groups 0 for no mask.
ConvLayer make_conv_layer(int kh, int kw, int channels_in, int channels_out,
                          int dilation, Rng& rng, double scale, bool with_bias);
ConvLayer make_conv_layer(int kh, int kw, int channels_in, int channels_out,
                          int dilation, Rng& rng, double scale, bool with_bias,
                          MaskKind kind, int color_groups);

// Gate biases live on the input-side convolutions; the recurrent convolutions
// carry none. The forget-gate bias starts at 1.0 so early training does not
// immediately erase the cell.
ConvLstmParams make_conv_lstm(int channels_in, int channels_hidden, Rng& rng,
                              double scale = 0.1);
ConvLstmState make_lstm_state(int height, int width, int channels);

// Every trainable tensor in a parameter bundle, in a fixed traversal order.
std::vector<Tensor> collect_params(const MuParams& p);
std::vector<Tensor> collect_params(const RmbParams& p);
std::vector<Tensor> collect_params(const ReluBlockParams& p);
std::vector<Tensor> collect_params(const ResidualBlockParams& p);
std::vector<Tensor> collect_params(const ConvLstmParams& p);
std::vector<Tensor> collect_params(const ConvLayer& l);

}  // namespace vpn
