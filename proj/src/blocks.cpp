#include "vpn/blocks.hpp"

#include <stdexcept>
#include <string>

namespace vpn {

namespace {

// Contiguous chunks in R, G, B order; exactly equal thirds whenever the
// channel count divides, near-equal otherwise (needed for widths like 256).
int color_group_of(int channel, int channels, int groups) {
  return channel * groups / channels;
}

}  // namespace

MaskSpec build_mask(MaskKind kind, int kh, int kw, int channels_in,
                    int channels_out, int color_groups) {
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw std::invalid_argument("build_mask: kernel extents must be odd, got " +
                                std::to_string(kh) + "x" + std::to_string(kw));
  }
  if (color_groups != 1 && color_groups != 3) {
    throw std::invalid_argument("build_mask: color_groups must be 1 or 3, got " +
                                std::to_string(color_groups));
  }
  if (channels_in < color_groups || channels_out < color_groups) {
    throw std::invalid_argument("build_mask: need at least one channel per color "
                                "group, got " +
                                std::to_string(channels_in) + "," +
                                std::to_string(channels_out) + " for " +
                                std::to_string(color_groups) + " groups");
  }
  const int uc = kh / 2, vc = kw / 2;
  auto values = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(kh) * kw * channels_in * channels_out, 0.0);
  for (int u = 0; u < kh; ++u) {
    for (int v = 0; v < kw; ++v) {
      for (int ci = 0; ci < channels_in; ++ci) {
        for (int co = 0; co < channels_out; ++co) {
          bool open;
          if (u < uc) {
            open = true;
          } else if (u > uc) {
            open = false;
          } else if (v < vc) {
            open = true;
          } else if (v > vc) {
            open = false;
          } else {
            const int gi = color_group_of(ci, channels_in, color_groups);
            const int go = color_group_of(co, channels_out, color_groups);
            open = kind == MaskKind::A ? gi < go : gi <= go;
          }
          if (open) {
            (*values)[((static_cast<std::size_t>(u) * kw + v) * channels_in + ci) *
                          channels_out +
                      co] = 1.0;
          }
        }
      }
    }
  }
  MaskSpec spec;
  spec.kind = kind;
  spec.kh = kh;
  spec.kw = kw;
  spec.channels_in = channels_in;
  spec.channels_out = channels_out;
  spec.color_groups = color_groups;
  spec.weight_mask = std::move(values);
  return spec;
}

Tensor ConvLayer::apply(const Tensor& x) const {
  const Shape& ws = weights.shape();
  ConvSpec spec{ws[0], ws[1], dilation, ws[2], ws[3]};
  Tensor y = conv2d(x, weights, spec, mask ? &*mask : nullptr);
  if (bias.defined()) y = add_channel_bias(y, bias);
  return y;
}

Tensor mu_forward(const Tensor& h, const MuParams& params) {
  if (params.in_gate.weights.shape()[2] != params.in_gate.weights.shape()[3]) {
    throw std::invalid_argument(
        "mu_forward: input re-enters pointwise, channels in/out must match, got " +
        shape_str(params.in_gate.weights.shape()));
  }
  Tensor g1 = sigmoid(params.out_gate.apply(h));
  Tensor g2 = sigmoid(params.in_gate.apply(h));
  Tensor g3 = sigmoid(params.update_gate.apply(h));
  Tensor u = tanh(params.candidate.apply(h));
  return g1 * tanh(g2 * h + g3 * u);
}

Tensor rmb_forward(const Tensor& h, const RmbParams& params) {
  if (h.shape()[2] % 2 != 0) {
    throw std::invalid_argument("rmb_forward: external width must be even, got " +
                                shape_str(h.shape()));
  }
  Tensor narrowed = params.project_in.apply(h);  // no activation here
  Tensor a = mu_forward(narrowed, params.mu_first);
  Tensor b = mu_forward(a, params.mu_second);
  return h + params.project_out.apply(b);
}

Tensor relu_block_forward(const Tensor& h, const ReluBlockParams& params) {
  Tensor narrowed = params.project_in.apply(h);
  Tensor a = relu(params.conv_first.apply(narrowed));
  Tensor b = relu(params.conv_second.apply(a));
  return h + params.project_out.apply(b);
}

Tensor residual_block_forward(const Tensor& h, const ResidualBlockParams& params) {
  if (const auto* rmb = std::get_if<RmbParams>(&params)) return rmb_forward(h, *rmb);
  return relu_block_forward(h, std::get<ReluBlockParams>(params));
}

ConvLstmState conv_lstm_step(const Tensor& x, const ConvLstmState& state,
                             const ConvLstmParams& params) {
  if (x.shape()[0] != state.hidden.shape()[0] ||
      x.shape()[1] != state.hidden.shape()[1]) {
    throw std::invalid_argument("conv_lstm_step: spatial extents differ, input " +
                                shape_str(x.shape()) + " vs state " +
                                shape_str(state.hidden.shape()));
  }
  Tensor i = sigmoid(params.input_x.apply(x) + params.input_h.apply(state.hidden));
  Tensor f = sigmoid(params.forget_x.apply(x) + params.forget_h.apply(state.hidden));
  Tensor o = sigmoid(params.output_x.apply(x) + params.output_h.apply(state.hidden));
  Tensor g = tanh(params.cand_x.apply(x) + params.cand_h.apply(state.hidden));
  ConvLstmState next;
  next.cell = f * state.cell + i * g;
  next.hidden = o * tanh(next.cell);
  return next;
}

std::vector<int> dilation_schedule(int num_blocks, const std::vector<int>& scheme,
                                   bool in_encoder) {
  if (num_blocks < 1) {
    throw std::invalid_argument("dilation_schedule: need at least one block");
  }
  if (!in_encoder) return std::vector<int>(static_cast<std::size_t>(num_blocks), 1);
  if (scheme.empty()) {
    throw std::invalid_argument("dilation_schedule: empty scheme");
  }
  std::vector<int> rates(static_cast<std::size_t>(num_blocks));
  for (int b = 0; b < num_blocks; ++b) rates[b] = scheme[b % scheme.size()];
  return rates;
}

// --- parameter factories -----------------------------------------------------

ConvLayer make_conv_layer(int kh, int kw, int channels_in, int channels_out,
                          int dilation, Rng& rng, double scale, bool with_bias) {
  ConvLayer layer;
  layer.weights =
      Tensor::uniform({kh, kw, channels_in, channels_out}, rng, -scale, scale, true);
  if (with_bias) layer.bias = Tensor::zeros({channels_out}, true);
  layer.dilation = dilation;
  return layer;
}

ConvLayer make_conv_layer(int kh, int kw, int channels_in, int channels_out,
                          int dilation, Rng& rng, double scale, bool with_bias,
                          MaskKind kind, int color_groups) {
  ConvLayer layer =
      make_conv_layer(kh, kw, channels_in, channels_out, dilation, rng, scale, with_bias);
  layer.mask = build_mask(kind, kh, kw, channels_in, channels_out, color_groups);
  return layer;
}

MuParams make_mu(int channels, int dilation, Rng& rng, double scale) {
  MuParams p;
  p.out_gate = make_conv_layer(3, 3, channels, channels, dilation, rng, scale, true);
  p.in_gate = make_conv_layer(3, 3, channels, channels, dilation, rng, scale, true);
  p.update_gate = make_conv_layer(3, 3, channels, channels, dilation, rng, scale, true);
  p.candidate = make_conv_layer(3, 3, channels, channels, dilation, rng, scale, true);
  return p;
}

MuParams make_mu(int channels, int dilation, Rng& rng, double scale,
                 MaskKind kind, int color_groups) {
  MuParams p;
  p.out_gate = make_conv_layer(3, 3, channels, channels, dilation, rng, scale, true,
                               kind, color_groups);
  p.in_gate = make_conv_layer(3, 3, channels, channels, dilation, rng, scale, true,
                              kind, color_groups);
  p.update_gate = make_conv_layer(3, 3, channels, channels, dilation, rng, scale,
                                  true, kind, color_groups);
  p.candidate = make_conv_layer(3, 3, channels, channels, dilation, rng, scale, true,
                                kind, color_groups);
  return p;
}

namespace {

void require_even_width(int width, const char* who) {
  if (width % 2 != 0) {
    throw std::invalid_argument(std::string(who) +
                                ": external width must be even, got " +
                                std::to_string(width));
  }
}

}  // namespace

RmbParams make_rmb(int width, int dilation, Rng& rng, double scale) {
  require_even_width(width, "make_rmb");
  const int c = width / 2;
  RmbParams p;
  p.project_in = make_conv_layer(1, 1, width, c, 1, rng, scale, true);
  p.mu_first = make_mu(c, dilation, rng, scale);
  p.mu_second = make_mu(c, dilation, rng, scale);
  p.project_out = make_conv_layer(1, 1, c, width, 1, rng, scale, true);
  return p;
}

RmbParams make_rmb(int width, int dilation, Rng& rng, double scale, MaskKind kind,
                   int color_groups) {
  require_even_width(width, "make_rmb");
  const int c = width / 2;
  RmbParams p;
  p.project_in =
      make_conv_layer(1, 1, width, c, 1, rng, scale, true, kind, color_groups);
  p.mu_first = make_mu(c, dilation, rng, scale, kind, color_groups);
  p.mu_second = make_mu(c, dilation, rng, scale, kind, color_groups);
  p.project_out =
      make_conv_layer(1, 1, c, width, 1, rng, scale, true, kind, color_groups);
  return p;
}

ReluBlockParams make_relu_block(int width, int dilation, Rng& rng, double scale) {
  require_even_width(width, "make_relu_block");
  const int c = width / 2;
  ReluBlockParams p;
  p.project_in = make_conv_layer(1, 1, width, c, 1, rng, scale, true);
  p.conv_first = make_conv_layer(3, 3, c, c, dilation, rng, scale, true);
  p.conv_second = make_conv_layer(3, 3, c, c, dilation, rng, scale, true);
  p.project_out = make_conv_layer(1, 1, c, width, 1, rng, scale, true);
  return p;
}

ReluBlockParams make_relu_block(int width, int dilation, Rng& rng, double scale,
                                MaskKind kind, int color_groups) {
  require_even_width(width, "make_relu_block");
  const int c = width / 2;
  ReluBlockParams p;
  p.project_in =
      make_conv_layer(1, 1, width, c, 1, rng, scale, true, kind, color_groups);
  p.conv_first = make_conv_layer(3, 3, c, c, dilation, rng, scale, true, kind,
                                 color_groups);
  p.conv_second = make_conv_layer(3, 3, c, c, dilation, rng, scale, true, kind,
                                  color_groups);
  p.project_out =
      make_conv_layer(1, 1, c, width, 1, rng, scale, true, kind, color_groups);
  return p;
}

ResidualBlockParams make_residual_block(bool gated, int width, int dilation,
                                        Rng& rng, double scale) {
  if (gated) return make_rmb(width, dilation, rng, scale);
  return make_relu_block(width, dilation, rng, scale);
}

ResidualBlockParams make_residual_block(bool gated, int width, int dilation,
                                        Rng& rng, double scale, MaskKind kind,
                                        int color_groups) {
  if (gated) return make_rmb(width, dilation, rng, scale, kind, color_groups);
  return make_relu_block(width, dilation, rng, scale, kind, color_groups);
}

ConvLstmParams make_conv_lstm(int channels_in, int channels_hidden, Rng& rng,
                              double scale) {
  ConvLstmParams p;
  auto xconv = [&] {
    return make_conv_layer(3, 3, channels_in, channels_hidden, 1, rng, scale, true);
  };
  auto hconv = [&] {
    return make_conv_layer(3, 3, channels_hidden, channels_hidden, 1, rng, scale,
                           false);
  };
  p.input_x = xconv();
  p.input_h = hconv();
  p.forget_x = xconv();
  p.forget_h = hconv();
  p.output_x = xconv();
  p.output_h = hconv();
  p.cand_x = xconv();
  p.cand_h = hconv();
  // Start with the forget gate mostly open so the cell survives early updates.
  for (double& b : p.forget_x.bias.values()) b = 1.0;
  return p;
}

ConvLstmState make_lstm_state(int height, int width, int channels) {
  ConvLstmState s;
  s.hidden = Tensor::zeros({height, width, channels});
  s.cell = Tensor::zeros({height, width, channels});
  return s;
}

std::vector<Tensor> collect_params(const ConvLayer& l) {
  std::vector<Tensor> out;
  out.push_back(l.weights);
  if (l.bias.defined()) out.push_back(l.bias);
  return out;
}

namespace {

void append_params(std::vector<Tensor>& out, const std::vector<Tensor>& more) {
  out.insert(out.end(), more.begin(), more.end());
}

}  // namespace

std::vector<Tensor> collect_params(const MuParams& p) {
  std::vector<Tensor> out;
  append_params(out, collect_params(p.out_gate));
  append_params(out, collect_params(p.in_gate));
  append_params(out, collect_params(p.update_gate));
  append_params(out, collect_params(p.candidate));
  return out;
}

std::vector<Tensor> collect_params(const RmbParams& p) {
  std::vector<Tensor> out;
  append_params(out, collect_params(p.project_in));
  append_params(out, collect_params(p.mu_first));
  append_params(out, collect_params(p.mu_second));
  append_params(out, collect_params(p.project_out));
  return out;
}

std::vector<Tensor> collect_params(const ReluBlockParams& p) {
  std::vector<Tensor> out;
  append_params(out, collect_params(p.project_in));
  append_params(out, collect_params(p.conv_first));
  append_params(out, collect_params(p.conv_second));
  append_params(out, collect_params(p.project_out));
  return out;
}

std::vector<Tensor> collect_params(const ResidualBlockParams& p) {
  if (const auto* rmb = std::get_if<RmbParams>(&p)) return collect_params(*rmb);
  return collect_params(std::get<ReluBlockParams>(p));
}

std::vector<Tensor> collect_params(const ConvLstmParams& p) {
  std::vector<Tensor> out;
  append_params(out, collect_params(p.input_x));
  append_params(out, collect_params(p.input_h));
  append_params(out, collect_params(p.forget_x));
  append_params(out, collect_params(p.forget_h));
  append_params(out, collect_params(p.output_x));
  append_params(out, collect_params(p.output_h));
  append_params(out, collect_params(p.cand_x));
  append_params(out, collect_params(p.cand_h));
  return out;
}

}  // namespace vpn
