#pragma once

// Independent reference implementations used only by tests. Everything here
// is written as direct transcriptions with naive indexing and stays separate
// from the library's compute paths on purpose.

#include <cstddef>
#include <vector>

namespace oracle {

// Plain buffers; layout matches the library ([H,W,C] and [kh,kw,Cin,Cout]).
struct Image {
  int height = 0, width = 0, channels = 0;
  std::vector<double> data;

  double& at(int i, int j, int c) {
    return data[(static_cast<std::size_t>(i) * width + j) * channels + c];
  }
  double at(int i, int j, int c) const {
    return data[(static_cast<std::size_t>(i) * width + j) * channels + c];
  }
};

Image make_image(int height, int width, int channels, double fill = 0.0);

struct Kernel {
  int kh = 0, kw = 0, cin = 0, cout = 0;
  std::vector<double> data;

  double& at(int u, int v, int ci, int co) {
    return data[((static_cast<std::size_t>(u) * kw + v) * cin + ci) * cout + co];
  }
  double at(int u, int v, int ci, int co) const {
    return data[((static_cast<std::size_t>(u) * kw + v) * cin + ci) * cout + co];
  }
};

Kernel make_kernel(int kh, int kw, int cin, int cout, double fill = 0.0);

// Brute-force same-padded cross-correlation with dilation; mask (same layout
// as the kernel, may be empty for "no mask") zeroes taps.
Image conv2d(const Image& input, const Kernel& kernel, int dilation,
             const std::vector<double>& mask = {});

double sigmoid(double x);

// Direct transcription of the gated unit: three sigmoid gates, tanh
// candidate, multiplicative combination. Biases per output channel.
struct MuWeights {
  Kernel w1, w2, w3, w4;
  std::vector<double> b1, b2, b3, b4;
  int dilation = 1;
  std::vector<double> mask_w1, mask_w2, mask_w3, mask_w4;  // empty = unmasked
};

Image mu(const Image& h, const MuWeights& w);

struct RmbWeights {
  Kernel project_in;            // 1x1
  std::vector<double> bias_in;
  MuWeights mu_first, mu_second;
  Kernel project_out;           // 1x1
  std::vector<double> bias_out;
};

Image rmb(const Image& h, const RmbWeights& w);

struct LstmWeights {
  Kernel xi, hi, xf, hf, xo, ho, xg, hg;
  std::vector<double> bi, bf, bo, bg;
};

struct LstmState {
  Image hidden, cell;
};

LstmState lstm_step(const Image& x, const LstmState& state, const LstmWeights& w);

// One-dimensional bouncing point: position advances by velocity, reflects at
// 0 and at limit (p' = 2*limit - p or p' = -p), velocity negates on contact.
struct Bounce1D {
  long long position;
  long long velocity;
};

Bounce1D bounce_step(Bounce1D state, long long limit);

// One-dimensional pushing: the passive object moves by the pusher's velocity
// exactly when their intervals overlap after the pusher moves. Both are
// clamped to [0, limit].
struct Push1D {
  long long pusher;        // interval [pusher, pusher+pusher_size)
  long long object;        // interval [object, object+object_size)
};

Push1D push_step(Push1D state, long long velocity, long long pusher_size,
                 long long object_size, long long limit);

}  // namespace oracle
