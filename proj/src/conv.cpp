#include <cstddef>
#include <stdexcept>
#include <vector>

#include "op_builder.hpp"
#include "vpn/tensor.hpp"

namespace vpn {

namespace {

// Innermost loops run over the output-channel axis, which is contiguous in
// both the [H,W,C] activations and the [kh,kw,Cin,Cout] weights.
void conv_forward(const double* in, const double* w, double* out, int height,
                  int width, int cin, int cout, int kh, int kw, int dilation) {
  const int uc = kh / 2, vc = kw / 2;
  for (int i = 0; i < height; ++i) {
    for (int u = 0; u < kh; ++u) {
      const int ii = i + (u - uc) * dilation;
      if (ii < 0 || ii >= height) continue;
      for (int j = 0; j < width; ++j) {
        double* orow = out + (static_cast<std::size_t>(i) * width + j) * cout;
        for (int v = 0; v < kw; ++v) {
          const int jj = j + (v - vc) * dilation;
          if (jj < 0 || jj >= width) continue;
          const double* irow = in + (static_cast<std::size_t>(ii) * width + jj) * cin;
          const double* wtap =
              w + (static_cast<std::size_t>(u) * kw + v) * cin * cout;
          for (int ci = 0; ci < cin; ++ci) {
            const double a = irow[ci];
            const double* wrow = wtap + static_cast<std::size_t>(ci) * cout;
            for (int co = 0; co < cout; ++co) orow[co] += a * wrow[co];
          }
        }
      }
    }
  }
}

void conv_backward_input(const double* gout, const double* w, double* gin,
                         int height, int width, int cin, int cout, int kh,
                         int kw, int dilation) {
  const int uc = kh / 2, vc = kw / 2;
  for (int i = 0; i < height; ++i) {
    for (int u = 0; u < kh; ++u) {
      const int ii = i + (u - uc) * dilation;
      if (ii < 0 || ii >= height) continue;
      for (int j = 0; j < width; ++j) {
        const double* grow = gout + (static_cast<std::size_t>(i) * width + j) * cout;
        for (int v = 0; v < kw; ++v) {
          const int jj = j + (v - vc) * dilation;
          if (jj < 0 || jj >= width) continue;
          double* girow = gin + (static_cast<std::size_t>(ii) * width + jj) * cin;
          const double* wtap =
              w + (static_cast<std::size_t>(u) * kw + v) * cin * cout;
          for (int ci = 0; ci < cin; ++ci) {
            const double* wrow = wtap + static_cast<std::size_t>(ci) * cout;
            double acc = 0.0;
            for (int co = 0; co < cout; ++co) acc += grow[co] * wrow[co];
            girow[ci] += acc;
          }
        }
      }
    }
  }
}

void conv_backward_weights(const double* gout, const double* in, double* gw,
                           int height, int width, int cin, int cout, int kh,
                           int kw, int dilation) {
  const int uc = kh / 2, vc = kw / 2;
  for (int u = 0; u < kh; ++u) {
    for (int v = 0; v < kw; ++v) {
      double* gwtap = gw + (static_cast<std::size_t>(u) * kw + v) * cin * cout;
      for (int i = 0; i < height; ++i) {
        const int ii = i + (u - uc) * dilation;
        if (ii < 0 || ii >= height) continue;
        for (int j = 0; j < width; ++j) {
          const int jj = j + (v - vc) * dilation;
          if (jj < 0 || jj >= width) continue;
          const double* grow =
              gout + (static_cast<std::size_t>(i) * width + j) * cout;
          const double* irow =
              in + (static_cast<std::size_t>(ii) * width + jj) * cin;
          for (int ci = 0; ci < cin; ++ci) {
            const double a = irow[ci];
            double* gwrow = gwtap + static_cast<std::size_t>(ci) * cout;
            for (int co = 0; co < cout; ++co) gwrow[co] += a * grow[co];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weights, const ConvSpec& spec,
              const MaskSpec* mask) {
  if (input.rank() != 3) {
    throw std::invalid_argument("conv2d: input must be [H,W,Cin], got " +
                                shape_str(input.shape()));
  }
  if (weights.rank() != 4) {
    throw std::invalid_argument("conv2d: weights must be [kh,kw,Cin,Cout], got " +
                                shape_str(weights.shape()));
  }
  const int height = input.shape()[0], width = input.shape()[1];
  const int cin = input.shape()[2];
  const Shape& ws = weights.shape();
  if (ws[0] != spec.kh || ws[1] != spec.kw) {
    throw std::invalid_argument("conv2d: kernel extents " + shape_str(ws) +
                                " do not match spec " + std::to_string(spec.kh) + "x" +
                                std::to_string(spec.kw));
  }
  if (ws[2] != cin) {
    throw std::invalid_argument("conv2d: weight input channels " + std::to_string(ws[2]) +
                                " do not match input channels " + std::to_string(cin));
  }
  if (ws[3] != spec.channels_out || spec.channels_in != cin) {
    throw std::invalid_argument("conv2d: channel spec (" + std::to_string(spec.channels_in) +
                                "->" + std::to_string(spec.channels_out) +
                                ") does not match tensors " + shape_str(input.shape()) +
                                ", " + shape_str(ws));
  }
  if (spec.dilation < 1) {
    throw std::invalid_argument("conv2d: dilation must be positive, got " +
                                std::to_string(spec.dilation));
  }
  if (mask) {
    if (mask->kh != spec.kh || mask->kw != spec.kw || mask->channels_in != cin ||
        mask->channels_out != spec.channels_out) {
      throw std::invalid_argument("conv2d: mask extents do not match weights " + shape_str(ws));
    }
  }

  const int cout = spec.channels_out;
  const int kh = spec.kh, kw = spec.kw, dilation = spec.dilation;
  OpBuilder op({height, width, cout}, {input, weights});

  // Effective weights carry the mask so masked taps contribute exactly zero
  // and gradient flow through them is cut.
  std::shared_ptr<const std::vector<double>> mask_values =
      mask ? mask->weight_mask : nullptr;
  std::vector<double> w_eff;
  const double* w = weights.values().data();
  if (mask_values) {
    w_eff.resize(weights.values().size());
    for (std::size_t i = 0; i < w_eff.size(); ++i) {
      w_eff[i] = weights.values()[i] * (*mask_values)[i];
    }
    w = w_eff.data();
  }
  conv_forward(input.values().data(), w, op.out()->value.data(), height, width,
               cin, cout, kh, kw, dilation);

  detail::Node* self = op.out();
  detail::Node* pin = op.parent(0);
  detail::Node* pw = op.parent(1);
  return op.finish([self, pin, pw, mask_values, height, width, cin, cout, kh, kw,
                    dilation] {
    const double* raw_w = pw->value.data();
    std::vector<double> w_eff;
    if (mask_values) {
      w_eff.resize(pw->value.size());
      for (std::size_t i = 0; i < w_eff.size(); ++i) {
        w_eff[i] = pw->value[i] * (*mask_values)[i];
      }
      raw_w = w_eff.data();
    }
    if (pin->requires_grad) {
      pin->ensure_grad();
      conv_backward_input(self->grad.data(), raw_w, pin->grad.data(), height,
                          width, cin, cout, kh, kw, dilation);
    }
    if (pw->requires_grad) {
      pw->ensure_grad();
      if (mask_values) {
        std::vector<double> gw(pw->value.size(), 0.0);
        conv_backward_weights(self->grad.data(), pin->value.data(), gw.data(),
                              height, width, cin, cout, kh, kw, dilation);
        for (std::size_t i = 0; i < gw.size(); ++i) {
          pw->grad[i] += gw[i] * (*mask_values)[i];
        }
      } else {
        conv_backward_weights(self->grad.data(), pin->value.data(),
                              pw->grad.data(), height, width, cin, cout, kh, kw,
                              dilation);
      }
    }
  });
}

}  // namespace vpn
