#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vpn/rng.hpp"

namespace vpn {

// Dense row-major extents, rank 0 (scalar) through 5.
using Shape = std::vector<int>;

long long numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient is deposited
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> backward;  // deposits into parents; empty for leaves

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
};

std::uint64_t next_node_id();

}  // namespace detail

// Value-like handle to a node in the computation record. Copies share the
// underlying buffer. Leaf gradients accumulate additively across backward
// calls until zero_grad() is invoked; op-result gradients are per-sweep.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  // Uniform draw in [lo, hi); the usual parameter initializer.
  static Tensor uniform(Shape shape, Rng& rng, double lo, double hi,
                        bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  long long numel() const;
  std::uint64_t id() const;

  std::vector<double>& values();
  const std::vector<double>& values() const;
  double value_at(std::size_t flat_index) const;
  double scalar() const;  // requires numel() == 1

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  const std::vector<double>& grad() const;  // requires a deposited gradient
  void zero_grad();

  // Reverse-mode sweep from a scalar. Rejects non-scalar tensors.
  void backward() const;

  // Detached copy of the values as a fresh leaf.
  Tensor detach() const;

  std::shared_ptr<detail::Node> node() const { return node_; }
  // Internal: adopt an existing node. Op implementations only.
  static Tensor adopt(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

// --- kernel masking ----------------------------------------------------------

enum class MaskKind { A, B };

// Causal connectivity pattern for a convolution kernel. The binary buffer has
// one entry per (tap row, tap col, in channel, out channel). Rows above the
// center pass, rows below block; the center row passes left of center; the
// center tap connects color groups g_in -> g_out iff g_in < g_out (kind A) or
// g_in <= g_out (kind B). Channels map to groups as contiguous equal chunks
// in R, G, B order.
struct MaskSpec {
  MaskKind kind = MaskKind::B;
  int kh = 0, kw = 0;
  int channels_in = 0, channels_out = 0;
  int color_groups = 1;
  std::shared_ptr<const std::vector<double>> weight_mask;  // kh*kw*cin*cout of {0,1}

  double at(int u, int v, int ci, int co) const {
    return (*weight_mask)[((static_cast<std::size_t>(u) * kw + v) * channels_in + ci) *
                              channels_out +
                          co];
  }
};

// --- convolution -------------------------------------------------------------

// Resolution-preserving cross-correlation: zero "same" padding only, tap
// offsets scaled by the dilation rate.
struct ConvSpec {
  int kh = 1, kw = 1;
  int dilation = 1;
  int channels_in = 1, channels_out = 1;
};

// input [H,W,Cin], weights [kh,kw,Cin,Cout] -> [H,W,Cout]. Masked taps are
// multiplied out of the weights on every forward pass, so masked positions
// contribute zero and receive exactly zero gradient.
Tensor conv2d(const Tensor& input, const Tensor& weights, const ConvSpec& spec,
              const MaskSpec* mask = nullptr);

// --- pointwise and structural ops -------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_constant(const Tensor& a, double constant);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
// ln(max(x, 1e-12)); the floor applies inside every logarithm in the project.
Tensor log_floored(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// x [H,W,C] + bias [C] broadcast over space.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);
// [H,W,Ca] ++ [H,W,Cb] -> [H,W,Ca+Cb].
Tensor concat_channels(const Tensor& a, const Tensor& b);
// x [1,1,C] -> [H,W,C], repeated at every position.
Tensor broadcast_spatial(const Tensor& x, int height, int width);
Tensor reduce_sum(const Tensor& a);           // -> scalar
Tensor reshape(const Tensor& a, Shape shape);  // same numel

// Numerically stable log-softmax along the final axis.
Tensor softmax_logits_to_logprob(const Tensor& logits);
// Select one entry along the final axis per leading slice; drops that axis.
Tensor gather_last(const Tensor& a, const std::vector<int>& indices);

constexpr double kLogFloor = 1e-12;

}  // namespace vpn
