#include "vpn/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "op_builder.hpp"

namespace vpn {

long long numel_of(const Shape& shape) {
  long long n = 1;
  for (const int extent : shape) {
    if (extent <= 0) {
      throw std::invalid_argument("shape extent must be positive, got " +
                                  std::to_string(extent));
    }
    n *= extent;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace detail {

std::uint64_t next_node_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace detail

namespace {

using detail::Node;

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> data,
                                bool requires_grad) {
  if (shape.size() > 5) {
    throw std::invalid_argument("rank above 5 is not supported: " + shape_str(shape));
  }
  const auto n = numel_of(shape);
  if (static_cast<long long>(data.size()) != n) {
    throw std::invalid_argument("data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  node->id = detail::next_node_id();
  return node;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace

// --- Tensor ------------------------------------------------------------------

Tensor Tensor::adopt(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = numel_of(shape);
  return adopt(make_leaf(std::move(shape),
                         std::vector<double>(static_cast<std::size_t>(n), 0.0),
                         requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = numel_of(shape);
  return adopt(make_leaf(std::move(shape),
                         std::vector<double>(static_cast<std::size_t>(n), value),
                         requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  return adopt(make_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad) {
  const auto n = numel_of(shape);
  std::vector<double> data(static_cast<std::size_t>(n));
  for (auto& v : data) v = rng.uniform(lo, hi);
  return adopt(make_leaf(std::move(shape), std::move(data), requires_grad));
}

const Shape& Tensor::shape() const {
  if (!node_) throw std::logic_error("shape() on an empty tensor");
  return node_->shape;
}

long long Tensor::numel() const { return static_cast<long long>(values().size()); }

std::uint64_t Tensor::id() const {
  if (!node_) throw std::logic_error("id() on an empty tensor");
  return node_->id;
}

std::vector<double>& Tensor::values() {
  if (!node_) throw std::logic_error("values() on an empty tensor");
  return node_->value;
}

const std::vector<double>& Tensor::values() const {
  if (!node_) throw std::logic_error("values() on an empty tensor");
  return node_->value;
}

double Tensor::value_at(std::size_t flat_index) const { return values().at(flat_index); }

double Tensor::scalar() const {
  if (numel() != 1) {
    throw std::invalid_argument("scalar() requires numel==1, shape is " + shape_str(shape()));
  }
  return values()[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  if (!node_) throw std::logic_error("set_requires_grad() on an empty tensor");
  node_->requires_grad = on;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
  if (!node_ || node_->grad.empty()) throw std::logic_error("no gradient has been deposited");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::detach() const { return from_data(shape(), values(), false); }

void Tensor::backward() const {
  if (!node_) throw std::logic_error("backward() on an empty tensor");
  if (numel() != 1) {
    throw std::invalid_argument("backward() requires a scalar, shape is " + shape_str(shape()));
  }
  // Node ids increase with creation order and every op output is newer than
  // its inputs, so descending id over the reachable subgraph is a topological
  // order.
  std::vector<Node*> order;
  std::unordered_set<const Node*> seen;
  std::vector<Node*> stack{node_.get()};
  seen.insert(node_.get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const Node* a, const Node* b) { return a->id > b->id; });

  // Op results carry per-sweep gradients; only leaves accumulate across
  // sweeps. Clear any stale op-result buffers from a previous call.
  for (Node* n : order) {
    if (n->backward && !n->grad.empty()) std::fill(n->grad.begin(), n->grad.end(), 0.0);
  }
  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (Node* n : order) {
    if (n->backward && !n->grad.empty()) n->backward();
  }
}

// --- pointwise ops -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  OpBuilder op(a.shape(), {a, b});
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& out = op.out()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  Node* self = op.out();
  Node* pa = op.parent(0);
  Node* pb = op.parent(1);
  return op.finish([self, pa, pb] {
    const auto& g = self->grad;
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) pa->grad[i] += g[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) pb->grad[i] += g[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  OpBuilder op(a.shape(), {a, b});
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& out = op.out()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  Node* self = op.out();
  Node* pa = op.parent(0);
  Node* pb = op.parent(1);
  return op.finish([self, pa, pb] {
    const auto& g = self->grad;
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) pa->grad[i] += g[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) pb->grad[i] -= g[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  OpBuilder op(a.shape(), {a, b});
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& out = op.out()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  Node* self = op.out();
  Node* pa = op.parent(0);
  Node* pb = op.parent(1);
  return op.finish([self, pa, pb] {
    const auto& g = self->grad;
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) pa->grad[i] += g[i] * pb->value[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) pb->grad[i] += g[i] * pa->value[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  OpBuilder op(a.shape(), {a});
  const auto& av = a.values();
  auto& out = op.out()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * av[i];
  Node* self = op.out();
  Node* pa = op.parent(0);
  return op.finish([self, pa, factor] {
    pa->ensure_grad();
    const auto& g = self->grad;
    for (std::size_t i = 0; i < g.size(); ++i) pa->grad[i] += factor * g[i];
  });
}

Tensor add_constant(const Tensor& a, double constant) {
  OpBuilder op(a.shape(), {a});
  const auto& av = a.values();
  auto& out = op.out()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + constant;
  Node* self = op.out();
  Node* pa = op.parent(0);
  return op.finish([self, pa] {
    pa->ensure_grad();
    const auto& g = self->grad;
    for (std::size_t i = 0; i < g.size(); ++i) pa->grad[i] += g[i];
  });
}

Tensor sigmoid(const Tensor& a) {
  OpBuilder op(a.shape(), {a});
  const auto& av = a.values();
  auto& out = op.out()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-av[i]));
  Node* self = op.out();
  Node* pa = op.parent(0);
  return op.finish([self, pa] {
    pa->ensure_grad();
    const auto& g = self->grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = self->value[i];
      pa->grad[i] += g[i] * y * (1.0 - y);
    }
  });
}

Tensor tanh(const Tensor& a) {
  OpBuilder op(a.shape(), {a});
  const auto& av = a.values();
  auto& out = op.out()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(av[i]);
  Node* self = op.out();
  Node* pa = op.parent(0);
  return op.finish([self, pa] {
    pa->ensure_grad();
    const auto& g = self->grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = self->value[i];
      pa->grad[i] += g[i] * (1.0 - y * y);
    }
  });
}

Tensor relu(const Tensor& a) {
  OpBuilder op(a.shape(), {a});
  const auto& av = a.values();
  auto& out = op.out()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
  Node* self = op.out();
  Node* pa = op.parent(0);
  return op.finish([self, pa] {
    pa->ensure_grad();
    const auto& g = self->grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (pa->value[i] > 0.0) pa->grad[i] += g[i];
    }
  });
}

Tensor log_floored(const Tensor& a) {
  OpBuilder op(a.shape(), {a});
  const auto& av = a.values();
  auto& out = op.out()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(av[i], kLogFloor));
  Node* self = op.out();
  Node* pa = op.parent(0);
  return op.finish([self, pa] {
    pa->ensure_grad();
    const auto& g = self->grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = pa->value[i];
      if (x > kLogFloor) pa->grad[i] += g[i] / x;
    }
  });
}

// --- structural ops ----------------------------------------------------------

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() != 3) {
    throw std::invalid_argument("add_channel_bias: x must be [H,W,C], got " + shape_str(x.shape()));
  }
  const int channels = x.shape()[2];
  if (bias.rank() != 1 || bias.shape()[0] != channels) {
    throw std::invalid_argument("add_channel_bias: bias " + shape_str(bias.shape()) +
                                " does not match channel count " + std::to_string(channels));
  }
  OpBuilder op(x.shape(), {x, bias});
  const auto& xv = x.values();
  const auto& bv = bias.values();
  auto& out = op.out()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] + bv[i % channels];
  Node* self = op.out();
  Node* px = op.parent(0);
  Node* pb = op.parent(1);
  return op.finish([self, px, pb, channels] {
    const auto& g = self->grad;
    if (px->requires_grad) {
      px->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) px->grad[i] += g[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) pb->grad[i % channels] += g[i];
    }
  });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.shape()[0] != b.shape()[0] ||
      a.shape()[1] != b.shape()[1]) {
    throw std::invalid_argument("concat_channels: spatial extents differ, " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const int height = a.shape()[0], width = a.shape()[1];
  const int ca = a.shape()[2], cb = b.shape()[2];
  OpBuilder op({height, width, ca + cb}, {a, b});
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& out = op.out()->value;
  const std::size_t positions = static_cast<std::size_t>(height) * width;
  for (std::size_t p = 0; p < positions; ++p) {
    for (int c = 0; c < ca; ++c) out[p * (ca + cb) + c] = av[p * ca + c];
    for (int c = 0; c < cb; ++c) out[p * (ca + cb) + ca + c] = bv[p * cb + c];
  }
  Node* self = op.out();
  Node* pa = op.parent(0);
  Node* pb = op.parent(1);
  return op.finish([self, pa, pb, positions, ca, cb] {
    const auto& g = self->grad;
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t p = 0; p < positions; ++p)
        for (int c = 0; c < ca; ++c) pa->grad[p * ca + c] += g[p * (ca + cb) + c];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t p = 0; p < positions; ++p)
        for (int c = 0; c < cb; ++c) pb->grad[p * cb + c] += g[p * (ca + cb) + ca + c];
    }
  });
}

Tensor broadcast_spatial(const Tensor& x, int height, int width) {
  if (x.rank() != 3 || x.shape()[0] != 1 || x.shape()[1] != 1) {
    throw std::invalid_argument("broadcast_spatial: x must be [1,1,C], got " + shape_str(x.shape()));
  }
  const int channels = x.shape()[2];
  OpBuilder op({height, width, channels}, {x});
  const auto& xv = x.values();
  auto& out = op.out()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i % channels];
  Node* self = op.out();
  Node* px = op.parent(0);
  return op.finish([self, px, channels] {
    px->ensure_grad();
    const auto& g = self->grad;
    for (std::size_t i = 0; i < g.size(); ++i) px->grad[i % channels] += g[i];
  });
}

Tensor reduce_sum(const Tensor& a) {
  OpBuilder op({1}, {a});
  const auto& av = a.values();
  double total = 0.0;
  for (const double v : av) total += v;
  op.out()->value[0] = total;
  Node* self = op.out();
  Node* pa = op.parent(0);
  return op.finish([self, pa] {
    pa->ensure_grad();
    const double g = self->grad[0];
    for (auto& gv : pa->grad) gv += g;
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel_of(shape) != a.numel()) {
    throw std::invalid_argument("reshape: " + shape_str(a.shape()) + " has " +
                                std::to_string(a.numel()) + " elements, target " +
                                shape_str(shape) + " needs " +
                                std::to_string(numel_of(shape)));
  }
  OpBuilder op(std::move(shape), {a});
  op.out()->value = a.values();
  Node* self = op.out();
  Node* pa = op.parent(0);
  return op.finish([self, pa] {
    pa->ensure_grad();
    const auto& g = self->grad;
    for (std::size_t i = 0; i < g.size(); ++i) pa->grad[i] += g[i];
  });
}

Tensor softmax_logits_to_logprob(const Tensor& logits) {
  if (logits.rank() < 1) throw std::invalid_argument("log-softmax needs rank >= 1");
  const int k = logits.shape().back();
  if (k < 2) throw std::invalid_argument("log-softmax needs at least 2 classes, got " + std::to_string(k));
  OpBuilder op(logits.shape(), {logits});
  const auto& xv = logits.values();
  auto& out = op.out()->value;
  const std::size_t slices = xv.size() / static_cast<std::size_t>(k);
  for (std::size_t s = 0; s < slices; ++s) {
    const double* row = xv.data() + s * k;
    double* orow = out.data() + s * k;
    double m = row[0];
    for (int i = 1; i < k; ++i) m = std::max(m, row[i]);
    double sum = 0.0;
    for (int i = 0; i < k; ++i) sum += std::exp(row[i] - m);
    const double lse = m + std::log(sum);
    for (int i = 0; i < k; ++i) orow[i] = row[i] - lse;
  }
  Node* self = op.out();
  Node* pa = op.parent(0);
  return op.finish([self, pa, slices, k] {
    pa->ensure_grad();
    const auto& g = self->grad;
    for (std::size_t s = 0; s < slices; ++s) {
      const double* grow = g.data() + s * k;
      const double* yrow = self->value.data() + s * k;
      double* prow = pa->grad.data() + s * k;
      double gsum = 0.0;
      for (int i = 0; i < k; ++i) gsum += grow[i];
      for (int i = 0; i < k; ++i) prow[i] += grow[i] - std::exp(yrow[i]) * gsum;
    }
  });
}

Tensor gather_last(const Tensor& a, const std::vector<int>& indices) {
  if (a.rank() < 1) throw std::invalid_argument("gather_last needs rank >= 1");
  const int k = a.shape().back();
  const std::size_t slices = a.values().size() / static_cast<std::size_t>(k);
  if (indices.size() != slices) {
    throw std::invalid_argument("gather_last: " + std::to_string(indices.size()) +
                                " indices for " + std::to_string(slices) + " slices");
  }
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  if (out_shape.empty()) out_shape = {1};
  OpBuilder op(std::move(out_shape), {a});
  const auto& av = a.values();
  auto& out = op.out()->value;
  for (std::size_t s = 0; s < slices; ++s) {
    const int idx = indices[s];
    if (idx < 0 || idx >= k) {
      throw std::invalid_argument("gather_last: index " + std::to_string(idx) +
                                  " outside [0," + std::to_string(k) + ") at slice " +
                                  std::to_string(s));
    }
    out[s] = av[s * k + idx];
  }
  Node* self = op.out();
  Node* pa = op.parent(0);
  auto idx_copy = std::make_shared<std::vector<int>>(indices);
  return op.finish([self, pa, idx_copy, k] {
    pa->ensure_grad();
    const auto& g = self->grad;
    for (std::size_t s = 0; s < g.size(); ++s) {
      pa->grad[s * k + (*idx_copy)[s]] += g[s];
    }
  });
}

}  // namespace vpn
