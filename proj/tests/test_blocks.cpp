#include <cmath>
#include <vector>

#include <doctest.h>

#include "oracles.hpp"
#include "vpn/blocks.hpp"
#include "vpn/gradcheck.hpp"
#include "vpn/rng.hpp"
#include "vpn/tensor.hpp"

using namespace vpn;

namespace {

int count_open_center(const MaskSpec& m) {
  int open = 0;
  const int uc = m.kh / 2, vc = m.kw / 2;
  for (int ci = 0; ci < m.channels_in; ++ci)
    for (int co = 0; co < m.channels_out; ++co)
      if (m.at(uc, vc, ci, co) == 1.0) ++open;
  return open;
}

int count_open_total(const MaskSpec& m) {
  int open = 0;
  for (const double v : *m.weight_mask)
    if (v == 1.0) ++open;
  return open;
}

MuParams random_mu(int channels, Rng& rng, double scale = 0.3) {
  MuParams p;
  const Shape wshape{3, 3, channels, channels};
  p.out_gate.weights = Tensor::uniform(wshape, rng, -scale, scale, true);
  p.in_gate.weights = Tensor::uniform(wshape, rng, -scale, scale, true);
  p.update_gate.weights = Tensor::uniform(wshape, rng, -scale, scale, true);
  p.candidate.weights = Tensor::uniform(wshape, rng, -scale, scale, true);
  p.out_gate.bias = Tensor::zeros({channels}, true);
  p.in_gate.bias = Tensor::zeros({channels}, true);
  p.update_gate.bias = Tensor::zeros({channels}, true);
  p.candidate.bias = Tensor::zeros({channels}, true);
  return p;
}

MuParams zero_mu(int channels) {
  MuParams p;
  const Shape wshape{3, 3, channels, channels};
  p.out_gate.weights = Tensor::zeros(wshape);
  p.in_gate.weights = Tensor::zeros(wshape);
  p.update_gate.weights = Tensor::zeros(wshape);
  p.candidate.weights = Tensor::zeros(wshape);
  return p;
}

oracle::MuWeights mu_to_oracle(const MuParams& p, int channels) {
  oracle::MuWeights o;
  auto conv = [&](const ConvLayer& l) {
    oracle::Kernel k = oracle::make_kernel(3, 3, channels, channels);
    k.data = l.weights.values();
    return k;
  };
  o.w1 = conv(p.out_gate);
  o.w2 = conv(p.in_gate);
  o.w3 = conv(p.update_gate);
  o.w4 = conv(p.candidate);
  auto bias = [&](const ConvLayer& l) {
    return l.bias.defined() ? l.bias.values() : std::vector<double>(channels, 0.0);
  };
  o.b1 = bias(p.out_gate);
  o.b2 = bias(p.in_gate);
  o.b3 = bias(p.update_gate);
  o.b4 = bias(p.candidate);
  o.dilation = p.out_gate.dilation;
  return o;
}

}  // namespace

TEST_CASE("mask open-tap counts for 3x3 kernels") {
  // Kind B, one channel in/out, one color group: center row left+center open,
  // full row above open -> 3 + 2 = 5 open taps.
  MaskSpec b1 = build_mask(MaskKind::B, 3, 3, 1, 1, 1);
  CHECK(count_open_total(b1) == 5);
  CHECK(count_open_center(b1) == 1);

  // Kind A closes the center tap.
  MaskSpec a1 = build_mask(MaskKind::A, 3, 3, 1, 1, 1);
  CHECK(count_open_total(a1) == 4);
  CHECK(count_open_center(a1) == 0);

  // Kind A, three in/out channels, three color groups: 3*3*8 = 72 taps in the
  // strictly-above/left positions are all open; center tap is open only when
  // group(ci) < group(co), i.e. 3 ordered pairs of distinct groups -> 3.
  // Total 72 + 3 = 75? No: open off-center positions are 4 of the 9 spatial
  // slots (row above fully, center-left), giving 4*9 = 36 channel-pairs each.
  MaskSpec a3 = build_mask(MaskKind::A, 3, 3, 3, 3, 3);
  CHECK(count_open_total(a3) == 4 * 9 + 3);
  CHECK(count_open_center(a3) == 3);

  MaskSpec b3 = build_mask(MaskKind::B, 3, 3, 3, 3, 3);
  CHECK(count_open_center(b3) == 6);  // group(ci) <= group(co)

  // Spatial pattern: below-center row fully closed, right-of-center closed.
  CHECK(b1.at(2, 0, 0, 0) == 0.0);
  CHECK(b1.at(2, 1, 0, 0) == 0.0);
  CHECK(b1.at(2, 2, 0, 0) == 0.0);
  CHECK(b1.at(1, 2, 0, 0) == 0.0);
  CHECK(b1.at(0, 0, 0, 0) == 1.0);
  CHECK(b1.at(0, 2, 0, 0) == 1.0);
  CHECK(b1.at(1, 0, 0, 0) == 1.0);
}

TEST_CASE("mask validation errors") {
  CHECK_THROWS_AS(build_mask(MaskKind::A, 2, 3, 1, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(build_mask(MaskKind::A, 3, 3, 3, 3, 2), std::invalid_argument);
  CHECK_THROWS_AS(build_mask(MaskKind::A, 3, 3, 2, 2, 3), std::invalid_argument);
}

TEST_CASE("non-divisible channel counts split into near-equal contiguous groups") {
  // 4 channels over 3 groups -> sizes 2,1,1 (floor mapping). Center openness
  // for kind B counts pairs with group(ci) <= group(co):
  // groups per channel: [0,0,1,2] -> 2*2 + 3*1 + 4*1 = 11 open center taps.
  MaskSpec b = build_mask(MaskKind::B, 1, 1, 4, 4, 3);
  CHECK(count_open_total(b) == 11);
}

TEST_CASE("1x1 kind-A masks with one group are fully closed, kind B open") {
  MaskSpec a = build_mask(MaskKind::A, 1, 1, 2, 2, 1);
  CHECK(count_open_total(a) == 0);
  MaskSpec b = build_mask(MaskKind::B, 1, 1, 2, 2, 1);
  CHECK(count_open_total(b) == 4);
}

TEST_CASE("MU with all-zero parameters gives 0.5*tanh(0.5*h)") {
  Rng rng(31);
  const int c = 2;
  Tensor h = Tensor::uniform({4, 4, c}, rng, -2.0, 2.0);
  Tensor out = mu_forward(h, zero_mu(c));
  REQUIRE(out.shape() == h.shape());
  for (std::size_t i = 0; i < h.values().size(); ++i) {
    const double expect = 0.5 * std::tanh(0.5 * h.values()[i]);
    CHECK(out.values()[i] == doctest::Approx(expect).epsilon(1e-12));
  }
  // Spot value: h = 1 -> 0.5*tanh(0.5).
  Tensor one = Tensor::full({1, 1, 1}, 1.0);
  Tensor o1 = mu_forward(one, zero_mu(1));
  CHECK(o1.values()[0] == doctest::Approx(0.2310585786300049).epsilon(1e-15));
}

TEST_CASE("MU matches the equation-transcription oracle") {
  Rng rng(32);
  const int c = 3;
  MuParams p = random_mu(c, rng);
  p.out_gate.bias = Tensor::uniform({c}, rng, -0.2, 0.2, true);
  p.candidate.bias = Tensor::uniform({c}, rng, -0.2, 0.2, true);
  Tensor h = Tensor::uniform({5, 4, c}, rng, -1.5, 1.5);
  Tensor out = mu_forward(h, p);

  oracle::Image oh = oracle::make_image(5, 4, c);
  oh.data = h.values();
  oracle::Image ref = oracle::mu(oh, mu_to_oracle(p, c));
  for (std::size_t i = 0; i < ref.data.size(); ++i) {
    CHECK(out.values()[i] == doctest::Approx(ref.data[i]).epsilon(1e-10));
  }
}

TEST_CASE("MU output magnitude stays strictly below 1") {
  // The unit output is g1 * tanh(g2*h + g3*u) with every factor in (-1, 1) or
  // (0, 1), so |out| < 1 for any finite input. Inputs are kept moderate so the
  // inner tanh does not round to exactly 1.0 in double precision.
  Rng rng(33);
  const int c = 2;
  MuParams p = random_mu(c, rng, 3.0);  // deliberately large weights
  Tensor h = Tensor::uniform({6, 6, c}, rng, -5.0, 5.0);
  Tensor out = mu_forward(h, p);
  for (const double v : out.values()) {
    CHECK(std::fabs(v) < 1.0);
  }
}

TEST_CASE("MU gradients agree with finite differences") {
  Rng rng(34);
  const int c = 2;
  MuParams p = random_mu(c, rng);
  auto f = [&](const Tensor& h) { return reduce_sum(mu_forward(h, p)); };
  Tensor h0 = Tensor::uniform({3, 3, c}, rng, -1.0, 1.0);
  auto report = finite_diff_check(f, h0, 1e-4);
  CHECK_MESSAGE(report.passed(), report.summary());

  Tensor h1 = Tensor::uniform({3, 3, c}, rng, -1.0, 1.0);
  auto fw = [&](const Tensor& w) {
    MuParams q = p;
    q.in_gate.weights = w;
    Tensor m = mu_forward(h1, q);
    return reduce_sum(m * m);
  };
  auto report_w = finite_diff_check(fw, p.in_gate.weights.detach(), 1e-4);
  CHECK_MESSAGE(report_w.passed(), report_w.summary());
}

TEST_CASE("MU rejects channel mismatch between input and weights") {
  Rng rng(35);
  MuParams p = random_mu(2, rng);
  Tensor h = Tensor::zeros({3, 3, 4});
  CHECK_THROWS_AS(mu_forward(h, p), std::invalid_argument);
}

TEST_CASE("residual block with zero output projection is the identity") {
  Rng rng(36);
  const int width = 8;  // external 2c width
  RmbParams p = make_rmb(width, 1, rng, 0.3);
  // Zero the final 1x1 projection: residual branch contributes nothing.
  p.project_out.weights = Tensor::zeros(p.project_out.weights.shape());
  if (p.project_out.bias.defined())
    p.project_out.bias = Tensor::zeros(p.project_out.bias.shape());
  Tensor h = Tensor::uniform({4, 5, width}, rng, -2.0, 2.0);
  Tensor out = rmb_forward(h, p);
  for (std::size_t i = 0; i < h.values().size(); ++i) {
    CHECK(out.values()[i] == h.values()[i]);  // exact, not approximate
  }
}

TEST_CASE("residual block matches the equation-transcription oracle") {
  Rng rng(37);
  const int width = 6;
  RmbParams p = make_rmb(width, 1, rng, 0.4);
  Tensor h = Tensor::uniform({3, 4, width}, rng, -1.0, 1.0);
  Tensor out = rmb_forward(h, p);

  oracle::RmbWeights o;
  o.project_in = oracle::make_kernel(1, 1, width, width / 2);
  o.project_in.data = p.project_in.weights.values();
  o.bias_in = p.project_in.bias.defined() ? p.project_in.bias.values()
                                          : std::vector<double>(width / 2, 0.0);
  o.mu_first = mu_to_oracle(p.mu_first, width / 2);
  o.mu_second = mu_to_oracle(p.mu_second, width / 2);
  o.project_out = oracle::make_kernel(1, 1, width / 2, width);
  o.project_out.data = p.project_out.weights.values();
  o.bias_out = p.project_out.bias.defined() ? p.project_out.bias.values()
                                            : std::vector<double>(width, 0.0);
  oracle::Image oh = oracle::make_image(3, 4, width);
  oh.data = h.values();
  oracle::Image ref = oracle::rmb(oh, o);
  for (std::size_t i = 0; i < ref.data.size(); ++i) {
    CHECK(out.values()[i] == doctest::Approx(ref.data[i]).epsilon(1e-10));
  }
}

TEST_CASE("residual block rejects odd external width") {
  Rng rng(38);
  CHECK_THROWS_AS(make_rmb(7, 1, rng), std::invalid_argument);
}

TEST_CASE("relu variant block runs and differs from gated variant") {
  Rng rng(39);
  const int width = 8;
  ReluBlockParams p = make_relu_block(width, 1, rng, 0.3);
  Tensor h = Tensor::uniform({4, 4, width}, rng, -1.0, 1.0);
  Tensor out = relu_block_forward(h, p);
  CHECK(out.shape() == h.shape());

  ResidualBlockParams as_variant = p;
  Tensor out2 = residual_block_forward(h, as_variant);
  for (std::size_t i = 0; i < out.values().size(); ++i)
    CHECK(out.values()[i] == out2.values()[i]);
}

TEST_CASE("convolutional LSTM zero cases") {
  Rng rng(40);
  const int cin = 2, ch = 3;
  ConvLstmParams p = make_conv_lstm(cin, ch, rng, 0.0);  // all-zero weights
  // Zero-biased variant for the pure-zero case.
  for (Tensor* b : {&p.input_x.bias, &p.forget_x.bias, &p.output_x.bias,
                    &p.cand_x.bias}) {
    if (b->defined()) *b = Tensor::zeros(b->shape());
  }
  Tensor x = Tensor::uniform({4, 4, cin}, rng, -1.0, 1.0);
  ConvLstmState s0 = make_lstm_state(4, 4, ch);
  ConvLstmState s1 = conv_lstm_step(x, s0, p);
  // Gates are sigmoid(0) = 0.5, candidate tanh(0) = 0, old cell = 0:
  // new cell = 0.5*0 + 0.5*0 = 0, hidden = 0.5*tanh(0) = 0.
  for (const double v : s1.cell.values()) CHECK(v == doctest::Approx(0.0));
  for (const double v : s1.hidden.values()) CHECK(v == doctest::Approx(0.0));

  // With old cell = 1 everywhere: new cell = 0.5, hidden = 0.5*tanh(0.5).
  ConvLstmState sc{Tensor::zeros({4, 4, ch}), Tensor::full({4, 4, ch}, 1.0)};
  ConvLstmState s2 = conv_lstm_step(x, sc, p);
  for (const double v : s2.cell.values()) CHECK(v == doctest::Approx(0.5));
  for (const double v : s2.hidden.values())
    CHECK(v == doctest::Approx(0.5 * std::tanh(0.5)).epsilon(1e-12));
}

TEST_CASE("convolutional LSTM matches the equation-transcription oracle") {
  Rng rng(41);
  const int cin = 2, ch = 2;
  ConvLstmParams p = make_conv_lstm(cin, ch, rng, 0.4);
  Tensor x = Tensor::uniform({3, 3, cin}, rng, -1.0, 1.0);
  Tensor h0 = Tensor::uniform({3, 3, ch}, rng, -1.0, 1.0);
  Tensor c0 = Tensor::uniform({3, 3, ch}, rng, -1.0, 1.0);
  ConvLstmState s1 = conv_lstm_step(x, ConvLstmState{h0, c0}, p);

  oracle::LstmWeights o;
  auto k = [&](const ConvLayer& l, int ci) {
    oracle::Kernel kk = oracle::make_kernel(3, 3, ci, ch);
    kk.data = l.weights.values();
    return kk;
  };
  auto bias = [&](const ConvLayer& l) {
    return l.bias.defined() ? l.bias.values() : std::vector<double>(ch, 0.0);
  };
  o.xi = k(p.input_x, cin); o.hi = k(p.input_h, ch); o.bi = bias(p.input_x);
  o.xf = k(p.forget_x, cin); o.hf = k(p.forget_h, ch); o.bf = bias(p.forget_x);
  o.xo = k(p.output_x, cin); o.ho = k(p.output_h, ch); o.bo = bias(p.output_x);
  o.xg = k(p.cand_x, cin); o.hg = k(p.cand_h, ch); o.bg = bias(p.cand_x);

  oracle::LstmState os;
  os.hidden = oracle::make_image(3, 3, ch); os.hidden.data = h0.values();
  os.cell = oracle::make_image(3, 3, ch); os.cell.data = c0.values();
  oracle::Image ox = oracle::make_image(3, 3, cin); ox.data = x.values();
  oracle::LstmState ref = oracle::lstm_step(ox, os, o);

  for (std::size_t i = 0; i < ref.hidden.data.size(); ++i) {
    CHECK(s1.hidden.values()[i] == doctest::Approx(ref.hidden.data[i]).epsilon(1e-10));
    CHECK(s1.cell.values()[i] == doctest::Approx(ref.cell.data[i]).epsilon(1e-10));
  }
}

TEST_CASE("convolutional LSTM gradients flow through a two-step rollout") {
  Rng rng(42);
  const int cin = 1, ch = 2;
  ConvLstmParams p = make_conv_lstm(cin, ch, rng, 0.3);
  Tensor x1 = Tensor::uniform({3, 3, cin}, rng, -1.0, 1.0);
  auto f = [&](const Tensor& x0) {
    ConvLstmState s = make_lstm_state(3, 3, ch);
    s = conv_lstm_step(x0, s, p);
    s = conv_lstm_step(x1, s, p);
    return reduce_sum(s.hidden * s.hidden);
  };
  Tensor x0 = Tensor::uniform({3, 3, cin}, rng, -1.0, 1.0);
  auto report = finite_diff_check(f, x0, 1e-4);
  CHECK_MESSAGE(report.passed(), report.summary());
}

TEST_CASE("convolutional LSTM rejects spatial mismatch") {
  Rng rng(43);
  ConvLstmParams p = make_conv_lstm(1, 2, rng, 0.2);
  Tensor x = Tensor::zeros({4, 4, 1});
  ConvLstmState s = make_lstm_state(5, 5, 2);
  CHECK_THROWS_AS(conv_lstm_step(x, s, p), std::invalid_argument);
}

TEST_CASE("dilation schedules") {
  const std::vector<int> scheme{1, 2, 4, 8};
  auto enc = dilation_schedule(8, scheme, true);
  CHECK(enc == std::vector<int>{1, 2, 4, 8, 1, 2, 4, 8});
  auto dec = dilation_schedule(12, scheme, false);
  CHECK(dec == std::vector<int>(12, 1));
  auto part = dilation_schedule(3, scheme, true);
  CHECK(part == std::vector<int>{1, 2, 4});
  CHECK_THROWS_AS(dilation_schedule(4, {}, true), std::invalid_argument);
}

TEST_CASE("masked residual block keeps masked gradients at zero") {
  Rng rng(44);
  const int width = 6;
  RmbParams p = make_rmb(width, 1, rng, 0.3, MaskKind::B, 1);
  Tensor h = Tensor::uniform({4, 4, width}, rng, -1.0, 1.0);
  Tensor out = rmb_forward(h, p);
  reduce_sum(out * out).backward();
  auto check_layer = [](const ConvLayer& l) {
    REQUIRE(l.mask.has_value());
    const auto& m = *l.mask->weight_mask;
    const auto& g = l.weights.grad();
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i] == 0.0) CHECK(g[i] == 0.0);
  };
  check_layer(p.mu_first.out_gate);
  check_layer(p.mu_first.candidate);
  check_layer(p.project_in);
  check_layer(p.project_out);
}
