// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "atdc/error.hpp"
#include "atdc/model.hpp"
#include "atdc/physics.hpp"
#include "test_util.hpp"

using namespace atdc;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.base_channels = 8;
  c.ca_reduction = 4;
  c.atm_channels = 4;
  c.dcm_hidden = 4;
  return c;
}

void zero(Tensor<double>& t) {
  for (auto& v : t.data()) v = 0.0;
}

Tensor<double> rand_tensor(Rng& rng, Shape s, double lo = -1, double hi = 1) {
  Tensor<double> t(std::move(s));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

bool same_params(const ModelParams<float>& a, const ModelParams<float>& b) {
  const auto pa = a.parameters(), pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].name != pb[i].name) return false;
    if (!std::equal(pa[i].tensor.data().begin(), pa[i].tensor.data().end(), pb[i].tensor.data().begin())) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("defaults and descriptor round trip") {
  const ModelConfig c;
  CHECK(c.base_channels == 64);
  CHECK(c.encoder_blocks == 3);
  CHECK(c.decoder_blocks == 3);
  CHECK(c.leaky_slope == 0.2);
  CHECK(c.ca_reduction == 16);
  CHECK(ModelConfig::from_descriptor(c.descriptor()) == c);
  ModelConfig d = tiny();
  d.use_atm = false;
  CHECK(ModelConfig::from_descriptor(d.descriptor()) == d);
  CHECK_THROWS_AS(ModelConfig::from_descriptor("base_channels=8\n"), Error);
}

TEST_CASE("config invariants") {
  ModelConfig c;
  c.base_channels = 8;
  CHECK_THROWS_AS(c.validate(), Error);  // below ca_reduction
  c = ModelConfig{};
  c.encoder_blocks = 2;
  CHECK_THROWS_AS(c.validate(), Error);
  c.use_fusion = false;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("parameter layout of the default model") {
  const auto p = init_params<float>(0, ModelConfig{});
  REQUIRE(p.atm);
  REQUIRE(p.dcm);
  CHECK(p.atm->rb.size() == 3);
  CHECK(p.atm->rb[0].conv2.weight.dim(0) == 64);
  CHECK(p.atm->rb[1].conv2.weight.dim(0) == 64);
  CHECK(p.atm->rb[2].conv2.weight.dim(0) == 1);
  CHECK(p.dcm->fc[2].weight.dim(0) == 3);
  CHECK(p.edc.head.weight.dim(0) == 3);
  CHECK(p.edc.stem.weight.shape() == Shape{64, 3, 3, 3});
  CHECK(p.edc.fuse->weight.dim(1) == 192);
  CHECK(p.edc.enc.size() == 3);
  CHECK(p.edc.dec.size() == 3);
  CHECK(p.edc.ca.size() == 2);
}

TEST_CASE("initialization: seeded, fan-in scaled, zero biases, identity norms") {
  const auto a = init_params<float>(7, tiny()), b = init_params<float>(7, tiny()), c = init_params<float>(8, tiny());
  CHECK(same_params(a, b));
  CHECK_FALSE(same_params(a, c));
  for (const auto& nt : a.parameters()) {
    const bool is_bias = nt.name.ends_with(".bias") || nt.name.ends_with(".beta");
    if (is_bias)
      for (float v : nt.tensor.data()) CHECK(v == 0.f);
    if (nt.name.ends_with(".gamma"))
      for (float v : nt.tensor.data()) CHECK(v == 1.f);
  }
  // He-uniform bound for the leaky slope, stem fan-in 27.
  const double bound = std::sqrt(6.0 / 1.04) / std::sqrt(27.0);
  double largest = 0;
  for (float v : a.edc.stem.weight.data()) largest = std::max(largest, std::abs(static_cast<double>(v)));
  CHECK(largest <= bound);
  CHECK(largest > 0.9 * bound);
}

TEST_CASE("ablation flags remove exactly their parameters") {
  ModelConfig c = tiny();
  c.use_atm = false;
  c.use_dcm = false;
  const auto edc_only = init_params<float>(0, c);
  CHECK_FALSE(edc_only.atm);
  CHECK_FALSE(edc_only.dcm);
  c.use_ca = false;
  c.use_fusion = false;
  const auto plain = init_params<float>(0, c);
  CHECK(plain.edc.ca.empty());
  CHECK_FALSE(plain.edc.fuse);
  CHECK(plain.parameters().size() < edc_only.parameters().size());
}

TEST_CASE("residual block with a zeroed residual path is the identity") {
  Rng rng(1);
  auto p = cast_params<double>(init_params<float>(0, tiny()));
  ResidualBlockParams<double>& rb = p.edc.enc[1];
  zero(rb.conv1.weight);
  zero(rb.conv2.weight);
  const auto x = rand_tensor(rng, {2, 8, 5, 6});
  Tensor<double> xg(x.shape(), std::vector<double>(x.data().begin(), x.data().end()), true);
  Tape<double> tape;
  const auto y = residual_block(tape, xg, rb, NormMode::kEval, 0.2);
  for (std::size_t i = 0; i < y.data().size(); ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i]));
  tape.backward(sum(tape, y));
  for (double g : xg.grad()) CHECK(g == doctest::Approx(1.0));
}

TEST_CASE("channel attention gates per channel") {
  Rng rng(2);
  const auto f = rand_tensor(rng, {1, 4, 3, 3});
  ChannelAttentionParams<double> p{{Tensor<double>({1, 4}), Tensor<double>({1})},
                                   {Tensor<double>({4, 1}), Tensor<double>({4}, {50.0, 50.0, -50.0, 50.0})}};
  Tape<double> tape;
  const auto out = channel_attention(tape, f, p, 0.2);
  for (int c = 0; c < 4; ++c)
    for (int k = 0; k < 9; ++k) {
      const double v = f.data()[c * 9 + k], o = out.data()[c * 9 + k];
      CHECK(std::abs(o) <= std::abs(v));
      if (c == 2) CHECK(std::abs(o) < 1e-20);
      else CHECK(o == doctest::Approx(v));
    }
}

TEST_CASE("colour gains: zero weights give exactly one, otherwise inside (0, 2)") {
  auto p = cast_params<double>(init_params<float>(0, tiny()));
  Rng rng(3);
  const auto means = rand_tensor(rng, {3, 3}, 0, 1);
  Tape<double> tape;
  for (double v : dcm_forward(tape, means, *p.dcm, 0.2).data()) CHECK(v == 1.0);
  for (auto& v : p.dcm->fc[2].weight.data()) v = rng.uniform(-20, 20);
  for (double v : dcm_forward(tape, means, *p.dcm, 0.2).data()) {
    CHECK(v > 0.0);
    CHECK(v < 2.0);
  }
}

TEST_CASE("colour gains are permutation equivariant") {
  auto p = cast_params<double>(init_params<float>(4, tiny()));
  Rng rng(4);
  for (auto& v : p.dcm->fc[2].weight.data()) v = rng.uniform(-1, 1);
  const auto means = rand_tensor(rng, {1, 3}, 0, 1);
  const int perm[3] = {2, 0, 1};
  auto q = cast_params<double>(init_params<float>(4, tiny()));
  const int h = 4;
  // Input channel i of the permuted problem is channel perm[i] of the original.
  Tensor<double> pm({1, 3});
  for (int i = 0; i < 3; ++i) pm.data()[i] = means.data()[perm[i]];
  auto permute_cols = [&](const Tensor<double>& src, Tensor<double>& dst) {
    const auto rows = src.dim(0), cols = src.dim(1);
    for (std::int64_t r = 0; r < rows; ++r)
      for (std::int64_t c = 0; c < cols; ++c) dst.data()[r * cols + c] = src.data()[r * cols + (c < 3 ? perm[c] : c)];
  };
  for (int l = 0; l < 3; ++l) permute_cols(p.dcm->fc[l].weight, q.dcm->fc[l].weight);
  for (int l = 0; l < 3; ++l) q.dcm->fc[l].bias = Tensor<double>(p.dcm->fc[l].bias.shape(),
      std::vector<double>(p.dcm->fc[l].bias.data().begin(), p.dcm->fc[l].bias.data().end()));
  // Permute output rows of the last layer.
  const auto cols = 3 + 2 * h;
  Tensor<double> w2 = q.dcm->fc[2].weight, b2 = q.dcm->fc[2].bias;
  std::vector<double> wrows(w2.data().begin(), w2.data().end()), brows(b2.data().begin(), b2.data().end());
  for (int i = 0; i < 3; ++i) {
    for (int c = 0; c < cols; ++c) w2.data()[i * cols + c] = wrows[perm[i] * cols + c];
    b2.data()[i] = brows[perm[i]];
  }
  Tape<double> tape;
  const auto base = dcm_forward(tape, means, *p.dcm, 0.2);
  const auto permuted = dcm_forward(tape, pm, *q.dcm, 0.2);
  for (int i = 0; i < 3; ++i) CHECK(permuted.data()[i] == doctest::Approx(base.data()[perm[i]]).epsilon(1e-12));
}

TEST_CASE("transmission branch output keeps shape and stays in (0, 1)") {
  auto p = init_params<float>(5, tiny());
  Tensor<float> rmt({2, 1, 7, 9});
  Rng rng(5);
  for (auto& v : rmt.data()) v = static_cast<float>(rng.uniform(-100, 100));
  Tape<float> tape;
  const auto out = atm_forward(tape, rmt, *p.atm, NormMode::kEval, 0.2f);
  CHECK(out.shape() == rmt.shape());
  for (float v : out.data()) {
    CHECK(v > 0.f);
    CHECK(v < 1.f);
  }
}

TEST_CASE("degenerate transmission branch is monotone in its input") {
  auto p = cast_params<double>(init_params<float>(6, tiny()));
  for (auto& rb : p.atm->rb) {
    zero(rb.conv1.weight);
    zero(rb.conv2.weight);
  }
  // Skips: 1 -> 4 (1x1 projection), 4 -> 4 identity, 4 -> 1 projection.
  for (auto& v : p.atm->rb[0].proj->weight.data()) v = 0.5;
  for (auto& v : p.atm->rb[2].proj->weight.data()) v = 0.25;
  const Tensor<double> lo({1, 1, 1, 2}, {0.1, -0.3}), hi({1, 1, 1, 2}, {0.4, 0.2});
  Tape<double> tape;
  const auto a = atm_forward(tape, lo, *p.atm, NormMode::kEval, 0.2);
  const auto b = atm_forward(tape, hi, *p.atm, NormMode::kEval, 0.2);
  for (int i = 0; i < 2; ++i) CHECK(b.data()[i] > a.data()[i]);
}

TEST_CASE("all ablation configurations produce valid images") {
  Rng rng(7);
  const Image img = test::random_image(rng, 64, 64);
  for (int mask = 0; mask < 4; ++mask) {
    ModelConfig c = tiny();
    c.use_atm = mask & 1;
    c.use_dcm = mask & 2;
    auto p = init_params<float>(0, c);
    const auto [out, trace] = model_forward(img, p);
    CHECK(out.height() == 64);
    CHECK(out.width() == 64);
    for (float v : out.data()) {
      CHECK(v >= 0.f);
      CHECK(v <= 1.f);
    }
    CHECK(trace.rmt_refined.defined() == c.use_atm);
    CHECK(trace.coeffs.defined() == c.use_dcm);
  }
}

TEST_CASE("unit gains and a zero transmission map are identities") {
  Rng rng(8);
  auto p = init_params<double>(0, tiny());
  const auto img = rand_tensor(rng, {1, 3, 9, 11}, 0, 1);
  const Tensor<double> zero_rmt({1, 1, 9, 11}), ones = Tensor<double>::filled({1, 3}, 1.0);
  Tape<double> tape;
  const auto tr = edc_forward(tape, img, zero_rmt, ones, p.edc, p.config, NormMode::kEval);
  CHECK(tr.output.shape() == Shape{1, 3, 9, 11});
  CHECK(std::equal(tr.output.data().begin(), tr.output.data().end(), tr.output0.data().begin()));
  ModelConfig no_atm = p.config;
  no_atm.use_atm = false;
  const auto plain = edc_forward(tape, img, {}, ones, p.edc, no_atm, NormMode::kEval);
  CHECK(std::equal(plain.output.data().begin(), plain.output.data().end(), tr.output.data().begin()));
}

TEST_CASE("missing branch inputs are reported") {
  auto p = init_params<float>(0, tiny());
  const Tensor<float> img({1, 3, 8, 8});
  Tape<float> tape;
  try {
    network_forward(tape, p, img, {}, Tensor<float>({1, 3}), NormMode::kEval);
    FAIL("expected MissingBranchInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingBranchInput);
  }
}

TEST_CASE("forward pass is deterministic and finite") {
  Rng rng(9);
  const Image img = test::random_image(rng, 16, 20);
  auto a = init_params<float>(3, tiny());
  auto b = init_params<float>(3, tiny());
  const Image x = model_forward(img, a).first;
  CHECK(x == model_forward(img, b).first);
  for (float v : x.data()) CHECK(std::isfinite(v));
}

TEST_CASE("clone is deep, cast round-trips exactly") {
  auto a = init_params<float>(0, tiny());
  auto b = a.clone();
  b.edc.stem.weight.data()[0] += 1.f;
  CHECK(a.edc.stem.weight.data()[0] != b.edc.stem.weight.data()[0]);
  const auto back = cast_params<float>(cast_params<double>(a));
  CHECK(same_params(a, back));
}
