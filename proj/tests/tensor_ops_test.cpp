#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "lsw/adam.hpp"
#include "lsw/autograd.hpp"
#include "lsw/ops.hpp"
#include "lsw/rng.hpp"
#include "lsw/tensor.hpp"

using namespace lsw;

namespace {

template <typename T>
TensorPtr<T> tensor_of(Shape shape, std::vector<T> values, bool requires_grad = false) {
  return make_tensor<T>(std::move(shape), std::move(values), requires_grad);
}

// Six nested loops straight off the cross-correlation definition, accumulated
// in double. Everything the production kernel optimizes away stays explicit.
std::vector<float> naive_conv6(const std::vector<float>& in, const Shape& is,
                               const std::vector<float>& ker, const Shape& ks,
                               const std::vector<float>& bias, Dim3 stride, Dim3 pad,
                               const Shape& os) {
  const std::size_t N = is[0], C = is[1], D = is[2], H = is[3], W = is[4];
  const std::size_t F = ks[0], KD = ks[2], KH = ks[3], KW = ks[4];
  std::vector<float> out(N * F * os[2] * os[3] * os[4]);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t od = 0; od < os[2]; ++od)
        for (std::size_t oh = 0; oh < os[3]; ++oh)
          for (std::size_t ow = 0; ow < os[4]; ++ow) {
            double acc = bias[f];
            for (std::size_t c = 0; c < C; ++c)
              for (std::size_t kd = 0; kd < KD; ++kd)
                for (std::size_t kh = 0; kh < KH; ++kh)
                  for (std::size_t kw = 0; kw < KW; ++kw) {
                    const long long d = (long long)(od * stride.d + kd) - (long long)pad.d;
                    const long long h = (long long)(oh * stride.h + kh) - (long long)pad.h;
                    const long long w = (long long)(ow * stride.w + kw) - (long long)pad.w;
                    if (d < 0 || h < 0 || w < 0 || d >= (long long)D || h >= (long long)H ||
                        w >= (long long)W)
                      continue;
                    const double iv =
                        in[(((n * C + c) * D + (std::size_t)d) * H + (std::size_t)h) * W +
                           (std::size_t)w];
                    const double kv = ker[(((f * C + c) * KD + kd) * KH + kh) * KW + kw];
                    acc += iv * kv;
                  }
            out[(((n * F + f) * os[2] + od) * os[3] + oh) * os[4] + ow] = (float)acc;
          }
  return out;
}

}  // namespace

TEST_SUITE("tensor_ops") {

TEST_CASE("conv3d: 1x1x1x1x1 identity kernel passes the value through") {
  auto in = tensor_of<float>({1, 1, 1, 1, 1}, {7.0f});
  auto k = tensor_of<float>({1, 1, 1, 1, 1}, {1.0f});
  auto b = tensor_of<float>({1}, {0.0f});
  auto out = conv3d<float>(nullptr, in, k, b, {1, 1, 1}, {0, 0, 0});
  REQUIRE(out->shape() == Shape{1, 1, 1, 1, 1});
  CHECK(out->values()[0] == 7.0f);
}

TEST_CASE("conv3d: all-ones 2x2x2 kernel over values 1..8 sums to 36") {
  auto in = tensor_of<float>({1, 1, 2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  auto k = tensor_of<float>({1, 1, 2, 2, 2}, std::vector<float>(8, 1.0f));
  auto b = tensor_of<float>({1}, {0.0f});
  auto out = conv3d<float>(nullptr, in, k, b, {1, 1, 1}, {0, 0, 0});
  REQUIRE(out->shape() == Shape{1, 1, 1, 1, 1});
  CHECK(out->values()[0] == 36.0f);
}

TEST_CASE("conv3d: full-scene geometry collapses time and keeps 512x512") {
  // 5 bands, 2 time steps, 16 filters of 2x3x3, same-padding in space only.
  auto in = make_tensor<float>(Shape{1, 5, 2, 512, 512});
  auto k = make_tensor<float>(Shape{16, 5, 2, 3, 3});
  std::vector<float> bias_values(16);
  for (std::size_t f = 0; f < 16; ++f) bias_values[f] = (float)f * 0.25f;
  auto b = tensor_of<float>({16}, bias_values);

  const Shape expected{1, 16, 1, 512, 512};
  CHECK(conv3d_output_shape(in->shape(), k->shape(), {1, 1, 1}, {0, 1, 1}) == expected);

  auto out = conv3d<float>(nullptr, in, k, b, {1, 1, 1}, {0, 1, 1});
  REQUIRE(out->shape() == expected);
  // Zero input and kernel leave pure bias per filter plane.
  const std::size_t plane = 512 * 512;
  for (std::size_t f = 0; f < 16; ++f) {
    CHECK(out->values()[f * plane] == bias_values[f]);
    CHECK(out->values()[f * plane + plane - 1] == bias_values[f]);
  }
}

TEST_CASE("conv3d matches the six-loop oracle on random cases") {
  Rng rng(1234);
  for (int rep = 0; rep < 25; ++rep) {
    const std::size_t N = 1 + rng.uniform_below(2);
    const std::size_t C = 1 + rng.uniform_below(3);
    const std::size_t D = 1 + rng.uniform_below(4);
    const std::size_t H = 1 + rng.uniform_below(8);
    const std::size_t W = 1 + rng.uniform_below(8);
    const std::size_t F = 1 + rng.uniform_below(3);
    const Dim3 pad{rng.uniform_below(2), rng.uniform_below(2), rng.uniform_below(2)};
    const Dim3 stride{1 + rng.uniform_below(2), 1 + rng.uniform_below(2),
                      1 + rng.uniform_below(2)};
    const std::size_t KD = 1 + rng.uniform_below(D + 2 * pad.d);
    const std::size_t KH = 1 + rng.uniform_below(H + 2 * pad.h);
    const std::size_t KW = 1 + rng.uniform_below(W + 2 * pad.w);

    auto in = random_normal<float>({N, C, D, H, W}, rng, 1.0);
    auto k = random_normal<float>({F, C, KD, KH, KW}, rng, 1.0);
    auto b = random_normal<float>({F}, rng, 1.0);

    const Shape os = conv3d_output_shape(in->shape(), k->shape(), stride, pad);
    auto out = conv3d<float>(nullptr, in, k, b, stride, pad);
    REQUIRE(out->shape() == os);

    const auto expect = naive_conv6(
        std::vector<float>(in->values().begin(), in->values().end()), in->shape(),
        std::vector<float>(k->values().begin(), k->values().end()), k->shape(),
        std::vector<float>(b->values().begin(), b->values().end()), stride, pad, os);
    REQUIRE(out->values().size() == expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) {
      CHECK(std::abs(out->values()[i] - expect[i]) < 1e-5f);
    }
  }
}

TEST_CASE("conv3d and maxpool3d extents follow the shape formulas everywhere") {
  // Sweep the depth axis through every valid (extent, kernel, stride, pad)
  // combination with real tensors; height and width stay fixed so the case
  // count stays small.
  for (std::size_t D = 1; D <= 5; ++D)
    for (std::size_t pd = 0; pd <= 2; ++pd)
      for (std::size_t KD = 1; KD <= D + 2 * pd; ++KD)
        for (std::size_t sd = 1; sd <= 3; ++sd) {
          const std::size_t expect_d = (D + 2 * pd - KD) / sd + 1;
          auto in = make_tensor<float>(Shape{1, 1, D, 4, 4});
          auto k = make_tensor<float>(Shape{1, 1, KD, 2, 2});
          auto b = make_tensor<float>(Shape{1});
          auto out = conv3d<float>(nullptr, in, k, b, {sd, 1, 1}, {pd, 1, 1});
          REQUIRE(out->shape().size() == 5);
          CHECK(out->shape()[2] == expect_d);
          CHECK(out->shape()[3] == 5);  // 4 + 2*1 - 2 + 1
          CHECK(out->shape()[4] == 5);

          if (pd == 0 && KD <= D) {  // maxpool takes no padding
            auto pin = make_tensor<float>(Shape{1, 1, D, 4, 4});
            auto pout = maxpool3d<float>(nullptr, pin, {KD, 2, 2}, {sd, 2, 2});
            CHECK(pout->shape()[2] == (D - KD) / sd + 1);
            CHECK(pout->shape()[3] == 2);
            CHECK(pout->shape()[4] == 2);
          }
        }
}

TEST_CASE("conv3d rejects mismatched channels and empty outputs") {
  auto in = make_tensor<float>(Shape{1, 2, 2, 4, 4});
  auto k3 = make_tensor<float>(Shape{1, 3, 1, 1, 1});  // 3 kernel channels vs 2 input
  auto b = make_tensor<float>(Shape{1});
  CHECK_THROWS_AS((conv3d<float>(nullptr, in, k3, b, {1, 1, 1}, {0, 0, 0})), ValidationError);

  auto kbig = make_tensor<float>(Shape{1, 2, 3, 1, 1});  // kernel depth 3 over input depth 2
  CHECK_THROWS_AS((conv3d<float>(nullptr, in, kbig, b, {1, 1, 1}, {0, 0, 0})),
                  ValidationError);
}

TEST_CASE("maxpool3d: constants stay constant") {
  auto in = make_tensor<float>(Shape{1, 1, 2, 4, 4}, std::vector<float>(32, 3.0f));
  auto out = maxpool3d<float>(nullptr, in, {1, 2, 2}, {1, 2, 2});
  for (float v : out->values()) CHECK(v == 3.0f);
}

TEST_CASE("maxpool3d: window over [1,2,3,4] picks 4") {
  auto in = tensor_of<float>({1, 1, 1, 2, 2}, {1, 2, 3, 4});
  auto out = maxpool3d<float>(nullptr, in, {1, 2, 2}, {1, 2, 2});
  REQUIRE(out->numel() == 1);
  CHECK(out->values()[0] == 4.0f);
}

TEST_CASE("maxpool3d: full-cube window picks 8 and routes the gradient to it") {
  auto in = tensor_of<float>({1, 1, 2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8}, true);
  Tape<float> tape;
  auto out = maxpool3d<float>(&tape, in, {2, 2, 2}, {2, 2, 2});
  REQUIRE(out->numel() == 1);
  CHECK(out->values()[0] == 8.0f);
  auto loss = reduce<float>(&tape, out, Reduction::sum);
  backward(loss, tape);
  const std::vector<float> expected_grad{0, 0, 0, 0, 0, 0, 0, 1};
  for (std::size_t i = 0; i < 8; ++i) CHECK(in->grad()[i] == expected_grad[i]);
}

TEST_CASE("maxpool3d: ties send the gradient to the first position") {
  auto in = tensor_of<float>({1, 1, 1, 2, 2}, {5, 5, 5, 5}, true);
  Tape<float> tape;
  auto out = maxpool3d<float>(&tape, in, {1, 2, 2}, {1, 2, 2});
  auto loss = reduce<float>(&tape, out, Reduction::sum);
  backward(loss, tape);
  CHECK(in->grad()[0] == 1.0f);
  CHECK(in->grad()[1] == 0.0f);
  CHECK(in->grad()[2] == 0.0f);
  CHECK(in->grad()[3] == 0.0f);
}

TEST_CASE("maxpool3d rejects windows larger than the input") {
  auto in = make_tensor<float>(Shape{1, 1, 1, 2, 2});
  CHECK_THROWS_AS((maxpool3d<float>(nullptr, in, {1, 3, 3}, {1, 1, 1})), ValidationError);
}

TEST_CASE("affine: identity weight and zero bias reproduce the input") {
  auto in = tensor_of<float>({2, 3}, {1, 2, 3, 4, 5, 6});
  auto w = tensor_of<float>({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  auto b = make_tensor<float>(Shape{3});
  auto out = affine<float>(nullptr, in, w, b);
  CHECK(std::memcmp(out->values().data(), in->values().data(), 6 * sizeof(float)) == 0);
}

TEST_CASE("affine: [[1,2]] through identity plus bias [3,4] gives [[4,6]]") {
  auto in = tensor_of<float>({1, 2}, {1, 2});
  auto w = tensor_of<float>({2, 2}, {1, 0, 0, 1});
  auto b = tensor_of<float>({2}, {3, 4});
  auto out = affine<float>(nullptr, in, w, b);
  REQUIRE(out->shape() == Shape{1, 2});
  CHECK(out->values()[0] == 4.0f);
  CHECK(out->values()[1] == 6.0f);
}

TEST_CASE("affine matches a triple-loop oracle on a random 4x8 by 8x3 product") {
  Rng rng(77);
  auto in = random_normal<float>({4, 8}, rng, 1.0);
  auto w = random_normal<float>({8, 3}, rng, 1.0);
  auto b = random_normal<float>({3}, rng, 1.0);
  auto out = affine<float>(nullptr, in, w, b);
  for (std::size_t n = 0; n < 4; ++n)
    for (std::size_t m = 0; m < 3; ++m) {
      double acc = b->values()[m];
      for (std::size_t k = 0; k < 8; ++k)
        acc += (double)in->values()[n * 8 + k] * (double)w->values()[k * 3 + m];
      CHECK(std::abs(out->values()[n * 3 + m] - (float)acc) < 1e-5f);
    }
}

TEST_CASE("affine rejects mismatched inner extents") {
  auto in = make_tensor<float>(Shape{2, 3});
  auto w = make_tensor<float>(Shape{4, 2});
  auto b = make_tensor<float>(Shape{2});
  CHECK_THROWS_AS((affine<float>(nullptr, in, w, b)), ValidationError);
}

TEST_CASE("relu zeroes negatives and keeps positives") {
  auto in = tensor_of<float>({3}, {-1, 0, 2});
  auto out = relu<float>(nullptr, in);
  CHECK(out->values()[0] == 0.0f);
  CHECK(out->values()[1] == 0.0f);
  CHECK(out->values()[2] == 2.0f);
}

TEST_CASE("relu is idempotent") {
  Rng rng(31);
  auto in = random_normal<float>({64}, rng, 2.0);
  auto once = relu<float>(nullptr, in);
  auto twice = relu<float>(nullptr, once);
  CHECK(std::memcmp(once->values().data(), twice->values().data(), 64 * sizeof(float)) == 0);
}

TEST_CASE("sigmoid hits its anchor values") {
  auto in = tensor_of<double>({2}, {0.0, -10.0});
  auto out = sigmoid<double>(nullptr, in);
  CHECK(out->values()[0] == 0.5);
  CHECK(std::abs(out->values()[1] - 4.5398e-5) < 1e-9);
  CHECK(out->values()[1] == doctest::Approx(1.0 / (1.0 + std::exp(10.0))).epsilon(1e-12));
}

TEST_CASE("sigmoid stays strictly inside (0,1), saturated inputs included") {
  auto in = tensor_of<float>({6}, {-1000.0f, -89.0f, -30.0f, 30.0f, 89.0f, 1000.0f});
  auto out = sigmoid<float>(nullptr, in);
  for (float v : out->values()) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
}

TEST_CASE("bce: pred 0.5 with label 1 is ln 2") {
  auto p = tensor_of<float>({1}, {0.5f});
  auto y = tensor_of<float>({1}, {1.0f});
  auto loss = bce_loss<float>(nullptr, p, y, Reduction::mean);
  CHECK(std::abs((double)loss.scalar() - std::log(2.0)) < 1e-6);
}

TEST_CASE("bce: perfect prediction bottoms out at the clamp floor") {
  auto p = tensor_of<double>({1}, {1.0});
  auto y = tensor_of<double>({1}, {1.0});
  auto loss = bce_loss<double>(nullptr, p, y, Reduction::mean);
  CHECK(loss.scalar() > 0.0);
  CHECK(loss.scalar() <= 1.2e-7);
}

TEST_CASE("bce: hand-computed two-example mean") {
  auto p = tensor_of<double>({2}, {0.9, 0.2});
  auto y = tensor_of<double>({2}, {1.0, 0.0});
  auto loss = bce_loss<double>(nullptr, p, y, Reduction::mean);
  const double expect = (-std::log(0.9) - std::log(0.8)) / 2.0;
  CHECK(std::abs(loss.scalar() - 0.164252) < 1e-6);
  CHECK(loss.scalar() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("bce: sum reduction is batch-size times the mean") {
  auto p = tensor_of<double>({2}, {0.9, 0.2});
  auto y = tensor_of<double>({2}, {1.0, 0.0});
  auto mean = bce_loss<double>(nullptr, p, y, Reduction::mean);
  auto sum = bce_loss<double>(nullptr, p, y, Reduction::sum);
  CHECK(sum.scalar() == doctest::Approx(2.0 * mean.scalar()).epsilon(1e-12));
}

TEST_CASE("bce rejects labels outside {0,1}") {
  auto p = tensor_of<float>({1}, {0.5f});
  auto y = tensor_of<float>({1}, {0.5f});
  CHECK_THROWS_AS((bce_loss<float>(nullptr, p, y, Reduction::mean)), ValidationError);
}

TEST_CASE("bce never goes negative") {
  Rng rng(91);
  for (int rep = 0; rep < 50; ++rep) {
    auto p = make_tensor<double>(Shape{4});
    auto y = make_tensor<double>(Shape{4});
    for (std::size_t i = 0; i < 4; ++i) {
      p->values()[i] = rng.uniform(0.0, 1.0);
      y->values()[i] = (double)(int)rng.uniform_below(2);
    }
    auto loss = bce_loss<double>(nullptr, p, y, Reduction::sum);
    CHECK(loss.scalar() >= 0.0);
  }
}

TEST_CASE("backward of a plain sum is all ones") {
  auto x = make_tensor<float>(Shape{2, 3}, true);
  Tape<float> tape;
  auto loss = reduce<float>(&tape, x, Reduction::sum);
  backward(loss, tape);
  for (float g : x->grad()) CHECK(g == 1.0f);
}

TEST_CASE("sigmoid-BCE chain gradient is p minus y at the pre-activation") {
  // z chosen so sigmoid(z) = 0.7 exactly up to double rounding.
  const double z0 = std::log(0.7 / 0.3);
  auto z = tensor_of<double>({1}, {z0}, true);
  auto y = tensor_of<double>({1}, {1.0});
  Tape<double> tape;
  auto p = sigmoid<double>(&tape, z);
  CHECK(p->values()[0] == doctest::Approx(0.7).epsilon(1e-12));
  auto loss = bce_loss<double>(&tape, p, y, Reduction::mean);
  backward(loss, tape);
  CHECK(z->grad()[0] == doctest::Approx(0.7 - 1.0).epsilon(1e-9));
}

TEST_CASE("tensors off the loss path keep zero gradients") {
  auto x = make_tensor<float>(Shape{3}, true);
  auto bystander = make_tensor<float>(Shape{3}, true);
  for (std::size_t i = 0; i < 3; ++i) x->values()[i] = (float)i;
  Tape<float> tape;
  auto out = relu<float>(&tape, x);
  auto loss = reduce<float>(&tape, out, Reduction::sum);
  backward(loss, tape);
  for (float g : bystander->grad()) CHECK(g == 0.0f);
}

TEST_CASE("tape records operations and replays them in reverse") {
  auto x = make_tensor<float>(Shape{2}, true);
  Tape<float> tape;
  auto a = relu<float>(&tape, x);
  auto b = sigmoid<float>(&tape, a);
  auto loss = reduce<float>(&tape, b, Reduction::mean);
  CHECK(tape.size() == 3);
  backward(loss, tape);
  const auto& log = tape.visit_log();
  REQUIRE(log.size() == 3);
  CHECK(std::string(log[0]) == "reduce_mean");
  CHECK(std::string(log[1]) == "sigmoid");
  CHECK(std::string(log[2]) == "relu");
}

TEST_CASE("adam: zero gradient on a fresh state leaves the parameter untouched") {
  auto theta = tensor_of<float>({2}, {1.5f, -2.5f}, true);
  theta->ensure_grad();
  std::vector<NamedParam<float>> params{{"theta", theta}};
  AdamState state;
  adam_step<float>(params, state);
  CHECK(theta->values()[0] == 1.5f);
  CHECK(theta->values()[1] == -2.5f);
  CHECK(state.step_count == 1);
}

TEST_CASE("adam: first step with g=0.5 moves theta by about alpha") {
  auto theta = tensor_of<double>({1}, {1.0}, true);
  theta->ensure_grad();
  theta->grad()[0] = 0.5;
  std::vector<NamedParam<double>> params{{"theta", theta}};
  AdamState state;  // alpha 0.001, beta1 0.9, beta2 0.999, eps 1e-8
  adam_step<double>(params, state);
  const double expected = 1.0 - 0.001 * (0.5 / (0.5 + 1e-8));
  CHECK(theta->values()[0] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(theta->values()[0] == doctest::Approx(0.999).epsilon(1e-6));
}

TEST_CASE("adam: constant gradient keeps the step near alpha") {
  auto theta = tensor_of<double>({1}, {0.0}, true);
  theta->ensure_grad();
  std::vector<NamedParam<double>> params{{"theta", theta}};
  AdamState state;
  double prev = 0.0;
  for (int step = 0; step < 2; ++step) {
    theta->grad()[0] = 1.0;
    adam_step<double>(params, state);
    const double delta = prev - theta->values()[0];
    CHECK(delta == doctest::Approx(0.001).epsilon(1e-6));
    prev = theta->values()[0];
  }
  CHECK(state.step_count == 2);
}

TEST_CASE("adam: zero gradients forever change nothing, bit for bit") {
  Rng rng(55);
  auto theta = random_normal<float>({16}, rng, 1.0, true);
  theta->ensure_grad();
  std::vector<float> before(theta->values().begin(), theta->values().end());
  std::vector<NamedParam<float>> params{{"theta", theta}};
  AdamState state;
  for (int step = 0; step < 50; ++step) adam_step<float>(params, state);
  CHECK(std::memcmp(before.data(), theta->values().data(), before.size() * sizeof(float)) ==
        0);
  for (double v : state.v[0]) CHECK(v >= 0.0);
}

TEST_CASE("adam: non-finite gradient names the parameter") {
  auto theta = tensor_of<float>({1}, {1.0f}, true);
  theta->ensure_grad();
  theta->grad()[0] = std::numeric_limits<float>::infinity();
  std::vector<NamedParam<float>> params{{"conv1.weight", theta}};
  AdamState state;
  try {
    adam_step<float>(params, state);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("conv1.weight") != std::string::npos);
  }
}

TEST_CASE("operations are deterministic: identical runs, identical bits") {
  Rng rng_a(808), rng_b(808);
  auto in_a = random_normal<float>({2, 3, 2, 6, 6}, rng_a, 1.0);
  auto in_b = random_normal<float>({2, 3, 2, 6, 6}, rng_b, 1.0);
  CHECK(std::memcmp(in_a->values().data(), in_b->values().data(),
                    in_a->numel() * sizeof(float)) == 0);

  auto k_a = random_normal<float>({4, 3, 2, 3, 3}, rng_a, 1.0);
  auto k_b = random_normal<float>({4, 3, 2, 3, 3}, rng_b, 1.0);
  auto bias_a = random_normal<float>({4}, rng_a, 1.0);
  auto bias_b = random_normal<float>({4}, rng_b, 1.0);

  auto conv_a = conv3d<float>(nullptr, in_a, k_a, bias_a, {1, 1, 1}, {0, 1, 1});
  auto conv_b = conv3d<float>(nullptr, in_b, k_b, bias_b, {1, 1, 1}, {0, 1, 1});
  CHECK(std::memcmp(conv_a->values().data(), conv_b->values().data(),
                    conv_a->numel() * sizeof(float)) == 0);

  auto pool_a = maxpool3d<float>(nullptr, conv_a, {1, 2, 2}, {1, 2, 2});
  auto pool_b = maxpool3d<float>(nullptr, conv_b, {1, 2, 2}, {1, 2, 2});
  CHECK(std::memcmp(pool_a->values().data(), pool_b->values().data(),
                    pool_a->numel() * sizeof(float)) == 0);

  auto sig_a = sigmoid<float>(nullptr, pool_a);
  auto sig_b = sigmoid<float>(nullptr, pool_b);
  CHECK(std::memcmp(sig_a->values().data(), sig_b->values().data(),
                    sig_a->numel() * sizeof(float)) == 0);
}

TEST_CASE("global_avg_pool averages each channel") {
  auto in = tensor_of<float>({1, 2, 1, 2, 2}, {1, 2, 3, 4, 10, 20, 30, 40});
  auto out = global_avg_pool<float>(nullptr, in);
  REQUIRE(out->shape() == Shape{1, 2});
  CHECK(out->values()[0] == 2.5f);
  CHECK(out->values()[1] == 25.0f);
}

TEST_CASE("reshape keeps data and remaps the shape") {
  auto in = tensor_of<float>({2, 3}, {1, 2, 3, 4, 5, 6});
  auto out = reshape<float>(nullptr, in, Shape{3, 2});
  CHECK(out->shape() == Shape{3, 2});
  CHECK(std::memcmp(out->values().data(), in->values().data(), 6 * sizeof(float)) == 0);
  CHECK_THROWS_AS((reshape<float>(nullptr, in, Shape{4, 2})), ValidationError);
}

}  // TEST_SUITE
