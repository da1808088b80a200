#include <cmath>

#include "doctest.h"
#include "protoseg/core.hpp"
#include "protoseg/diffkernel.hpp"
#include "protoseg/error.hpp"
#include "protoseg/synthetic.hpp"
#include "support.hpp"

using namespace protoseg;
using namespace testing_support;

TEST_CASE("soft_dice_loss examples") {
  const LabelMask g(2, 2, {1, 0, 0, 1});
  ProbabilityMap onehot{2, 2, 2, {0, 1, 1, 0, 1, 0, 0, 1}};
  CHECK(soft_dice_loss(onehot, g, 1, 1e-12) < 1e-12);

  ProbabilityMap uniform{2, 2, 2, std::vector<double>(8, 0.5)};
  // (2 * (0.5 + 0.5) + eps) / (4 * 0.5 + 2 + eps)
  CHECK(soft_dice_loss(uniform, g, 1, 1e-12) == doctest::Approx(0.5).epsilon(1e-10));

  ProbabilityMap zero{2, 2, 2, {1, 0, 1, 0, 1, 0, 1, 0}};
  CHECK(soft_dice_loss(zero, LabelMask(2, 2), 1, 1e-6) == 0.0);

  CHECK_THROWS_AS(soft_dice_loss(uniform, LabelMask(1, 4)), Error);
  CHECK_THROWS_AS(soft_dice_loss(uniform, g, 1, 0.0), Error);
}

TEST_CASE("soft_dice_loss stays in [0, 1]") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const auto g = any_mask(rng, 3, 4, u(rng));
    ProbabilityMap p{3, 4, 2, std::vector<double>(24)};
    for (std::size_t i = 0; i < 12; ++i) {
      const double v = t % 2 == 0 ? u(rng) : (u(rng) < 0.5 ? 0.0 : 1.0);
      p.probs[2 * i] = 1.0 - v;
      p.probs[2 * i + 1] = v;
    }
    const double loss = soft_dice_loss(p, g, 1, 1e-9);
    CHECK(loss >= 0.0);
    CHECK(loss <= 1.0);
  }
}

TEST_CASE("protoseg_backward: constant features give a zero gradient when detached") {
  FeatureMap f(3, 3, 2, std::vector<float>(18, 0.7f));
  std::mt19937_64 rng(1);
  const auto init = random_mask(rng, 3, 3);
  const auto g = random_mask(rng, 3, 3);
  const auto grad = protoseg_backward(f, init, g, GradMode::kDetachedPrototypes);
  for (double v : grad.values) CHECK(v == 0.0);
  CHECK(finite_diff_check(f, init, g, GradMode::kDetachedPrototypes) < 1e-12);
}

TEST_CASE("protoseg_backward: 2x2x1 against finite differences") {
  const auto c = random_gradcheck_case(99, 2, 2, 1);
  for (auto mode : {GradMode::kThroughPrototypes, GradMode::kDetachedPrototypes}) {
    CHECK(finite_diff_check(c.feature, c.init_mask, c.target, mode, 1e-5) < 1e-8);
  }
}

TEST_CASE("finite_diff_check on 3x3x2 inputs and step guard") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto c = random_gradcheck_case(seed, 3, 3, 2);
    for (auto mode : {GradMode::kThroughPrototypes, GradMode::kDetachedPrototypes}) {
      CHECK(finite_diff_check(c.feature, c.init_mask, c.target, mode, 1e-5) < 1e-6);
    }
  }
  const auto c = random_gradcheck_case(0);
  try {
    finite_diff_check(c.feature, c.init_mask, c.target, GradMode::kThroughPrototypes, 0.0);
    FAIL("expected PreconditionViolation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kPreconditionViolation);
  }
}

TEST_CASE("protoseg_backward agrees with a double-precision difference quotient of protoseg_loss") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto c = random_gradcheck_case(500 + seed, 3, 4, 2);
    const auto grad = protoseg_backward(c.feature, c.init_mask, c.target, GradMode::kThroughPrototypes);
    for (std::size_t i = 0; i < c.feature.values().size(); ++i) {
      FeatureMap plus = c.feature;
      FeatureMap minus = c.feature;
      const float v = c.feature.values()[i];
      plus.values()[i] = v + 1e-3f;
      minus.values()[i] = v - 1e-3f;
      const double delta = static_cast<double>(plus.values()[i]) - static_cast<double>(minus.values()[i]);
      const double numeric = (protoseg_loss(plus, c.init_mask, c.target) - protoseg_loss(minus, c.init_mask, c.target)) / delta;
      CHECK(std::abs(numeric - grad.values[i]) <= 1e-5 + 1e-3 * std::abs(grad.values[i]));
    }
  }
}

TEST_CASE("gradient modes differ on random inputs") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto c = random_gradcheck_case(seed);
    const auto through = protoseg_backward(c.feature, c.init_mask, c.target, GradMode::kThroughPrototypes);
    const auto detached = protoseg_backward(c.feature, c.init_mask, c.target, GradMode::kDetachedPrototypes);
    bool differ = false;
    for (std::size_t i = 0; i < through.values.size(); ++i) differ |= through.values[i] != detached.values[i];
    CHECK(differ);
  }
}

TEST_CASE("loss_and_gradient matches the separate entry points") {
  const auto c = random_gradcheck_case(4, 4, 4, 3);
  const auto both = protoseg_loss_and_gradient(c.feature, c.init_mask, c.target);
  CHECK(both.loss == protoseg_loss(c.feature, c.init_mask, c.target));
  CHECK(both.gradient.values == protoseg_backward(c.feature, c.init_mask, c.target).values);
  CHECK(both.gradient.height == 4);
  CHECK(both.gradient.channels == 3);
}

TEST_CASE("saturated probabilities give a vanishing gradient") {
  std::mt19937_64 rng(13);
  const auto m = random_mask(rng, 4, 4);
  std::vector<float> v(16);
  for (std::size_t i = 0; i < 16; ++i) v[i] = m.labels()[i] * 1000.0f;
  const FeatureMap f(4, 4, 1, v);
  for (auto mode : {GradMode::kThroughPrototypes, GradMode::kDetachedPrototypes}) {
    const auto grad = protoseg_backward(f, m, m, mode);
    for (double x : grad.values) {
      CHECK(std::isfinite(x));
      CHECK(std::abs(x) < 1e-12);
    }
  }
}

TEST_CASE("gradient errors propagate") {
  const FeatureMap f(2, 2, 1, {1, 2, 3, 4});
  CHECK_THROWS_AS(protoseg_backward(f, LabelMask(2, 2), LabelMask(2, 2)), Error);
  CHECK(parse_grad_mode("through") == GradMode::kThroughPrototypes);
  CHECK(parse_grad_mode("detached_prototypes") == GradMode::kDetachedPrototypes);
  CHECK_THROWS_AS(parse_grad_mode("sideways"), Error);
}
