#include <cstdlib>

#include "doctest.h"
#include "protoseg/core.hpp"
#include "protoseg/error.hpp"
#include "protoseg/metrics.hpp"
#include "protoseg/parallel.hpp"
#include "protoseg/synthetic.hpp"
#include "support.hpp"

using namespace protoseg;
using namespace testing_support;

TEST_CASE("gen_synthetic is deterministic per seed") {
  SyntheticSpec spec;
  spec.seed = 42;
  spec.channels = 3;
  spec.separation = 2.0;
  const auto a = gen_synthetic(spec);
  const auto b = gen_synthetic(spec);
  CHECK(a.truth == b.truth);
  CHECK(a.output == b.output);
  CHECK(std::equal(a.feature.values().begin(), a.feature.values().end(), b.feature.values().begin()));
  spec.seed = 43;
  CHECK_FALSE(gen_synthetic(spec).truth == a.truth);
}

TEST_CASE("gen_synthetic shape of the sample") {
  SyntheticSpec spec;
  spec.seed = 1;
  spec.height = 20;
  spec.width = 30;
  spec.channels = 2;
  spec.object_fraction = 0.25;
  const auto s = gen_synthetic(spec);
  CHECK(s.feature.height() == 20);
  CHECK(s.feature.width() == 30);
  CHECK(s.feature.channels() == 2);
  CHECK(s.truth.count(1) == 150);
  CHECK(s.output.count(1) > 0);
  CHECK(s.output.count(0) > 0);
  CHECK(sa_score(s.output, s.truth).value > 0.8);
  CHECK(sa_score(s.output, s.truth).value < 1.0);
}

TEST_CASE("gen_synthetic rejects bad specs") {
  const auto code = [](SyntheticSpec spec) {
    try {
      gen_synthetic(spec);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kIoFailure;
  };
  SyntheticSpec s;
  s.height = 0;
  CHECK(code(s) == ErrorCode::kInvalidSpec);
  s = {};
  s.object_fraction = 1.0;
  CHECK(code(s) == ErrorCode::kInvalidSpec);
  s = {};
  s.noise_sigma = 0.0;
  CHECK(code(s) == ErrorCode::kInvalidSpec);
  s = {};
  s.channels = 2;
  s.channel_separation = {1.0};
  CHECK(code(s) == ErrorCode::kInvalidSpec);
  s = {};
  s.output_flip_fraction = -0.1;
  CHECK(code(s) == ErrorCode::kInvalidSpec);
}

TEST_CASE("gen_synthetic: wide separation is segmented almost perfectly") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SyntheticSpec spec;
    spec.seed = seed;
    spec.separation = 6.0;
    const auto s = gen_synthetic(spec);
    CHECK(sa_score(protoseg::protoseg(s.feature, s.output).sam.mask, s.truth).value >= 0.99);
  }
}

TEST_CASE("simulate_output never empties a class") {
  const LabelMask one(3, 3, {0, 0, 0, 0, 1, 0, 0, 0, 0});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto out = simulate_output(one, 1.0, seed);
    CHECK(out.count(1) >= 1);
    CHECK(out.count(0) >= 1);
  }
}

TEST_CASE("resize_mask nearest") {
  const LabelMask m(2, 2, {0, 1, 1, 0});
  const auto big = resize_mask(m, 4, 4);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) CHECK(big.at(y, x) == m.at(y / 2, x / 2));
}

TEST_CASE("random_gradcheck_case holds both classes") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto c = random_gradcheck_case(seed, 2, 1, 1);
    CHECK(c.init_mask.count(0) == 1);
    CHECK(c.target.count(1) == 1);
  }
}

TEST_CASE("parallel_for and job resolution") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 7) throw Error(ErrorCode::kEmptyInput, "boom");
                  }),
                  Error);
  CHECK(resolve_jobs(3) == 3);
  ::setenv("PROTOSEG_JOBS", "5", 1);
  CHECK(resolve_jobs() == 5);
  ::unsetenv("PROTOSEG_JOBS");
  CHECK(resolve_jobs() >= 1);
  CHECK(mix_seed(1, 2) == mix_seed(1, 2));
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
  CHECK(hash_string("a") != hash_string("b"));
}
