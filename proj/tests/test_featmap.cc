// tests/test_featmap.cc

// Copyright 2025  assertkit authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "assertkit/common.hpp"
#include "assertkit/featmap.hpp"

using namespace assertkit;

namespace {

FeatureMatrix ramp_features(std::size_t t, std::size_t d) {
  FeatureMatrix fm;
  fm.rows = t;
  fm.cols = d;
  fm.data.resize(t * d);
  for (std::size_t i = 0; i < fm.data.size(); ++i)
    fm.data[i] = static_cast<float>(i % 977) * 0.25f;
  return fm;
}

// Independent enumerator: materialize the extended map explicitly, then
// slice it row by row.
std::vector<std::vector<float>> naive_segments(const FeatureMatrix& f, std::size_t m,
                                               std::size_t l) {
  const std::size_t t = f.rows, d = f.cols;
  const std::size_t extended = (t + m - 1) / m * m;
  std::vector<float> map(extended * d);
  for (std::size_t j = 0; j < extended; ++j)
    for (std::size_t k = 0; k < d; ++k) map[j * d + k] = f.data[(j % t) * d + k];
  std::vector<std::vector<float>> segs;
  for (std::size_t off = 0; off + m <= extended; off += m - l)
    segs.emplace_back(map.begin() + off * d, map.begin() + (off + m) * d);
  return segs;
}

}  // namespace

TEST_CASE("exact fit produces a single identical segment") {
  const FeatureMatrix f = ramp_features(400, 6);
  const SegmentSet s = unify_and_segment(f, {400, 0});
  REQUIRE(s.segments.size() == 1);
  CHECK(s.segments[0] == f.data);
}

TEST_CASE("T=500 M=400 L=200 gives 3 segments with cyclic tail") {
  const FeatureMatrix f = ramp_features(500, 5);
  const SegmentSet s = unify_and_segment(f, {400, 200});
  REQUIRE(s.segments.size() == 3);
  const auto naive = naive_segments(f, 400, 200);
  REQUIRE(naive.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(s.segments[i] == naive[i]);
  // frames 500..799 of the extension are copies of frames 0..299
  for (std::size_t r = 0; r < 100; ++r)  // rows 400..499 of segment at offset 400
    for (std::size_t k = 0; k < 5; ++k)
      CHECK(s.segments[2][(r + 100) * 5 + k] == f.data[r * 5 + k]);
}

TEST_CASE("T=350 M=400 L=200 gives one segment whose tail repeats the head") {
  const FeatureMatrix f = ramp_features(350, 4);
  const SegmentSet s = unify_and_segment(f, {400, 200});
  REQUIRE(s.segments.size() == 1);
  for (std::size_t r = 350; r < 400; ++r)
    for (std::size_t k = 0; k < 4; ++k)
      CHECK(s.segments[0][r * 4 + k] == f.data[(r - 350) * 4 + k]);
}

TEST_CASE("segmenter matches the naive enumerator on random shapes") {
  Rng rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = 2 + rng.below(40);
    // choose a step that divides m, then l = m - step
    std::vector<std::size_t> divisors;
    for (std::size_t s = 1; s <= m; ++s)
      if (m % s == 0) divisors.push_back(s);
    const std::size_t step = divisors[rng.below(divisors.size())];
    const std::size_t l = m - step;
    const std::size_t t = 1 + rng.below(3 * m);
    const std::size_t d = 1 + rng.below(4);
    const FeatureMatrix f = ramp_features(t, d);
    const SegmentSet got = unify_and_segment(f, {m, l});
    const auto want = naive_segments(f, m, l);
    REQUIRE(got.segments.size() == want.size());
    const std::size_t extended = (t + m - 1) / m * m;
    CHECK(got.segments.size() == (extended - m) / (m - l) + 1);
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(got.segments[i] == want[i]);
    // cyclic extension introduces no new values
    std::set<float> original(f.data.begin(), f.data.end());
    for (const auto& seg : got.segments)
      for (const float v : seg) CHECK(original.count(v) == 1);
  }
}

TEST_CASE("L=0 segments of an exact multiple reconstruct the input") {
  const FeatureMatrix f = ramp_features(120, 3);
  const SegmentSet s = unify_and_segment(f, {40, 0});
  REQUIRE(s.segments.size() == 3);
  std::vector<float> rebuilt;
  for (const auto& seg : s.segments) rebuilt.insert(rebuilt.end(), seg.begin(), seg.end());
  CHECK(rebuilt == f.data);
}

TEST_CASE("segmenter config invariants are enforced") {
  const FeatureMatrix f = ramp_features(10, 2);
  CHECK_THROWS_AS(unify_and_segment(f, {0, 0}), Error);
  CHECK_THROWS_AS(unify_and_segment(f, {4, 4}), Error);
  CHECK_THROWS_AS(unify_and_segment(f, {400, 150}), Error);  // 250 does not divide 400
}

TEST_CASE("pad_batch") {
  SUBCASE("single utterance needs no padding") {
    const FeatureMatrix f = ramp_features(7, 3);
    const PaddedBatch b = pad_batch({f});
    CHECK(b.t_max == 7);
    CHECK(b.valid_len == std::vector<std::size_t>{7});
    CHECK(std::vector<float>(b.data.begin(), b.data.end()) == f.data);
  }
  SUBCASE("lengths 3 and 5 pad the first with zero rows") {
    FeatureMatrix a = ramp_features(3, 2), b = ramp_features(5, 2);
    const PaddedBatch batch = pad_batch({a, b});
    CHECK(batch.batch == 2);
    CHECK(batch.t_max == 5);
    CHECK(batch.valid_len == std::vector<std::size_t>{3, 5});
    double pad_sum = 0.0;
    for (std::size_t r = 3; r < 5; ++r)
      for (std::size_t k = 0; k < 2; ++k) pad_sum += std::abs(batch.data[r * 2 + k]);
    CHECK(pad_sum == 0.0);
  }
  SUBCASE("mixed dimensions are rejected") {
    FeatureMatrix a = ramp_features(3, 2), b = ramp_features(3, 4);
    CHECK_THROWS_WITH_AS(pad_batch({a, b}), doctest::Contains("mixed"), Error);
  }
}
