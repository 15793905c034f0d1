#include "hms/eval.hpp"

#include <cmath>

#include "doctest.h"
#include "hms/rng.hpp"

using namespace hms;

namespace {

frame make_frame(std::size_t w, std::size_t h, std::vector<double> px) {
  frame f;
  f.width = w;
  f.height = h;
  f.pixels = std::move(px);
  return f;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("next_frame_mse on the worked examples") {
  const auto a = make_frame(2, 2, {0.1, 0.4, 0.7, 0.2});
  CHECK(next_frame_mse(a, a) == 0.0);

  auto b = a;
  for (double& v : b.pixels) v += 0.5;
  CHECK(next_frame_mse(a, b) == doctest::Approx(0.25).epsilon(1e-15));

  const auto zeros = make_frame(2, 2, {0, 0, 0, 0});
  const auto checker = make_frame(2, 2, {0, 1, 1, 0});
  CHECK(next_frame_mse(zeros, checker) == doctest::Approx(0.5).epsilon(1e-15));

  const auto wide = make_frame(4, 1, {0, 0, 0, 0});
  CHECK_THROWS_AS((void)next_frame_mse(a, wide), dimension_mismatch);
}

TEST_CASE("next_frame_mse is symmetric, nonnegative, zero iff equal") {
  rng g(3);
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<double> pa(16), pb(16);
    for (double& v : pa) v = g.uniform01();
    for (double& v : pb) v = g.uniform01();
    const auto a = make_frame(4, 4, pa);
    const auto b = make_frame(4, 4, pb);
    const double m = next_frame_mse(a, b);
    CHECK(next_frame_mse(b, a) == m);
    CHECK(m >= 0.0);
    CHECK((m == 0.0) == (pa == pb));
  }
}

TEST_CASE("cosine_similarity on the worked examples") {
  const std::vector<double> e1{1, 0}, e2{0, 1}, ones{1, 1}, twos{2, 2};
  CHECK(cosine_similarity(e1, e1) == doctest::Approx(1.0));
  CHECK(cosine_similarity(e1, e2) == doctest::Approx(0.0));
  CHECK(cosine_similarity(ones, twos) == doctest::Approx(1.0));

  const std::vector<double> zero{0, 0};
  CHECK_THROWS_AS((void)cosine_similarity(e1, zero), zero_norm_vector);
}

TEST_CASE("match_trial picks the most similar gallery item") {
  matching_trial t;
  t.probe = {0.5, 0.1, 0.9, 0.2};
  t.gallery = {{0.4, 0.4, 0.4, 0.4},
               {0.1, 0.9, 0.1, 0.9},
               {0.9, 0.0, 0.1, 0.3},
               {0.5, 0.1, 0.9, 0.2}};
  t.true_index = 3;
  const auto out = match_trial(t);
  CHECK(out.predicted_index == 3);
  CHECK(out.correct);
}

TEST_CASE("match_trial is scale-invariant and breaks ties low") {
  matching_trial t;
  t.probe = {2.0, 4.0, 6.0};
  t.gallery = {{1.0, 2.0, 3.0}, {3.0, 1.0, 2.0}, {0.5, 1.0, 1.5}};
  t.true_index = 0;
  // gallery[0] and gallery[2] are both colinear with the probe; tie -> 0
  const auto out = match_trial(t);
  CHECK(out.predicted_index == 0);
  CHECK(out.correct);

  matching_trial scaled = t;
  for (double& v : scaled.probe) v *= 7.5;
  CHECK(match_trial(scaled).predicted_index == out.predicted_index);
}

TEST_CASE("match_trial names the zero-norm gallery position") {
  matching_trial t;
  t.probe = {1.0, 2.0};
  t.gallery = {{1.0, 0.0}, {0.0, 0.0}, {0.5, 0.5}};
  t.true_index = 0;
  try {
    (void)match_trial(t);
    FAIL("expected zero_norm_vector");
  } catch (const zero_norm_vector& e) {
    CHECK(std::string(e.what()).find("index 1") != std::string::npos);
  }
}

TEST_CASE("matching_accuracy counts correct trials") {
  matching_trial good;
  good.probe = {1.0, 0.0, 0.0};
  good.gallery = {{0.0, 1.0, 0.0}, {1.0, 0.0, 0.0}};
  good.true_index = 1;
  matching_trial bad = good;
  bad.true_index = 0;

  const matching_trial trials[] = {good, bad, good, bad};
  CHECK(matching_accuracy(trials) == doctest::Approx(0.5));

  const matching_trial all_good[] = {good, good};
  CHECK(matching_accuracy(all_good) == doctest::Approx(1.0));

  CHECK_THROWS_AS((void)matching_accuracy(std::span<const matching_trial>{}),
                  empty_list);
}

TEST_CASE("random matching converges to chance 1/G") {
  rng g(17);
  const int gallery_size = 50;
  const int n_trials = 5000;
  std::size_t correct = 0;
  for (int rep = 0; rep < n_trials; ++rep) {
    matching_trial t;
    t.probe.resize(16);
    for (double& v : t.probe) v = g.normal(0, 1);
    t.gallery.resize(gallery_size);
    for (auto& vec : t.gallery) {
      vec.resize(16);
      for (double& v : vec) v = g.normal(0, 1);
    }
    t.true_index = static_cast<std::size_t>(g.uniform_int(0, gallery_size - 1));
    if (match_trial(t).correct) ++correct;
  }
  const double acc = static_cast<double>(correct) / n_trials;
  const double p = 1.0 / gallery_size;
  const double se = std::sqrt(p * (1.0 - p) / n_trials);
  CHECK(std::fabs(acc - p) < 4.0 * se);
}

}  // TEST_SUITE
