// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "crf_oracle.hpp"
#include "gradcheck.hpp"
#include "seqtag/crf.hpp"
#include "seqtag/errors.hpp"

using namespace seqtag;

namespace {

CrfParams random_crf(std::size_t k, Rng& rng, double scale = 1.0) {
  CrfParams p(k);
  std::uniform_real_distribution<double> d(-scale, scale);
  for (std::size_t i = 0; i < k + 2; ++i)
    for (std::size_t j = 0; j < k + 2; ++j)
      if (!p.is_forbidden(i, j)) p.transitions.value(i, j) = d(rng);
  return p;
}

}  // namespace

TEST_CASE("forbidden transitions") {
  CrfParams p(3);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(p.trans(i, p.start()) == kForbiddenTransition);
    CHECK(p.trans(p.stop(), i) == kForbiddenTransition);
  }
  CHECK(p.trans(p.start(), 0) == 0.0);
  CHECK_THROWS_AS(CrfParams(0), ArgumentError);
}

TEST_CASE("path_score") {
  Rng rng(1);
  const CrfParams p = random_crf(3, rng);
  const Tensor em1 = testing::random_tensor({1, 3}, rng);
  const std::vector<std::size_t> one{2};
  CHECK(path_score(em1, one, p) == p.trans(p.start(), 2) + em1(0, 2) + p.trans(2, p.stop()));

  CrfParams zero(3);
  const Tensor em = testing::random_tensor({4, 3}, rng);
  const std::vector<std::size_t> y{0, 2, 2, 1};
  CHECK(path_score(em, y, zero) == doctest::Approx(em(0, 0) + em(1, 2) + em(2, 2) + em(3, 1)));

  // Term-by-term accumulation, written out longhand.
  const double by_hand = p.trans(p.start(), 0) + p.trans(0, 2) + p.trans(2, 2) + p.trans(2, 1) +
                         p.trans(1, p.stop()) + em(0, 0) + em(1, 2) + em(2, 2) + em(3, 1);
  CHECK(path_score(em, y, p) == doctest::Approx(by_hand).epsilon(1e-14));

  CHECK_THROWS_AS(path_score(em, std::vector<std::size_t>{0, 3, 0, 0}, p), IndexError);
  CHECK_THROWS_AS(path_score(em, std::vector<std::size_t>{0, 1}, p), DimensionError);
}

TEST_CASE("log_partition") {
  Rng rng(2);
  const CrfParams p = random_crf(3, rng);
  const Tensor em1 = testing::random_tensor({1, 3}, rng);
  std::vector<double> base;
  for (std::size_t j = 0; j < 3; ++j) base.push_back(p.trans(p.start(), j) + em1(0, j) + p.trans(j, p.stop()));
  CHECK(log_partition(em1, p) == doctest::Approx(log_sum_exp(base)).epsilon(1e-14));

  const Tensor em = testing::random_tensor({4, 3}, rng, 2.0);
  const auto oracle = testing::enumerate_all(em, p.transitions.value);
  CHECK(std::abs(log_partition(em, p) - oracle.log_z) < 1e-8);

  Tensor shifted = em;
  for (double& v : shifted.data()) v += 1.75;
  CHECK(log_partition(shifted, p) - log_partition(em, p) == doctest::Approx(4 * 1.75).epsilon(1e-12));
}

TEST_CASE("nll_loss") {
  Rng rng(3);
  SUBCASE("single tag: only one path") {
    const CrfParams p = random_crf(1, rng);
    const Tensor em = testing::random_tensor({5, 1}, rng);
    CHECK(nll_loss(em, std::vector<std::size_t>(5, 0), p) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("saturated gold emissions") {
    const CrfParams p = random_crf(4, rng);
    const std::vector<std::size_t> gold{1, 3, 0};
    Tensor em({3, 4});
    for (std::size_t t = 0; t < 3; ++t) em(t, gold[t]) = 1e4;
    CHECK(nll_loss(em, gold, p) < 1e-12);
  }
  SUBCASE("equals brute-force -log p(gold)") {
    for (int trial = 0; trial < 20; ++trial) {
      const CrfParams p = random_crf(3, rng);
      const Tensor em = testing::random_tensor({4, 3}, rng, 2.0);
      const std::vector<std::size_t> gold{static_cast<std::size_t>(trial % 3), 1, 2, 0};
      const auto oracle = testing::enumerate_all(em, p.transitions.value);
      const double expected = oracle.log_z - testing::enumerate_score(em, p.transitions.value, gold);
      CHECK(std::abs(nll_loss(em, gold, p) - expected) < 1e-8);
      CHECK(nll_loss(em, gold, p) >= 0.0);
    }
  }
}

TEST_CASE("crf_gradients") {
  Rng rng(4);
  SUBCASE("emission gradient rows sum to zero") {
    const CrfParams p = random_crf(4, rng);
    const Tensor em = testing::random_tensor({6, 4}, rng);
    const auto g = crf_gradients(em, std::vector<std::size_t>{0, 1, 2, 3, 3, 0}, p);
    for (std::size_t t = 0; t < 6; ++t) {
      double s = 0.0;
      for (std::size_t j = 0; j < 4; ++j) s += g.d_emissions(t, j);
      CHECK(std::abs(s) < 1e-10);
    }
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(g.d_transitions(i, p.start()) == 0.0);
      CHECK(g.d_transitions(p.stop(), i) == 0.0);
    }
  }
  SUBCASE("finite differences, T=5, K=4") {
    testing::GradCheck gc;
    for (int trial = 0; trial < 20; ++trial) {
      CrfParams p = random_crf(4, rng);
      Tensor em = testing::random_tensor({5, 4}, rng, 2.0);
      std::uniform_int_distribution<std::size_t> tag(0, 3);
      std::vector<std::size_t> gold(5);
      for (auto& g : gold) g = tag(rng);
      const auto g = crf_gradients(em, gold, p);
      CHECK(g.loss == doctest::Approx(nll_loss(em, gold, p)).epsilon(1e-14));
      auto loss = [&] { return nll_loss(em, gold, p); };
      testing::check_tensor(em, g.d_emissions, loss, "emissions", gc);
      testing::check_tensor(p.transitions.value, g.d_transitions, loss, "transitions", gc,
                            [&](std::size_t i) { return p.is_forbidden(i / 6, i % 6); });
    }
    CHECK_MESSAGE(gc.ok(), gc.worst);
  }
  SUBCASE("vanishes at a large-margin optimum") {
    CrfParams p(3);
    const std::vector<std::size_t> gold{2, 0, 1, 1};
    Tensor em({4, 3});
    for (std::size_t t = 0; t < 4; ++t) em(t, gold[t]) = 100.0;
    const auto g = crf_gradients(em, gold, p);
    for (double v : g.d_emissions.data()) CHECK(std::abs(v) < 1e-12);
    for (double v : g.d_transitions.data()) CHECK(std::abs(v) < 1e-12);
  }
}

TEST_CASE("viterbi_decode") {
  Rng rng(5);
  SUBCASE("base case") {
    const CrfParams p = random_crf(4, rng);
    const Tensor em = testing::random_tensor({1, 4}, rng);
    std::size_t best = 0;
    auto base = [&](std::size_t j) { return p.trans(p.start(), j) + em(0, j) + p.trans(j, p.stop()); };
    for (std::size_t j = 1; j < 4; ++j)
      if (base(j) > base(best)) best = j;
    const auto r = viterbi_decode(em, p);
    CHECK(r.tags == std::vector<std::size_t>{best});
    CHECK(r.score == base(best));
  }
  SUBCASE("zero transitions decode per-token argmax") {
    CrfParams p(5);
    const Tensor em = testing::random_tensor({7, 5}, rng);
    const auto r = viterbi_decode(em, p);
    for (std::size_t t = 0; t < 7; ++t) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < 5; ++j)
        if (em(t, j) > em(t, best)) best = j;
      CHECK(r.tags[t] == best);
    }
  }
  SUBCASE("ties resolve to the lowest index") {
    CrfParams p(3);
    const auto r = viterbi_decode(Tensor({4, 3}), p);
    CHECK(r.tags == std::vector<std::size_t>{0, 0, 0, 0});
    CHECK(r.score == 0.0);
  }
  SUBCASE("matches enumeration of all 1024 paths, T=5, K=4") {
    for (int trial = 0; trial < 20; ++trial) {
      const CrfParams p = random_crf(4, rng);
      const Tensor em = testing::random_tensor({5, 4}, rng, 2.0);
      const auto oracle = testing::enumerate_all(em, p.transitions.value);
      const auto r = viterbi_decode(em, p);
      CHECK(r.tags == oracle.best_path);
      CHECK(r.score == oracle.best_score);
      CHECK(r.score == path_score(em, r.tags, p));
    }
  }
}

TEST_CASE("crf properties over random instances") {
  Rng rng(6);
  std::uniform_int_distribution<std::size_t> len(1, 6), tags(1, 5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t steps = len(rng), k = tags(rng);
    const CrfParams p = random_crf(k, rng, 1.5);
    const Tensor em = testing::random_tensor({steps, k}, rng, 3.0);
    const double log_z = log_partition(em, p);
    const auto r = viterbi_decode(em, p);
    CHECK(r.score <= log_z + 1e-12);

    std::uniform_int_distribution<std::size_t> tag(0, k - 1);
    std::vector<std::size_t> y(steps);
    for (auto& v : y) v = tag(rng);
    CHECK(path_score(em, y, p) <= log_z + 1e-12);
    CHECK(nll_loss(em, y, p) >= -1e-12);

    Tensor shifted = em;
    for (double& v : shifted.data()) v += 3.3;
    CHECK(viterbi_decode(shifted, p).tags == r.tags);
  }
}
