// head: option scoring, cross entropy, ranking metrics.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "dialgraph/grad_check.hpp"
#include "dialgraph/head.hpp"
#include "doctest.h"

using namespace dialgraph;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::uint64_t state = seed + 0x9e3779b97f4a7c15ULL;
  auto next = [&]() {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return static_cast<double>((z ^ (z >> 31)) >> 11) * 0x1.0p-53;
  };
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = 2.0 * next() - 1.0;
  return m;
}

PredictionParams zero_params(ParameterStore& store, int d) {
  PredictionParams p;
  p.w1 = store.create("head.w1", d, d, Init::Zeros);
  p.b1 = store.create("head.b1", 1, d, Init::Zeros);
  p.w2 = store.create("head.w2", d, 1, Init::Zeros);
  p.b2 = store.create("head.b2", 1, 1, Init::Zeros);
  return p;
}

}  // namespace

TEST_CASE("score_options closed forms") {
  const int d = 4;
  ParameterStore store(0);
  PredictionParams p = zero_params(store, d);

  Mat x = random_mat(4, d, 3);
  CHECK(score_options(Tensor::constant(x), p).value() == Mat::Zero(4, 1));

  p.w1.value_mut() = Mat::Identity(d, d);
  p.w2.value_mut() = Mat::Ones(d, 1);
  Mat e3 = Mat::Zero(4, d);
  e3(0, 2) = 1.0;  // option row = basis vector e3
  Mat s = score_options(Tensor::constant(e3), p).value();
  CHECK(s(0, 0) == doctest::Approx(1.0));

  CHECK_THROWS_AS(score_options(Tensor::constant(random_mat(4, d + 1, 1)), p), ContractError);
}

TEST_CASE("permuting option rows permutes scores identically") {
  const int d = 6;
  ParameterStore store(1);
  PredictionParams p;
  p.w1 = store.create("head.w1", d, d, Init::XavierUniform);
  p.b1 = store.create("head.b1", 1, d, Init::XavierUniform);
  p.w2 = store.create("head.w2", d, 1, Init::XavierUniform);
  p.b2 = store.create("head.b2", 1, 1, Init::XavierUniform);

  Mat x = random_mat(4, d, 9);
  Mat base = score_options(Tensor::constant(x), p).value();
  int perm[4] = {3, 1, 0, 2};
  Mat shuffled(4, d);
  for (int i = 0; i < 4; ++i) shuffled.row(i) = x.row(perm[i]);
  Mat out = score_options(Tensor::constant(shuffled), p).value();
  for (int i = 0; i < 4; ++i) CHECK(out(i, 0) == base(perm[i], 0));
}

TEST_CASE("cross entropy closed forms") {
  Tensor uniform = Tensor::row({1.0, 1.0, 1.0, 1.0});
  CHECK(ce_loss(uniform, 2).item() == doctest::Approx(std::log(4.0)).epsilon(1e-9));

  Tensor saturated = Tensor::row({30.0, 0.0, 0.0, 0.0});
  CHECK(ce_loss(saturated, 0).item() < 1e-9);

  CHECK_THROWS_AS(ce_loss(uniform, 4), ContractError);
  CHECK_THROWS_AS(ce_loss(uniform, -1), ContractError);
}

TEST_CASE("cross entropy matches the log-sum-exp oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Mat s = random_mat(4, 1, 100 + seed) * 5.0;
    int gold = static_cast<int>(seed % 4);
    double got = ce_loss(Tensor::constant(s), gold).item();
    long double lse = 0.0L;
    for (int i = 0; i < 4; ++i) lse += expl(static_cast<long double>(s(i, 0)));
    double want = static_cast<double>(logl(lse)) - s(gold, 0);
    CHECK(std::abs(got - want) < 1e-12);
  }
}

TEST_CASE("cross entropy is shift invariant and positive") {
  Mat s = random_mat(4, 1, 7) * 3.0;
  double base = ce_loss(Tensor::constant(s), 1).item();
  Mat shifted = s.array() + 123.0;
  CHECK(ce_loss(Tensor::constant(shifted), 1).item() == doctest::Approx(base).epsilon(1e-9));
  CHECK(base > 0.0);

  ScoredExample a = make_scored({s(0, 0), s(1, 0), s(2, 0), s(3, 0)}, 1);
  ScoredExample b = make_scored({shifted(0, 0), shifted(1, 0), shifted(2, 0), shifted(3, 0)}, 1);
  CHECK(a.rank_of_gold == b.rank_of_gold);
  for (int i = 0; i < 4; ++i)
    CHECK(a.probs[static_cast<std::size_t>(i)] ==
          doctest::Approx(b.probs[static_cast<std::size_t>(i)]).epsilon(1e-9));
}

TEST_CASE("gradient of the scoring head matches finite differences") {
  const int d = 6;
  ParameterStore store(5);
  PredictionParams p;
  p.w1 = store.create("head.w1", d, d, Init::XavierUniform);
  p.b1 = store.create("head.b1", 1, d, Init::XavierUniform);
  p.w2 = store.create("head.w2", d, 1, Init::XavierUniform);
  p.b2 = store.create("head.b2", 1, 1, Init::XavierUniform);
  Mat x = random_mat(4, d, 17);
  auto fn = [&]() { return ce_loss(score_options(Tensor::constant(x), p), 2); };
  GradCheckResult r = finite_diff_check(fn, store, 1e-5);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("rank metrics hand-computed cases") {
  auto one = rank_metrics({make_scored({0.9, 0.1, 0.1, 0.1}, 0)});
  CHECK(one.r4_at_1 == 1.0);
  CHECK(one.r4_at_2 == 1.0);
  CHECK(one.mrr == 1.0);

  // gold ranked third
  auto third = rank_metrics({make_scored({0.5, 0.7, 0.2, 0.9}, 0)});
  CHECK(third.r4_at_1 == 0.0);
  CHECK(third.r4_at_2 == 0.0);
  CHECK(third.mrr == doctest::Approx(1.0 / 3.0));

  // two examples with gold ranks 1 and 2
  auto pair = rank_metrics({make_scored({0.9, 0.1, 0.1, 0.1}, 0),
                            make_scored({0.5, 0.9, 0.2, 0.1}, 0)});
  CHECK(pair.r4_at_1 == 0.5);
  CHECK(pair.r4_at_2 == 1.0);
  CHECK(pair.mrr == doctest::Approx(0.75));

  CHECK_THROWS_AS(rank_metrics({}), ContractError);
}

TEST_CASE("pessimistic ties and metric bounds") {
  ScoredExample flat = make_scored({0.3, 0.3, 0.3, 0.3}, 1);
  CHECK(flat.rank_of_gold == 4);
  auto m = rank_metrics({flat});
  CHECK(m.mrr == doctest::Approx(0.25));

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Mat s = random_mat(4, 1, 300 + seed);
    auto batch = rank_metrics({make_scored({s(0, 0), s(1, 0), s(2, 0), s(3, 0)},
                                           static_cast<int>(seed % 4))});
    CHECK(batch.r4_at_1 <= batch.r4_at_2);
    CHECK(batch.r4_at_2 <= 1.0);
    CHECK(batch.mrr >= 0.25);
    CHECK(batch.r4_at_1 <= batch.mrr);
  }
}

TEST_CASE("metrics serialize to the report schema") {
  RankMetrics m;
  m.r4_at_1 = 0.5;
  m.r4_at_2 = 1.0;
  m.mrr = 0.75;
  m.n = 2;
  std::string j = metrics_json(m);
  CHECK(j.find("\"r4_at_1\":0.5") != std::string::npos);
  CHECK(j.find("\"n\":2") != std::string::npos);
}
