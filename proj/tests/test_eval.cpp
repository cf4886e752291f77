#include <doctest.h>

#include <cmath>
#include <numeric>

#include "geoecon/error.hpp"
#include "geoecon/eval.hpp"
#include "geoecon/rng.hpp"
#include "geoecon/statistics.hpp"

using namespace geoecon;

TEST_CASE("nmae basics") {
  std::vector<double> y{1, 2, 3, 4, 5};
  CHECK(nmae(y, y, y) == 0.0);
  std::vector<double> pred(5, 3.0);
  const double expect = mean_abs_error(pred, y) / sample_sd(y);
  CHECK(nmae(pred, y, y) == doctest::Approx(expect).epsilon(1e-14));
  std::vector<double> flat(5, 1.0);
  CHECK_THROWS_AS((void)nmae(pred, y, flat), ValidationError);
}

TEST_CASE("mean predictor on a standard normal sits near sqrt(2/pi)") {
  Rng rng(7);
  const size_t n = 10000;
  std::vector<double> y(n);
  for (auto& v : y) v = rng.normal();
  std::vector<double> pred(n, mean(y));
  CHECK(nmae(pred, y, y) == doctest::Approx(std::sqrt(2.0 / 3.14159265358979))
                                .epsilon(0.025));
}

TEST_CASE("pearson basics") {
  std::vector<double> y{1, 2, 3, 4, 7};
  CHECK(pearson(y, y) == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> neg(y.size());
  for (size_t i = 0; i < y.size(); ++i) neg[i] = -y[i];
  CHECK(pearson(neg, y) == doctest::Approx(-1.0).epsilon(1e-12));
  std::vector<double> affine(y.size());
  for (size_t i = 0; i < y.size(); ++i) affine[i] = 2.5 * y[i] + 7.0;
  CHECK(pearson(affine, y) == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> flat(5, 2.0);
  CHECK_THROWS_AS((void)pearson(flat, y), ValidationError);
}

TEST_CASE("fold assignment is balanced and exhaustive") {
  const auto fold = make_folds(10, 5, 3);
  std::vector<int> counts(5, 0);
  for (int f : fold) counts[f]++;
  for (int c : counts) CHECK(c == 2);
  const auto fold2 = make_folds(11, 3, 3);
  std::vector<int> counts2(3, 0);
  for (int f : fold2) counts2[f]++;
  std::sort(counts2.begin(), counts2.end());
  CHECK(counts2 == std::vector<int>{3, 4, 4});
  CHECK_THROWS_AS((void)make_folds(10, 1, 3), ValidationError);
  CHECK_THROWS_AS((void)make_folds(3, 5, 3), ValidationError);
}

TEST_CASE("kfold predicts each row exactly once from the other folds") {
  Rng rng(9);
  const size_t n = 60;
  std::vector<double> x(n), y(n);
  for (size_t i = 0; i < n; ++i) {
    x[i] = rng.normal();
    y[i] = 2.0 * x[i] + 0.1 * rng.normal();
  }
  const MatrixView X{x.data(), n, 1};
  const auto cv = kfold_predict(ModelSpec::least_squares(), X, y, 5, 4);
  REQUIRE(cv.oof.size() == n);
  for (size_t i = 0; i < n; ++i)
    CHECK(cv.oof[i] == doctest::Approx(y[i]).epsilon(0.5));
  // a constant-mean style model reproduces the analytic mean-predictor nmae
  std::vector<double> const_pred(n, mean(y));
  const double direct = mean_abs_error(const_pred, y) / sample_sd(y);
  CHECK(nmae(const_pred, y, y) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("constant target surfaces the zero-variance error") {
  const size_t n = 20;
  std::vector<double> x(n), y(n, 5.0);
  Rng rng(2);
  for (auto& v : x) v = rng.normal();
  const MatrixView X{x.data(), n, 1};
  ForestParams p;
  p.n_trees = 10;
  const auto cv = kfold_predict(ModelSpec::random_forest(p), X, y, 5, 1);
  CHECK_THROWS_AS((void)nmae(cv.oof, y, y), ValidationError);
}

TEST_CASE("delta and residual fields") {
  const std::vector<int64_t> ids{1, 2, 3};
  const std::vector<double> y{4, 4, 4};
  SUBCASE("improvement is positive when the newer step lands closer") {
    const std::vector<double> prev{5, 5, 5}, next{4, 5, 6};
    const auto f = delta_field(ids, prev, ids, next, ids, y);
    CHECK(f.value[0] == 1.0);   // |5-4| - |4-4|
    CHECK(f.value[1] == 0.0);
    CHECK(f.value[2] == -1.0);  // deterioration
  }
  SUBCASE("equal steps give a zero field") {
    const std::vector<double> p{9, 1, 2};
    const auto f = delta_field(ids, p, ids, p, ids, y);
    for (double v : f.value) CHECK(v == 0.0);
  }
  SUBCASE("residual field is prediction minus target") {
    const std::vector<double> pred{4.3, 4.3, 4.3};
    const auto f = residual_field(ids, pred, ids, y);
    for (double v : f.value) CHECK(v == doctest::Approx(0.3).epsilon(1e-12));
    const auto perfect = residual_field(ids, y, ids, y);
    for (double v : perfect.value) CHECK(v == 0.0);
  }
  SUBCASE("cell mismatch is rejected") {
    const std::vector<int64_t> other{1, 2, 9};
    const std::vector<double> p{1, 2, 3};
    CHECK_THROWS_AS((void)residual_field(ids, p, other, y), ValidationError);
    CHECK_THROWS_AS((void)delta_field(ids, p, other, p, ids, y),
                    ValidationError);
  }
}

TEST_CASE("summed improvement equals the MAE change") {
  Rng rng(12);
  const size_t n = 200;
  std::vector<int64_t> ids(n);
  std::vector<double> y(n), prev(n), next(n);
  for (size_t i = 0; i < n; ++i) {
    ids[i] = static_cast<int64_t>(i);
    y[i] = rng.normal();
    prev[i] = y[i] + rng.normal();
    next[i] = y[i] + 0.5 * rng.normal();
  }
  const auto f = delta_field(ids, prev, ids, next, ids, y);
  CompensatedSum s;
  for (double v : f.value) s.add(v);
  const double lhs = s.value();
  const double rhs = static_cast<double>(n) *
                     (mean_abs_error(prev, y) - mean_abs_error(next, y));
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("metrics ignore simultaneous reordering") {
  Rng rng(14);
  const size_t n = 100;
  std::vector<double> y(n), pred(n);
  for (size_t i = 0; i < n; ++i) {
    y[i] = rng.normal();
    pred[i] = y[i] + 0.3 * rng.normal();
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<size_t>(order));
  std::vector<double> y2(n), pred2(n);
  for (size_t i = 0; i < n; ++i) {
    y2[i] = y[order[i]];
    pred2[i] = pred[order[i]];
  }
  CHECK(nmae(pred, y, y) == doctest::Approx(nmae(pred2, y2, y2)).epsilon(1e-12));
  CHECK(pearson(pred, y) == doctest::Approx(pearson(pred2, y2)).epsilon(1e-12));
}

TEST_CASE("predictor correlations") {
  Rng rng(15);
  const size_t n = 5000;
  std::vector<double> x(3 * n), y(n);
  for (size_t i = 0; i < n; ++i) {
    y[i] = rng.normal();
    x[0 * n + i] = y[i];           // perfect
    x[1 * n + i] = rng.normal();   // independent
    x[2 * n + i] = 1.0;            // constant
  }
  const MatrixView X{x.data(), n, 3};
  const std::vector<std::string> names{"same", "noise", "flat"};
  const auto corr = predictor_correlations(X, y, names);
  CHECK(corr[0].corr == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(corr[1].corr) < 0.05);
  CHECK(std::isnan(corr[2].corr));  // undefined marker
  const auto pair = pairwise_correlations(X);
  CHECK(pair[0 * 3 + 0] == 1.0);
  CHECK(pair[0 * 3 + 1] == pair[1 * 3 + 0]);
}

TEST_CASE("alignment drops excluded cells, missing rows and mismatches") {
  FeatureMatrix m;
  m.cell_ids = {1, 2, 3, 4, 5};
  m.names = {"a"};
  m.values = {10, 20, 30, 40, 50};
  m.missing = {0, 0, 1, 0, 0};
  m.values[2] = NAN;

  TargetVector t;
  t.cell_ids = {1, 2, 3, 4, 9};  // 5 isn't targeted; 9 isn't in features
  t.log_gcp_pc = {1.0, NAN, 3.0, 4.0, 9.0};
  t.reason = {ExclusionReason::none, ExclusionReason::gcp_below_1_usd,
              ExclusionReason::none, ExclusionReason::none,
              ExclusionReason::none};
  t.tercile = {Tercile::bottom, Tercile::none, Tercile::middle, Tercile::top,
               Tercile::top};

  const auto d = align(m, t);
  CHECK(d.cell_ids == std::vector<int64_t>{1, 4});  // 2 excluded, 3 missing
  CHECK(d.y == std::vector<double>{1.0, 4.0});
  CHECK(d.X().at(1, 0) == 40.0);
  CHECK(d.dropped_missing == 1);
  CHECK(d.dropped_unmatched == 1);
  CHECK(d.rows_for(SampleId::top_tercile) == std::vector<size_t>{1});

  const auto sub = subset_columns(d, std::vector<std::string>{"a"});
  CHECK(sub.names == d.names);
  CHECK_THROWS_AS((void)subset_columns(d, std::vector<std::string>{"zz"}),
                  ValidationError);
}
