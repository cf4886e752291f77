#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>

#include "geoecon/error.hpp"
#include "geoecon/learners.hpp"
#include "geoecon/parallel.hpp"
#include "geoecon/rng.hpp"
#include "geoecon/statistics.hpp"
#include "oracles.hpp"

using namespace geoecon;

namespace {

struct Data {
  std::vector<double> x;  // column-major
  std::vector<double> y;
  size_t n, p;
  MatrixView view() const { return {x.data(), n, p}; }
};

Data make_data(size_t n, size_t p, uint64_t seed,
               const std::function<double(std::span<const double>)>& f,
               double noise = 0.0) {
  Data d;
  d.n = n;
  d.p = p;
  d.x.resize(n * p);
  Rng rng(seed);
  for (auto& v : d.x) v = rng.normal();
  d.y.resize(n);
  std::vector<double> row(p);
  for (size_t r = 0; r < n; ++r) {
    for (size_t c = 0; c < p; ++c) row[c] = d.x[c * n + r];
    d.y[r] = f(row) + noise * rng.normal();
  }
  return d;
}

bool trees_equal(const Tree& a, const Tree& b) {
  return a.feature == b.feature && a.threshold == b.threshold &&
         a.left == b.left && a.right == b.right && a.value == b.value &&
         a.count == b.count;
}

}  // namespace

TEST_CASE("tree splits a perfectly separable binary feature at depth one") {
  Data d;
  d.n = 8;
  d.p = 2;
  d.x = {0, 0, 0, 0, 1, 1, 1, 1,   // binary feature
         5, 1, 4, 2, 3, 6, 0, 7};  // noise feature
  d.y = {2, 2, 2, 2, 9, 9, 9, 9};
  Rng rng(1);
  const auto tree = fit_tree(d.view(), d.y, {.min_leaf = 1, .mtry = 0}, rng);
  REQUIRE(tree.n_nodes() == 3);
  CHECK(tree.feature[0] == 0);
  CHECK(tree.value[tree.left[0]] == 2.0);
  CHECK(tree.value[tree.right[0]] == 9.0);
  for (size_t r = 0; r < d.n; ++r)
    CHECK(tree.predict_row(d.view(), r) == d.y[r]);
}

TEST_CASE("constant target collapses to a single leaf") {
  auto d = make_data(50, 3, 2, [](auto) { return 4.25; });
  Rng rng(1);
  const auto tree = fit_tree(d.view(), d.y, {.min_leaf = 1}, rng);
  CHECK(tree.n_nodes() == 1);
  CHECK(tree.value[0] == 4.25);
  CHECK(tree.count[0] == 50);
}

TEST_CASE("1D split matches the exhaustive oracle") {
  Data d;
  d.n = 4;
  d.p = 1;
  d.x = {1, 2, 3, 4};
  d.y = {0, 0, 10, 10};
  Rng rng(1);
  const auto tree = fit_tree(d.view(), d.y, {.min_leaf = 1}, rng);
  REQUIRE(tree.feature[0] == 0);
  const auto oracle_split = oracle::best_split_1d({1, 2, 3, 4}, d.y, 1);
  REQUIRE(oracle_split.found);
  CHECK(tree.threshold[0] > oracle_split.lo);
  CHECK(tree.threshold[0] <= oracle_split.hi);
  CHECK(tree.threshold[0] > 2.0);
  CHECK(tree.threshold[0] <= 3.0);
  CHECK(tree.value[tree.left[0]] == 0.0);
  CHECK(tree.value[tree.right[0]] == 10.0);

  // randomized 1D problems: the chosen boundary always matches the oracle
  for (uint64_t s = 0; s < 20; ++s) {
    auto rd = make_data(60, 1, 100 + s, [](auto r) { return r[0] > 0.3 ? 2.0 : 0.0; },
                        0.3);
    Rng rr(s);
    const auto t = fit_tree(rd.view(), rd.y, {.min_leaf = 5, .max_depth = 1}, rr);
    std::vector<double> xs(rd.x.begin(), rd.x.end());
    const auto best = oracle::best_split_1d(xs, rd.y, 5);
    if (t.n_nodes() == 1) {
      CHECK_FALSE(best.found);
    } else {
      REQUIRE(best.found);
      CHECK(t.threshold[0] > best.lo);
      CHECK(t.threshold[0] <= best.hi);
    }
  }
}

TEST_CASE("forest on constant target predicts the constant with zero OOB error") {
  auto d = make_data(60, 4, 3, [](auto) { return 1.5; });
  ForestParams p;
  p.n_trees = 50;
  p.seed = 9;
  const auto model = fit_forest(d.view(), d.y, p);
  for (double v : predict(model, d.view())) CHECK(v == 1.5);
  const auto oob = oob_predict(model, d.view());
  for (size_t r = 0; r < d.n; ++r) {
    REQUIRE(oob.coverage[r] > 0);
    CHECK(oob.pred[r] == 1.5);
  }
}

TEST_CASE("single un-bootstrapped tree reduces to fit_tree") {
  auto d = make_data(80, 5, 4, [](auto r) { return r[0] * r[1]; }, 0.1);
  ForestParams p;
  p.n_trees = 1;
  p.bootstrap = false;
  p.mtry = 5;  // all features: growth consumes no rng draws
  p.min_leaf = 5;
  const auto model = fit_forest(d.view(), d.y, p);
  Rng rng(123);
  const auto tree = fit_tree(d.view(), d.y, {.min_leaf = 5, .mtry = 5}, rng);
  CHECK(trees_equal(model.trees[0], tree));
}

TEST_CASE("training error is exactly zero for a saturated tree") {
  auto d = make_data(100, 3, 5, [](auto r) { return r[0] + 2 * r[1]; }, 0.2);
  ForestParams p;
  p.n_trees = 1;
  p.bootstrap = false;
  p.mtry = 3;
  p.min_leaf = 1;
  const auto model = fit_forest(d.view(), d.y, p);
  const auto pred = predict(model, d.view());
  for (size_t r = 0; r < d.n; ++r) CHECK(pred[r] == d.y[r]);
}

TEST_CASE("out-of-bag coverage matches the bootstrap exclusion rate") {
  auto d = make_data(300, 3, 6, [](auto r) { return r[0]; }, 0.3);
  ForestParams p;
  p.n_trees = 600;
  p.seed = 11;
  const auto model = fit_forest(d.view(), d.y, p);
  const auto oob = oob_predict(model, d.view());
  double mean_cov = 0;
  for (size_t r = 0; r < d.n; ++r) {
    REQUIRE(oob.coverage[r] > 0);
    mean_cov += oob.coverage[r];
  }
  mean_cov /= static_cast<double>(d.n) * p.n_trees;
  CHECK(mean_cov == doctest::Approx(std::exp(-1.0)).epsilon(0.08));
}

TEST_CASE("forest beats least squares on a quadratic response") {
  auto d = make_data(500, 4, 7, [](auto r) { return r[0] * r[0]; }, 0.2);
  ForestParams p;
  p.n_trees = 200;
  p.seed = 3;
  const auto model = fit_forest(d.view(), d.y, p);
  const auto oob = oob_predict(model, d.view());
  const double sd_y = sample_sd(d.y);
  const double rf_nmae = mean_abs_error(oob.pred, d.y) / sd_y;

  // 5-fold least squares via simple manual split
  std::vector<double> ols_pred(d.n);
  for (int f = 0; f < 5; ++f) {
    std::vector<size_t> train, test;
    for (size_t r = 0; r < d.n; ++r)
      ((r % 5) == static_cast<size_t>(f) ? test : train).push_back(r);
    auto xt = gather_rows(d.view(), train);
    std::vector<double> yt;
    for (size_t r : train) yt.push_back(d.y[r]);
    const auto ols = fit_ols({xt.data(), train.size(), d.p}, yt);
    auto xs = gather_rows(d.view(), test);
    const auto pr = predict(ols, {xs.data(), test.size(), d.p});
    for (size_t i = 0; i < test.size(); ++i) ols_pred[test[i]] = pr[i];
  }
  const double ols_nmae = mean_abs_error(ols_pred, d.y) / sd_y;
  CHECK(rf_nmae < ols_nmae);
}

TEST_CASE("permutation importance finds the driver and shares mass on twins") {
  auto d = make_data(300, 6, 8, [](auto r) { return 3.0 * r[2]; }, 0.2);
  ForestParams p;
  p.n_trees = 150;
  p.seed = 5;
  const auto model = fit_forest(d.view(), d.y, p);
  const auto imp = permutation_importance(model, d.view(), d.y, 17);
  for (size_t j = 0; j < 6; ++j) {
    if (j == 2) continue;
    CHECK(imp.importance[2] > 10.0 * std::abs(imp.importance[j]));
  }

  // duplicate the driver column: both copies stay clearly positive
  Data dup;
  dup.n = d.n;
  dup.p = d.p + 1;
  dup.x = d.x;
  dup.x.insert(dup.x.end(), d.x.begin() + 2 * d.n, d.x.begin() + 3 * d.n);
  dup.y = d.y;
  const auto model2 = fit_forest(dup.view(), dup.y, p);
  const auto imp2 = permutation_importance(model2, dup.view(), dup.y, 17);
  CHECK(imp2.importance[2] > 0.0);
  CHECK(imp2.importance[6] > 0.0);
  const double solo = imp.importance[2];
  CHECK(imp2.importance[2] < solo);  // mass is shared
  CHECK(imp2.importance[6] < solo);
  CHECK(imp2.importance[2] + imp2.importance[6] > 0.5 * solo);

  // constant target: nothing to permute
  auto dc = make_data(60, 3, 9, [](auto) { return 2.0; });
  ForestParams pc;
  pc.n_trees = 30;
  const auto mc = fit_forest(dc.view(), dc.y, pc);
  const auto ic = permutation_importance(mc, dc.view(), dc.y, 3);
  for (double v : ic.importance) CHECK(v == 0.0);
}

TEST_CASE("impurity importance is exposed as a secondary diagnostic") {
  auto d = make_data(200, 4, 10, [](auto r) { return r[1]; }, 0.1);
  ForestParams p;
  p.n_trees = 60;
  p.seed = 2;
  const auto model = fit_forest(d.view(), d.y, p);
  const auto imp = impurity_importance(model);
  for (size_t j = 0; j < 4; ++j)
    if (j != 1) CHECK(imp[1] > imp[j]);
}

TEST_CASE("gradient boosting") {
  SUBCASE("one full-rate round equals a single tree") {
    auto d = make_data(120, 3, 11, [](auto r) { return r[0] > 0 ? 1.0 : -1.0; },
                       0.1);
    GBParams g;
    g.n_rounds = 1;
    g.learning_rate = 1.0;
    g.max_depth = 40;
    g.min_leaf = 5;
    const auto gb = fit_gb(d.view(), d.y, g);
    Rng rng(1);
    const auto tree = fit_tree(d.view(), d.y, {.min_leaf = 5, .mtry = 3}, rng);
    const auto pg = predict(gb, d.view());
    for (size_t r = 0; r < d.n; ++r)
      CHECK(pg[r] == doctest::Approx(tree.predict_row(d.view(), r)).epsilon(1e-9));
  }
  SUBCASE("zero rounds yield the constant model") {
    auto d = make_data(50, 2, 12, [](auto r) { return r[0]; }, 0.0);
    GBParams g;
    g.n_rounds = 0;
    const auto gb = fit_gb(d.view(), d.y, g);
    const double m = mean(d.y);
    for (double v : predict(gb, d.view())) CHECK(v == m);
  }
  SUBCASE("constant target stays constant for any round count") {
    auto d = make_data(50, 2, 13, [](auto) { return 3.5; });
    GBParams g;
    g.n_rounds = 25;
    g.learning_rate = 0.1;
    const auto gb = fit_gb(d.view(), d.y, g);
    for (double v : predict(gb, d.view())) CHECK(v == doctest::Approx(3.5));
  }
  SUBCASE("converges on a linear response") {
    auto d = make_data(300, 1, 14, [](auto r) { return 3.0 * r[0]; }, 0.0);
    GBParams g;
    g.n_rounds = 200;
    g.learning_rate = 0.1;
    g.max_depth = 2;
    const auto gb = fit_gb(d.view(), d.y, g);
    const auto pred = predict(gb, d.view());
    double sse = 0;
    for (size_t r = 0; r < d.n; ++r)
      sse += (pred[r] - d.y[r]) * (pred[r] - d.y[r]);
    const double rmse = std::sqrt(sse / static_cast<double>(d.n));
    CHECK(rmse < 0.05 * sample_sd(d.y));
  }
  SUBCASE("training MAE is non-increasing across rounds") {
    auto d = make_data(200, 3, 15, [](auto r) { return r[0] + r[1] * r[1]; },
                       0.2);
    double prev = 1e100;
    for (int rounds : {0, 5, 20, 80, 200}) {
      GBParams g;
      g.n_rounds = rounds;
      g.learning_rate = 0.1;
      const auto gb = fit_gb(d.view(), d.y, g);
      const double mae = mean_abs_error(predict(gb, d.view()), d.y);
      CHECK(mae <= prev + 1e-9);
      prev = mae;
    }
  }
}

TEST_CASE("ordinary least squares") {
  SUBCASE("two points, one slope") {
    Data d;
    d.n = 2;
    d.p = 1;
    d.x = {1, 2};
    d.y = {2, 4};
    const auto m = fit_ols(d.view(), d.y);
    CHECK(m.intercept == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(m.coef[0] == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("duplicated column is named in the rank error") {
    auto d = make_data(40, 2, 16, [](auto r) { return r[0]; }, 0.1);
    Data dup;
    dup.n = d.n;
    dup.p = 3;
    dup.x = d.x;
    dup.x.insert(dup.x.end(), d.x.begin(), d.x.begin() + d.n);
    dup.y = d.y;
    try {
      (void)fit_ols(dup.view(), dup.y, {"alpha", "beta", "alpha_twin"});
      FAIL("expected rank error");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("rank deficient") != std::string::npos);
      CHECK((msg.find("alpha") != std::string::npos ||
             msg.find("alpha_twin") != std::string::npos));
    }
  }
  SUBCASE("recovers known coefficients from a noiseless system") {
    const std::vector<double> beta{1.5, -2.0, 0.25};
    auto d = make_data(50, 3, 17, [&](auto r) {
      return 0.7 + beta[0] * r[0] + beta[1] * r[1] + beta[2] * r[2];
    });
    const auto m = fit_ols(d.view(), d.y);
    CHECK(m.intercept == doctest::Approx(0.7).epsilon(1e-8));
    for (size_t j = 0; j < 3; ++j)
      CHECK(m.coef[j] == doctest::Approx(beta[j]).epsilon(1e-8));
  }
  SUBCASE("residuals are orthogonal to the design") {
    auto d = make_data(80, 4, 18, [](auto r) { return r[0] - r[2]; }, 0.5);
    const auto m = fit_ols(d.view(), d.y);
    const auto pred = predict(m, d.view());
    std::vector<double> resid(d.n);
    for (size_t r = 0; r < d.n; ++r) resid[r] = d.y[r] - pred[r];
    for (size_t c = 0; c < d.p; ++c) {
      double dot = 0, nx = 0, nr = 0;
      for (size_t r = 0; r < d.n; ++r) {
        dot += resid[r] * d.x[c * d.n + r];
        nx += d.x[c * d.n + r] * d.x[c * d.n + r];
        nr += resid[r] * resid[r];
      }
      CHECK(std::abs(dot) / std::sqrt(nx * nr) < 1e-8);
    }
  }
  SUBCASE("coefficient error shrinks like one over root n") {
    std::vector<double> err;
    for (size_t n : {100, 400, 1600}) {
      double worst = 0;
      for (uint64_t s = 0; s < 5; ++s) {
        auto d = make_data(n, 2, 600 + s,
                           [](auto r) { return 2.0 * r[0] - 1.0 * r[1]; }, 1.0);
        const auto m = fit_ols(d.view(), d.y);
        worst = std::max(worst, std::abs(m.coef[0] - 2.0));
      }
      err.push_back(worst);
    }
    // quadrupling n should roughly halve the error; allow generous slack
    CHECK(err[1] < err[0]);
    CHECK(err[2] < err[1]);
    CHECK(err[2] < err[0] / 2.0);
  }
}

TEST_CASE("learners reject missing values and degenerate shapes") {
  auto d = make_data(30, 2, 19, [](auto r) { return r[0]; });
  auto bad = d;
  bad.x[5] = NAN;
  ForestParams p;
  p.n_trees = 5;
  CHECK_THROWS_AS((void)fit_forest(bad.view(), bad.y, p), ValidationError);
  p.n_trees = 0;
  CHECK_THROWS_AS((void)fit_forest(d.view(), d.y, p), ValidationError);
  CHECK_THROWS_AS((void)fit_ols(MatrixView{d.x.data(), 2, 3},
                                std::vector<double>{1, 2}),
                  ValidationError);
}

TEST_CASE("identical seeds give bitwise-identical models at any thread count") {
  auto d = make_data(250, 8, 20, [](auto r) { return r[0] * r[0] + r[3]; }, 0.3);
  ForestParams p;
  p.n_trees = 40;
  p.seed = 77;
  const auto dir = std::filesystem::temp_directory_path() / "geoecon_learners";
  std::filesystem::create_directories(dir);

  auto run = [&](int threads) {
    set_threads(threads);
    const auto model = fit_forest(d.view(), d.y, p);
    const auto imp = permutation_importance(model, d.view(), d.y, 5);
    save_model((dir / ("m" + std::to_string(threads) + ".geom")).string(),
               model);
    set_threads(0);
    return imp;
  };
  const auto i1 = run(1);
  const auto i3 = run(3);
  CHECK(i1.importance == i3.importance);
  std::ifstream a(dir / "m1.geom", std::ios::binary);
  std::ifstream b(dir / "m3.geom", std::ios::binary);
  const std::string ba((std::istreambuf_iterator<char>(a)), {});
  const std::string bb((std::istreambuf_iterator<char>(b)), {});
  CHECK(ba == bb);
}

TEST_CASE("monotone feature transforms keep the tree structure") {
  auto d = make_data(150, 3, 21, [](auto r) { return r[1] > 0.2 ? 2.0 : 0.0; },
                     0.2);
  ForestParams p;
  p.n_trees = 10;
  p.seed = 4;
  const auto base = fit_forest(d.view(), d.y, p);
  auto warped = d;
  for (size_t r = 0; r < d.n; ++r)
    warped.x[1 * d.n + r] = std::exp(d.x[1 * d.n + r]);  // strictly monotone
  const auto transformed = fit_forest(warped.view(), warped.y, p);
  REQUIRE(base.trees.size() == transformed.trees.size());
  for (size_t t = 0; t < base.trees.size(); ++t) {
    CHECK(base.trees[t].feature == transformed.trees[t].feature);
    CHECK(base.trees[t].left == transformed.trees[t].left);
    CHECK(base.trees[t].value == transformed.trees[t].value);
  }
  // split membership carries over exactly for the points that grew the tree;
  // midpoint thresholds are not equivariant for points between boundaries,
  // so the prediction check uses an un-bootstrapped tree
  ForestParams p1 = p;
  p1.n_trees = 1;
  p1.bootstrap = false;
  const auto b1 = fit_forest(d.view(), d.y, p1);
  const auto t1 = fit_forest(warped.view(), warped.y, p1);
  CHECK(predict(b1, d.view()) == predict(t1, warped.view()));
}

TEST_CASE("model serialization round trips exactly") {
  auto d = make_data(100, 4, 22, [](auto r) { return r[0] + r[1]; }, 0.2);
  const auto dir = std::filesystem::temp_directory_path() / "geoecon_models";
  std::filesystem::create_directories(dir);

  ForestParams fp;
  fp.n_trees = 12;
  fp.seed = 9;
  const AnyModel rf = fit_forest(d.view(), d.y, fp, {"a", "b", "c", "d"});
  GBParams gp;
  gp.n_rounds = 20;
  gp.learning_rate = 0.1;
  const AnyModel gb = fit_gb(d.view(), d.y, gp);
  const AnyModel ols = fit_ols(d.view(), d.y);

  for (const auto* m : {&rf, &gb, &ols}) {
    const auto path = (dir / "model.geom").string();
    save_model(path, *m);
    const auto loaded = load_model(path);
    CHECK(predict_model(loaded, d.view()) == predict_model(*m, d.view()));
    // a second save of the loaded model is byte-identical
    const auto path2 = (dir / "model2.geom").string();
    save_model(path2, loaded);
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    const std::string ba((std::istreambuf_iterator<char>(a)), {});
    const std::string bb((std::istreambuf_iterator<char>(b)), {});
    CHECK(ba == bb);
  }
  CHECK(model_to_json(ols).find("least_squares") != std::string::npos);
}
