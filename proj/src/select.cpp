#include "geoecon/select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "geoecon/csvio.hpp"
#include "geoecon/error.hpp"
#include "geoecon/parallel.hpp"
#include "geoecon/statistics.hpp"

namespace geoecon {

namespace {

constexpr uint64_t kStageATag = 0xa;
constexpr uint64_t kStageBTag = 0xb;
constexpr uint64_t kGreedyTag = 0x97eed;
constexpr uint64_t kCurveTag = 0xc02ce;

std::vector<ScoredName> top_by_score(std::vector<ScoredName> scored, int k) {
  std::sort(scored.begin(), scored.end(),
            [](const ScoredName& a, const ScoredName& b) {
              return a.score != b.score ? a.score > b.score : a.name < b.name;
            });
  if (scored.size() > static_cast<size_t>(k)) scored.resize(k);
  return scored;
}

// 5-fold MAE of a forest on the given columns, with the fold partition and
// per-fold seeds fixed by the caller so candidate comparisons are paired
double paired_cv_mae(const MatrixView& X, std::span<const double> y,
                     std::span<const int32_t> fold, int k, int n_trees,
                     int min_leaf, uint64_t fit_seed,
                     std::vector<double>* oof_out) {
  std::vector<double> oof(X.n_rows, 0.0);
  for (int f = 0; f < k; ++f) {
    std::vector<size_t> train_rows, test_rows;
    for (size_t r = 0; r < X.n_rows; ++r)
      (fold[r] == f ? test_rows : train_rows).push_back(r);
    const auto train_x = gather_rows(X, train_rows);
    std::vector<double> train_y(train_rows.size());
    for (size_t i = 0; i < train_rows.size(); ++i) train_y[i] = y[train_rows[i]];
    ForestParams p;
    p.n_trees = n_trees;
    p.min_leaf = min_leaf;
    p.seed = derive_seed(fit_seed, static_cast<uint64_t>(f));
    const auto model = fit_forest(
        {train_x.data(), train_rows.size(), X.n_cols}, train_y, p);
    const auto test_x = gather_rows(X, test_rows);
    const auto pred =
        predict(model, {test_x.data(), test_rows.size(), X.n_cols});
    for (size_t i = 0; i < test_rows.size(); ++i) oof[test_rows[i]] = pred[i];
  }
  const double mae = mean_abs_error(oof, y);
  if (oof_out) *oof_out = std::move(oof);
  return mae;
}

}  // namespace

std::vector<ScoredName> stage_full_rf(const MatrixView& X,
                                      std::span<const double> y,
                                      std::span<const std::string> names,
                                      uint64_t seed,
                                      const SelectionParams& params) {
  ForestParams p;
  p.n_trees = params.stage_a_trees;
  p.min_leaf = params.min_leaf;
  p.mtry = params.mtry;
  p.seed = derive_seed(seed, kStageATag, 1);
  const auto model = fit_forest(
      X, y, p, std::vector<std::string>(names.begin(), names.end()));
  const auto imp =
      permutation_importance(model, X, y, derive_seed(seed, kStageATag, 2));
  std::vector<ScoredName> scored(names.size());
  for (size_t j = 0; j < names.size(); ++j)
    scored[j] = {imp.names[j], imp.importance[j]};
  return top_by_score(std::move(scored), params.top_k);
}

std::vector<ScoredName> stage_subsample(const MatrixView& X,
                                        std::span<const double> y,
                                        std::span<const std::string> names,
                                        uint64_t seed,
                                        const SelectionParams& params) {
  const size_t p = X.n_cols;
  const auto v = static_cast<size_t>(params.vars_per_realisation);
  if (p < v)
    throw ValidationError("subsample stage needs at least " +
                          std::to_string(v) + " predictors, have " +
                          std::to_string(p));
  const auto n_real = static_cast<size_t>(params.n_realisations);

  // per-realisation normalized importances, reduced in realisation order
  std::vector<double> score_sum(p, 0.0);
  std::vector<int32_t> contain(p, 0);
  std::vector<std::vector<double>> real_scores(n_real);
  std::vector<std::vector<uint32_t>> real_vars(n_real);

  parallel_for(0, n_real, [&](size_t rr) {
    Rng pick(derive_seed(seed, kStageBTag, rr, 1));
    auto vars = pick.sample_without_replacement(static_cast<uint32_t>(p),
                                                static_cast<uint32_t>(v));
    std::sort(vars.begin(), vars.end());
    std::vector<double> sub(X.n_rows * v);
    for (size_t j = 0; j < v; ++j)
      std::copy(X.col(vars[j]), X.col(vars[j]) + X.n_rows,
                sub.data() + j * X.n_rows);
    ForestParams fp;
    fp.n_trees = params.realisation_trees;
    fp.min_leaf = params.min_leaf;
    fp.seed = derive_seed(seed, kStageBTag, rr, 2);
    const MatrixView sub_view{sub.data(), X.n_rows, v};
    const auto model = fit_forest(sub_view, y, fp);
    const auto imp = permutation_importance(
        model, sub_view, y, derive_seed(seed, kStageBTag, rr, 3));

    // unit positive mass per realisation keeps runs comparable
    double mass = 0.0;
    for (double s : imp.importance) mass += std::max(s, 0.0);
    std::vector<double> norm(v, 0.0);
    if (mass > 0.0)
      for (size_t j = 0; j < v; ++j) norm[j] = imp.importance[j] / mass;
    real_scores[rr] = std::move(norm);
    real_vars[rr].assign(vars.begin(), vars.end());
  });

  for (size_t rr = 0; rr < n_real; ++rr)
    for (size_t j = 0; j < real_vars[rr].size(); ++j) {
      score_sum[real_vars[rr][j]] += real_scores[rr][j];
      ++contain[real_vars[rr][j]];
    }

  std::vector<ScoredName> scored;
  scored.reserve(p);
  for (size_t j = 0; j < p; ++j) {
    const double agg = contain[j] > 0
                           ? score_sum[j] / static_cast<double>(contain[j])
                           : -std::numeric_limits<double>::infinity();
    scored.push_back({names[j], agg});
  }
  return top_by_score(std::move(scored), params.top_k);
}

SelectionReport pool_and_rank(std::span<const ScoredName> stage_a,
                              std::span<const ScoredName> stage_b,
                              const AlignedData& data, uint64_t seed,
                              const SelectionParams& params) {
  SelectionReport report;
  report.stage_a_top.assign(stage_a.begin(), stage_a.end());
  report.stage_b_top.assign(stage_b.begin(), stage_b.end());
  report.cell_ids = data.cell_ids;

  for (const auto& s : stage_a) report.pooled.push_back(s.name);
  for (const auto& s : stage_b)
    if (std::find(report.pooled.begin(), report.pooled.end(), s.name) ==
        report.pooled.end())
      report.pooled.push_back(s.name);

  const auto fold =
      make_folds(data.n_rows(), params.k_folds, derive_seed(seed, kGreedyTag));
  const double y_sd = sample_sd(data.y);
  if (y_sd <= 0.0) throw ValidationError("selection target has zero variance");

  std::vector<std::string> chosen;
  std::vector<std::string> remaining = report.pooled;
  const auto n_steps =
      std::min<size_t>(params.top_k, report.pooled.size());

  while (chosen.size() < n_steps) {
    const uint64_t step_seed =
        derive_seed(seed, kGreedyTag, chosen.size() + 1);
    std::vector<double> cand_mae(remaining.size());
    // candidates share fold partition and per-fold seeds: paired comparison
    for (size_t c = 0; c < remaining.size(); ++c) {
      std::vector<std::string> cols = chosen;
      cols.push_back(remaining[c]);
      const auto sub = subset_columns(data, cols);
      cand_mae[c] =
          paired_cv_mae(sub.X(), sub.y, fold, params.k_folds,
                        params.forward_trees, params.min_leaf, step_seed,
                        nullptr);
    }
    size_t best = 0;
    for (size_t c = 1; c < remaining.size(); ++c)
      if (cand_mae[c] < cand_mae[best]) best = c;
    chosen.push_back(remaining[best]);
    remaining.erase(remaining.begin() + best);
  }
  report.final_ranked = chosen;

  // reported curve re-evaluated with the full-size ensemble; folds and fit
  // seeds are shared across steps so adjacent points are paired
  const uint64_t curve_seed = derive_seed(seed, kCurveTag);
  for (size_t step = 1; step <= chosen.size(); ++step) {
    std::vector<std::string> cols(chosen.begin(), chosen.begin() + step);
    const auto sub = subset_columns(data, cols);
    std::vector<double> oof;
    const double mae =
        paired_cv_mae(sub.X(), sub.y, fold, params.k_folds, params.curve_trees,
                      params.min_leaf, curve_seed, &oof);
    CurvePoint pt;
    pt.name = chosen[step - 1];
    pt.nmae_value = mae / y_sd;
    pt.corr = pearson(oof, data.y);
    report.curve.push_back(pt);
    report.step_predictions.push_back(std::move(oof));
  }
  return report;
}

SelectionReport run_selection(const AlignedData& data, uint64_t seed,
                              const SelectionParams& params) {
  const MatrixView X = data.X();
  const auto stage_a = stage_full_rf(X, data.y, data.names, seed, params);
  const auto stage_b = stage_subsample(X, data.y, data.names, seed, params);
  return pool_and_rank(stage_a, stage_b, data, seed, params);
}

void write_selection_csv(const std::string& dir, const SelectionReport& r,
                         const AlignedData& data) {
  {
    CsvWriter w(dir + "/selection_stage_a.csv");
    w.write_raw_line("rank,predictor,importance");
    for (size_t i = 0; i < r.stage_a_top.size(); ++i)
      w.write_raw_line(std::to_string(i + 1) + "," + r.stage_a_top[i].name +
                       "," + format_double(r.stage_a_top[i].score));
  }
  {
    CsvWriter w(dir + "/selection_stage_b.csv");
    w.write_raw_line("rank,predictor,aggregate_importance");
    for (size_t i = 0; i < r.stage_b_top.size(); ++i)
      w.write_raw_line(std::to_string(i + 1) + "," + r.stage_b_top[i].name +
                       "," + format_double(r.stage_b_top[i].score));
  }
  {
    // final ranking with one-to-one correlations, one row per rank
    const auto corrs =
        predictor_correlations(data.X(), data.y, data.names);
    CsvWriter w(dir + "/selection_final.csv");
    w.write_raw_line("rank,predictor,corr_with_target");
    for (size_t i = 0; i < r.final_ranked.size(); ++i) {
      double c = std::numeric_limits<double>::quiet_NaN();
      for (const auto& pc : corrs)
        if (pc.name == r.final_ranked[i]) c = pc.corr;
      w.write_raw_line(std::to_string(i + 1) + "," + r.final_ranked[i] + "," +
                       format_double(c));
    }
  }
  {
    CsvWriter w(dir + "/selection_curve.csv");
    w.write_raw_line("step,predictor,nmae,corr");
    for (size_t i = 0; i < r.curve.size(); ++i)
      w.write_raw_line(std::to_string(i + 1) + "," + r.curve[i].name + "," +
                       format_double(r.curve[i].nmae_value) + "," +
                       format_double(r.curve[i].corr));
  }
}

}  // namespace geoecon
