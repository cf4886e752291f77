#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "geoecon/eval.hpp"
#include "geoecon/learners.hpp"

namespace geoecon {

struct ScoredName {
  std::string name;
  double score;
};

struct SelectionParams {
  int top_k = 10;
  int stage_a_trees = 1000;       // full-census forest
  int n_realisations = 300;       // stage B runs
  int vars_per_realisation = 20;  // features drawn per run
  int realisation_trees = 300;    // forest size inside each run
  int k_folds = 5;
  int forward_trees = 300;        // greedy candidate evaluation
  int curve_trees = 1000;         // final reported curve
  int min_leaf = 5;
  int mtry = 0;                   // 0 = ceil(p / 3)
  NmaeNorm norm = NmaeNorm::per_sample;
};

struct CurvePoint {
  std::string name;  // predictor added at this step
  double nmae_value;
  double corr;
};

struct SelectionReport {
  std::vector<ScoredName> stage_a_top;
  std::vector<ScoredName> stage_b_top;
  std::vector<std::string> pooled;        // deduplicated candidates, <= 20
  std::vector<std::string> final_ranked;  // forward-selection order
  std::vector<CurvePoint> curve;          // one entry per final predictor
  // out-of-fold predictions per step (for improvement maps)
  std::vector<std::vector<double>> step_predictions;
  std::vector<int64_t> cell_ids;
};

// one forest over the full census, permutation importance, descending sort
// (ties by name); returns all features with a warning flag when fewer than
// top_k exist
std::vector<ScoredName> stage_full_rf(const MatrixView& X,
                                      std::span<const double> y,
                                      std::span<const std::string> names,
                                      uint64_t seed,
                                      const SelectionParams& params);

// per realisation: vars_per_realisation features drawn without replacement, a
// forest fitted, importances normalized to unit positive mass; aggregate =
// mean normalized importance over the realisations containing the feature
std::vector<ScoredName> stage_subsample(const MatrixView& X,
                                        std::span<const double> y,
                                        std::span<const std::string> names,
                                        uint64_t seed,
                                        const SelectionParams& params);

// pool both stage lists, then greedy forward selection under k-fold MAE with
// a fold partition drawn once and shared across every candidate evaluation
SelectionReport pool_and_rank(std::span<const ScoredName> stage_a,
                              std::span<const ScoredName> stage_b,
                              const AlignedData& data, uint64_t seed,
                              const SelectionParams& params);

SelectionReport run_selection(const AlignedData& data, uint64_t seed,
                              const SelectionParams& params = {});

void write_selection_csv(const std::string& dir, const SelectionReport& r,
                         const AlignedData& data);

}  // namespace geoecon
