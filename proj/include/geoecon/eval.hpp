#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "geoecon/features.hpp"
#include "geoecon/learners.hpp"
#include "geoecon/target.hpp"

namespace geoecon {

// MAE normalized by the sample standard deviation of y_norm (divisor n-1)
double nmae(std::span<const double> pred, std::span<const double> y,
            std::span<const double> y_norm);

enum class SampleId : int { all = 0, top_tercile, middle_tercile, bottom_tercile };
std::string_view sample_name(SampleId s);
SampleId sample_from_name(std::string_view name);

enum class EvalMode : int { oob = 0, kfold };
enum class NmaeNorm : int { per_sample = 0, global };

// random partition into k folds with sizes differing by at most one
std::vector<int32_t> make_folds(size_t n, int k, uint64_t seed);

struct KfoldPrediction {
  std::vector<double> oof;     // out-of-fold prediction per row
  std::vector<int32_t> fold;   // fold id per row
  int k = 0;
  uint64_t seed = 0;
};
KfoldPrediction kfold_predict(const ModelSpec& spec, const MatrixView& X,
                              std::span<const double> y, int k, uint64_t seed,
                              std::vector<std::string> feature_names = {});

struct EvalReport {
  SampleId sample = SampleId::all;
  std::string model;
  EvalMode mode = EvalMode::kfold;
  double nmae_value = 0;
  double corr = 0;
  size_t n_cells = 0;
  uint64_t seed = 0;
};

struct DiagnosticField {
  enum class Kind { prediction, delta, residual };
  Kind kind = Kind::prediction;
  std::vector<int64_t> cell_ids;
  std::vector<double> value;
};

// per cell |prev - y| - |next - y|; positive where the later step improved
DiagnosticField delta_field(std::span<const int64_t> ids,
                            std::span<const double> pred_prev,
                            std::span<const int64_t> ids_next,
                            std::span<const double> pred_next,
                            std::span<const int64_t> ids_y,
                            std::span<const double> y);
// per cell pred - y
DiagnosticField residual_field(std::span<const int64_t> ids,
                               std::span<const double> pred,
                               std::span<const int64_t> ids_y,
                               std::span<const double> y);

struct PredictorCorrelation {
  std::string name;
  double corr;  // NaN marks an undefined (constant-column) entry
};
std::vector<PredictorCorrelation> predictor_correlations(
    const MatrixView& X, std::span<const double> y,
    std::span<const std::string> names);
// full pairwise matrix over the given columns, row-major
std::vector<double> pairwise_correlations(const MatrixView& X);

void write_field_csv(const std::string& path, const DiagnosticField& f);
DiagnosticField load_field_csv(const std::string& path);

// --------------------------------------------------------------------------
// aligned pipeline data: intersection of feature rows and included target
// cells, complete cases only

struct AlignedData {
  std::vector<int64_t> cell_ids;
  std::vector<double> y;
  std::vector<Tercile> tercile;
  std::vector<std::string> names;
  std::vector<double> x_storage;  // column-major
  size_t dropped_missing = 0;     // complete-case removals
  size_t dropped_unmatched = 0;   // cells present on only one side

  size_t n_rows() const { return cell_ids.size(); }
  MatrixView X() const { return {x_storage.data(), n_rows(), names.size()}; }
  std::vector<size_t> rows_for(SampleId s) const;
};

AlignedData align(const FeatureMatrix& m, const TargetVector& t);

// column subset by name (order preserved); unknown name -> error
AlignedData subset_columns(const AlignedData& d,
                           std::span<const std::string> names);

struct SampleEvaluation {
  EvalReport report;
  std::vector<int64_t> cell_ids;
  std::vector<double> pred;  // per evaluated cell
};

// fit/evaluate one model spec on one sample of the aligned data
SampleEvaluation evaluate_sample(const ModelSpec& spec, const AlignedData& d,
                                 SampleId sample, EvalMode mode, int k,
                                 uint64_t seed, NmaeNorm norm);

}  // namespace geoecon
