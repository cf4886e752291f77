#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "geoecon/rng.hpp"

namespace geoecon {

// Column-major matrix view: values[col * n_rows + row].
struct MatrixView {
  const double* data = nullptr;
  size_t n_rows = 0;
  size_t n_cols = 0;
  double at(size_t r, size_t c) const { return data[c * n_rows + r]; }
  const double* col(size_t c) const { return data + c * n_rows; }
};

// rows gathered into a fresh column-major buffer
std::vector<double> gather_rows(const MatrixView& X,
                                std::span<const size_t> rows);

// ---------------------------------------------------------------------------
// regression tree

struct Tree {
  // flat node arrays; feature < 0 marks a leaf
  std::vector<int32_t> feature;
  std::vector<double> threshold;
  std::vector<int32_t> left;
  std::vector<int32_t> right;
  std::vector<double> value;   // leaf mean of training targets
  std::vector<int32_t> count;  // training rows in the leaf (bootstrap multiplicity)

  size_t n_nodes() const { return feature.size(); }
  size_t n_leaves() const;
  double predict_row(const MatrixView& X, size_t row) const;
  // predict with one feature's value overridden (permutation importance)
  double predict_row_override(const MatrixView& X, size_t row, size_t ov_col,
                              double ov_val) const;
};

struct TreeParams {
  int min_leaf = 5;
  int mtry = 0;      // 0 = all features
  int max_depth = 0;  // 0 = unlimited
};

// Greedy variance-reduction CART. Candidate features are an rng-drawn subset
// of size mtry per node; splits sit at midpoints between consecutive distinct
// values; ties in SSE decrease go to the lowest feature index, then the
// lowest threshold. Growth stops when the best decrease is <= 0 or a child
// would fall below min_leaf.
Tree fit_tree(const MatrixView& X, std::span<const double> y,
              const TreeParams& params, Rng& rng);

// ---------------------------------------------------------------------------
// random forest

struct ForestParams {
  int n_trees = 500;
  int mtry = 0;      // 0 = ceil(p / 3)
  int min_leaf = 5;
  uint64_t seed = 0;
  bool bootstrap = true;  // test hook; off = every tree sees all rows
};

struct ForestModel {
  std::vector<Tree> trees;
  // bootstrap multiplicity, [tree * n_train + row]; exact OOB reconstruction
  std::vector<uint16_t> inbag;
  // summed SSE decrease per [tree * p + feature] (impurity diagnostic)
  std::vector<double> split_gain;
  size_t n_train = 0;
  size_t n_features = 0;
  ForestParams params;
  std::vector<std::string> feature_names;

  uint16_t inbag_count(size_t tree, size_t row) const {
    return inbag[tree * n_train + row];
  }
};

ForestModel fit_forest(const MatrixView& X, std::span<const double> y,
                       ForestParams params,
                       std::vector<std::string> feature_names = {});

std::vector<double> predict(const ForestModel& model, const MatrixView& X);

struct OobPrediction {
  std::vector<double> pred;       // NaN where no tree left the row out
  std::vector<int32_t> coverage;  // trees contributing per row
};
OobPrediction oob_predict(const ForestModel& model, const MatrixView& X_train);

struct ImportanceVector {
  std::vector<std::string> names;
  std::vector<double> importance;  // mean OOB MAE increase under permutation
  std::vector<double> std_error;   // over trees
};
ImportanceVector permutation_importance(const ForestModel& model,
                                        const MatrixView& X,
                                        std::span<const double> y,
                                        uint64_t seed);
// mean per-tree total SSE decrease per feature; secondary diagnostic
std::vector<double> impurity_importance(const ForestModel& model);

// ---------------------------------------------------------------------------
// gradient boosting

struct GBParams {
  int n_rounds = 500;
  double learning_rate = 0.001;  // classic shrinkage default
  int max_depth = 3;
  int min_leaf = 1;
};

struct GBModel {
  double base = 0.0;  // target mean
  double learning_rate = 0.1;
  std::vector<Tree> trees;
  size_t n_features = 0;
  std::vector<std::string> feature_names;
};

// least-squares boosting on residuals; n_rounds = 0 yields the constant model
GBModel fit_gb(const MatrixView& X, std::span<const double> y, GBParams params,
               std::vector<std::string> feature_names = {});
std::vector<double> predict(const GBModel& model, const MatrixView& X);

// ---------------------------------------------------------------------------
// ordinary least squares

struct OLSModel {
  double intercept = 0.0;
  std::vector<double> coef;
  std::vector<std::string> feature_names;
};

// Householder QR with column pivoting; a rank-deficient design raises a
// validation error naming the dependent columns.
OLSModel fit_ols(const MatrixView& X, std::span<const double> y,
                 std::vector<std::string> feature_names = {});
std::vector<double> predict(const OLSModel& model, const MatrixView& X);

// ---------------------------------------------------------------------------
// dispatch + serialization

struct ModelSpec {
  enum class Kind { rf, gb, ols } kind = Kind::rf;
  ForestParams rf;
  GBParams gb;

  static ModelSpec random_forest(ForestParams p = {}) {
    ModelSpec s;
    s.kind = Kind::rf;
    s.rf = p;
    return s;
  }
  static ModelSpec gradient_boosting(GBParams p = {}) {
    ModelSpec s;
    s.kind = Kind::gb;
    s.gb = p;
    return s;
  }
  static ModelSpec least_squares() {
    ModelSpec s;
    s.kind = Kind::ols;
    return s;
  }
  std::string_view name() const {
    switch (kind) {
      case Kind::rf: return "RF";
      case Kind::gb: return "GB";
      case Kind::ols: return "ML";
    }
    return "";
  }
};

using AnyModel = std::variant<ForestModel, GBModel, OLSModel>;

AnyModel fit_model(const ModelSpec& spec, const MatrixView& X,
                   std::span<const double> y, uint64_t seed,
                   std::vector<std::string> feature_names = {});
std::vector<double> predict_model(const AnyModel& model, const MatrixView& X);

// versioned binary container (magic GEOM), exact round trip
void save_model(const std::string& path, const AnyModel& model);
AnyModel load_model(const std::string& path);
// readable dump for inspection
std::string model_to_json(const AnyModel& model);

}  // namespace geoecon
