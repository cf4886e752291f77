#include "geoecon/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "geoecon/csvio.hpp"
#include "geoecon/error.hpp"
#include "geoecon/statistics.hpp"

namespace geoecon {

namespace {
constexpr uint64_t kFoldTag = 0xf01d;
constexpr uint64_t kFitTag = 0xf17;
}  // namespace

double nmae(std::span<const double> pred, std::span<const double> y,
            std::span<const double> y_norm) {
  const double sd = sample_sd(y_norm);
  if (sd <= 0.0)
    throw ValidationError("nmae: normalization sample has zero variance");
  return mean_abs_error(pred, y) / sd;
}

std::string_view sample_name(SampleId s) {
  switch (s) {
    case SampleId::all: return "all";
    case SampleId::top_tercile: return "top";
    case SampleId::middle_tercile: return "middle";
    case SampleId::bottom_tercile: return "bottom";
  }
  return "";
}

SampleId sample_from_name(std::string_view name) {
  for (auto s : {SampleId::all, SampleId::top_tercile, SampleId::middle_tercile,
                 SampleId::bottom_tercile})
    if (name == sample_name(s)) return s;
  throw ValidationError("unknown sample '" + std::string(name) +
                        "' (expected all|top|middle|bottom)");
}

std::vector<int32_t> make_folds(size_t n, int k, uint64_t seed) {
  if (k < 2) throw ValidationError("k-fold needs k >= 2");
  if (n < static_cast<size_t>(k))
    throw ValidationError("k-fold needs at least k rows");
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, kFoldTag));
  rng.shuffle(std::span<size_t>(order));
  // the first n % k folds take one extra row
  std::vector<int32_t> fold(n);
  const size_t base = n / static_cast<size_t>(k);
  const size_t extra = n % static_cast<size_t>(k);
  size_t pos = 0;
  for (int f = 0; f < k; ++f) {
    const size_t len = base + (static_cast<size_t>(f) < extra ? 1 : 0);
    for (size_t i = 0; i < len; ++i) fold[order[pos++]] = f;
  }
  return fold;
}

KfoldPrediction kfold_predict(const ModelSpec& spec, const MatrixView& X,
                              std::span<const double> y, int k, uint64_t seed,
                              std::vector<std::string> feature_names) {
  KfoldPrediction out;
  out.k = k;
  out.seed = seed;
  out.fold = make_folds(X.n_rows, k, seed);
  out.oof.assign(X.n_rows, 0.0);

  for (int f = 0; f < k; ++f) {
    std::vector<size_t> train_rows, test_rows;
    for (size_t r = 0; r < X.n_rows; ++r)
      (out.fold[r] == f ? test_rows : train_rows).push_back(r);

    const auto train_x = gather_rows(X, train_rows);
    std::vector<double> train_y(train_rows.size());
    for (size_t i = 0; i < train_rows.size(); ++i)
      train_y[i] = y[train_rows[i]];
    const MatrixView train_view{train_x.data(), train_rows.size(), X.n_cols};
    const auto model =
        fit_model(spec, train_view, train_y,
                  derive_seed(seed, kFitTag, static_cast<uint64_t>(f)),
                  feature_names);

    const auto test_x = gather_rows(X, test_rows);
    const MatrixView test_view{test_x.data(), test_rows.size(), X.n_cols};
    const auto pred = predict_model(model, test_view);
    for (size_t i = 0; i < test_rows.size(); ++i)
      out.oof[test_rows[i]] = pred[i];
  }
  return out;
}

DiagnosticField delta_field(std::span<const int64_t> ids,
                            std::span<const double> pred_prev,
                            std::span<const int64_t> ids_next,
                            std::span<const double> pred_next,
                            std::span<const int64_t> ids_y,
                            std::span<const double> y) {
  if (!std::equal(ids.begin(), ids.end(), ids_next.begin(), ids_next.end()) ||
      !std::equal(ids.begin(), ids.end(), ids_y.begin(), ids_y.end()))
    throw ValidationError("delta field: cell mismatch between inputs");
  DiagnosticField f;
  f.kind = DiagnosticField::Kind::delta;
  f.cell_ids.assign(ids.begin(), ids.end());
  f.value.resize(ids.size());
  for (size_t i = 0; i < ids.size(); ++i)
    f.value[i] = std::abs(pred_prev[i] - y[i]) - std::abs(pred_next[i] - y[i]);
  return f;
}

DiagnosticField residual_field(std::span<const int64_t> ids,
                               std::span<const double> pred,
                               std::span<const int64_t> ids_y,
                               std::span<const double> y) {
  if (!std::equal(ids.begin(), ids.end(), ids_y.begin(), ids_y.end()))
    throw ValidationError("residual field: cell mismatch between inputs");
  DiagnosticField f;
  f.kind = DiagnosticField::Kind::residual;
  f.cell_ids.assign(ids.begin(), ids.end());
  f.value.resize(ids.size());
  for (size_t i = 0; i < ids.size(); ++i) f.value[i] = pred[i] - y[i];
  return f;
}

std::vector<PredictorCorrelation> predictor_correlations(
    const MatrixView& X, std::span<const double> y,
    std::span<const std::string> names) {
  if (names.size() != X.n_cols)
    throw ValidationError("predictor correlations: name count mismatch");
  std::vector<PredictorCorrelation> out;
  out.reserve(names.size());
  for (size_t j = 0; j < X.n_cols; ++j) {
    double c;
    try {
      c = pearson({X.col(j), X.n_rows}, y);
    } catch (const ValidationError&) {
      c = std::numeric_limits<double>::quiet_NaN();  // constant column
    }
    out.push_back({names[j], c});
  }
  return out;
}

std::vector<double> pairwise_correlations(const MatrixView& X) {
  const size_t p = X.n_cols;
  std::vector<double> out(p * p, 1.0);
  for (size_t a = 0; a < p; ++a)
    for (size_t b = a + 1; b < p; ++b) {
      double c;
      try {
        c = pearson({X.col(a), X.n_rows}, {X.col(b), X.n_rows});
      } catch (const ValidationError&) {
        c = std::numeric_limits<double>::quiet_NaN();
      }
      out[a * p + b] = out[b * p + a] = c;
    }
  return out;
}

void write_field_csv(const std::string& path, const DiagnosticField& f) {
  CsvWriter w(path);
  w.write_raw_line("cell_id,value");
  for (size_t i = 0; i < f.cell_ids.size(); ++i)
    w.write_raw_line(std::to_string(f.cell_ids[i]) + "," +
                     format_double(f.value[i]));
}

DiagnosticField load_field_csv(const std::string& path) {
  const CsvFile csv = CsvFile::load(path);
  const size_t c_id = csv.column("cell_id");
  const size_t c_v = csv.column("value");
  DiagnosticField f;
  for (size_t r = 0; r < csv.n_rows(); ++r) {
    f.cell_ids.push_back(
        parse_int_field(csv.row(r)[c_id], csv.line_number(r), "cell_id"));
    f.value.push_back(parse_double_field(csv.row(r)[c_v], csv.line_number(r),
                                         "value", true));
  }
  return f;
}

// ---------------------------------------------------------------------------

std::vector<size_t> AlignedData::rows_for(SampleId s) const {
  std::vector<size_t> rows;
  rows.reserve(n_rows());
  for (size_t i = 0; i < n_rows(); ++i) {
    const bool keep = s == SampleId::all ||
                      (s == SampleId::top_tercile && tercile[i] == Tercile::top) ||
                      (s == SampleId::middle_tercile && tercile[i] == Tercile::middle) ||
                      (s == SampleId::bottom_tercile && tercile[i] == Tercile::bottom);
    if (keep) rows.push_back(i);
  }
  return rows;
}

AlignedData align(const FeatureMatrix& m, const TargetVector& t) {
  AlignedData d;
  d.names = m.names;
  const size_t n = m.n_rows();
  const size_t p = m.n_cols();

  std::vector<size_t> rows;
  size_t ti = 0;
  for (size_t i = 0; i < n; ++i) {
    while (ti < t.size() && t.cell_ids[ti] < m.cell_ids[i]) ++ti;
    if (ti >= t.size() || t.cell_ids[ti] != m.cell_ids[i]) {
      ++d.dropped_unmatched;
      continue;
    }
    if (!t.included(ti)) continue;
    bool complete = true;
    for (size_t j = 0; j < p; ++j)
      if (m.missing[j * n + i]) {
        complete = false;
        break;
      }
    if (!complete) {
      ++d.dropped_missing;
      continue;
    }
    rows.push_back(i);
    d.cell_ids.push_back(m.cell_ids[i]);
    d.y.push_back(t.log_gcp_pc[ti]);
    d.tercile.push_back(t.tercile[ti]);
  }

  d.x_storage.resize(rows.size() * p);
  for (size_t j = 0; j < p; ++j) {
    const double* src = m.values.data() + j * n;
    double* dst = d.x_storage.data() + j * rows.size();
    for (size_t i = 0; i < rows.size(); ++i) dst[i] = src[rows[i]];
  }
  return d;
}

AlignedData subset_columns(const AlignedData& d,
                           std::span<const std::string> names) {
  AlignedData out;
  out.cell_ids = d.cell_ids;
  out.y = d.y;
  out.tercile = d.tercile;
  out.names.assign(names.begin(), names.end());
  out.x_storage.resize(d.n_rows() * names.size());
  for (size_t k = 0; k < names.size(); ++k) {
    const auto it = std::find(d.names.begin(), d.names.end(), names[k]);
    if (it == d.names.end())
      throw ValidationError("unknown predictor '" + names[k] + "'");
    const size_t j = static_cast<size_t>(it - d.names.begin());
    std::copy(d.x_storage.begin() + j * d.n_rows(),
              d.x_storage.begin() + (j + 1) * d.n_rows(),
              out.x_storage.begin() + k * d.n_rows());
  }
  return out;
}

SampleEvaluation evaluate_sample(const ModelSpec& spec, const AlignedData& d,
                                 SampleId sample, EvalMode mode, int k,
                                 uint64_t seed, NmaeNorm norm) {
  const auto rows = d.rows_for(sample);
  if (rows.size() < 3)
    throw ValidationError("sample '" + std::string(sample_name(sample)) +
                          "' has fewer than 3 cells");
  const auto x = gather_rows(d.X(), rows);
  std::vector<double> y(rows.size());
  std::vector<int64_t> ids(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    y[i] = d.y[rows[i]];
    ids[i] = d.cell_ids[rows[i]];
  }
  const MatrixView X{x.data(), rows.size(), d.names.size()};

  SampleEvaluation out;
  out.cell_ids = std::move(ids);
  if (mode == EvalMode::kfold) {
    const auto cv = kfold_predict(spec, X, y, k, seed, d.names);
    out.pred = cv.oof;
  } else {
    if (spec.kind != ModelSpec::Kind::rf)
      throw ValidationError("out-of-bag evaluation requires the RF model");
    ForestParams p = spec.rf;
    p.seed = derive_seed(seed, kFitTag);
    const auto model = fit_forest(X, y, p, d.names);
    const auto oob = oob_predict(model, X);
    for (size_t r = 0; r < oob.pred.size(); ++r)
      if (oob.coverage[r] == 0)
        throw ValidationError(
            "out-of-bag prediction left a row uncovered; raise n_trees");
    out.pred = oob.pred;
  }

  std::span<const double> norm_span =
      norm == NmaeNorm::per_sample ? std::span<const double>(y)
                                   : std::span<const double>(d.y);
  out.report.sample = sample;
  out.report.model = std::string(spec.name());
  out.report.mode = mode;
  out.report.nmae_value = nmae(out.pred, y, norm_span);
  out.report.corr = pearson(out.pred, y);
  out.report.n_cells = rows.size();
  out.report.seed = seed;
  return out;
}

}  // namespace geoecon
