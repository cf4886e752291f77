#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geoecon/gridstore.hpp"
#include "geoecon/statistics.hpp"

namespace geoecon {

enum class StatKind : int { mean = 0, q1, median, q3, sd, sd_s, grad };

// per-step threshold escalation, compounded: threshold_s = base * (1+e)^(s-1)
inline constexpr double kEscalationSixHourly = 0.10;
inline constexpr double kEscalationDaily = 0.15;
inline constexpr int kMaxGradStep = 5;

// a cell's derived features go missing when more than this fraction of its
// samples is missing
inline constexpr double kMissingFractionLimit = 0.05;

struct FeatureSpec {
  VarId var = VarId::MSLP;
  StatKind kind = StatKind::mean;
  int sign = +1;                 // grad only: +1 / -1
  int step = 0;                  // grad only: 1..5
  double base_threshold = 0.0;   // grad only, physical units
  double escalation = 0.0;       // grad only, per-step fraction
  void validate() const;
};

double grad_threshold(const FeatureSpec& spec);

// base increments of the per-variable gradient schedule (physical units;
// MSLP is stored in hPa with a 7.5 hPa base)
double gradient_base(VarId v);

// One predictor column: either a geography attribute passed through from the
// cell table or a statistic derived from a climate series.
struct ColumnSpec {
  enum class Source { geography, climate };
  Source source = Source::climate;
  GeoAttr attr = GeoAttr::latitude;
  FeatureSpec climate;

  static ColumnSpec geography(GeoAttr a);
  static ColumnSpec stat(VarId v, StatKind k);
  static ColumnSpec gradient(VarId v, int sign, int step);
};

// canonical name grammar: geography names as-is; "<VAR> <STAT>" with STAT in
// {Mean, bottom Q, Median, top Q, SD, SD S}; gradients "<VAR> <+|->ve (<s>)"
std::string column_name(const ColumnSpec& c);
ColumnSpec parse_column_name(std::string_view name);

// 9 feature variables x 6 statistics + 9 x 10 gradients + 10 geography = 154
std::vector<ColumnSpec> default_census();
std::vector<ColumnSpec> census_from_names(std::span<const std::string> names);

struct FeatureMatrix {
  std::vector<int64_t> cell_ids;    // ascending
  std::vector<std::string> names;   // unique
  std::vector<double> values;       // column-major [col * n_rows + row]
  std::vector<uint8_t> missing;     // 1 where the value is masked (stored NaN)

  size_t n_rows() const { return cell_ids.size(); }
  size_t n_cols() const { return names.size(); }
  std::span<const double> column(size_t j) const {
    return {values.data() + j * n_rows(), n_rows()};
  }
  std::optional<size_t> column_index(std::string_view name) const;
  void validate() const;
};

// --------------------------------------------------------------------------
// statistic kernels

// sample standard deviation of the 12 climatological monthly means; every
// calendar month must be represented
double seasonal_sd(std::span<const double> values,
                   std::span<const uint8_t> months);

// fraction of valid step-s differences beyond the escalated threshold;
// values may contain NaN gaps, pairs with either side missing are dropped
double gradient_exceedance(std::span<const double> values,
                           const FeatureSpec& spec);

// daily DT = max of the day's TMAX samples - min of the day's TMIN samples;
// a day is masked when more than 5% of its expected samples are missing
VariableSeries daily_excursion(const VariableSeries& tmin,
                               const VariableSeries& tmax);

// --------------------------------------------------------------------------
// engine

// all requested columns for one variable's series; result[k][cell] follows
// the spec order in var_specs (every spec must reference series.var)
std::vector<std::vector<double>> derive_climate_columns(
    const VariableSeries& series, std::span<const ColumnSpec> var_specs);

FeatureMatrix build_feature_matrix(const CellTable& cells,
                                   const SeriesSet& series,
                                   std::span<const ColumnSpec> census);

// --------------------------------------------------------------------------
// IO

void write_features_csv(const std::string& path, const FeatureMatrix& m);
FeatureMatrix load_features_csv(const std::string& path);
void save_features_geof(const std::string& path, const FeatureMatrix& m);
FeatureMatrix load_features_geof(const std::string& path);
FeatureMatrix load_features(const std::string& path);  // by extension

}  // namespace geoecon
