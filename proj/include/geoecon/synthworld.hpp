#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geoecon/features.hpp"
#include "geoecon/gridstore.hpp"
#include "geoecon/target.hpp"

namespace geoecon {

enum class DriverTransform : int { linear = 0, quadratic, step, interaction };

// One additive term of the ground-truth response. With u = (x - center) /
// scale: linear -> u, quadratic -> u^2, step -> 1[x > center], interaction ->
// u * u_b of a second predictor.
struct DriverSpec {
  std::string predictor;
  std::string predictor_b;  // interaction only
  double weight = 0.0;
  DriverTransform transform = DriverTransform::linear;
  double center = 0.0;
  double scale = 1.0;
  double center_b = 0.0;
  double scale_b = 1.0;
};

// "NAME:transform:weight[:center[:scale]]", interactions "A*B:interaction:w:..."
DriverSpec parse_driver_spec(const std::string& text);
std::string driver_spec_to_string(const DriverSpec& d);

// per-variable synthesis: level + annual sine + white noise, optional
// one-sample pulses at shock_prob per step, optional diurnal cycle
struct VarSynthSpec {
  double base_lo = 0, base_hi = 0;
  double base_lat_weight = 0;  // share of the level mix driven by |lat| (sign: colder poles)
  double amp_lo = 0, amp_hi = 0;
  double amp_lat_weight = 0;   // share of the amplitude mix driven by |lat|
  double noise_lo = 0, noise_hi = 0;
  double shock_prob = 0;
  double shock_height = 0;
  double diurnal_amp = 0;
  double phase_jitter = 0.3;  // radians around the hemisphere phase
};

struct RegionalOffsetSpec {
  double delta = 0.0;     // additive shift on the log target
  double fraction = 0.0;  // random cell share carrying it
};

struct WorldConfig {
  size_t n_cells = 2000;
  std::vector<int> years = {1990, 1995, 2000, 2005};
  int series_start_year = 2001;  // 4 calendar years incl. one leap -> 1461 days
  int series_years = 4;
  double lat_limit = 70.0;
  double base_level = 3.2;
  double noise_sd = 0.15;
  // target noise is a two-component normal mixture (reporting-error tail);
  // noise_sd is the total standard deviation. tail_share = 0 -> gaussian
  double noise_tail_share = 0.1;
  double noise_tail_ratio = 5.0;
  double yearly_jitter = 0.05;
  double pop_log10_lo = 3.0, pop_log10_hi = 6.0;
  std::vector<DriverSpec> drivers;
  RegionalOffsetSpec offset;
  std::map<VarId, VarSynthSpec> climate;
};

// 2,000 cells, three nonlinear drivers (quadratic latitude, quadratic
// MSLP seasonal variability, step on major-river distance), noise 0.15
WorldConfig default_world();

struct IntendedStat {
  std::string column;
  std::vector<double> value;
  std::vector<double> tolerance;
};

struct GroundTruth {
  std::vector<std::string> driver_names;
  std::vector<std::vector<double>> driver_value;  // [driver][cell]
  std::vector<double> target_clean;               // base + weighted transforms
  std::vector<double> target;                     // + noise + regional offset
  std::vector<uint8_t> in_region;
  std::vector<IntendedStat> intended;             // derivable feature checks
};

struct World {
  CellTable cells;
  SeriesSet series;
  EconomyTable economy;
  GroundTruth truth;
};

CellTable generate_cells(const WorldConfig& cfg, uint64_t seed);
VariableSeries synthesize_series(const WorldConfig& cfg, uint64_t seed,
                                 const CellTable& cells, VarId var);
GroundTruth make_ground_truth(const WorldConfig& cfg, uint64_t seed,
                              const CellTable& cells);
EconomyTable make_economy(const WorldConfig& cfg, uint64_t seed,
                          const CellTable& cells, const GroundTruth& truth);

// everything materialized (holds all ten series)
World generate(const WorldConfig& cfg, uint64_t seed);

// memory-lean: synthesizes one variable at a time and derives its features
struct WorldFeatures {
  CellTable cells;
  EconomyTable economy;
  FeatureMatrix features;
  GroundTruth truth;
};
WorldFeatures generate_features(const WorldConfig& cfg, uint64_t seed,
                                std::span<const ColumnSpec> census);

struct OracleCheckEntry {
  std::string feature;
  int64_t cell_id;
  double intended;
  double derived;
  double tolerance;
};

struct OracleReport {
  size_t n_checked = 0;
  std::vector<OracleCheckEntry> failures;
  bool ok() const { return failures.empty(); }
};

OracleReport oracle_check(const GroundTruth& truth, const FeatureMatrix& m);

}  // namespace geoecon
