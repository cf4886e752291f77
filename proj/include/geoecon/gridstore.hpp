#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace geoecon {

// ---------------------------------------------------------------------------
// cells and geography

enum class GeoAttr : int {
  latitude = 0,
  elevation,
  dist_coast1,
  dist_coast2,
  dist_lake,
  dist_major_river,
  dist_river,
  dist_ocean,
  vegetation,
  soil,
};
inline constexpr int kGeoAttrCount = 10;

std::string_view geo_attr_name(GeoAttr a);    // predictor-name form, "Latitude"
std::string_view geo_attr_column(GeoAttr a);  // csv column form, "elevation_m"
std::optional<GeoAttr> geo_attr_from_name(std::string_view name);

struct CellTable {
  std::vector<int64_t> ids;  // ascending, unique
  std::vector<double> lat;   // cell centers, [-90, 90]
  std::vector<double> lon;   // cell centers, [-180, 180)
  // geo[latitude] mirrors lat
  std::array<std::vector<double>, kGeoAttrCount> geo;

  size_t size() const { return ids.size(); }
  std::optional<size_t> find(int64_t id) const;
  void validate() const;
};

// ---------------------------------------------------------------------------
// economy

struct EconomyRecord {
  int64_t cell_id;
  int year;
  double gcp_usd;
  double population;
};

struct EconomyTable {
  std::vector<EconomyRecord> records;  // sorted by (cell_id, year), unique
  std::vector<int> years;              // configured list, ascending
  size_t size() const { return records.size(); }
  size_t distinct_cells() const;
  void validate() const;
};

// ---------------------------------------------------------------------------
// climate series

enum class VarId : int { MSLP = 0, UV10, T2, TMIN, TMAX, D2, TP, RH, SR, SUND, DT };
enum class Cadence : int { six_hourly = 0, daily = 1 };

std::string_view var_name(VarId v);
std::optional<VarId> var_from_name(std::string_view name);
int64_t cadence_seconds(Cadence c);
// step column of the ingest schedule: MSLP/UV10/TMIN/TMAX six-hourly, rest daily
Cadence default_cadence(VarId v);

inline bool is_missing(double v) { return std::isnan(v); }

struct VariableSeries {
  VarId var = VarId::MSLP;
  Cadence cadence = Cadence::daily;
  std::vector<int64_t> cell_ids;  // ascending
  int64_t t0 = 0;                 // first timestamp, unix UTC seconds
  size_t n_steps = 0;
  std::vector<uint8_t> month;  // calendar month 0..11 per step
  std::vector<double> values;  // row-major [cell * n_steps + step]; NaN = missing

  size_t n_cells() const { return cell_ids.size(); }
  int64_t timestamp(size_t step) const {
    return t0 + static_cast<int64_t>(step) * cadence_seconds(cadence);
  }
  std::span<const double> cell_row(size_t i) const {
    return {values.data() + i * n_steps, n_steps};
  }
  double missing_fraction(size_t cell_index) const;
  void compute_months();  // fill month[] from t0 and cadence
  void validate() const;
};

// error listing the expected cells the series does not carry
void require_cells(const VariableSeries& s, std::span<const int64_t> expected);

// ---------------------------------------------------------------------------
// CSV ingestion (formats documented in docs/FORMATS.md)

enum class TableFormat { csv, binary };

CellTable load_cells(const std::string& path, TableFormat format);
EconomyTable load_economy(const std::string& path, std::vector<int> years,
                          TableFormat format);
VariableSeries load_series(const std::string& path, VarId var, Cadence cadence,
                           TableFormat format);

CellTable load_cells_csv(const std::string& path);
EconomyTable load_economy_csv(const std::string& path, std::vector<int> years);
VariableSeries load_series_csv(const std::string& path, VarId var,
                               Cadence cadence);

void write_cells_csv(const std::string& path, const CellTable& t);
void write_economy_csv(const std::string& path, const EconomyTable& t);
void write_series_csv(const std::string& path, const VariableSeries& s);

// ---------------------------------------------------------------------------
// GEOF columnar binary (bit-exact round trip; layout in docs/FORMATS.md)

void save_cells_geof(const std::string& path, const CellTable& t);
CellTable load_cells_geof(const std::string& path);
void save_economy_geof(const std::string& path, const EconomyTable& t);
EconomyTable load_economy_geof(const std::string& path);
void save_series_geof(const std::string& path, const VariableSeries& s);
VariableSeries load_series_geof(const std::string& path);

// infer csv/binary from the file extension (".geof" = binary)
TableFormat format_from_path(const std::string& path);

using SeriesSet = std::map<VarId, VariableSeries>;

}  // namespace geoecon
