#include "geoecon/gridstore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "geoecon/binio.hpp"
#include "geoecon/csvio.hpp"
#include "geoecon/error.hpp"
#include "geoecon/timeutil.hpp"

namespace geoecon {

namespace {

constexpr char kGeofMagic[4] = {'G', 'E', 'O', 'F'};
constexpr uint16_t kGeofVersion = 1;
// container kinds
constexpr uint8_t kKindSeries = 1;
constexpr uint8_t kKindCells = 3;
constexpr uint8_t kKindEconomy = 4;

struct GeoAttrInfo {
  GeoAttr attr;
  std::string_view name;
  std::string_view column;
};

constexpr std::array<GeoAttrInfo, kGeoAttrCount> kGeoAttrs{{
    {GeoAttr::latitude, "Latitude", "lat"},
    {GeoAttr::elevation, "Elevation", "elevation_m"},
    {GeoAttr::dist_coast1, "Dist Coast 1", "dist_coast1_km"},
    {GeoAttr::dist_coast2, "Dist Coast 2", "dist_coast2_km"},
    {GeoAttr::dist_lake, "Dist Lake", "dist_lake_km"},
    {GeoAttr::dist_major_river, "Dist Major River", "dist_major_river_km"},
    {GeoAttr::dist_river, "Dist River", "dist_river_km"},
    {GeoAttr::dist_ocean, "Dist Ocean", "dist_ocean_km"},
    {GeoAttr::vegetation, "Vegetation", "vegetation_cat"},
    {GeoAttr::soil, "Soil", "soil_cat"},
}};

constexpr std::array<std::string_view, 11> kVarNames{
    "MSLP", "UV10", "T2", "TMIN", "TMAX", "D2", "TP", "RH", "SR", "SUND", "DT"};

bool on_half_degree(double x) {
  const double r = x - std::floor(x);
  return std::abs(r - 0.5) < 1e-9;
}

void check_geo_range(GeoAttr a, double v, size_t line) {
  const auto col = std::string(geo_attr_column(a));
  if (std::isnan(v))
    throw ValidationError("line " + std::to_string(line) + ", column '" + col +
                          "': missing value");
  switch (a) {
    case GeoAttr::latitude:
      if (v < -90.0 || v > 90.0)
        throw ValidationError("line " + std::to_string(line) +
                              ": latitude out of range: " + format_double(v));
      break;
    case GeoAttr::vegetation:
      if (v < 0 || v > 31 || v != std::floor(v))
        throw ValidationError("line " + std::to_string(line) +
                              ": vegetation category out of range [0,31]: " +
                              format_double(v));
      break;
    case GeoAttr::soil:
      if (v < 0 || v > 250 || v != std::floor(v))
        throw ValidationError("line " + std::to_string(line) +
                              ": soil category out of range [0,250]: " +
                              format_double(v));
      break;
    case GeoAttr::elevation:
      break;  // below sea level is legal
    default:
      if (v < 0)
        throw ValidationError("line " + std::to_string(line) + ", column '" +
                              col + "': negative distance " + format_double(v));
  }
}

}  // namespace

std::string_view geo_attr_name(GeoAttr a) {
  return kGeoAttrs[static_cast<size_t>(a)].name;
}

std::string_view geo_attr_column(GeoAttr a) {
  return kGeoAttrs[static_cast<size_t>(a)].column;
}

std::optional<GeoAttr> geo_attr_from_name(std::string_view name) {
  for (const auto& info : kGeoAttrs)
    if (info.name == name) return info.attr;
  return std::nullopt;
}

std::optional<size_t> CellTable::find(int64_t id) const {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) return std::nullopt;
  return static_cast<size_t>(it - ids.begin());
}

void CellTable::validate() const {
  const size_t n = ids.size();
  if (lat.size() != n || lon.size() != n)
    throw InternalError("cell table: column sizes differ");
  for (const auto& g : geo)
    if (g.size() != n) throw InternalError("cell table: column sizes differ");
  std::set<std::pair<double, double>> coords;
  for (size_t i = 0; i < n; ++i) {
    if (i > 0 && ids[i] <= ids[i - 1])
      throw ValidationError("duplicate cell " + std::to_string(ids[i]));
    if (lat[i] < -90 || lat[i] > 90 || lon[i] < -180 || lon[i] >= 180)
      throw ValidationError("cell " + std::to_string(ids[i]) +
                            ": coordinates out of range");
    if (!on_half_degree(lat[i]) || !on_half_degree(lon[i]))
      throw ValidationError("cell " + std::to_string(ids[i]) +
                            ": center not on the 1-degree lattice");
    if (!coords.emplace(lat[i], lon[i]).second)
      throw ValidationError("cell " + std::to_string(ids[i]) +
                            ": duplicate (lat, lon)");
    if (geo[0][i] != lat[i])
      throw InternalError("cell table: latitude attribute diverges from lat");
  }
}

size_t EconomyTable::distinct_cells() const {
  size_t n = 0;
  for (size_t i = 0; i < records.size(); ++i)
    if (i == 0 || records[i].cell_id != records[i - 1].cell_id) ++n;
  return n;
}

void EconomyTable::validate() const {
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.gcp_usd < 0 || std::isnan(r.gcp_usd))
      throw ValidationError("cell " + std::to_string(r.cell_id) + " year " +
                            std::to_string(r.year) + ": negative gcp");
    if (r.population < 0 || std::isnan(r.population))
      throw ValidationError("cell " + std::to_string(r.cell_id) + " year " +
                            std::to_string(r.year) + ": negative population");
    if (std::find(years.begin(), years.end(), r.year) == years.end())
      throw ValidationError("cell " + std::to_string(r.cell_id) + ": year " +
                            std::to_string(r.year) +
                            " not in the configured year list");
    if (i > 0) {
      const auto& p = records[i - 1];
      if (p.cell_id > r.cell_id ||
          (p.cell_id == r.cell_id && p.year >= r.year))
        throw ValidationError("duplicate economy record for cell " +
                              std::to_string(r.cell_id) + " year " +
                              std::to_string(r.year));
    }
  }
}

std::string_view var_name(VarId v) { return kVarNames[static_cast<size_t>(v)]; }

std::optional<VarId> var_from_name(std::string_view name) {
  for (size_t i = 0; i < kVarNames.size(); ++i)
    if (kVarNames[i] == name) return static_cast<VarId>(i);
  return std::nullopt;
}

int64_t cadence_seconds(Cadence c) {
  return c == Cadence::six_hourly ? 21600 : 86400;
}

Cadence default_cadence(VarId v) {
  switch (v) {
    case VarId::MSLP:
    case VarId::UV10:
    case VarId::TMIN:
    case VarId::TMAX:
      return Cadence::six_hourly;
    default:
      return Cadence::daily;
  }
}

double VariableSeries::missing_fraction(size_t cell_index) const {
  const auto row = cell_row(cell_index);
  size_t miss = 0;
  for (double v : row) miss += is_missing(v) ? 1 : 0;
  return n_steps == 0 ? 0.0 : static_cast<double>(miss) / static_cast<double>(n_steps);
}

void VariableSeries::compute_months() {
  month.resize(n_steps);
  for (size_t s = 0; s < n_steps; ++s)
    month[s] = static_cast<uint8_t>(month_index(timestamp(s)));
}

void VariableSeries::validate() const {
  if (values.size() != n_cells() * n_steps)
    throw InternalError("series " + std::string(var_name(var)) +
                        ": value array shape mismatch");
  if (month.size() != n_steps)
    throw InternalError("series " + std::string(var_name(var)) +
                        ": month index not computed");
  for (size_t i = 1; i < cell_ids.size(); ++i)
    if (cell_ids[i] <= cell_ids[i - 1])
      throw ValidationError("series " + std::string(var_name(var)) +
                            ": duplicate cell " + std::to_string(cell_ids[i]));
}

void require_cells(const VariableSeries& s, std::span<const int64_t> expected) {
  std::string missing;
  size_t n_missing = 0;
  for (int64_t id : expected) {
    if (!std::binary_search(s.cell_ids.begin(), s.cell_ids.end(), id)) {
      ++n_missing;
      if (n_missing <= 10) {
        if (!missing.empty()) missing += ", ";
        missing += std::to_string(id);
      }
    }
  }
  if (n_missing > 0)
    throw ValidationError("series " + std::string(var_name(s.var)) +
                          ": missing " + std::to_string(n_missing) +
                          " cell column(s): " + missing +
                          (n_missing > 10 ? ", ..." : ""));
}

// ---------------------------------------------------------------------------
// CSV loaders

CellTable load_cells_csv(const std::string& path) {
  const CsvFile csv = CsvFile::load(path);
  const size_t c_id = csv.column("cell_id");
  const size_t c_lat = csv.column("lat");
  const size_t c_lon = csv.column("lon");
  std::array<size_t, kGeoAttrCount> c_geo{};
  c_geo[0] = c_lat;  // latitude attribute reads the lat column
  for (int a = 1; a < kGeoAttrCount; ++a)
    c_geo[a] = csv.column(std::string(geo_attr_column(static_cast<GeoAttr>(a))));

  struct RowTmp {
    int64_t id;
    size_t row;
  };
  std::vector<RowTmp> order(csv.n_rows());
  for (size_t r = 0; r < csv.n_rows(); ++r) {
    order[r].id = parse_int_field(csv.row(r)[c_id], csv.line_number(r), "cell_id");
    order[r].row = r;
  }
  std::sort(order.begin(), order.end(),
            [](const RowTmp& a, const RowTmp& b) { return a.id < b.id; });
  for (size_t i = 1; i < order.size(); ++i)
    if (order[i].id == order[i - 1].id)
      throw ValidationError("duplicate cell " + std::to_string(order[i].id));

  CellTable t;
  t.ids.reserve(order.size());
  t.lat.reserve(order.size());
  t.lon.reserve(order.size());
  for (auto& g : t.geo) g.reserve(order.size());
  for (const auto& o : order) {
    const auto row = csv.row(o.row);
    const size_t line = csv.line_number(o.row);
    t.ids.push_back(o.id);
    t.lat.push_back(parse_double_field(row[c_lat], line, "lat"));
    t.lon.push_back(parse_double_field(row[c_lon], line, "lon"));
    for (int a = 0; a < kGeoAttrCount; ++a) {
      const auto attr = static_cast<GeoAttr>(a);
      const double v = parse_double_field(
          row[c_geo[a]], line, std::string(geo_attr_column(attr)));
      check_geo_range(attr, v, line);
      t.geo[a].push_back(v);
    }
  }
  t.validate();
  return t;
}

EconomyTable load_economy_csv(const std::string& path, std::vector<int> years) {
  const CsvFile csv = CsvFile::load(path);
  const size_t c_id = csv.column("cell_id");
  const size_t c_year = csv.column("year");
  const size_t c_gcp = csv.column("gcp_usd");
  const size_t c_pop = csv.column("population");

  std::sort(years.begin(), years.end());
  EconomyTable t;
  t.years = years;
  t.records.reserve(csv.n_rows());
  for (size_t r = 0; r < csv.n_rows(); ++r) {
    const auto row = csv.row(r);
    const size_t line = csv.line_number(r);
    EconomyRecord rec;
    rec.cell_id = parse_int_field(row[c_id], line, "cell_id");
    rec.year = static_cast<int>(parse_int_field(row[c_year], line, "year"));
    rec.gcp_usd = parse_double_field(row[c_gcp], line, "gcp_usd");
    rec.population = parse_double_field(row[c_pop], line, "population");
    if (rec.gcp_usd < 0)
      throw ValidationError("line " + std::to_string(line) +
                            ": negative gcp_usd");
    if (rec.population < 0)
      throw ValidationError("line " + std::to_string(line) +
                            ": negative population");
    if (!std::binary_search(years.begin(), years.end(), rec.year))
      continue;  // outside the configured year list
    t.records.push_back(rec);
  }
  std::sort(t.records.begin(), t.records.end(),
            [](const EconomyRecord& a, const EconomyRecord& b) {
              return a.cell_id != b.cell_id ? a.cell_id < b.cell_id
                                            : a.year < b.year;
            });
  t.validate();
  return t;
}

VariableSeries load_series_csv(const std::string& path, VarId var,
                               Cadence cadence) {
  const CsvFile csv = CsvFile::load(path);
  const size_t c_ts = csv.column("timestamp");

  // remaining columns are cell ids
  struct CellCol {
    int64_t id;
    size_t col;
  };
  std::vector<CellCol> cells;
  for (size_t c = 0; c < csv.n_cols(); ++c) {
    if (c == c_ts) continue;
    const std::string& h = csv.header()[c];
    int64_t id = 0;
    try {
      id = parse_int_field(h, 1, "header");
    } catch (const ValidationError&) {
      throw ValidationError("'" + path + "': series header column '" + h +
                            "' is not a cell id");
    }
    cells.push_back({id, c});
  }
  if (cells.empty())
    throw ValidationError("'" + path + "': no cell columns");
  std::sort(cells.begin(), cells.end(),
            [](const CellCol& a, const CellCol& b) { return a.id < b.id; });
  for (size_t i = 1; i < cells.size(); ++i)
    if (cells[i].id == cells[i - 1].id)
      throw ValidationError("'" + path + "': duplicate cell column " +
                            std::to_string(cells[i].id));

  const size_t n_steps = csv.n_rows();
  if (n_steps == 0) throw ValidationError("'" + path + "': no samples");

  VariableSeries s;
  s.var = var;
  s.cadence = cadence;
  s.n_steps = n_steps;
  s.cell_ids.reserve(cells.size());
  for (const auto& c : cells) s.cell_ids.push_back(c.id);

  const int64_t step = cadence_seconds(cadence);
  std::vector<int64_t> ts(n_steps);
  for (size_t r = 0; r < n_steps; ++r) {
    ts[r] = parse_iso8601(std::string(csv.row(r)[c_ts]));
    if (r > 0 && ts[r] - ts[r - 1] != step)
      throw ValidationError("'" + path + "' line " +
                            std::to_string(csv.line_number(r)) +
                            ": non-uniform cadence (expected step of " +
                            std::to_string(step) + " s)");
  }
  s.t0 = ts[0];

  s.values.resize(cells.size() * n_steps);
  for (size_t i = 0; i < cells.size(); ++i) {
    double* dst = s.values.data() + i * n_steps;
    const size_t col = cells[i].col;
    const std::string col_name = std::to_string(cells[i].id);
    for (size_t r = 0; r < n_steps; ++r)
      dst[r] = parse_double_field(csv.row(r)[col], csv.line_number(r), col_name,
                                  /*allow_empty=*/true);
  }
  s.compute_months();
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// CSV writers

void write_cells_csv(const std::string& path, const CellTable& t) {
  CsvWriter w(path);
  std::string header = "cell_id,lat,lon";
  for (int a = 1; a < kGeoAttrCount; ++a)
    header += "," + std::string(geo_attr_column(static_cast<GeoAttr>(a)));
  w.write_raw_line(header);
  for (size_t i = 0; i < t.size(); ++i) {
    std::string line = std::to_string(t.ids[i]) + "," +
                       format_double(t.lat[i]) + "," + format_double(t.lon[i]);
    for (int a = 1; a < kGeoAttrCount; ++a)
      line += "," + format_double(t.geo[a][i]);
    w.write_raw_line(line);
  }
}

void write_economy_csv(const std::string& path, const EconomyTable& t) {
  CsvWriter w(path);
  w.write_raw_line("cell_id,year,gcp_usd,population");
  for (const auto& r : t.records)
    w.write_raw_line(std::to_string(r.cell_id) + "," + std::to_string(r.year) +
                     "," + format_double(r.gcp_usd) + "," +
                     format_double(r.population));
}

void write_series_csv(const std::string& path, const VariableSeries& s) {
  CsvWriter w(path);
  std::string header = "timestamp";
  for (int64_t id : s.cell_ids) header += "," + std::to_string(id);
  w.write_raw_line(header);
  std::string line;
  for (size_t r = 0; r < s.n_steps; ++r) {
    line = format_iso8601(s.timestamp(r));
    for (size_t i = 0; i < s.n_cells(); ++i) {
      line += ",";
      line += format_double(s.values[i * s.n_steps + r]);
    }
    w.write_raw_line(line);
  }
}

// ---------------------------------------------------------------------------
// GEOF container

namespace {

void write_geof_header(BinWriter& w, uint8_t kind, uint32_t n_rows,
                       uint32_t n_cols) {
  w.bytes(kGeofMagic, 4);
  w.pod<uint16_t>(kGeofVersion);
  w.pod<uint8_t>(kind);
  w.pod<uint8_t>(0);
  w.pod<uint32_t>(n_rows);
  w.pod<uint32_t>(n_cols);
}

struct GeofHeader {
  uint8_t kind;
  uint32_t n_rows;
  uint32_t n_cols;
};

GeofHeader read_geof_header(BinReader& r, uint8_t expected_kind) {
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kGeofMagic, 4) != 0)
    throw ValidationError("'" + r.path() + "': not a GEOF file");
  const auto version = r.pod<uint16_t>();
  if (version != kGeofVersion)
    throw ValidationError("'" + r.path() + "': unsupported GEOF version " +
                          std::to_string(version));
  GeofHeader h{};
  h.kind = r.pod<uint8_t>();
  r.pod<uint8_t>();
  h.n_rows = r.pod<uint32_t>();
  h.n_cols = r.pod<uint32_t>();
  if (h.kind != expected_kind)
    throw ValidationError("'" + r.path() + "': GEOF kind " +
                          std::to_string(h.kind) + ", expected " +
                          std::to_string(expected_kind));
  return h;
}

}  // namespace

void save_series_geof(const std::string& path, const VariableSeries& s) {
  BinWriter w(path);
  write_geof_header(w, kKindSeries, static_cast<uint32_t>(s.n_cells()),
                    static_cast<uint32_t>(s.n_steps));
  w.array<int64_t>(s.cell_ids);
  w.str(std::string(var_name(s.var)));
  w.pod<uint8_t>(static_cast<uint8_t>(s.cadence));
  w.pod<int64_t>(s.t0);
  // column-major: all cells for step 0, then step 1, ...
  std::vector<double> col(s.n_cells());
  for (size_t t = 0; t < s.n_steps; ++t) {
    for (size_t i = 0; i < s.n_cells(); ++i) col[i] = s.values[i * s.n_steps + t];
    w.array<double>(col);
  }
}

VariableSeries load_series_geof(const std::string& path) {
  BinReader r(path);
  const GeofHeader h = read_geof_header(r, kKindSeries);
  VariableSeries s;
  s.cell_ids.resize(h.n_rows);
  r.array<int64_t>(s.cell_ids);
  const std::string vname = r.str();
  const auto var = var_from_name(vname);
  if (!var)
    throw ValidationError("'" + path + "': unknown variable '" + vname + "'");
  s.var = *var;
  const auto cad = r.pod<uint8_t>();
  if (cad > 1)
    throw ValidationError("'" + path + "': bad cadence tag");
  s.cadence = static_cast<Cadence>(cad);
  s.t0 = r.pod<int64_t>();
  s.n_steps = h.n_cols;
  s.values.resize(static_cast<size_t>(h.n_rows) * h.n_cols);
  std::vector<double> col(h.n_rows);
  for (size_t t = 0; t < s.n_steps; ++t) {
    r.array<double>(col);
    for (size_t i = 0; i < s.n_cells(); ++i) s.values[i * s.n_steps + t] = col[i];
  }
  s.compute_months();
  s.validate();
  return s;
}

void save_cells_geof(const std::string& path, const CellTable& t) {
  BinWriter w(path);
  write_geof_header(w, kKindCells, static_cast<uint32_t>(t.size()),
                    static_cast<uint32_t>(kGeoAttrCount + 2));
  w.array<int64_t>(t.ids);
  w.array<double>(t.lat);
  w.array<double>(t.lon);
  for (const auto& g : t.geo) w.array<double>(g);
}

CellTable load_cells_geof(const std::string& path) {
  BinReader r(path);
  const GeofHeader h = read_geof_header(r, kKindCells);
  if (h.n_cols != kGeoAttrCount + 2)
    throw ValidationError("'" + path + "': unexpected cell column count");
  CellTable t;
  t.ids.resize(h.n_rows);
  t.lat.resize(h.n_rows);
  t.lon.resize(h.n_rows);
  r.array<int64_t>(t.ids);
  r.array<double>(t.lat);
  r.array<double>(t.lon);
  for (auto& g : t.geo) {
    g.resize(h.n_rows);
    r.array<double>(g);
  }
  t.validate();
  return t;
}

void save_economy_geof(const std::string& path, const EconomyTable& t) {
  BinWriter w(path);
  write_geof_header(w, kKindEconomy, static_cast<uint32_t>(t.size()), 3);
  w.pod<uint32_t>(static_cast<uint32_t>(t.years.size()));
  for (int y : t.years) w.pod<int32_t>(y);
  for (const auto& rec : t.records) {
    w.pod<int64_t>(rec.cell_id);
    w.pod<int32_t>(rec.year);
    w.pod<double>(rec.gcp_usd);
    w.pod<double>(rec.population);
  }
}

EconomyTable load_economy_geof(const std::string& path) {
  BinReader r(path);
  const GeofHeader h = read_geof_header(r, kKindEconomy);
  EconomyTable t;
  const auto n_years = r.pod<uint32_t>();
  t.years.resize(n_years);
  for (auto& y : t.years) y = r.pod<int32_t>();
  t.records.resize(h.n_rows);
  for (auto& rec : t.records) {
    rec.cell_id = r.pod<int64_t>();
    rec.year = r.pod<int32_t>();
    rec.gcp_usd = r.pod<double>();
    rec.population = r.pod<double>();
  }
  t.validate();
  return t;
}

TableFormat format_from_path(const std::string& path) {
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".geof") == 0)
    return TableFormat::binary;
  return TableFormat::csv;
}

CellTable load_cells(const std::string& path, TableFormat format) {
  return format == TableFormat::csv ? load_cells_csv(path)
                                    : load_cells_geof(path);
}

EconomyTable load_economy(const std::string& path, std::vector<int> years,
                          TableFormat format) {
  if (format == TableFormat::csv) return load_economy_csv(path, std::move(years));
  EconomyTable t = load_economy_geof(path);
  if (!years.empty()) {
    std::sort(years.begin(), years.end());
    std::vector<EconomyRecord> kept;
    for (const auto& rec : t.records)
      if (std::binary_search(years.begin(), years.end(), rec.year))
        kept.push_back(rec);
    t.records = std::move(kept);
    t.years = std::move(years);
    t.validate();
  }
  return t;
}

VariableSeries load_series(const std::string& path, VarId var, Cadence cadence,
                           TableFormat format) {
  if (format == TableFormat::csv) return load_series_csv(path, var, cadence);
  VariableSeries s = load_series_geof(path);
  if (s.var != var)
    throw ValidationError("'" + path + "': contains " +
                          std::string(var_name(s.var)) + ", expected " +
                          std::string(var_name(var)));
  if (s.cadence != cadence)
    throw ValidationError("'" + path + "': cadence mismatch");
  return s;
}

}  // namespace geoecon
