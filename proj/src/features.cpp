#include "geoecon/features.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>

#include "geoecon/binio.hpp"
#include "geoecon/csvio.hpp"
#include "geoecon/error.hpp"
#include "geoecon/parallel.hpp"
#include "geoecon/timeutil.hpp"

namespace geoecon {

namespace {

constexpr double kQnan = std::numeric_limits<double>::quiet_NaN();
constexpr uint8_t kGeofKindMatrix = 2;

// the nine variables that receive derived statistics (TMIN/TMAX only feed DT)
constexpr std::array<VarId, 9> kFeatureVars{
    VarId::MSLP, VarId::UV10, VarId::T2, VarId::DT, VarId::D2,
    VarId::TP,   VarId::RH,   VarId::SR, VarId::SUND};

std::string_view stat_token(StatKind k) {
  switch (k) {
    case StatKind::mean: return "Mean";
    case StatKind::q1: return "bottom Q";
    case StatKind::median: return "Median";
    case StatKind::q3: return "top Q";
    case StatKind::sd: return "SD";
    case StatKind::sd_s: return "SD S";
    case StatKind::grad: return "grad";
  }
  return "";
}

}  // namespace

void FeatureSpec::validate() const {
  if (kind == StatKind::grad) {
    if (sign != +1 && sign != -1)
      throw ValidationError("gradient spec: sign must be +1 or -1");
    if (step < 1 || step > kMaxGradStep)
      throw ValidationError("gradient spec: step must be in [1," +
                            std::to_string(kMaxGradStep) + "]");
    if (!(base_threshold > 0))
      throw ValidationError("gradient spec: base threshold must be positive");
    if (escalation < 0)
      throw ValidationError("gradient spec: negative escalation");
  }
}

double grad_threshold(const FeatureSpec& spec) {
  return spec.base_threshold * std::pow(1.0 + spec.escalation, spec.step - 1);
}

double gradient_base(VarId v) {
  switch (v) {
    case VarId::MSLP: return 7.5;   // hPa
    case VarId::UV10: return 2.5;   // m/s
    case VarId::T2: return 5.0;     // degC
    case VarId::DT: return 2.5;     // degC
    case VarId::D2: return 7.0;     // degC
    case VarId::TP: return 5.0;     // mm
    case VarId::RH: return 20.0;    // %
    case VarId::SR: return 100.0;   // W/m^2
    case VarId::SUND: return 3.0;   // hr
    default:
      throw ValidationError("no gradient schedule for variable " +
                            std::string(var_name(v)));
  }
}

ColumnSpec ColumnSpec::geography(GeoAttr a) {
  ColumnSpec c;
  c.source = Source::geography;
  c.attr = a;
  return c;
}

ColumnSpec ColumnSpec::stat(VarId v, StatKind k) {
  if (k == StatKind::grad)
    throw ValidationError("gradient columns need sign and step");
  ColumnSpec c;
  c.source = Source::climate;
  c.climate.var = v;
  c.climate.kind = k;
  return c;
}

ColumnSpec ColumnSpec::gradient(VarId v, int sign, int step) {
  ColumnSpec c;
  c.source = Source::climate;
  c.climate.var = v;
  c.climate.kind = StatKind::grad;
  c.climate.sign = sign;
  c.climate.step = step;
  c.climate.base_threshold = gradient_base(v);
  c.climate.escalation = default_cadence(v) == Cadence::six_hourly
                             ? kEscalationSixHourly
                             : kEscalationDaily;
  c.climate.validate();
  return c;
}

std::string column_name(const ColumnSpec& c) {
  if (c.source == ColumnSpec::Source::geography)
    return std::string(geo_attr_name(c.attr));
  const auto var = std::string(var_name(c.climate.var));
  if (c.climate.kind == StatKind::grad)
    return var + (c.climate.sign > 0 ? " +ve (" : " -ve (") +
           std::to_string(c.climate.step) + ")";
  return var + " " + std::string(stat_token(c.climate.kind));
}

ColumnSpec parse_column_name(std::string_view name) {
  if (auto attr = geo_attr_from_name(name))
    return ColumnSpec::geography(*attr);

  const size_t space = name.find(' ');
  if (space == std::string_view::npos)
    throw ValidationError("unknown predictor name '" + std::string(name) + "'");
  const auto var = var_from_name(name.substr(0, space));
  if (!var)
    throw ValidationError("unknown variable in predictor name '" +
                          std::string(name) + "'");
  const std::string_view rest = name.substr(space + 1);

  for (StatKind k : {StatKind::mean, StatKind::q1, StatKind::median,
                     StatKind::q3, StatKind::sd_s, StatKind::sd})
    if (rest == stat_token(k)) return ColumnSpec::stat(*var, k);

  // "<VAR> +ve (s)" / "<VAR> -ve (s)"
  int sign = 0;
  if (rest.substr(0, 4) == "+ve ") sign = +1;
  if (rest.substr(0, 4) == "-ve ") sign = -1;
  if (sign != 0) {
    const std::string_view par = rest.substr(4);
    if (par.size() >= 3 && par.front() == '(' && par.back() == ')') {
      int step = 0;
      const auto* b = par.data() + 1;
      const auto* e = par.data() + par.size() - 1;
      auto [p, ec] = std::from_chars(b, e, step);
      if (ec == std::errc{} && p == e && step >= 1 && step <= kMaxGradStep)
        return ColumnSpec::gradient(*var, sign, step);
    }
  }
  throw ValidationError("unknown predictor name '" + std::string(name) + "'");
}

std::vector<ColumnSpec> default_census() {
  std::vector<ColumnSpec> census;
  census.reserve(154);
  for (int a = 0; a < kGeoAttrCount; ++a)
    census.push_back(ColumnSpec::geography(static_cast<GeoAttr>(a)));
  for (VarId v : kFeatureVars)
    for (StatKind k : {StatKind::mean, StatKind::q1, StatKind::median,
                       StatKind::q3, StatKind::sd, StatKind::sd_s})
      census.push_back(ColumnSpec::stat(v, k));
  for (VarId v : kFeatureVars)
    for (int step = 1; step <= kMaxGradStep; ++step)
      for (int sign : {+1, -1})
        census.push_back(ColumnSpec::gradient(v, sign, step));
  return census;
}

std::vector<ColumnSpec> census_from_names(std::span<const std::string> names) {
  std::vector<ColumnSpec> census;
  census.reserve(names.size());
  for (const auto& n : names) census.push_back(parse_column_name(n));
  return census;
}

std::optional<size_t> FeatureMatrix::column_index(std::string_view name) const {
  for (size_t j = 0; j < names.size(); ++j)
    if (names[j] == name) return j;
  return std::nullopt;
}

void FeatureMatrix::validate() const {
  const size_t n = n_rows(), p = n_cols();
  if (values.size() != n * p || missing.size() != n * p)
    throw InternalError("feature matrix: shape mismatch");
  for (size_t j = 0; j < p; ++j)
    for (size_t k = j + 1; k < p; ++k)
      if (names[j] == names[k])
        throw ValidationError("duplicate predictor name '" + names[j] + "'");
  for (size_t i = 1; i < n; ++i)
    if (cell_ids[i] <= cell_ids[i - 1])
      throw InternalError("feature matrix: cell ids not ascending");
  for (size_t k = 0; k < values.size(); ++k)
    if (std::isnan(values[k]) != (missing[k] != 0))
      throw InternalError("feature matrix: NaN without mask bit");
}

// ---------------------------------------------------------------------------
// kernels

double seasonal_sd(std::span<const double> values,
                   std::span<const uint8_t> months) {
  if (values.size() != months.size())
    throw ValidationError("seasonal sd: value/month length mismatch");
  std::array<CompensatedSum, 12> sums;
  std::array<size_t, 12> counts{};
  bool constant = !values.empty();
  for (size_t i = 0; i < values.size(); ++i) {
    if (is_missing(values[i]))
      throw ValidationError("seasonal sd: missing sample");
    constant = constant && (values[i] == values.front());
    sums[months[i]].add(values[i]);
    ++counts[months[i]];
  }
  std::array<double, 12> monthly{};
  for (int m = 0; m < 12; ++m) {
    if (counts[m] == 0)
      throw ValidationError("seasonal sd: calendar month " +
                            std::to_string(m + 1) + " absent");
    monthly[m] = sums[m].value() / static_cast<double>(counts[m]);
  }
  if (constant) return 0.0;  // monthly means of a flat series can drift by ulps
  return sample_sd(monthly);
}

double gradient_exceedance(std::span<const double> values,
                           const FeatureSpec& spec) {
  spec.validate();
  if (spec.kind != StatKind::grad)
    throw ValidationError("gradient exceedance needs a grad spec");
  const auto s = static_cast<size_t>(spec.step);
  if (values.size() < s + 1)
    throw ValidationError("series too short for step " +
                          std::to_string(spec.step));
  const double thr = grad_threshold(spec);
  size_t valid = 0, hits = 0;
  for (size_t t = 0; t + s < values.size(); ++t) {
    const double a = values[t];
    const double b = values[t + s];
    if (is_missing(a) || is_missing(b)) continue;
    ++valid;
    const double d = b - a;
    if (spec.sign > 0 ? (d >= thr) : (d <= -thr)) ++hits;
  }
  if (valid == 0)
    throw ValidationError("no valid sample pairs for gradient step " +
                          std::to_string(spec.step));
  return static_cast<double>(hits) / static_cast<double>(valid);
}

VariableSeries daily_excursion(const VariableSeries& tmin,
                               const VariableSeries& tmax) {
  if (tmin.cadence != Cadence::six_hourly || tmax.cadence != Cadence::six_hourly)
    throw ValidationError("daily excursion expects six-hourly inputs");
  if (tmin.t0 != tmax.t0 || tmin.n_steps != tmax.n_steps ||
      tmin.cell_ids != tmax.cell_ids)
    throw ValidationError("daily excursion: TMIN/TMAX series are misaligned");

  const int64_t day0 = day_index(tmin.t0);
  const int64_t day_last = day_index(tmin.timestamp(tmin.n_steps - 1));
  const auto n_days = static_cast<size_t>(day_last - day0 + 1);
  const size_t per_day = 86400 / static_cast<size_t>(cadence_seconds(tmin.cadence));

  VariableSeries dt;
  dt.var = VarId::DT;
  dt.cadence = Cadence::daily;
  dt.cell_ids = tmin.cell_ids;
  dt.t0 = day0 * 86400;
  dt.n_steps = n_days;
  dt.values.assign(tmin.n_cells() * n_days, kQnan);

  parallel_for(0, tmin.n_cells(), [&](size_t c) {
    const auto lo = tmin.cell_row(c);
    const auto hi = tmax.cell_row(c);
    double* out = dt.values.data() + c * n_days;
    size_t step = 0;
    for (size_t d = 0; d < n_days; ++d) {
      double mn = kQnan, mx = kQnan;
      size_t expected = 0, missing = 0;
      const int64_t day = day0 + static_cast<int64_t>(d);
      while (step < tmin.n_steps && day_index(tmin.timestamp(step)) == day) {
        ++expected;
        if (is_missing(lo[step]))
          ++missing;
        else if (is_missing(mn) || lo[step] < mn)
          mn = lo[step];
        if (is_missing(hi[step]))
          ++missing;
        else if (is_missing(mx) || hi[step] > mx)
          mx = hi[step];
        ++step;
      }
      const double frac =
          expected == 0
              ? 1.0
              : static_cast<double>(missing) / static_cast<double>(2 * expected);
      // boundary days with partial coverage count as gaps too
      if (expected < per_day) {
        const size_t absent = 2 * (per_day - expected);
        const double total = static_cast<double>(2 * per_day);
        if ((static_cast<double>(missing + absent)) / total >
            kMissingFractionLimit) {
          out[d] = kQnan;
          continue;
        }
      } else if (frac > kMissingFractionLimit) {
        out[d] = kQnan;
        continue;
      }
      out[d] = (is_missing(mn) || is_missing(mx)) ? kQnan : mx - mn;
    }
  });
  dt.compute_months();
  dt.validate();
  return dt;
}

// ---------------------------------------------------------------------------
// engine

std::vector<std::vector<double>> derive_climate_columns(
    const VariableSeries& series, std::span<const ColumnSpec> var_specs) {
  for (const auto& spec : var_specs) {
    if (spec.source != ColumnSpec::Source::climate ||
        spec.climate.var != series.var)
      throw InternalError("column spec does not match series variable");
    if (spec.climate.kind == StatKind::grad &&
        default_cadence(spec.climate.var) != series.cadence)
      throw ValidationError("gradient spec cadence mismatch for " +
                            std::string(var_name(series.var)));
  }

  const size_t n = series.n_cells();
  std::vector<std::vector<double>> out(var_specs.size(),
                                       std::vector<double>(n, kQnan));

  bool need_summary = false, need_sd_s = false;
  for (const auto& s : var_specs) {
    const StatKind k = s.climate.kind;
    need_summary |= (k != StatKind::sd_s && k != StatKind::grad);
    need_sd_s |= (k == StatKind::sd_s);
  }

  parallel_for(0, n, [&](size_t c) {
    const auto row = series.cell_row(c);
    if (series.missing_fraction(c) > kMissingFractionLimit) return;  // masked

    std::vector<double> clean;
    std::vector<uint8_t> clean_month;
    clean.reserve(row.size());
    clean_month.reserve(row.size());
    for (size_t t = 0; t < row.size(); ++t) {
      if (is_missing(row[t])) continue;
      clean.push_back(row[t]);
      clean_month.push_back(series.month[t]);
    }

    SummaryStats stats{};
    if (need_summary) stats = summary_stats(clean);
    double sds = kQnan;
    if (need_sd_s) sds = seasonal_sd(clean, clean_month);

    for (size_t k = 0; k < var_specs.size(); ++k) {
      const auto& spec = var_specs[k].climate;
      double v = kQnan;
      switch (spec.kind) {
        case StatKind::mean: v = stats.mean; break;
        case StatKind::q1: v = stats.q1; break;
        case StatKind::median: v = stats.median; break;
        case StatKind::q3: v = stats.q3; break;
        case StatKind::sd: v = stats.sd; break;
        case StatKind::sd_s: v = sds; break;
        case StatKind::grad: v = gradient_exceedance(row, spec); break;
      }
      out[k][c] = v;
    }
  });
  return out;
}

FeatureMatrix build_feature_matrix(const CellTable& cells,
                                   const SeriesSet& series,
                                   std::span<const ColumnSpec> census) {
  if (census.empty()) throw ValidationError("empty predictor census");
  const size_t n = cells.size();

  FeatureMatrix m;
  m.cell_ids = cells.ids;
  m.values.assign(n * census.size(), kQnan);
  m.missing.assign(n * census.size(), 0);
  m.names.reserve(census.size());
  for (const auto& c : census) m.names.push_back(column_name(c));

  // group climate specs by variable so each series is scanned once
  std::array<std::vector<size_t>, 11> by_var;
  for (size_t j = 0; j < census.size(); ++j) {
    const auto& spec = census[j];
    if (spec.source == ColumnSpec::Source::geography) {
      const auto& src = cells.geo[static_cast<size_t>(spec.attr)];
      std::copy(src.begin(), src.end(), m.values.begin() + j * n);
    } else {
      by_var[static_cast<size_t>(spec.climate.var)].push_back(j);
    }
  }

  std::optional<VariableSeries> derived_dt;
  for (size_t v = 0; v < by_var.size(); ++v) {
    if (by_var[v].empty()) continue;
    const auto var = static_cast<VarId>(v);
    const VariableSeries* src = nullptr;
    if (var == VarId::DT) {
      if (auto it = series.find(VarId::DT); it != series.end()) {
        src = &it->second;
      } else {
        auto lo = series.find(VarId::TMIN);
        auto hi = series.find(VarId::TMAX);
        if (lo == series.end() || hi == series.end())
          throw ValidationError(
              "census needs DT but neither DT nor TMIN/TMAX series are loaded");
        derived_dt = daily_excursion(lo->second, hi->second);
        src = &*derived_dt;
      }
    } else {
      auto it = series.find(var);
      if (it == series.end())
        throw ValidationError("census references variable " +
                              std::string(var_name(var)) +
                              " but its series is not loaded");
      src = &it->second;
    }
    if (src->cell_ids != cells.ids)
      throw ValidationError("series " + std::string(var_name(var)) +
                            " does not cover the cell table");

    std::vector<ColumnSpec> specs;
    specs.reserve(by_var[v].size());
    for (size_t j : by_var[v]) specs.push_back(census[j]);
    const auto cols = derive_climate_columns(*src, specs);
    for (size_t k = 0; k < specs.size(); ++k)
      std::copy(cols[k].begin(), cols[k].end(),
                m.values.begin() + by_var[v][k] * n);
  }

  for (size_t k = 0; k < m.values.size(); ++k)
    m.missing[k] = std::isnan(m.values[k]) ? 1 : 0;
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// IO

void write_features_csv(const std::string& path, const FeatureMatrix& m) {
  CsvWriter w(path);
  std::string header = "cell_id";
  for (const auto& n : m.names) {
    if (n.find(',') != std::string::npos)
      throw ValidationError("predictor name contains a comma: '" + n + "'");
    header += "," + n;
  }
  w.write_raw_line(header);
  std::string line;
  for (size_t i = 0; i < m.n_rows(); ++i) {
    line = std::to_string(m.cell_ids[i]);
    for (size_t j = 0; j < m.n_cols(); ++j) {
      line += ",";
      line += format_double(m.values[j * m.n_rows() + i]);
    }
    w.write_raw_line(line);
  }
}

FeatureMatrix load_features_csv(const std::string& path) {
  const CsvFile csv = CsvFile::load(path);
  const size_t c_id = csv.column("cell_id");
  FeatureMatrix m;
  for (size_t c = 0; c < csv.n_cols(); ++c)
    if (c != c_id) m.names.push_back(csv.header()[c]);
  const size_t n = csv.n_rows();
  const size_t p = m.names.size();
  m.cell_ids.resize(n);
  m.values.resize(n * p);
  m.missing.assign(n * p, 0);
  for (size_t r = 0; r < n; ++r) {
    const auto row = csv.row(r);
    const size_t line = csv.line_number(r);
    m.cell_ids[r] = parse_int_field(row[c_id], line, "cell_id");
    size_t j = 0;
    for (size_t c = 0; c < csv.n_cols(); ++c) {
      if (c == c_id) continue;
      m.values[j * n + r] =
          parse_double_field(row[c], line, m.names[j], /*allow_empty=*/true);
      ++j;
    }
  }
  for (size_t k = 0; k < m.values.size(); ++k)
    m.missing[k] = std::isnan(m.values[k]) ? 1 : 0;
  m.validate();
  return m;
}

void save_features_geof(const std::string& path, const FeatureMatrix& m) {
  BinWriter w(path);
  w.bytes("GEOF", 4);
  w.pod<uint16_t>(1);
  w.pod<uint8_t>(kGeofKindMatrix);
  w.pod<uint8_t>(0);
  w.pod<uint32_t>(static_cast<uint32_t>(m.n_rows()));
  w.pod<uint32_t>(static_cast<uint32_t>(m.n_cols()));
  w.array<int64_t>(m.cell_ids);
  for (const auto& n : m.names) w.str(n);
  w.array<double>(m.values);  // already column-major
}

FeatureMatrix load_features_geof(const std::string& path) {
  BinReader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "GEOF", 4) != 0)
    throw ValidationError("'" + path + "': not a GEOF file");
  if (r.pod<uint16_t>() != 1)
    throw ValidationError("'" + path + "': unsupported GEOF version");
  if (r.pod<uint8_t>() != kGeofKindMatrix)
    throw ValidationError("'" + path + "': not a feature matrix container");
  r.pod<uint8_t>();
  const auto n = r.pod<uint32_t>();
  const auto p = r.pod<uint32_t>();
  FeatureMatrix m;
  m.cell_ids.resize(n);
  r.array<int64_t>(m.cell_ids);
  m.names.reserve(p);
  for (uint32_t j = 0; j < p; ++j) m.names.push_back(r.str());
  m.values.resize(static_cast<size_t>(n) * p);
  r.array<double>(m.values);
  m.missing.resize(m.values.size());
  for (size_t k = 0; k < m.values.size(); ++k)
    m.missing[k] = std::isnan(m.values[k]) ? 1 : 0;
  m.validate();
  return m;
}

FeatureMatrix load_features(const std::string& path) {
  return format_from_path(path) == TableFormat::binary
             ? load_features_geof(path)
             : load_features_csv(path);
}

}  // namespace geoecon
