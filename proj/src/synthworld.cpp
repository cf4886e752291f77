#include "geoecon/synthworld.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "geoecon/error.hpp"
#include "geoecon/parallel.hpp"
#include "geoecon/rng.hpp"
#include "geoecon/statistics.hpp"
#include "geoecon/timeutil.hpp"

namespace geoecon {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kQnan = std::numeric_limits<double>::quiet_NaN();

constexpr uint64_t kCellTag = 0xce11;
constexpr uint64_t kGeoTag = 0x9e0;
constexpr uint64_t kVarParamTag = 0x9a2a31;
constexpr uint64_t kVarNoiseTag = 0x901583;
constexpr uint64_t kDayGapTag = 0xda79a9;
constexpr uint64_t kTargetTag = 0x7a29e7;
constexpr uint64_t kRegionTag = 0x2e9107;
constexpr uint64_t kEconTag = 0xec0;

int64_t series_t0(const WorldConfig& cfg) {
  return days_from_civil(cfg.series_start_year, 1, 1) * 86400;
}

size_t series_steps(const WorldConfig& cfg, Cadence cadence) {
  const int64_t days =
      days_from_civil(cfg.series_start_year + cfg.series_years, 1, 1) -
      days_from_civil(cfg.series_start_year, 1, 1);
  return static_cast<size_t>(cadence == Cadence::daily ? days : days * 4);
}

double angular_frequency(const WorldConfig& cfg, Cadence cadence) {
  const double span = static_cast<double>(series_steps(cfg, cadence)) *
                      static_cast<double>(cadence_seconds(cadence));
  return 2.0 * kPi * static_cast<double>(cfg.series_years) / span;
}

// per-calendar-month and whole-series means of the unit annual sine/cosine
struct SineBasis {
  std::array<double, 12> sin_mean{}, cos_mean{};
  std::array<int, 12> count{};
  double sin_all = 0, cos_all = 0;
  double inv_n_mean = 0;  // mean over months of 1 / count
};

SineBasis compute_sine_basis(const WorldConfig& cfg, Cadence cadence) {
  SineBasis b;
  const int64_t t0 = series_t0(cfg);
  const size_t n = series_steps(cfg, cadence);
  const int64_t step = cadence_seconds(cadence);
  const double omega = angular_frequency(cfg, cadence);
  std::array<CompensatedSum, 12> s_sum, c_sum;
  CompensatedSum s_all, c_all;
  for (size_t k = 0; k < n; ++k) {
    const double phase = omega * static_cast<double>(k * step);
    const int m = month_index(t0 + static_cast<int64_t>(k) * step);
    const double sv = std::sin(phase), cv = std::cos(phase);
    s_sum[m].add(sv);
    c_sum[m].add(cv);
    s_all.add(sv);
    c_all.add(cv);
    ++b.count[m];
  }
  for (int m = 0; m < 12; ++m) {
    b.sin_mean[m] = s_sum[m].value() / b.count[m];
    b.cos_mean[m] = c_sum[m].value() / b.count[m];
    b.inv_n_mean += 1.0 / b.count[m];
  }
  b.inv_n_mean /= 12.0;
  b.sin_all = s_all.value() / static_cast<double>(n);
  b.cos_all = c_all.value() / static_cast<double>(n);
  return b;
}

// sample sd over the 12 monthly means of sin(phase + cell phase)
double monthly_sine_sd(const SineBasis& b, double phase) {
  std::array<double, 12> m;
  for (int k = 0; k < 12; ++k)
    m[k] = std::cos(phase) * b.sin_mean[k] + std::sin(phase) * b.cos_mean[k];
  return sample_sd(m);
}

struct VarCellParams {
  double base = 0, amp = 0, noise_sd = 0, phase = 0;
  double gap = 0;  // TMIN/TMAX daily spread
};

double clamp01(double v) { return v < 0 ? 0 : (v > 1 ? 1 : v); }

const VarSynthSpec& spec_for(const WorldConfig& cfg, VarId var) {
  // TMIN/TMAX share the TMIN entry for their common core
  const VarId key = var == VarId::TMAX ? VarId::TMIN : var;
  auto it = cfg.climate.find(key);
  if (it == cfg.climate.end())
    throw ValidationError("no synthesis spec for variable " +
                          std::string(var_name(key)));
  return it->second;
}

VarCellParams cell_params(const WorldConfig& cfg, uint64_t seed, VarId var,
                          int64_t cell_id, double lat) {
  const VarId key = var == VarId::TMAX ? VarId::TMIN : var;
  const auto& vs = spec_for(cfg, key);
  Rng rng(derive_seed(seed, kVarParamTag + static_cast<uint64_t>(key),
                      static_cast<uint64_t>(cell_id)));
  const double latfrac = clamp01(std::abs(lat) / cfg.lat_limit);
  const double u_amp = rng.unit();
  const double u_base = rng.unit();
  const double u_noise = rng.unit();
  const double u_phase = rng.unit();
  const double u_gap = rng.unit();

  VarCellParams p;
  const double amp_mix =
      clamp01(vs.amp_lat_weight * latfrac + (1.0 - vs.amp_lat_weight) * u_amp);
  p.amp = vs.amp_lo + (vs.amp_hi - vs.amp_lo) * amp_mix;
  const double base_mix = clamp01(vs.base_lat_weight * latfrac +
                                  (1.0 - vs.base_lat_weight) * u_base);
  // latitude pushes the level toward base_lo (cold-pole convention)
  p.base = vs.base_hi - (vs.base_hi - vs.base_lo) * base_mix;
  p.noise_sd = vs.noise_lo + (vs.noise_hi - vs.noise_lo) * u_noise;
  p.phase = (lat < 0 ? kPi : 0.0) + (u_phase - 0.5) * 2.0 * vs.phase_jitter;
  p.gap = 4.0 + 8.0 * u_gap;
  return p;
}

double intended_mean(const VarCellParams& p, const VarSynthSpec& vs,
                     const SineBasis& b) {
  return p.base +
         p.amp * (std::cos(p.phase) * b.sin_all + std::sin(p.phase) * b.cos_all) +
         vs.shock_prob * vs.shock_height;
}

// the pulse process acts like extra white noise on the monthly means
double effective_noise_var(const VarCellParams& p, const VarSynthSpec& vs) {
  return p.noise_sd * p.noise_sd + vs.shock_height * vs.shock_height *
                                       vs.shock_prob * (1.0 - vs.shock_prob);
}

double intended_sd_s(const VarCellParams& p, const VarSynthSpec& vs,
                     const SineBasis& b) {
  const double signal = p.amp * monthly_sine_sd(b, p.phase);
  const double noise_var = effective_noise_var(p, vs) * b.inv_n_mean;
  return std::sqrt(signal * signal + noise_var);
}

std::vector<uint32_t> sample_indices(uint32_t n, uint32_t k, Rng& rng) {
  std::vector<uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  for (uint32_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<uint32_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace

DriverSpec parse_driver_spec(const std::string& text) {
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    const size_t colon = text.find(':', start);
    if (colon == std::string::npos) {
      parts.push_back(text.substr(start));
      break;
    }
    parts.push_back(text.substr(start, colon - start));
    start = colon + 1;
  }
  if (parts.size() < 3)
    throw ValidationError("driver spec '" + text +
                          "': need NAME:transform:weight");
  DriverSpec d;
  d.predictor = parts[0];
  const std::string& tr = parts[1];
  if (tr == "linear")
    d.transform = DriverTransform::linear;
  else if (tr == "quadratic")
    d.transform = DriverTransform::quadratic;
  else if (tr == "step")
    d.transform = DriverTransform::step;
  else if (tr == "interaction")
    d.transform = DriverTransform::interaction;
  else
    throw ValidationError("driver spec '" + text + "': unknown transform '" +
                          tr + "'");
  auto num = [&](size_t i, double dflt) {
    return i < parts.size() ? std::stod(parts[i]) : dflt;
  };
  d.weight = num(2, 0.0);
  d.center = num(3, 0.0);
  d.scale = num(4, 1.0);
  d.center_b = num(5, 0.0);
  d.scale_b = num(6, 1.0);
  if (d.transform == DriverTransform::interaction) {
    const size_t star = d.predictor.find('*');
    if (star == std::string::npos)
      throw ValidationError("interaction driver needs 'A*B' predictor names");
    d.predictor_b = d.predictor.substr(star + 1);
    d.predictor = d.predictor.substr(0, star);
  }
  return d;
}

std::string driver_spec_to_string(const DriverSpec& d) {
  const char* tr = d.transform == DriverTransform::linear      ? "linear"
                   : d.transform == DriverTransform::quadratic ? "quadratic"
                   : d.transform == DriverTransform::step      ? "step"
                                                               : "interaction";
  std::string name = d.predictor;
  if (d.transform == DriverTransform::interaction)
    name += "*" + d.predictor_b;
  return name + ":" + tr + ":" + std::to_string(d.weight) + ":" +
         std::to_string(d.center) + ":" + std::to_string(d.scale);
}

WorldConfig default_world() {
  WorldConfig cfg;
  cfg.drivers.push_back(
      {"Latitude", "", 1.0, DriverTransform::quadratic, 0.0, 60.0});
  cfg.drivers.push_back(
      {"MSLP SD S", "", 0.35, DriverTransform::quadratic, 3.2, 1.4});
  cfg.drivers.push_back(
      {"Dist Major River", "", -0.35, DriverTransform::step, 300.0, 1.0});

  // daily variables carry pulse processes (height 2.2x the gradient base) so
  // every exceedance column has real variation; their noise ceilings keep
  // noise-driven threshold crossings negligible against the pulse rate
  // modest latitude couplings: enough cross-correlation for proxy structure,
  // not enough for a linear model to recover the squared-latitude response
  auto& c = cfg.climate;
  c[VarId::MSLP] = {1008, 1018, 0.0, 1.0, 8.0, 0.20, 0.5, 6.0, 0, 0, 0};
  c[VarId::UV10] = {2, 10, 0.0, 0.5, 3.0, 0.0, 0.3, 2.0, 0, 0, 0};
  c[VarId::T2] = {-5, 28, 0.25, 3.0, 15.0, 0.15, 0.4, 1.2, 0.05, 11.0, 0};
  c[VarId::TMIN] = {-8, 25, 0.25, 3.0, 15.0, 0.15, 0.3, 0.8, 0, 0, 3.0};
  c[VarId::D2] = {-5, 22, 0.15, 2.0, 10.0, 0.0, 0.5, 1.5, 0.06, 15.4, 0};
  c[VarId::TP] = {1, 6, 0.0, 0.5, 3.0, 0.0, 0.2, 0.8, 0.12, 11.0, 0};
  c[VarId::RH] = {40, 80, 0.0, 5.0, 20.0, 0.0, 1.0, 5.0, 0.04, 44.0, 0};
  c[VarId::SR] = {150, 300, 0.0, 50.0, 150.0, 0.10, 5.0, 15.0, 0.08, 220.0, 0};
  c[VarId::SUND] = {4, 9, 0.0, 1.0, 4.0, 0.0, 0.2, 0.6, 0.05, 6.6, 0};
  return cfg;
}

CellTable generate_cells(const WorldConfig& cfg, uint64_t seed) {
  // candidate lattice: 1-degree centers within the latitude band
  std::vector<uint32_t> lat_rows;
  for (int i = 0; i < 180; ++i) {
    const double lat = -89.5 + i;
    if (std::abs(lat) <= cfg.lat_limit) lat_rows.push_back(i);
  }
  const auto n_band = static_cast<uint32_t>(lat_rows.size() * 360);
  if (cfg.n_cells > n_band)
    throw ValidationError("world: more cells than lattice points in band");

  Rng rng(derive_seed(seed, kCellTag));
  auto picks = sample_indices(n_band, static_cast<uint32_t>(cfg.n_cells), rng);
  std::vector<int64_t> ids(picks.size());
  for (size_t k = 0; k < picks.size(); ++k) {
    const uint32_t row = lat_rows[picks[k] / 360];
    const uint32_t col = picks[k] % 360;
    ids[k] = static_cast<int64_t>(row) * 360 + col;
  }
  std::sort(ids.begin(), ids.end());

  CellTable t;
  t.ids = ids;
  const size_t n = ids.size();
  t.lat.resize(n);
  t.lon.resize(n);
  for (auto& g : t.geo) g.resize(n);
  for (size_t k = 0; k < n; ++k) {
    const auto row = static_cast<int>(ids[k] / 360);
    const auto col = static_cast<int>(ids[k] % 360);
    t.lat[k] = -89.5 + row;
    t.lon[k] = -179.5 + col;
    Rng g(derive_seed(seed, kGeoTag, static_cast<uint64_t>(ids[k])));
    auto expo = [&](double mean) { return -mean * std::log1p(-g.unit()); };
    t.geo[static_cast<int>(GeoAttr::latitude)][k] = t.lat[k];
    t.geo[static_cast<int>(GeoAttr::elevation)][k] =
        std::abs(g.normal()) * 300.0 + 100.0 * g.unit();
    t.geo[static_cast<int>(GeoAttr::dist_coast1)][k] = expo(200);
    t.geo[static_cast<int>(GeoAttr::dist_coast2)][k] = expo(250);
    t.geo[static_cast<int>(GeoAttr::dist_lake)][k] = expo(350);
    t.geo[static_cast<int>(GeoAttr::dist_major_river)][k] = expo(400);
    t.geo[static_cast<int>(GeoAttr::dist_river)][k] = expo(150);
    t.geo[static_cast<int>(GeoAttr::dist_ocean)][k] = expo(300);
    t.geo[static_cast<int>(GeoAttr::vegetation)][k] =
        static_cast<double>(g.below(32));
    t.geo[static_cast<int>(GeoAttr::soil)][k] =
        static_cast<double>(g.below(251));
  }
  t.validate();
  return t;
}

VariableSeries synthesize_series(const WorldConfig& cfg, uint64_t seed,
                                 const CellTable& cells, VarId var) {
  if (var == VarId::DT)
    throw ValidationError("DT is derived from TMIN/TMAX, not synthesized");
  const auto& vs = spec_for(cfg, var);
  const Cadence cadence = default_cadence(var);
  const size_t n_steps = series_steps(cfg, cadence);
  const int64_t step = cadence_seconds(cadence);
  const double omega = angular_frequency(cfg, cadence);

  VariableSeries s;
  s.var = var;
  s.cadence = cadence;
  s.cell_ids = cells.ids;
  s.t0 = series_t0(cfg);
  s.n_steps = n_steps;
  s.values.resize(cells.size() * n_steps);

  std::vector<double> sin_t(n_steps), cos_t(n_steps);
  for (size_t k = 0; k < n_steps; ++k) {
    const double phase = omega * static_cast<double>(k * step);
    sin_t[k] = std::sin(phase);
    cos_t[k] = std::cos(phase);
  }
  // six-hourly samples land on hours 0/6/12/18
  constexpr std::array<double, 4> kDiurnal{0.0, 1.0, 0.0, -1.0};

  const bool tminmax = var == VarId::TMIN || var == VarId::TMAX;
  const size_t per_day = cadence == Cadence::six_hourly ? 4 : 1;

  parallel_for(0, cells.size(), [&](size_t c) {
    const auto p = cell_params(cfg, seed, var, cells.ids[c], cells.lat[c]);
    Rng noise(derive_seed(seed, kVarNoiseTag + static_cast<uint64_t>(var),
                          static_cast<uint64_t>(cells.ids[c])));
    double* out = s.values.data() + c * n_steps;
    const double cp = std::cos(p.phase), sp = std::sin(p.phase);

    // lognormal day-level widening of the TMIN/TMAX spread; both series draw
    // the same sequence so their excursion stays consistent
    std::vector<double> gap_mod;
    if (tminmax) {
      Rng day(derive_seed(seed, kDayGapTag, static_cast<uint64_t>(cells.ids[c])));
      gap_mod.resize(n_steps / per_day + 1);
      for (auto& m : gap_mod) m = std::exp(0.25 * day.normal());
    }
    const double gap_half = (var == VarId::TMAX   ? +p.gap / 2
                             : var == VarId::TMIN ? -p.gap / 2
                                                  : 0.0);
    for (size_t k = 0; k < n_steps; ++k) {
      double v = p.base + p.amp * (cp * sin_t[k] + sp * cos_t[k]);
      if (vs.diurnal_amp > 0 && cadence == Cadence::six_hourly)
        v += vs.diurnal_amp * kDiurnal[k % 4];
      if (tminmax)
        v += gap_half * gap_mod[k / per_day] +
             (var == VarId::TMAX ? +1.0 : -1.0) * std::abs(noise.normal()) *
                 p.noise_sd;
      else
        v += noise.normal() * p.noise_sd;
      if (vs.shock_prob > 0 && noise.unit() < vs.shock_prob)
        v += vs.shock_height;
      out[k] = v;
    }
  });
  s.compute_months();
  s.validate();
  return s;
}

namespace {

// intended value of one predictor column per cell, or an error when the
// synthesis parameters cannot pin it down
std::vector<double> intended_column(const WorldConfig& cfg, uint64_t seed,
                                    const CellTable& cells,
                                    const std::string& name) {
  const ColumnSpec spec = parse_column_name(name);
  const size_t n = cells.size();
  std::vector<double> out(n);
  if (spec.source == ColumnSpec::Source::geography) {
    const auto& col = cells.geo[static_cast<size_t>(spec.attr)];
    std::copy(col.begin(), col.end(), out.begin());
    return out;
  }
  const VarId var = spec.climate.var;
  if (var == VarId::DT)
    throw ValidationError("driver predictor underivable: '" + name + "'");
  const auto& vs = spec_for(cfg, var);
  const SineBasis basis = compute_sine_basis(cfg, default_cadence(var));
  switch (spec.climate.kind) {
    case StatKind::mean:
    case StatKind::sd_s:
      for (size_t c = 0; c < n; ++c) {
        const auto p = cell_params(cfg, seed, var, cells.ids[c], cells.lat[c]);
        out[c] = spec.climate.kind == StatKind::mean
                     ? intended_mean(p, vs, basis)
                     : intended_sd_s(p, vs, basis);
      }
      return out;
    case StatKind::grad: {
      if (vs.shock_prob <= 0)
        throw ValidationError("driver predictor underivable: '" + name +
                              "' (no shock process)");
      const double q = vs.shock_prob;
      std::fill(out.begin(), out.end(), q * (1.0 - q));
      return out;
    }
    default:
      throw ValidationError("driver predictor underivable: '" + name + "'");
  }
}

}  // namespace

GroundTruth make_ground_truth(const WorldConfig& cfg, uint64_t seed,
                              const CellTable& cells) {
  const size_t n = cells.size();
  GroundTruth truth;
  truth.target_clean.assign(n, cfg.base_level);
  truth.in_region.assign(n, 0);

  for (const auto& d : cfg.drivers) {
    auto x = intended_column(cfg, seed, cells, d.predictor);
    std::vector<double> xb;
    if (d.transform == DriverTransform::interaction)
      xb = intended_column(cfg, seed, cells, d.predictor_b);
    for (size_t c = 0; c < n; ++c) {
      const double u = (x[c] - d.center) / d.scale;
      double t = 0;
      switch (d.transform) {
        case DriverTransform::linear: t = u; break;
        case DriverTransform::quadratic: t = u * u; break;
        case DriverTransform::step: t = x[c] > d.center ? 1.0 : 0.0; break;
        case DriverTransform::interaction:
          t = u * ((xb[c] - d.center_b) / d.scale_b);
          break;
      }
      truth.target_clean[c] += d.weight * t;
    }
    truth.driver_names.push_back(d.predictor);
    truth.driver_value.push_back(std::move(x));
    if (d.transform == DriverTransform::interaction) {
      truth.driver_names.push_back(d.predictor_b);
      truth.driver_value.push_back(std::move(xb));
    }
  }

  if (cfg.offset.delta != 0.0 && cfg.offset.fraction > 0.0) {
    Rng rng(derive_seed(seed, kRegionTag));
    const auto k = static_cast<uint32_t>(
        std::floor(cfg.offset.fraction * static_cast<double>(n)));
    auto picks = sample_indices(static_cast<uint32_t>(n), k, rng);
    for (auto idx : picks) truth.in_region[idx] = 1;
  }

  // mixture noise scaled so the total sd equals noise_sd
  const double share = std::min(std::max(cfg.noise_tail_share, 0.0), 1.0);
  const double ratio = std::max(cfg.noise_tail_ratio, 1.0);
  const double core_sd =
      cfg.noise_sd / std::sqrt(1.0 - share + share * ratio * ratio);
  truth.target.resize(n);
  for (size_t c = 0; c < n; ++c) {
    Rng rng(derive_seed(seed, kTargetTag, static_cast<uint64_t>(cells.ids[c])));
    const double z = rng.normal();
    const double sd = rng.unit() < share ? core_sd * ratio : core_sd;
    truth.target[c] = truth.target_clean[c] + sd * z +
                      (truth.in_region[c] ? cfg.offset.delta : 0.0);
  }

  // feature checks this world can vouch for
  for (const auto& [var, vs] : cfg.climate) {
    if (var == VarId::TMIN || var == VarId::TMAX) continue;
    const SineBasis basis = compute_sine_basis(cfg, default_cadence(var));
    const auto n_samp =
        static_cast<double>(series_steps(cfg, default_cadence(var)));

    IntendedStat mean_stat, sds_stat;
    mean_stat.column = std::string(var_name(var)) + " Mean";
    sds_stat.column = std::string(var_name(var)) + " SD S";
    for (size_t c = 0; c < n; ++c) {
      const auto p = cell_params(cfg, seed, var, cells.ids[c], cells.lat[c]);
      const double eff_var = effective_noise_var(p, vs);
      mean_stat.value.push_back(intended_mean(p, vs, basis));
      mean_stat.tolerance.push_back(6.0 * std::sqrt(eff_var / n_samp) + 1e-9);
      const double signal = p.amp * monthly_sine_sd(basis, p.phase);
      const double v = eff_var * basis.inv_n_mean;  // variance on monthly means
      const double sds = std::sqrt(signal * signal + v);
      // sampling spread of the 12-month sample sd around its expectation
      const double fluct = std::sqrt(4.0 * signal * signal * v + 2.0 * v * v) /
                           (2.0 * std::sqrt(11.0) * std::max(sds, 1e-9));
      sds_stat.value.push_back(sds);
      sds_stat.tolerance.push_back(0.02 * sds + 5.0 * fluct + 1e-9);
    }
    truth.intended.push_back(std::move(mean_stat));
    truth.intended.push_back(std::move(sds_stat));

    if (vs.shock_prob > 0.0) {
      const double q = vs.shock_prob;
      const double freq = q * (1.0 - q);
      for (int sign : {+1, -1})
        for (int step = 1; step <= kMaxGradStep; ++step) {
          IntendedStat g;
          g.column = column_name(ColumnSpec::gradient(var, sign, step));
          const auto n_pairs = static_cast<double>(
              series_steps(cfg, default_cadence(var)) - step);
          g.value.assign(n, freq);
          g.tolerance.assign(
              n, 4.0 * std::sqrt(freq * (1.0 - freq) / n_pairs) + 0.005);
          truth.intended.push_back(std::move(g));
        }
    }
  }
  return truth;
}

EconomyTable make_economy(const WorldConfig& cfg, uint64_t seed,
                          const CellTable& cells, const GroundTruth& truth) {
  EconomyTable econ;
  econ.years = cfg.years;
  std::sort(econ.years.begin(), econ.years.end());
  econ.records.reserve(cells.size() * cfg.years.size());
  const size_t ny = econ.years.size();
  for (size_t c = 0; c < cells.size(); ++c) {
    Rng rng(derive_seed(seed, kEconTag, static_cast<uint64_t>(cells.ids[c])));
    const double pop =
        std::pow(10.0, rng.uniform(cfg.pop_log10_lo, cfg.pop_log10_hi));
    std::vector<double> f(ny, 1.0);
    if (cfg.yearly_jitter > 0) {
      double m = 0;
      for (auto& v : f) {
        v = std::exp(cfg.yearly_jitter * rng.normal());
        m += v;
      }
      m /= static_cast<double>(ny);
      for (auto& v : f) v /= m;  // mean of yearly gcp_pc equals 10^target
    }
    const double gcp_pc_mean = std::pow(10.0, truth.target[c]);
    for (size_t k = 0; k < ny; ++k) {
      EconomyRecord rec;
      rec.cell_id = cells.ids[c];
      rec.year = econ.years[k];
      rec.population = pop;
      rec.gcp_usd = gcp_pc_mean * f[k] * pop;
      econ.records.push_back(rec);
    }
  }
  econ.validate();
  return econ;
}

World generate(const WorldConfig& cfg, uint64_t seed) {
  World w;
  w.cells = generate_cells(cfg, seed);
  w.truth = make_ground_truth(cfg, seed, w.cells);
  w.economy = make_economy(cfg, seed, w.cells, w.truth);
  for (const auto& [var, vs] : cfg.climate) {
    w.series.emplace(var, synthesize_series(cfg, seed, w.cells, var));
    if (var == VarId::TMIN)
      w.series.emplace(VarId::TMAX,
                       synthesize_series(cfg, seed, w.cells, VarId::TMAX));
  }
  return w;
}

WorldFeatures generate_features(const WorldConfig& cfg, uint64_t seed,
                                std::span<const ColumnSpec> census) {
  WorldFeatures wf;
  wf.cells = generate_cells(cfg, seed);
  wf.truth = make_ground_truth(cfg, seed, wf.cells);
  wf.economy = make_economy(cfg, seed, wf.cells, wf.truth);

  const size_t n = wf.cells.size();
  FeatureMatrix& m = wf.features;
  m.cell_ids = wf.cells.ids;
  m.values.assign(n * census.size(), kQnan);
  m.missing.assign(n * census.size(), 0);
  for (const auto& c : census) m.names.push_back(column_name(c));

  std::array<std::vector<size_t>, 11> by_var;
  for (size_t j = 0; j < census.size(); ++j) {
    if (census[j].source == ColumnSpec::Source::geography) {
      const auto& src = wf.cells.geo[static_cast<size_t>(census[j].attr)];
      std::copy(src.begin(), src.end(), m.values.begin() + j * n);
    } else {
      by_var[static_cast<size_t>(census[j].climate.var)].push_back(j);
    }
  }

  // one variable in memory at a time
  for (size_t v = 0; v < by_var.size(); ++v) {
    if (by_var[v].empty()) continue;
    const auto var = static_cast<VarId>(v);
    VariableSeries series;
    if (var == VarId::DT) {
      const auto tmin = synthesize_series(cfg, seed, wf.cells, VarId::TMIN);
      const auto tmax = synthesize_series(cfg, seed, wf.cells, VarId::TMAX);
      series = daily_excursion(tmin, tmax);
    } else {
      series = synthesize_series(cfg, seed, wf.cells, var);
    }
    std::vector<ColumnSpec> specs;
    for (size_t j : by_var[v]) specs.push_back(census[j]);
    const auto cols = derive_climate_columns(series, specs);
    for (size_t k = 0; k < specs.size(); ++k)
      std::copy(cols[k].begin(), cols[k].end(),
                m.values.begin() + by_var[v][k] * n);
  }
  for (size_t k = 0; k < m.values.size(); ++k)
    m.missing[k] = std::isnan(m.values[k]) ? 1 : 0;
  m.validate();
  return wf;
}

OracleReport oracle_check(const GroundTruth& truth, const FeatureMatrix& m) {
  OracleReport report;
  for (const auto& stat : truth.intended) {
    const auto col = m.column_index(stat.column);
    if (!col) continue;  // census did not request this column
    const auto derived = m.column(*col);
    for (size_t c = 0; c < derived.size(); ++c) {
      ++report.n_checked;
      const bool ok = std::isfinite(derived[c]) &&
                      std::abs(derived[c] - stat.value[c]) <= stat.tolerance[c];
      if (!ok && report.failures.size() < 50)
        report.failures.push_back({stat.column, m.cell_ids[c], stat.value[c],
                                   derived[c], stat.tolerance[c]});
    }
  }
  return report;
}

}  // namespace geoecon
