#include "geoecon/target.hpp"

#include <algorithm>
#include <cmath>

#include "geoecon/csvio.hpp"
#include "geoecon/error.hpp"
#include "geoecon/statistics.hpp"

namespace geoecon {

namespace {

constexpr double kQnan = std::numeric_limits<double>::quiet_NaN();

struct CellYears {
  int64_t cell_id;
  std::vector<double> gcp;
  std::vector<double> pop;
};

// records grouped per cell, values ordered by the configured year list
std::vector<CellYears> group_by_cell(const EconomyTable& econ,
                                     std::span<const int> years) {
  std::vector<int> sorted_years(years.begin(), years.end());
  std::sort(sorted_years.begin(), sorted_years.end());
  std::vector<CellYears> out;
  size_t i = 0;
  while (i < econ.records.size()) {
    size_t j = i;
    while (j < econ.records.size() &&
           econ.records[j].cell_id == econ.records[i].cell_id)
      ++j;
    CellYears cy;
    cy.cell_id = econ.records[i].cell_id;
    for (int y : sorted_years) {
      for (size_t k = i; k < j; ++k) {
        if (econ.records[k].year == y) {
          cy.gcp.push_back(econ.records[k].gcp_usd);
          cy.pop.push_back(econ.records[k].population);
          break;
        }
      }
    }
    cy.gcp.shrink_to_fit();
    out.push_back(std::move(cy));
    i = j;
  }
  return out;
}

ExclusionReason base_exclusion(const CellYears& cy, size_t n_years) {
  if (cy.gcp.size() != n_years) return ExclusionReason::missing_years;
  for (double g : cy.gcp)
    if (g < 1.0) return ExclusionReason::gcp_below_1_usd;
  for (double p : cy.pop)
    if (p == 0.0) return ExclusionReason::zero_population;
  return ExclusionReason::none;
}

TargetVector from_values(std::vector<int64_t> ids, std::vector<double> value,
                         std::vector<ExclusionReason> reason) {
  TargetVector t;
  t.cell_ids = std::move(ids);
  t.log_gcp_pc = std::move(value);
  t.reason = std::move(reason);
  t.tercile.assign(t.cell_ids.size(), Tercile::none);
  return t;
}

}  // namespace

std::string_view reason_name(ExclusionReason r) {
  switch (r) {
    case ExclusionReason::none: return "";
    case ExclusionReason::gcp_below_1_usd: return "gcp_below_1_usd";
    case ExclusionReason::zero_population: return "zero_population";
    case ExclusionReason::missing_years: return "missing_years";
    case ExclusionReason::nonpositive_value: return "nonpositive_value";
  }
  return "";
}

std::string_view tercile_name(Tercile t) {
  switch (t) {
    case Tercile::none: return "";
    case Tercile::bottom: return "bottom";
    case Tercile::middle: return "middle";
    case Tercile::top: return "top";
  }
  return "";
}

size_t TargetVector::included_count() const {
  size_t n = 0;
  for (auto r : reason) n += (r == ExclusionReason::none) ? 1 : 0;
  return n;
}

std::vector<size_t> TargetVector::included_indices() const {
  std::vector<size_t> out;
  out.reserve(size());
  for (size_t i = 0; i < size(); ++i)
    if (included(i)) out.push_back(i);
  return out;
}

void TargetVector::validate() const {
  const size_t n = size();
  if (log_gcp_pc.size() != n || reason.size() != n || tercile.size() != n)
    throw InternalError("target: column sizes differ");
  for (size_t i = 0; i < n; ++i) {
    if (i > 0 && cell_ids[i] <= cell_ids[i - 1])
      throw InternalError("target: cell ids not strictly ascending");
    if (included(i) && !std::isfinite(log_gcp_pc[i]))
      throw InternalError("target: non-finite value on included cell " +
                          std::to_string(cell_ids[i]));
  }
}

TargetVector build_target(const EconomyTable& econ, std::span<const int> years) {
  if (years.empty()) throw ValidationError("empty year list");
  const auto groups = group_by_cell(econ, years);

  std::vector<int64_t> ids;
  std::vector<double> value;
  std::vector<ExclusionReason> reason;
  ids.reserve(groups.size());
  for (const auto& cy : groups) {
    ids.push_back(cy.cell_id);
    const ExclusionReason r = base_exclusion(cy, years.size());
    reason.push_back(r);
    if (r != ExclusionReason::none) {
      value.push_back(kQnan);
      continue;
    }
    CompensatedSum s;
    for (size_t k = 0; k < cy.gcp.size(); ++k) s.add(cy.gcp[k] / cy.pop[k]);
    value.push_back(
        std::log10(s.value() / static_cast<double>(cy.gcp.size())));
  }
  TargetVector t = from_values(std::move(ids), std::move(value), std::move(reason));
  t.validate();
  return t;
}

TargetVector tercile_split(TargetVector t) {
  std::vector<double> incl;
  incl.reserve(t.size());
  for (size_t i = 0; i < t.size(); ++i)
    if (t.included(i)) incl.push_back(t.log_gcp_pc[i]);
  if (incl.size() < 3)
    throw ValidationError("tercile split needs at least 3 included cells, have " +
                          std::to_string(incl.size()));
  std::sort(incl.begin(), incl.end());
  const double t1 = quantile_sorted(incl, 1.0 / 3.0);
  const double t2 = quantile_sorted(incl, 2.0 / 3.0);
  t.thresholds = {t1, t2};
  for (size_t i = 0; i < t.size(); ++i) {
    if (!t.included(i)) {
      t.tercile[i] = Tercile::none;
      continue;
    }
    const double v = t.log_gcp_pc[i];
    t.tercile[i] = v <= t1 ? Tercile::bottom
                           : (v <= t2 ? Tercile::middle : Tercile::top);
  }
  return t;
}

StationarityTargets stationarity_probe(const EconomyTable& econ,
                                       std::span<const int> years) {
  if (years.size() < 2)
    throw ValidationError("stationarity probe: >=2 years required");
  const auto groups = group_by_cell(econ, years);

  std::vector<int64_t> ids;
  std::vector<double> v_mean, v_plus, v_minus;
  std::vector<ExclusionReason> r_base, r_minus;
  for (const auto& cy : groups) {
    ids.push_back(cy.cell_id);
    ExclusionReason r = base_exclusion(cy, years.size());
    r_base.push_back(r);
    if (r != ExclusionReason::none) {
      v_mean.push_back(kQnan);
      v_plus.push_back(kQnan);
      v_minus.push_back(kQnan);
      r_minus.push_back(r);
      continue;
    }
    std::vector<double> pc(cy.gcp.size());
    for (size_t k = 0; k < pc.size(); ++k) pc[k] = cy.gcp[k] / cy.pop[k];
    const double m = mean(pc);
    const double s = sample_sd(pc);
    v_mean.push_back(std::log10(m));
    v_plus.push_back(std::log10(m + s));
    if (m - s <= 0.0) {
      v_minus.push_back(kQnan);
      r_minus.push_back(ExclusionReason::nonpositive_value);
    } else {
      v_minus.push_back(std::log10(m - s));
      r_minus.push_back(ExclusionReason::none);
    }
  }

  StationarityTargets out{
      from_values(ids, std::move(v_mean), r_base),
      from_values(ids, std::move(v_plus), r_base),
      from_values(std::move(ids), std::move(v_minus), std::move(r_minus))};
  out.mean.validate();
  out.plus.validate();
  out.minus.validate();
  return out;
}

void write_target_csv(const std::string& path, const TargetVector& t) {
  CsvWriter w(path);
  w.write_raw_line("cell_id,log_gcp_pc,mask,reason,tercile");
  std::string thr = "# tercile_thresholds";
  for (size_t i = 0; i < t.size(); ++i) {
    w.write_raw_line(std::to_string(t.cell_ids[i]) + "," +
                     format_double(t.log_gcp_pc[i]) + "," +
                     (t.included(i) ? "included" : "excluded") + "," +
                     std::string(reason_name(t.reason[i])) + "," +
                     std::string(tercile_name(t.tercile[i])));
  }
}

TargetVector load_target_csv(const std::string& path) {
  const CsvFile csv = CsvFile::load(path);
  const size_t c_id = csv.column("cell_id");
  const size_t c_v = csv.column("log_gcp_pc");
  const size_t c_reason = csv.column("reason");
  const size_t c_ter = csv.column("tercile");

  TargetVector t;
  for (size_t r = 0; r < csv.n_rows(); ++r) {
    const auto row = csv.row(r);
    const size_t line = csv.line_number(r);
    t.cell_ids.push_back(parse_int_field(row[c_id], line, "cell_id"));
    t.log_gcp_pc.push_back(
        parse_double_field(row[c_v], line, "log_gcp_pc", true));
    const std::string_view rs = row[c_reason];
    ExclusionReason reason = ExclusionReason::none;
    for (auto cand :
         {ExclusionReason::gcp_below_1_usd, ExclusionReason::zero_population,
          ExclusionReason::missing_years, ExclusionReason::nonpositive_value})
      if (rs == reason_name(cand)) reason = cand;
    if (!rs.empty() && reason == ExclusionReason::none)
      throw ValidationError("line " + std::to_string(line) +
                            ": unknown exclusion reason '" + std::string(rs) +
                            "'");
    t.reason.push_back(reason);
    const std::string_view ts = row[c_ter];
    Tercile ter = Tercile::none;
    for (auto cand : {Tercile::bottom, Tercile::middle, Tercile::top})
      if (ts == tercile_name(cand)) ter = cand;
    t.tercile.push_back(ter);
  }
  t.validate();
  return t;
}

}  // namespace geoecon
