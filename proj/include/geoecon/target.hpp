#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "geoecon/gridstore.hpp"

namespace geoecon {

enum class ExclusionReason : uint8_t {
  none = 0,
  gcp_below_1_usd,
  zero_population,
  missing_years,
  nonpositive_value,  // perturbed probe targets only
};
std::string_view reason_name(ExclusionReason r);

enum class Tercile : uint8_t { none = 0, bottom, middle, top };
std::string_view tercile_name(Tercile t);

// Per-cell log10 GCP per capita with an explicit inclusion mask. Excluded
// entries keep their reason; included entries are finite.
struct TargetVector {
  std::vector<int64_t> cell_ids;  // ascending
  std::vector<double> log_gcp_pc;  // NaN where excluded
  std::vector<ExclusionReason> reason;
  std::vector<Tercile> tercile;
  std::array<double, 2> thresholds{std::numeric_limits<double>::quiet_NaN(),
                                   std::numeric_limits<double>::quiet_NaN()};

  size_t size() const { return cell_ids.size(); }
  bool included(size_t i) const { return reason[i] == ExclusionReason::none; }
  size_t included_count() const;
  std::vector<size_t> included_indices() const;
  void validate() const;
};

// Per cell: gcp_pc for each configured year, target = log10(mean over years).
// Exclusions: records missing for any configured year; any-year gcp < 1 USD;
// any-year zero population.
TargetVector build_target(const EconomyTable& econ, std::span<const int> years);

// Empirical 1/3 and 2/3 thresholds; ties at a threshold go to the lower
// tercile. Needs at least 3 included cells.
TargetVector tercile_split(TargetVector t);

// Targets rebuilt from the per-cell yearly mean, mean+sd and mean-sd of
// gcp_pc (sd applied before the log). Cells where mean-sd <= 0 are excluded
// from the minus variant.
struct StationarityTargets {
  TargetVector mean;
  TargetVector plus;
  TargetVector minus;
};
StationarityTargets stationarity_probe(const EconomyTable& econ,
                                       std::span<const int> years);

void write_target_csv(const std::string& path, const TargetVector& t);
TargetVector load_target_csv(const std::string& path);

}  // namespace geoecon
