#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "geoecon/error.hpp"
#include "geoecon/rng.hpp"
#include "geoecon/statistics.hpp"
#include "geoecon/target.hpp"

using namespace geoecon;

namespace {

const std::vector<int> kYears{1990, 1995, 2000, 2005};

EconomyTable table_for(const std::vector<std::pair<int64_t, std::vector<double>>>&
                           gcp_pc_per_cell,
                       double population = 10.0) {
  EconomyTable t;
  t.years = kYears;
  for (const auto& [id, pcs] : gcp_pc_per_cell)
    for (size_t k = 0; k < pcs.size(); ++k)
      t.records.push_back({id, kYears[k], pcs[k] * population, population});
  std::sort(t.records.begin(), t.records.end(),
            [](const EconomyRecord& a, const EconomyRecord& b) {
              return a.cell_id != b.cell_id ? a.cell_id < b.cell_id
                                            : a.year < b.year;
            });
  return t;
}

}  // namespace

TEST_CASE("build_target arithmetic and exclusions") {
  auto econ = table_for({{1, {5350, 5350, 5350, 5350}},
                         {2, {1000, 1000, 1000, 1000}}});
  // one sub-dollar gcp year excludes the cell
  econ.records.push_back({3, 1990, 0.5, 1.0});
  econ.records.push_back({3, 1995, 100, 1.0});
  econ.records.push_back({3, 2000, 100, 1.0});
  econ.records.push_back({3, 2005, 100, 1.0});
  // a zero-population year excludes the cell
  econ.records.push_back({4, 1990, 100, 0.0});
  econ.records.push_back({4, 1995, 100, 1.0});
  econ.records.push_back({4, 2000, 100, 1.0});
  econ.records.push_back({4, 2005, 100, 1.0});
  // missing years exclude the cell
  econ.records.push_back({5, 1990, 100, 1.0});
  std::sort(econ.records.begin(), econ.records.end(),
            [](const EconomyRecord& a, const EconomyRecord& b) {
              return a.cell_id != b.cell_id ? a.cell_id < b.cell_id
                                            : a.year < b.year;
            });

  const auto t = build_target(econ, kYears);
  REQUIRE(t.size() == 5);
  CHECK(t.log_gcp_pc[0] == doctest::Approx(3.728).epsilon(1e-3));
  CHECK(t.log_gcp_pc[0] == doctest::Approx(std::log10(5350.0)).epsilon(1e-12));
  CHECK(t.log_gcp_pc[1] == 3.0);  // log10(1000) exactly
  CHECK(t.reason[2] == ExclusionReason::gcp_below_1_usd);
  CHECK(t.reason[3] == ExclusionReason::zero_population);
  CHECK(t.reason[4] == ExclusionReason::missing_years);
  CHECK(t.included_count() == 2);
}

TEST_CASE("tercile split follows the interpolated thirds") {
  std::vector<std::pair<int64_t, std::vector<double>>> cells;
  for (int i = 1; i <= 9; ++i) {
    const double pc = std::pow(10.0, static_cast<double>(i));
    cells.push_back({i, {pc, pc, pc, pc}});
  }
  const auto t = tercile_split(build_target(table_for(cells), kYears));
  // values are exactly 1..9 in log10
  CHECK(t.thresholds[0] == doctest::Approx(11.0 / 3.0).epsilon(1e-12));
  CHECK(t.thresholds[1] == doctest::Approx(19.0 / 3.0).epsilon(1e-12));
  for (size_t i = 0; i < 9; ++i) {
    const Tercile expect = i < 3   ? Tercile::bottom
                           : i < 6 ? Tercile::middle
                                   : Tercile::top;
    CHECK(t.tercile[i] == expect);
  }
  // balanced counts
  int counts[4] = {};
  for (auto ter : t.tercile) counts[static_cast<int>(ter)]++;
  CHECK(counts[1] == 3);
  CHECK(counts[2] == 3);
  CHECK(counts[3] == 3);
}

TEST_CASE("degenerate terciles collapse to bottom") {
  std::vector<std::pair<int64_t, std::vector<double>>> cells;
  for (int i = 1; i <= 5; ++i) cells.push_back({i, {100, 100, 100, 100}});
  const auto t = tercile_split(build_target(table_for(cells), kYears));
  CHECK(t.thresholds[0] == t.thresholds[1]);
  for (size_t i = 0; i < 5; ++i) CHECK(t.tercile[i] == Tercile::bottom);
}

TEST_CASE("tercile split needs 3 included cells") {
  const auto t = build_target(table_for({{1, {10, 10, 10, 10}},
                                         {2, {20, 20, 20, 20}}}),
                              kYears);
  CHECK_THROWS_AS((void)tercile_split(t), ValidationError);
}

TEST_CASE("stationarity probe") {
  SUBCASE("constant years collapse all three targets") {
    const auto st =
        stationarity_probe(table_for({{1, {100, 100, 100, 100}}}), kYears);
    CHECK(st.mean.log_gcp_pc[0] == 2.0);
    CHECK(st.plus.log_gcp_pc[0] == 2.0);
    CHECK(st.minus.log_gcp_pc[0] == 2.0);
  }
  SUBCASE("alternating years shift by one sample sd") {
    const auto st =
        stationarity_probe(table_for({{1, {90, 110, 90, 110}}}), kYears);
    const double sd = std::sqrt(400.0 / 3.0);  // 11.547
    CHECK(sd == doctest::Approx(11.547).epsilon(1e-4));
    CHECK(st.mean.log_gcp_pc[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(st.plus.log_gcp_pc[0] ==
          doctest::Approx(std::log10(100.0 + sd)).epsilon(1e-12));
    CHECK(st.minus.log_gcp_pc[0] ==
          doctest::Approx(std::log10(100.0 - sd)).epsilon(1e-12));
  }
  SUBCASE("a cell whose minus variant goes nonpositive is excluded there") {
    const auto st =
        stationarity_probe(table_for({{1, {10, 1000, 10, 1000}}}), kYears);
    CHECK(st.mean.included(0));
    CHECK(st.plus.included(0));
    CHECK(st.minus.reason[0] == ExclusionReason::nonpositive_value);
  }
  SUBCASE("needs two years") {
    const std::vector<int> one{1990};
    EconomyTable t;
    t.years = one;
    t.records = {{1, 1990, 100, 1}};
    CHECK_THROWS_AS((void)stationarity_probe(t, one), ValidationError);
  }
}

TEST_CASE("scaling gcp by 10 shifts targets by one decade") {
  Rng rng(3);
  std::vector<std::pair<int64_t, std::vector<double>>> cells;
  for (int i = 1; i <= 30; ++i) {
    std::vector<double> pcs;
    for (int y = 0; y < 4; ++y) pcs.push_back(50 + 5000 * rng.unit());
    cells.push_back({i, pcs});
  }
  auto base = tercile_split(build_target(table_for(cells), kYears));
  for (auto& [id, pcs] : cells)
    for (auto& v : pcs) v *= 10.0;
  auto scaled = tercile_split(build_target(table_for(cells), kYears));
  for (size_t i = 0; i < base.size(); ++i) {
    CHECK(scaled.log_gcp_pc[i] ==
          doctest::Approx(base.log_gcp_pc[i] + 1.0).epsilon(1e-9));
    CHECK(scaled.tercile[i] == base.tercile[i]);
  }
}

TEST_CASE("tercile split is permutation-invariant and idempotent") {
  Rng rng(5);
  std::vector<std::pair<int64_t, std::vector<double>>> cells;
  for (int i = 1; i <= 40; ++i) {
    const double pc = 100 + 9000 * rng.unit();
    cells.push_back({i, {pc, pc, pc, pc}});
  }
  auto t1 = tercile_split(build_target(table_for(cells), kYears));
  // permuting input rows cannot matter: tables sort canonically on load,
  // so shuffle the cell list instead
  std::reverse(cells.begin(), cells.end());
  auto t2 = tercile_split(build_target(table_for(cells), kYears));
  CHECK(t1.thresholds == t2.thresholds);
  CHECK(t1.tercile == t2.tercile);
  auto t3 = tercile_split(t1);
  CHECK(t3.thresholds == t1.thresholds);
  CHECK(t3.tercile == t1.tercile);
}

TEST_CASE("target csv round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "geoecon_target";
  std::filesystem::create_directories(dir);
  auto t = tercile_split(build_target(
      table_for({{1, {100, 100, 100, 100}},
                 {2, {1000, 1000, 1000, 1000}},
                 {3, {10000, 10000, 10000, 10000}}}),
      kYears));
  const auto path = (dir / "target.csv").string();
  write_target_csv(path, t);
  const auto t2 = load_target_csv(path);
  CHECK(t2.cell_ids == t.cell_ids);
  CHECK(t2.log_gcp_pc == t.log_gcp_pc);
  CHECK(t2.tercile == t.tercile);
}
