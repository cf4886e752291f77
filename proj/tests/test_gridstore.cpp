#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "geoecon/error.hpp"
#include "geoecon/gridstore.hpp"
#include "geoecon/rng.hpp"
#include "geoecon/timeutil.hpp"

#include <cstring>

using namespace geoecon;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
  const auto d = fs::temp_directory_path() / "geoecon_gridstore_test";
  fs::create_directories(d);
  return d;
}

std::string cells_header() {
  return "cell_id,lat,lon,elevation_m,dist_coast1_km,dist_coast2_km,"
         "dist_lake_km,dist_major_river_km,dist_river_km,dist_ocean_km,"
         "vegetation_cat,soil_cat";
}

std::string cell_row(int64_t id, double lat, double lon, int veg = 3,
                     int soil = 40) {
  return std::to_string(id) + "," + std::to_string(lat) + "," +
         std::to_string(lon) + ",120,10,20,30,40,50,60," +
         std::to_string(veg) + "," + std::to_string(soil);
}

}  // namespace

TEST_CASE("cell table ingestion") {
  const auto dir = tmp_dir();
  const auto path = (dir / "cells.csv").string();
  {
    std::ofstream f(path);
    f << cells_header() << "\n"
      << cell_row(42, 0.5, -10.5) << "\n"
      << cell_row(7, -3.5, 20.5) << "\n"
      << cell_row(100, 44.5, 100.5) << "\n";
  }
  const auto t = load_cells(path, TableFormat::csv);
  CHECK(t.size() == 3);
  // canonical sort by cell id
  CHECK(t.ids == std::vector<int64_t>{7, 42, 100});
  CHECK(t.lat[1] == 0.5);
  CHECK(t.geo[static_cast<int>(GeoAttr::latitude)][1] == 0.5);
  CHECK(t.geo[static_cast<int>(GeoAttr::dist_major_river)][0] == 40.0);

  SUBCASE("duplicate cell id") {
    std::ofstream f(path);
    f << cells_header() << "\n"
      << cell_row(42, 0.5, -10.5) << "\n"
      << cell_row(42, 1.5, -10.5) << "\n";
    f.close();
    CHECK_THROWS_WITH_AS((void)load_cells(path, TableFormat::csv),
                         "duplicate cell 42", ValidationError);
  }
  SUBCASE("soil category out of range") {
    std::ofstream f(path);
    f << cells_header() << "\n" << cell_row(1, 0.5, 0.5, 3, 251) << "\n";
    f.close();
    CHECK_THROWS_AS((void)load_cells(path, TableFormat::csv), ValidationError);
  }
  SUBCASE("off-lattice center") {
    std::ofstream f(path);
    f << cells_header() << "\n" << cell_row(1, 0.25, 0.5) << "\n";
    f.close();
    CHECK_THROWS_AS((void)load_cells(path, TableFormat::csv), ValidationError);
  }
  SUBCASE("malformed number names line and column") {
    std::ofstream f(path);
    f << cells_header() << "\n"
      << "1,0.5,0.5,oops,10,20,30,40,50,60,3,40\n";
    f.close();
    try {
      (void)load_cells(path, TableFormat::csv);
      FAIL("expected error");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("line 2") != std::string::npos);
      CHECK(msg.find("elevation_m") != std::string::npos);
    }
  }
}

TEST_CASE("economy ingestion") {
  const auto dir = tmp_dir();
  const auto path = (dir / "econ.csv").string();
  const std::vector<int> years{1990, 1995, 2000, 2005};
  {
    std::ofstream f(path);
    f << "cell_id,year,gcp_usd,population\n";
    for (int y : years) f << "5," << y << ",1000,10\n";
  }
  const auto t = load_economy(path, years, TableFormat::csv);
  CHECK(t.size() == 4);
  CHECK(t.distinct_cells() == 1);

  SUBCASE("negative population") {
    std::ofstream f(path);
    f << "cell_id,year,gcp_usd,population\n5,1990,1000,-5\n";
    f.close();
    CHECK_THROWS_AS((void)load_economy(path, years, TableFormat::csv),
                    ValidationError);
  }
  SUBCASE("two cells, four years each") {
    std::ofstream f(path);
    f << "cell_id,year,gcp_usd,population\n";
    for (int64_t id : {9, 4})
      for (int y : years) f << id << "," << y << ",500,5\n";
    f.close();
    const auto t2 = load_economy(path, years, TableFormat::csv);
    CHECK(t2.size() == 8);
    CHECK(t2.distinct_cells() == 2);
  }
  SUBCASE("rows outside the year list are dropped") {
    std::ofstream f(path);
    f << "cell_id,year,gcp_usd,population\n5,1993,10,1\n5,1990,10,1\n";
    f.close();
    CHECK(load_economy(path, years, TableFormat::csv).size() == 1);
  }
}

TEST_CASE("series ingestion") {
  const auto dir = tmp_dir();
  const auto path = (dir / "series.csv").string();
  {
    std::ofstream f(path);
    f << "timestamp,3,1,2\n";
    for (int d = 0; d < 10; ++d)
      f << "2001-01-" << (d < 9 ? "0" : "") << d + 1 << "," << d << ","
        << d * 2 << "," << d * 3 << "\n";
  }
  const auto s = load_series(path, VarId::T2, Cadence::daily, TableFormat::csv);
  CHECK(s.n_steps == 10);
  CHECK(s.n_cells() == 3);
  CHECK(s.cell_ids == std::vector<int64_t>{1, 2, 3});
  // columns follow the sorted cell ids
  CHECK(s.cell_row(0)[4] == 8.0);   // cell 1 carried d*2
  CHECK(s.cell_row(2)[4] == 4.0);   // cell 3 carried d
  CHECK(s.month[0] == 0);

  SUBCASE("a gap breaks the cadence") {
    std::ofstream f(path);
    f << "timestamp,1\n2001-01-01,1\n2001-01-02,2\n2001-01-04,3\n";
    f.close();
    try {
      (void)load_series(path, VarId::T2, Cadence::daily, TableFormat::csv);
      FAIL("expected error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("non-uniform cadence") !=
            std::string::npos);
    }
  }
  SUBCASE("six-hourly spacing accepted") {
    std::ofstream f(path);
    f << "timestamp,1\n";
    for (int k = 0; k < 8; ++k)
      f << format_iso8601(11323 * 86400 + k * 21600) << "," << k << "\n";
    f.close();
    const auto s6 =
        load_series(path, VarId::MSLP, Cadence::six_hourly, TableFormat::csv);
    CHECK(s6.n_steps == 8);
  }
  SUBCASE("missing samples are sentinel-flagged") {
    std::ofstream f(path);
    f << "timestamp,1\n2001-01-01,\n2001-01-02,2\n";
    f.close();
    const auto sm = load_series(path, VarId::T2, Cadence::daily, TableFormat::csv);
    CHECK(is_missing(sm.values[0]));
    CHECK(sm.missing_fraction(0) == doctest::Approx(0.5));
  }
  SUBCASE("expected-cell check lists the missing ones") {
    const std::vector<int64_t> expected{1, 2, 3, 9};
    try {
      require_cells(s, expected);
      FAIL("expected error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("9") != std::string::npos);
    }
  }
}

TEST_CASE("binary round trip is bit-exact") {
  const auto dir = tmp_dir();
  Rng rng(11);

  CellTable cells;
  for (int i = 0; i < 5; ++i) {
    cells.ids.push_back(i * 17);
    cells.lat.push_back(-10.5 + i);
    cells.lon.push_back(30.5 + i);
  }
  for (int a = 0; a < kGeoAttrCount; ++a)
    for (int i = 0; i < 5; ++i)
      cells.geo[a].push_back(a == 0 ? cells.lat[i]
                             : a >= 8 ? static_cast<double>(i)
                                      : rng.unit() * 100);
  const auto cpath = (dir / "cells.geof").string();
  save_cells_geof(cpath, cells);
  const auto cells2 = load_cells_geof(cpath);
  CHECK(cells2.ids == cells.ids);
  CHECK(std::memcmp(cells2.lat.data(), cells.lat.data(), 5 * 8) == 0);
  for (int a = 0; a < kGeoAttrCount; ++a)
    CHECK(std::memcmp(cells2.geo[a].data(), cells.geo[a].data(), 5 * 8) == 0);

  VariableSeries s;
  s.var = VarId::TP;
  s.cadence = Cadence::daily;
  s.cell_ids = {1, 2};
  s.t0 = 11323 * 86400;
  s.n_steps = 40;
  s.values.resize(80);
  for (auto& v : s.values) v = rng.normal() * 1e3;
  s.values[7] = std::numeric_limits<double>::quiet_NaN();
  s.compute_months();
  const auto spath = (dir / "s.geof").string();
  save_series_geof(spath, s);
  const auto s2 = load_series_geof(spath);
  CHECK(s2.t0 == s.t0);
  CHECK(s2.cadence == s.cadence);
  CHECK(std::memcmp(s2.values.data(), s.values.data(), 80 * 8) == 0);

  EconomyTable econ;
  econ.years = {1990, 1995};
  econ.records = {{1, 1990, 5.5, 2.0}, {1, 1995, 6.5, 3.0}, {2, 1990, 0.25, 1.0}};
  const auto epath = (dir / "e.geof").string();
  save_economy_geof(epath, econ);
  const auto econ2 = load_economy_geof(epath);
  REQUIRE(econ2.size() == 3);
  CHECK(econ2.records[2].gcp_usd == 0.25);
  CHECK(econ2.years == econ.years);
}

TEST_CASE("ingestion is order-insensitive") {
  const auto dir = tmp_dir();
  const auto a = (dir / "a.csv").string();
  const auto b = (dir / "b.csv").string();
  {
    std::ofstream f(a);
    f << cells_header() << "\n"
      << cell_row(1, 0.5, 0.5) << "\n"
      << cell_row(2, 1.5, 0.5) << "\n"
      << cell_row(3, 2.5, 0.5) << "\n";
  }
  {
    std::ofstream f(b);
    f << cells_header() << "\n"
      << cell_row(3, 2.5, 0.5) << "\n"
      << cell_row(1, 0.5, 0.5) << "\n"
      << cell_row(2, 1.5, 0.5) << "\n";
  }
  const auto ta = load_cells(a, TableFormat::csv);
  const auto tb = load_cells(b, TableFormat::csv);
  CHECK(ta.ids == tb.ids);
  CHECK(ta.lat == tb.lat);
  for (int g = 0; g < kGeoAttrCount; ++g) CHECK(ta.geo[g] == tb.geo[g]);
}
