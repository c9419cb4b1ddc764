#include <doctest.h>

#include <cmath>
#include <string>

#include "ajtwin/core/error.hpp"
#include "ajtwin/core/params.hpp"
#include "ajtwin/core/units.hpp"
#include "ajtwin/io/table.hpp"
#include "ajtwin/sim/scenario.hpp"
#include "ajtwin/sim/simulator.hpp"
#include "support.hpp"

using namespace ajtwin;

namespace {

std::string header() {
  std::string h;
  for (const auto& c : series_columns()) h += (h.empty() ? "" : ",") + c;
  return h + "\n";
}

std::vector<TimeSeriesRecord> simulated(double duration) {
  Scenario s = load_scenario(test::data_path("scenarios/nominal.scn"));
  s.duration = duration;
  return simulate(s, default_parameters()).records();
}

}  // namespace

TEST_SUITE("tables") {
  TEST_CASE("simulated records survive a text round trip byte for byte") {
    const auto records = simulated(50.0);
    const std::string text = format_table(table_from_records(records));
    const auto back = records_from_table(parse_table(text));
    REQUIRE(back.size() == records.size());
    CHECK(format_table(table_from_records(back)) == text);
    for (std::size_t k = 0; k < records.size(); ++k) {
      CHECK(back[k].t == records[k].t);
      CHECK(back[k].observed.all());
      for (int i = 0; i < kOutputCount; ++i)
        CHECK(test::rel_diff(back[k].y.vector()(i), records[k].y.vector()(i)) < 1e-15);
      for (int i = 0; i < 3; ++i) CHECK(test::rel_diff(back[k].u.vector()(i), records[k].u.vector()(i)) < 1e-15);
    }
  }

  TEST_CASE("values are written in display units") {
    const std::string text = header() + "0,370,25,50,40,70,21900000,5800,1e-06\n";
    const auto records = records_from_table(parse_table(text));
    REQUIRE(records.size() == 1);
    CHECK(records[0].u.I_A() == doctest::Approx(0.37));
    CHECK(records[0].u.Q_c() == doctest::Approx(25.0 * units::sccm));
    CHECK(records[0].y.L_w() == doctest::Approx(40e-6));
    CHECK(records[0].y.Q_m() == doctest::Approx(1e-6 * units::sccm));
    CHECK(format_table(parse_table(text)) == text);
  }

  TEST_CASE("empty output cells are unobserved") {
    const std::string text = header() + "0,370,25,50,,70,21900000,,1e-06\n1,370,25,50,40,70,21900000,5800,1e-06\n";
    const auto records = records_from_table(parse_table(text));
    CHECK_FALSE(records[0].observed.test(kLinewidth));
    CHECK_FALSE(records[0].observed.test(kSheathPressure));
    CHECK(records[0].observed.count() == 3);
    CHECK(records[1].observed.all());
    CHECK(format_table(table_from_records(records)) == text);
  }

  TEST_CASE("inputs and time are mandatory") {
    CHECK_THROWS_AS(records_from_table(parse_table(header() + "0,,25,50,40,70,1,1,1\n")), Error);
    CHECK_THROWS_AS(records_from_table(parse_table(header() + ",370,25,50,40,70,1,1,1\n")), Error);
  }

  TEST_CASE("time must increase") {
    const std::string rows = "0,370,25,50,40,70,1,1,1\n0,370,25,50,40,70,1,1,1\n";
    CHECK_THROWS_AS(records_from_table(parse_table(header() + rows)), Error);
  }

  TEST_CASE("header mismatches name the offending column") {
    std::string bad = header();
    bad.replace(bad.find("L_w[um]"), 7, "L_w[m]");
    try {
      records_from_table(parse_table(bad + "0,370,25,50,40,70,1,1,1\n"));
      FAIL("expected a header error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("L_w") != std::string::npos);
    }
    CHECK_THROWS_AS(split_column("L_w"), Error);
    CHECK(split_column("L_w[um]") == std::pair<std::string, std::string>("L_w", "um"));
  }

  TEST_CASE("malformed rows are rejected") {
    CHECK_THROWS_AS(parse_table(header() + "0,370,25\n"), Error);
    CHECK_THROWS_AS(parse_table(header() + "0,370,25,50,40,70,1,1,abc\n"), Error);
  }

  TEST_CASE("belief bands are two standard deviations wide") {
    GaussianBelief b;
    b.mean = State(3e-6, 1e-6, 0.0, 0.0, 5e-7);
    b.covariance = Mat5::Zero();
    b.covariance(kDropletMedian, kDropletMedian) = 0.25e-12;
    const Table t = belief_table({0.0}, {b});
    const int mean = t.column("d_a");
    const int lo = t.column("d_a_lo");
    const int hi = t.column("d_a_hi");
    REQUIRE(mean >= 0);
    REQUIRE(lo >= 0);
    REQUIRE(hi >= 0);
    CHECK(*t.rows[0][static_cast<std::size_t>(mean)] == doctest::Approx(3.0));
    CHECK(*t.rows[0][static_cast<std::size_t>(lo)] == doctest::Approx(2.0));
    CHECK(*t.rows[0][static_cast<std::size_t>(hi)] == doctest::Approx(4.0));
  }

  TEST_CASE("state table columns") {
    const Table t = state_table({0.0, 1.0}, {State(3e-6, 1e-6, 0.0, 0.0, 5e-7), State(3e-6, 1e-6, 1e-7, 0.0, 5e-7)});
    CHECK(t.columns == state_columns());
    CHECK(t.columns.size() == 6);
    REQUIRE(t.column("dr_tube") >= 0);
    CHECK(t.column("dr_tube[um]") == t.column("dr_tube"));
    CHECK(t.rows.size() == 2);
    CHECK(*t.rows[1][static_cast<std::size_t>(t.column("dr_tube"))] == doctest::Approx(0.1));
  }
}
