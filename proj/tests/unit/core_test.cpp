#include <doctest.h>

#include <cstdlib>

#include "ajtwin/core/config.hpp"
#include "ajtwin/core/error.hpp"
#include "ajtwin/core/params.hpp"
#include "ajtwin/core/units.hpp"
#include "support.hpp"

using namespace ajtwin;

TEST_CASE("display units convert to SI") {
  CHECK(to_si(1.0, "um") == 1e-6);
  CHECK(to_si(60.0, "sccm") == doctest::Approx(1e-6));
  CHECK(to_si(375.0, "mA") == doctest::Approx(0.375));
  CHECK(to_si(2.0, "mL") == doctest::Approx(2e-6));
  CHECK(from_si(to_si(23.0, "sccm"), "sccm") == doctest::Approx(23.0).epsilon(1e-15));
  CHECK(parse_unit("µm") == Unit::micrometre);
}

TEST_CASE("unknown unit tags are rejected") {
  CHECK_THROWS_AS(parse_unit("furlong"), Error);
  CHECK_THROWS_AS(to_si(1.0, "nm"), Error);
}

TEST_CASE("config lines split into key, value and unit") {
  const auto entries = parse_config("# header\nalpha = 1.5 um  # trailing\n\nbeta = 2\n");
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].key == "alpha");
  CHECK(entries[0].value == "1.5");
  CHECK(entries[0].unit == "um");
  CHECK(entries[0].line == 2);
  CHECK(entries[1].unit.empty());
}

TEST_CASE("config rejects malformed and duplicate lines") {
  CHECK_THROWS_AS(parse_config("no equals sign\n"), Error);
  CHECK_THROWS_AS(parse_config("a = 1\na = 2\n"), Error);
  CHECK_THROWS_AS(parse_config("= 3\n"), Error);
}

TEST_CASE("number formatting is shortest and exact") {
  for (double v : {0.1, 1.0 / 3.0, 4.57e9, -2e-5, 5804.0, 1e-300}) CHECK(parse_double(format_double(v)) == v);
  CHECK(format_double(0.1) == "0.1");
  CHECK_THROWS_AS(parse_double("1.0x"), Error);
  CHECK_THROWS_AS(parse_double(""), Error);
}

TEST_CASE("default bundle carries the published constants") {
  const auto p = default_parameters();
  CHECK(p.geometry.tube_length == 0.4572);
  CHECK(p.geometry.tube_radius == 7.89e-4);
  CHECK(p.geometry.droplet_density == 5804.0);
  CHECK(p.geometry.nozzle_tip[0] == 4.57e9);
  CHECK(p.geometry.nozzle_tip[7] == 18.67);
  CHECK(p.output.phi_m == 0.087);
  CHECK(p.noise.sigma_w(kLinewidth) == doctest::Approx(3e-6));
  CHECK(p.noise.sigma_w(kOverspray) == doctest::Approx(5e-6));
  CHECK(p.noise.sigma_xi(kDropletMedian) == doctest::Approx(0.1e-6));
  CHECK(p.geometry.slip_correction == 1.0);
  CHECK(validate_parameters(p).empty());
}

TEST_CASE("parameter bundle round-trips byte for byte") {
  const std::string text = format_parameters(default_parameters());
  const auto parsed = parse_parameters(text);
  CHECK(format_parameters(parsed) == text);
}

TEST_CASE("shipped default file equals the built-in defaults") {
  const std::string text = read_text_file(test::data_path("params/default.conf"));
  CHECK(text == format_parameters(default_parameters()));
}

TEST_CASE("parameter parsing converts display units") {
  const auto p = parse_parameters("geometry.nozzle_radius = 40 um\nnoise.output.L_w = 2 um\n");
  CHECK(p.geometry.nozzle_radius == doctest::Approx(40e-6));
  CHECK(p.noise.sigma_w(kLinewidth) == doctest::Approx(2e-6));
}

TEST_CASE("parameter parsing rejects bad input") {
  CHECK_THROWS_AS(parse_parameters("geometry.bogus = 1 m\n"), Error);
  CHECK_THROWS_AS(parse_parameters("geometry.nozzle_radius = 40 sccm\n"), Error);
  CHECK_THROWS_AS(parse_parameters("noise.output.L_w = -1 um\n"), Error);
  CHECK_THROWS_AS(parse_parameters("geometry.nozzle_radius = 40\n"), Error);
}

TEST_CASE("parameter path resolution honours the environment override") {
  const std::string path = test::data_path("params/default.conf");
  ::setenv("AJTWIN_PARAMS", "/nonexistent/params.conf", 1);
  CHECK_THROWS_AS(resolve_parameters(""), Error);
  CHECK(resolve_parameters(path).geometry.tube_length == 0.4572);
  ::unsetenv("AJTWIN_PARAMS");
  CHECK(resolve_parameters("").geometry.tube_length == 0.4572);
}
