#include <doctest.h>

#include "sage/deployment.hpp"
#include "sage/error.hpp"

using namespace sage;

TEST_CASE("selection cost") {
  CHECK(selection_flops(196, 96, 192) == 2ull * 96 * 96 * 192 + 196);
  CHECK(selection_flops(196, 96, 192) == 3539140ull);
}

TEST_CASE("uplink time") {
  CHECK(uplink_time(96, 250e3) == doctest::Approx(96.0 * 1536 * 8 / 250e3));
  CHECK(uplink_time(196, 50e6) == doctest::Approx(196.0 * 1536 * 8 / 50e6));
  CHECK_THROWS_AS(uplink_time(96, 0.0), Error);
}

TEST_CASE("latency components") {
  const ModelProfile m;
  const OperatingPoint p = total_latency(orin_nano(), nb_iot(), 96, m);
  CHECK(p.t_edge == doctest::Approx(1.3e9 / 5e12));
  CHECK(p.t_select == doctest::Approx(3539140.0 / 5e12));
  CHECK(p.t_uplink == doctest::Approx(4.718592));
  CHECK(p.t_server == doctest::Approx(17.6e9 / 8.1e12));
  CHECK(p.t_total == doctest::Approx(p.t_edge + p.t_select + p.t_uplink + p.t_server));
  CHECK(p.payload_bytes == 96 * 1536);

  // Full transmission runs no selection by default; `Always` charges it anyway.
  CHECK(total_latency(orin_nano(), wifi(), 196, m).t_select == 0.0);
  CHECK(total_latency(orin_nano(), wifi(), 196, m, SelectionCost::Always).t_select > 0.0);
  CHECK(total_latency(orin_nano(), wifi(), 96, m, SelectionCost::None).t_select == 0.0);

  DeviceProfile half = raspberry_pi5();
  half.efficiency = 0.5;
  CHECK(total_latency(half, wifi(), 32, m).t_edge == doctest::Approx(2.0 * 1.3e9 / 30e9));
}

TEST_CASE("invalid profiles") {
  const ModelProfile m;
  DeviceProfile d = orin_nano();
  d.efficiency = 0.0;
  try {
    total_latency(d, wifi(), 32, m);
    FAIL("expected InvalidProfile");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidProfile);
  }
  ChannelProfile c = wifi();
  c.uplink_rate = -1.0;
  CHECK_THROWS_AS(total_latency(orin_nano(), c, 32, m), Error);
}

TEST_CASE("default grid has 48 operating points in device, channel, budget order") {
  const auto d = default_devices();
  const auto c = default_channels();
  const auto b = default_latency_budgets();
  const auto rows = operating_point_grid(d, c, b, ModelProfile{});
  REQUIRE(rows.size() == 48);
  CHECK(rows.front().device == "orin-nano");
  CHECK(rows.front().channel == "nb-iot");
  CHECK(rows.front().budget == 32);
  CHECK(rows.back().device == "rpi5");
  CHECK(rows.back().channel == "wifi");
  CHECK(rows.back().budget == 196);
  // Uplink dominates on the slow channel, so latency grows with B there.
  for (std::size_t i = 1; i < 6; ++i) CHECK(rows[i].t_total > rows[i - 1].t_total);
}
