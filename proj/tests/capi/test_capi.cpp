#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sage/sage.h"

namespace {

std::string tmp(const char* name) {
  return (std::filesystem::temp_directory_path() / (std::string("sage_capi_") + name)).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct World {
  sage_world* w = nullptr;
  World() {
    sage_world_params p;
    sage_world_params_default(&p);
    REQUIRE(sage_world_create(&p, &w) == SAGE_OK);
  }
  ~World() { sage_world_free(w); }
};

}  // namespace

TEST_CASE("status strings and last error") {
  CHECK(std::string(sage_status_string(SAGE_OK)) != "");
  CHECK(std::string(sage_version()) != "");
  sage_trace* t = nullptr;
  CHECK(sage_trace_load("/nonexistent/trace.sevd", &t) == SAGE_IO_ERROR);
  CHECK(t == nullptr);
  CHECK(std::string(sage_last_error_message()).find("trace.sevd") != std::string::npos);
  double bits = 0.0;
  CHECK(sage_uncertainty(0.0, &bits) == SAGE_DOMAIN_ERROR);
  CHECK(sage_uncertainty(0.25, &bits) == SAGE_OK);
  CHECK(bits == 2.0);
  CHECK(sage_uncertainty(0.5, nullptr) == SAGE_INVALID_ARGUMENT);
  sage_trace_free(nullptr);
  sage_world_free(nullptr);
  sage_sweep_free(nullptr);
}

TEST_CASE("world, trace and record round trip") {
  World world;
  sage_trace* t = nullptr;
  REQUIRE(sage_world_generate(world.w, 20, 100, &t) == SAGE_OK);
  sage_trace_info info;
  REQUIRE(sage_trace_info_get(t, &info) == SAGE_OK);
  CHECK(info.units == 196);
  CHECK(info.count == 20);
  CHECK(info.grid_h == 14);

  sage_record_view rv;
  REQUIRE(sage_trace_record(t, 3, &rv) == SAGE_OK);
  CHECK(rv.id == 103);
  CHECK(rv.has_server_full_pred == 1);
  double sum = 0.0;
  for (uint32_t i = 0; i < info.units; ++i) sum += rv.attention[i];
  CHECK(sum == doctest::Approx(1.0));
  CHECK(sage_trace_record(t, 20, &rv) == SAGE_INVALID_ARGUMENT);

  const std::string p1 = tmp("rt.sevd");
  const std::string p2 = tmp("rt2.sevd");
  REQUIRE(sage_trace_save(t, p1.c_str()) == SAGE_OK);
  sage_trace* back = nullptr;
  REQUIRE(sage_trace_load(p1.c_str(), &back) == SAGE_OK);
  REQUIRE(sage_trace_save(back, p2.c_str()) == SAGE_OK);
  CHECK(slurp(p1) == slurp(p2));

  const std::string txt = tmp("rt.jsonl");
  REQUIRE(sage_trace_save_text(t, txt.c_str()) == SAGE_OK);
  sage_trace* from_text = nullptr;
  REQUIRE(sage_trace_load(txt.c_str(), &from_text) == SAGE_OK);
  sage_record_view a, b;
  REQUIRE(sage_trace_record(t, 7, &a) == SAGE_OK);
  REQUIRE(sage_trace_record(from_text, 7, &b) == SAGE_OK);
  CHECK(std::memcmp(a.embeddings, b.embeddings, sizeof(float) * info.units * info.dim) == 0);

  const std::string wp = tmp("world.json");
  REQUIRE(sage_world_save(world.w, wp.c_str()) == SAGE_OK);
  sage_world* w2 = nullptr;
  REQUIRE(sage_world_load(wp.c_str(), &w2) == SAGE_OK);
  sage_world_params q;
  REQUIRE(sage_world_params_get(w2, &q) == SAGE_OK);
  CHECK(q.classes == 20);
  sage_world_free(w2);

  sage_trace_free(from_text);
  sage_trace_free(back);
  sage_trace_free(t);
}

TEST_CASE("invalid world parameters") {
  sage_world_params p;
  sage_world_params_default(&p);
  p.classes = 1;
  sage_world* w = nullptr;
  CHECK(sage_world_create(&p, &w) == SAGE_INVALID_PARAMS);
  CHECK(w == nullptr);
}

TEST_CASE("compose through the C API") {
  World world;
  sage_trace* t = nullptr;
  REQUIRE(sage_world_generate(world.w, 5, 0, &t) == SAGE_OK);
  sage_composer_config c;
  sage_composer_config_default(&c);
  c.budget = 12;
  std::vector<uint32_t> buf(12);
  size_t n = 0;
  REQUIRE(sage_compose(t, 0, &c, buf.data(), buf.size(), &n) == SAGE_OK);
  CHECK(n == 12);
  uint32_t cls = 0;
  CHECK(sage_server_emulate(world.w, t, 0, buf.data(), n, &cls) == SAGE_OK);
  CHECK(cls < 20);
  CHECK(sage_server_emulate(world.w, t, 0, buf.data(), 0, &cls) == SAGE_EMPTY_SELECTION);

  // Buffer too small: count is still reported.
  n = 0;
  CHECK(sage_compose(t, 0, &c, buf.data(), 4, &n) == SAGE_INVALID_ARGUMENT);
  CHECK(n == 12);

  c.budget = 0;
  CHECK(sage_compose(t, 0, &c, buf.data(), buf.size(), &n) == SAGE_INVALID_BUDGET);

  sage_method m;
  CHECK(sage_method_parse("tome", &m) == SAGE_OK);
  CHECK(m == SAGE_METHOD_TOME);
  CHECK(std::string(sage_method_name(SAGE_METHOD_BAT)) == "bat");
  CHECK(sage_method_parse("bogus", &m) == SAGE_INVALID_ARGUMENT);

  int off = 0;
  double bits = 0.0;
  CHECK(sage_gate(t, 0, 0.0, &off, &bits) == SAGE_OK);
  CHECK(off == 1);
  sage_trace_free(t);
}

TEST_CASE("metrics through the C API") {
  double v = 0.0;
  CHECK(sage_avg_cost(0.357, 96, 196, &v) == SAGE_OK);
  CHECK(std::abs(v - 0.174857142857142857) < 1e-9);
  CHECK(sage_avg_cost(2.0, 96, 196, &v) == SAGE_DOMAIN_ERROR);
  const uint32_t sel[] = {0, 2};
  CHECK(sage_coverage(sel, 2, 14, 14, 7, 7, &v) == SAGE_OK);
  CHECK(v == doctest::Approx(2.0 / 49.0));
  const double xs[] = {1, 2, 3, 4};
  const double ys[] = {1, 3, 2, 4};
  CHECK(sage_pearson(xs, ys, 4, &v) == SAGE_OK);
  CHECK(v == doctest::Approx(0.8));
  const double flat[] = {0.25, 0.25, 0.25, 0.25};
  CHECK(sage_attention_entropy(flat, 4, &v) == SAGE_OK);
  CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("sweeps and reports") {
  World world;
  sage_trace* t = nullptr;
  REQUIRE(sage_world_generate(world.w, 60, 0, &t) == SAGE_OK);
  sage_sweep* s = nullptr;
  REQUIRE(sage_sweep_create(&s) == SAGE_OK);
  const double etas[] = {1.0};
  const uint32_t budgets[] = {8, 16};
  const sage_method methods[] = {SAGE_METHOD_SAGE, SAGE_METHOD_PREFIX};
  REQUIRE(sage_sweep_set_etas(s, etas, 1) == SAGE_OK);
  REQUIRE(sage_sweep_set_budgets(s, budgets, 2) == SAGE_OK);
  REQUIRE(sage_sweep_set_methods(s, methods, 2) == SAGE_OK);
  CHECK(sage_sweep_set_budgets(s, budgets, 0) == SAGE_INVALID_CONFIG);
  CHECK(sage_sweep_set_theta(s, 1.5) == SAGE_INVALID_CONFIG);

  const std::string out = tmp("metrics.csv");
  REQUIRE(sage_simulate(t, world.w, nullptr, s, out.c_str()) == SAGE_OK);
  const std::string csv = slurp(out);
  CHECK(csv.rfind("method,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  CHECK(sage_simulate(t, nullptr, nullptr, s, out.c_str()) == SAGE_MISSING_PREDICTIONS);

  const std::string man = tmp("manifest.jsonl");
  size_t lines = 0;
  REQUIRE(sage_emit_manifest(t, s, man.c_str(), &lines) == SAGE_OK);
  CHECK(lines > 0);
  const std::string ex = tmp("exceed.csv");
  REQUIRE(sage_exceed_report(t, s, ex.c_str()) == SAGE_OK);
  CHECK(slurp(ex).rfind("eta,budget", 0) == 0);
  CHECK(sage_report(t, man.c_str(), "/nonexistent/preds.jsonl", s, out.c_str()) == SAGE_IO_ERROR);

  sage_sweep_free(s);
  sage_trace_free(t);
}

TEST_CASE("latency through the C API") {
  sage_model_profile m;
  sage_model_profile_default(&m);
  CHECK(sage_selection_flops(196, 96, 192) == 3539140u);
  sage_operating_point p;
  REQUIRE(sage_latency("orin-nano", 0.0, "nb-iot", 96, &m, SAGE_SELECTION_AUTO, &p) == SAGE_OK);
  CHECK(p.t_uplink == doctest::Approx(4.718592));
  CHECK(p.payload_bytes == 96u * 1536u);
  CHECK(sage_latency("cray", 0.0, "nb-iot", 96, &m, SAGE_SELECTION_AUTO, &p) == SAGE_INVALID_PROFILE);
  CHECK(sage_latency("rpi5", 0.0, "carrier-pigeon", 96, &m, SAGE_SELECTION_AUTO, &p) == SAGE_INVALID_PROFILE);
  const std::string out = tmp("latency.csv");
  REQUIRE(sage_latency_grid(nullptr, 0, nullptr, 0, nullptr, 0, &m, nullptr, nullptr, 0, out.c_str()) == SAGE_OK);
  const std::string csv = slurp(out);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 49);
}
