#include <doctest.h>

#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "sage/error.hpp"
#include "sage/gate.hpp"
#include "sage/pipeline.hpp"

using namespace sage;

namespace {

Trace synth(const SyntheticWorld& w, std::uint64_t count) {
  Trace t;
  t.header = w.trace_header();
  t.records = w.generate_corpus(count);
  t.header.count = t.records.size();
  return t;
}

SweepConfig small_sweep() {
  SweepConfig s;
  s.etas = {0.5, 1.0};
  s.budgets = {8, 24};
  s.methods = {Method::Sage, Method::Prefix, Method::Random, Method::Grid, Method::Tome, Method::Bat,
               Method::Threshold, Method::Full};
  s.random_seeds = {1, 2, 3};
  return s;
}

std::string csv(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  write_metrics_csv(rows, os);
  return os.str();
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Ok;
}

}  // namespace

TEST_CASE("labels and row expansion") {
  CHECK(pass_label(Method::Sage, 2.0, std::nullopt) == "sage");
  CHECK(pass_label(Method::Sage, 3.0, std::nullopt) == "sage-k3");
  CHECK(pass_label(Method::Sage, std::numeric_limits<double>::infinity(), std::nullopt) == "sage-kall");
  CHECK(pass_label(Method::Random, std::nullopt, 4) == "random-s4");
  SweepConfig s = small_sweep();
  s.prefilter_ks = {1.0, 2.0};
  const auto rows = expand_rows(s);
  CHECK(rows.size() == 9);
  CHECK(rows[1].method == Method::Sage);
  CHECK(rows[3].method == Method::Random);
  CHECK(rows[3].passes.size() == 3);
}

TEST_CASE("sweep validation") {
  SweepConfig s;
  s.budgets.clear();
  CHECK(code_of([&] { validate_sweep(s); }) == ErrorCode::InvalidConfig);
  s = SweepConfig{};
  s.prefilter_ks = {0.5};
  CHECK(code_of([&] { validate_sweep(s); }) == ErrorCode::InvalidConfig);
  s = SweepConfig{};
  s.etas = {-1.0};
  CHECK(code_of([&] { validate_sweep(s); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("eta = 0 offloads everything and cost is B / N") {
  const SyntheticWorld w(WorldParams{});
  const Trace t = synth(w, 10);
  SweepConfig s;
  s.etas = {0.0};
  s.budgets = {12};
  s.methods = {Method::Prefix};
  SimulationInputs in{&t, &w, nullptr, nullptr};
  const auto rows = run_simulation(in, s);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].offloaded == 10);
  CHECK(rows[0].avg_cost == 12.0 / 196.0);
  CHECK_FALSE(rows[0].local_accuracy.has_value());
}

TEST_CASE("full transmission reaches the server ceiling") {
  const SyntheticWorld w(WorldParams{});
  const Trace t = synth(w, 200);
  SweepConfig s;
  s.etas = {1.0};
  s.budgets = {16, 32};
  s.methods = {Method::Full};
  const auto rows = run_simulation(SimulationInputs{&t, &w, nullptr, nullptr}, s);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].budget == 196);
  std::uint64_t off = 0;
  std::uint64_t right = 0;
  for (const EvidenceRecord& r : t.records) {
    if (!gate(r, 1.0).offload) continue;
    ++off;
    if (*r.server_full_pred == r.label) ++right;
  }
  CHECK(rows[0].offloaded == off);
  CHECK(rows[0].offloaded_correct == right);
}

TEST_CASE("non-offloaded records do not depend on method or budget") {
  const SyntheticWorld w(WorldParams{});
  const Trace t = synth(w, 120);
  const auto rows = run_simulation(SimulationInputs{&t, &w, nullptr, nullptr}, small_sweep());
  for (const MetricRow& a : rows) {
    for (const MetricRow& b : rows) {
      if (a.eta != b.eta) continue;
      CHECK(a.local_correct == b.local_correct);
      CHECK(a.offloaded == b.offloaded);
    }
  }
}

TEST_CASE("manifest line count and full-budget lines") {
  const SyntheticWorld w(WorldParams{});
  const Trace t = synth(w, 80);
  SweepConfig s;
  s.etas = {1.0, 2.0};
  s.budgets = {196, 32};
  s.methods = {Method::Prefix, Method::Sage, Method::Random};
  s.random_seeds = {1, 2};
  std::ostringstream os;
  const std::size_t lines = emit_manifest(t, s, os);
  std::size_t offloaded = 0;
  for (const EvidenceRecord& r : t.records) offloaded += gate(r, 1.0).offload ? 1 : 0;
  // Random contributes one pass per seed.
  CHECK(lines == offloaded * 4 * 2);
  std::istringstream in(os.str());
  std::string line;
  std::size_t full = 0;
  while (std::getline(in, line)) {
    if (line.find("\"budget\":196") != std::string::npos && line.find("\"prefix\"") != std::string::npos) {
      CHECK(std::count(line.begin(), line.end(), ',') >= 196);
      ++full;
    }
  }
  CHECK(full == offloaded);
}

TEST_CASE("manifest + identity prediction file reproduces the emulator path") {
  const SyntheticWorld w(WorldParams{});
  const Trace t = synth(w, 150);
  const SweepConfig s = small_sweep();
  const auto manifest_path = testutil::temp_path("eq_manifest.jsonl");
  {
    std::ofstream out(manifest_path);
    emit_manifest(t, s, out);
  }
  const Manifest m = read_manifest(manifest_path);
  PredictionTable preds;
  std::map<std::uint64_t, const EvidenceRecord*> by_id;
  for (const EvidenceRecord& r : t.records) by_id[r.id] = &r;
  for (const ManifestLine& l : m.lines) {
    preds.preds[{l.id, l.method, l.budget}] = server_emulate(w, *by_id.at(l.id), l.indices);
  }
  const auto pred_path = testutil::temp_path("eq_preds.jsonl");
  write_predictions(preds, pred_path);
  const PredictionTable loaded = read_predictions(pred_path);

  const std::string direct = csv(run_simulation(SimulationInputs{&t, &w, nullptr, nullptr}, s));
  const std::string joined = csv(run_simulation(SimulationInputs{&t, nullptr, &loaded, &m}, s));
  CHECK(direct == joined);
}

TEST_CASE("missing predictions and over-budget manifests are rejected") {
  const SyntheticWorld w(WorldParams{});
  const Trace t = synth(w, 60);
  SweepConfig s;
  s.etas = {1.0};
  s.budgets = {8};
  s.methods = {Method::Prefix};
  PredictionTable empty;
  CHECK(code_of([&] { run_simulation(SimulationInputs{&t, nullptr, &empty, nullptr}, s); }) ==
        ErrorCode::MissingPredictions);
  CHECK(code_of([&] { run_simulation(SimulationInputs{&t, nullptr, nullptr, nullptr}, s); }) ==
        ErrorCode::MissingPredictions);

  Manifest m;
  for (const EvidenceRecord& r : t.records) {
    if (!gate(r, 1.0).offload) continue;
    ManifestLine l{r.id, "prefix", 8, std::nullopt, std::nullopt, {0, 1, 2, 3, 4, 5, 6, 7, 8}};
    m.index[{r.id, "prefix", 8}] = m.lines.size();
    m.lines.push_back(l);
  }
  CHECK(code_of([&] { run_simulation(SimulationInputs{&t, &w, nullptr, &m}, s); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("duplicate manifest keys are rejected") {
  const auto path = testutil::temp_path("dup.jsonl");
  {
    std::ofstream out(path);
    out << R"({"id":1,"method":"prefix","budget":2,"prefilter_k":null,"indices":[0,1]})" << '\n';
    out << R"({"id":1,"method":"prefix","budget":2,"prefilter_k":null,"indices":[1,0]})" << '\n';
  }
  CHECK(code_of([&] { read_manifest(path); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("exceed report") {
  Trace t;
  t.header.units = 196;
  t.header.dim = 1;
  t.header.classes = 2;
  EvidenceRecord flat;
  flat.local_max_prob = 0.3;
  flat.attention.assign(196, 1.0 / 196);
  flat.embeddings.assign(196, 1.0f);
  EvidenceRecord peaked = flat;
  peaked.attention.assign(196, 0.0);
  peaked.attention[5] = 1.0;
  peaked.local_max_prob = 0.99;
  t.records = {flat, flat, peaked};
  const std::vector<double> etas = {0.5, 3.0};
  const std::vector<std::uint32_t> budgets = {32, 64, 96};
  const auto rows = exceed_report(t, 0.95, etas, budgets);
  REQUIRE(rows.size() == 6);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(rows[i].offloaded == 2);
    CHECK(*rows[i].rate == 1.0);
    CHECK_FALSE(rows[i + 3].rate.has_value());
  }
  std::ostringstream os;
  write_exceed_csv(rows, os);
  CHECK(os.str().find("3,32,0,0,\n") != std::string::npos);
}

TEST_CASE("csv formatting") {
  CHECK(format_real(0.174857142857) == "0.174857");
  CHECK(format_real(1.0) == "1");
  CHECK(format_real(4.7210312e-5) == "4.72103e-05");
}

TEST_CASE("world parameter sidecar round trip") {
  WorldParams p;
  p.seed = 99;
  p.noise_sigma = 0.123;
  const auto path = testutil::temp_path("world.json");
  save_world_params(p, path);
  const WorldParams q = load_world_params(path);
  CHECK(q.seed == 99);
  CHECK(q.noise_sigma == 0.123);
  CHECK(q.classes == p.classes);
}
