#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "sage/composers.hpp"
#include "sage/deployment.hpp"
#include "sage/evidence.hpp"
#include "sage/world.hpp"

namespace sage {

struct SweepConfig {
  std::vector<double> etas = {0.5, 1.0, 1.5, 2.0};
  std::vector<std::uint32_t> budgets = {32, 48, 64, 80, 96, 128};
  std::vector<Method> methods = {Method::Sage, Method::Prefix, Method::Random, Method::Grid, Method::Tome, Method::Bat};
  std::vector<double> prefilter_ks = {2.0};  // SAGE only; +inf keeps every unit
  std::vector<std::uint64_t> random_seeds = {1, 2, 3, 4, 5};
  double theta = 0.95;
  double bat_attentive_fraction = 0.5;
  std::uint32_t coarse_h = 7;
  std::uint32_t coarse_w = 7;
};

/// Throws InvalidConfig on empty axes or out-of-range values.
void validate_sweep(const SweepConfig& sweep);

/// One composition pass. Random expands to one pass per seed, SAGE to one
/// per prefilter k. `label` is the method key used in manifests and
/// prediction files: "sage" (k = 2), "sage-k<k>", "sage-kall", "random-s<seed>",
/// otherwise the method name.
struct ComposerPass {
  Method method = Method::Sage;
  std::optional<double> prefilter_k;
  std::optional<std::uint64_t> seed;
  std::string label;
};

std::string pass_label(Method method, std::optional<double> prefilter_k, std::optional<std::uint64_t> seed);

/// A metric row groups the passes averaged together (the Random seeds).
struct RowSpec {
  Method method = Method::Sage;
  std::optional<double> prefilter_k;
  std::vector<ComposerPass> passes;
};

std::vector<RowSpec> expand_rows(const SweepConfig& sweep);

ComposerConfig composer_config(const ComposerPass& pass, std::uint32_t budget, const SweepConfig& sweep,
                               const TraceHeader& header);

struct ManifestLine {
  std::uint64_t id = 0;
  std::string method;  // pass label
  std::uint32_t budget = 0;
  std::optional<double> prefilter_k;
  std::optional<std::uint64_t> seed;
  std::vector<PatchIndex> indices;
};

using SelectionKey = std::tuple<std::uint64_t, std::string, std::uint32_t>;  // (id, method, budget)

struct Manifest {
  std::vector<ManifestLine> lines;
  std::map<SelectionKey, std::size_t> index;  // key -> line position
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest_line(std::ostream& out, const ManifestLine& line);

/// (id, method, budget) -> server prediction.
struct PredictionTable {
  std::map<SelectionKey, ClassIndex> preds;
};

PredictionTable read_predictions(const std::filesystem::path& path);
void write_predictions(const PredictionTable& table, const std::filesystem::path& path);

struct MetricRow {
  std::string method;
  double eta = 0.0;
  std::uint32_t budget = 0;
  std::optional<double> prefilter_k;
  std::uint32_t seeds = 1;
  std::uint64_t records = 0;
  std::uint64_t offloaded = 0;
  std::uint64_t local_correct = 0;
  std::uint64_t offloaded_correct = 0;  // summed over seeds
  double offload_rate = 0.0;
  std::optional<double> offloaded_accuracy;
  double overall_accuracy = 0.0;
  std::optional<double> local_accuracy;
  double avg_cost = 0.0;
  std::optional<double> mean_coverage;
  std::optional<double> mean_selected;
};

struct SimulationInputs {
  const Trace* trace = nullptr;
  const SyntheticWorld* world = nullptr;         // emulated server
  const PredictionTable* predictions = nullptr;  // real server predictions
  const Manifest* manifest = nullptr;            // precomputed selections
};

/// gate -> compose -> server -> metrics for every (eta, budget, method) cell.
/// Rows are ordered by eta, then budget, then method. Full transmission is
/// emitted once per eta with budget N.
std::vector<MetricRow> run_simulation(const SimulationInputs& inputs, const SweepConfig& sweep);

/// Composes for every record offloaded at the smallest eta in the sweep and
/// writes one JSON line per (record, pass, budget). Returns the line count.
std::size_t emit_manifest(const Trace& trace, const SweepConfig& sweep, std::ostream& out);

struct ExceedRow {
  double eta = 0.0;
  std::uint32_t budget = 0;
  std::uint64_t offloaded = 0;
  std::uint64_t exceeding = 0;
  std::optional<double> rate;  // absent when nothing is offloaded
};

std::vector<ExceedRow> exceed_report(const Trace& trace, double theta, std::span<const double> etas,
                                     std::span<const std::uint32_t> budgets);

/// CSV emitters: fixed column order, reals as %.6g, missing values empty.
std::string format_real(double v);
void write_metrics_csv(std::span<const MetricRow> rows, std::ostream& out);
void write_exceed_csv(std::span<const ExceedRow> rows, std::ostream& out);
void write_latency_csv(std::span<const OperatingPoint> rows, std::ostream& out);

/// World parameters sidecar (JSON) written next to synthetic traces.
void save_world_params(const WorldParams& params, const std::filesystem::path& path);
WorldParams load_world_params(const std::filesystem::path& path);

}  // namespace sage
