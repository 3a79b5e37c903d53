#include "sage/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>

#include <json.hpp>

#include "sage/error.hpp"
#include "sage/gate.hpp"
#include "sage/metrics.hpp"
#include "sage/rng.hpp"

namespace sage {

namespace {

using nlohmann::json;

std::string format_k(double k) {
  if (std::isinf(k)) return "all";
  return format_real(k);
}

// One (row, budget, pass) composition evaluated for every candidate record.
struct Cell {
  std::size_t row = 0;
  std::uint32_t budget = 0;
  std::size_t pass = 0;
};

struct CellResult {
  bool correct = false;
  double coverage = 0.0;
  std::uint32_t selected = 0;
};

void audit_selection(std::span<const PatchIndex> indices, std::uint32_t budget, std::size_t units,
                     const std::string& where) {
  if (indices.empty() || indices.size() > budget) {
    throw Error(ErrorCode::InvalidConfig, where + ": selection of " + std::to_string(indices.size()) +
                                              " units violates budget " + std::to_string(budget));
  }
  std::vector<bool> seen(units, false);
  for (PatchIndex i : indices) {
    if (i >= units || seen[i]) throw Error(ErrorCode::InvalidConfig, where + ": indices must be distinct and < N");
    seen[i] = true;
  }
}

std::string key_text(const SelectionKey& k) {
  return "(id " + std::to_string(std::get<0>(k)) + ", " + std::get<1>(k) + ", B=" + std::to_string(std::get<2>(k)) +
         ")";
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(line);
  }
  return lines;
}

}  // namespace

void validate_sweep(const SweepConfig& s) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (s.etas.empty() || s.budgets.empty() || s.methods.empty()) fail("sweep axes must be non-empty");
  for (double e : s.etas) {
    if (!std::isfinite(e) || e < 0.0) fail("eta values must be finite and >= 0");
  }
  for (std::uint32_t b : s.budgets) {
    if (b == 0) fail("budgets must be >= 1");
  }
  if (std::find(s.methods.begin(), s.methods.end(), Method::Sage) != s.methods.end()) {
    if (s.prefilter_ks.empty()) fail("prefilter_k list must be non-empty when sweeping SAGE");
    for (double k : s.prefilter_ks) {
      if (std::isnan(k) || k < 1.0) fail("prefilter_k must be >= 1");
    }
  }
  if (std::find(s.methods.begin(), s.methods.end(), Method::Random) != s.methods.end() && s.random_seeds.empty()) {
    fail("random seed list must be non-empty when sweeping Random");
  }
  if (!(s.theta > 0.0 && s.theta <= 1.0)) fail("theta must lie in (0, 1]");
  if (!(s.bat_attentive_fraction >= 0.0 && s.bat_attentive_fraction <= 1.0)) fail("BAT fraction must lie in [0, 1]");
  if (s.coarse_h == 0 || s.coarse_w == 0) fail("coarse grid must be non-empty");
}

std::string pass_label(Method method, std::optional<double> prefilter_k, std::optional<std::uint64_t> seed) {
  std::string label = method_name(method);
  if (method == Method::Sage && prefilter_k && *prefilter_k != 2.0) label += "-k" + format_k(*prefilter_k);
  if (method == Method::Random && seed) label += "-s" + std::to_string(*seed);
  return label;
}

std::vector<RowSpec> expand_rows(const SweepConfig& sweep) {
  std::vector<RowSpec> rows;
  for (Method m : sweep.methods) {
    if (m == Method::Sage) {
      for (double k : sweep.prefilter_ks) {
        rows.push_back(RowSpec{m, k, {ComposerPass{m, k, std::nullopt, pass_label(m, k, std::nullopt)}}});
      }
    } else if (m == Method::Random) {
      RowSpec row{m, std::nullopt, {}};
      for (std::uint64_t s : sweep.random_seeds) row.passes.push_back(ComposerPass{m, std::nullopt, s, pass_label(m, std::nullopt, s)});
      rows.push_back(std::move(row));
    } else {
      rows.push_back(RowSpec{m, std::nullopt, {ComposerPass{m, std::nullopt, std::nullopt, pass_label(m, {}, {})}}});
    }
  }
  return rows;
}

ComposerConfig composer_config(const ComposerPass& pass, std::uint32_t budget, const SweepConfig& sweep,
                               const TraceHeader& header) {
  ComposerConfig c;
  c.method = pass.method;
  c.budget = budget;
  c.prefilter_k = pass.prefilter_k.value_or(2.0);
  c.rng_seed = pass.seed.value_or(1);
  c.grid = header.grid;
  c.bat_attentive_fraction = sweep.bat_attentive_fraction;
  c.theta = sweep.theta;
  return c;
}

void write_manifest_line(std::ostream& out, const ManifestLine& line) {
  json j = {{"id", line.id}, {"method", line.method}, {"budget", line.budget}};
  if (line.prefilter_k && std::isfinite(*line.prefilter_k)) {
    j["prefilter_k"] = *line.prefilter_k;
  } else {
    j["prefilter_k"] = nullptr;
  }
  if (line.seed) j["seed"] = *line.seed;
  j["indices"] = line.indices;
  out << j.dump() << '\n';
}

Manifest read_manifest(const std::filesystem::path& path) {
  Manifest m;
  const std::vector<std::string> lines = read_lines(path);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    ManifestLine line;
    try {
      const json j = json::parse(lines[n]);
      line.id = j.at("id").get<std::uint64_t>();
      line.method = j.at("method").get<std::string>();
      line.budget = j.at("budget").get<std::uint32_t>();
      if (j.contains("prefilter_k") && !j["prefilter_k"].is_null()) line.prefilter_k = j["prefilter_k"].get<double>();
      if (j.contains("seed")) line.seed = j["seed"].get<std::uint64_t>();
      line.indices = j.at("indices").get<std::vector<PatchIndex>>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidConfig, path.string() + " line " + std::to_string(n + 1) + ": " + e.what());
    }
    SelectionKey key{line.id, line.method, line.budget};
    if (!m.index.emplace(key, m.lines.size()).second) {
      throw Error(ErrorCode::InvalidConfig, "duplicate manifest key " + key_text(key));
    }
    m.lines.push_back(std::move(line));
  }
  return m;
}

PredictionTable read_predictions(const std::filesystem::path& path) {
  PredictionTable t;
  const std::vector<std::string> lines = read_lines(path);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    try {
      const json j = json::parse(lines[n]);
      SelectionKey key{j.at("id").get<std::uint64_t>(), j.at("method").get<std::string>(),
                       j.at("budget").get<std::uint32_t>()};
      if (!t.preds.emplace(key, j.at("server_pred").get<ClassIndex>()).second) {
        throw Error(ErrorCode::InvalidConfig, "duplicate prediction key " + key_text(key));
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidConfig, path.string() + " line " + std::to_string(n + 1) + ": " + e.what());
    }
  }
  return t;
}

void write_predictions(const PredictionTable& table, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  for (const auto& [key, pred] : table.preds) {
    out << json{{"id", std::get<0>(key)}, {"method", std::get<1>(key)}, {"budget", std::get<2>(key)},
                {"server_pred", pred}}
               .dump()
        << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

std::vector<MetricRow> run_simulation(const SimulationInputs& in, const SweepConfig& sweep) {
  validate_sweep(sweep);
  if (in.trace == nullptr) throw Error(ErrorCode::InvalidConfig, "no trace");
  const Trace& trace = *in.trace;
  const TraceHeader& h = trace.header;
  if (trace.records.empty()) throw Error(ErrorCode::EmptySet, "trace has no records");
  if (in.world == nullptr && in.predictions == nullptr) {
    throw Error(ErrorCode::MissingPredictions, "need a synthetic world or a prediction file to score selections");
  }
  if (in.world != nullptr) {
    const WorldParams& p = in.world->params();
    if (p.units() != h.units || p.dim != h.dim || p.classes != h.classes) {
      throw Error(ErrorCode::InvalidConfig, "world parameters do not match the trace header");
    }
  }
  const std::uint32_t n = h.units;
  const std::vector<RowSpec> rows = expand_rows(sweep);

  std::vector<Cell> cells;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const bool full = rows[r].method == Method::Full;
    for (std::uint32_t b : sweep.budgets) {
      for (std::size_t p = 0; p < rows[r].passes.size(); ++p) cells.push_back(Cell{r, full ? n : b, p});
      if (full) break;
    }
  }

  std::vector<double> u(trace.records.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = uncertainty(trace.records[i].local_max_prob);
  const double min_eta = *std::min_element(sweep.etas.begin(), sweep.etas.end());
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] >= min_eta) candidates.push_back(i);
  }

  // results[k * cells.size() + c] for candidate k and cell c.
  std::vector<CellResult> results(candidates.size() * cells.size());
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const EvidenceRecord& rec = trace.records[candidates[k]];
    std::optional<RecordScorer> scorer;
    auto emulate = [&](std::span<const PatchIndex> sel) {
      if (!scorer) scorer.emplace(*in.world, rec);
      return scorer->predict(sel);
    };
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const Cell& cell = cells[c];
      const ComposerPass& pass = rows[cell.row].passes[cell.pass];
      const SelectionKey key{rec.id, pass.label, cell.budget};

      std::vector<PatchIndex> selection;
      if (in.manifest != nullptr) {
        const auto it = in.manifest->index.find(key);
        if (it == in.manifest->index.end()) throw Error(ErrorCode::InvalidConfig, "manifest lacks " + key_text(key));
        selection = in.manifest->lines[it->second].indices;
        audit_selection(selection, cell.budget, n, "manifest " + key_text(key));
      } else {
        selection = compose(rec, h.dim, composer_config(pass, cell.budget, sweep, h)).indices;
        audit_selection(selection, cell.budget, n, "composer " + key_text(key));
      }

      ClassIndex pred = 0;
      if (pass.method == Method::Full && rec.server_full_pred) {
        pred = *rec.server_full_pred;
      } else if (in.predictions != nullptr) {
        const auto it = in.predictions->preds.find(key);
        if (it == in.predictions->preds.end()) {
          throw Error(ErrorCode::MissingPredictions, "no server prediction for " + key_text(key));
        }
        pred = it->second;
      } else {
        pred = emulate(selection);
      }

      CellResult& res = results[k * cells.size() + c];
      res.correct = pred == rec.label;
      res.selected = static_cast<std::uint32_t>(selection.size());
      if (h.grid) res.coverage = coverage(selection, h.grid->height, h.grid->width, sweep.coarse_h, sweep.coarse_w);
    }
  }

  std::vector<MetricRow> out;
  for (double eta : sweep.etas) {
    std::uint64_t offloaded = 0;
    std::uint64_t local_correct = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (u[i] >= eta) {
        ++offloaded;
      } else if (trace.records[i].local_pred == trace.records[i].label) {
        ++local_correct;
      }
    }
    const std::uint64_t total = trace.records.size();
    const double rate = static_cast<double>(offloaded) / static_cast<double>(total);
    for (std::size_t bi = 0; bi < sweep.budgets.size(); ++bi) {
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const RowSpec& spec = rows[r];
        const bool full = spec.method == Method::Full;
        if (full && bi != 0) continue;
        const std::uint32_t budget = full ? n : sweep.budgets[bi];

        MetricRow row;
        row.method = method_name(spec.method);
        row.eta = eta;
        row.budget = budget;
        row.prefilter_k = spec.prefilter_k;
        row.seeds = static_cast<std::uint32_t>(spec.passes.size());
        row.records = total;
        row.offloaded = offloaded;
        row.local_correct = local_correct;
        row.offload_rate = rate;

        double cov_sum = 0.0;
        double sel_sum = 0.0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
          if (cells[c].row != r || cells[c].budget != budget) continue;
          for (std::size_t k = 0; k < candidates.size(); ++k) {
            if (u[candidates[k]] < eta) continue;
            const CellResult& res = results[k * cells.size() + c];
            if (res.correct) ++row.offloaded_correct;
            cov_sum += res.coverage;
            sel_sum += res.selected;
          }
        }
        const double seeds = row.seeds;
        const double evaluated = seeds * static_cast<double>(offloaded);
        if (offloaded > 0) {
          row.offloaded_accuracy = static_cast<double>(row.offloaded_correct) / evaluated;
          if (h.grid) row.mean_coverage = cov_sum / evaluated;
          row.mean_selected = sel_sum / evaluated;
          // Realized units per request; equals rate * B / N whenever every
          // selection fills the budget, smaller for under-budget thresholds.
          row.avg_cost = rate * *row.mean_selected / static_cast<double>(n);
        }
        if (offloaded < total) {
          row.local_accuracy = static_cast<double>(local_correct) / static_cast<double>(total - offloaded);
        }
        row.overall_accuracy = (seeds * static_cast<double>(local_correct) + static_cast<double>(row.offloaded_correct)) /
                               (seeds * static_cast<double>(total));
        out.push_back(std::move(row));
      }
    }
  }
  return out;
}

std::size_t emit_manifest(const Trace& trace, const SweepConfig& sweep, std::ostream& out) {
  validate_sweep(sweep);
  const TraceHeader& h = trace.header;
  const std::vector<RowSpec> rows = expand_rows(sweep);
  const double min_eta = *std::min_element(sweep.etas.begin(), sweep.etas.end());
  std::size_t count = 0;
  for (const EvidenceRecord& rec : trace.records) {
    if (!gate(rec, min_eta).offload) continue;
    for (const RowSpec& spec : rows) {
      for (const ComposerPass& pass : spec.passes) {
        for (std::uint32_t b : sweep.budgets) {
          const std::uint32_t budget = spec.method == Method::Full ? h.units : b;
          SelectionResult sel = compose(rec, h.dim, composer_config(pass, budget, sweep, h));
          audit_selection(sel.indices, budget, h.units, "composer");
          write_manifest_line(out, ManifestLine{rec.id, pass.label, budget, pass.prefilter_k, pass.seed,
                                                std::move(sel.indices)});
          ++count;
          if (spec.method == Method::Full) break;
        }
      }
    }
  }
  if (!out) throw Error(ErrorCode::IoError, "manifest write failed");
  return count;
}

std::vector<ExceedRow> exceed_report(const Trace& trace, double theta, std::span<const double> etas,
                                     std::span<const std::uint32_t> budgets) {
  if (trace.records.empty()) throw Error(ErrorCode::EmptySet, "trace has no records");
  if (etas.empty() || budgets.empty()) throw Error(ErrorCode::InvalidConfig, "eta and budget lists must be non-empty");
  std::vector<double> u;
  std::vector<std::size_t> counts;
  for (const EvidenceRecord& r : trace.records) {
    u.push_back(uncertainty(r.local_max_prob));
    counts.push_back(cumulative_threshold(r.attention, theta).count);
  }
  std::vector<ExceedRow> rows;
  for (double eta : etas) {
    if (!std::isfinite(eta) || eta < 0.0) throw Error(ErrorCode::InvalidConfig, "eta must be finite and >= 0");
    for (std::uint32_t b : budgets) {
      ExceedRow row{eta, b, 0, 0, std::nullopt};
      for (std::size_t i = 0; i < u.size(); ++i) {
        if (u[i] < eta) continue;
        ++row.offloaded;
        if (counts[i] > b) ++row.exceeding;
      }
      if (row.offloaded > 0) row.rate = static_cast<double>(row.exceeding) / static_cast<double>(row.offloaded);
      rows.push_back(row);
    }
  }
  return rows;
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void write_metrics_csv(std::span<const MetricRow> rows, std::ostream& out) {
  auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
  out << "method,eta,budget,prefilter_k,seeds,records,offloaded,local_correct,offloaded_correct,offload_rate,"
         "offloaded_accuracy,overall_accuracy,local_accuracy,avg_cost,mean_coverage,mean_selected\n";
  for (const MetricRow& r : rows) {
    out << r.method << ',' << format_real(r.eta) << ',' << r.budget << ','
        << (r.prefilter_k ? format_k(*r.prefilter_k) : std::string()) << ',' << r.seeds << ',' << r.records << ','
        << r.offloaded << ',' << r.local_correct << ',' << r.offloaded_correct << ',' << format_real(r.offload_rate)
        << ',' << opt(r.offloaded_accuracy) << ',' << format_real(r.overall_accuracy) << ',' << opt(r.local_accuracy)
        << ',' << format_real(r.avg_cost) << ',' << opt(r.mean_coverage) << ',' << opt(r.mean_selected) << '\n';
  }
}

void write_exceed_csv(std::span<const ExceedRow> rows, std::ostream& out) {
  out << "eta,budget,offloaded,exceeding,exceed_rate\n";
  for (const ExceedRow& r : rows) {
    out << format_real(r.eta) << ',' << r.budget << ',' << r.offloaded << ',' << r.exceeding << ','
        << (r.rate ? format_real(*r.rate) : std::string()) << '\n';
  }
}

void write_latency_csv(std::span<const OperatingPoint> rows, std::ostream& out) {
  out << "device,channel,budget,payload_bytes,t_edge,t_select,t_uplink,t_server,t_total\n";
  for (const OperatingPoint& p : rows) {
    out << p.device << ',' << p.channel << ',' << p.budget << ',' << p.payload_bytes << ',' << format_real(p.t_edge)
        << ',' << format_real(p.t_select) << ',' << format_real(p.t_uplink) << ',' << format_real(p.t_server) << ','
        << format_real(p.t_total) << '\n';
  }
}

void save_world_params(const WorldParams& p, const std::filesystem::path& path) {
  const json j = {{"generator", CounterRng::kName},
                  {"seed", p.seed},
                  {"classes", p.classes},
                  {"regions", p.regions},
                  {"dim", p.dim},
                  {"grid_h", p.grid_h},
                  {"grid_w", p.grid_w},
                  {"footprint_radius", p.footprint_radius},
                  {"dirichlet_alpha", p.dirichlet_alpha},
                  {"noise_sigma", p.noise_sigma},
                  {"background_attention", p.background_attention},
                  {"local_softmax_temp", p.local_softmax_temp}};
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

WorldParams load_world_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  WorldParams p;
  try {
    const json j = json::parse(in);
    if (j.value("generator", std::string(CounterRng::kName)) != CounterRng::kName) {
      throw Error(ErrorCode::InvalidParams, "world file was produced by generator " + j["generator"].dump());
    }
    p.seed = j.at("seed").get<std::uint64_t>();
    p.classes = j.at("classes").get<std::uint32_t>();
    p.regions = j.at("regions").get<std::uint32_t>();
    p.dim = j.at("dim").get<std::uint32_t>();
    p.grid_h = j.at("grid_h").get<std::uint32_t>();
    p.grid_w = j.at("grid_w").get<std::uint32_t>();
    p.footprint_radius = j.at("footprint_radius").get<std::uint32_t>();
    p.dirichlet_alpha = j.at("dirichlet_alpha").get<double>();
    p.noise_sigma = j.at("noise_sigma").get<double>();
    p.background_attention = j.at("background_attention").get<double>();
    p.local_softmax_temp = j.at("local_softmax_temp").get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidParams, path.string() + ": " + e.what());
  }
  validate_params(p);
  return p;
}

}  // namespace sage
