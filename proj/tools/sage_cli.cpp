// Command-line front end over the C API.
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sage/sage.h"

namespace {

struct CliError {
  sage_status status;
};

void check(sage_status s) {
  if (s != SAGE_OK) throw CliError{s};
}

struct SweepFlags {
  std::vector<double> etas = {0.5, 1.0, 1.5, 2.0};
  std::vector<std::uint32_t> budgets = {32, 48, 64, 80, 96, 128};
  std::vector<std::string> methods = {"sage", "prefix", "random", "grid", "tome", "bat"};
  std::vector<std::string> prefilter_ks = {"2"};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  double theta = 0.95;
  double bat_fraction = 0.5;
};

void add_sweep_flags(CLI::App* cmd, SweepFlags& f) {
  cmd->add_option("--eta,--etas", f.etas, "gate thresholds (bits)")->delimiter(',');
  cmd->add_option("--budget,--budgets", f.budgets, "per-request budgets")->delimiter(',');
  cmd->add_option("--method,--methods", f.methods, "sage,prefix,random,grid,tome,bat,threshold,full")->delimiter(',');
  cmd->add_option("--prefilter-k", f.prefilter_ks, "SAGE pool multipliers; 'all' keeps every unit")->delimiter(',');
  cmd->add_option("--seed,--seeds", f.seeds, "Random composer seeds")->delimiter(',');
  cmd->add_option("--theta", f.theta, "cumulative attention threshold");
  cmd->add_option("--bat-fraction", f.bat_fraction, "BAT attentive share of the budget");
}

double parse_k(const std::string& s) {
  if (s == "all" || s == "inf") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double k = 0.0;
  try {
    k = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw CLI::ValidationError("--prefilter-k", "not a number: " + s);
  return k;
}

struct Sweep {
  sage_sweep* handle = nullptr;
  ~Sweep() { sage_sweep_free(handle); }
};

void build_sweep(const SweepFlags& f, Sweep& out) {
  check(sage_sweep_create(&out.handle));
  check(sage_sweep_set_etas(out.handle, f.etas.data(), f.etas.size()));
  check(sage_sweep_set_budgets(out.handle, f.budgets.data(), f.budgets.size()));
  std::vector<sage_method> methods;
  for (const std::string& m : f.methods) {
    sage_method parsed;
    check(sage_method_parse(m.c_str(), &parsed));
    methods.push_back(parsed);
  }
  check(sage_sweep_set_methods(out.handle, methods.data(), methods.size()));
  std::vector<double> ks;
  for (const std::string& k : f.prefilter_ks) ks.push_back(parse_k(k));
  check(sage_sweep_set_prefilter_ks(out.handle, ks.data(), ks.size()));
  const std::vector<uint64_t> seeds(f.seeds.begin(), f.seeds.end());
  check(sage_sweep_set_random_seeds(out.handle, seeds.data(), seeds.size()));
  check(sage_sweep_set_theta(out.handle, f.theta));
  check(sage_sweep_set_bat_fraction(out.handle, f.bat_fraction));
}

struct TraceHandle {
  sage_trace* handle = nullptr;
  ~TraceHandle() { sage_trace_free(handle); }
};

struct WorldHandle {
  sage_world* handle = nullptr;
  ~WorldHandle() { sage_world_free(handle); }
};

const char* opt_path(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evidence composition simulator for budgeted edge-cloud offloading"};
  app.require_subcommand(1);
  app.set_version_flag("--version", sage_version());

  // synth
  sage_world_params wp;
  sage_world_params_default(&wp);
  std::uint64_t count = 1000;
  std::uint64_t first_id = 0;
  std::string synth_out;
  std::string world_out;
  bool synth_text = false;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  synth->add_option("--count", count, "number of records");
  synth->add_option("--first-id", first_id, "id of the first record");
  synth->add_option("--seed", wp.seed, "world seed");
  synth->add_option("--classes", wp.classes, "K");
  synth->add_option("--regions", wp.regions, "R");
  synth->add_option("--dim", wp.dim, "D");
  synth->add_option("--grid-h", wp.grid_h, "patch grid height");
  synth->add_option("--grid-w", wp.grid_w, "patch grid width");
  synth->add_option("--radius", wp.footprint_radius, "region footprint radius");
  synth->add_option("--alpha", wp.dirichlet_alpha, "Dirichlet concentration of region weights");
  synth->add_option("--noise", wp.noise_sigma, "embedding noise scale");
  synth->add_option("--background", wp.background_attention, "background salience");
  synth->add_option("--temp", wp.local_softmax_temp, "edge softmax temperature");
  synth->add_option("--out", synth_out, "trace path")->required();
  synth->add_option("--world", world_out, "world parameter file (default <out>.world.json)");
  synth->add_flag("--text", synth_text, "write the JSON-lines mirror instead of binary");

  // compose
  SweepFlags compose_flags;
  std::string compose_trace;
  std::string compose_out;
  CLI::App* compose = app.add_subcommand("compose", "write a selection manifest for offloaded records");
  compose->add_option("--trace", compose_trace, "trace path")->required();
  add_sweep_flags(compose, compose_flags);
  compose->add_option("--out", compose_out, "manifest path (default stdout)");

  // simulate
  SweepFlags sim_flags;
  std::string sim_trace;
  std::string sim_world;
  std::string sim_preds;
  std::string sim_out;
  CLI::App* simulate = app.add_subcommand("simulate", "gate, compose, score and report metrics");
  simulate->add_option("--trace", sim_trace, "trace path")->required();
  simulate->add_option("--world", sim_world, "world parameter file (emulated server)");
  simulate->add_option("--predictions", sim_preds, "server prediction file");
  add_sweep_flags(simulate, sim_flags);
  simulate->add_option("--out", sim_out, "CSV path (default stdout)");

  // exceed
  SweepFlags exceed_flags;
  std::string exceed_trace;
  std::string exceed_out;
  CLI::App* exceed = app.add_subcommand("exceed", "budget-exceed rates of cumulative thresholding");
  exceed->add_option("--trace", exceed_trace, "trace path")->required();
  exceed->add_option("--eta,--etas", exceed_flags.etas, "gate thresholds")->delimiter(',');
  exceed->add_option("--budget,--budgets", exceed_flags.budgets, "budgets")->delimiter(',');
  exceed->add_option("--theta", exceed_flags.theta, "cumulative attention threshold");
  exceed->add_option("--out", exceed_out, "CSV path (default stdout)");

  // latency
  std::vector<std::string> devices = {"orin-nano", "rpi5"};
  std::vector<std::string> channels = {"nb-iot", "lte-m", "5g-mmtc", "wifi"};
  std::vector<std::uint32_t> lat_budgets = {32, 48, 64, 80, 96, 196};
  std::vector<std::string> efficiencies;
  sage_model_profile model;
  sage_model_profile_default(&model);
  std::string lat_out;
  CLI::App* latency = app.add_subcommand("latency", "end-to-end latency per operating point");
  latency->add_option("--devices", devices, "orin-nano, rpi5")->delimiter(',');
  latency->add_option("--channels", channels, "nb-iot, lte-m, 5g-mmtc, wifi")->delimiter(',');
  latency->add_option("--budget,--budgets", lat_budgets, "budgets")->delimiter(',');
  latency->add_option("--edge-flops", model.edge_flops, "edge model FLOPs per input");
  latency->add_option("--server-flops", model.server_flops, "server model FLOPs per input");
  latency->add_option("--server-throughput", model.server_throughput, "server effective FLOP/s");
  latency->add_option("--units", model.units, "units per input (N)");
  latency->add_option("--dim", model.dim, "embedding width used by selection");
  latency->add_option("--patch-bytes", model.patch_bytes, "bytes per transmitted unit");
  latency->add_option("--efficiency", efficiencies, "device efficiency as name=value")->delimiter(',');
  latency->add_option("--out", lat_out, "CSV path (default stdout)");

  // report
  SweepFlags report_flags;
  std::string report_trace;
  std::string report_manifest;
  std::string report_preds;
  std::string report_out;
  CLI::App* report = app.add_subcommand("report", "metrics from a manifest and server predictions");
  report->add_option("--trace", report_trace, "trace path")->required();
  report->add_option("--manifest", report_manifest, "selection manifest")->required();
  report->add_option("--predictions", report_preds, "server prediction file")->required();
  add_sweep_flags(report, report_flags);
  report->add_option("--out", report_out, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth) {
      WorldHandle world;
      check(sage_world_create(&wp, &world.handle));
      TraceHandle trace;
      check(sage_world_generate(world.handle, count, first_id, &trace.handle));
      check(synth_text ? sage_trace_save_text(trace.handle, synth_out.c_str())
                       : sage_trace_save(trace.handle, synth_out.c_str()));
      const std::string wpath = world_out.empty() ? synth_out + ".world.json" : world_out;
      check(sage_world_save(world.handle, wpath.c_str()));
    } else if (*compose) {
      TraceHandle trace;
      check(sage_trace_load(compose_trace.c_str(), &trace.handle));
      Sweep sweep;
      build_sweep(compose_flags, sweep);
      size_t lines = 0;
      check(sage_emit_manifest(trace.handle, sweep.handle, opt_path(compose_out), &lines));
      if (!compose_out.empty()) std::fprintf(stderr, "wrote %zu manifest lines\n", lines);
    } else if (*simulate) {
      if (sim_world.empty() && sim_preds.empty()) {
        std::fprintf(stderr, "simulate: need --world or --predictions\n");
        return SAGE_MISSING_PREDICTIONS;
      }
      TraceHandle trace;
      check(sage_trace_load(sim_trace.c_str(), &trace.handle));
      WorldHandle world;
      if (!sim_world.empty()) check(sage_world_load(sim_world.c_str(), &world.handle));
      Sweep sweep;
      build_sweep(sim_flags, sweep);
      check(sage_simulate(trace.handle, world.handle, opt_path(sim_preds), sweep.handle, opt_path(sim_out)));
    } else if (*exceed) {
      TraceHandle trace;
      check(sage_trace_load(exceed_trace.c_str(), &trace.handle));
      Sweep sweep;
      build_sweep(exceed_flags, sweep);
      check(sage_exceed_report(trace.handle, sweep.handle, opt_path(exceed_out)));
    } else if (*latency) {
      std::vector<const char*> dev_ptrs;
      for (const std::string& d : devices) dev_ptrs.push_back(d.c_str());
      std::vector<const char*> ch_ptrs;
      for (const std::string& c : channels) ch_ptrs.push_back(c.c_str());
      std::vector<std::string> eff_names;
      std::vector<double> eff_values;
      for (const std::string& e : efficiencies) {
        const std::size_t eq = e.find('=');
        if (eq == std::string::npos || eq == 0) {
          std::fprintf(stderr, "--efficiency expects name=value, got '%s'\n", e.c_str());
          return SAGE_INVALID_ARGUMENT;
        }
        char* end = nullptr;
        const double v = std::strtod(e.c_str() + eq + 1, &end);
        if (end == e.c_str() + eq + 1 || *end != '\0') {
          std::fprintf(stderr, "--efficiency value is not a number: '%s'\n", e.c_str());
          return SAGE_INVALID_ARGUMENT;
        }
        eff_names.push_back(e.substr(0, eq));
        eff_values.push_back(v);
      }
      std::vector<const char*> eff_ptrs;
      for (const std::string& n : eff_names) eff_ptrs.push_back(n.c_str());
      check(sage_latency_grid(dev_ptrs.data(), dev_ptrs.size(), ch_ptrs.data(), ch_ptrs.size(), lat_budgets.data(),
                              lat_budgets.size(), &model, eff_ptrs.data(), eff_values.data(), eff_values.size(),
                              opt_path(lat_out)));
    } else if (*report) {
      TraceHandle trace;
      check(sage_trace_load(report_trace.c_str(), &trace.handle));
      Sweep sweep;
      build_sweep(report_flags, sweep);
      check(sage_report(trace.handle, report_manifest.c_str(), report_preds.c_str(), sweep.handle,
                        opt_path(report_out)));
    }
  } catch (const CliError& e) {
    std::fprintf(stderr, "error: %s\n", sage_last_error_message());
    return static_cast<int>(e.status);
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return SAGE_INVALID_ARGUMENT;
  }
  return 0;
}
