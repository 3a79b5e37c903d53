#include "sage/sage.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "sage/composers.hpp"
#include "sage/deployment.hpp"
#include "sage/error.hpp"
#include "sage/evidence.hpp"
#include "sage/gate.hpp"
#include "sage/metrics.hpp"
#include "sage/pipeline.hpp"
#include "sage/world.hpp"

struct sage_trace {
  sage::Trace trace;
};

struct sage_world {
  sage::SyntheticWorld world;
};

struct sage_sweep {
  sage::SweepConfig config;
};

static_assert(static_cast<int>(sage::ErrorCode::Internal) == SAGE_INTERNAL);
static_assert(static_cast<int>(sage::ErrorCode::InvalidArgument) == SAGE_INVALID_ARGUMENT);
static_assert(static_cast<int>(sage::Method::Full) == SAGE_METHOD_FULL);

namespace {

thread_local std::string last_error;

sage_status fail(sage_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

template <typename F>
sage_status guard(F&& body) noexcept {
  try {
    body();
    return SAGE_OK;
  } catch (const sage::Error& e) {
    return fail(static_cast<sage_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(SAGE_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SAGE_INTERNAL, e.what());
  } catch (...) {
    return fail(SAGE_INTERNAL, "unknown exception");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw sage::Error(sage::ErrorCode::InvalidArgument, what);
}

template <typename F>
void with_output(const char* path, F&& write) {
  if (path == nullptr || std::strcmp(path, "-") == 0) {
    write(std::cout);
    std::cout.flush();
    if (!std::cout) throw sage::Error(sage::ErrorCode::IoError, "write to stdout failed");
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw sage::Error(sage::ErrorCode::IoError, std::string("cannot open ") + path + " for writing");
  write(out);
  out.flush();
  if (!out) throw sage::Error(sage::ErrorCode::IoError, std::string("write failed: ") + path);
}

const sage::EvidenceRecord& record_at(const sage_trace* t, size_t index) {
  require(t != nullptr, "trace is null");
  if (index >= t->trace.records.size()) {
    throw sage::Error(sage::ErrorCode::InvalidArgument, "record index " + std::to_string(index) + " out of range");
  }
  return t->trace.records[index];
}

sage::WorldParams to_params(const sage_world_params& p) {
  sage::WorldParams w;
  w.seed = p.seed;
  w.classes = p.classes;
  w.regions = p.regions;
  w.dim = p.dim;
  w.grid_h = p.grid_h;
  w.grid_w = p.grid_w;
  w.footprint_radius = p.footprint_radius;
  w.dirichlet_alpha = p.dirichlet_alpha;
  w.noise_sigma = p.noise_sigma;
  w.background_attention = p.background_attention;
  w.local_softmax_temp = p.local_softmax_temp;
  return w;
}

sage_world_params from_params(const sage::WorldParams& w) {
  sage_world_params p;
  p.seed = w.seed;
  p.classes = w.classes;
  p.regions = w.regions;
  p.dim = w.dim;
  p.grid_h = w.grid_h;
  p.grid_w = w.grid_w;
  p.footprint_radius = w.footprint_radius;
  p.dirichlet_alpha = w.dirichlet_alpha;
  p.noise_sigma = w.noise_sigma;
  p.background_attention = w.background_attention;
  p.local_softmax_temp = w.local_softmax_temp;
  return p;
}

sage::ModelProfile to_model(const sage_model_profile* m) {
  sage::ModelProfile out;
  if (m == nullptr) return out;
  out.edge_flops = m->edge_flops;
  out.server_flops = m->server_flops;
  out.server_throughput = m->server_throughput;
  out.units = m->units;
  out.dim = m->dim;
  out.patch_bytes = m->patch_bytes;
  return out;
}

sage::DeviceProfile device_named(const std::string& name) {
  for (const sage::DeviceProfile& d : sage::default_devices()) {
    if (d.name == name) return d;
  }
  throw sage::Error(sage::ErrorCode::InvalidProfile, "unknown device '" + name + "'");
}

sage::ChannelProfile channel_named(const std::string& name) {
  for (const sage::ChannelProfile& c : sage::default_channels()) {
    if (c.name == name) return c;
  }
  throw sage::Error(sage::ErrorCode::InvalidProfile, "unknown channel '" + name + "'");
}

sage::Method to_method(sage_method m) {
  if (m < SAGE_METHOD_SAGE || m > SAGE_METHOD_FULL) {
    throw sage::Error(sage::ErrorCode::InvalidArgument, "unknown method " + std::to_string(static_cast<int>(m)));
  }
  return static_cast<sage::Method>(m);
}

template <typename T>
std::vector<T> to_vector(const T* values, size_t len) {
  require(values != nullptr || len == 0, "list pointer is null");
  return std::vector<T>(values, values + len);
}

// Applies `edit` to a copy and commits it only if the result validates.
template <typename F>
void update(sage_sweep* sweep, F&& edit) {
  require(sweep != nullptr, "sweep is null");
  sage::SweepConfig next = sweep->config;
  edit(next);
  sage::validate_sweep(next);
  sweep->config = std::move(next);
}

}  // namespace

extern "C" {

const char* sage_version(void) { return "1.0.0"; }

const char* sage_status_string(sage_status status) {
  if (status < SAGE_OK || status > SAGE_INTERNAL) return "Unknown";
  return sage::error_code_name(static_cast<sage::ErrorCode>(status));
}

const char* sage_last_error_message(void) { return last_error.c_str(); }

// ---- traces

sage_status sage_trace_load(const char* path, sage_trace** out) {
  return guard([&] {
    require(path != nullptr && out != nullptr, "path and out must be non-null");
    *out = nullptr;
    auto t = std::make_unique<sage_trace>();
    t->trace = sage::load_trace(path);
    *out = t.release();
  });
}

sage_status sage_trace_save(const sage_trace* trace, const char* path) {
  return guard([&] {
    require(trace != nullptr && path != nullptr, "trace and path must be non-null");
    sage::write_trace(trace->trace.records, trace->trace.header, path);
  });
}

sage_status sage_trace_save_text(const sage_trace* trace, const char* path) {
  return guard([&] {
    require(trace != nullptr && path != nullptr, "trace and path must be non-null");
    sage::write_trace_text(trace->trace.records, trace->trace.header, path);
  });
}

void sage_trace_free(sage_trace* trace) { delete trace; }

sage_status sage_trace_info_get(const sage_trace* trace, sage_trace_info* out) {
  return guard([&] {
    require(trace != nullptr && out != nullptr, "trace and out must be non-null");
    const sage::TraceHeader& h = trace->trace.header;
    out->units = h.units;
    out->dim = h.dim;
    out->classes = h.classes;
    out->grid_h = h.grid ? h.grid->height : 0;
    out->grid_w = h.grid ? h.grid->width : 0;
    out->flags = h.flags;
    out->count = trace->trace.records.size();
  });
}

sage_status sage_trace_record(const sage_trace* trace, size_t index, sage_record_view* out) {
  return guard([&] {
    require(out != nullptr, "out must be non-null");
    const sage::EvidenceRecord& r = record_at(trace, index);
    out->id = r.id;
    out->label = r.label;
    out->local_pred = r.local_pred;
    out->local_max_prob = r.local_max_prob;
    out->has_server_full_pred = r.server_full_pred ? 1 : 0;
    out->server_full_pred = r.server_full_pred.value_or(0xFFFFFFFFu);
    out->attention = r.attention.data();
    out->server_attention = r.server_attention ? r.server_attention->data() : nullptr;
    out->embeddings = r.embeddings.data();
  });
}

// ---- synthetic world

void sage_world_params_default(sage_world_params* out) {
  if (out != nullptr) *out = from_params(sage::WorldParams{});
}

sage_status sage_world_create(const sage_world_params* params, sage_world** out) {
  return guard([&] {
    require(params != nullptr && out != nullptr, "params and out must be non-null");
    *out = nullptr;
    *out = new sage_world{sage::SyntheticWorld(to_params(*params))};
  });
}

sage_status sage_world_load(const char* path, sage_world** out) {
  return guard([&] {
    require(path != nullptr && out != nullptr, "path and out must be non-null");
    *out = nullptr;
    *out = new sage_world{sage::SyntheticWorld(sage::load_world_params(path))};
  });
}

sage_status sage_world_save(const sage_world* world, const char* path) {
  return guard([&] {
    require(world != nullptr && path != nullptr, "world and path must be non-null");
    sage::save_world_params(world->world.params(), path);
  });
}

sage_status sage_world_params_get(const sage_world* world, sage_world_params* out) {
  return guard([&] {
    require(world != nullptr && out != nullptr, "world and out must be non-null");
    *out = from_params(world->world.params());
  });
}

void sage_world_free(sage_world* world) { delete world; }

sage_status sage_world_generate(const sage_world* world, uint64_t count, uint64_t first_id, sage_trace** out) {
  return guard([&] {
    require(world != nullptr && out != nullptr, "world and out must be non-null");
    *out = nullptr;
    auto t = std::make_unique<sage_trace>();
    t->trace.header = world->world.trace_header();
    t->trace.records = world->world.generate_corpus(count, first_id);
    t->trace.header.count = t->trace.records.size();
    *out = t.release();
  });
}

sage_status sage_server_emulate(const sage_world* world, const sage_trace* trace, size_t record,
                                const uint32_t* selection, size_t selection_len, uint32_t* out_class) {
  return guard([&] {
    require(world != nullptr && out_class != nullptr, "world and out must be non-null");
    require(selection != nullptr || selection_len == 0, "selection is null");
    const sage::EvidenceRecord& r = record_at(trace, record);
    *out_class = sage::server_emulate(world->world, r, std::span<const uint32_t>(selection, selection_len));
  });
}

// ---- gate

sage_status sage_uncertainty(double local_max_prob, double* out_bits) {
  return guard([&] {
    require(out_bits != nullptr, "out must be non-null");
    *out_bits = sage::uncertainty(local_max_prob);
  });
}

sage_status sage_gate(const sage_trace* trace, size_t record, double eta, int* out_offload, double* out_bits) {
  return guard([&] {
    const sage::GateDecision d = sage::gate(record_at(trace, record), eta);
    if (out_offload != nullptr) *out_offload = d.offload ? 1 : 0;
    if (out_bits != nullptr) *out_bits = d.uncertainty;
  });
}

// ---- composers

const char* sage_method_name(sage_method method) {
  if (method < SAGE_METHOD_SAGE || method > SAGE_METHOD_FULL) return "unknown";
  return sage::method_name(static_cast<sage::Method>(method));
}

sage_status sage_method_parse(const char* name, sage_method* out) {
  return guard([&] {
    require(name != nullptr && out != nullptr, "name and out must be non-null");
    const std::optional<sage::Method> m = sage::parse_method(name);
    if (!m) throw sage::Error(sage::ErrorCode::InvalidArgument, std::string("unknown method '") + name + "'");
    *out = static_cast<sage_method>(*m);
  });
}

void sage_composer_config_default(sage_composer_config* out) {
  if (out == nullptr) return;
  const sage::ComposerConfig c;
  out->method = static_cast<sage_method>(c.method);
  out->budget = c.budget;
  out->prefilter_k = c.prefilter_k;
  out->rng_seed = c.rng_seed;
  out->bat_attentive_fraction = c.bat_attentive_fraction;
  out->theta = c.theta;
}

sage_status sage_compose(const sage_trace* trace, size_t record, const sage_composer_config* config,
                         uint32_t* out_indices, size_t capacity, size_t* out_count) {
  return guard([&] {
    require(config != nullptr && out_count != nullptr, "config and out_count must be non-null");
    require(out_indices != nullptr || capacity == 0, "index buffer is null");
    const sage::EvidenceRecord& r = record_at(trace, record);
    sage::ComposerConfig c;
    c.method = to_method(config->method);
    c.budget = config->budget;
    c.prefilter_k = config->prefilter_k;
    c.rng_seed = config->rng_seed;
    c.grid = trace->trace.header.grid;
    c.bat_attentive_fraction = config->bat_attentive_fraction;
    c.theta = config->theta;
    const sage::SelectionResult sel = sage::compose(r, trace->trace.header.dim, c);
    *out_count = sel.indices.size();
    if (sel.indices.size() > capacity) {
      throw sage::Error(sage::ErrorCode::InvalidArgument,
                        "index buffer holds " + std::to_string(capacity) + ", need " + std::to_string(sel.indices.size()));
    }
    std::copy(sel.indices.begin(), sel.indices.end(), out_indices);
  });
}

// ---- metrics

sage_status sage_coverage(const uint32_t* selection, size_t len, uint32_t height, uint32_t width, uint32_t coarse_h,
                          uint32_t coarse_w, double* out) {
  return guard([&] {
    require(out != nullptr, "out must be non-null");
    require(selection != nullptr || len == 0, "selection is null");
    *out = sage::coverage(std::span<const uint32_t>(selection, len), height, width, coarse_h, coarse_w);
  });
}

sage_status sage_attention_entropy(const double* attention, size_t len, double* out) {
  return guard([&] {
    require(out != nullptr, "out must be non-null");
    require(attention != nullptr || len == 0, "attention is null");
    *out = sage::attention_entropy_norm(std::span<const double>(attention, len));
  });
}

sage_status sage_avg_cost(double offload_rate, uint32_t budget, uint32_t units, double* out) {
  return guard([&] {
    require(out != nullptr, "out must be non-null");
    *out = sage::avg_cost(offload_rate, budget, units);
  });
}

sage_status sage_pearson(const double* xs, const double* ys, size_t len, double* out) {
  return guard([&] {
    require(out != nullptr, "out must be non-null");
    require((xs != nullptr && ys != nullptr) || len == 0, "series are null");
    *out = sage::pearson(std::span<const double>(xs, len), std::span<const double>(ys, len));
  });
}

sage_status sage_exceed_rate(const sage_trace* trace, double eta, double theta, uint32_t budget, double* out) {
  return guard([&] {
    require(trace != nullptr && out != nullptr, "trace and out must be non-null");
    std::vector<const sage::EvidenceRecord*> offloaded;
    for (const sage::EvidenceRecord& r : trace->trace.records) {
      if (sage::gate(r, eta).offload) offloaded.push_back(&r);
    }
    *out = sage::exceed_rate(std::span<const sage::EvidenceRecord* const>(offloaded), theta, budget);
  });
}

// ---- sweeps and reports

sage_status sage_sweep_create(sage_sweep** out) {
  return guard([&] {
    require(out != nullptr, "out must be non-null");
    *out = new sage_sweep{};
  });
}

void sage_sweep_free(sage_sweep* sweep) { delete sweep; }

sage_status sage_sweep_set_etas(sage_sweep* sweep, const double* etas, size_t len) {
  return guard([&] { update(sweep, [&](sage::SweepConfig& c) { c.etas = to_vector(etas, len); }); });
}

sage_status sage_sweep_set_budgets(sage_sweep* sweep, const uint32_t* budgets, size_t len) {
  return guard([&] { update(sweep, [&](sage::SweepConfig& c) { c.budgets = to_vector(budgets, len); }); });
}

sage_status sage_sweep_set_methods(sage_sweep* sweep, const sage_method* methods, size_t len) {
  return guard([&] {
    update(sweep, [&](sage::SweepConfig& c) {
      std::vector<sage::Method> ms;
      for (const sage_method m : to_vector(methods, len)) ms.push_back(to_method(m));
      c.methods = std::move(ms);
    });
  });
}

sage_status sage_sweep_set_prefilter_ks(sage_sweep* sweep, const double* ks, size_t len) {
  return guard([&] { update(sweep, [&](sage::SweepConfig& c) { c.prefilter_ks = to_vector(ks, len); }); });
}

sage_status sage_sweep_set_random_seeds(sage_sweep* sweep, const uint64_t* seeds, size_t len) {
  return guard([&] {
    update(sweep, [&](sage::SweepConfig& c) {
      const std::vector<uint64_t> v = to_vector(seeds, len);
      c.random_seeds.assign(v.begin(), v.end());
    });
  });
}

sage_status sage_sweep_set_theta(sage_sweep* sweep, double theta) {
  return guard([&] { update(sweep, [&](sage::SweepConfig& c) { c.theta = theta; }); });
}

sage_status sage_sweep_set_bat_fraction(sage_sweep* sweep, double fraction) {
  return guard([&] { update(sweep, [&](sage::SweepConfig& c) { c.bat_attentive_fraction = fraction; }); });
}

sage_status sage_sweep_set_coarse_grid(sage_sweep* sweep, uint32_t height, uint32_t width) {
  return guard([&] {
    update(sweep, [&](sage::SweepConfig& c) {
      c.coarse_h = height;
      c.coarse_w = width;
    });
  });
}

sage_status sage_simulate(const sage_trace* trace, const sage_world* world, const char* predictions_path,
                          const sage_sweep* sweep, const char* out_path) {
  return guard([&] {
    require(trace != nullptr && sweep != nullptr, "trace and sweep must be non-null");
    std::optional<sage::PredictionTable> preds;
    if (predictions_path != nullptr) preds = sage::read_predictions(predictions_path);
    sage::SimulationInputs in;
    in.trace = &trace->trace;
    in.world = world != nullptr ? &world->world : nullptr;
    in.predictions = preds ? &*preds : nullptr;
    const std::vector<sage::MetricRow> rows = sage::run_simulation(in, sweep->config);
    with_output(out_path, [&](std::ostream& os) { sage::write_metrics_csv(rows, os); });
  });
}

sage_status sage_report(const sage_trace* trace, const char* manifest_path, const char* predictions_path,
                        const sage_sweep* sweep, const char* out_path) {
  return guard([&] {
    require(trace != nullptr && sweep != nullptr, "trace and sweep must be non-null");
    require(manifest_path != nullptr && predictions_path != nullptr, "manifest and predictions are required");
    const sage::Manifest manifest = sage::read_manifest(manifest_path);
    const sage::PredictionTable preds = sage::read_predictions(predictions_path);
    sage::SimulationInputs in;
    in.trace = &trace->trace;
    in.predictions = &preds;
    in.manifest = &manifest;
    const std::vector<sage::MetricRow> rows = sage::run_simulation(in, sweep->config);
    with_output(out_path, [&](std::ostream& os) { sage::write_metrics_csv(rows, os); });
  });
}

sage_status sage_emit_manifest(const sage_trace* trace, const sage_sweep* sweep, const char* out_path,
                               size_t* out_lines) {
  return guard([&] {
    require(trace != nullptr && sweep != nullptr, "trace and sweep must be non-null");
    size_t lines = 0;
    with_output(out_path, [&](std::ostream& os) { lines = sage::emit_manifest(trace->trace, sweep->config, os); });
    if (out_lines != nullptr) *out_lines = lines;
  });
}

sage_status sage_exceed_report(const sage_trace* trace, const sage_sweep* sweep, const char* out_path) {
  return guard([&] {
    require(trace != nullptr && sweep != nullptr, "trace and sweep must be non-null");
    const sage::SweepConfig& s = sweep->config;
    if (!(s.theta > 0.0 && s.theta <= 1.0)) throw sage::Error(sage::ErrorCode::InvalidConfig, "theta must lie in (0, 1]");
    const std::vector<sage::ExceedRow> rows = sage::exceed_report(trace->trace, s.theta, s.etas, s.budgets);
    with_output(out_path, [&](std::ostream& os) { sage::write_exceed_csv(rows, os); });
  });
}

// ---- latency model

void sage_model_profile_default(sage_model_profile* out) {
  if (out == nullptr) return;
  const sage::ModelProfile m;
  out->edge_flops = m.edge_flops;
  out->server_flops = m.server_flops;
  out->server_throughput = m.server_throughput;
  out->units = m.units;
  out->dim = m.dim;
  out->patch_bytes = m.patch_bytes;
}

uint64_t sage_selection_flops(uint32_t units, uint32_t budget, uint32_t dim) {
  return sage::selection_flops(units, budget, dim);
}

sage_status sage_latency(const char* device, double efficiency, const char* channel, uint32_t budget,
                         const sage_model_profile* model, sage_selection_cost selection, sage_operating_point* out) {
  return guard([&] {
    require(device != nullptr && channel != nullptr && out != nullptr, "device, channel and out must be non-null");
    sage::DeviceProfile d = device_named(device);
    if (efficiency > 0.0) d.efficiency = efficiency;
    sage::SelectionCost cost = sage::SelectionCost::Auto;
    if (selection == SAGE_SELECTION_ALWAYS) cost = sage::SelectionCost::Always;
    if (selection == SAGE_SELECTION_NONE) cost = sage::SelectionCost::None;
    const sage::OperatingPoint p = sage::total_latency(d, channel_named(channel), budget, to_model(model), cost);
    out->t_edge = p.t_edge;
    out->t_select = p.t_select;
    out->t_uplink = p.t_uplink;
    out->t_server = p.t_server;
    out->t_total = p.t_total;
    out->payload_bytes = p.payload_bytes;
  });
}

sage_status sage_latency_grid(const char* const* devices, size_t n_devices, const char* const* channels,
                              size_t n_channels, const uint32_t* budgets, size_t n_budgets,
                              const sage_model_profile* model, const char* const* efficiency_names,
                              const double* efficiency_values, size_t n_efficiency, const char* out_path) {
  return guard([&] {
    std::vector<sage::DeviceProfile> ds;
    if (devices == nullptr) {
      ds = sage::default_devices();
    } else {
      for (size_t i = 0; i < n_devices; ++i) ds.push_back(device_named(devices[i]));
    }
    std::vector<sage::ChannelProfile> cs;
    if (channels == nullptr) {
      cs = sage::default_channels();
    } else {
      for (size_t i = 0; i < n_channels; ++i) cs.push_back(channel_named(channels[i]));
    }
    const std::vector<uint32_t> bs = budgets == nullptr ? sage::default_latency_budgets() : to_vector(budgets, n_budgets);
    require((efficiency_names != nullptr && efficiency_values != nullptr) || n_efficiency == 0,
            "efficiency lists are null");
    for (size_t i = 0; i < n_efficiency; ++i) {
      const std::string name = efficiency_names[i];
      bool found = false;
      for (sage::DeviceProfile& d : ds) {
        if (d.name == name) {
          d.efficiency = efficiency_values[i];
          found = true;
        }
      }
      if (!found) throw sage::Error(sage::ErrorCode::InvalidProfile, "efficiency given for unused device '" + name + "'");
    }
    const std::vector<sage::OperatingPoint> rows = sage::operating_point_grid(ds, cs, bs, to_model(model));
    with_output(out_path, [&](std::ostream& os) { sage::write_latency_csv(rows, os); });
  });
}

}  // extern "C"
