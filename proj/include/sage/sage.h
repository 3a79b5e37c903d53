/* C interface to the evidence composition simulator.
 *
 * Every fallible call returns a sage_status. On failure the message of the
 * most recent error on the calling thread is available from
 * sage_last_error_message(). Objects are opaque handles released with the
 * matching *_free function; freeing NULL is a no-op.
 *
 * Output paths: NULL or "-" writes to standard output.
 */
#ifndef SAGE_SAGE_H
#define SAGE_SAGE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(SAGE_BUILDING_LIBRARY)
#define SAGE_API __declspec(dllexport)
#else
#define SAGE_API __declspec(dllimport)
#endif
#elif defined(__GNUC__)
#define SAGE_API __attribute__((visibility("default")))
#else
#define SAGE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sage_status {
  SAGE_OK = 0,
  SAGE_BAD_MAGIC = 1,
  SAGE_VERSION_UNSUPPORTED = 2,
  SAGE_CORRUPT_RECORD = 3,
  SAGE_NORMALIZATION_ERROR = 4,
  SAGE_IO_ERROR = 5,
  SAGE_HEADER_MISMATCH = 6,
  SAGE_INVALID_PARAMS = 7,
  SAGE_PLACEMENT_FAILURE = 8,
  SAGE_EMPTY_SELECTION = 9,
  SAGE_DOMAIN_ERROR = 10,
  SAGE_INVALID_BUDGET = 11,
  SAGE_SHAPE_MISMATCH = 12,
  SAGE_EMPTY_SET = 13,
  SAGE_DEGENERATE_INPUT = 14,
  SAGE_MISSING_SERVER_ATTENTION = 15,
  SAGE_INVALID_PROFILE = 16,
  SAGE_MISSING_PREDICTIONS = 17,
  SAGE_INVALID_CONFIG = 18,
  SAGE_INVALID_ARGUMENT = 19,
  SAGE_INTERNAL = 20
} sage_status;

typedef enum sage_method {
  SAGE_METHOD_SAGE = 0,
  SAGE_METHOD_PREFIX = 1,
  SAGE_METHOD_RANDOM = 2,
  SAGE_METHOD_GRID = 3,
  SAGE_METHOD_TOME = 4,
  SAGE_METHOD_BAT = 5,
  SAGE_METHOD_THRESHOLD = 6,
  SAGE_METHOD_FULL = 7
} sage_method;

typedef struct sage_trace sage_trace;
typedef struct sage_world sage_world;
typedef struct sage_sweep sage_sweep;

SAGE_API const char* sage_version(void);
SAGE_API const char* sage_status_string(sage_status status);
/* Message of the last failed call on this thread; "" if none. */
SAGE_API const char* sage_last_error_message(void);

/* ---- traces ---- */

typedef struct sage_trace_info {
  uint32_t units;   /* N */
  uint32_t dim;     /* D */
  uint32_t classes; /* K */
  uint32_t grid_h;  /* 0 when the trace has no grid dims */
  uint32_t grid_w;
  uint32_t flags;
  uint64_t count;
} sage_trace_info;

/* Borrowed view of one record; pointers stay valid until the trace is freed. */
typedef struct sage_record_view {
  uint64_t id;
  uint32_t label;
  uint32_t local_pred;
  double local_max_prob;
  int has_server_full_pred;
  uint32_t server_full_pred;
  const double* attention;        /* N */
  const double* server_attention; /* N or NULL */
  const float* embeddings;        /* N x D, row-major */
} sage_record_view;

/* Binary SEVD or the JSON-lines mirror, detected from the first byte. */
SAGE_API sage_status sage_trace_load(const char* path, sage_trace** out);
SAGE_API sage_status sage_trace_save(const sage_trace* trace, const char* path);
SAGE_API sage_status sage_trace_save_text(const sage_trace* trace, const char* path);
SAGE_API void sage_trace_free(sage_trace* trace);
SAGE_API sage_status sage_trace_info_get(const sage_trace* trace, sage_trace_info* out);
SAGE_API sage_status sage_trace_record(const sage_trace* trace, size_t index, sage_record_view* out);

/* ---- synthetic world ---- */

typedef struct sage_world_params {
  uint64_t seed;
  uint32_t classes;
  uint32_t regions;
  uint32_t dim;
  uint32_t grid_h;
  uint32_t grid_w;
  uint32_t footprint_radius;
  double dirichlet_alpha;
  double noise_sigma;
  double background_attention;
  double local_softmax_temp;
} sage_world_params;

SAGE_API void sage_world_params_default(sage_world_params* out);
SAGE_API sage_status sage_world_create(const sage_world_params* params, sage_world** out);
/* Reads / writes the JSON parameter sidecar. */
SAGE_API sage_status sage_world_load(const char* path, sage_world** out);
SAGE_API sage_status sage_world_save(const sage_world* world, const char* path);
SAGE_API sage_status sage_world_params_get(const sage_world* world, sage_world_params* out);
SAGE_API void sage_world_free(sage_world* world);
/* Records with ids first_id .. first_id + count - 1. */
SAGE_API sage_status sage_world_generate(const sage_world* world, uint64_t count, uint64_t first_id,
                                         sage_trace** out);
SAGE_API sage_status sage_server_emulate(const sage_world* world, const sage_trace* trace, size_t record,
                                         const uint32_t* selection, size_t selection_len, uint32_t* out_class);

/* ---- gate ---- */

SAGE_API sage_status sage_uncertainty(double local_max_prob, double* out_bits);
SAGE_API sage_status sage_gate(const sage_trace* trace, size_t record, double eta, int* out_offload,
                               double* out_bits);

/* ---- composers ---- */

typedef struct sage_composer_config {
  sage_method method;
  uint32_t budget;
  double prefilter_k; /* SAGE; INFINITY keeps every unit */
  uint64_t rng_seed;  /* Random; the record id selects the stream */
  double bat_attentive_fraction;
  double theta; /* Threshold */
} sage_composer_config;

SAGE_API const char* sage_method_name(sage_method method);
SAGE_API sage_status sage_method_parse(const char* name, sage_method* out);
SAGE_API void sage_composer_config_default(sage_composer_config* out);
/* Writes at most `capacity` indices; *out_count receives the selection size
 * even when the buffer is too small (SAGE_INVALID_ARGUMENT in that case). */
SAGE_API sage_status sage_compose(const sage_trace* trace, size_t record, const sage_composer_config* config,
                                  uint32_t* out_indices, size_t capacity, size_t* out_count);

/* ---- metrics ---- */

SAGE_API sage_status sage_coverage(const uint32_t* selection, size_t len, uint32_t height, uint32_t width,
                                   uint32_t coarse_h, uint32_t coarse_w, double* out);
SAGE_API sage_status sage_attention_entropy(const double* attention, size_t len, double* out);
SAGE_API sage_status sage_avg_cost(double offload_rate, uint32_t budget, uint32_t units, double* out);
SAGE_API sage_status sage_pearson(const double* xs, const double* ys, size_t len, double* out);
/* Exceed rate over the records of `trace` offloaded at `eta`. */
SAGE_API sage_status sage_exceed_rate(const sage_trace* trace, double eta, double theta, uint32_t budget,
                                      double* out);

/* ---- sweeps and reports ---- */

SAGE_API sage_status sage_sweep_create(sage_sweep** out);
SAGE_API void sage_sweep_free(sage_sweep* sweep);
SAGE_API sage_status sage_sweep_set_etas(sage_sweep* sweep, const double* etas, size_t len);
SAGE_API sage_status sage_sweep_set_budgets(sage_sweep* sweep, const uint32_t* budgets, size_t len);
SAGE_API sage_status sage_sweep_set_methods(sage_sweep* sweep, const sage_method* methods, size_t len);
SAGE_API sage_status sage_sweep_set_prefilter_ks(sage_sweep* sweep, const double* ks, size_t len);
SAGE_API sage_status sage_sweep_set_random_seeds(sage_sweep* sweep, const uint64_t* seeds, size_t len);
SAGE_API sage_status sage_sweep_set_theta(sage_sweep* sweep, double theta);
SAGE_API sage_status sage_sweep_set_bat_fraction(sage_sweep* sweep, double fraction);
SAGE_API sage_status sage_sweep_set_coarse_grid(sage_sweep* sweep, uint32_t height, uint32_t width);

/* Metrics CSV. Selections are composed in process; server predictions come
 * from the prediction file when given, otherwise from the world emulator.
 * At least one of `world` and `predictions_path` is required. */
SAGE_API sage_status sage_simulate(const sage_trace* trace, const sage_world* world, const char* predictions_path,
                                   const sage_sweep* sweep, const char* out_path);
/* Metrics CSV from precomputed selections and server predictions. */
SAGE_API sage_status sage_report(const sage_trace* trace, const char* manifest_path, const char* predictions_path,
                                 const sage_sweep* sweep, const char* out_path);
SAGE_API sage_status sage_emit_manifest(const sage_trace* trace, const sage_sweep* sweep, const char* out_path,
                                        size_t* out_lines);
/* Uses the sweep's etas, budgets and theta. */
SAGE_API sage_status sage_exceed_report(const sage_trace* trace, const sage_sweep* sweep, const char* out_path);

/* ---- latency model ---- */

typedef struct sage_model_profile {
  double edge_flops;
  double server_flops;
  double server_throughput;
  uint32_t units;
  uint32_t dim;
  uint32_t patch_bytes;
} sage_model_profile;

typedef struct sage_operating_point {
  double t_edge;
  double t_select;
  double t_uplink;
  double t_server;
  double t_total;
  uint64_t payload_bytes;
} sage_operating_point;

typedef enum sage_selection_cost {
  SAGE_SELECTION_AUTO = 0, /* charged only when B < N */
  SAGE_SELECTION_ALWAYS = 1,
  SAGE_SELECTION_NONE = 2
} sage_selection_cost;

SAGE_API void sage_model_profile_default(sage_model_profile* out);
SAGE_API uint64_t sage_selection_flops(uint32_t units, uint32_t budget, uint32_t dim);
/* Built-in devices: orin-nano, rpi5. Channels: nb-iot, lte-m, 5g-mmtc, wifi.
 * efficiency <= 0 keeps the profile default. */
SAGE_API sage_status sage_latency(const char* device, double efficiency, const char* channel, uint32_t budget,
                                  const sage_model_profile* model, sage_selection_cost selection,
                                  sage_operating_point* out);
/* Latency CSV over devices x channels x budgets (NULL lists use the defaults).
 * efficiency_names/values override per-device efficiency. */
SAGE_API sage_status sage_latency_grid(const char* const* devices, size_t n_devices, const char* const* channels,
                                       size_t n_channels, const uint32_t* budgets, size_t n_budgets,
                                       const sage_model_profile* model, const char* const* efficiency_names,
                                       const double* efficiency_values, size_t n_efficiency, const char* out_path);

#ifdef __cplusplus
}
#endif

#endif /* SAGE_SAGE_H */
