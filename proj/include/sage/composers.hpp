#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sage/evidence.hpp"

namespace sage {

enum class Method { Sage, Prefix, Random, Grid, Tome, Bat, Threshold, Full };

const char* method_name(Method m) noexcept;
std::optional<Method> parse_method(std::string_view name) noexcept;

/// Ordered, distinct unit indices chosen under a budget.
struct SelectionResult {
  std::vector<PatchIndex> indices;
  Method method = Method::Sage;
  std::uint32_t budget = 0;
  std::optional<double> prefilter_k;  // SAGE only
};

/// Row-major N x D embedding matrix view.
struct EmbeddingView {
  std::span<const float> values;
  std::size_t dim = 0;

  std::size_t rows() const noexcept { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const float> row(std::size_t i) const { return values.subspan(i * dim, dim); }
};

inline constexpr double kEmbeddingNormEpsilon = 1e-12;

struct ComposerConfig {
  Method method = Method::Sage;
  std::uint32_t budget = 1;
  double prefilter_k = 2.0;
  std::uint64_t rng_seed = 1;
  std::optional<GridDims> grid;
  double bat_attentive_fraction = 0.5;
  double theta = 0.95;
};

/// Unit indices by descending attention, ties to the lower index.
std::vector<PatchIndex> attention_order(std::span<const double> attention);

SelectionResult attention_prefix(std::span<const double> attention, std::uint32_t budget);

/// Importance prefilter followed by farthest-point sampling on cosine similarity.
///
/// The pool is the top clamp(round(prefilter_k * B), B, N) units by attention
/// (prefilter_k = +inf keeps all N). Pool rows are scaled by 1 / (|z| + 1e-12).
/// The first pick is the most attended pool member; each later pick is the
/// pool member whose largest similarity to the picks so far is smallest,
/// ties to the lower unit index. Attention plays no role after the seed.
SelectionResult sage_select(std::span<const double> attention, EmbeddingView embeddings, std::uint32_t budget,
                            double prefilter_k = 2.0);

/// Partial Fisher-Yates over [0, N): for i < min(B, N), swap slot i with a
/// slot drawn uniformly from [i, N). Stream keyed by (seed, stream, RandomComposer).
SelectionResult random_select(std::size_t units, std::uint32_t budget, std::uint64_t seed, std::uint64_t stream = 0);

/// g = ceil(sqrt(B)) lattice at rows floor((j + 0.5) H / g) and the same for
/// columns, enumerated row-major; the first B distinct cells are kept and any
/// shortfall is filled with the smallest unused flat indices.
SelectionResult uniform_grid(std::uint32_t height, std::uint32_t width, std::uint32_t budget);

/// Bipartite soft matching down to B groups, one representative unit per group.
SelectionResult tome_select(std::span<const double> attention, EmbeddingView embeddings, std::uint32_t budget);

/// Attentive prefix of ceil(fraction * B) units (at least one), then
/// farthest-point sampling over every remaining unit.
SelectionResult bat_select(std::span<const double> attention, EmbeddingView embeddings, std::uint32_t budget,
                           double attentive_fraction = 0.5);

struct ThresholdResult {
  std::size_t count = 0;
  SelectionResult selection;
};

/// Smallest attention-ordered prefix whose mass reaches theta of the total.
/// Not budget-feasible by construction.
ThresholdResult cumulative_threshold(std::span<const double> attention, double theta);

/// Dispatches on config.method for one record. Threshold selections are
/// clipped to the budget; Full returns every unit in index order.
SelectionResult compose(const EvidenceRecord& record, std::size_t dim, const ComposerConfig& config);

}  // namespace sage
