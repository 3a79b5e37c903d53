#include "sage/composers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sage/error.hpp"
#include "sage/rng.hpp"

namespace sage {

namespace {

void require_budget(std::uint32_t budget) {
  if (budget == 0) throw Error(ErrorCode::InvalidBudget, "budget must be >= 1");
}

void require_shapes(std::span<const double> attention, EmbeddingView emb) {
  if (attention.empty()) throw Error(ErrorCode::ShapeMismatch, "attention is empty");
  if (emb.dim == 0 || emb.values.size() != attention.size() * emb.dim) {
    throw Error(ErrorCode::ShapeMismatch, "embeddings are not N x D for N = " + std::to_string(attention.size()));
  }
}

std::vector<double> unit_row(std::span<const float> z) {
  double norm = 0.0;
  for (float x : z) norm += static_cast<double>(x) * x;
  norm = std::sqrt(norm) + kEmbeddingNormEpsilon;
  std::vector<double> out(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) out[k] = static_cast<double>(z[k]) / norm;
  return out;
}

double dot(std::span<const double> u, std::span<const double> v) noexcept {
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) s += u[k] * v[k];
  return s;
}

// Greedy min-max similarity selection. `picked` holds the already-chosen
// units (in order); `candidates` must be ascending. Appends until `target`
// units are picked or candidates run out.
void farthest_point_fill(std::vector<PatchIndex>& picked, std::vector<PatchIndex> candidates,
                         const std::vector<std::vector<double>>& unit, std::size_t target) {
  std::vector<bool> taken(unit.size(), false);
  for (PatchIndex s : picked) taken[s] = true;
  std::erase_if(candidates, [&](PatchIndex i) { return taken[i]; });

  std::vector<double> max_sim(candidates.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    for (PatchIndex s : picked) max_sim[c] = std::max(max_sim[c], dot(unit[candidates[c]], unit[s]));
  }
  std::vector<bool> used(candidates.size(), false);
  while (picked.size() < target) {
    std::size_t best = candidates.size();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (used[c]) continue;
      if (best == candidates.size() || max_sim[c] < max_sim[best]) best = c;
    }
    if (best == candidates.size()) break;
    used[best] = true;
    const PatchIndex chosen = candidates[best];
    picked.push_back(chosen);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (!used[c]) max_sim[c] = std::max(max_sim[c], dot(unit[candidates[c]], unit[chosen]));
    }
  }
}

}  // namespace

const char* method_name(Method m) noexcept {
  switch (m) {
    case Method::Sage: return "sage";
    case Method::Prefix: return "prefix";
    case Method::Random: return "random";
    case Method::Grid: return "grid";
    case Method::Tome: return "tome";
    case Method::Bat: return "bat";
    case Method::Threshold: return "threshold";
    case Method::Full: return "full";
  }
  return "unknown";
}

std::optional<Method> parse_method(std::string_view name) noexcept {
  for (Method m : {Method::Sage, Method::Prefix, Method::Random, Method::Grid, Method::Tome, Method::Bat,
                   Method::Threshold, Method::Full}) {
    if (name == method_name(m)) return m;
  }
  return std::nullopt;
}

std::vector<PatchIndex> attention_order(std::span<const double> attention) {
  std::vector<PatchIndex> order(attention.size());
  std::iota(order.begin(), order.end(), PatchIndex{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](PatchIndex a, PatchIndex b) { return attention[a] > attention[b]; });
  return order;
}

SelectionResult attention_prefix(std::span<const double> attention, std::uint32_t budget) {
  require_budget(budget);
  if (attention.empty()) throw Error(ErrorCode::ShapeMismatch, "attention is empty");
  SelectionResult out{attention_order(attention), Method::Prefix, budget, std::nullopt};
  out.indices.resize(std::min<std::size_t>(budget, attention.size()));
  return out;
}

SelectionResult sage_select(std::span<const double> attention, EmbeddingView embeddings, std::uint32_t budget,
                            double prefilter_k) {
  require_budget(budget);
  require_shapes(attention, embeddings);
  if (std::isnan(prefilter_k) || prefilter_k < 1.0) {
    throw Error(ErrorCode::InvalidArgument, "prefilter_k must be >= 1");
  }
  const std::size_t n = attention.size();
  const std::size_t target = std::min<std::size_t>(budget, n);
  std::size_t pool_size = n;
  const double scaled = prefilter_k * static_cast<double>(budget);
  if (scaled < static_cast<double>(n)) pool_size = static_cast<std::size_t>(std::llround(scaled));
  pool_size = std::clamp(pool_size, target, n);

  std::vector<PatchIndex> pool = attention_order(attention);
  pool.resize(pool_size);
  const PatchIndex seed = pool.front();

  std::vector<std::vector<double>> unit(n);
  for (PatchIndex i : pool) unit[i] = unit_row(embeddings.row(i));

  std::sort(pool.begin(), pool.end());
  SelectionResult out{{seed}, Method::Sage, budget, prefilter_k};
  out.indices.reserve(target);
  farthest_point_fill(out.indices, std::move(pool), unit, target);
  return out;
}

SelectionResult random_select(std::size_t units, std::uint32_t budget, std::uint64_t seed, std::uint64_t stream) {
  require_budget(budget);
  if (units == 0) throw Error(ErrorCode::ShapeMismatch, "N must be >= 1");
  CounterRng rng(seed, stream, static_cast<std::uint64_t>(StreamTag::RandomComposer));
  std::vector<PatchIndex> slots(units);
  std::iota(slots.begin(), slots.end(), PatchIndex{0});
  const std::size_t take = std::min<std::size_t>(budget, units);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_below(units - i));
    std::swap(slots[i], slots[j]);
  }
  slots.resize(take);
  return SelectionResult{std::move(slots), Method::Random, budget, std::nullopt};
}

SelectionResult uniform_grid(std::uint32_t height, std::uint32_t width, std::uint32_t budget) {
  require_budget(budget);
  const std::uint64_t n = static_cast<std::uint64_t>(height) * width;
  if (n == 0) throw Error(ErrorCode::ShapeMismatch, "grid must be non-empty");
  if (budget > n) throw Error(ErrorCode::InvalidBudget, "budget exceeds the number of grid cells");
  std::uint64_t g = 1;
  while (g * g < budget) ++g;
  // floor((j + 0.5) * L / g) == floor((2j + 1) * L / (2g)) in exact integers.
  auto line = [g](std::uint64_t j, std::uint64_t len) { return ((2 * j + 1) * len) / (2 * g); };

  std::vector<bool> used(n, false);
  std::vector<PatchIndex> cells;
  cells.reserve(budget);
  for (std::uint64_t j = 0; j < g && cells.size() < budget; ++j) {
    for (std::uint64_t k = 0; k < g && cells.size() < budget; ++k) {
      const std::uint64_t idx = line(j, height) * width + line(k, width);
      if (!used[idx]) {
        used[idx] = true;
        cells.push_back(static_cast<PatchIndex>(idx));
      }
    }
  }
  for (std::uint64_t idx = 0; idx < n && cells.size() < budget; ++idx) {
    if (!used[idx]) {
      used[idx] = true;
      cells.push_back(static_cast<PatchIndex>(idx));
    }
  }
  return SelectionResult{std::move(cells), Method::Grid, budget, std::nullopt};
}

SelectionResult tome_select(std::span<const double> attention, EmbeddingView embeddings, std::uint32_t budget) {
  require_budget(budget);
  require_shapes(attention, embeddings);
  const std::size_t n = attention.size();

  struct Group {
    std::vector<PatchIndex> members;
    double size = 1.0;
    std::vector<double> emb;
  };
  std::vector<Group> groups(n);
  for (std::size_t i = 0; i < n; ++i) {
    groups[i].members = {static_cast<PatchIndex>(i)};
    groups[i].emb = unit_row(embeddings.row(i));
  }

  while (groups.size() > budget) {
    const std::size_t m = groups.size();
    const std::size_t r = std::min(m / 2, m - budget);
    // Positions 0, 2, 4, ... form side A; 1, 3, 5, ... side B.
    struct Edge {
      std::size_t a;
      std::size_t b;
      double sim;
    };
    std::vector<Edge> edges;
    edges.reserve((m + 1) / 2);
    for (std::size_t a = 0; a < m; a += 2) {
      Edge e{a, 1, -std::numeric_limits<double>::infinity()};
      for (std::size_t b = 1; b < m; b += 2) {
        const double s = dot(groups[a].emb, groups[b].emb);
        if (s > e.sim) {
          e.b = b;
          e.sim = s;
        }
      }
      edges.push_back(e);
    }
    std::stable_sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) { return x.sim > y.sim; });
    edges.resize(r);
    std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) { return x.a < y.a; });

    std::vector<bool> absorbed(m, false);
    std::vector<std::vector<std::size_t>> into(m);
    for (const Edge& e : edges) {
      absorbed[e.a] = true;
      into[e.b].push_back(e.a);
    }
    for (std::size_t b = 1; b < m; b += 2) {
      if (into[b].empty()) continue;
      Group& dst = groups[b];
      std::vector<double> acc(dst.emb.size());
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] = dst.size * dst.emb[k];
      double total = dst.size;
      for (std::size_t a : into[b]) {
        const Group& src = groups[a];
        for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += src.size * src.emb[k];
        total += src.size;
        dst.members.insert(dst.members.end(), src.members.begin(), src.members.end());
      }
      double norm = 0.0;
      for (double& x : acc) {
        x /= total;
        norm += x * x;
      }
      norm = std::sqrt(norm) + kEmbeddingNormEpsilon;
      for (double& x : acc) x /= norm;
      dst.emb = std::move(acc);
      dst.size = total;
    }
    std::vector<Group> next;
    next.reserve(m - r);
    for (std::size_t p = 0; p < m; ++p) {
      if (!absorbed[p]) next.push_back(std::move(groups[p]));
    }
    groups = std::move(next);
  }

  std::vector<PatchIndex> reps;
  reps.reserve(groups.size());
  for (const Group& g : groups) {
    PatchIndex best = g.members.front();
    for (PatchIndex i : g.members) {
      if (attention[i] > attention[best] || (attention[i] == attention[best] && i < best)) best = i;
    }
    reps.push_back(best);
  }
  std::sort(reps.begin(), reps.end());
  return SelectionResult{std::move(reps), Method::Tome, budget, std::nullopt};
}

SelectionResult bat_select(std::span<const double> attention, EmbeddingView embeddings, std::uint32_t budget,
                           double attentive_fraction) {
  require_budget(budget);
  require_shapes(attention, embeddings);
  if (!(attentive_fraction >= 0.0 && attentive_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "attentive fraction must lie in [0, 1]");
  }
  const std::size_t n = attention.size();
  const std::size_t target = std::min<std::size_t>(budget, n);
  const auto attentive = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(attentive_fraction * static_cast<double>(target))), 1, target);

  std::vector<PatchIndex> order = attention_order(attention);
  SelectionResult out{{order.begin(), order.begin() + static_cast<std::ptrdiff_t>(attentive)},
                      Method::Bat,
                      budget,
                      std::nullopt};
  if (attentive < target) {
    std::vector<std::vector<double>> unit(n);
    for (std::size_t i = 0; i < n; ++i) unit[i] = unit_row(embeddings.row(i));
    std::vector<PatchIndex> candidates(n);
    std::iota(candidates.begin(), candidates.end(), PatchIndex{0});
    farthest_point_fill(out.indices, std::move(candidates), unit, target);
  }
  return out;
}

ThresholdResult cumulative_threshold(std::span<const double> attention, double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw Error(ErrorCode::DomainError, "theta must lie in (0, 1]");
  if (attention.empty()) throw Error(ErrorCode::ShapeMismatch, "attention is empty");
  double total = 0.0;
  for (double a : attention) total += a;
  const double goal = theta * total;
  std::vector<PatchIndex> order = attention_order(attention);
  std::size_t count = order.size();
  double cum = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    cum += attention[order[k]];
    if (cum >= goal) {
      count = k + 1;
      break;
    }
  }
  order.resize(count);
  ThresholdResult out;
  out.count = count;
  out.selection = SelectionResult{std::move(order), Method::Threshold, static_cast<std::uint32_t>(count), std::nullopt};
  return out;
}

SelectionResult compose(const EvidenceRecord& record, std::size_t dim, const ComposerConfig& config) {
  const std::span<const double> att(record.attention);
  const EmbeddingView emb{record.embeddings, dim};
  switch (config.method) {
    case Method::Sage: return sage_select(att, emb, config.budget, config.prefilter_k);
    case Method::Prefix: return attention_prefix(att, config.budget);
    case Method::Random: return random_select(att.size(), config.budget, config.rng_seed, record.id);
    case Method::Grid:
      if (!config.grid) throw Error(ErrorCode::InvalidConfig, "grid composer needs grid dims (H, W)");
      if (static_cast<std::size_t>(config.grid->height) * config.grid->width != att.size()) {
        throw Error(ErrorCode::ShapeMismatch, "grid dims do not match N");
      }
      {
        require_budget(config.budget);
        SelectionResult s = uniform_grid(config.grid->height, config.grid->width,
                                         std::min<std::uint32_t>(config.budget, static_cast<std::uint32_t>(att.size())));
        s.budget = config.budget;
        return s;
      }
    case Method::Tome: return tome_select(att, emb, config.budget);
    case Method::Bat: return bat_select(att, emb, config.budget, config.bat_attentive_fraction);
    case Method::Threshold: {
      require_budget(config.budget);
      ThresholdResult t = cumulative_threshold(att, config.theta);
      if (t.selection.indices.size() > config.budget) t.selection.indices.resize(config.budget);
      t.selection.budget = config.budget;
      return t.selection;
    }
    case Method::Full: {
      std::vector<PatchIndex> all(att.size());
      std::iota(all.begin(), all.end(), PatchIndex{0});
      return SelectionResult{std::move(all), Method::Full, static_cast<std::uint32_t>(att.size()), std::nullopt};
    }
  }
  throw Error(ErrorCode::InvalidConfig, "unknown composer method");
}

}  // namespace sage
