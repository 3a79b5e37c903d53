#include "sage/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sage/error.hpp"
#include "sage/rng.hpp"

namespace sage {

namespace {

constexpr double kNormEpsilon = 1e-12;

std::uint64_t tag(StreamTag t) { return static_cast<std::uint64_t>(t); }

struct Region {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
};

// Region membership per patch; -1 marks background.
std::vector<int> place_regions(const WorldParams& p, std::uint64_t image_seed) {
  CounterRng rng(p.seed, image_seed, tag(StreamTag::Placement));
  const std::uint32_t rad = p.footprint_radius;
  const std::uint32_t rows = p.grid_h - 2 * rad;
  const std::uint32_t cols = p.grid_w - 2 * rad;
  std::vector<Region> placed;
  std::uint32_t attempts = 0;
  while (placed.size() < p.regions) {
    if (attempts++ >= SyntheticWorld::kMaxPlacementAttempts) {
      throw Error(ErrorCode::PlacementFailure, "could not place " + std::to_string(p.regions) +
                                                   " non-overlapping footprints in " +
                                                   std::to_string(SyntheticWorld::kMaxPlacementAttempts) +
                                                   " attempts");
    }
    Region cand{static_cast<std::uint32_t>(rng.uniform_below(rows)) + rad,
                static_cast<std::uint32_t>(rng.uniform_below(cols)) + rad};
    const bool overlaps = std::any_of(placed.begin(), placed.end(), [&](const Region& o) {
      const auto dr = static_cast<std::uint32_t>(std::abs(static_cast<int>(o.row) - static_cast<int>(cand.row)));
      const auto dc = static_cast<std::uint32_t>(std::abs(static_cast<int>(o.col) - static_cast<int>(cand.col)));
      return std::max(dr, dc) <= 2 * rad;
    });
    if (!overlaps) placed.push_back(cand);
  }
  std::vector<int> owner(p.units(), -1);
  for (std::size_t r = 0; r < placed.size(); ++r) {
    for (std::uint32_t i = placed[r].row - rad; i <= placed[r].row + rad; ++i) {
      for (std::uint32_t j = placed[r].col - rad; j <= placed[r].col + rad; ++j) {
        owner[i * p.grid_w + j] = static_cast<int>(r);
      }
    }
  }
  return owner;
}

std::vector<double> region_weights(const WorldParams& p, std::uint64_t image_seed) {
  CounterRng rng(p.seed, image_seed, tag(StreamTag::RegionWeights));
  std::vector<double> beta(p.regions);
  double sum = 0.0;
  for (double& b : beta) {
    b = rng.gamma(p.dirichlet_alpha);
    sum += b;
  }
  if (!(sum > 0.0)) {
    std::fill(beta.begin(), beta.end(), 1.0 / p.regions);
    return beta;
  }
  for (double& b : beta) b /= sum;
  return beta;
}

// Normalizes to sum 1 and rounds to the f32 values the trace format stores.
void normalize_as_f32(std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  if (!(sum > 0.0)) {
    std::fill(v.begin(), v.end(), 1.0 / static_cast<double>(v.size()));
    sum = 1.0;
  }
  for (double& x : v) x = static_cast<float>(x / sum);
}

std::size_t argmax_lowest(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

double cosine(std::span<const float> u, std::span<const double> v) noexcept {
  double dot = 0.0;
  double nu = 0.0;
  double nv = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double a = u[k];
    dot += a * v[k];
    nu += a * a;
    nv += v[k] * v[k];
  }
  return dot / ((std::sqrt(nu) + kNormEpsilon) * (std::sqrt(nv) + kNormEpsilon));
}

void validate_params(const WorldParams& p) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidParams, what); };
  if (p.classes < 2) fail("K must be >= 2");
  if (p.regions < 1) fail("R must be >= 1");
  if (p.dim < 1 || p.dim > std::numeric_limits<std::uint16_t>::max()) fail("D must be in [1, 65535]");
  if (p.grid_h < 1 || p.grid_w < 1) fail("grid dims must be >= 1");
  if (static_cast<std::uint64_t>(p.grid_h) * p.grid_w > std::numeric_limits<std::uint16_t>::max()) {
    fail("N = H*W must fit in 16 bits");
  }
  if (p.footprint_side() > p.grid_h || p.footprint_side() > p.grid_w) fail("footprint larger than grid");
  if (static_cast<std::uint64_t>(p.regions) * p.footprint_side() * p.footprint_side() > p.units()) {
    fail("R * (2*radius+1)^2 exceeds N");
  }
  if (!(p.dirichlet_alpha > 0.0) || !std::isfinite(p.dirichlet_alpha)) fail("dirichlet_alpha must be > 0");
  if (!(p.noise_sigma >= 0.0) || !std::isfinite(p.noise_sigma)) fail("noise_sigma must be >= 0");
  if (!(p.background_attention >= 0.0) || !std::isfinite(p.background_attention)) {
    fail("background_attention must be >= 0");
  }
  if (!(p.local_softmax_temp > 0.0) || !std::isfinite(p.local_softmax_temp)) fail("local_softmax_temp must be > 0");
}

SyntheticWorld::SyntheticWorld(const WorldParams& params) : params_(params) {
  validate_params(params_);
  const std::size_t d = params_.dim;
  prototypes_.resize(static_cast<std::size_t>(params_.classes) * params_.regions * d);
  CounterRng rng(params_.seed, 0, tag(StreamTag::Prototypes));
  for (std::size_t p = 0; p < prototypes_.size() / d; ++p) {
    double norm = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double x = rng.normal();
      prototypes_[p * d + k] = x;
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < d; ++k) prototypes_[p * d + k] /= norm;
  }
}

std::span<const double> SyntheticWorld::prototype(ClassIndex c, std::uint32_t r) const {
  const std::size_t d = params_.dim;
  return std::span<const double>(prototypes_).subspan((static_cast<std::size_t>(c) * params_.regions + r) * d, d);
}

TraceHeader SyntheticWorld::trace_header() const {
  TraceHeader h;
  h.flags = kHasServerAttention | kHasServerFullPred | kHasGridDims;
  h.units = static_cast<std::uint16_t>(params_.units());
  h.dim = static_cast<std::uint16_t>(params_.dim);
  h.classes = params_.classes;
  h.grid = GridDims{static_cast<std::uint16_t>(params_.grid_h), static_cast<std::uint16_t>(params_.grid_w)};
  return h;
}

EvidenceRecord SyntheticWorld::generate_record(ClassIndex y, std::uint64_t image_seed) const {
  const WorldParams& p = params_;
  if (y >= p.classes) throw Error(ErrorCode::InvalidArgument, "class index out of range");
  const std::size_t n = p.units();
  const std::size_t d = p.dim;

  const std::vector<int> owner = place_regions(p, image_seed);
  const std::vector<double> beta = region_weights(p, image_seed);
  const double region_size = static_cast<double>(p.footprint_side()) * p.footprint_side();

  EvidenceRecord rec;
  rec.id = image_seed;
  rec.label = y;
  rec.embeddings.resize(n * d);
  rec.attention.resize(n);

  CounterRng noise(p.seed, image_seed, tag(StreamTag::EmbeddingNoise));
  std::vector<double> v(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) v[k] = p.noise_sigma * noise.normal();
    if (owner[i] >= 0) {
      const auto mu = prototype(y, static_cast<std::uint32_t>(owner[i]));
      for (std::size_t k = 0; k < d; ++k) v[k] += mu[k];
      rec.attention[i] = beta[static_cast<std::size_t>(owner[i])] / region_size;
    } else {
      rec.attention[i] = p.background_attention / static_cast<double>(n);
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm) + kNormEpsilon;
    for (std::size_t k = 0; k < d; ++k) rec.embeddings[i * d + k] = static_cast<float>(v[k] / norm);
  }
  normalize_as_f32(rec.attention);

  // Edge model: classify the single most attended patch.
  const std::size_t top = argmax_lowest(rec.attention);
  const auto z_top = rec.embedding(top, d);
  std::vector<double> logits(p.classes);
  for (ClassIndex c = 0; c < p.classes; ++c) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::uint32_t r = 0; r < p.regions; ++r) best = std::max(best, cosine(z_top, prototype(c, r)));
    logits[c] = best / p.local_softmax_temp;
  }
  const double peak = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& l : logits) {
    l = std::exp(l - peak);
    z += l;
  }
  const std::size_t local = argmax_lowest(logits);
  rec.local_pred = static_cast<ClassIndex>(local);
  rec.local_max_prob = static_cast<float>(logits[local] / z);
  if (!(rec.local_max_prob > 0.0)) rec.local_max_prob = std::numeric_limits<float>::denorm_min();

  std::vector<PatchIndex> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<PatchIndex>(i);
  rec.server_full_pred = server_emulate(*this, rec, all);

  std::vector<double> server_att(n);
  for (std::size_t i = 0; i < n; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::uint32_t r = 0; r < p.regions; ++r) best = std::max(best, cosine(rec.embedding(i, d), prototype(y, r)));
    server_att[i] = std::max(0.0, best);
  }
  normalize_as_f32(server_att);
  rec.server_attention = std::move(server_att);
  return rec;
}

std::vector<EvidenceRecord> SyntheticWorld::generate_corpus(std::uint64_t count, std::uint64_t first_id) const {
  std::vector<EvidenceRecord> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::uint64_t id = first_id + k;
    CounterRng label_rng(params_.seed, id, tag(StreamTag::Label));
    const auto y = static_cast<ClassIndex>(label_rng.uniform_below(params_.classes));
    out.push_back(generate_record(y, id));
  }
  return out;
}

ClassIndex server_emulate(const SyntheticWorld& world, const EvidenceRecord& record,
                          std::span<const PatchIndex> selection) {
  const WorldParams& p = world.params();
  const std::size_t n = record.units();
  const std::size_t d = p.dim;
  if (selection.empty()) throw Error(ErrorCode::EmptySelection, "server needs at least one unit");
  if (record.embeddings.size() != n * d || n != p.units()) {
    throw Error(ErrorCode::ShapeMismatch, "record shape does not match the world");
  }
  std::vector<bool> seen(n, false);
  for (PatchIndex i : selection) {
    if (i >= n || seen[i]) throw Error(ErrorCode::InvalidArgument, "selection indices must be distinct and < N");
    seen[i] = true;
  }
  ClassIndex best_class = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (ClassIndex c = 0; c < p.classes; ++c) {
    double score = 0.0;
    for (std::uint32_t r = 0; r < p.regions; ++r) {
      const auto mu = world.prototype(c, r);
      double m = -std::numeric_limits<double>::infinity();
      for (PatchIndex i : selection) m = std::max(m, cosine(record.embedding(i, d), mu));
      score += m;
    }
    if (score > best_score) {
      best_score = score;
      best_class = c;
    }
  }
  return best_class;
}

RecordScorer::RecordScorer(const SyntheticWorld& world, const EvidenceRecord& record)
    : units_(record.units()), classes_(world.params().classes), regions_(world.params().regions) {
  const std::size_t d = world.params().dim;
  if (record.embeddings.size() != units_ * d || units_ != world.params().units()) {
    throw Error(ErrorCode::ShapeMismatch, "record shape does not match the world");
  }
  cos_.resize(units_ * classes_ * regions_);
  for (std::size_t i = 0; i < units_; ++i) {
    const auto z = record.embedding(i, d);
    for (std::size_t c = 0; c < classes_; ++c) {
      for (std::size_t r = 0; r < regions_; ++r) {
        cos_[(i * classes_ + c) * regions_ + r] =
            cosine(z, world.prototype(static_cast<ClassIndex>(c), static_cast<std::uint32_t>(r)));
      }
    }
  }
}

ClassIndex RecordScorer::predict(std::span<const PatchIndex> selection) const {
  if (selection.empty()) throw Error(ErrorCode::EmptySelection, "server needs at least one unit");
  for (PatchIndex i : selection) {
    if (i >= units_) throw Error(ErrorCode::InvalidArgument, "selection index out of range");
  }
  ClassIndex best_class = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < classes_; ++c) {
    double score = 0.0;
    for (std::size_t r = 0; r < regions_; ++r) {
      double m = -std::numeric_limits<double>::infinity();
      for (PatchIndex i : selection) m = std::max(m, cos_[(i * classes_ + c) * regions_ + r]);
      score += m;
    }
    if (score > best_score) {
      best_score = score;
      best_class = static_cast<ClassIndex>(c);
    }
  }
  return best_class;
}

}  // namespace sage
