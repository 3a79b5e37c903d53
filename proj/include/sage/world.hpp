#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sage/evidence.hpp"

namespace sage {

/// Parameters of the synthetic evidence world.
///
/// Each class owns `regions` prototype directions. An input of class y places
/// one square footprint per region on the patch grid; patches inside region r
/// embed near prototype (y, r), the rest are pure noise. Region salience is
/// Dirichlet(alpha): small alpha gives one dominant region (peaked attention),
/// large alpha gives balanced regions (flat attention).
struct WorldParams {
  std::uint64_t seed = 0;
  std::uint32_t classes = 20;  // K
  std::uint32_t regions = 4;   // R
  std::uint32_t dim = 16;      // D
  std::uint32_t grid_h = 14;
  std::uint32_t grid_w = 14;
  std::uint32_t footprint_radius = 1;  // Chebyshev radius; 1 -> 3x3 block
  double dirichlet_alpha = 0.3;
  double noise_sigma = 0.3;
  double background_attention = 0.3;
  double local_softmax_temp = 0.08;

  std::uint32_t units() const noexcept { return grid_h * grid_w; }
  std::uint32_t footprint_side() const noexcept { return 2 * footprint_radius + 1; }
};

/// Throws InvalidParams when the parameter set is infeasible.
void validate_params(const WorldParams& params);

class SyntheticWorld {
 public:
  static constexpr std::uint32_t kMaxPlacementAttempts = 1000;

  /// Prototypes are i.i.d. standard normal (stream tag Prototypes, index 0),
  /// drawn in (class, region, dim) order, then scaled to unit norm.
  explicit SyntheticWorld(const WorldParams& params);

  const WorldParams& params() const noexcept { return params_; }
  std::span<const double> prototype(ClassIndex c, std::uint32_t r) const;
  std::span<const double> prototypes() const noexcept { return prototypes_; }

  /// One synthetic input of class y. Streams are keyed by (seed, image_seed, tag).
  /// The record id is image_seed.
  EvidenceRecord generate_record(ClassIndex y, std::uint64_t image_seed) const;

  /// Records with ids first_id .. first_id+count-1; labels drawn uniformly.
  std::vector<EvidenceRecord> generate_corpus(std::uint64_t count, std::uint64_t first_id = 0) const;

  /// Header describing records of this world (all optional fields present).
  TraceHeader trace_header() const;

 private:
  WorldParams params_;
  std::vector<double> prototypes_;  // K x R x D
};

/// Region-coverage server: score(c) = sum_r max_{i in selection} cos(z_i, mu_{c,r});
/// returns the arg max, ties to the lowest class.
ClassIndex server_emulate(const SyntheticWorld& world, const EvidenceRecord& record,
                          std::span<const PatchIndex> selection);

/// Precomputes cos(z_i, mu_{c,r}) for every unit of one record so that many
/// selections over the same record can be scored cheaply. Produces exactly
/// the same predictions as server_emulate.
class RecordScorer {
 public:
  RecordScorer(const SyntheticWorld& world, const EvidenceRecord& record);
  ClassIndex predict(std::span<const PatchIndex> selection) const;

 private:
  std::size_t units_;
  std::size_t classes_;
  std::size_t regions_;
  std::vector<double> cos_;  // N x K x R
};

/// cos(u, v) = <u, v> / ((|u| + eps)(|v| + eps)), accumulated in double.
double cosine(std::span<const float> u, std::span<const double> v) noexcept;

}  // namespace sage
