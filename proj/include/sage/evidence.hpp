#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sage {

using PatchIndex = std::uint32_t;
using ClassIndex = std::uint32_t;

/// One input's evidence: edge attention over the N units, their embeddings,
/// and the predictions made on it.
struct EvidenceRecord {
  std::uint64_t id = 0;
  ClassIndex label = 0;
  ClassIndex local_pred = 0;
  double local_max_prob = 1.0;
  std::optional<ClassIndex> server_full_pred;
  std::vector<double> attention;                       // N, sums to 1
  std::optional<std::vector<double>> server_attention;  // N
  std::vector<float> embeddings;                       // N x D, row-major

  std::size_t units() const noexcept { return attention.size(); }
  std::span<const float> embedding(std::size_t i, std::size_t dim) const {
    return std::span<const float>(embeddings).subspan(i * dim, dim);
  }
};

struct GridDims {
  std::uint16_t height = 0;
  std::uint16_t width = 0;
};

/// Presence bits in TraceHeader::flags.
enum TraceFlags : std::uint16_t {
  kHasServerAttention = 1u << 0,
  kHasServerFullPred = 1u << 1,
  kHasGridDims = 1u << 2,
};

struct TraceHeader {
  static constexpr char kMagic[4] = {'S', 'E', 'V', 'D'};
  static constexpr std::uint16_t kVersion = 1;

  std::uint16_t version = kVersion;
  std::uint16_t flags = 0;
  std::uint16_t units = 0;  // N
  std::uint16_t dim = 0;    // D
  std::uint32_t classes = 0;  // K
  std::optional<GridDims> grid;
  std::uint64_t count = 0;

  bool has(TraceFlags f) const noexcept { return (flags & f) != 0; }
  /// Bytes per record in the binary layout.
  std::size_t record_stride() const noexcept;
};

struct Trace {
  TraceHeader header;
  std::vector<EvidenceRecord> records;
};

// Attention whose sum drifts from 1 by more than this is rejected on load.
inline constexpr double kAttentionDriftTolerance = 1e-3;
// Below this drift the stored values are kept as-is (f32 export rounding).
inline constexpr double kAttentionRenormSlack = 1e-6;

/// Checks header field ranges (N, D, K, grid). Throws CorruptRecord.
void validate_header(const TraceHeader& header);

/// Checks one record against the header. Throws CorruptRecord on the first
/// violation, mentioning `index`.
void validate_record(const EvidenceRecord& record, const TraceHeader& header, std::size_t index);

/// Rescales attention to sum 1 when its drift is within tolerance.
/// Throws NormalizationError (with the record id) otherwise.
void renormalize_attention(EvidenceRecord& record);

/// Reads a binary SEVD trace, or its line-delimited JSON mirror when the
/// file does not start with the magic tag but with '{'.
Trace load_trace(const std::filesystem::path& path);
Trace load_trace_binary(std::span<const std::byte> bytes);
Trace load_trace_text(const std::string& text);

/// Writes the canonical binary form. header.count is taken from records.
void write_trace(std::span<const EvidenceRecord> records, const TraceHeader& header,
                 const std::filesystem::path& path);
std::vector<std::byte> encode_trace(std::span<const EvidenceRecord> records, const TraceHeader& header);
void write_trace_text(std::span<const EvidenceRecord> records, const TraceHeader& header,
                      const std::filesystem::path& path);

}  // namespace sage
