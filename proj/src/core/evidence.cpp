#include "sage/evidence.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "sage/error.hpp"

namespace sage {

namespace {

constexpr std::uint32_t kAbsentPred = 0xFFFFFFFFu;
constexpr std::uint16_t kKnownFlags = kHasServerAttention | kHasServerFullPred | kHasGridDims;

std::string record_context(std::size_t index) { return "record " + std::to_string(index); }

// Little-endian cursor over an immutable byte buffer.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  template <typename UInt>
  UInt read_uint() {
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
      v |= static_cast<UInt>(std::to_integer<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(UInt);
    return v;
  }

  float read_f32() { return std::bit_cast<float>(read_uint<std::uint32_t>()); }

 private:
  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::byte>& out) : out_(out) {}

  template <typename UInt>
  void write_uint(UInt v) {
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
      out_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
    }
  }

  void write_f32(float v) { write_uint(std::bit_cast<std::uint32_t>(v)); }

 private:
  std::vector<std::byte>& out_;
};

std::size_t header_size(const TraceHeader& h) {
  return 4 + 2 + 2 + 2 + 2 + 4 + (h.has(kHasGridDims) ? 4 : 0) + 8;
}

void check_matches_header(const EvidenceRecord& r, const TraceHeader& h, std::size_t index) {
  const std::size_t n = h.units;
  const std::size_t d = h.dim;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::HeaderMismatch, record_context(index) + " (id " + std::to_string(r.id) + "): " + what);
  };
  if (r.attention.size() != n) {
    fail("attention has " + std::to_string(r.attention.size()) + " units, header N=" + std::to_string(n));
  }
  if (r.embeddings.size() != n * d) fail("embeddings size is not N*D");
  if (h.has(kHasServerAttention) != r.server_attention.has_value()) fail("server_attention presence differs from flags");
  if (r.server_attention && r.server_attention->size() != n) fail("server_attention length is not N");
  if (!h.has(kHasServerFullPred) && r.server_full_pred) fail("server_full_pred present but flag bit1 clear");
  if (r.label >= h.classes || r.local_pred >= h.classes) fail("class index out of range");
  if (r.server_full_pred && *r.server_full_pred >= h.classes) fail("server_full_pred out of range");
}

}  // namespace

std::size_t TraceHeader::record_stride() const noexcept {
  const std::size_t n = units;
  const std::size_t d = dim;
  std::size_t stride = 8 + 4 + 4 + 4;
  if (has(kHasServerFullPred)) stride += 4;
  stride += 4 * n;
  if (has(kHasServerAttention)) stride += 4 * n;
  stride += 4 * n * d;
  return stride;
}

void validate_header(const TraceHeader& h) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::CorruptRecord, "header: " + what); };
  if ((h.flags & ~kKnownFlags) != 0) fail("unknown flag bits");
  if (h.units < 1) fail("N must be >= 1");
  if (h.dim < 1) fail("D must be >= 1");
  if (h.classes < 2) fail("K must be >= 2");
  if (h.has(kHasGridDims) != h.grid.has_value()) fail("grid dims presence differs from flags");
  if (h.grid && static_cast<std::size_t>(h.grid->height) * h.grid->width != h.units) {
    fail("grid " + std::to_string(h.grid->height) + "x" + std::to_string(h.grid->width) + " does not match N=" +
         std::to_string(h.units));
  }
}

void validate_record(const EvidenceRecord& r, const TraceHeader& h, std::size_t index) {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::CorruptRecord, record_context(index) + " (id " + std::to_string(r.id) + "): " + what);
  };
  if (r.attention.size() != h.units || r.embeddings.size() != static_cast<std::size_t>(h.units) * h.dim) {
    fail("shape differs from header");
  }
  if (r.label >= h.classes) fail("label out of range");
  if (r.local_pred >= h.classes) fail("local_pred out of range");
  if (r.server_full_pred && *r.server_full_pred >= h.classes) fail("server_full_pred out of range");
  if (!std::isfinite(r.local_max_prob) || r.local_max_prob <= 0.0 || r.local_max_prob > 1.0) {
    fail("local_max_prob outside (0, 1]");
  }
  for (double a : r.attention) {
    if (!std::isfinite(a) || a < 0.0) fail("attention entry negative or non-finite");
  }
  if (r.server_attention) {
    if (r.server_attention->size() != h.units) fail("server_attention length differs from N");
    for (double a : *r.server_attention) {
      if (!std::isfinite(a) || a < 0.0) fail("server_attention entry negative or non-finite");
    }
  }
  for (float z : r.embeddings) {
    if (!std::isfinite(z)) fail("embedding entry non-finite");
  }
}

void renormalize_attention(EvidenceRecord& r) {
  double sum = 0.0;
  for (double a : r.attention) sum += a;
  const double drift = std::abs(sum - 1.0);
  if (!(drift <= kAttentionDriftTolerance)) {
    throw Error(ErrorCode::NormalizationError,
                "record id " + std::to_string(r.id) + ": attention sums to " + std::to_string(sum));
  }
  if (drift > kAttentionRenormSlack) {
    for (double& a : r.attention) a /= sum;
  }
}

Trace load_trace_binary(std::span<const std::byte> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), TraceHeader::kMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, "missing SEVD magic tag");
  }
  ByteReader in(bytes.subspan(4));
  if (in.remaining() < 2) throw Error(ErrorCode::CorruptRecord, "header: truncated");
  Trace trace;
  TraceHeader& h = trace.header;
  h.version = in.read_uint<std::uint16_t>();
  if (h.version != TraceHeader::kVersion) {
    throw Error(ErrorCode::VersionUnsupported, "version " + std::to_string(h.version));
  }
  if (in.remaining() < 2 + 2 + 2 + 4) throw Error(ErrorCode::CorruptRecord, "header: truncated");
  h.flags = in.read_uint<std::uint16_t>();
  h.units = in.read_uint<std::uint16_t>();
  h.dim = in.read_uint<std::uint16_t>();
  h.classes = in.read_uint<std::uint32_t>();
  if (h.has(kHasGridDims)) {
    if (in.remaining() < 4) throw Error(ErrorCode::CorruptRecord, "header: truncated");
    GridDims g;
    g.height = in.read_uint<std::uint16_t>();
    g.width = in.read_uint<std::uint16_t>();
    h.grid = g;
  }
  if (in.remaining() < 8) throw Error(ErrorCode::CorruptRecord, "header: truncated");
  h.count = in.read_uint<std::uint64_t>();
  validate_header(h);

  const std::size_t n = h.units;
  const std::size_t d = h.dim;
  const std::size_t stride = h.record_stride();
  trace.records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(h.count, in.remaining() / stride)));
  for (std::uint64_t i = 0; i < h.count; ++i) {
    if (in.remaining() < stride) {
      throw Error(ErrorCode::CorruptRecord, record_context(i) + ": truncated");
    }
    EvidenceRecord r;
    r.id = in.read_uint<std::uint64_t>();
    r.label = in.read_uint<std::uint32_t>();
    r.local_pred = in.read_uint<std::uint32_t>();
    r.local_max_prob = in.read_f32();
    if (h.has(kHasServerFullPred)) {
      const std::uint32_t p = in.read_uint<std::uint32_t>();
      if (p != kAbsentPred) r.server_full_pred = p;
    }
    r.attention.resize(n);
    for (double& a : r.attention) a = in.read_f32();
    if (h.has(kHasServerAttention)) {
      std::vector<double> sa(n);
      for (double& a : sa) a = in.read_f32();
      r.server_attention = std::move(sa);
    }
    r.embeddings.resize(n * d);
    for (float& z : r.embeddings) z = in.read_f32();
    validate_record(r, h, i);
    renormalize_attention(r);
    trace.records.push_back(std::move(r));
  }
  if (in.remaining() != 0) {
    throw Error(ErrorCode::CorruptRecord, std::to_string(in.remaining()) + " trailing bytes after record " +
                                              std::to_string(h.count));
  }
  return trace;
}

std::vector<std::byte> encode_trace(std::span<const EvidenceRecord> records, const TraceHeader& header) {
  TraceHeader h = header;
  h.count = records.size();
  try {
    validate_header(h);
  } catch (const Error& e) {
    throw Error(ErrorCode::HeaderMismatch, e.what());
  }
  for (std::size_t i = 0; i < records.size(); ++i) check_matches_header(records[i], h, i);

  std::vector<std::byte> out;
  out.reserve(header_size(h) + records.size() * h.record_stride());
  for (char c : TraceHeader::kMagic) out.push_back(static_cast<std::byte>(c));
  ByteWriter w(out);
  w.write_uint(h.version);
  w.write_uint(h.flags);
  w.write_uint(h.units);
  w.write_uint(h.dim);
  w.write_uint(h.classes);
  if (h.grid) {
    w.write_uint(h.grid->height);
    w.write_uint(h.grid->width);
  }
  w.write_uint(h.count);
  for (const EvidenceRecord& r : records) {
    w.write_uint(r.id);
    w.write_uint(r.label);
    w.write_uint(r.local_pred);
    w.write_f32(static_cast<float>(r.local_max_prob));
    if (h.has(kHasServerFullPred)) w.write_uint(r.server_full_pred.value_or(kAbsentPred));
    for (double a : r.attention) w.write_f32(static_cast<float>(a));
    if (r.server_attention) {
      for (double a : *r.server_attention) w.write_f32(static_cast<float>(a));
    }
    for (float z : r.embeddings) w.write_f32(z);
  }
  return out;
}

void write_trace(std::span<const EvidenceRecord> records, const TraceHeader& header,
                 const std::filesystem::path& path) {
  const std::vector<std::byte> bytes = encode_trace(records, header);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

// Text mirror: first line is the header object, then one object per record.
void write_trace_text(std::span<const EvidenceRecord> records, const TraceHeader& header,
                      const std::filesystem::path& path) {
  TraceHeader h = header;
  h.count = records.size();
  try {
    validate_header(h);
  } catch (const Error& e) {
    throw Error(ErrorCode::HeaderMismatch, e.what());
  }
  for (std::size_t i = 0; i < records.size(); ++i) check_matches_header(records[i], h, i);

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  nlohmann::json jh = {{"magic", "SEVD"}, {"version", h.version}, {"flags", h.flags}, {"N", h.units},
                       {"D", h.dim},      {"K", h.classes},      {"count", h.count}};
  if (h.grid) {
    jh["H"] = h.grid->height;
    jh["W"] = h.grid->width;
  }
  out << jh.dump() << '\n';
  for (const EvidenceRecord& r : records) {
    nlohmann::json jr = {{"id", r.id},
                         {"label", r.label},
                         {"local_pred", r.local_pred},
                         {"local_max_prob", static_cast<float>(r.local_max_prob)}};
    if (h.has(kHasServerFullPred)) {
      jr["server_full_pred"] = r.server_full_pred ? nlohmann::json(*r.server_full_pred) : nlohmann::json(nullptr);
    }
    std::vector<float> att(r.attention.begin(), r.attention.end());
    jr["attention"] = att;
    if (r.server_attention) {
      jr["server_attention"] = std::vector<float>(r.server_attention->begin(), r.server_attention->end());
    }
    jr["embeddings"] = r.embeddings;
    out << jr.dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

Trace load_trace_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  Trace trace;
  TraceHeader& h = trace.header;
  try {
    if (!std::getline(in, line)) throw Error(ErrorCode::CorruptRecord, "header: empty text trace");
    const auto jh = nlohmann::json::parse(line);
    if (jh.value("magic", std::string()) != "SEVD") throw Error(ErrorCode::BadMagic, "text header lacks SEVD magic");
    h.version = jh.at("version").get<std::uint16_t>();
    if (h.version != TraceHeader::kVersion) {
      throw Error(ErrorCode::VersionUnsupported, "version " + std::to_string(h.version));
    }
    h.flags = jh.at("flags").get<std::uint16_t>();
    h.units = jh.at("N").get<std::uint16_t>();
    h.dim = jh.at("D").get<std::uint16_t>();
    h.classes = jh.at("K").get<std::uint32_t>();
    if (h.has(kHasGridDims)) h.grid = GridDims{jh.at("H").get<std::uint16_t>(), jh.at("W").get<std::uint16_t>()};
    h.count = jh.at("count").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptRecord, std::string("header: ") + e.what());
  }
  validate_header(h);

  for (std::uint64_t i = 0; i < h.count; ++i) {
    if (!std::getline(in, line)) throw Error(ErrorCode::CorruptRecord, record_context(i) + ": truncated");
    EvidenceRecord r;
    try {
      const auto jr = nlohmann::json::parse(line);
      r.id = jr.at("id").get<std::uint64_t>();
      r.label = jr.at("label").get<std::uint32_t>();
      r.local_pred = jr.at("local_pred").get<std::uint32_t>();
      r.local_max_prob = jr.at("local_max_prob").get<float>();
      if (h.has(kHasServerFullPred) && jr.contains("server_full_pred") && !jr["server_full_pred"].is_null()) {
        r.server_full_pred = jr["server_full_pred"].get<std::uint32_t>();
      }
      for (float a : jr.at("attention").get<std::vector<float>>()) r.attention.push_back(a);
      if (h.has(kHasServerAttention)) {
        std::vector<double> sa;
        for (float a : jr.at("server_attention").get<std::vector<float>>()) sa.push_back(a);
        r.server_attention = std::move(sa);
      }
      r.embeddings = jr.at("embeddings").get<std::vector<float>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::CorruptRecord, record_context(i) + ": " + e.what());
    }
    validate_record(r, h, i);
    renormalize_attention(r);
    trace.records.push_back(std::move(r));
  }
  return trace;
}

Trace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (raw.size() >= 4 && std::memcmp(raw.data(), TraceHeader::kMagic, 4) == 0) {
    return load_trace_binary(std::as_bytes(std::span<const char>(raw)));
  }
  if (!raw.empty() && raw.front() == '{') return load_trace_text(std::string(raw.begin(), raw.end()));
  throw Error(ErrorCode::BadMagic, path.string() + " is not a SEVD trace");
}

}  // namespace sage
