#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "sage/evidence.hpp"

namespace testutil {

inline std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "sage_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

// Random record with Dirichlet-like attention in f32 precision.
inline sage::EvidenceRecord random_record(std::mt19937_64& gen, std::size_t n, std::size_t d, std::uint32_t k,
                                          std::uint64_t id, bool server_fields) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::normal_distribution<float> z(0.0f, 1.0f);
  sage::EvidenceRecord r;
  r.id = id;
  r.label = static_cast<std::uint32_t>(gen() % k);
  r.local_pred = static_cast<std::uint32_t>(gen() % k);
  r.local_max_prob = std::max(1e-3f, u(gen));
  double sum = 0.0;
  std::vector<float> raw(n);
  for (float& a : raw) {
    a = u(gen) + 1e-3f;
    sum += a;
  }
  for (float a : raw) r.attention.push_back(static_cast<float>(a / sum));
  r.embeddings.resize(n * d);
  for (float& x : r.embeddings) x = z(gen);
  if (server_fields) {
    r.server_full_pred = static_cast<std::uint32_t>(gen() % k);
    std::vector<double> sa(n);
    for (double& a : sa) a = u(gen);
    r.server_attention = sa;
  }
  return r;
}

}  // namespace testutil
