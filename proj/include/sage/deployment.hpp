#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sage {

struct DeviceProfile {
  std::string name;
  double throughput = 0.0;  // FLOP/s
  double efficiency = 1.0;  // (0, 1]
};

struct ChannelProfile {
  std::string name;
  double uplink_rate = 0.0;  // bit/s
};

struct ModelProfile {
  double edge_flops = 1.3e9;
  double server_flops = 17.6e9;
  double server_throughput = 8.1e12;  // effective FLOP/s
  std::uint32_t units = 196;
  std::uint32_t dim = 192;
  std::uint32_t patch_bytes = 1536;  // 16 * 16 * 3 * 2 (FP16 pixels)
};

struct OperatingPoint {
  std::string device;
  std::string channel;
  std::uint32_t budget = 0;
  double t_edge = 0.0;
  double t_select = 0.0;
  double t_uplink = 0.0;
  double t_server = 0.0;
  double t_total = 0.0;
  std::uint64_t payload_bytes = 0;
};

// Built-in profiles.
DeviceProfile orin_nano();  // 5 TFLOPS FP16
DeviceProfile raspberry_pi5();  // 30 GFLOPS
ChannelProfile nb_iot();  // 250 kbps
ChannelProfile lte_m();   // 1 Mbps
ChannelProfile mmtc_5g();  // 10 Mbps
ChannelProfile wifi();    // 50 Mbps
std::vector<DeviceProfile> default_devices();
std::vector<ChannelProfile> default_channels();
std::vector<std::uint32_t> default_latency_budgets();  // {32, 48, 64, 80, 96, 196}

/// Greedy selection cost: 2 * B^2 * D + N.
std::uint64_t selection_flops(std::uint32_t units, std::uint32_t budget, std::uint32_t dim);

double uplink_time(std::uint32_t budget, double rate_bps, std::uint32_t patch_bytes = 1536);

enum class SelectionCost {
  Auto,  // charged when B < N; full transmission (B >= N) runs no selection
  Always,
  None,
};

OperatingPoint total_latency(const DeviceProfile& device, const ChannelProfile& channel, std::uint32_t budget,
                             const ModelProfile& model, SelectionCost selection = SelectionCost::Auto);

/// Rows in (device, channel, budget) order.
std::vector<OperatingPoint> operating_point_grid(std::span<const DeviceProfile> devices,
                                                 std::span<const ChannelProfile> channels,
                                                 std::span<const std::uint32_t> budgets, const ModelProfile& model);

}  // namespace sage
