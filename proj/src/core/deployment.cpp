#include "sage/deployment.hpp"

#include <cmath>

#include "sage/error.hpp"

namespace sage {

namespace {

bool positive(double x) { return std::isfinite(x) && x > 0.0; }

void validate(const DeviceProfile& d, const ChannelProfile& c, const ModelProfile& m) {
  if (!positive(d.throughput)) throw Error(ErrorCode::InvalidProfile, "device '" + d.name + "' throughput must be > 0");
  if (!positive(d.efficiency) || d.efficiency > 1.0) {
    throw Error(ErrorCode::InvalidProfile, "device '" + d.name + "' efficiency must lie in (0, 1]");
  }
  if (!positive(c.uplink_rate)) throw Error(ErrorCode::InvalidProfile, "channel '" + c.name + "' rate must be > 0");
  if (!(m.edge_flops >= 0.0) || !(m.server_flops >= 0.0) || !positive(m.server_throughput) || m.units == 0 ||
      m.dim == 0 || m.patch_bytes == 0) {
    throw Error(ErrorCode::InvalidProfile, "model profile has non-positive fields");
  }
}

}  // namespace

DeviceProfile orin_nano() { return {"orin-nano", 5e12, 1.0}; }
DeviceProfile raspberry_pi5() { return {"rpi5", 30e9, 1.0}; }
ChannelProfile nb_iot() { return {"nb-iot", 250e3}; }
ChannelProfile lte_m() { return {"lte-m", 1e6}; }
ChannelProfile mmtc_5g() { return {"5g-mmtc", 10e6}; }
ChannelProfile wifi() { return {"wifi", 50e6}; }

std::vector<DeviceProfile> default_devices() { return {orin_nano(), raspberry_pi5()}; }
std::vector<ChannelProfile> default_channels() { return {nb_iot(), lte_m(), mmtc_5g(), wifi()}; }
std::vector<std::uint32_t> default_latency_budgets() { return {32, 48, 64, 80, 96, 196}; }

std::uint64_t selection_flops(std::uint32_t units, std::uint32_t budget, std::uint32_t dim) {
  const std::uint64_t b = budget;
  return 2 * b * b * dim + units;
}

double uplink_time(std::uint32_t budget, double rate_bps, std::uint32_t patch_bytes) {
  if (!positive(rate_bps)) throw Error(ErrorCode::InvalidProfile, "uplink rate must be > 0");
  return static_cast<double>(budget) * patch_bytes * 8.0 / rate_bps;
}

OperatingPoint total_latency(const DeviceProfile& device, const ChannelProfile& channel, std::uint32_t budget,
                             const ModelProfile& model, SelectionCost selection) {
  validate(device, channel, model);
  if (budget == 0) throw Error(ErrorCode::InvalidBudget, "budget must be >= 1");
  const double edge_rate = device.efficiency * device.throughput;
  OperatingPoint p;
  p.device = device.name;
  p.channel = channel.name;
  p.budget = budget;
  p.t_edge = model.edge_flops / edge_rate;
  const bool charge = selection == SelectionCost::Always || (selection == SelectionCost::Auto && budget < model.units);
  p.t_select = charge ? static_cast<double>(selection_flops(model.units, budget, model.dim)) / edge_rate : 0.0;
  p.t_uplink = uplink_time(budget, channel.uplink_rate, model.patch_bytes);
  p.t_server = model.server_flops / model.server_throughput;
  p.t_total = p.t_edge + p.t_select + p.t_uplink + p.t_server;
  p.payload_bytes = static_cast<std::uint64_t>(budget) * model.patch_bytes;
  return p;
}

std::vector<OperatingPoint> operating_point_grid(std::span<const DeviceProfile> devices,
                                                 std::span<const ChannelProfile> channels,
                                                 std::span<const std::uint32_t> budgets, const ModelProfile& model) {
  if (devices.empty() || channels.empty() || budgets.empty()) {
    throw Error(ErrorCode::InvalidConfig, "operating point grid needs non-empty axes");
  }
  std::vector<OperatingPoint> rows;
  rows.reserve(devices.size() * channels.size() * budgets.size());
  for (const DeviceProfile& d : devices) {
    for (const ChannelProfile& c : channels) {
      for (std::uint32_t b : budgets) rows.push_back(total_latency(d, c, b, model));
    }
  }
  return rows;
}

}  // namespace sage
