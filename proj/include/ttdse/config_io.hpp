#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ttdse/dse_engine.hpp"
#include "ttdse/latency_sim.hpp"
#include "ttdse/tensor_network.hpp"

namespace ttdse {

struct ModelConfig {
    std::string name;
    std::string description;  // free text, not interpreted
    std::int64_t default_batch = 1;
    std::vector<LayerSpec> layers;

    const LayerSpec& layer(std::string_view layer_name) const;  // throws ConfigError
    bool operator==(const ModelConfig&) const = default;
};

struct HardwareFile {
    HardwareConfig hw;
    std::vector<Partition> partitions{kAllPartitions.begin(), kAllPartitions.end()};
    std::vector<Dataflow> dataflows{kAllDataflows.begin(), kAllDataflows.end()};
    StrategySpace strategies = StrategySpace::defaults();

    bool operator==(const HardwareFile&) const = default;
};

// All parse functions throw ConfigError. Syntax errors carry
// "<source>:<line>:<col>"; schema errors name the offending key or layer.
ModelConfig parse_model_config(std::string_view text, std::string_view source = "<model>");
ModelConfig load_model_config(const std::filesystem::path& path);
std::string serialize_model_config(const ModelConfig& model);

HardwareFile parse_hardware_config(std::string_view text, std::string_view source = "<hardware>");
HardwareFile load_hardware_config(const std::filesystem::path& path);
std::string serialize_hardware_config(const HardwareFile& file);

}  // namespace ttdse
