#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ttdse/latency_sim.hpp"
#include "ttdse/path_search.hpp"
#include "ttdse/tensor_network.hpp"

namespace ttdse {

enum class ExecutionMode { Inference, Training };
std::string_view to_string(ExecutionMode mode);

// =============================================================================
// Design space
// =============================================================================

/// A global constraint on which partitions every layer may use.
struct Strategy {
    std::string name;
    std::vector<Partition> partitions;

    bool operator==(const Strategy&) const = default;
};

struct StrategySpace {
    std::vector<Strategy> strategies;

    /// Monolithic {1x1} then Split {1x2, 2x1}.
    static StrategySpace defaults();
    /// Throws ConfigError for empty strategies or partitions outside `available`.
    void validate(std::span<const Partition> available) const;

    bool operator==(const StrategySpace&) const = default;
};

struct GradientWorkload {
    NodeId target;
    TensorNetwork network;
    ContractionPath path;  // top-1 MAC path of the gradient network
};

/// Everything needed to cost one layer: its network, the top-K forward
/// candidates and, in training mode, the gradient workloads.
struct LayerDesign {
    LayerSpec spec;
    TensorNetwork network;
    std::vector<ContractionPath> paths;
    std::vector<GradientWorkload> gradients;
};

std::vector<LayerDesign> build_layer_designs(std::span<const LayerSpec> model, std::size_t k, ExecutionMode mode);

/// Forward path plus every gradient workload under the same (partition,
/// dataflow). kInfiniteCycles when any piece is infeasible.
Cycles layer_cost(const LayerDesign& layer, const ContractionPath& forward, const HardwareConfig& hw, Partition part,
                  Dataflow df);

// =============================================================================
// Cost table
// =============================================================================

/// T[l, p, c, d]. Partitions and dataflows are kept in canonical order
/// (1x1 < 2x1 < 1x2, IS < OS < WS); unset entries are infinite.
class CostTable {
public:
    CostTable(std::vector<Partition> partitions, std::vector<Dataflow> dataflows);

    std::size_t add_layer(std::string name, std::vector<std::int64_t> path_macs);

    std::size_t layer_count() const { return layers_.size(); }
    std::size_t path_count(std::size_t layer) const { return layers_.at(layer).path_macs.size(); }
    const std::string& layer_name(std::size_t layer) const { return layers_.at(layer).name; }
    std::int64_t path_mac(std::size_t layer, std::size_t path) const { return layers_.at(layer).path_macs.at(path); }
    const std::vector<Partition>& partitions() const { return partitions_; }
    const std::vector<Dataflow>& dataflows() const { return dataflows_; }

    Cycles at(std::size_t layer, std::size_t path, std::size_t part_index, std::size_t df_index) const;
    Cycles at(std::size_t layer, std::size_t path, Partition part, Dataflow df) const;
    void set(std::size_t layer, std::size_t path, std::size_t part_index, std::size_t df_index, Cycles cycles);

    std::size_t partition_index(Partition part) const;  // throws Error when absent
    std::size_t dataflow_index(Dataflow df) const;
    std::size_t entry_count() const;

private:
    struct Layer {
        std::string name;
        std::vector<std::int64_t> path_macs;
        std::vector<Cycles> cycles;
    };

    std::size_t offset(std::size_t layer, std::size_t path, std::size_t part_index, std::size_t df_index) const;

    std::vector<Partition> partitions_;
    std::vector<Dataflow> dataflows_;
    std::vector<Layer> layers_;
};

CostTable populate_cost_table(std::span<const LayerDesign> layers, const HardwareConfig& hw,
                              std::span<const Partition> partitions = kAllPartitions,
                              std::span<const Dataflow> dataflows = kAllDataflows);

CostTable populate_cost_table(std::span<const LayerSpec> model, const HardwareConfig& hw, std::size_t k,
                              ExecutionMode mode);

// =============================================================================
// Search
// =============================================================================

struct LayerChoice {
    std::size_t path_index = 0;  // 0 = lowest-MAC path
    Partition partition = Partition::Full;
    Dataflow dataflow = Dataflow::IS;
    Cycles cycles = kInfiniteCycles;

    bool operator==(const LayerChoice&) const = default;
};

struct DseResult {
    std::size_t strategy_index = 0;
    std::string strategy;
    std::vector<LayerChoice> layers;
    Cycles total_cycles = kInfiniteCycles;
    ExecutionMode mode = ExecutionMode::Inference;
    std::vector<Cycles> strategy_totals;  // Cost_h per strategy, declaration order

    bool operator==(const DseResult&) const = default;
};

/// For each strategy, sum of per-layer minima; argmin over strategies.
/// Ties: strategy order, then path index, partition order, dataflow order.
/// Throws InfeasibleModel when no strategy has a finite total.
DseResult global_search(const CostTable& table, const StrategySpace& space,
                        ExecutionMode mode = ExecutionMode::Inference);

/// Enumerates every joint per-layer assignment. Same tie-breaking.
DseResult brute_force_search(const CostTable& table, const StrategySpace& space,
                             ExecutionMode mode = ExecutionMode::Inference,
                             std::uint64_t max_assignments = 20'000'000);

// =============================================================================
// Reporting
// =============================================================================

/// num / den; +inf when den is zero or either side is infinite.
double cycle_ratio(Cycles num, Cycles den);

struct LayerSpeedup {
    std::string name;
    Cycles dense_cycles = 0;           // best dataflow, full array
    Cycles tt_opt_cycles = 0;          // DSE selection
    Cycles mac_opt_cycles = 0;         // path 1 with best (c, d) under h*
    Cycles reconstruction_cycles = 0;  // reconstruction path, best (c, d) under h*
    double dense_over_tt = 0.0;
    double mac_opt_over_tt = 0.0;
    double reconstruction_over_tt = 0.0;
};

struct SpeedupReport {
    std::vector<LayerSpeedup> layers;
    LayerSpeedup total;
};

SpeedupReport speedup_report(std::span<const LayerDesign> layers, const HardwareConfig& hw, const CostTable& table,
                             const StrategySpace& space, const DseResult& result);

}  // namespace ttdse
