#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "ttdse/config_io.hpp"
#include "ttdse/dse_engine.hpp"
#include "ttdse/latency_sim.hpp"
#include "ttdse/path_search.hpp"

namespace ttdse {

/// Fixed-precision, locale-independent; "inf" for non-finite values.
std::string format_ratio(double value, int precision = 4);
std::string format_cycles(Cycles cycles);

/// Share of layers per choice, in percent.
struct ChoiceSummary {
    double core_single = 0.0;  // 1x1
    double core_multi = 0.0;   // 2x1 or 1x2
    double path_first = 0.0;   // path rank 1
    double path_other = 0.0;   // path rank > 1
    double dataflow_is = 0.0;
    double dataflow_os = 0.0;
    double dataflow_ws = 0.0;
};

ChoiceSummary summarize_choices(const DseResult& result);
std::string format_summary(const ChoiceSummary& summary);

std::string format_path_listing(const LayerSpec& spec, const TensorNetwork& net,
                                std::span<const ContractionPath> paths);

std::string format_latency_report(const LayerSpec& spec, std::size_t path_rank, const ContractionPath& path,
                                  Partition part, Dataflow df, const LatencyReport& report);

struct DseArtifacts {
    const ModelConfig& model;
    const HardwareFile& hardware;
    std::size_t k;
    std::span<const LayerDesign> designs;
    const CostTable& table;
    const DseResult& result;
    const SpeedupReport& speedups;
};

std::string dse_report_json(const DseArtifacts& artifacts);

/// One row per table entry: layer,name,path_rank,path_mac,partition,dataflow,cycles.
std::string cost_table_csv(const CostTable& table);

/// One row per (layer, path rank): best latency per dataflow under the
/// selected strategy, plus whether the DSE picked that rank.
std::string plot_csv(const CostTable& table, const StrategySpace& space, const DseResult& result);

}  // namespace ttdse
