#include "ttdse/dse_engine.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include <fmt/format.h>

namespace ttdse {

std::string_view to_string(ExecutionMode mode) {
    return mode == ExecutionMode::Training ? "training" : "inference";
}

StrategySpace StrategySpace::defaults() {
    return StrategySpace{{
        Strategy{"monolithic", {Partition::Full}},
        Strategy{"split", {Partition::SplitCols, Partition::SplitRows}},
    }};
}

void StrategySpace::validate(std::span<const Partition> available) const {
    if (strategies.empty()) {
        throw ConfigError("strategy space is empty");
    }
    std::set<std::string> names;
    for (const auto& s : strategies) {
        if (!names.insert(s.name).second) {
            throw ConfigError(fmt::format("duplicate strategy name '{}'", s.name));
        }
        if (s.partitions.empty()) {
            throw ConfigError(fmt::format("strategy '{}' allows no partition", s.name));
        }
        for (Partition p : s.partitions) {
            if (std::find(available.begin(), available.end(), p) == available.end()) {
                throw ConfigError(fmt::format("strategy '{}' uses partition {} which is not explored", s.name,
                                              to_string(p)));
            }
        }
    }
}

// =============================================================================
// Layer designs
// =============================================================================

std::vector<LayerDesign> build_layer_designs(std::span<const LayerSpec> model, std::size_t k, ExecutionMode mode) {
    if (model.empty()) {
        throw SpecError("model has no layers");
    }
    std::vector<LayerDesign> designs;
    designs.reserve(model.size());
    for (const auto& spec : model) {
        LayerDesign design;
        design.spec = spec;
        design.network = build_network(spec);
        design.paths = topk_mac_paths(design.network, k);
        if (mode == ExecutionMode::Training) {
            for (auto& g : gradient_networks(design.network)) {
                ContractionPath best = topk_mac_paths(g.network, 1).front();
                design.gradients.push_back({g.target, std::move(g.network), std::move(best)});
            }
        }
        designs.push_back(std::move(design));
    }
    return designs;
}

Cycles layer_cost(const LayerDesign& layer, const ContractionPath& forward, const HardwareConfig& hw, Partition part,
                  Dataflow df) {
    try {
        Cycles total = path_latency(layer.network, forward, hw, part, df).total_cycles;
        for (const auto& g : layer.gradients) {
            total = saturating_add(total, path_latency(g.network, g.path, hw, part, df).total_cycles);
        }
        return total;
    } catch (const InfeasibleConfig&) {
        return kInfiniteCycles;
    }
}

// =============================================================================
// Cost table
// =============================================================================

namespace {

template <typename T>
std::vector<T> canonical(std::vector<T> values) {
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    return values;
}

}  // namespace

CostTable::CostTable(std::vector<Partition> partitions, std::vector<Dataflow> dataflows)
    : partitions_(canonical(std::move(partitions))), dataflows_(canonical(std::move(dataflows))) {
    if (partitions_.empty() || dataflows_.empty()) {
        throw ConfigError("cost table needs at least one partition and one dataflow");
    }
}

std::size_t CostTable::add_layer(std::string name, std::vector<std::int64_t> path_macs) {
    if (path_macs.empty()) {
        throw Error(fmt::format("layer '{}' has no candidate path", name));
    }
    Layer layer;
    layer.name = std::move(name);
    layer.cycles.assign(path_macs.size() * partitions_.size() * dataflows_.size(), kInfiniteCycles);
    layer.path_macs = std::move(path_macs);
    layers_.push_back(std::move(layer));
    return layers_.size() - 1;
}

std::size_t CostTable::offset(std::size_t layer, std::size_t path, std::size_t part_index,
                              std::size_t df_index) const {
    const Layer& l = layers_.at(layer);
    if (path >= l.path_macs.size() || part_index >= partitions_.size() || df_index >= dataflows_.size()) {
        throw Error("cost table index out of range");
    }
    return (path * partitions_.size() + part_index) * dataflows_.size() + df_index;
}

Cycles CostTable::at(std::size_t layer, std::size_t path, std::size_t part_index, std::size_t df_index) const {
    return layers_.at(layer).cycles[offset(layer, path, part_index, df_index)];
}

Cycles CostTable::at(std::size_t layer, std::size_t path, Partition part, Dataflow df) const {
    return at(layer, path, partition_index(part), dataflow_index(df));
}

void CostTable::set(std::size_t layer, std::size_t path, std::size_t part_index, std::size_t df_index, Cycles cycles) {
    const std::size_t pos = offset(layer, path, part_index, df_index);
    layers_.at(layer).cycles[pos] = cycles;
}

std::size_t CostTable::partition_index(Partition part) const {
    auto it = std::find(partitions_.begin(), partitions_.end(), part);
    if (it == partitions_.end()) {
        throw Error(fmt::format("partition {} is not in the cost table", to_string(part)));
    }
    return static_cast<std::size_t>(it - partitions_.begin());
}

std::size_t CostTable::dataflow_index(Dataflow df) const {
    auto it = std::find(dataflows_.begin(), dataflows_.end(), df);
    if (it == dataflows_.end()) {
        throw Error(fmt::format("dataflow {} is not in the cost table", to_string(df)));
    }
    return static_cast<std::size_t>(it - dataflows_.begin());
}

std::size_t CostTable::entry_count() const {
    std::size_t count = 0;
    for (const auto& l : layers_) {
        count += l.cycles.size();
    }
    return count;
}

CostTable populate_cost_table(std::span<const LayerDesign> layers, const HardwareConfig& hw,
                              std::span<const Partition> partitions, std::span<const Dataflow> dataflows) {
    CostTable table({partitions.begin(), partitions.end()}, {dataflows.begin(), dataflows.end()});
    for (const auto& layer : layers) {
        std::vector<std::int64_t> macs;
        for (const auto& p : layer.paths) {
            macs.push_back(p.total_mac);
        }
        const std::size_t l = table.add_layer(layer.spec.name, std::move(macs));
        for (std::size_t p = 0; p < layer.paths.size(); ++p) {
            for (std::size_t c = 0; c < table.partitions().size(); ++c) {
                for (std::size_t d = 0; d < table.dataflows().size(); ++d) {
                    table.set(l, p, c, d,
                              layer_cost(layer, layer.paths[p], hw, table.partitions()[c], table.dataflows()[d]));
                }
            }
        }
    }
    return table;
}

CostTable populate_cost_table(std::span<const LayerSpec> model, const HardwareConfig& hw, std::size_t k,
                              ExecutionMode mode) {
    const auto designs = build_layer_designs(model, k, mode);
    return populate_cost_table(designs, hw);
}

// =============================================================================
// Search
// =============================================================================

namespace {

// (path, partition index, dataflow index) in tie-break order.
struct Option {
    std::size_t path;
    std::size_t part;
    std::size_t df;
};

std::vector<Option> allowed_options(const CostTable& table, std::size_t layer, const Strategy& strategy) {
    std::vector<Option> options;
    for (std::size_t p = 0; p < table.path_count(layer); ++p) {
        for (std::size_t c = 0; c < table.partitions().size(); ++c) {
            const Partition part = table.partitions()[c];
            if (std::find(strategy.partitions.begin(), strategy.partitions.end(), part) == strategy.partitions.end()) {
                continue;
            }
            for (std::size_t d = 0; d < table.dataflows().size(); ++d) {
                options.push_back({p, c, d});
            }
        }
    }
    return options;
}

LayerChoice make_choice(const CostTable& table, std::size_t layer, const Option& o) {
    return LayerChoice{o.path, table.partitions()[o.part], table.dataflows()[o.df], table.at(layer, o.path, o.part, o.df)};
}

void check_space(const CostTable& table, const StrategySpace& space) {
    if (table.layer_count() == 0) {
        throw Error("cost table has no layers");
    }
    space.validate(table.partitions());
}

}  // namespace

DseResult global_search(const CostTable& table, const StrategySpace& space, ExecutionMode mode) {
    check_space(table, space);

    DseResult best;
    best.mode = mode;
    bool found = false;
    for (std::size_t h = 0; h < space.strategies.size(); ++h) {
        const Strategy& strategy = space.strategies[h];
        std::vector<LayerChoice> choices;
        Cycles cost = 0;
        for (std::size_t l = 0; l < table.layer_count(); ++l) {
            LayerChoice layer_best;
            for (const Option& o : allowed_options(table, l, strategy)) {
                if (table.at(l, o.path, o.part, o.df) < layer_best.cycles) {
                    layer_best = make_choice(table, l, o);
                }
            }
            cost = saturating_add(cost, layer_best.cycles);
            choices.push_back(layer_best);
        }
        best.strategy_totals.push_back(cost);
        if (cost != kInfiniteCycles && (!found || cost < best.total_cycles)) {
            found = true;
            best.strategy_index = h;
            best.strategy = strategy.name;
            best.layers = std::move(choices);
            best.total_cycles = cost;
        }
    }
    if (!found) {
        throw InfeasibleModel("no strategy yields a finite cost for every layer");
    }
    return best;
}

DseResult brute_force_search(const CostTable& table, const StrategySpace& space, ExecutionMode mode,
                             std::uint64_t max_assignments) {
    check_space(table, space);
    const std::size_t layers = table.layer_count();

    std::vector<std::vector<std::vector<Option>>> options(space.strategies.size());
    std::uint64_t space_size = 0;
    for (std::size_t h = 0; h < space.strategies.size(); ++h) {
        std::uint64_t per_strategy = 1;
        for (std::size_t l = 0; l < layers; ++l) {
            options[h].push_back(allowed_options(table, l, space.strategies[h]));
            const std::uint64_t n = options[h].back().size();
            if (n == 0 || per_strategy > max_assignments / n) {
                per_strategy = n == 0 ? 0 : max_assignments + 1;
            } else {
                per_strategy *= n;
            }
        }
        space_size += per_strategy;
        if (space_size > max_assignments) {
            throw SearchLimitError(
                fmt::format("joint space exceeds {} assignments; use global_search", max_assignments));
        }
    }

    DseResult best;
    best.mode = mode;
    bool found = false;
    for (std::size_t h = 0; h < space.strategies.size(); ++h) {
        const auto& per_layer = options[h];
        Cycles strategy_best = kInfiniteCycles;
        std::vector<std::size_t> strategy_pick;
        if (std::all_of(per_layer.begin(), per_layer.end(), [](const auto& o) { return !o.empty(); })) {
            // Odometer with layer 0 most significant: the first minimum seen is
            // the lexicographically smallest assignment.
            std::vector<std::size_t> pick(layers, 0);
            while (true) {
                Cycles total = 0;
                for (std::size_t l = 0; l < layers; ++l) {
                    const Option& o = per_layer[l][pick[l]];
                    total = saturating_add(total, table.at(l, o.path, o.part, o.df));
                }
                if (total < strategy_best) {
                    strategy_best = total;
                    strategy_pick = pick;
                }
                std::size_t l = layers;
                while (l > 0) {
                    --l;
                    if (++pick[l] < per_layer[l].size()) {
                        break;
                    }
                    pick[l] = 0;
                    if (l == 0) {
                        l = layers + 1;
                        break;
                    }
                }
                if (l == layers + 1) {
                    break;
                }
            }
        }
        best.strategy_totals.push_back(strategy_best);
        if (strategy_best != kInfiniteCycles && (!found || strategy_best < best.total_cycles)) {
            found = true;
            best.strategy_index = h;
            best.strategy = space.strategies[h].name;
            best.total_cycles = strategy_best;
            best.layers.clear();
            for (std::size_t l = 0; l < layers; ++l) {
                best.layers.push_back(make_choice(table, l, per_layer[l][strategy_pick[l]]));
            }
        }
    }
    if (!found) {
        throw InfeasibleModel("no strategy yields a finite cost for every layer");
    }
    return best;
}

// =============================================================================
// Speedup report
// =============================================================================

double cycle_ratio(Cycles num, Cycles den) {
    if (den == 0 || num == kInfiniteCycles || den == kInfiniteCycles) {
        return std::numeric_limits<double>::infinity();
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

namespace {

void fill_ratios(LayerSpeedup& row) {
    row.dense_over_tt = cycle_ratio(row.dense_cycles, row.tt_opt_cycles);
    row.mac_opt_over_tt = cycle_ratio(row.mac_opt_cycles, row.tt_opt_cycles);
    row.reconstruction_over_tt = cycle_ratio(row.reconstruction_cycles, row.tt_opt_cycles);
}

}  // namespace

SpeedupReport speedup_report(std::span<const LayerDesign> layers, const HardwareConfig& hw, const CostTable& table,
                             const StrategySpace& space, const DseResult& result) {
    if (layers.size() != table.layer_count() || result.layers.size() != table.layer_count()) {
        throw Error("layer designs, cost table and DSE result disagree on layer count");
    }
    const Strategy& chosen = space.strategies.at(result.strategy_index);
    const bool training = result.mode == ExecutionMode::Training;

    SpeedupReport report;
    report.total.name = "total";
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const LayerDesign& layer = layers[l];
        LayerSpeedup row;
        row.name = layer.spec.name;

        row.dense_cycles = kInfiniteCycles;
        for (Dataflow df : table.dataflows()) {
            try {
                row.dense_cycles = std::min(row.dense_cycles, dense_layer_latency(layer.spec, hw, df, training).total_cycles);
            } catch (const InfeasibleConfig&) {
            }
        }
        row.tt_opt_cycles = result.layers[l].cycles;

        row.mac_opt_cycles = kInfiniteCycles;
        row.reconstruction_cycles = kInfiniteCycles;
        const ContractionPath recon = reconstruction_path(layer.network);
        for (Partition part : chosen.partitions) {
            for (Dataflow df : table.dataflows()) {
                row.mac_opt_cycles = std::min(row.mac_opt_cycles, table.at(l, 0, part, df));
                row.reconstruction_cycles = std::min(row.reconstruction_cycles, layer_cost(layer, recon, hw, part, df));
            }
        }
        fill_ratios(row);

        report.total.dense_cycles = saturating_add(report.total.dense_cycles, row.dense_cycles);
        report.total.tt_opt_cycles = saturating_add(report.total.tt_opt_cycles, row.tt_opt_cycles);
        report.total.mac_opt_cycles = saturating_add(report.total.mac_opt_cycles, row.mac_opt_cycles);
        report.total.reconstruction_cycles =
            saturating_add(report.total.reconstruction_cycles, row.reconstruction_cycles);
        report.layers.push_back(std::move(row));
    }
    fill_ratios(report.total);
    return report;
}

}  // namespace ttdse
