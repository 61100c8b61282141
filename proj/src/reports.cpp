#include "ttdse/reports.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

namespace ttdse {

using nlohmann::ordered_json;

std::string format_ratio(double value, int precision) {
    if (!std::isfinite(value)) {
        return "inf";
    }
    return fmt::format("{:.{}f}", value, precision);
}

std::string format_cycles(Cycles cycles) {
    return cycles == kInfiniteCycles ? std::string("inf") : fmt::format("{}", cycles);
}

namespace {

ordered_json cycles_json(Cycles cycles) {
    if (cycles == kInfiniteCycles) {
        return "inf";
    }
    return cycles;
}

double percent(std::size_t count, std::size_t total) {
    return total == 0 ? 0.0 : 100.0 * static_cast<double>(count) / static_cast<double>(total);
}

bool allowed(const Strategy& s, Partition p) {
    return std::find(s.partitions.begin(), s.partitions.end(), p) != s.partitions.end();
}

}  // namespace

ChoiceSummary summarize_choices(const DseResult& result) {
    std::size_t single = 0, first = 0, is = 0, os = 0, ws = 0;
    for (const auto& c : result.layers) {
        single += c.partition == Partition::Full;
        first += c.path_index == 0;
        is += c.dataflow == Dataflow::IS;
        os += c.dataflow == Dataflow::OS;
        ws += c.dataflow == Dataflow::WS;
    }
    const std::size_t n = result.layers.size();
    ChoiceSummary s;
    s.core_single = percent(single, n);
    s.core_multi = percent(n - single, n);
    s.path_first = percent(first, n);
    s.path_other = percent(n - first, n);
    s.dataflow_is = percent(is, n);
    s.dataflow_os = percent(os, n);
    s.dataflow_ws = percent(ws, n);
    return s;
}

std::string format_summary(const ChoiceSummary& s) {
    return fmt::format(
        "Core (S / M):            {:.2f}% / {:.2f}%\n"
        "Path (Path-1 / Path-k):  {:.2f}% / {:.2f}%\n"
        "Dataflow (IS / OS / WS): {:.2f}% / {:.2f}% / {:.2f}%\n",
        s.core_single, s.core_multi, s.path_first, s.path_other, s.dataflow_is, s.dataflow_os, s.dataflow_ws);
}

std::string format_path_listing(const LayerSpec& spec, const TensorNetwork& net,
                                std::span<const ContractionPath> paths) {
    std::string out = fmt::format("layer {} ({}), {} path(s)\n", spec.name, to_string(spec.kind()), paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i) {
        out += fmt::format("path {} total_mac={} tree={}\n", i + 1, paths[i].total_mac, paths[i].encoding);
        for (const auto& line : describe_steps(net, paths[i])) {
            out += fmt::format("  {}\n", line);
        }
    }
    return out;
}

std::string format_latency_report(const LayerSpec& spec, std::size_t path_rank, const ContractionPath& path,
                                  Partition part, Dataflow df, const LatencyReport& report) {
    std::string out = fmt::format("layer {} path {} ({}) partition {} dataflow {}\n", spec.name, path_rank,
                                  path.encoding, to_string(part), to_string(df));
    out += "step  m  k  n  placement  rows x cols  start  finish  compute  stall\n";
    for (const auto& s : report.per_step) {
        out += fmt::format("{}  {}  {}  {}  {}  {}x{}  {}  {}  {}  {}\n", s.step + 1, s.shape.m, s.shape.k, s.shape.n,
                           to_string(s.placement), s.rows, s.cols, s.start, s.finish, s.compute_cycles,
                           s.stall_cycles);
    }
    out += fmt::format("macs={}\ntraffic_words={}\ncompute={}\nstall={}\nprologue={}\ntotal={}\n", report.macs,
                       report.traffic_words, report.compute_cycles, report.stall_cycles, report.prologue_cycles,
                       report.total_cycles);
    return out;
}

std::string dse_report_json(const DseArtifacts& a) {
    const DseResult& r = a.result;
    ordered_json j;
    j["model"] = a.model.name;
    j["mode"] = std::string(to_string(r.mode));
    j["k"] = a.k;
    j["hardware"] = ordered_json::parse(serialize_hardware_config(a.hardware));
    j["strategy"] = r.strategy;
    ordered_json totals = ordered_json::array();
    for (std::size_t h = 0; h < r.strategy_totals.size(); ++h) {
        totals.push_back({{"name", a.hardware.strategies.strategies.at(h).name},
                          {"cycles", cycles_json(r.strategy_totals[h])}});
    }
    j["strategy_totals"] = totals;
    j["total_cycles"] = cycles_json(r.total_cycles);

    ordered_json layers = ordered_json::array();
    for (std::size_t l = 0; l < r.layers.size(); ++l) {
        const LayerChoice& c = r.layers[l];
        const LayerSpeedup& s = a.speedups.layers.at(l);
        ordered_json row;
        row["name"] = a.table.layer_name(l);
        row["kind"] = std::string(to_string(a.designs[l].spec.kind()));
        row["path_rank"] = c.path_index + 1;
        row["path_mac"] = a.table.path_mac(l, c.path_index);
        row["path"] = a.designs[l].paths.at(c.path_index).encoding;
        row["partition"] = std::string(to_string(c.partition));
        row["dataflow"] = std::string(to_string(c.dataflow));
        row["cycles"] = cycles_json(c.cycles);
        row["dense_cycles"] = cycles_json(s.dense_cycles);
        row["mac_opt_cycles"] = cycles_json(s.mac_opt_cycles);
        row["reconstruction_cycles"] = cycles_json(s.reconstruction_cycles);
        row["speedup_vs_dense"] = format_ratio(s.dense_over_tt);
        row["speedup_vs_mac_opt"] = format_ratio(s.mac_opt_over_tt);
        row["speedup_vs_reconstruction"] = format_ratio(s.reconstruction_over_tt);
        ordered_json candidates = ordered_json::array();
        for (std::size_t p = 0; p < a.table.path_count(l); ++p) {
            candidates.push_back({{"rank", p + 1}, {"mac", a.table.path_mac(l, p)}});
        }
        row["candidates"] = candidates;
        layers.push_back(row);
    }
    j["layers"] = layers;

    const LayerSpeedup& t = a.speedups.total;
    j["totals"] = {
        {"tt_opt_cycles", cycles_json(t.tt_opt_cycles)},
        {"dense_cycles", cycles_json(t.dense_cycles)},
        {"mac_opt_cycles", cycles_json(t.mac_opt_cycles)},
        {"reconstruction_cycles", cycles_json(t.reconstruction_cycles)},
        {"speedup_vs_dense", format_ratio(t.dense_over_tt)},
        {"speedup_vs_mac_opt", format_ratio(t.mac_opt_over_tt)},
        {"speedup_vs_reconstruction", format_ratio(t.reconstruction_over_tt)},
    };

    const ChoiceSummary s = summarize_choices(r);
    j["summary"] = {
        {"core", {{"S", format_ratio(s.core_single, 2)}, {"M", format_ratio(s.core_multi, 2)}}},
        {"path", {{"path_1", format_ratio(s.path_first, 2)}, {"path_k", format_ratio(s.path_other, 2)}}},
        {"dataflow",
         {{"IS", format_ratio(s.dataflow_is, 2)},
          {"OS", format_ratio(s.dataflow_os, 2)},
          {"WS", format_ratio(s.dataflow_ws, 2)}}},
    };
    return j.dump(2) + "\n";
}

std::string cost_table_csv(const CostTable& table) {
    std::string out = "layer,name,path_rank,path_mac,partition,dataflow,cycles\n";
    for (std::size_t l = 0; l < table.layer_count(); ++l) {
        for (std::size_t p = 0; p < table.path_count(l); ++p) {
            for (std::size_t c = 0; c < table.partitions().size(); ++c) {
                for (std::size_t d = 0; d < table.dataflows().size(); ++d) {
                    out += fmt::format("{},{},{},{},{},{},{}\n", l, table.layer_name(l), p + 1, table.path_mac(l, p),
                                       to_string(table.partitions()[c]), to_string(table.dataflows()[d]),
                                       format_cycles(table.at(l, p, c, d)));
                }
            }
        }
    }
    return out;
}

std::string plot_csv(const CostTable& table, const StrategySpace& space, const DseResult& result) {
    const Strategy& chosen = space.strategies.at(result.strategy_index);
    std::string out = "layer,name,path_rank,path_mac";
    for (Dataflow df : table.dataflows()) {
        out += fmt::format(",{}_cycles", to_string(df));
    }
    out += ",best_cycles,selected\n";
    for (std::size_t l = 0; l < table.layer_count(); ++l) {
        for (std::size_t p = 0; p < table.path_count(l); ++p) {
            out += fmt::format("{},{},{},{}", l, table.layer_name(l), p + 1, table.path_mac(l, p));
            Cycles best = kInfiniteCycles;
            for (std::size_t d = 0; d < table.dataflows().size(); ++d) {
                Cycles per_df = kInfiniteCycles;
                for (std::size_t c = 0; c < table.partitions().size(); ++c) {
                    if (allowed(chosen, table.partitions()[c])) {
                        per_df = std::min(per_df, table.at(l, p, c, d));
                    }
                }
                best = std::min(best, per_df);
                out += "," + format_cycles(per_df);
            }
            out += fmt::format(",{},{}\n", format_cycles(best), result.layers.at(l).path_index == p ? 1 : 0);
        }
    }
    return out;
}

}  // namespace ttdse
