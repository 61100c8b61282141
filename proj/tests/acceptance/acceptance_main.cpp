// One line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "oracle/dense_tensor.hpp"
#include "oracle/random_networks.hpp"
#include "ttdse/cli.hpp"
#include "ttdse/config_io.hpp"
#include "ttdse/dse_engine.hpp"

using namespace ttdse;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string config(const std::string& name) { return std::string(TTDSE_SOURCE_DIR) + "/configs/" + name; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome path_oracle_equivalence() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20250101);
    oracle::NetworkShape shape;  // 2..7 nodes, sizes 1..6
    int mismatches = 0;
    const int networks = 500;
    for (int i = 0; i < networks; ++i) {
        const auto net = oracle::random_connected_network(rng, shape);
        const auto all = enumerate_all_paths(net);
        const auto top = topk_mac_paths(net, 3);
        const std::size_t n = std::min<std::size_t>(3, all.size());
        bool same = top.size() == n;
        for (std::size_t j = 0; same && j < n; ++j) same = top[j].total_mac == all[j].total_mac;
        mismatches += !same;
    }
    const double elapsed = seconds_since(t0);
    return {mismatches == 0 && elapsed < 60.0,
            fmt::format("{} networks, {} mismatches, {:.2f} s (limit 60 s)", networks, mismatches, elapsed)};
}

Outcome dse_optimality() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(4711);
    int mismatches = 0;
    int compared = 0;
    while (compared < 200) {
        const auto rt = oracle::random_cost_table(rng, 4, 4);
        bool g_ok = true, b_ok = true;
        DseResult g, b;
        try { g = global_search(rt.table, rt.space); } catch (const InfeasibleModel&) { g_ok = false; }
        try { b = brute_force_search(rt.table, rt.space); } catch (const InfeasibleModel&) { b_ok = false; }
        if (g_ok != b_ok) {
            ++mismatches;
        } else if (g_ok) {
            mismatches += !(g == b);
        }
        ++compared;
    }
    const ModelConfig toy = load_model_config(config("toy_tt_linear.json"));
    const HardwareFile hw = load_hardware_config(config("hardware_default.json"));
    const CostTable table = populate_cost_table(toy.layers, hw.hw, kDefaultTopK, ExecutionMode::Inference);
    const bool toy_match = global_search(table, hw.strategies) == brute_force_search(table, hw.strategies);
    const double elapsed = seconds_since(t0);
    return {mismatches == 0 && toy_match && toy.layers.size() == 3 && elapsed < 30.0,
            fmt::format("{} random tables, {} mismatches; toy model ({} layers) {}; {:.2f} s (limit 30 s)", compared,
                        mismatches, toy.layers.size(), toy_match ? "matches" : "differs", elapsed)};
}

Outcome latency_formulas() {
    const Cycles os = gemm_compute_cycles({32, 32, 32}, 32, 32, Dataflow::OS);
    const Cycles ws = gemm_compute_cycles({32, 32, 32}, 32, 32, Dataflow::WS);
    const Cycles one = gemm_compute_cycles({1, 1, 1}, 1, 1, Dataflow::OS);

    HardwareConfig fast;
    fast.bandwidth = 1'000'000'000;
    HardwareConfig slow;
    slow.bandwidth = 1;
    bool compute_bound = true;
    bool bandwidth_bound = true;
    for (Dataflow df : kAllDataflows) {
        const auto f = gemm_latency({512, 256, 384}, fast, df);
        compute_bound = compute_bound && f.total_cycles == f.compute_cycles + f.prologue_cycles &&
                        f.stall_cycles == f.prologue_cycles;
        const auto s = gemm_latency({512, 256, 384}, slow, df);
        bandwidth_bound = bandwidth_bound && s.total_cycles == static_cast<Cycles>(s.traffic_words) + s.prologue_cycles;
    }
    return {os == 126 && ws == 95 && one == 2 && compute_bound && bandwidth_bound,
            fmt::format("OS(32,32,32)={} WS(32,32,32)={} OS(1,1,1)={} compute-bound {} bandwidth-bound {}", os, ws,
                        one, compute_bound ? "ok" : "FAILED", bandwidth_bound ? "ok" : "FAILED")};
}

Outcome mac_vs_latency_witness() {
    const ModelConfig vit = load_model_config(config("vit_ti4_tt.json"));
    const HardwareConfig hw;  // default 32x32
    const StrategySpace space = StrategySpace::defaults();
    const auto designs = build_layer_designs(vit.layers, kDefaultTopK, ExecutionMode::Inference);
    const CostTable table = populate_cost_table(designs, hw);
    const DseResult result = global_search(table, space);
    std::vector<std::string> witnesses;
    for (std::size_t l = 0; l < result.layers.size(); ++l) {
        if (result.layers[l].path_index != 0) witnesses.push_back(table.layer_name(l));
    }
    // Cross-check the first block with brute force.
    CostTable block(table.partitions(), table.dataflows());
    for (std::size_t l = 0; l < 4; ++l) {
        std::vector<std::int64_t> macs;
        for (std::size_t p = 0; p < table.path_count(l); ++p) macs.push_back(table.path_mac(l, p));
        block.add_layer(table.layer_name(l), macs);
        for (std::size_t p = 0; p < macs.size(); ++p)
            for (std::size_t c = 0; c < table.partitions().size(); ++c)
                for (std::size_t d = 0; d < table.dataflows().size(); ++d) block.set(l, p, c, d, table.at(l, p, c, d));
    }
    const DseResult g = global_search(block, space);
    const bool brute_ok = g == brute_force_search(block, space);
    bool block_witness = false;
    for (const auto& c : g.layers) block_witness = block_witness || c.path_index != 0;
    return {!witnesses.empty() && brute_ok && block_witness,
            fmt::format("{} of {} layers select a path other than path 1 (first: {}); brute force on block 0 {}",
                        witnesses.size(), result.layers.size(), witnesses.empty() ? "none" : witnesses.front(),
                        brute_ok ? "agrees" : "DISAGREES")};
}

oracle::DenseTensor pad_modes(oracle::DenseTensor t, const TensorNode& node) {
    for (const auto& m : node.modes) {
        if (std::find(t.modes.begin(), t.modes.end(), m.id) == t.modes.end()) {
            t.modes.push_back(m.id);
            t.dims.push_back(m.size);
        }
    }
    return t;
}

Outcome gradient_finite_difference() {
    const auto t0 = std::chrono::steady_clock::now();
    LayerSpec spec;
    spec.name = "fd";
    spec.shape = TtLinearShape{{3, 4}, {4, 2}, {1, 3, 4, 2, 1}};
    spec.batch = 2;
    const TensorNetwork net = build_tt_linear(spec);
    const auto tensors = oracle::random_tensors(net, 17);
    const auto forward = topk_mac_paths(net, 1).front();
    TensorNode dy_node;
    dy_node.modes = net.free_modes();
    std::mt19937_64 rng(18);
    const auto dy = oracle::random_tensor(dy_node, rng);
    auto loss = [&](const std::map<NodeId, oracle::DenseTensor>& ts) {
        const auto y = oracle::permute(oracle::evaluate_path(net, ts, forward), dy.modes);
        double l = 0.0;
        for (std::size_t i = 0; i < y.data.size(); ++i) l += y.data[i] * dy.data[i];
        return l;
    };

    const double h = 1e-4;
    double worst = 0.0;
    std::size_t entries = 0;
    const auto grads = gradient_networks(net);
    for (const auto& g : grads) {
        std::map<NodeId, oracle::DenseTensor> gt;
        for (const auto& n : g.network.nodes()) {
            gt.emplace(n.id, pad_modes(tensors.count(n.id) ? tensors.at(n.id) : dy, n));
        }
        const auto analytic = oracle::permute(
            oracle::evaluate_path(g.network, gt, topk_mac_paths(g.network, 1).front()), tensors.at(g.target).modes);
        const double scale = std::max(oracle::max_abs(analytic), 1e-12);
        for (std::size_t e = 0; e < analytic.data.size(); ++e) {
            auto plus = tensors;
            auto minus = tensors;
            plus.at(g.target).data[e] += h;
            minus.at(g.target).data[e] -= h;
            const double fd = (loss(plus) - loss(minus)) / (2 * h);
            worst = std::max(worst, std::abs(fd - analytic.data[e]) / scale);
            ++entries;
        }
    }
    const double elapsed = seconds_since(t0);
    return {worst <= 1e-4 && elapsed < 10.0,
            fmt::format("{} gradient networks, {} entries, worst relative error {:.2e} (tol 1e-4), {:.2f} s",
                        grads.size(), entries, worst, elapsed)};
}

Outcome compression_ratio_direction() {
    const ModelConfig resnet = load_model_config(config("resnet18_tt.json"));
    std::int64_t dense = 0;
    std::int64_t tt = 0;
    for (const auto& l : resnet.layers) {
        dense += dense_param_count(l);
        tt += param_count(build_network(l));
    }
    const double ratio = static_cast<double>(dense) / static_cast<double>(tt);
    return {ratio > 10.0, fmt::format("dense {} / TT {} = {:.2f}x (need > 10)", dense, tt, ratio)};
}

Outcome speedup_direction() {
    const ModelConfig model = load_model_config(config("lowrank_tt_linear.json"));
    const HardwareFile hw = load_hardware_config(config("hardware_default.json"));
    const auto designs = build_layer_designs(model.layers, kDefaultTopK, ExecutionMode::Inference);
    const CostTable table = populate_cost_table(designs, hw.hw, hw.partitions, hw.dataflows);
    const DseResult result = global_search(table, hw.strategies);
    const SpeedupReport s = speedup_report(designs, hw.hw, table, hw.strategies, result);
    return {s.total.tt_opt_cycles < s.total.dense_cycles,
            fmt::format("DSE {} cycles vs dense {} cycles ({:.2f}x)", s.total.tt_opt_cycles, s.total.dense_cycles,
                        s.total.dense_over_tt)};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

Outcome dse_determinism() {
    const auto dir = std::filesystem::temp_directory_path() / "ttdse_acceptance";
    std::filesystem::create_directories(dir);
    std::vector<std::string> files[2];
    bool ok = true;
    for (const std::string name : {"toy_tt_linear.json", "vit_ti4_tt.json"}) {
        for (int run = 0; run < 2; ++run) {
            const std::string out = (dir / fmt::format("report{}.json", run)).string();
            const std::string csv = (dir / fmt::format("table{}.csv", run)).string();
            const std::string model = config(name);
            const std::string hw = config("hardware_default.json");
            const char* argv[] = {"ttdse", "dse", model.c_str(), hw.c_str(), "--out", out.c_str(), "--csv", csv.c_str()};
            std::ostringstream sink, err;
            ok = ok && cli::run(8, argv, sink, err) == 0;
            files[run] = {slurp(out), slurp(csv), slurp(dir / fmt::format("table{}_plot.csv", run)), sink.str()};
        }
        ok = ok && files[0] == files[1] && !files[0][0].empty() && !files[0][1].empty();
    }
    return {ok, "two runs of dse on the toy and ViT samples give byte-identical JSON, CSV and plot CSV"};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"path-search oracle equivalence", path_oracle_equivalence},
        {"DSE optimality", dse_optimality},
        {"latency-model formulas", latency_formulas},
        {"MAC-optimal != latency-optimal witness", mac_vs_latency_witness},
        {"gradient-network finite differences", gradient_finite_difference},
        {"compression-ratio direction", compression_ratio_direction},
        {"speedup direction", speedup_direction},
        {"dse determinism", dse_determinism},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o{false, ""};
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, fmt::format("exception: {}", e.what())};
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " " << name << ": " << o.detail << "\n";
    }
    std::cout << (failures == 0 ? "all criteria passed" : fmt::format("{} criteria failed", failures)) << std::endl;
    return failures == 0 ? 0 : 1;
}
