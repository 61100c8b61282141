#include <algorithm>
#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "oracle/random_networks.hpp"
#include "ttdse/config_io.hpp"
#include "ttdse/dse_engine.hpp"

using namespace ttdse;

namespace {

LayerSpec tt_linear(std::string name, std::vector<std::int64_t> m, std::vector<std::int64_t> n,
                    std::vector<std::int64_t> r, std::int64_t batch) {
    LayerSpec spec;
    spec.name = std::move(name);
    spec.shape = TtLinearShape{std::move(m), std::move(n), std::move(r)};
    spec.batch = batch;
    return spec;
}

std::vector<LayerSpec> toy_model() {
    return {tt_linear("a", {4, 4}, {4, 4}, {1, 2, 2, 2, 1}, 4), tt_linear("b", {8, 4}, {4, 8}, {1, 3, 4, 3, 1}, 8)};
}

// Copies a table, letting `edit` change entries of the copy.
CostTable copy_table(const CostTable& t) {
    CostTable out(t.partitions(), t.dataflows());
    for (std::size_t l = 0; l < t.layer_count(); ++l) {
        std::vector<std::int64_t> macs;
        for (std::size_t p = 0; p < t.path_count(l); ++p) macs.push_back(t.path_mac(l, p));
        out.add_layer(t.layer_name(l), macs);
        for (std::size_t p = 0; p < t.path_count(l); ++p)
            for (std::size_t c = 0; c < t.partitions().size(); ++c)
                for (std::size_t d = 0; d < t.dataflows().size(); ++d) out.set(l, p, c, d, t.at(l, p, c, d));
    }
    return out;
}

bool allowed(const Strategy& s, Partition p) {
    return std::find(s.partitions.begin(), s.partitions.end(), p) != s.partitions.end();
}

}  // namespace

TEST_CASE("default strategy space", "[dse_engine]") {
    const StrategySpace space = StrategySpace::defaults();
    REQUIRE(space.strategies.size() == 2);
    CHECK(space.strategies[0].partitions == std::vector<Partition>{Partition::Full});
    CHECK(space.strategies[1].partitions.size() == 2);
    CHECK_NOTHROW(space.validate(kAllPartitions));
    const std::vector<Partition> only_full{Partition::Full};
    CHECK_THROWS_AS(space.validate(only_full), ConfigError);
}

TEST_CASE("cost table cardinality", "[dse_engine]") {
    const HardwareConfig hw;
    SECTION("one layer, K=1, one partition, one dataflow") {
        const auto designs = build_layer_designs(std::vector<LayerSpec>{toy_model()[0]}, 1, ExecutionMode::Inference);
        const std::vector<Partition> parts{Partition::Full};
        const std::vector<Dataflow> dfs{Dataflow::OS};
        const CostTable t = populate_cost_table(designs, hw, parts, dfs);
        CHECK(t.entry_count() == 1);
        CHECK(t.at(0, 0, 0, 0) < kInfiniteCycles);
        const StrategySpace space{{Strategy{"only", {Partition::Full}}}};
        const DseResult r = global_search(t, space);
        CHECK(r.layers.front() == LayerChoice{0, Partition::Full, Dataflow::OS, t.at(0, 0, 0, 0)});
        CHECK(brute_force_search(t, space) == r);
    }
    SECTION("sum over layers of paths x 3 x 3") {
        const auto designs = build_layer_designs(toy_model(), 5, ExecutionMode::Inference);
        const CostTable t = populate_cost_table(designs, hw);
        std::size_t expected = 0;
        for (const auto& d : designs) expected += d.paths.size() * 3 * 3;
        CHECK(t.entry_count() == expected);
    }
}

TEST_CASE("every table entry is a direct simulation", "[dse_engine]") {
    const HardwareConfig hw;
    for (ExecutionMode mode : {ExecutionMode::Inference, ExecutionMode::Training}) {
        const auto model = toy_model();
        const CostTable t = populate_cost_table(model, hw, 4, mode);
        for (std::size_t l = 0; l < model.size(); ++l) {
            const TensorNetwork net = build_network(model[l]);
            const auto paths = topk_mac_paths(net, 4);
            REQUIRE(t.path_count(l) == paths.size());
            for (std::size_t p = 0; p < paths.size(); ++p) {
                for (Partition part : kAllPartitions) {
                    for (Dataflow df : kAllDataflows) {
                        Cycles expected = path_latency(net, paths[p], hw, part, df).total_cycles;
                        if (mode == ExecutionMode::Training) {
                            for (const auto& g : gradient_networks(net)) {
                                const auto gp = topk_mac_paths(g.network, 1).front();
                                expected += path_latency(g.network, gp, hw, part, df).total_cycles;
                            }
                        }
                        CHECK(t.at(l, p, part, df) == expected);
                    }
                }
            }
        }
    }
}

TEST_CASE("infeasible entries are infinite", "[dse_engine]") {
    HardwareConfig hw;
    hw.sram_input_filter_bytes = 64;
    hw.sram_output_bytes = 64;
    const CostTable t = populate_cost_table(toy_model(), hw, 2, ExecutionMode::Inference);
    bool any_inf = false;
    for (std::size_t p = 0; p < t.path_count(1); ++p)
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t d = 0; d < 3; ++d) any_inf = any_inf || t.at(1, p, c, d) == kInfiniteCycles;
    CHECK(any_inf);
}

TEST_CASE("search picks the split strategy when it halves one layer", "[dse_engine]") {
    const std::vector<Partition> parts{Partition::Full, Partition::SplitCols};
    const std::vector<Dataflow> dfs{Dataflow::OS};
    CostTable t(parts, dfs);
    for (int l = 0; l < 3; ++l) {
        t.add_layer("L" + std::to_string(l), {10});
        t.set(l, 0, 0, 0, 100);
        t.set(l, 0, 1, 0, 100);
    }
    t.set(1, 0, t.partition_index(Partition::SplitCols), 0, 50);
    const StrategySpace space{{Strategy{"mono", {Partition::Full}}, Strategy{"split", {Partition::SplitCols}}}};
    const DseResult r = global_search(t, space);
    CHECK(r.strategy == "split");
    CHECK(r.total_cycles == 250);
    CHECK(r.strategy_totals == std::vector<Cycles>{300, 250});
    CHECK(brute_force_search(t, space) == r);
}

TEST_CASE("ties resolve by strategy, path, partition and dataflow order", "[dse_engine]") {
    CostTable t({Partition::SplitCols, Partition::SplitRows, Partition::Full}, {Dataflow::WS, Dataflow::OS, Dataflow::IS});
    CHECK(t.partitions() == std::vector<Partition>{Partition::Full, Partition::SplitRows, Partition::SplitCols});
    CHECK(t.dataflows() == std::vector<Dataflow>{Dataflow::IS, Dataflow::OS, Dataflow::WS});
    for (int l = 0; l < 2; ++l) {
        t.add_layer("L" + std::to_string(l), {1, 2, 3});
        for (std::size_t p = 0; p < 3; ++p)
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t d = 0; d < 3; ++d) t.set(l, p, c, d, 7);
    }
    const StrategySpace space{
        {Strategy{"split", {Partition::SplitCols, Partition::SplitRows}}, Strategy{"mono", {Partition::Full}}}};
    const DseResult g = global_search(t, space);
    CHECK(g.strategy_index == 0);
    for (const auto& c : g.layers) {
        CHECK(c == LayerChoice{0, Partition::SplitRows, Dataflow::IS, 7});
    }
    CHECK(brute_force_search(t, space) == g);
}

TEST_CASE("no finite strategy is an infeasible model", "[dse_engine]") {
    CostTable t({Partition::Full}, {Dataflow::OS});
    t.add_layer("L0", {1});
    const StrategySpace space{{Strategy{"mono", {Partition::Full}}}};
    CHECK_THROWS_AS(global_search(t, space), InfeasibleModel);
    CHECK_THROWS_AS(brute_force_search(t, space), InfeasibleModel);
}

TEST_CASE("brute force refuses oversized spaces", "[dse_engine]") {
    std::mt19937_64 rng(1);
    auto rt = oracle::random_cost_table(rng, 4, 4, 0.0);
    CHECK_THROWS_AS(brute_force_search(rt.table, rt.space, ExecutionMode::Inference, 1), SearchLimitError);
}

TEST_CASE("global search equals brute force on random tables", "[dse_engine][property]") {
    std::mt19937_64 rng(271828);
    for (int trial = 0; trial < 300; ++trial) {
        const auto rt = oracle::random_cost_table(rng, 4, 4);
        DseResult g, b;
        bool g_ok = true, b_ok = true;
        try { g = global_search(rt.table, rt.space); } catch (const InfeasibleModel&) { g_ok = false; }
        try { b = brute_force_search(rt.table, rt.space); } catch (const InfeasibleModel&) { b_ok = false; }
        REQUIRE(g_ok == b_ok);
        if (!g_ok) continue;
        CHECK(g == b);
        const Strategy& h = rt.space.strategies.at(g.strategy_index);
        Cycles sum = 0;
        for (std::size_t l = 0; l < g.layers.size(); ++l) {
            CHECK(allowed(h, g.layers[l].partition));
            CHECK(g.layers[l].cycles == rt.table.at(l, g.layers[l].path_index, g.layers[l].partition, g.layers[l].dataflow));
            sum += g.layers[l].cycles;
        }
        CHECK(sum == g.total_cycles);
    }
}

TEST_CASE("layer sub-problems are independent", "[dse_engine][property]") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        auto rt = oracle::random_cost_table(rng, 4, 4, 0.0);
        if (rt.table.layer_count() < 2) continue;
        StrategySpace single{{rt.space.strategies.front()}};
        const DseResult before = global_search(rt.table, single);
        CostTable edited = copy_table(rt.table);
        const std::size_t victim = std::uniform_int_distribution<std::size_t>(0, edited.layer_count() - 1)(rng);
        for (std::size_t p = 0; p < edited.path_count(victim); ++p)
            for (std::size_t c = 0; c < edited.partitions().size(); ++c)
                for (std::size_t d = 0; d < edited.dataflows().size(); ++d)
                    edited.set(victim, p, c, d, std::uniform_int_distribution<Cycles>(1, 50)(rng));
        const DseResult after = global_search(edited, single);
        for (std::size_t l = 0; l < edited.layer_count(); ++l) {
            if (l != victim) CHECK(after.layers[l] == before.layers[l]);
        }
    }
}

TEST_CASE("enlarging paths or partitions never raises the optimum", "[dse_engine][property]") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        auto rt = oracle::random_cost_table(rng, 4, 3, 0.0);
        const DseResult base = global_search(rt.table, rt.space);

        // One more candidate path for a random layer.
        CostTable bigger(rt.table.partitions(), rt.table.dataflows());
        const std::size_t grow = std::uniform_int_distribution<std::size_t>(0, rt.table.layer_count() - 1)(rng);
        for (std::size_t l = 0; l < rt.table.layer_count(); ++l) {
            std::vector<std::int64_t> macs;
            for (std::size_t p = 0; p < rt.table.path_count(l); ++p) macs.push_back(rt.table.path_mac(l, p));
            if (l == grow) macs.push_back(1000);
            bigger.add_layer(rt.table.layer_name(l), macs);
            for (std::size_t p = 0; p < macs.size(); ++p)
                for (std::size_t c = 0; c < bigger.partitions().size(); ++c)
                    for (std::size_t d = 0; d < bigger.dataflows().size(); ++d)
                        bigger.set(l, p, c, d,
                                   p < rt.table.path_count(l) ? rt.table.at(l, p, c, d)
                                                              : std::uniform_int_distribution<Cycles>(1, 12)(rng));
        }
        CHECK(global_search(bigger, rt.space).total_cycles <= base.total_cycles);

        // Every partition allowed in every strategy.
        StrategySpace wide = rt.space;
        for (auto& s : wide.strategies) s.partitions = rt.table.partitions();
        CHECK(global_search(rt.table, wide).total_cycles <= base.total_cycles);
    }
}

TEST_CASE("speedup report", "[dse_engine]") {
    const HardwareConfig hw;
    const StrategySpace space = StrategySpace::defaults();

    SECTION("a dense layer on one core ties with its own baseline") {
        LayerSpec dense;
        dense.name = "dense";
        dense.shape = DenseLinearShape{96, 64};
        dense.batch = 40;
        const std::vector<LayerSpec> model{dense};
        const auto designs = build_layer_designs(model, 3, ExecutionMode::Inference);
        const CostTable t = populate_cost_table(designs, hw);
        const StrategySpace mono{{Strategy{"mono", {Partition::Full}}}};
        const DseResult r = global_search(t, mono);
        const SpeedupReport s = speedup_report(designs, hw, t, mono, r);
        CHECK(s.layers[0].dense_over_tt == 1.0);
        CHECK(s.total.dense_over_tt == 1.0);
    }

    SECTION("totals are the sum of layers") {
        const auto designs = build_layer_designs(toy_model(), 5, ExecutionMode::Inference);
        const CostTable t = populate_cost_table(designs, hw);
        const DseResult r = global_search(t, space);
        const SpeedupReport s = speedup_report(designs, hw, t, space, r);
        Cycles dense = 0, tt = 0, mac = 0, recon = 0;
        for (const auto& l : s.layers) {
            dense += l.dense_cycles;
            tt += l.tt_opt_cycles;
            mac += l.mac_opt_cycles;
            recon += l.reconstruction_cycles;
            CHECK(l.mac_opt_cycles >= l.tt_opt_cycles);
        }
        CHECK(s.total.dense_cycles == dense);
        CHECK(s.total.tt_opt_cycles == tt);
        CHECK(tt == r.total_cycles);
        CHECK(s.total.mac_opt_cycles == mac);
        CHECK(s.total.reconstruction_cycles == recon);
        CHECK(s.total.dense_over_tt == Catch::Approx(static_cast<double>(dense) / static_cast<double>(tt)));
    }

    SECTION("a later path wins on the ViT-like sample") {
        const ModelConfig model = load_model_config(TTDSE_SOURCE_DIR "/configs/vit_ti4_tt.json");
        const auto designs = build_layer_designs(model.layers, kDefaultTopK, ExecutionMode::Inference);
        const CostTable t = populate_cost_table(designs, hw);
        const DseResult r = global_search(t, space);
        const SpeedupReport s = speedup_report(designs, hw, t, space, r);
        bool witness = false;
        for (std::size_t l = 0; l < r.layers.size(); ++l) {
            if (r.layers[l].path_index > 0) {
                witness = true;
                CHECK(s.layers[l].mac_opt_over_tt > 1.0);
                Cycles best_path1 = kInfiniteCycles;
                for (Partition p : space.strategies[r.strategy_index].partitions)
                    for (Dataflow df : t.dataflows()) best_path1 = std::min(best_path1, t.at(l, 0, p, df));
                CHECK(r.layers[l].cycles < best_path1);
            }
        }
        CHECK(witness);
    }
}

TEST_CASE("training costs dominate inference costs", "[dse_engine]") {
    const HardwareConfig hw;
    const auto model = toy_model();
    const CostTable inf = populate_cost_table(model, hw, 3, ExecutionMode::Inference);
    const CostTable tr = populate_cost_table(model, hw, 3, ExecutionMode::Training);
    for (std::size_t l = 0; l < model.size(); ++l)
        for (std::size_t p = 0; p < inf.path_count(l); ++p)
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t d = 0; d < 3; ++d) CHECK(tr.at(l, p, c, d) > inf.at(l, p, c, d));
    const DseResult r = global_search(tr, StrategySpace::defaults(), ExecutionMode::Training);
    CHECK(r.mode == ExecutionMode::Training);
}
