#include "ttdse/latency_sim.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace ttdse {

std::string_view to_string(Dataflow df) {
    switch (df) {
        case Dataflow::IS: return "IS";
        case Dataflow::OS: return "OS";
        case Dataflow::WS: return "WS";
    }
    return "?";
}

std::string_view to_string(Partition part) {
    switch (part) {
        case Partition::Full: return "1x1";
        case Partition::SplitRows: return "2x1";
        case Partition::SplitCols: return "1x2";
    }
    return "?";
}

std::string_view to_string(Placement placement) {
    switch (placement) {
        case Placement::FullArray: return "full";
        case Placement::SubCore0: return "core0";
        case Placement::SubCore1: return "core1";
        case Placement::Joint: return "joint";
    }
    return "?";
}

std::optional<Dataflow> parse_dataflow(std::string_view text) {
    for (Dataflow df : kAllDataflows) {
        if (text == to_string(df)) {
            return df;
        }
    }
    return std::nullopt;
}

std::optional<Partition> parse_partition(std::string_view text) {
    for (Partition part : kAllPartitions) {
        if (text == to_string(part)) {
            return part;
        }
    }
    return std::nullopt;
}

void HardwareConfig::validate() const {
    auto check = [](std::int64_t value, std::string_view what) {
        if (value < 1) {
            throw ConfigError(fmt::format("hardware: {} must be >= 1 (got {})", what, value));
        }
    };
    check(pe_rows, "pe_rows");
    check(pe_cols, "pe_cols");
    check(word_bytes, "word_bytes");
    check(bandwidth, "bandwidth");
    check(sram_input_filter_bytes / word_bytes, "input/filter SRAM (words)");
    check(sram_output_bytes / word_bytes, "output SRAM (words)");
}

CoreResources full_core(const HardwareConfig& hw) {
    hw.validate();
    return CoreResources{hw.pe_rows, hw.pe_cols, hw.sram_input_filter_bytes / hw.word_bytes,
                         hw.sram_output_bytes / hw.word_bytes, hw.bandwidth};
}

CoreResources sub_core(const HardwareConfig& hw, Partition part) {
    CoreResources core = full_core(hw);
    if (part == Partition::Full) {
        return core;
    }
    std::int64_t& split_dim = part == Partition::SplitRows ? core.rows : core.cols;
    if (split_dim % 2 != 0) {
        throw InfeasibleConfig(
            fmt::format("partition {} needs an even split dimension (got {})", to_string(part), split_dim));
    }
    split_dim /= 2;
    core.input_filter_words /= 2;
    core.output_words /= 2;
    core.bandwidth /= 2;
    if (core.bandwidth < 1) {
        throw InfeasibleConfig(fmt::format("partition {} leaves a sub-core without bandwidth", to_string(part)));
    }
    return core;
}

// =============================================================================
// Array model
// =============================================================================

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

// The two dimensions mapped onto (rows, cols) plus the streamed one.
struct FoldDims {
    std::int64_t along_rows;
    std::int64_t along_cols;
    std::int64_t streamed;
};

FoldDims fold_dims(const GemmShape& s, Dataflow df) {
    switch (df) {
        case Dataflow::OS: return {s.m, s.n, s.k};
        case Dataflow::WS: return {s.k, s.n, s.m};
        case Dataflow::IS: return {s.k, s.m, s.n};
    }
    return {s.m, s.n, s.k};
}

void require_array(std::int64_t rows, std::int64_t cols) {
    if (rows < 1 || cols < 1) {
        throw InfeasibleConfig(fmt::format("array must be at least 1x1 (got {}x{})", rows, cols));
    }
}

}  // namespace

std::int64_t fold_count(const GemmShape& shape, std::int64_t rows, std::int64_t cols, Dataflow df) {
    require_array(rows, cols);
    const FoldDims d = fold_dims(shape, df);
    return ceil_div(d.along_rows, rows) * ceil_div(d.along_cols, cols);
}

Cycles gemm_compute_cycles(const GemmShape& shape, std::int64_t rows, std::int64_t cols, Dataflow df) {
    require_array(rows, cols);
    const FoldDims d = fold_dims(shape, df);
    const std::int64_t row_folds = ceil_div(d.along_rows, rows);
    const std::int64_t col_folds = ceil_div(d.along_cols, cols);
    // Per-fold cost is a*r + c + b; fold extents along each axis sum to the
    // dimension itself.
    const std::int64_t a = df == Dataflow::OS ? 2 : 1;
    const std::int64_t b = df == Dataflow::OS ? d.streamed - 2 : d.streamed - 1;
    const std::int64_t total = a * d.along_rows * col_folds + row_folds * d.along_cols + row_folds * col_folds * b;
    return static_cast<Cycles>(total);
}

// =============================================================================
// Tiling
// =============================================================================

bool tiles_fit(const GemmShape& shape, const TileConfig& tiles, const CoreResources& core) {
    if (tiles.t_m < 1 || tiles.t_n < 1 || tiles.t_k < 1) {
        return false;
    }
    const std::int64_t tm = std::min(tiles.t_m, shape.m);
    const std::int64_t tn = std::min(tiles.t_n, shape.n);
    const std::int64_t tk = std::min(tiles.t_k, shape.k);
    return 2 * (tm * tk + tk * tn) <= core.input_filter_words && 2 * tm * tn <= core.output_words;
}

TileConfig default_tiles(const GemmShape& shape, const CoreResources& core, Dataflow df) {
    require_array(core.rows, core.cols);
    const std::int64_t half_in = core.input_filter_words / 2;
    const std::int64_t half_out = core.output_words / 2;
    TileConfig tiles;
    std::int64_t streamed = 0;
    switch (df) {
        case Dataflow::OS: {
            tiles.t_m = core.rows;
            tiles.t_n = core.cols;
            const std::int64_t em = std::min(core.rows, shape.m);
            const std::int64_t en = std::min(core.cols, shape.n);
            streamed = em * en <= half_out ? std::min(shape.k, half_in / (em + en)) : 0;
            tiles.t_k = streamed;
            break;
        }
        case Dataflow::WS: {
            tiles.t_k = core.rows;
            tiles.t_n = core.cols;
            const std::int64_t ek = std::min(core.rows, shape.k);
            const std::int64_t en = std::min(core.cols, shape.n);
            streamed = std::min({shape.m, (half_in - ek * en) / ek, half_out / en});
            tiles.t_m = streamed;
            break;
        }
        case Dataflow::IS: {
            tiles.t_k = core.rows;
            tiles.t_m = core.cols;
            const std::int64_t ek = std::min(core.rows, shape.k);
            const std::int64_t em = std::min(core.cols, shape.m);
            streamed = std::min({shape.n, (half_in - ek * em) / ek, half_out / em});
            tiles.t_n = streamed;
            break;
        }
    }
    if (streamed < 1 || !tiles_fit(shape, tiles, core)) {
        throw InfeasibleConfig(fmt::format("no {} tiling of [{},{},{}] fits {} + {} words of SRAM", to_string(df),
                                           shape.m, shape.k, shape.n, core.input_filter_words, core.output_words));
    }
    return tiles;
}

// =============================================================================
// Tiled GEMM latency
// =============================================================================

namespace {

// Tiles along one dimension fall into at most three classes: the first tile,
// the full-size middle tiles and the (possibly partial) last tile.
struct Segment {
    std::int64_t size;
    std::int64_t count;
    bool first;
    bool last;
};

std::vector<Segment> segments(std::int64_t extent, std::int64_t tile) {
    const std::int64_t n = ceil_div(extent, tile);
    if (n == 1) {
        return {{extent, 1, true, true}};
    }
    std::vector<Segment> result{{tile, 1, true, false}};
    if (n > 2) {
        result.push_back({tile, n - 2, false, false});
    }
    result.push_back({extent - (n - 1) * tile, 1, false, true});
    return result;
}

// Off-chip words moved for one tile. Loop nests keep the stationary tile
// resident across the innermost loop:
//   OS: m, n -> k   (output resident, written after the last k tile)
//   WS: n, k -> m   (weight tile fetched once per (k, n))
//   IS: m, k -> n   (input tile fetched once per (m, k))
// WS/IS write partial outputs per tile and read them back for k > 0.
std::int64_t tile_words(Dataflow df, const Segment& m, const Segment& n, const Segment& k) {
    const std::int64_t a = m.size * k.size;
    const std::int64_t b = k.size * n.size;
    const std::int64_t c = m.size * n.size;
    switch (df) {
        case Dataflow::OS: return a + b + (k.last ? c : 0);
        case Dataflow::WS: return a + (m.first ? b : 0) + c + (k.first ? 0 : c);
        case Dataflow::IS: return b + (n.first ? a : 0) + c + (k.first ? 0 : c);
    }
    return a + b + c;
}

}  // namespace

LatencyReport gemm_latency(const GemmShape& shape, const CoreResources& core, Dataflow df, const TileConfig& tiles) {
    require_array(core.rows, core.cols);
    if (shape.m < 1 || shape.k < 1 || shape.n < 1) {
        throw InfeasibleConfig(fmt::format("invalid GEMM shape [{},{},{}]", shape.m, shape.k, shape.n));
    }
    if (core.bandwidth < 1) {
        throw InfeasibleConfig("bandwidth must be at least one word per cycle");
    }
    if (!tiles_fit(shape, tiles, core)) {
        throw InfeasibleConfig(fmt::format("tiles <{},{},{}> overflow SRAM for [{},{},{}]", tiles.t_m, tiles.t_n,
                                           tiles.t_k, shape.m, shape.k, shape.n));
    }

    Cycles compute = 0;
    Cycles transfer = 0;
    Cycles prologue = 0;
    std::int64_t traffic = 0;
    for (const auto& sm : segments(shape.m, tiles.t_m)) {
        for (const auto& sn : segments(shape.n, tiles.t_n)) {
            for (const auto& sk : segments(shape.k, tiles.t_k)) {
                const std::int64_t count = sm.count * sn.count * sk.count;
                const Cycles tile_compute =
                    gemm_compute_cycles(GemmShape{sm.size, sk.size, sn.size}, core.rows, core.cols, df);
                const std::int64_t words = tile_words(df, sm, sn, sk);
                const auto tile_transfer = static_cast<Cycles>(ceil_div(words, core.bandwidth));
                compute += tile_compute * static_cast<Cycles>(count);
                transfer += tile_transfer * static_cast<Cycles>(count);
                traffic += words * count;
                if (sm.first && sn.first && sk.first) {
                    prologue = tile_transfer;
                }
            }
        }
    }

    LatencyReport report;
    report.compute_cycles = compute;
    report.total_cycles = std::max(compute, transfer) + prologue;
    report.stall_cycles = report.total_cycles - compute;
    report.prologue_cycles = prologue;
    report.traffic_words = traffic;
    report.macs = shape.macs();

    StepTiming timing;
    timing.shape = shape;
    timing.dataflow = df;
    timing.rows = core.rows;
    timing.cols = core.cols;
    timing.pieces = {shape};
    timing.finish = report.total_cycles;
    timing.cycles = report.total_cycles;
    timing.compute_cycles = compute;
    timing.stall_cycles = report.stall_cycles;
    report.per_step.push_back(timing);
    return report;
}

LatencyReport gemm_latency(const GemmShape& shape, const CoreResources& core, Dataflow df) {
    return gemm_latency(shape, core, df, default_tiles(shape, core, df));
}

LatencyReport gemm_latency(const GemmShape& shape, const HardwareConfig& hw, Dataflow df, const TileConfig& tiles) {
    return gemm_latency(shape, full_core(hw), df, tiles);
}

LatencyReport gemm_latency(const GemmShape& shape, const HardwareConfig& hw, Dataflow df) {
    return gemm_latency(shape, full_core(hw), df);
}

// =============================================================================
// Path latency
// =============================================================================

namespace {

struct Slot {
    Placement placement = Placement::FullArray;
    std::vector<GemmShape> pieces;
    Cycles cycles = 0;
    Cycles compute = 0;
    Cycles stall = 0;
    Cycles prologue = 0;
    std::int64_t traffic = 0;
    Cycles start = 0;
};

Slot solo_slot(const GemmShape& shape, const CoreResources& core, Dataflow df, Placement placement) {
    const LatencyReport r = gemm_latency(shape, core, df);
    return Slot{placement, {shape}, r.total_cycles, r.compute_cycles, r.stall_cycles, r.prologue_cycles,
                r.traffic_words, 0};
}

// Splits the larger of M/N in two; each half runs on its own sub-core.
Slot joint_slot(const GemmShape& shape, const CoreResources& core, Dataflow df) {
    GemmShape first = shape;
    GemmShape second = shape;
    std::int64_t& dim_first = shape.m >= shape.n ? first.m : first.n;
    std::int64_t& dim_second = shape.m >= shape.n ? second.m : second.n;
    const std::int64_t whole = dim_first;
    dim_first = (whole + 1) / 2;
    dim_second = whole / 2;
    if (dim_second == 0) {
        Slot slot = solo_slot(shape, core, df, Placement::Joint);
        return slot;
    }
    const LatencyReport a = gemm_latency(first, core, df);
    const LatencyReport b = gemm_latency(second, core, df);
    const LatencyReport& longer = b.total_cycles > a.total_cycles ? b : a;
    return Slot{Placement::Joint,      {first, second},         longer.total_cycles, longer.compute_cycles,
                longer.stall_cycles,   longer.prologue_cycles, a.traffic_words + b.traffic_words, 0};
}

}  // namespace

LatencyReport path_latency(const TensorNetwork& net, const ContractionPath& path, const HardwareConfig& hw,
                           Partition part, std::span<const Dataflow> dataflow_per_step) {
    const std::size_t n = path.steps.size();
    if (dataflow_per_step.size() != n) {
        throw Error(fmt::format("path has {} steps but {} dataflows were given", n, dataflow_per_step.size()));
    }

    // Replay the contractions so every step's GEMM comes from the network.
    std::vector<GemmShape> shapes;
    TensorNetwork current = net;
    for (const auto& step : path.steps) {
        Contraction c = contract_pair(current, step.left, step.right);
        if (c.shape != step.shape || c.result != step.result) {
            throw NetworkError("contraction path does not match the network");
        }
        shapes.push_back(c.shape);
        current = std::move(c.network);
    }

    std::vector<Slot> slots(n);
    if (part == Partition::Full) {
        const CoreResources core = full_core(hw);
        Cycles now = 0;
        for (std::size_t i = 0; i < n; ++i) {
            slots[i] = solo_slot(shapes[i], core, dataflow_per_step[i], Placement::FullArray);
            slots[i].start = now;
            now += slots[i].cycles;
        }
    } else {
        const CoreResources core = sub_core(hw, part);
        const StepDag dag = dependency_dag(path);
        std::vector<Slot> solo(n);
        for (std::size_t i = 0; i < n; ++i) {
            solo[i] = solo_slot(shapes[i], core, dataflow_per_step[i], Placement::SubCore0);
        }

        std::vector<bool> scheduled(n, false);
        std::vector<Cycles> finish(n, 0);
        std::array<Cycles, 2> core_free{0, 0};
        std::size_t remaining = n;
        Cycles now = 0;
        while (remaining > 0) {
            std::vector<std::size_t> ready;
            for (std::size_t i = 0; i < n; ++i) {
                if (scheduled[i]) {
                    continue;
                }
                const auto& preds = dag.predecessors[i];
                if (std::all_of(preds.begin(), preds.end(),
                                [&](std::size_t p) { return scheduled[p] && finish[p] <= now; })) {
                    ready.push_back(i);
                }
            }
            std::vector<int> idle;
            for (int c = 0; c < 2; ++c) {
                if (core_free[c] <= now) {
                    idle.push_back(c);
                }
            }

            if (!ready.empty() && !idle.empty()) {
                if (idle.size() == 2 && ready.size() == 1) {
                    // Nothing is running and every other step waits on this one.
                    const std::size_t i = ready.front();
                    slots[i] = joint_slot(shapes[i], core, dataflow_per_step[i]);
                    slots[i].start = now;
                    finish[i] = now + slots[i].cycles;
                    core_free = {finish[i], finish[i]};
                    scheduled[i] = true;
                    --remaining;
                } else {
                    std::stable_sort(ready.begin(), ready.end(), [&](std::size_t a, std::size_t b) {
                        return solo[a].cycles > solo[b].cycles;
                    });
                    for (std::size_t r = 0; r < ready.size() && r < idle.size(); ++r) {
                        const std::size_t i = ready[r];
                        slots[i] = solo[i];
                        slots[i].placement = idle[r] == 0 ? Placement::SubCore0 : Placement::SubCore1;
                        slots[i].start = now;
                        finish[i] = now + slots[i].cycles;
                        core_free[idle[r]] = finish[i];
                        scheduled[i] = true;
                        --remaining;
                    }
                }
                continue;
            }

            Cycles next = kInfiniteCycles;
            for (std::size_t i = 0; i < n; ++i) {
                if (scheduled[i] && finish[i] > now) {
                    next = std::min(next, finish[i]);
                }
            }
            if (next == kInfiniteCycles) {
                throw NetworkError("contraction path has a dependency cycle");
            }
            now = next;
        }
    }

    LatencyReport report;
    for (std::size_t i = 0; i < n; ++i) {
        const Slot& s = slots[i];
        StepTiming timing;
        timing.step = i;
        timing.shape = shapes[i];
        timing.dataflow = dataflow_per_step[i];
        const CoreResources core = part == Partition::Full ? full_core(hw) : sub_core(hw, part);
        timing.rows = core.rows;
        timing.cols = core.cols;
        timing.placement = s.placement;
        timing.pieces = s.pieces;
        timing.start = s.start;
        timing.finish = s.start + s.cycles;
        timing.cycles = s.cycles;
        timing.compute_cycles = s.compute;
        timing.stall_cycles = s.stall;
        report.per_step.push_back(timing);
        report.traffic_words += s.traffic;
        for (const auto& piece : s.pieces) {
            report.macs += piece.macs();
        }
        report.total_cycles = std::max(report.total_cycles, timing.finish);
    }

    // Walk the chain of back-to-back slots that ends at the makespan.
    if (n > 0) {
        std::size_t cur = 0;
        for (std::size_t i = 1; i < n; ++i) {
            if (report.per_step[i].finish > report.per_step[cur].finish) {
                cur = i;
            }
        }
        while (true) {
            const StepTiming& t = report.per_step[cur];
            report.compute_cycles += t.compute_cycles;
            report.stall_cycles += t.stall_cycles;
            report.prologue_cycles += slots[cur].prologue;
            if (t.start == 0) {
                break;
            }
            std::size_t prev = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (report.per_step[i].finish == t.start) {
                    prev = i;
                    break;
                }
            }
            if (prev == n) {
                throw Error("schedule has an unexplained gap");
            }
            cur = prev;
        }
    }
    return report;
}

LatencyReport path_latency(const TensorNetwork& net, const ContractionPath& path, const HardwareConfig& hw,
                           Partition part, Dataflow dataflow) {
    const std::vector<Dataflow> per_step(path.steps.size(), dataflow);
    return path_latency(net, path, hw, part, per_step);
}

// =============================================================================
// Dense baselines
// =============================================================================

std::vector<GemmShape> dense_layer_gemms(const LayerSpec& spec, bool training) {
    validate_spec(spec);
    const LayerSpec dense = dense_equivalent(spec);
    std::vector<GemmShape> gemms;
    if (const auto* s = std::get_if<DenseLinearShape>(&dense.shape)) {
        const std::int64_t b = dense.batch;
        gemms.push_back({b, s->in_features, s->out_features});
        if (training) {
            gemms.push_back({b, s->out_features, s->in_features});  // dX = dY W
            gemms.push_back({s->out_features, b, s->in_features});  // dW = dY^T X
        }
        return gemms;
    }
    const auto& c = std::get<DenseConvShape>(dense.shape);
    const std::int64_t reduce = c.in_channels * c.kernel_h * c.kernel_w;
    const std::int64_t cols = c.patches * dense.batch;
    gemms.push_back({c.out_channels, reduce, cols});
    if (training) {
        gemms.push_back({reduce, c.out_channels, cols});  // dX_unf = W^T dY
        gemms.push_back({c.out_channels, cols, reduce});  // dW = dY X_unf^T
    }
    return gemms;
}

LatencyReport dense_layer_latency(const LayerSpec& spec, const HardwareConfig& hw, Dataflow df, bool training) {
    LatencyReport total;
    const CoreResources core = full_core(hw);
    Cycles now = 0;
    std::size_t index = 0;
    for (const auto& gemm : dense_layer_gemms(spec, training)) {
        LatencyReport r = gemm_latency(gemm, core, df);
        total.compute_cycles += r.compute_cycles;
        total.stall_cycles += r.stall_cycles;
        total.total_cycles += r.total_cycles;
        total.prologue_cycles += r.prologue_cycles;
        total.traffic_words += r.traffic_words;
        total.macs += r.macs;
        StepTiming timing = r.per_step.front();
        timing.step = index++;
        timing.start = now;
        timing.finish = now + timing.cycles;
        now = timing.finish;
        total.per_step.push_back(timing);
    }
    return total;
}

}  // namespace ttdse
