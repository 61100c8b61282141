#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ttdse/path_search.hpp"
#include "ttdse/tensor_network.hpp"

namespace ttdse {

using Cycles = std::uint64_t;
inline constexpr Cycles kInfiniteCycles = std::numeric_limits<Cycles>::max();

/// Sum that stays at kInfiniteCycles once either side is infinite.
constexpr Cycles saturating_add(Cycles a, Cycles b) {
    return (a == kInfiniteCycles || b == kInfiniteCycles || a > kInfiniteCycles - b) ? kInfiniteCycles : a + b;
}

// =============================================================================
// Hardware description
// =============================================================================

enum class Dataflow { IS, OS, WS };
inline constexpr std::array<Dataflow, 3> kAllDataflows{Dataflow::IS, Dataflow::OS, Dataflow::WS};

/// Full array, two (M_PE/2) x N_PE halves, or two M_PE x (N_PE/2) halves.
/// Declaration order is the tie-break order used by the search.
enum class Partition { Full, SplitRows, SplitCols };
inline constexpr std::array<Partition, 3> kAllPartitions{Partition::Full, Partition::SplitRows, Partition::SplitCols};

std::string_view to_string(Dataflow df);
std::string_view to_string(Partition part);  // "1x1", "2x1", "1x2"
std::optional<Dataflow> parse_dataflow(std::string_view text);
std::optional<Partition> parse_partition(std::string_view text);

struct HardwareConfig {
    std::int64_t pe_rows = 32;
    std::int64_t pe_cols = 32;
    std::int64_t sram_input_filter_bytes = 3072 * 1024;
    std::int64_t sram_output_bytes = 1024 * 1024;
    std::int64_t bandwidth = 256;  // words per cycle, off-chip
    std::int64_t word_bytes = 1;

    void validate() const;  // throws ConfigError
    bool operator==(const HardwareConfig&) const = default;
};

/// What one GEMM engine sees: its PE array plus its share of SRAM and
/// bandwidth. Sub-cores of a split partition get half of both.
struct CoreResources {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::int64_t input_filter_words = 0;
    std::int64_t output_words = 0;
    std::int64_t bandwidth = 0;
};

CoreResources full_core(const HardwareConfig& hw);
/// Resources of one sub-core; throws InfeasibleConfig for an odd split
/// dimension or when the halved bandwidth drops to zero.
CoreResources sub_core(const HardwareConfig& hw, Partition part);

// =============================================================================
// GEMM model
// =============================================================================

struct TileConfig {
    std::int64_t t_m = 0;
    std::int64_t t_n = 0;
    std::int64_t t_k = 0;

    bool operator==(const TileConfig&) const = default;
};

/// Array dimensions the given dataflow folds over: OS (M, N), WS (K, N), IS (K, M).
std::int64_t fold_count(const GemmShape& shape, std::int64_t rows, std::int64_t cols, Dataflow df);

/// Fill/stream/drain cycles summed over all folds of the array:
///   OS: 2r + c + K - 2,  WS: r + M + c - 1,  IS: r + N + c - 1.
Cycles gemm_compute_cycles(const GemmShape& shape, std::int64_t rows, std::int64_t cols, Dataflow df);

/// True when double-buffered operand and output tiles fit the core's SRAM.
bool tiles_fit(const GemmShape& shape, const TileConfig& tiles, const CoreResources& core);

/// Array-sized stationary tile with the streamed dimension grown to fill SRAM.
TileConfig default_tiles(const GemmShape& shape, const CoreResources& core, Dataflow df);

enum class Placement { FullArray, SubCore0, SubCore1, Joint };
std::string_view to_string(Placement placement);

struct StepTiming {
    std::size_t step = 0;
    GemmShape shape;
    Dataflow dataflow = Dataflow::OS;
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    Placement placement = Placement::FullArray;
    std::vector<GemmShape> pieces;  // two halves for a joint step
    Cycles start = 0;
    Cycles finish = 0;
    Cycles cycles = 0;
    Cycles compute_cycles = 0;
    Cycles stall_cycles = 0;
};

struct LatencyReport {
    Cycles compute_cycles = 0;
    Cycles stall_cycles = 0;
    Cycles total_cycles = 0;
    Cycles prologue_cycles = 0;   // part of stall_cycles
    std::int64_t traffic_words = 0;
    std::int64_t macs = 0;
    std::vector<StepTiming> per_step;
};

/// Tiled GEMM with double buffering:
///   total = max(sum compute, sum transfer) + transfer of the first tile.
/// Throws InfeasibleConfig when the tiles overflow SRAM.
LatencyReport gemm_latency(const GemmShape& shape, const CoreResources& core, Dataflow df, const TileConfig& tiles);
LatencyReport gemm_latency(const GemmShape& shape, const CoreResources& core, Dataflow df);
LatencyReport gemm_latency(const GemmShape& shape, const HardwareConfig& hw, Dataflow df, const TileConfig& tiles);
LatencyReport gemm_latency(const GemmShape& shape, const HardwareConfig& hw, Dataflow df);

// =============================================================================
// Path model
// =============================================================================

/// Latency of a whole contraction path. Under 1x1 steps run back to back on
/// the full array; under a split partition they are list-scheduled on two
/// sub-cores, and a step without a concurrent partner runs on both halves.
/// compute/stall are those of the slots on the critical chain.
LatencyReport path_latency(const TensorNetwork& net, const ContractionPath& path, const HardwareConfig& hw,
                           Partition part, std::span<const Dataflow> dataflow_per_step);
LatencyReport path_latency(const TensorNetwork& net, const ContractionPath& path, const HardwareConfig& hw,
                           Partition part, Dataflow dataflow);

/// The GEMMs of a dense layer: forward only, or forward plus the data and
/// weight gradients.
std::vector<GemmShape> dense_layer_gemms(const LayerSpec& spec, bool training);

/// Dense baseline on the full array: linear (B, N, M), conv im2col
/// (C_out, C_in*Kh*Kw, L*B). TT specs are lowered to their dense equivalent.
LatencyReport dense_layer_latency(const LayerSpec& spec, const HardwareConfig& hw, Dataflow df, bool training = false);

}  // namespace ttdse
