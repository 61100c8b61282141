#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ttdse/errors.hpp"

namespace ttdse {

// =============================================================================
// Identifiers
// =============================================================================

template <typename Tag>
struct StrongId {
    std::int32_t value = -1;

    constexpr auto operator<=>(const StrongId&) const = default;
};

using ModeId = StrongId<struct ModeIdTag>;
using NodeId = StrongId<struct NodeIdTag>;

// =============================================================================
// Tensors
// =============================================================================

enum class ModeKind { Rank, InputFeature, OutputFeature, Batch, SpatialPatch, Kernel };

struct Mode {
    ModeId id;
    std::int64_t size = 1;
    ModeKind kind = ModeKind::Rank;

    bool operator==(const Mode&) const = default;
};

enum class NodeRole { Core, Data, GradientData };

struct TensorNode {
    NodeId id;
    std::vector<Mode> modes;
    NodeRole role = NodeRole::Core;
    std::optional<int> core_index;  // k of G_k, 1-based
    std::string label;

    std::int64_t element_count() const;
    bool has_mode(ModeId mode) const;
    bool is_data() const { return role != NodeRole::Core; }
};

/// (M, K, N) lowering of one pairwise contraction: an M x K operand times a
/// K x N operand.
struct GemmShape {
    std::int64_t m = 1;
    std::int64_t k = 1;
    std::int64_t n = 1;

    std::int64_t macs() const { return m * k * n; }
    auto operator<=>(const GemmShape&) const = default;
};

/// Nodes connected by shared modes. A mode id carried by two nodes is a
/// contracted edge; a mode id carried by one node is a free edge.
///
/// Networks are values: every transformation returns a new network.
class TensorNetwork {
public:
    TensorNetwork() = default;
    explicit TensorNetwork(std::vector<TensorNode> nodes);
    /// Fresh result ids start at max(next_id_floor, max node id + 1).
    TensorNetwork(std::vector<TensorNode> nodes, NodeId next_id_floor);

    const std::vector<TensorNode>& nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }

    const TensorNode* find(NodeId id) const;
    const TensorNode& node(NodeId id) const;  // throws NetworkError
    std::size_t index_of(NodeId id) const;    // throws NetworkError

    /// Modes carried by exactly one node, in node order then mode order.
    std::vector<Mode> free_modes() const;
    /// Mode ids carried by both a and b, in a's mode order.
    std::vector<ModeId> shared_modes(NodeId a, NodeId b) const;
    bool adjacent(NodeId a, NodeId b) const;
    bool connected() const;

    /// Identifier that the next contraction result will receive.
    NodeId next_node_id() const { return NodeId{next_id_}; }
    ModeId next_mode_id() const;

    std::vector<NodeId> data_nodes() const;

private:
    std::vector<TensorNode> nodes_;
    std::int32_t next_id_ = 0;
};

// =============================================================================
// Layer specifications
// =============================================================================

enum class LayerKind { TtLinear, TtConv, DenseLinear, DenseConv };

struct TtLinearShape {
    std::vector<std::int64_t> out_factors;  // m_1..m_d
    std::vector<std::int64_t> in_factors;   // n_1..n_d
    std::vector<std::int64_t> ranks;        // r_0..r_2d

    bool operator==(const TtLinearShape&) const = default;
};

struct TtConvShape {
    std::int64_t out1 = 1, out2 = 1;  // C_out = out1 * out2
    std::int64_t in1 = 1, in2 = 1;    // C_in = in1 * in2
    std::int64_t kernel_h = 1, kernel_w = 1;
    std::vector<std::int64_t> ranks;  // r_1..r_4
    std::int64_t patches = 1;         // L

    bool operator==(const TtConvShape&) const = default;
};

struct DenseLinearShape {
    std::int64_t out_features = 1;  // M
    std::int64_t in_features = 1;   // N

    bool operator==(const DenseLinearShape&) const = default;
};

struct DenseConvShape {
    std::int64_t out_channels = 1;
    std::int64_t in_channels = 1;
    std::int64_t kernel_h = 1, kernel_w = 1;
    std::int64_t patches = 1;

    bool operator==(const DenseConvShape&) const = default;
};

struct LayerSpec {
    std::string name;
    std::variant<TtLinearShape, TtConvShape, DenseLinearShape, DenseConvShape> shape;
    std::int64_t batch = 1;  // tokens x batch for transformer layers

    LayerKind kind() const { return static_cast<LayerKind>(shape.index()); }
    bool operator==(const LayerSpec&) const = default;
};

std::string_view to_string(LayerKind kind);

/// Throws SpecError describing the first violated constraint.
void validate_spec(const LayerSpec& spec);

/// The uncompressed layer a TT layer replaces (identity for dense layers).
LayerSpec dense_equivalent(const LayerSpec& spec);

// =============================================================================
// Operations
// =============================================================================

/// Cores G_1..G_2d (boundary ranks omitted) plus data node X(batch, n_1..n_d).
/// The batch mode is only materialized when batch > 1.
TensorNetwork build_tt_linear(const LayerSpec& spec);

/// Cores G_1(O1,r1) .. G_5(r4,K) plus the unfolded input X(I1, I2, K, L*B).
TensorNetwork build_tt_conv(const LayerSpec& spec);

/// Two-node network (weight, data) for a dense layer.
TensorNetwork build_dense(const LayerSpec& spec);

/// Dispatches on spec.kind().
TensorNetwork build_network(const LayerSpec& spec);

enum class ViolationKind { EmptyNetwork, EmptyNode, InvalidSize, DuplicateMode, Hyperedge, SizeMismatch, Disconnected };

struct Violation {
    ViolationKind kind;
    std::string message;
};

/// Every invariant violation in the network; empty means valid.
std::vector<Violation> validate_network(const TensorNetwork& net);

struct Contraction {
    TensorNetwork network;
    NodeId result;
    GemmShape shape;
    std::int64_t macs = 0;
};

/// GEMM lowering of contracting a with b, without building the result.
GemmShape contraction_shape(const TensorNetwork& net, NodeId a, NodeId b);

/// Replaces a and b by one node carrying (modes only on a) ++ (modes only on b).
/// m = prod(a-only), k = prod(shared), n = prod(b-only).
Contraction contract_pair(const TensorNetwork& net, NodeId a, NodeId b);

struct GradientNetwork {
    NodeId target;
    TensorNetwork network;
};

/// One network per core (the core removed, a gradient node dY over the forward
/// free modes attached) followed by one for the data node.
std::vector<GradientNetwork> gradient_networks(const TensorNetwork& net);

std::int64_t param_count(const TensorNetwork& net);
std::int64_t dense_param_count(const LayerSpec& spec);
double compression_ratio(const LayerSpec& spec);

}  // namespace ttdse
