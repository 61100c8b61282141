#include "ttdse/tensor_network.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <queue>
#include <set>

#include <fmt/format.h>

namespace ttdse {

std::int64_t TensorNode::element_count() const {
    std::int64_t count = 1;
    for (const auto& mode : modes) {
        count *= mode.size;
    }
    return count;
}

bool TensorNode::has_mode(ModeId mode) const {
    return std::any_of(modes.begin(), modes.end(), [&](const Mode& m) { return m.id == mode; });
}

// =============================================================================
// TensorNetwork
// =============================================================================

TensorNetwork::TensorNetwork(std::vector<TensorNode> nodes) : TensorNetwork(std::move(nodes), NodeId{0}) {}

TensorNetwork::TensorNetwork(std::vector<TensorNode> nodes, NodeId next_id_floor)
    : nodes_(std::move(nodes)), next_id_(std::max<std::int32_t>(next_id_floor.value, 0)) {
    for (const auto& node : nodes_) {
        next_id_ = std::max(next_id_, node.id.value + 1);
    }
}

const TensorNode* TensorNetwork::find(NodeId id) const {
    auto it = std::find_if(nodes_.begin(), nodes_.end(), [&](const TensorNode& n) { return n.id == id; });
    return it == nodes_.end() ? nullptr : &*it;
}

const TensorNode& TensorNetwork::node(NodeId id) const {
    const TensorNode* n = find(id);
    if (n == nullptr) {
        throw NetworkError(fmt::format("unknown node id {}", id.value));
    }
    return *n;
}

std::size_t TensorNetwork::index_of(NodeId id) const {
    return static_cast<std::size_t>(&node(id) - nodes_.data());
}

std::vector<Mode> TensorNetwork::free_modes() const {
    std::map<ModeId, int> occurrences;
    for (const auto& n : nodes_) {
        for (const auto& m : n.modes) {
            ++occurrences[m.id];
        }
    }
    std::vector<Mode> result;
    for (const auto& n : nodes_) {
        for (const auto& m : n.modes) {
            if (occurrences[m.id] == 1) {
                result.push_back(m);
            }
        }
    }
    return result;
}

std::vector<ModeId> TensorNetwork::shared_modes(NodeId a, NodeId b) const {
    const TensorNode& na = node(a);
    const TensorNode& nb = node(b);
    std::vector<ModeId> shared;
    for (const auto& m : na.modes) {
        if (nb.has_mode(m.id)) {
            shared.push_back(m.id);
        }
    }
    return shared;
}

bool TensorNetwork::adjacent(NodeId a, NodeId b) const {
    return a != b && !shared_modes(a, b).empty();
}

bool TensorNetwork::connected() const {
    if (nodes_.empty()) {
        return false;
    }
    std::vector<bool> seen(nodes_.size(), false);
    std::queue<std::size_t> frontier;
    frontier.push(0);
    seen[0] = true;
    std::size_t reached = 1;
    while (!frontier.empty()) {
        const std::size_t cur = frontier.front();
        frontier.pop();
        for (std::size_t j = 0; j < nodes_.size(); ++j) {
            if (!seen[j] && adjacent(nodes_[cur].id, nodes_[j].id)) {
                seen[j] = true;
                ++reached;
                frontier.push(j);
            }
        }
    }
    return reached == nodes_.size();
}

ModeId TensorNetwork::next_mode_id() const {
    std::int32_t next = 0;
    for (const auto& n : nodes_) {
        for (const auto& m : n.modes) {
            next = std::max(next, m.id.value + 1);
        }
    }
    return ModeId{next};
}

std::vector<NodeId> TensorNetwork::data_nodes() const {
    std::vector<NodeId> ids;
    for (const auto& n : nodes_) {
        if (n.role == NodeRole::Data) {
            ids.push_back(n.id);
        }
    }
    return ids;
}

// =============================================================================
// Layer specifications
// =============================================================================

std::string_view to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::TtLinear: return "tt-linear";
        case LayerKind::TtConv: return "tt-conv";
        case LayerKind::DenseLinear: return "dense-linear";
        case LayerKind::DenseConv: return "dense-conv";
    }
    return "unknown";
}

namespace {

void require_positive(std::int64_t value, const LayerSpec& spec, std::string_view what) {
    if (value < 1) {
        throw SpecError(fmt::format("layer '{}': {} must be >= 1 (got {})", spec.name, what, value));
    }
}

struct SpecValidator {
    const LayerSpec& spec;

    void operator()(const TtLinearShape& s) const {
        const std::size_t d = s.out_factors.size();
        if (d == 0) {
            throw SpecError(fmt::format("layer '{}': tt-linear needs at least one factor", spec.name));
        }
        if (s.in_factors.size() != d) {
            throw SpecError(fmt::format("layer '{}': {} output factors but {} input factors", spec.name, d,
                                        s.in_factors.size()));
        }
        if (s.ranks.size() != 2 * d + 1) {
            throw SpecError(fmt::format("layer '{}': expected {} ranks r_0..r_{} (got {})", spec.name, 2 * d + 1,
                                        2 * d, s.ranks.size()));
        }
        if (s.ranks.front() != 1 || s.ranks.back() != 1) {
            throw SpecError(fmt::format("layer '{}': boundary ranks must be 1 (got r_0={}, r_{}={})", spec.name,
                                        s.ranks.front(), 2 * d, s.ranks.back()));
        }
        for (std::size_t i = 0; i < d; ++i) {
            require_positive(s.out_factors[i], spec, fmt::format("m_{}", i + 1));
            require_positive(s.in_factors[i], spec, fmt::format("n_{}", i + 1));
        }
        for (std::size_t i = 0; i < s.ranks.size(); ++i) {
            require_positive(s.ranks[i], spec, fmt::format("r_{}", i));
        }
    }

    void operator()(const TtConvShape& s) const {
        require_positive(s.out1, spec, "O1");
        require_positive(s.out2, spec, "O2");
        require_positive(s.in1, spec, "I1");
        require_positive(s.in2, spec, "I2");
        require_positive(s.kernel_h, spec, "Kh");
        require_positive(s.kernel_w, spec, "Kw");
        require_positive(s.patches, spec, "L");
        if (s.ranks.size() != 4) {
            throw SpecError(fmt::format("layer '{}': tt-conv expects 4 ranks r_1..r_4 (got {})", spec.name,
                                        s.ranks.size()));
        }
        for (std::size_t i = 0; i < 4; ++i) {
            require_positive(s.ranks[i], spec, fmt::format("r_{}", i + 1));
        }
    }

    void operator()(const DenseLinearShape& s) const {
        require_positive(s.out_features, spec, "out_features");
        require_positive(s.in_features, spec, "in_features");
    }

    void operator()(const DenseConvShape& s) const {
        require_positive(s.out_channels, spec, "out_channels");
        require_positive(s.in_channels, spec, "in_channels");
        require_positive(s.kernel_h, spec, "Kh");
        require_positive(s.kernel_w, spec, "Kw");
        require_positive(s.patches, spec, "L");
    }
};

std::int64_t product(const std::vector<std::int64_t>& values) {
    return std::accumulate(values.begin(), values.end(), std::int64_t{1}, std::multiplies<>());
}

// Sequential mode id allocation for the builders.
class ModeAllocator {
public:
    Mode make(std::int64_t size, ModeKind kind) { return Mode{ModeId{next_++}, size, kind}; }

private:
    std::int32_t next_ = 0;
};

TensorNode make_core(int index, std::vector<Mode> modes) {
    TensorNode node;
    node.id = NodeId{index - 1};
    node.modes = std::move(modes);
    node.role = NodeRole::Core;
    node.core_index = index;
    node.label = fmt::format("G{}", index);
    return node;
}

TensorNode make_data(std::int32_t id, std::vector<Mode> modes, std::string label) {
    TensorNode node;
    node.id = NodeId{id};
    node.modes = std::move(modes);
    node.role = NodeRole::Data;
    node.label = std::move(label);
    return node;
}

}  // namespace

void validate_spec(const LayerSpec& spec) {
    require_positive(spec.batch, spec, "batch");
    std::visit(SpecValidator{spec}, spec.shape);
}

LayerSpec dense_equivalent(const LayerSpec& spec) {
    LayerSpec dense;
    dense.name = spec.name;
    dense.batch = spec.batch;
    if (const auto* s = std::get_if<TtLinearShape>(&spec.shape)) {
        dense.shape = DenseLinearShape{product(s->out_factors), product(s->in_factors)};
    } else if (const auto* c = std::get_if<TtConvShape>(&spec.shape)) {
        dense.shape = DenseConvShape{c->out1 * c->out2, c->in1 * c->in2, c->kernel_h, c->kernel_w, c->patches};
    } else {
        dense.shape = spec.shape;
    }
    return dense;
}

// =============================================================================
// Builders
// =============================================================================

TensorNetwork build_tt_linear(const LayerSpec& spec) {
    const auto* s = std::get_if<TtLinearShape>(&spec.shape);
    if (s == nullptr) {
        throw SpecError(fmt::format("layer '{}': build_tt_linear needs a tt-linear spec", spec.name));
    }
    validate_spec(spec);

    const std::size_t d = s->out_factors.size();
    ModeAllocator alloc;
    std::vector<Mode> out_modes;
    std::vector<Mode> in_modes;
    for (std::size_t i = 0; i < d; ++i) {
        out_modes.push_back(alloc.make(s->out_factors[i], ModeKind::OutputFeature));
    }
    for (std::size_t i = 0; i < d; ++i) {
        in_modes.push_back(alloc.make(s->in_factors[i], ModeKind::InputFeature));
    }
    // rank_modes[k] links G_k and G_{k+1}; boundaries are not materialized.
    std::vector<Mode> rank_modes(2 * d + 1);
    for (std::size_t k = 1; k < 2 * d; ++k) {
        rank_modes[k] = alloc.make(s->ranks[k], ModeKind::Rank);
    }

    std::vector<TensorNode> nodes;
    for (std::size_t k = 1; k <= 2 * d; ++k) {
        std::vector<Mode> modes;
        if (k > 1) {
            modes.push_back(rank_modes[k - 1]);
        }
        modes.push_back(k <= d ? out_modes[k - 1] : in_modes[k - d - 1]);
        if (k < 2 * d) {
            modes.push_back(rank_modes[k]);
        }
        nodes.push_back(make_core(static_cast<int>(k), std::move(modes)));
    }

    std::vector<Mode> data_modes;
    if (spec.batch > 1) {
        data_modes.push_back(alloc.make(spec.batch, ModeKind::Batch));
    }
    data_modes.insert(data_modes.end(), in_modes.begin(), in_modes.end());
    nodes.push_back(make_data(static_cast<std::int32_t>(2 * d), std::move(data_modes), "X"));
    return TensorNetwork(std::move(nodes));
}

TensorNetwork build_tt_conv(const LayerSpec& spec) {
    const auto* s = std::get_if<TtConvShape>(&spec.shape);
    if (s == nullptr) {
        throw SpecError(fmt::format("layer '{}': build_tt_conv needs a tt-conv spec", spec.name));
    }
    validate_spec(spec);

    ModeAllocator alloc;
    const Mode o1 = alloc.make(s->out1, ModeKind::OutputFeature);
    const Mode o2 = alloc.make(s->out2, ModeKind::OutputFeature);
    const Mode i1 = alloc.make(s->in1, ModeKind::InputFeature);
    const Mode i2 = alloc.make(s->in2, ModeKind::InputFeature);
    const Mode kernel = alloc.make(s->kernel_h * s->kernel_w, ModeKind::Kernel);
    const Mode r1 = alloc.make(s->ranks[0], ModeKind::Rank);
    const Mode r2 = alloc.make(s->ranks[1], ModeKind::Rank);
    const Mode r3 = alloc.make(s->ranks[2], ModeKind::Rank);
    const Mode r4 = alloc.make(s->ranks[3], ModeKind::Rank);
    const Mode patches = alloc.make(s->patches * spec.batch, ModeKind::SpatialPatch);

    std::vector<TensorNode> nodes;
    nodes.push_back(make_core(1, {o1, r1}));
    nodes.push_back(make_core(2, {r1, o2, r2}));
    nodes.push_back(make_core(3, {r2, i1, r3}));
    nodes.push_back(make_core(4, {r3, i2, r4}));
    nodes.push_back(make_core(5, {r4, kernel}));
    nodes.push_back(make_data(5, {i1, i2, kernel, patches}, "X"));
    return TensorNetwork(std::move(nodes));
}

TensorNetwork build_dense(const LayerSpec& spec) {
    validate_spec(spec);
    ModeAllocator alloc;
    TensorNode weight;
    weight.id = NodeId{0};
    weight.role = NodeRole::Core;
    weight.core_index = 1;
    weight.label = "W";

    if (const auto* s = std::get_if<DenseLinearShape>(&spec.shape)) {
        const Mode out = alloc.make(s->out_features, ModeKind::OutputFeature);
        const Mode in = alloc.make(s->in_features, ModeKind::InputFeature);
        weight.modes = {out, in};
        std::vector<Mode> data_modes;
        if (spec.batch > 1) {
            data_modes.push_back(alloc.make(spec.batch, ModeKind::Batch));
        }
        data_modes.push_back(in);
        return TensorNetwork({weight, make_data(1, std::move(data_modes), "X")});
    }
    if (const auto* c = std::get_if<DenseConvShape>(&spec.shape)) {
        const Mode out = alloc.make(c->out_channels, ModeKind::OutputFeature);
        const Mode in = alloc.make(c->in_channels, ModeKind::InputFeature);
        const Mode kernel = alloc.make(c->kernel_h * c->kernel_w, ModeKind::Kernel);
        const Mode patches = alloc.make(c->patches * spec.batch, ModeKind::SpatialPatch);
        weight.modes = {out, in, kernel};
        return TensorNetwork({weight, make_data(1, {in, kernel, patches}, "X")});
    }
    throw SpecError(fmt::format("layer '{}': build_dense needs a dense spec", spec.name));
}

TensorNetwork build_network(const LayerSpec& spec) {
    switch (spec.kind()) {
        case LayerKind::TtLinear: return build_tt_linear(spec);
        case LayerKind::TtConv: return build_tt_conv(spec);
        case LayerKind::DenseLinear:
        case LayerKind::DenseConv: return build_dense(spec);
    }
    throw SpecError("unknown layer kind");
}

// =============================================================================
// Validation
// =============================================================================

std::vector<Violation> validate_network(const TensorNetwork& net) {
    std::vector<Violation> violations;
    if (net.size() == 0) {
        violations.push_back({ViolationKind::EmptyNetwork, "network has no nodes"});
        return violations;
    }

    struct Occurrence {
        std::vector<NodeId> nodes;
        std::vector<std::int64_t> sizes;
    };
    std::map<ModeId, Occurrence> occurrences;
    for (const auto& n : net.nodes()) {
        if (n.modes.empty() && net.size() > 1) {  // a lone scalar is a finished contraction
            violations.push_back({ViolationKind::EmptyNode, fmt::format("node {} has no modes", n.id.value)});
        }
        std::set<ModeId> local;
        for (const auto& m : n.modes) {
            if (m.size < 1) {
                violations.push_back({ViolationKind::InvalidSize,
                                      fmt::format("mode {} on node {} has size {}", m.id.value, n.id.value, m.size)});
            }
            if (!local.insert(m.id).second) {
                violations.push_back({ViolationKind::DuplicateMode,
                                      fmt::format("mode {} repeated on node {}", m.id.value, n.id.value)});
                continue;
            }
            occurrences[m.id].nodes.push_back(n.id);
            occurrences[m.id].sizes.push_back(m.size);
        }
    }
    for (const auto& [id, occ] : occurrences) {
        if (occ.nodes.size() > 2) {
            violations.push_back({ViolationKind::Hyperedge,
                                  fmt::format("hyperedge unsupported: mode {} appears on {} nodes", id.value,
                                              occ.nodes.size())});
        } else if (occ.nodes.size() == 2 && occ.sizes[0] != occ.sizes[1]) {
            violations.push_back({ViolationKind::SizeMismatch,
                                  fmt::format("size mismatch: mode {} is {} on node {} but {} on node {}", id.value,
                                              occ.sizes[0], occ.nodes[0].value, occ.sizes[1], occ.nodes[1].value)});
        }
    }
    if (!net.connected()) {
        violations.push_back({ViolationKind::Disconnected, "network is disconnected"});
    }
    return violations;
}

// =============================================================================
// Contraction
// =============================================================================

GemmShape contraction_shape(const TensorNetwork& net, NodeId a, NodeId b) {
    if (a == b) {
        throw NetworkError(fmt::format("cannot contract node {} with itself", a.value));
    }
    const TensorNode& na = net.node(a);
    const TensorNode& nb = net.node(b);
    GemmShape shape;
    bool any_shared = false;
    for (const auto& m : na.modes) {
        if (nb.has_mode(m.id)) {
            shape.k *= m.size;
            any_shared = true;
        } else {
            shape.m *= m.size;
        }
    }
    if (!any_shared) {
        throw NetworkError(
            fmt::format("nodes {} and {} share no mode; outer products are not contractions", a.value, b.value));
    }
    for (const auto& m : nb.modes) {
        if (!na.has_mode(m.id)) {
            shape.n *= m.size;
        }
    }
    return shape;
}

Contraction contract_pair(const TensorNetwork& net, NodeId a, NodeId b) {
    const GemmShape shape = contraction_shape(net, a, b);
    const TensorNode& na = net.node(a);
    const TensorNode& nb = net.node(b);

    TensorNode merged;
    merged.id = net.next_node_id();
    for (const auto& m : na.modes) {
        if (!nb.has_mode(m.id)) {
            merged.modes.push_back(m);
        }
    }
    for (const auto& m : nb.modes) {
        if (!na.has_mode(m.id)) {
            merged.modes.push_back(m);
        }
    }
    if (na.role == NodeRole::Data || nb.role == NodeRole::Data) {
        merged.role = NodeRole::Data;
    } else if (na.is_data() || nb.is_data()) {
        merged.role = NodeRole::GradientData;
    } else {
        merged.role = NodeRole::Core;
    }
    merged.label = fmt::format("({}*{})", na.label, nb.label);

    std::vector<TensorNode> nodes;
    nodes.reserve(net.size() - 1);
    for (const auto& n : net.nodes()) {
        if (n.id != a && n.id != b) {
            nodes.push_back(n);
        }
    }
    nodes.push_back(std::move(merged));

    Contraction result;
    result.result = net.next_node_id();
    result.network = TensorNetwork(std::move(nodes), NodeId{net.next_node_id().value + 1});
    result.shape = shape;
    result.macs = shape.macs();
    return result;
}

// =============================================================================
// Gradients
// =============================================================================

std::vector<GradientNetwork> gradient_networks(const TensorNetwork& net) {
    const auto data = net.data_nodes();
    if (data.empty()) {
        throw NetworkError("gradient networks need a data node");
    }
    if (data.size() > 1) {
        throw NetworkError(fmt::format("gradient networks need exactly one data node (found {})", data.size()));
    }
    const NodeId data_id = data.front();

    TensorNode grad;
    grad.id = net.next_node_id();
    grad.modes = net.free_modes();
    grad.role = NodeRole::GradientData;
    grad.label = "dY";

    std::vector<GradientNetwork> result;
    for (const auto& target : net.nodes()) {
        if (target.role != NodeRole::Core) {
            continue;
        }
        std::vector<TensorNode> nodes;
        for (const auto& n : net.nodes()) {
            if (n.id != target.id) {
                nodes.push_back(n);
            }
        }
        nodes.push_back(grad);
        TensorNetwork candidate(nodes, NodeId{grad.id.value + 1});
        if (!candidate.connected() && !candidate.adjacent(data_id, grad.id)) {
            // Without a batch mode, X and dY only meet through an outer product;
            // a size-1 link mode expresses it as a k = 1 contraction.
            const Mode link{net.next_mode_id(), 1, ModeKind::Batch};
            for (auto& n : nodes) {
                if (n.id == data_id || n.id == grad.id) {
                    n.modes.push_back(link);
                }
            }
            candidate = TensorNetwork(std::move(nodes), NodeId{grad.id.value + 1});
        }
        if (!candidate.connected()) {
            throw NetworkError(fmt::format("gradient network for node {} is disconnected", target.id.value));
        }
        result.push_back({target.id, std::move(candidate)});
    }

    std::vector<TensorNode> nodes;
    for (const auto& n : net.nodes()) {
        if (n.id != data_id) {
            nodes.push_back(n);
        }
    }
    nodes.push_back(grad);
    TensorNetwork data_grad(std::move(nodes), NodeId{grad.id.value + 1});
    if (!data_grad.connected()) {
        throw NetworkError("data gradient network is disconnected");
    }
    result.push_back({data_id, std::move(data_grad)});
    return result;
}

// =============================================================================
// Parameter counts
// =============================================================================

std::int64_t param_count(const TensorNetwork& net) {
    std::int64_t total = 0;
    for (const auto& n : net.nodes()) {
        if (n.role == NodeRole::Core) {
            total += n.element_count();
        }
    }
    return total;
}

std::int64_t dense_param_count(const LayerSpec& spec) {
    const LayerSpec dense = dense_equivalent(spec);
    if (const auto* s = std::get_if<DenseLinearShape>(&dense.shape)) {
        return s->out_features * s->in_features;
    }
    const auto& c = std::get<DenseConvShape>(dense.shape);
    return c.out_channels * c.in_channels * c.kernel_h * c.kernel_w;
}

double compression_ratio(const LayerSpec& spec) {
    return static_cast<double>(dense_param_count(spec)) / static_cast<double>(param_count(build_network(spec)));
}

}  // namespace ttdse
