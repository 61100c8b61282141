#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ttdse/tensor_network.hpp"

namespace ttdse {

struct ContractionStep {
    NodeId left;
    NodeId right;
    NodeId result;
    GemmShape shape;
    std::int64_t macs = 0;

    bool operator==(const ContractionStep&) const = default;
};

/// A binary contraction tree, stored as one valid step ordering.
struct ContractionPath {
    std::vector<ContractionStep> steps;
    std::int64_t total_mac = 0;
    /// (i, j): step j consumes the result of step i.
    std::vector<std::pair<std::size_t, std::size_t>> dag;
    /// Canonical form of the unordered tree: "(a,b)" with children sorted.
    std::string encoding;

    bool operator==(const ContractionPath&) const = default;
};

/// Replays the given pair order with contract_pair. Operands are oriented so
/// that the side holding activation data is the streamed M x K operand; the
/// lexicographically smaller canonical encoding breaks remaining ties.
ContractionPath make_path(const TensorNetwork& net, const std::vector<std::pair<NodeId, NodeId>>& order);

struct EnumerationOptions {
    std::size_t max_nodes = 8;
};

/// Exhaustive oracle: every distinct contraction tree over adjacent pairs,
/// ascending by (total_mac, encoding). Throws SearchLimitError above max_nodes.
std::vector<ContractionPath> enumerate_all_paths(const TensorNetwork& net, const EnumerationOptions& options = {});

struct PathSearchOptions {
    bool branch_and_bound = true;
};

inline constexpr std::size_t kDefaultTopK = 5;

/// The K lowest-MAC distinct trees, ascending by (total_mac, encoding).
std::vector<ContractionPath> topk_mac_paths(const TensorNetwork& net, std::size_t k,
                                            const PathSearchOptions& options = {});

/// Cores multiplied in index order (rebuilding the weight), then applied to the
/// data node.
ContractionPath reconstruction_path(const TensorNetwork& net);

struct StepDag {
    std::vector<std::vector<std::size_t>> predecessors;
    std::vector<std::vector<std::size_t>> successors;
    /// Steps with no ancestor/descendant relation to step i.
    std::vector<std::vector<std::size_t>> concurrent;
    std::size_t edge_count = 0;
};

StepDag dependency_dag(const ContractionPath& path);

/// One line per step: "(G1*G2) x X -> [m,k,n] mac".
std::vector<std::string> describe_steps(const TensorNetwork& net, const ContractionPath& path);

}  // namespace ttdse
