#include "ttdse/path_search.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <optional>

#include <fmt/format.h>

namespace ttdse {

namespace {

void require_valid(const TensorNetwork& net) {
    const auto violations = validate_network(net);
    if (!violations.empty()) {
        throw NetworkError("invalid network: " + violations.front().message);
    }
}

std::string join_encoding(const std::string& a, const std::string& b) {
    return a < b ? "(" + a + "," + b + ")" : "(" + b + "," + a + ")";
}

}  // namespace

// =============================================================================
// Path materialization
// =============================================================================

ContractionPath make_path(const TensorNetwork& net, const std::vector<std::pair<NodeId, NodeId>>& order) {
    ContractionPath path;
    TensorNetwork current = net;
    std::map<NodeId, std::string> encoding;
    std::map<NodeId, std::size_t> producer;
    for (const auto& n : net.nodes()) {
        encoding[n.id] = std::to_string(n.id.value);
    }

    for (std::size_t i = 0; i < order.size(); ++i) {
        NodeId left = order[i].first;
        NodeId right = order[i].second;
        const bool left_data = current.node(left).is_data();
        const bool right_data = current.node(right).is_data();
        if (left_data != right_data ? right_data : encoding.at(right) < encoding.at(left)) {
            std::swap(left, right);
        }

        Contraction c = contract_pair(current, left, right);
        path.steps.push_back({left, right, c.result, c.shape, c.macs});
        path.total_mac += c.macs;
        for (NodeId operand : {left, right}) {
            if (auto it = producer.find(operand); it != producer.end()) {
                path.dag.emplace_back(it->second, i);
            }
        }
        producer[c.result] = i;
        encoding[c.result] = join_encoding(encoding.at(left), encoding.at(right));
        current = std::move(c.network);
    }

    if (current.size() != 1) {
        throw NetworkError(fmt::format("path leaves {} nodes uncontracted", current.size()));
    }
    path.encoding = encoding.at(current.nodes().front().id);
    return path;
}

// =============================================================================
// Exhaustive oracle
// =============================================================================
//
// Works on leaf subsets only: a subtree is identified by the bitmask of leaves
// it covers, its open modes are the modes with exactly one endpoint inside,
// and merging S1 with S2 costs the product of every mode open in either.

namespace {

using Mask = std::uint64_t;

class SubsetOracle {
public:
    explicit SubsetOracle(const TensorNetwork& net) {
        std::map<ModeId, std::size_t> slot;
        for (std::size_t i = 0; i < net.size(); ++i) {
            for (const auto& m : net.nodes()[i].modes) {
                auto [it, inserted] = slot.emplace(m.id, modes_.size());
                if (inserted) {
                    modes_.push_back({m.size, Mask{1} << i});
                } else {
                    modes_[it->second].endpoints |= Mask{1} << i;
                }
            }
        }
    }

    struct Tree {
        std::int64_t mac = 0;
        std::vector<std::pair<Mask, Mask>> merges;  // post-order
    };

    const std::vector<Tree>& trees(Mask set) {
        if (auto it = memo_.find(set); it != memo_.end()) {
            return it->second;
        }
        std::vector<Tree> result;
        if (std::popcount(set) == 1) {
            result.push_back(Tree{});
        } else {
            const Mask lowest = set & (~set + 1);
            const Mask rest = set & ~lowest;
            // Proper subsets of `set` containing the lowest leaf.
            for (Mask sub = rest;; sub = (sub - 1) & rest) {
                const Mask first = lowest | sub;
                const Mask second = set & ~first;
                if (second != 0 && connected(first) && connected(second) && touching(first, second)) {
                    const std::int64_t cost = merge_cost(first, second);
                    const auto& left = trees(first);
                    const auto& right = trees(second);
                    for (const auto& l : left) {
                        for (const auto& r : right) {
                            Tree t;
                            t.mac = l.mac + r.mac + cost;
                            t.merges.reserve(l.merges.size() + r.merges.size() + 1);
                            t.merges.insert(t.merges.end(), l.merges.begin(), l.merges.end());
                            t.merges.insert(t.merges.end(), r.merges.begin(), r.merges.end());
                            t.merges.emplace_back(first, second);
                            result.push_back(std::move(t));
                        }
                    }
                }
                if (sub == 0) {
                    break;
                }
            }
        }
        return memo_.emplace(set, std::move(result)).first->second;
    }

private:
    struct ModeInfo {
        std::int64_t size;
        Mask endpoints;
    };

    bool open_in(const ModeInfo& mode, Mask set) const { return std::popcount(mode.endpoints & set) == 1; }

    std::int64_t merge_cost(Mask a, Mask b) const {
        std::int64_t cost = 1;
        for (const auto& mode : modes_) {
            if (open_in(mode, a) || open_in(mode, b)) {
                cost *= mode.size;
            }
        }
        return cost;
    }

    bool touching(Mask a, Mask b) const {
        return std::any_of(modes_.begin(), modes_.end(),
                           [&](const ModeInfo& m) { return (m.endpoints & a) != 0 && (m.endpoints & b) != 0; });
    }

    bool connected(Mask set) const {
        Mask reached = set & (~set + 1);
        for (bool grew = true; grew;) {
            grew = false;
            for (const auto& m : modes_) {
                const Mask inside = m.endpoints & set;
                if ((inside & reached) != 0 && (inside & ~reached) != 0) {
                    reached |= inside;
                    grew = true;
                }
            }
        }
        return reached == set;
    }

    std::vector<ModeInfo> modes_;
    std::map<Mask, std::vector<Tree>> memo_;
};

bool path_less(const ContractionPath& a, const ContractionPath& b) {
    return a.total_mac != b.total_mac ? a.total_mac < b.total_mac : a.encoding < b.encoding;
}

}  // namespace

std::vector<ContractionPath> enumerate_all_paths(const TensorNetwork& net, const EnumerationOptions& options) {
    if (net.size() > options.max_nodes || net.size() > 64) {
        throw SearchLimitError(fmt::format("exhaustive enumeration limited to {} nodes (network has {})",
                                           options.max_nodes, net.size()));
    }
    require_valid(net);

    SubsetOracle oracle(net);
    const Mask all = net.size() == 64 ? ~Mask{0} : (Mask{1} << net.size()) - 1;
    const auto& trees = oracle.trees(all);

    std::vector<ContractionPath> paths;
    paths.reserve(trees.size());
    for (const auto& tree : trees) {
        std::map<Mask, NodeId> ids;
        for (std::size_t i = 0; i < net.size(); ++i) {
            ids[Mask{1} << i] = net.nodes()[i].id;
        }
        std::int32_t next = net.next_node_id().value;
        std::vector<std::pair<NodeId, NodeId>> order;
        for (const auto& [a, b] : tree.merges) {
            order.emplace_back(ids.at(a), ids.at(b));
            ids[a | b] = NodeId{next++};
        }
        ContractionPath path = make_path(net, order);
        path.total_mac = tree.mac;
        paths.push_back(std::move(path));
    }
    std::sort(paths.begin(), paths.end(), path_less);
    return paths;
}

// =============================================================================
// MAC-guided DFS
// =============================================================================
//
// Two rules remove equivalent orderings of the same tree:
//  * consecutive independent steps must produce ascending leaf masks, which
//    keeps the greedy (smallest-mask-first) ordering of every tree;
//  * completed trees are deduplicated by canonical encoding.
// Branches whose accumulated MAC exceeds the current K-th best are cut.

namespace {

struct NodeInfo {
    Mask leaves = 0;
    std::string encoding;
};

class TopKSearch {
public:
    TopKSearch(const TensorNetwork& net, std::size_t k, const PathSearchOptions& options)
        : root_(net), k_(k), options_(options) {}

    std::vector<ContractionPath> run() {
        std::map<NodeId, NodeInfo> info;
        for (std::size_t i = 0; i < root_.size(); ++i) {
            const auto& n = root_.nodes()[i];
            info[n.id] = NodeInfo{Mask{1} << i, std::to_string(n.id.value)};
        }
        std::vector<std::pair<NodeId, NodeId>> order;
        visit(root_, info, order, 0, std::nullopt, 0);

        std::vector<ContractionPath> paths;
        for (const auto& entry : best_) {
            ContractionPath path = make_path(root_, entry.order);
            paths.push_back(std::move(path));
        }
        return paths;
    }

private:
    struct Entry {
        std::int64_t mac;
        std::string encoding;
        std::vector<std::pair<NodeId, NodeId>> order;
    };

    struct Candidate {
        NodeId a, b;
        std::int64_t macs;
        Mask leaves;
    };

    bool bound_exceeded(std::int64_t mac) const {
        return options_.branch_and_bound && best_.size() == k_ && mac > best_.back().mac;
    }

    void record(std::int64_t mac, const std::string& encoding, const std::vector<std::pair<NodeId, NodeId>>& order) {
        for (const auto& e : best_) {
            if (e.encoding == encoding) {
                return;
            }
        }
        auto pos = std::find_if(best_.begin(), best_.end(), [&](const Entry& e) {
            return mac != e.mac ? mac < e.mac : encoding < e.encoding;
        });
        if (pos == best_.end() && best_.size() == k_) {
            return;
        }
        best_.insert(pos, Entry{mac, encoding, order});
        if (best_.size() > k_) {
            best_.pop_back();
        }
    }

    void visit(const TensorNetwork& net, std::map<NodeId, NodeInfo>& info, std::vector<std::pair<NodeId, NodeId>>& order,
               std::int64_t acc, std::optional<NodeId> last_result, Mask last_leaves) {
        if (net.size() == 1) {
            record(acc, info.at(net.nodes().front().id).encoding, order);
            return;
        }
        if (bound_exceeded(acc)) {
            return;
        }

        std::vector<Candidate> candidates;
        const auto& nodes = net.nodes();
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            for (std::size_t j = i + 1; j < nodes.size(); ++j) {
                if (!net.adjacent(nodes[i].id, nodes[j].id)) {
                    continue;
                }
                const Mask leaves = info.at(nodes[i].id).leaves | info.at(nodes[j].id).leaves;
                const bool dependent = last_result && (nodes[i].id == *last_result || nodes[j].id == *last_result);
                if (last_result && !dependent && leaves < last_leaves) {
                    continue;
                }
                const std::int64_t macs = contraction_shape(net, nodes[i].id, nodes[j].id).macs();
                candidates.push_back({nodes[i].id, nodes[j].id, macs, leaves});
            }
        }
        std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
            return x.macs != y.macs ? x.macs < y.macs : x.leaves < y.leaves;
        });

        for (const auto& c : candidates) {
            if (bound_exceeded(acc + c.macs)) {
                break;  // candidates are MAC-ascending
            }
            Contraction next = contract_pair(net, c.a, c.b);
            info[next.result] = NodeInfo{c.leaves, join_encoding(info.at(c.a).encoding, info.at(c.b).encoding)};
            order.emplace_back(c.a, c.b);
            visit(next.network, info, order, acc + c.macs, next.result, c.leaves);
            order.pop_back();
            info.erase(next.result);
        }
    }

    const TensorNetwork& root_;
    std::size_t k_;
    PathSearchOptions options_;
    std::vector<Entry> best_;
};

}  // namespace

std::vector<ContractionPath> topk_mac_paths(const TensorNetwork& net, std::size_t k, const PathSearchOptions& options) {
    if (k == 0) {
        throw Error("top-K path search needs K >= 1");
    }
    if (net.size() > 64) {
        throw SearchLimitError("path search supports at most 64 nodes");
    }
    require_valid(net);
    return TopKSearch(net, k, options).run();
}

// =============================================================================
// Baseline and scheduling helpers
// =============================================================================

ContractionPath reconstruction_path(const TensorNetwork& net) {
    const auto data = net.data_nodes();
    if (data.size() != 1) {
        throw NetworkError(fmt::format("reconstruction path needs exactly one data node (found {})", data.size()));
    }
    std::vector<const TensorNode*> cores;
    for (const auto& n : net.nodes()) {
        if (n.role == NodeRole::Core) {
            cores.push_back(&n);
        }
    }
    if (cores.empty()) {
        throw NetworkError("reconstruction path needs at least one core");
    }
    std::stable_sort(cores.begin(), cores.end(), [](const TensorNode* a, const TensorNode* b) {
        return a->core_index.value_or(0) < b->core_index.value_or(0);
    });

    std::vector<std::pair<NodeId, NodeId>> order;
    NodeId acc = cores.front()->id;
    std::int32_t next = net.next_node_id().value;
    for (std::size_t i = 1; i < cores.size(); ++i) {
        order.emplace_back(acc, cores[i]->id);
        acc = NodeId{next++};
    }
    order.emplace_back(acc, data.front());
    return make_path(net, order);
}

StepDag dependency_dag(const ContractionPath& path) {
    const std::size_t n = path.steps.size();
    StepDag dag;
    dag.predecessors.resize(n);
    dag.successors.resize(n);
    dag.concurrent.resize(n);
    dag.edge_count = path.dag.size();
    for (const auto& [from, to] : path.dag) {
        dag.predecessors[to].push_back(from);
        dag.successors[from].push_back(to);
    }
    for (std::size_t j = 0; j < n; ++j) {
        std::sort(dag.predecessors[j].begin(), dag.predecessors[j].end());
        std::sort(dag.successors[j].begin(), dag.successors[j].end());
    }

    // Steps are in topological order, so ancestors are complete when visited.
    std::vector<std::vector<bool>> ancestor(n, std::vector<bool>(n, false));
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t p : dag.predecessors[j]) {
            ancestor[j][p] = true;
            for (std::size_t q = 0; q < n; ++q) {
                if (ancestor[p][q]) {
                    ancestor[j][q] = true;
                }
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j && !ancestor[i][j] && !ancestor[j][i]) {
                dag.concurrent[i].push_back(j);
            }
        }
    }
    return dag;
}

std::vector<std::string> describe_steps(const TensorNetwork& net, const ContractionPath& path) {
    std::vector<std::string> lines;
    TensorNetwork current = net;
    for (const auto& step : path.steps) {
        const std::string left = current.node(step.left).label;
        const std::string right = current.node(step.right).label;
        lines.push_back(fmt::format("{} x {} -> [{},{},{}] mac={}", left, right, step.shape.m, step.shape.k,
                                    step.shape.n, step.macs));
        current = contract_pair(current, step.left, step.right).network;
    }
    return lines;
}

}  // namespace ttdse
