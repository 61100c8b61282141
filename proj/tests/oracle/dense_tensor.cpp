#include "dense_tensor.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace oracle {

using ttdse::ModeId;
using ttdse::NodeId;

namespace {

std::vector<std::int64_t> strides_of(const std::vector<std::int64_t>& dims) {
    std::vector<std::int64_t> strides(dims.size(), 1);
    for (std::size_t i = dims.size(); i-- > 1;) {
        strides[i - 1] = strides[i] * dims[i];
    }
    return strides;
}

std::int64_t element_count(const std::vector<std::int64_t>& dims) {
    std::int64_t n = 1;
    for (auto d : dims) {
        n *= d;
    }
    return n;
}

// Advances a mixed-radix counter; false after the last value.
bool next_index(std::vector<std::int64_t>& idx, const std::vector<std::int64_t>& dims) {
    for (std::size_t i = idx.size(); i-- > 0;) {
        if (++idx[i] < dims[i]) {
            return true;
        }
        idx[i] = 0;
    }
    return false;
}

std::size_t position(const std::vector<ModeId>& modes, ModeId m) {
    auto it = std::find(modes.begin(), modes.end(), m);
    if (it == modes.end()) {
        throw std::logic_error("mode not in tensor");
    }
    return static_cast<std::size_t>(it - modes.begin());
}

}  // namespace

double DenseTensor::at(const std::map<ModeId, std::int64_t>& index) const {
    const auto strides = strides_of(dims);
    std::int64_t off = 0;
    for (std::size_t i = 0; i < modes.size(); ++i) {
        off += index.at(modes[i]) * strides[i];
    }
    return data[static_cast<std::size_t>(off)];
}

DenseTensor random_tensor(const ttdse::TensorNode& node, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    DenseTensor t;
    for (const auto& m : node.modes) {
        t.modes.push_back(m.id);
        t.dims.push_back(m.size);
    }
    t.data.resize(static_cast<std::size_t>(element_count(t.dims)));
    for (auto& x : t.data) {
        x = dist(rng);
    }
    return t;
}

std::map<NodeId, DenseTensor> random_tensors(const ttdse::TensorNetwork& net, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::map<NodeId, DenseTensor> out;
    for (const auto& n : net.nodes()) {
        out.emplace(n.id, random_tensor(n, rng));
    }
    return out;
}

DenseTensor contract(const DenseTensor& a, const DenseTensor& b) {
    // Loop over the union of modes: result modes first, then the summed ones.
    std::vector<ModeId> loop_modes;
    std::vector<std::int64_t> loop_dims;
    DenseTensor out;
    auto in = [](const std::vector<ModeId>& v, ModeId m) { return std::find(v.begin(), v.end(), m) != v.end(); };
    for (std::size_t i = 0; i < a.modes.size(); ++i) {
        if (!in(b.modes, a.modes[i])) {
            out.modes.push_back(a.modes[i]);
            out.dims.push_back(a.dims[i]);
        }
    }
    for (std::size_t i = 0; i < b.modes.size(); ++i) {
        if (!in(a.modes, b.modes[i])) {
            out.modes.push_back(b.modes[i]);
            out.dims.push_back(b.dims[i]);
        }
    }
    loop_modes = out.modes;
    loop_dims = out.dims;
    for (std::size_t i = 0; i < a.modes.size(); ++i) {
        if (in(b.modes, a.modes[i])) {
            if (b.dims[position(b.modes, a.modes[i])] != a.dims[i]) {
                throw std::logic_error("size mismatch in oracle contraction");
            }
            loop_modes.push_back(a.modes[i]);
            loop_dims.push_back(a.dims[i]);
        }
    }
    const auto a_strides = strides_of(a.dims);
    const auto b_strides = strides_of(b.dims);
    const auto o_strides = strides_of(out.dims);
    // Stride of every loop mode inside a, b and out (0 when absent).
    std::vector<std::int64_t> sa(loop_modes.size(), 0), sb(loop_modes.size(), 0), so(loop_modes.size(), 0);
    for (std::size_t l = 0; l < loop_modes.size(); ++l) {
        if (in(a.modes, loop_modes[l])) sa[l] = a_strides[position(a.modes, loop_modes[l])];
        if (in(b.modes, loop_modes[l])) sb[l] = b_strides[position(b.modes, loop_modes[l])];
        if (in(out.modes, loop_modes[l])) so[l] = o_strides[position(out.modes, loop_modes[l])];
    }
    out.data.assign(static_cast<std::size_t>(element_count(out.dims)), 0.0);
    std::vector<std::int64_t> idx(loop_modes.size(), 0);
    do {
        std::int64_t ia = 0, ib = 0, io = 0;
        for (std::size_t l = 0; l < idx.size(); ++l) {
            ia += idx[l] * sa[l];
            ib += idx[l] * sb[l];
            io += idx[l] * so[l];
        }
        out.data[static_cast<std::size_t>(io)] += a.data[static_cast<std::size_t>(ia)] * b.data[static_cast<std::size_t>(ib)];
    } while (next_index(idx, loop_dims));
    return out;
}

DenseTensor permute(const DenseTensor& t, const std::vector<ModeId>& order) {
    if (order.size() != t.modes.size()) {
        throw std::logic_error("permute: wrong mode count");
    }
    DenseTensor out;
    out.modes = order;
    for (ModeId m : order) {
        out.dims.push_back(t.dims[position(t.modes, m)]);
    }
    out.data.resize(t.data.size());
    const auto in_strides = strides_of(t.dims);
    std::vector<std::int64_t> src_stride;
    for (ModeId m : order) {
        src_stride.push_back(in_strides[position(t.modes, m)]);
    }
    std::vector<std::int64_t> idx(order.size(), 0);
    std::size_t dst = 0;
    do {
        std::int64_t src = 0;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            src += idx[i] * src_stride[i];
        }
        out.data[dst++] = t.data[static_cast<std::size_t>(src)];
    } while (next_index(idx, out.dims));
    return out;
}

std::int64_t brute_force_macs(const ttdse::TensorNode& a, const ttdse::TensorNode& b) {
    std::map<ModeId, std::int64_t> sizes;
    for (const auto& m : a.modes) sizes[m.id] = m.size;
    for (const auto& m : b.modes) sizes[m.id] = m.size;
    std::int64_t macs = 1;
    for (const auto& [id, size] : sizes) {
        macs *= size;
    }
    return macs;
}

DenseTensor evaluate_path(const ttdse::TensorNetwork& net, std::map<NodeId, DenseTensor> tensors,
                          const ttdse::ContractionPath& path) {
    (void)net;
    for (const auto& s : path.steps) {
        DenseTensor r = contract(tensors.at(s.left), tensors.at(s.right));
        tensors.erase(s.left);
        tensors.erase(s.right);
        tensors.emplace(s.result, std::move(r));
    }
    if (tensors.size() != 1) {
        throw std::logic_error("path does not reduce the network");
    }
    return tensors.begin()->second;
}

std::int64_t replay_macs(const ttdse::TensorNetwork& net, const ttdse::ContractionPath& path) {
    // Track each live tensor's mode set; a merged node keeps modes not shared.
    std::map<NodeId, std::map<ModeId, std::int64_t>> live;
    for (const auto& n : net.nodes()) {
        for (const auto& m : n.modes) live[n.id][m.id] = m.size;
    }
    std::int64_t total = 0;
    for (const auto& s : path.steps) {
        const auto a = live.at(s.left);
        const auto b = live.at(s.right);
        std::map<ModeId, std::int64_t> merged;
        std::int64_t macs = 1;
        std::set<ModeId> all;
        for (const auto& [id, size] : a) all.insert(id);
        for (const auto& [id, size] : b) all.insert(id);
        for (ModeId id : all) {
            const bool in_a = a.count(id) != 0;
            const bool in_b = b.count(id) != 0;
            const std::int64_t size = in_a ? a.at(id) : b.at(id);
            macs *= size;
            if (in_a != in_b) merged[id] = size;
        }
        total += macs;
        live.erase(s.left);
        live.erase(s.right);
        live[s.result] = merged;
    }
    return total;
}

double max_abs_diff(const DenseTensor& a, const DenseTensor& b) {
    const DenseTensor bp = permute(b, a.modes);
    double d = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        d = std::max(d, std::abs(a.data[i] - bp.data[i]));
    }
    return d;
}

double max_abs(const DenseTensor& t) {
    double m = 0.0;
    for (double x : t.data) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace oracle
