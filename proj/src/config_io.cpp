#include "ttdse/config_io.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace ttdse {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(std::string_view source, const std::string& what) {
    throw ConfigError(fmt::format("{}: {}", source, what));
}

json parse_json(std::string_view text, std::string_view source) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        std::size_t col = 1;
        const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        for (std::size_t i = 0; i < end; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        // Drop nlohmann's "[json.exception.parse_error.101] parse error at ..." prefix.
        std::string detail = e.what();
        if (auto pos = detail.find(": "); pos != std::string::npos) {
            detail = detail.substr(pos + 2);
        }
        throw ConfigError(fmt::format("{}:{}:{}: {}", source, line, col, detail));
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError(fmt::format("{}: cannot open file", path.string()));
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

/// Reads keys from one JSON object and rejects unknown ones.
class ObjectReader {
public:
    ObjectReader(const json& obj, std::string context) : obj_(obj), context_(std::move(context)) {
        if (!obj_.is_object()) {
            throw ConfigError(fmt::format("{}: expected an object", context_));
        }
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return obj_.contains(key);
    }

    std::int64_t integer(const std::string& key) {
        const json& v = get(key);
        if (!v.is_number_integer()) {
            throw ConfigError(fmt::format("{}: '{}' must be an integer", context_, key));
        }
        return v.get<std::int64_t>();
    }

    std::int64_t integer_or(const std::string& key, std::int64_t fallback) {
        return has(key) ? integer(key) : fallback;
    }

    std::string string(const std::string& key) {
        const json& v = get(key);
        if (!v.is_string()) {
            throw ConfigError(fmt::format("{}: '{}' must be a string", context_, key));
        }
        return v.get<std::string>();
    }

    std::vector<std::int64_t> integers(const std::string& key) {
        const json& v = get(key);
        if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number_integer(); })) {
            throw ConfigError(fmt::format("{}: '{}' must be an array of integers", context_, key));
        }
        return v.get<std::vector<std::int64_t>>();
    }

    std::vector<std::int64_t> integers(const std::string& key, std::size_t count) {
        auto values = integers(key);
        if (values.size() != count) {
            throw ConfigError(fmt::format("{}: '{}' must have {} entries (got {})", context_, key, count,
                                          values.size()));
        }
        return values;
    }

    std::vector<std::string> strings(const std::string& key) {
        const json& v = get(key);
        if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_string(); })) {
            throw ConfigError(fmt::format("{}: '{}' must be an array of strings", context_, key));
        }
        return v.get<std::vector<std::string>>();
    }

    const json& get(const std::string& key) {
        seen_.insert(key);
        if (!obj_.contains(key)) {
            throw ConfigError(fmt::format("{}: missing '{}'", context_, key));
        }
        return obj_.at(key);
    }

    void finish() const {
        for (const auto& [key, value] : obj_.items()) {
            if (!seen_.count(key)) {
                throw ConfigError(fmt::format("{}: unknown key '{}'", context_, key));
            }
        }
    }

    const std::string& context() const { return context_; }

private:
    const json& obj_;
    std::string context_;
    std::set<std::string> seen_;
};

LayerKind parse_kind(const std::string& text, const std::string& context) {
    for (LayerKind kind : {LayerKind::TtLinear, LayerKind::TtConv, LayerKind::DenseLinear, LayerKind::DenseConv}) {
        if (text == to_string(kind)) {
            return kind;
        }
    }
    throw ConfigError(fmt::format("{}: unknown layer kind '{}'", context, text));
}

LayerSpec parse_layer(const json& entry, std::size_t index, std::int64_t default_batch, std::string_view source) {
    ObjectReader r(entry, fmt::format("{}: layers[{}]", source, index));
    LayerSpec spec;
    spec.name = r.string("name");
    ObjectReader named(entry, fmt::format("{}: layer '{}'", source, spec.name));
    named.has("name");
    const LayerKind kind = parse_kind(named.string("kind"), named.context());
    spec.batch = named.integer_or("batch", default_batch);
    switch (kind) {
        case LayerKind::TtLinear: {
            TtLinearShape s;
            s.out_factors = named.integers("out_factors");
            s.in_factors = named.integers("in_factors");
            s.ranks = named.integers("ranks");
            spec.shape = std::move(s);
            break;
        }
        case LayerKind::TtConv: {
            TtConvShape s;
            const auto out = named.integers("out_channels", 2);
            const auto in = named.integers("in_channels", 2);
            const auto kernel = named.integers("kernel", 2);
            s.out1 = out[0];
            s.out2 = out[1];
            s.in1 = in[0];
            s.in2 = in[1];
            s.kernel_h = kernel[0];
            s.kernel_w = kernel[1];
            s.ranks = named.integers("ranks", 4);
            s.patches = named.integer("patches");
            spec.shape = std::move(s);
            break;
        }
        case LayerKind::DenseLinear: {
            DenseLinearShape s;
            s.out_features = named.integer("out_features");
            s.in_features = named.integer("in_features");
            spec.shape = s;
            break;
        }
        case LayerKind::DenseConv: {
            DenseConvShape s;
            s.out_channels = named.integer("out_channels");
            s.in_channels = named.integer("in_channels");
            const auto kernel = named.integers("kernel", 2);
            s.kernel_h = kernel[0];
            s.kernel_w = kernel[1];
            s.patches = named.integer("patches");
            spec.shape = s;
            break;
        }
    }
    named.finish();
    try {
        validate_spec(spec);
    } catch (const SpecError& e) {
        fail(source, fmt::format("layer '{}': {}", spec.name, e.what()));
    }
    return spec;
}

ordered_json layer_json(const LayerSpec& spec) {
    ordered_json j;
    j["name"] = spec.name;
    j["kind"] = std::string(to_string(spec.kind()));
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, TtLinearShape>) {
                j["out_factors"] = s.out_factors;
                j["in_factors"] = s.in_factors;
                j["ranks"] = s.ranks;
            } else if constexpr (std::is_same_v<T, TtConvShape>) {
                j["out_channels"] = {s.out1, s.out2};
                j["in_channels"] = {s.in1, s.in2};
                j["kernel"] = {s.kernel_h, s.kernel_w};
                j["ranks"] = s.ranks;
                j["patches"] = s.patches;
            } else if constexpr (std::is_same_v<T, DenseLinearShape>) {
                j["out_features"] = s.out_features;
                j["in_features"] = s.in_features;
            } else {
                j["out_channels"] = s.out_channels;
                j["in_channels"] = s.in_channels;
                j["kernel"] = {s.kernel_h, s.kernel_w};
                j["patches"] = s.patches;
            }
        },
        spec.shape);
    j["batch"] = spec.batch;
    return j;
}

std::vector<Partition> parse_partitions(const std::vector<std::string>& names, const std::string& context) {
    std::vector<Partition> out;
    for (const auto& n : names) {
        auto p = parse_partition(n);
        if (!p) {
            throw ConfigError(fmt::format("{}: unknown partition '{}' (expected 1x1, 2x1 or 1x2)", context, n));
        }
        if (std::find(out.begin(), out.end(), *p) != out.end()) {
            throw ConfigError(fmt::format("{}: partition '{}' listed twice", context, n));
        }
        out.push_back(*p);
    }
    return out;
}

std::vector<std::string> partition_names(const std::vector<Partition>& parts) {
    std::vector<std::string> out;
    for (Partition p : parts) {
        out.emplace_back(to_string(p));
    }
    return out;
}

constexpr std::int64_t kKiB = 1024;

}  // namespace

const LayerSpec& ModelConfig::layer(std::string_view layer_name) const {
    for (const auto& l : layers) {
        if (l.name == layer_name) {
            return l;
        }
    }
    throw ConfigError(fmt::format("model '{}' has no layer named '{}'", name, layer_name));
}

// =============================================================================
// Model files
// =============================================================================

ModelConfig parse_model_config(std::string_view text, std::string_view source) {
    const json root = parse_json(text, source);
    ObjectReader r(root, std::string(source));
    ModelConfig model;
    model.name = r.has("name") ? r.string("name") : std::string();
    model.description = r.has("description") ? r.string("description") : std::string();
    if (r.has("defaults")) {
        ObjectReader d(r.get("defaults"), fmt::format("{}: defaults", source));
        model.default_batch = d.integer_or("batch", 1);
        d.finish();
    }
    const json& layers = r.get("layers");
    r.finish();
    if (!layers.is_array() || layers.empty()) {
        fail(source, "'layers' must be a non-empty array");
    }
    std::set<std::string> names;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        LayerSpec spec = parse_layer(layers[i], i, model.default_batch, source);
        if (!names.insert(spec.name).second) {
            fail(source, fmt::format("duplicate layer name '{}'", spec.name));
        }
        model.layers.push_back(std::move(spec));
    }
    return model;
}

ModelConfig load_model_config(const std::filesystem::path& path) {
    return parse_model_config(read_file(path), path.string());
}

std::string serialize_model_config(const ModelConfig& model) {
    ordered_json j;
    j["name"] = model.name;
    if (!model.description.empty()) {
        j["description"] = model.description;
    }
    j["defaults"] = {{"batch", model.default_batch}};
    j["layers"] = ordered_json::array();
    for (const auto& l : model.layers) {
        j["layers"].push_back(layer_json(l));
    }
    return j.dump(2) + "\n";
}

// =============================================================================
// Hardware files
// =============================================================================

HardwareFile parse_hardware_config(std::string_view text, std::string_view source) {
    const json root = parse_json(text, source);
    ObjectReader r(root, std::string(source));
    HardwareFile file;
    HardwareConfig& hw = file.hw;
    hw.pe_rows = r.integer_or("pe_rows", hw.pe_rows);
    hw.pe_cols = r.integer_or("pe_cols", hw.pe_cols);
    hw.sram_input_filter_bytes = r.integer_or("sram_input_filter_kb", hw.sram_input_filter_bytes / kKiB) * kKiB;
    hw.sram_output_bytes = r.integer_or("sram_output_kb", hw.sram_output_bytes / kKiB) * kKiB;
    hw.bandwidth = r.integer_or("bandwidth", hw.bandwidth);
    hw.word_bytes = r.integer_or("word_bytes", hw.word_bytes);
    if (r.has("partitions")) {
        file.partitions = parse_partitions(r.strings("partitions"), fmt::format("{}: partitions", source));
    }
    if (r.has("dataflows")) {
        file.dataflows.clear();
        for (const auto& n : r.strings("dataflows")) {
            auto df = parse_dataflow(n);
            if (!df) {
                fail(source, fmt::format("unknown dataflow '{}' (expected IS, OS or WS)", n));
            }
            if (std::find(file.dataflows.begin(), file.dataflows.end(), *df) != file.dataflows.end()) {
                fail(source, fmt::format("dataflow '{}' listed twice", n));
            }
            file.dataflows.push_back(*df);
        }
    }
    if (r.has("strategies")) {
        const json& list = r.get("strategies");
        if (!list.is_array()) {
            fail(source, "'strategies' must be an array");
        }
        file.strategies.strategies.clear();
        for (std::size_t i = 0; i < list.size(); ++i) {
            ObjectReader s(list[i], fmt::format("{}: strategies[{}]", source, i));
            Strategy strategy;
            strategy.name = s.string("name");
            strategy.partitions = parse_partitions(s.strings("partitions"), s.context());
            s.finish();
            file.strategies.strategies.push_back(std::move(strategy));
        }
    }
    r.finish();

    if (file.partitions.empty() || file.dataflows.empty()) {
        fail(source, "partitions and dataflows must be non-empty");
    }
    try {
        hw.validate();
        file.strategies.validate(file.partitions);
    } catch (const ConfigError& e) {
        fail(source, e.what());
    }
    return file;
}

HardwareFile load_hardware_config(const std::filesystem::path& path) {
    return parse_hardware_config(read_file(path), path.string());
}

std::string serialize_hardware_config(const HardwareFile& file) {
    const HardwareConfig& hw = file.hw;
    if (hw.sram_input_filter_bytes % kKiB != 0 || hw.sram_output_bytes % kKiB != 0) {
        throw ConfigError("SRAM sizes must be whole KiB to serialize");
    }
    ordered_json j;
    j["pe_rows"] = hw.pe_rows;
    j["pe_cols"] = hw.pe_cols;
    j["sram_input_filter_kb"] = hw.sram_input_filter_bytes / kKiB;
    j["sram_output_kb"] = hw.sram_output_bytes / kKiB;
    j["bandwidth"] = hw.bandwidth;
    j["word_bytes"] = hw.word_bytes;
    j["partitions"] = partition_names(file.partitions);
    std::vector<std::string> dfs;
    for (Dataflow df : file.dataflows) {
        dfs.emplace_back(to_string(df));
    }
    j["dataflows"] = dfs;
    j["strategies"] = ordered_json::array();
    for (const auto& s : file.strategies.strategies) {
        j["strategies"].push_back({{"name", s.name}, {"partitions", partition_names(s.partitions)}});
    }
    return j.dump(2) + "\n";
}

}  // namespace ttdse
