#include "ttdse/cli.hpp"

#include <fstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ttdse/config_io.hpp"
#include "ttdse/dse_engine.hpp"
#include "ttdse/reports.hpp"

namespace ttdse::cli {

namespace {

class UsageError : public Error {
public:
    using Error::Error;
};

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f || !(f << text)) {
        throw Error(fmt::format("cannot write {}", path.string()));
    }
}

std::filesystem::path plot_path_for(const std::filesystem::path& csv) {
    return csv.parent_path() / (csv.stem().string() + "_plot" + csv.extension().string());
}

struct PathsArgs {
    std::string model;
    std::string layer;
    std::size_t k = kDefaultTopK;
};

struct SimulateArgs {
    std::string model;
    std::string hardware;
    std::string layer;
    std::size_t path = 1;
    std::string partition = "1x1";
    std::string dataflow = "OS";
};

struct DseArgs {
    std::string model;
    std::string hardware;
    std::size_t k = kDefaultTopK;
    std::string mode = "inference";
    std::string out;
    std::string csv;
};

int cmd_paths(const PathsArgs& args, std::ostream& out) {
    const ModelConfig model = load_model_config(args.model);
    bool first = true;
    for (const auto& spec : model.layers) {
        if (!args.layer.empty() && spec.name != args.layer) {
            continue;
        }
        const TensorNetwork net = build_network(spec);
        const auto paths = topk_mac_paths(net, args.k);
        out << (first ? "" : "\n") << format_path_listing(spec, net, paths);
        first = false;
    }
    if (first) {
        throw UsageError(fmt::format("model has no layer named '{}'", args.layer));
    }
    return kExitOk;
}

int cmd_simulate(const SimulateArgs& args, std::ostream& out) {
    const ModelConfig model = load_model_config(args.model);
    const HardwareFile hw = load_hardware_config(args.hardware);
    const LayerSpec* spec = nullptr;
    for (const auto& l : model.layers) {
        if (l.name == args.layer) {
            spec = &l;
        }
    }
    if (spec == nullptr) {
        throw UsageError(fmt::format("model has no layer named '{}'", args.layer));
    }
    const TensorNetwork net = build_network(*spec);
    const auto paths = topk_mac_paths(net, args.path);
    if (args.path > paths.size()) {
        throw UsageError(fmt::format("layer '{}' has only {} contraction path(s)", spec->name, paths.size()));
    }
    const Partition part = *parse_partition(args.partition);
    const Dataflow df = *parse_dataflow(args.dataflow);
    const ContractionPath& path = paths[args.path - 1];
    const LatencyReport report = path_latency(net, path, hw.hw, part, df);
    out << format_latency_report(*spec, args.path, path, part, df, report);
    return kExitOk;
}

int cmd_dse(const DseArgs& args, std::ostream& out) {
    const ModelConfig model = load_model_config(args.model);
    const HardwareFile hw = load_hardware_config(args.hardware);
    const ExecutionMode mode = args.mode == "training" ? ExecutionMode::Training : ExecutionMode::Inference;

    const auto designs = build_layer_designs(model.layers, args.k, mode);
    const CostTable table = populate_cost_table(designs, hw.hw, hw.partitions, hw.dataflows);
    const DseResult result = global_search(table, hw.strategies, mode);
    const SpeedupReport speedups = speedup_report(designs, hw.hw, table, hw.strategies, result);

    const std::string report = dse_report_json({model, hw, args.k, designs, table, result, speedups});
    if (!args.csv.empty()) {
        write_file(args.csv, cost_table_csv(table));
        write_file(plot_path_for(args.csv), plot_csv(table, hw.strategies, result));
    }
    if (args.out.empty()) {
        out << report;
        return kExitOk;
    }
    write_file(args.out, report);
    out << fmt::format("strategy {} total_cycles {}\n", result.strategy, format_cycles(result.total_cycles));
    for (std::size_t l = 0; l < result.layers.size(); ++l) {
        const LayerChoice& c = result.layers[l];
        out << fmt::format("  {} path {} {} {} cycles {}\n", table.layer_name(l), c.path_index + 1,
                           to_string(c.partition), to_string(c.dataflow), format_cycles(c.cycles));
    }
    out << format_summary(summarize_choices(result));
    out << fmt::format("speedup vs dense {} vs MAC-optimal {} vs reconstruction {}\n",
                       format_ratio(speedups.total.dense_over_tt), format_ratio(speedups.total.mac_opt_over_tt),
                       format_ratio(speedups.total.reconstruction_over_tt));
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Latency-driven contraction path and mapping search for tensorized layers"};
    app.name("ttdse");
    app.require_subcommand(1);

    PathsArgs paths_args;
    auto* paths = app.add_subcommand("paths", "List the lowest-MAC contraction paths of each layer");
    paths->add_option("model", paths_args.model, "Model config (JSON)")->required()->check(CLI::ExistingFile);
    paths->add_option("--layer", paths_args.layer, "Only this layer");
    paths->add_option("--k", paths_args.k, "Number of paths")->check(CLI::PositiveNumber);

    SimulateArgs sim_args;
    auto* simulate = app.add_subcommand("simulate", "Simulate one (layer, path, partition, dataflow) tuple");
    simulate->add_option("model", sim_args.model, "Model config (JSON)")->required()->check(CLI::ExistingFile);
    simulate->add_option("hw", sim_args.hardware, "Hardware config (JSON)")->required()->check(CLI::ExistingFile);
    simulate->add_option("--layer", sim_args.layer, "Layer name")->required();
    simulate->add_option("--path", sim_args.path, "Path rank, 1 = lowest MAC")->check(CLI::PositiveNumber);
    simulate->add_option("--partition", sim_args.partition, "1x1, 2x1 or 1x2")
        ->check(CLI::IsMember({"1x1", "2x1", "1x2"}));
    simulate->add_option("--dataflow", sim_args.dataflow, "IS, OS or WS")->check(CLI::IsMember({"IS", "OS", "WS"}));

    DseArgs dse_args;
    auto* dse = app.add_subcommand("dse", "Search paths, partitions and dataflows for a whole model");
    dse->add_option("model", dse_args.model, "Model config (JSON)")->required()->check(CLI::ExistingFile);
    dse->add_option("hw", dse_args.hardware, "Hardware config (JSON)")->required()->check(CLI::ExistingFile);
    dse->add_option("--k", dse_args.k, "Candidate paths per layer")->check(CLI::PositiveNumber);
    dse->add_option("--mode", dse_args.mode, "inference or training")
        ->check(CLI::IsMember({"inference", "training"}));
    dse->add_option("--out", dse_args.out, "Write the JSON report here instead of stdout");
    dse->add_option("--csv", dse_args.csv, "Write the cost table here (plot data goes to <stem>_plot.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*paths) {
            return cmd_paths(paths_args, out);
        }
        if (*simulate) {
            return cmd_simulate(sim_args, out);
        }
        return cmd_dse(dse_args, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const SpecError& e) {
        err << "parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const InfeasibleConfig& e) {
        err << "infeasible: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const InfeasibleModel& e) {
        err << "infeasible: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}

}  // namespace ttdse::cli
