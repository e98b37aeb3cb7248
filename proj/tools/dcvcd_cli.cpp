// Command-line front end: run the clustering pipeline, generate synthetic
// data, score a labeling, or run one-shot community detection on an edge list.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "dcvcd/community.hpp"
#include "dcvcd/graph.hpp"
#include "dcvcd/io.hpp"
#include "dcvcd/metrics.hpp"
#include "dcvcd/pipeline.hpp"

namespace fs = std::filesystem;
using namespace dcvcd;

namespace {

struct RunArgs {
    std::string config;
    std::string data;
    std::string format = "csv";
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    bool quiet = false;
    bool debug_graphs = false;
};

int cmd_run(const RunArgs& a) {
    RunConfig cfg = a.config.empty() ? RunConfig{} : load_config(a.config);
    if (a.seed) cfg.seed = *a.seed;
    cfg.validate();
    Dataset data = load_dataset(a.data, parse_format(a.format));
    fs::create_directories(a.out);

    PipelineOptions opts;
    if (!a.quiet) opts.log = &std::cerr;
    if (a.debug_graphs) {
        fs::path dir = fs::path(a.out) / "graphs";
        fs::create_directories(dir);
        opts.on_pool_graph = [dir](int iteration, const WeightedGraph& g) {
            char name[32];
            std::snprintf(name, sizeof name, "round_%03d.txt", iteration);
            write_edge_list((dir / name).string(), g);
        };
    }
    auto result = run_pipeline(data, cfg, opts);
    detail::write_file((fs::path(a.out) / "assignments.csv").string(), assignments_csv(data, result.labels));
    detail::write_file((fs::path(a.out) / "report.json").string(), serialize_report(result.report));
    if (!a.quiet) {
        std::cerr << "wrote " << (fs::path(a.out) / "assignments.csv").string() << " and report.json\n";
        if (result.report.final_metrics) {
            const auto& m = *result.report.final_metrics;
            std::cerr << "ACC " << m.acc << "  NMI " << m.nmi << "  ARI " << m.ari << '\n';
        }
    }
    return 0;
}

struct GenArgs {
    int k = 5;
    std::size_t n = 2000;
    std::size_t d = 16;
    double spread = 0.47;
    std::uint64_t seed = 0;
    std::string out;
    std::string format = "csv";
};

int cmd_gen(const GenArgs& a) {
    Dataset data = generate_blobs(a.k, a.n, a.d, a.spread, a.seed);
    save_dataset(a.out, data, parse_format(a.format));
    return 0;
}

struct EvalArgs {
    std::string assignments;
    std::string truth;
    std::string format = "csv";
};

int cmd_eval(const EvalArgs& a) {
    auto [ids, pred] = read_assignments(a.assignments);
    Dataset data = load_dataset(a.truth, parse_format(a.format));
    if (!data.ground_truth()) throw Error("'" + a.truth + "' carries no ground-truth labels");
    std::map<std::string, int> truth_by_id;
    for (std::size_t i = 0; i < data.size(); ++i) truth_by_id[data.ids()[i]] = (*data.ground_truth())[i];
    Labeling truth;
    for (const auto& id : ids) {
        auto it = truth_by_id.find(id);
        if (it == truth_by_id.end()) throw Error("sample '" + id + "' has no ground-truth label");
        truth.push_back(it->second);
    }
    if (ids.size() != data.size()) throw Error("assignments cover " + std::to_string(ids.size()) + " of " +
                                               std::to_string(data.size()) + " samples");
    Json j = evaluate(pred, truth);
    std::cout << j.dump(2) << '\n';
    return 0;
}

struct DetectArgs {
    std::string edges;
    std::string algorithm = "leiden";
    std::uint64_t seed = 0;
};

int cmd_detect(const DetectArgs& a) {
    std::ifstream in(a.edges);
    if (!in) throw Error("cannot open '" + a.edges + "'");
    WeightedGraph g = read_edge_list(in);
    Algorithm algo;
    if (a.algorithm == "leiden") algo = Algorithm::leiden;
    else if (a.algorithm == "louvain") algo = Algorithm::louvain;
    else throw Error("unknown algorithm '" + a.algorithm + "'");
    auto r = detect(g, algo, a.seed);
    std::cout << "# algorithm " << to_string(r.algorithm) << " modularity " << detail::format_real(r.modularity)
              << " communities " << r.partition.size() << " passes " << r.passes << '\n';
    for (const auto& c : r.partition.communities()) {
        for (NodeId v : c.members) std::cout << v << ' ' << c.id << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Community-based cluster refinement over embedding similarity graphs"};
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Cluster a dataset and write assignments.csv + report.json");
    run_cmd->add_option("--config", run.config, "Flat key = value config file");
    run_cmd->add_option("--data", run.data, "Dataset path")->required();
    run_cmd->add_option("--format", run.format, "csv | bin")->check(CLI::IsMember({"csv", "bin"}));
    run_cmd->add_option("--out", run.out, "Output directory");
    run_cmd->add_option("--seed", run.seed, "Overrides the config seed");
    run_cmd->add_flag("--quiet", run.quiet, "No progress output");
    run_cmd->add_flag("--debug-graphs", run.debug_graphs, "Dump every round's pool graph under OUT/graphs");

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen", "Write a synthetic Gaussian-blob dataset");
    gen_cmd->add_option("--k", gen.k, "Number of blobs");
    gen_cmd->add_option("--n", gen.n, "Number of samples");
    gen_cmd->add_option("--d", gen.d, "Dimension");
    gen_cmd->add_option("--spread", gen.spread, "Isotropic noise standard deviation");
    gen_cmd->add_option("--seed", gen.seed, "Random seed");
    gen_cmd->add_option("--out", gen.out, "Output path")->required();
    gen_cmd->add_option("--format", gen.format, "csv | bin")->check(CLI::IsMember({"csv", "bin"}));

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Score assignments against a labeled dataset");
    eval_cmd->add_option("--assignments", ev.assignments, "assignments.csv")->required();
    eval_cmd->add_option("--truth", ev.truth, "Dataset with a label column")->required();
    eval_cmd->add_option("--format", ev.format, "csv | bin")->check(CLI::IsMember({"csv", "bin"}));

    DetectArgs det;
    auto* detect_cmd = app.add_subcommand("detect", "Community detection on a `u v weight` edge list");
    detect_cmd->add_option("--edges", det.edges, "Edge list path")->required();
    detect_cmd->add_option("--algorithm", det.algorithm, "leiden | louvain")
        ->check(CLI::IsMember({"leiden", "louvain"}));
    detect_cmd->add_option("--seed", det.seed, "Random seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) return cmd_run(run);
        if (*gen_cmd) return cmd_gen(gen);
        if (*eval_cmd) return cmd_eval(ev);
        if (*detect_cmd) return cmd_detect(det);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
