#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ksel/workload.hpp"

namespace {

std::vector<ksel::u64> parse_u64_list(const std::string& s) {
    std::vector<ksel::u64> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) out.push_back(std::stoull(part));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"k-selectable sloppy heap workload driver"};
    app.require_subcommand(1);

    ksel::WorkloadSpec spec;
    std::string mix = "balanced", dist = "uniform", qdist = "uniform";
    std::string outPath;
    bool verifyFlag = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--k", spec.k, "quantile count (>= 2)");
        cmd->add_option("--n0", spec.n0, "initial build size");
        cmd->add_option("--ops", spec.ops, "requested operations");
        cmd->add_option("--seed", spec.seed, "workload seed");
        cmd->add_option("--mix", mix,
                        "insert-only|delete-only|balanced|insert-heavy|delete-heavy");
        cmd->add_option("--dist", dist, "uniform|ascending|descending|clustered");
        cmd->add_option("--qdist", qdist, "uniform|fixed|front");
        cmd->add_option("--qfix", spec.fixedIndex, "index for --qdist fixed");
        cmd->add_option("--budget", spec.budget, "work units per operation (B >= 8)");
        cmd->add_option("--out", outPath, "metrics file (default stdout)");
    };

    CLI::App* runCmd = app.add_subcommand("run", "execute one workload");
    add_common(runCmd);
    runCmd->add_flag("--verify", verifyFlag, "mirror every op through the oracle");

    CLI::App* verifyCmd =
        app.add_subcommand("verify", "execute one workload with the oracle on");
    add_common(verifyCmd);

    std::string n0List = "16384,131072,1048576", kList = "4,64,256";
    CLI::App* sweepCmd = app.add_subcommand("sweep", "n x k grid of balanced runs");
    sweepCmd->add_option("--n0", n0List, "comma-separated initial sizes");
    sweepCmd->add_option("--k", kList, "comma-separated quantile counts");
    sweepCmd->add_option("--ops", spec.ops, "operations per cell");
    sweepCmd->add_option("--seed", spec.seed, "seed");
    sweepCmd->add_option("--budget", spec.budget, "work units per operation");
    sweepCmd->add_option("--out", outPath, "metrics file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!outPath.empty()) {
        file.open(outPath);
        if (!file) {
            std::cerr << "cannot open " << outPath << "\n";
            return 2;
        }
        out = &file;
    }

    if (sweepCmd->parsed()) {
        if (spec.ops == 0) spec.ops = 100000;
        auto cells = ksel::sweep(parse_u64_list(n0List),
                                 [&] {
                                     std::vector<ksel::u32> ks;
                                     for (auto v : parse_u64_list(kList))
                                         ks.push_back(ksel::u32(v));
                                     return ks;
                                 }(),
                                 spec.ops, spec.seed, spec.budget, out);
        for (const auto& c : cells)
            if (c.exitCode != 0) return 1;
        return 0;
    }

    auto m = ksel::mix_from_name(mix);
    auto d = ksel::dist_from_name(dist);
    auto q = ksel::qdist_from_name(qdist);
    if (!m || !d || !q) {
        std::cerr << "unknown mix/dist/qdist name\n";
        return 2;
    }
    spec.mix = *m;
    spec.dist = *d;
    spec.qdist = *q;

    ksel::RunOptions opt;
    opt.verify = verifyFlag || verifyCmd->parsed();
    opt.metricsOut = out;

    ksel::RunResult res;
    try {
        res = ksel::run_workload(spec, opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    if (res.exitCode != 0) std::cerr << "violation: " << res.violation << "\n";
    return res.exitCode;
}
