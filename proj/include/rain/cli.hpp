#pragma once

#include "rain/bench.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace rain {

/// On-disk session: data/ (CSV), queries/<name>.sql, complaints.json,
/// session.json, out/ (reports).
struct Workspace {
    std::filesystem::path root;
    SessionConfig config;
    TrainingSet train;
    std::vector<std::shared_ptr<Relation>> relations;
    std::vector<std::string> query_names;

    Catalog catalog() const;
    QueryPlan load_query(const std::string& name) const;
    std::vector<Complaint> load_complaints() const;
    std::filesystem::path out_dir() const { return root / "out"; }
};

Workspace load_workspace(const std::filesystem::path& root);

int cmd_run_query(Workspace& ws, const std::string& query_name, bool dump_provenance = false);
int cmd_debug(Workspace& ws);

struct BenchOptions {
    std::string suite;
    std::uint64_t seed = 0;
    int seeds = 5;              // oracle repetitions
    int n = 10, m = 1, k = 1;   // appendix_a dimensions
    int draws = 1000;           // uniform-random solver draws
    int corrupted = 200, clean = 50; // appendix_c block sizes
    bool gnuplot = false;
};
int cmd_bench(Workspace& ws, const BenchOptions& opts);

/// Entry point used by the `rain` binary.
int run_cli(int argc, char** argv);

} // namespace rain
