// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "kie/synth.hpp"
#include "kie/text_embedder.hpp"
#include "kie/trainer.hpp"

namespace kie::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Parses argv (argv[0] is the program name) and runs one subcommand.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::vector<PreparedPair> prepare_corpus(const std::vector<CorpusPair>& pairs, const TextEmbedder& embedder);

struct TrainingRun {
    AffinityModel model;
    std::vector<EpochMetrics> epochs;
    std::string log;  // JSON lines, one per epoch
    EvalReport train_report;
    EvalReport test_report;
};

/// fit() with a per-epoch log line, then final reports on both sets.
TrainingRun train_and_evaluate(const std::vector<PreparedPair>& train, const std::vector<PreparedPair>& test,
                               const TrainConfig& config);

struct BenchRow {
    int size = 0;
    int instances = 0;
    double mean_gap = 0.0;
    double max_gap = 0.0;
    int certified = 0;            // reference proven optimal
    double heuristic_p95_s = 0.0;
    double exact_p95_s = 0.0;
};

/// Random instances per size: tree-structured edges on both sides, scores
/// uniform in [-1, 1]. The gap is measured against branch and bound run
/// with the given node budget.
std::vector<BenchRow> solve_bench(const std::vector<int>& sizes, int seeds, std::uint64_t seed, std::int64_t max_nodes);
std::string bench_table(const std::vector<BenchRow>& rows, bool timing);

}  // namespace kie::cli
