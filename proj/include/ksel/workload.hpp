#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ksel/common.hpp"
#include "ksel/heap.hpp"

namespace ksel {

// Deterministic splittable generator (splitmix64); identical seeds yield
// identical streams on every platform.
struct Rng {
    u64 state;
    explicit Rng(u64 seed) : state(seed + 0x9e3779b97f4a7c15ull) {}
    u64 next() {
        u64 z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    u64 below(u64 bound) { return bound ? next() % bound : 0; }
    double unit() { return double(next() >> 11) * (1.0 / 9007199254740992.0); }
};

enum class KeyDist { UniformRandom, Ascending, Descending, Clustered };
enum class OpMix { InsertOnly, DeleteOnly, Balanced, InsertHeavy, DeleteHeavy };
enum class QDist { Uniform, Fixed, FrontLoaded };

struct WorkloadSpec {
    u64 seed = 0;
    u32 k = 4;
    u64 n0 = 0;     // initial build size
    u64 ops = 0;    // requested operations after the build
    KeyDist dist = KeyDist::UniformRandom;
    OpMix mix = OpMix::Balanced;
    QDist qdist = QDist::Uniform;
    u32 fixedIndex = 1;  // for QDist::Fixed
    u32 budget = 16;
};

struct Op {
    bool isInsert;
    Key key;  // insert payload
    u32 q;    // delete quantile index
};

// Initial keys and the op stream are fully determined by the workload
// parameters and seed.
std::vector<Key> initial_keys(const WorkloadSpec& spec);
std::vector<Op> generate(const WorkloadSpec& spec);

struct RunOptions {
    bool verify = false;          // mirror through the oracle, fail fast
    bool paranoid = false;        // per-op full audits in the heap
    u64 fullCompareEvery = 4096;  // oracle multiset comparison cadence
    double faultSplitThresholdScale = 1.0;
    std::ostream* metricsOut = nullptr;
};

struct RunResult {
    int exitCode = 0;           // 0 = all checks passed
    std::string violation;      // first failure description
    Metrics metrics;
    u64 finalN = 0;
    u64 fingerprint = 0;        // deterministic end-state digest
    std::vector<u64> checkpointFingerprints;
};

RunResult run_workload(const WorkloadSpec& spec, const RunOptions& opt = {});

// One grid cell of the n x k sweep.
struct SweepCell {
    u64 n0;
    u32 k;
    u64 maxOpUnits = 0;
    u64 maxOpTree = 0;
    u64 maxOpBucket = 0;
    double meanOpUnits = 0;
    u64 p99OpUnits = 0;
    u64 modeTransitions = 0;
    int exitCode = 0;
};

// Runs a balanced/uniform workload per cell (cells run in parallel when
// OpenMP is enabled) and emits one line per cell plus per-k n-independence
// ratios: maxOpUnits(n_max) / maxOpUnits(n_min).
std::vector<SweepCell> sweep(const std::vector<u64>& n0s, const std::vector<u32>& ks,
                             u64 ops, u64 seed, u32 budget, std::ostream* out);

std::string mix_name(OpMix m);
std::string dist_name(KeyDist d);
std::string qdist_name(QDist q);
std::optional<OpMix> mix_from_name(const std::string& s);
std::optional<KeyDist> dist_from_name(const std::string& s);
std::optional<QDist> qdist_from_name(const std::string& s);

}  // namespace ksel
