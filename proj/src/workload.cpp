#include "ksel/workload.hpp"

#include <algorithm>

#include "ksel/oracle.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ksel {

std::string mix_name(OpMix m) {
    switch (m) {
        case OpMix::InsertOnly: return "insert-only";
        case OpMix::DeleteOnly: return "delete-only";
        case OpMix::Balanced: return "balanced";
        case OpMix::InsertHeavy: return "insert-heavy";
        case OpMix::DeleteHeavy: return "delete-heavy";
    }
    return "?";
}

std::string dist_name(KeyDist d) {
    switch (d) {
        case KeyDist::UniformRandom: return "uniform";
        case KeyDist::Ascending: return "ascending";
        case KeyDist::Descending: return "descending";
        case KeyDist::Clustered: return "clustered";
    }
    return "?";
}

std::string qdist_name(QDist q) {
    switch (q) {
        case QDist::Uniform: return "uniform";
        case QDist::Fixed: return "fixed";
        case QDist::FrontLoaded: return "front";
    }
    return "?";
}

std::optional<OpMix> mix_from_name(const std::string& s) {
    if (s == "insert-only") return OpMix::InsertOnly;
    if (s == "delete-only") return OpMix::DeleteOnly;
    if (s == "balanced") return OpMix::Balanced;
    if (s == "insert-heavy") return OpMix::InsertHeavy;
    if (s == "delete-heavy") return OpMix::DeleteHeavy;
    return std::nullopt;
}

std::optional<KeyDist> dist_from_name(const std::string& s) {
    if (s == "uniform") return KeyDist::UniformRandom;
    if (s == "ascending") return KeyDist::Ascending;
    if (s == "descending") return KeyDist::Descending;
    if (s == "clustered") return KeyDist::Clustered;
    return std::nullopt;
}

std::optional<QDist> qdist_from_name(const std::string& s) {
    if (s == "uniform") return QDist::Uniform;
    if (s == "fixed") return QDist::Fixed;
    if (s == "front") return QDist::FrontLoaded;
    return std::nullopt;
}

namespace {

class KeySource {
public:
    KeySource(const WorkloadSpec& spec, Rng& rng) : spec_(spec), rng_(rng) {
        if (spec.dist == KeyDist::Clustered) {
            centers_.resize(64);
            for (auto& c : centers_) c = Key(rng_.below(u64(1) << 40));
        }
        descending_ = Key(1) << 40;
    }

    Key next() {
        switch (spec_.dist) {
            case KeyDist::UniformRandom:
                return Key(rng_.below(u64(1) << 40));
            case KeyDist::Ascending:
                return ascending_++;
            case KeyDist::Descending:
                return descending_--;
            case KeyDist::Clustered:
                return centers_[rng_.below(centers_.size())] +
                       Key(rng_.below(4096));
        }
        return 0;
    }

private:
    const WorkloadSpec& spec_;
    Rng& rng_;
    std::vector<Key> centers_;
    Key ascending_ = 0;
    Key descending_ = 0;
};

double insert_probability(OpMix m) {
    switch (m) {
        case OpMix::InsertOnly: return 1.0;
        case OpMix::DeleteOnly: return 0.0;
        case OpMix::Balanced: return 0.5;
        case OpMix::InsertHeavy: return 0.7;
        case OpMix::DeleteHeavy: return 0.3;
    }
    return 0.5;
}

}  // namespace

std::vector<Key> initial_keys(const WorkloadSpec& spec) {
    Rng rng(spec.seed * 0x100000001b3ull + 17);
    KeySource src(spec, rng);
    std::vector<Key> keys;
    keys.reserve(spec.n0);
    for (u64 i = 0; i < spec.n0; ++i) keys.push_back(src.next());
    return keys;
}

std::vector<Op> generate(const WorkloadSpec& spec) {
    if (spec.k < 2) throw ConfigError("workload: k must be >= 2");
    Rng rng(spec.seed);
    // Op keys continue the build's key stream: same source, same seed,
    // skipping the build prefix.
    Rng keyRng(spec.seed * 0x100000001b3ull + 17);
    KeySource src(spec, keyRng);
    for (u64 i = 0; i < spec.n0; ++i) (void)src.next();
    double pIns = insert_probability(spec.mix);
    std::vector<Op> ops;
    ops.reserve(spec.ops);
    u64 n = spec.n0;
    for (u64 i = 0; i < spec.ops; ++i) {
        bool ins = rng.unit() < pIns;
        // deletes are never issued against an empty quantile: below k items
        // some quantile is empty, so fall back to inserting
        if (!ins && n < spec.k) ins = true;
        if (ins) {
            ops.push_back({true, src.next(), 0});
            ++n;
        } else {
            u32 q = 1;
            switch (spec.qdist) {
                case QDist::Uniform:
                    q = u32(rng.below(spec.k)) + 1;
                    break;
                case QDist::Fixed:
                    q = std::min(spec.fixedIndex, spec.k);
                    break;
                case QDist::FrontLoaded:
                    q = (rng.unit() < 0.5) ? 1 : u32(rng.below(spec.k)) + 1;
                    break;
            }
            ops.push_back({false, 0, q});
            --n;
        }
    }
    return ops;
}

RunResult run_workload(const WorkloadSpec& spec, const RunOptions& opt) {
    RunResult res;
    Config cfg;
    cfg.budget = spec.budget;
    cfg.paranoid = opt.paranoid;
    cfg.faultSplitThresholdScale = opt.faultSplitThresholdScale;

    SloppyHeap heap = SloppyHeap::build(initial_keys(spec), spec.k, cfg);
    QuantileOracle oracle(spec.k);
    if (opt.verify)
        for (Key k : heap.collect_sorted_keys()) oracle.o_insert(k);

    std::vector<Op> ops = generate(spec);
    u64 fullEvery = opt.fullCompareEvery ? opt.fullCompareEvery : 4096;

    auto fail = [&](std::string what) {
        res.exitCode = 1;
        res.violation = std::move(what);
    };

    for (u64 idx = 0; idx < ops.size() && res.exitCode == 0; ++idx) {
        const Op& op = ops[idx];
        if (op.isInsert) {
            heap.insert(op.key);
            if (opt.verify) oracle.o_insert(op.key);
        } else {
            bool exact = heap.mode() == Mode::Exact;
            Key got = heap.delete_i(op.q);
            if (opt.verify) {
                auto chk = oracle.o_check_and_delete(op.q, got, exact);
                if (!chk.ok) fail("oracle: " + chk.violation);
            }
        }
        // full multiset comparison every op while the structure is small,
        // at a fixed cadence once it grows
        if (res.exitCode == 0 && opt.verify &&
            ((idx + 1) % fullEvery == 0 || heap.len() <= 512)) {
            if (!oracle.matches(heap.collect_sorted_keys()))
                fail("oracle: multiset desync");
            auto rep = heap.audit();
            if (!rep.ok) fail("audit: " + rep.violation);
            if ((idx + 1) % fullEvery == 0)
                res.checkpointFingerprints.push_back(heap.state_fingerprint());
        }
    }

    if (res.exitCode == 0) {
        auto rep = heap.audit();
        if (!rep.ok) fail("audit: " + rep.violation);
    }
    if (res.exitCode == 0 &&
        heap.len() != spec.n0 + heap.stats().inserts - heap.stats().deletes)
        fail("conservation: n != n0 + inserts - deletes");
    if (res.exitCode == 0 && opt.verify &&
        !oracle.matches(heap.collect_sorted_keys()))
        fail("oracle: multiset desync at end");
    if (res.exitCode == 0 && opt.verify &&
        heap.stats().size_bound_violations > 0)
        fail("invariant: bucket size bound violated");

    res.metrics = heap.stats();
    res.finalN = heap.len();
    res.fingerprint = heap.state_fingerprint();

    if (opt.metricsOut) {
        *opt.metricsOut << "record=run seed=" << spec.seed << " k=" << spec.k
                        << " n0=" << spec.n0 << " ops=" << spec.ops
                        << " mix=" << mix_name(spec.mix)
                        << " dist=" << dist_name(spec.dist)
                        << " qdist=" << qdist_name(spec.qdist)
                        << " budget=" << spec.budget
                        << " verify=" << (opt.verify ? 1 : 0)
                        << " exit=" << res.exitCode << " final_n=" << res.finalN
                        << " ";
        res.metrics.emit(*opt.metricsOut);
        if (!res.violation.empty()) *opt.metricsOut << " violation=\"" << res.violation << '"';
        *opt.metricsOut << '\n';
    }
    return res;
}

std::vector<SweepCell> sweep(const std::vector<u64>& n0s, const std::vector<u32>& ks,
                             u64 ops, u64 seed, u32 budget, std::ostream* out) {
    std::vector<SweepCell> cells;
    for (u64 n0 : n0s)
        for (u32 k : ks) cells.push_back({n0, k});

    i64 count = i64(cells.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (i64 i = 0; i < count; ++i) {
        SweepCell& c = cells[std::size_t(i)];
        WorkloadSpec spec;
        spec.seed = seed;
        spec.k = c.k;
        spec.n0 = c.n0;
        spec.ops = ops;
        spec.mix = OpMix::Balanced;
        spec.dist = KeyDist::UniformRandom;
        spec.qdist = QDist::Uniform;
        spec.budget = budget;
        RunResult r = run_workload(spec, RunOptions{});
        c.maxOpUnits = r.metrics.max_op_units;
        c.maxOpTree = r.metrics.max_op_tree;
        c.maxOpBucket = r.metrics.max_op_bucket;
        c.meanOpUnits = r.metrics.mean_op_units();
        c.p99OpUnits = r.metrics.p99_op_units();
        c.modeTransitions = r.metrics.mode_transitions;
        c.exitCode = r.exitCode;
    }

    if (out) {
        for (const SweepCell& c : cells) {
            *out << "record=cell n0=" << c.n0 << " k=" << c.k
                 << " max_op_units=" << c.maxOpUnits << " max_op_tree=" << c.maxOpTree
                 << " max_op_bucket=" << c.maxOpBucket
                 << " mean_op_units=" << c.meanOpUnits
                 << " p99_op_units=" << c.p99OpUnits
                 << " mode_transitions=" << c.modeTransitions
                 << " exit=" << c.exitCode << '\n';
        }
        if (n0s.size() >= 2) {
            u64 nMin = *std::min_element(n0s.begin(), n0s.end());
            u64 nMax = *std::max_element(n0s.begin(), n0s.end());
            for (u32 k : ks) {
                u64 a = 0, b = 0;
                for (const SweepCell& c : cells) {
                    if (c.k == k && c.n0 == nMin) a = c.maxOpUnits;
                    if (c.k == k && c.n0 == nMax) b = c.maxOpUnits;
                }
                *out << "record=nindep k=" << k << " n_min=" << nMin
                     << " n_max=" << nMax << " max_at_min=" << a
                     << " max_at_max=" << b << " ratio="
                     << (a ? double(b) / double(a) : 0.0) << '\n';
            }
        }
    }
    return cells;
}

}  // namespace ksel
