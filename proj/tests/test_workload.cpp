#include <doctest.h>

#include <cstdlib>
#include <sstream>
#include <vector>

#include "ksel/oracle.hpp"
#include "ksel/workload.hpp"

using namespace ksel;

TEST_CASE("generator is deterministic per seed") {
    WorkloadSpec spec;
    spec.seed = 7;
    spec.k = 8;
    spec.n0 = 500;
    spec.ops = 5000;
    auto a = generate(spec);
    auto b = generate(spec);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].isInsert == b[i].isInsert);
        CHECK(a[i].key == b[i].key);
        CHECK(a[i].q == b[i].q);
    }
    CHECK(initial_keys(spec) == initial_keys(spec));
    spec.seed = 8;
    auto c = generate(spec);
    bool differs = c.size() != a.size();
    for (std::size_t i = 0; !differs && i < a.size(); ++i)
        differs = a[i].isInsert != c[i].isInsert || a[i].key != c[i].key;
    CHECK(differs);
}

TEST_CASE("insert-only from empty never emits deletes") {
    WorkloadSpec spec;
    spec.seed = 3;
    spec.k = 8;
    spec.n0 = 0;
    spec.ops = 2000;
    spec.mix = OpMix::InsertOnly;
    for (const Op& op : generate(spec)) CHECK(op.isInsert);
}

TEST_CASE("delete ops are never issued against an undersized multiset") {
    WorkloadSpec spec;
    spec.seed = 11;
    spec.k = 32;
    spec.n0 = 10;  // below k: deletes must be converted until n >= k
    spec.ops = 3000;
    spec.mix = OpMix::DeleteHeavy;
    u64 n = spec.n0;
    for (const Op& op : generate(spec)) {
        if (!op.isInsert) {
            CHECK(n >= spec.k);
            --n;
        } else {
            ++n;
        }
    }
}

TEST_CASE("balanced mix keeps n near the initial size") {
    WorkloadSpec spec;
    spec.seed = 13;
    spec.k = 8;
    spec.n0 = 100000;
    spec.ops = 100000;
    i64 n = i64(spec.n0);
    for (const Op& op : generate(spec)) n += op.isInsert ? 1 : -1;
    CHECK(std::llabs(n - i64(spec.n0)) <= i64(spec.n0) / 10);
}

TEST_CASE("identical runs produce identical state fingerprints") {
    WorkloadSpec spec;
    spec.seed = 21;
    spec.k = 16;
    spec.n0 = 8000;
    spec.ops = 8000;
    RunOptions opt;
    opt.verify = true;
    RunResult a = run_workload(spec, opt);
    RunResult b = run_workload(spec, opt);
    CHECK(a.exitCode == 0);
    CHECK(a.fingerprint == b.fingerprint);
    CHECK(a.checkpointFingerprints == b.checkpointFingerprints);
    CHECK(a.finalN == b.finalN);
}

TEST_CASE("verified conformance across distributions and mixes") {
    for (KeyDist dist : {KeyDist::UniformRandom, KeyDist::Ascending,
                         KeyDist::Descending, KeyDist::Clustered}) {
        for (OpMix mix : {OpMix::Balanced, OpMix::InsertHeavy, OpMix::DeleteHeavy}) {
            WorkloadSpec spec;
            spec.seed = 17;
            spec.k = 16;
            spec.n0 = 6000;
            spec.ops = 6000;
            spec.dist = dist;
            spec.mix = mix;
            RunOptions opt;
            opt.verify = true;
            RunResult r = run_workload(spec, opt);
            INFO(dist_name(dist) << "/" << mix_name(mix) << ": " << r.violation);
            CHECK(r.exitCode == 0);
            CHECK(r.metrics.fallback_activations == 0);
        }
    }
}

TEST_CASE("qdist variants stay oracle-clean") {
    for (QDist q : {QDist::Uniform, QDist::Fixed, QDist::FrontLoaded}) {
        WorkloadSpec spec;
        spec.seed = 19;
        spec.k = 8;
        spec.n0 = 4000;
        spec.ops = 6000;
        spec.qdist = q;
        spec.fixedIndex = 3;
        RunOptions opt;
        opt.verify = true;
        RunResult r = run_workload(spec, opt);
        INFO(qdist_name(q) << ": " << r.violation);
        CHECK(r.exitCode == 0);
    }
}

TEST_CASE("fault injection: a doubled split threshold is caught by verify") {
    WorkloadSpec spec;
    spec.seed = 2;
    spec.k = 16;
    spec.n0 = 20000;
    spec.ops = 20000;
    spec.dist = KeyDist::Ascending;  // drives buckets into the threshold
    RunOptions opt;
    opt.verify = true;
    opt.faultSplitThresholdScale = 2.0;
    RunResult r = run_workload(spec, opt);
    CHECK(r.exitCode != 0);
    INFO(r.violation);
    bool sizeRelated = r.violation.find("size") != std::string::npos ||
                       r.violation.find("zeta") != std::string::npos;
    CHECK(sizeRelated);
}

TEST_CASE("metrics records carry the documented fields") {
    WorkloadSpec spec;
    spec.seed = 1;
    spec.k = 8;
    spec.n0 = 2000;
    spec.ops = 2000;
    std::ostringstream os;
    RunOptions opt;
    opt.verify = true;
    opt.metricsOut = &os;
    RunResult r = run_workload(spec, opt);
    CHECK(r.exitCode == 0);
    std::string line = os.str();
    for (const char* field :
         {"record=run", "seed=1", "k=8", "n0=2000", "mix=balanced",
          "dist=uniform", "qdist=uniform", "budget=16", "exit=0", "ops=",
          "max_op_units=", "rounds=", "size_zeta_ratio_max="}) {
        INFO(field);
        CHECK(line.find(field) != std::string::npos);
    }
    CHECK(line.back() == '\n');
}

TEST_CASE("oracle: membership, duplicate handling and exact-rank checks") {
    QuantileOracle o(4);
    for (int i = 1; i <= 100; ++i) o.o_insert(i);
    CHECK(o.o_check_and_delete(2, 30).ok);     // rank 30 in [26,50]
    CHECK_FALSE(o.o_check_and_delete(2, 90).ok);  // rank 90 outside
    QuantileOracle dup(2);
    for (int i = 0; i < 5; ++i) dup.o_insert(10);
    for (int i = 0; i < 5; ++i) dup.o_insert(20);
    CHECK(dup.o_check_and_delete(1, 10).ok);  // ranks [1,5] hold the 10s
    CHECK(dup.size() == 9);
    QuantileOracle ex(10);
    for (int i = 1; i <= 10; ++i) ex.o_insert(i);
    CHECK(ex.o_check_and_delete(4, 4, true).ok);
    CHECK_FALSE(ex.o_check_and_delete(4, 9, true).ok);
}

TEST_CASE("fuzz: random specs stay oracle-clean under per-op audits") {
    Rng meta(0xfeedULL);
    const KeyDist dists[] = {KeyDist::UniformRandom, KeyDist::Ascending,
                             KeyDist::Descending, KeyDist::Clustered};
    const OpMix mixes[] = {OpMix::InsertOnly, OpMix::DeleteOnly, OpMix::Balanced,
                           OpMix::InsertHeavy, OpMix::DeleteHeavy};
    const QDist qdists[] = {QDist::Uniform, QDist::Fixed, QDist::FrontLoaded};
    u64 emptied = 0, scanDesignated = 0, aborted = 0, probed = 0;
    for (int trial = 0; trial < 500; ++trial) {
        WorkloadSpec s;
        s.seed = meta.next();
        s.k = 2 + u32(meta.below(31));
        s.n0 = meta.below(900);
        s.ops = 200 + meta.below(700);
        s.dist = dists[meta.below(4)];
        s.mix = mixes[meta.below(5)];
        s.qdist = qdists[meta.below(3)];
        s.fixedIndex = 1 + u32(meta.below(s.k));
        s.budget = (meta.below(3) == 0) ? 8 + u32(meta.below(56)) : 16;
        RunOptions opt;
        opt.verify = true;
        opt.paranoid = true;  // full audit after every operation
        RunResult r = run_workload(s, opt);
        INFO("trial " << trial << " seed=" << s.seed << " k=" << s.k
                      << " n0=" << s.n0 << " mix=" << mix_name(s.mix) << " dist="
                      << dist_name(s.dist) << " -> " << r.violation);
        REQUIRE(r.exitCode == 0);
        emptied += r.metrics.buckets_emptied;
        scanDesignated += r.metrics.scan_designations;
        aborted += r.metrics.merge_aborts;
        probed += r.metrics.containment_probes;
    }
    // the fuzz must actually reach the rare structural paths
    MESSAGE("emptied=" << emptied << " scan_designations=" << scanDesignated
                       << " merge_aborts=" << aborted << " probes=" << probed);
    CHECK(emptied > 0);
    CHECK(scanDesignated > 0);
}

TEST_CASE("sweep emits one record per cell plus ratio rows") {
    std::ostringstream os;
    auto cells = sweep({4000, 8000}, {4, 8}, 4000, 1, 16, &os);
    CHECK(cells.size() == 4);
    for (const auto& c : cells) CHECK(c.exitCode == 0);
    std::string out = os.str();
    CHECK(out.find("record=cell n0=4000 k=4") != std::string::npos);
    CHECK(out.find("record=cell n0=8000 k=8") != std::string::npos);
    CHECK(out.find("record=nindep k=4") != std::string::npos);
    CHECK(out.find("ratio=") != std::string::npos);
}
