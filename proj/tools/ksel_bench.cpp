// Per-operation latency of the heap against the brute-force sorted-vector
// reference, across a grid of n. The reference pays O(n) per operation; the
// heap's cost should stay flat in n and grow only with log k.

#include <chrono>
#include <cstdio>
#include <vector>

#include "ksel/oracle.hpp"
#include "ksel/workload.hpp"

using namespace ksel;
using Clock = std::chrono::steady_clock;

namespace {

double ns_per_op(u64 ops, Clock::time_point t0, Clock::time_point t1) {
    return double(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0)
                      .count()) /
           double(ops);
}

}  // namespace

int main(int argc, char** argv) {
    u32 k = argc > 1 ? u32(std::atoi(argv[1])) : 64;
    u64 ops = argc > 2 ? u64(std::atoll(argv[2])) : 200000;
    std::printf("k=%u ops=%llu\n", k, (unsigned long long)ops);
    std::printf("%12s %14s %14s %10s %12s\n", "n0", "heap ns/op", "brute ns/op",
                "speedup", "max units");

    for (u64 n0 : {u64(1) << 14, u64(1) << 17, u64(1) << 20}) {
        WorkloadSpec spec;
        spec.seed = 42;
        spec.k = k;
        spec.n0 = n0;
        spec.ops = ops;
        auto keys = initial_keys(spec);
        auto stream = generate(spec);

        SloppyHeap heap = SloppyHeap::build(keys, k);
        auto t0 = Clock::now();
        for (const Op& op : stream) {
            if (op.isInsert) {
                heap.insert(op.key);
            } else {
                (void)heap.delete_i(op.q);
            }
        }
        auto t1 = Clock::now();
        double heapNs = ns_per_op(ops, t0, t1);

        // brute force: same contract on a sorted vector, capped so huge n
        // does not take minutes
        u64 bruteOps = std::min<u64>(ops, 20000);
        QuantileOracle brute(k);
        for (Key key : keys) brute.o_insert(key);
        auto t2 = Clock::now();
        for (u64 i = 0; i < bruteOps; ++i) {
            const Op& op = stream[i];
            if (op.isInsert) {
                brute.o_insert(op.key);
            } else {
                auto [lo, hi] = SloppyHeap::quantile_bounds(brute.size(), k, op.q);
                (void)brute.o_check_and_delete(op.q, brute.data()[lo + (hi - lo) / 2 - 1]);
            }
        }
        auto t3 = Clock::now();
        double bruteNs = ns_per_op(bruteOps, t2, t3);

        std::printf("%12llu %14.1f %14.1f %9.1fx %12llu\n",
                    (unsigned long long)n0, heapNs, bruteNs, bruteNs / heapNs,
                    (unsigned long long)heap.stats().max_op_units);
    }
    return 0;
}
