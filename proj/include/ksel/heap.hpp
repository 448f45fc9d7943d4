#pragma once

#include <array>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ksel/bucket.hpp"
#include "ksel/common.hpp"
#include "ksel/item_list.hpp"
#include "ksel/tree.hpp"

namespace ksel {

// Fixed scheme constants: splitting threshold (5/3)*zeta, merging threshold
// zeta, target bucket size zeta = n'/(6k), excess threshold (5/4)*zeta.
struct Config {
    u32 budget = 16;  // work units granted per requested operation (B >= 8)
    bool paranoid = false;  // per-op full audits + split partition checks
    u64 potentialSampleEvery = 256;
    // Test hook for the fault-injection check: scales the splitting
    // threshold; anything but 1 deliberately breaks the size bound.
    double faultSplitThresholdScale = 1.0;
};

enum class Mode { Exact, Sloppy };

struct PotentialReport {
    double p = 0, p1 = 0, p2 = 0;
};

struct AuditReport {
    bool ok = true;
    std::string violation;  // first failed invariant, empty when clean
};

// Flat run counters. All acceptance thresholds are expressed over these
// fields; emit() writes them as "key=value" pairs in a stable order.
struct Metrics {
    u64 ops = 0, inserts = 0, deletes = 0;
    // per-op work: bucket units + tree node touches
    u64 max_op_units = 0, max_op_tree = 0, max_op_bucket = 0;
    double sum_op_units = 0;
    std::array<u64, 4096> op_hist{};  // clamped histogram of per-op totals
    // rounds
    u64 rounds_completed = 0;
    double max_round_drift = 0;
    double max_round_ops_ratio = 0;  // round ops / n'
    u64 bucket_count_round_end_max = 0;
    u64 swollen_total = 0, swollen_max_round = 0;
    // splits
    u64 splits_completed = 0, splits_degenerate = 0;
    u64 split_ops_max = 0;
    u64 split_prop_a_violations = 0;
    u64 split_prop_b_violations = 0;
    u64 split_prop_c_violations = 0;
    double split_excess_max = 0;  // spawn excess over (5/4)*zeta at completion
    u64 fallback_activations = 0;
    // merges
    u64 merges_completed = 0, merge_aborts = 0, buckets_absorbed = 0;
    u64 buckets_emptied = 0;
    u64 scan_designations = 0;
    // size bound
    double size_zeta_ratio_max = 0;
    u64 size_bound_violations = 0;
    // potential
    double potential_over_nprime_max = 0;
    u64 potential_samples = 0;
    // misc
    u64 containment_probes = 0;
    u64 mode_transitions = 0, transition_units_max = 0;

    double mean_op_units() const { return ops ? sum_op_units / double(ops) : 0.0; }
    u64 p99_op_units() const;
    void emit(std::ostream& os) const;  // space-separated key=value pairs
};

// Scan state of the current bucket control round. zeta = n'/(6k) exactly.
struct RoundState {
    bool active = false;
    u64 nPrime = 0;
    Frac zeta;
    Bucket* cursor = nullptr;
    std::optional<MergeJob> merge;  // merge in progress at the cursor
    u64 scanSteps = 0, splitsCompleted = 0, opsThisRound = 0;
};

// Dynamic multiset over int64 keys supporting insert and delete-i (remove
// some item from the i-th of k uniform rank intervals) at worst-case cost
// logarithmic in k, independent of n. Items live in buckets at the leaves
// of a balanced tree; oversized buckets split and undersized runs merge,
// paced by a fixed per-operation work budget inside a left-to-right scan
// that repeats in rounds. Below 24k items the structure falls back to an
// exact-selection mode with one bucket per distinct key.
class SloppyHeap {
public:
    explicit SloppyHeap(u32 k, Config cfg = {});
    SloppyHeap(SloppyHeap&& o) noexcept;
    SloppyHeap& operator=(SloppyHeap&&) = delete;
    SloppyHeap(const SloppyHeap&) = delete;
    SloppyHeap& operator=(const SloppyHeap&) = delete;
    ~SloppyHeap();

    static SloppyHeap build(std::vector<Key> items, u32 k, Config cfg = {});

    void insert(Key key);

    // Removes and returns a key from the i-th quantile (1-based). Exact
    // mode removes exactly the midpoint-rank item.
    Key delete_i(u32 i);

    // 1-based rank interval of quantile i: [floor((i-1)n/k)+1, floor(i*n/k)].
    // Empty (hi < lo) when n < k.
    static std::pair<u64, u64> quantile_bounds(u64 n, u32 k, u32 i);

    u64 len() const { return n_; }
    u32 k() const { return k_; }
    Mode mode() const { return mode_; }
    const Metrics& stats() const { return metrics_; }
    const Config& config() const { return cfg_; }

    AuditReport audit() const;
    PotentialReport potential() const;

    // introspection for tests and the CLI
    u64 bucket_count() const { return tree_.leaf_count(); }
    u64 round_n_prime() const { return round_.nPrime; }
    double round_zeta() const { return round_.zeta.value(); }
    bool round_active() const { return round_.active; }
    u64 active_splits() const { return activeSplits_; }
    std::vector<u64> bucket_sizes() const;
    std::vector<Key> collect_sorted_keys() const;
    u64 state_fingerprint() const;  // deterministic digest of the structure

private:
    u32 k_;
    Config cfg_;
    Frac eps_;  // set-aside fraction, min(8/B, 1/2)
    BucketTree tree_;
    Bucket* head_ = nullptr;
    Bucket* tail_ = nullptr;
    u64 n_ = 0;
    Mode mode_ = Mode::Exact;
    RoundState round_;
    ItemPool pool_;
    Metrics metrics_;
    u64 activeSplits_ = 0;
    u64 bucketUnits_ = 0;  // running bucket-work counter (per-op deltas)
    u64 opBaseTree_ = 0, opBaseBucket_ = 0;
    u64 sincePotentialSample_ = 0;

    u64 regime_enter() const { return 24ull * k_; }
    u64 regime_exit() const { return 12ull * k_; }
    Frac split_threshold() const;  // (5/3)*zeta, fault scale applied
    Frac governing_zeta(const Bucket& b) const;

    void op_begin();
    void op_end();
    void note_size_increase(const Bucket& b);

    Bucket* new_bucket();
    void free_bucket(Bucket* b);
    void destroy_all();

    void build_structure(std::vector<Key>&& sorted);
    void rebuild(const char* why);

    void maybe_designate_after_insert(Bucket* b);
    bool above_split_threshold(const Bucket& b) const;

    void maintenance(Bucket* accessed);
    struct SplitAdvance {
        bool completed = false;
        bool degenerate = false;
        Bucket* rightSpawn = nullptr;
    };
    SplitAdvance advance_split(Bucket* b, u64 budget);
    void finalize_split(Bucket* b, SplitCompletion&& c, SplitAdvance& out);
    void scan_task(u64 budget);
    void advance_cursor(Bucket* to);
    void start_round();
    void finish_round();
    void remove_empty_bucket(Bucket* b);
    void abort_active_merge();
    void check_mode();

    friend struct HeapTestAccess;
};

// Potential per the analysis instrumentation: p1 = total size of buckets at
// or right of the cursor (0 when the cursor is exhausted), p2 = total excess
// of bucket sizes over (5/4)*zeta.
PotentialReport compute_potential(const std::vector<u64>& sizesInOrder,
                                  std::optional<std::size_t> cursorIndex,
                                  double zeta);

}  // namespace ksel
