#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "ksel/common.hpp"
#include "ksel/item_list.hpp"
#include "ksel/radix_select.hpp"

namespace ksel {

struct TreeNode;
struct Bucket;

enum class BucketState { Normal, Splitting, Absorbing };

// Resumable split of one bucket. Phases:
//   Reserve        one routing sweep over the designated items: every
//                  fourth goes to the frozen list (its key copied into the
//                  selection snapshot, byte class counted), the rest fund
//                  the set-aside list, which also absorbs mid-split inserts
//                  and serves mid-split deletes. The interleaving keeps the
//                  frozen list a systematic sample, so the pivot stays
//                  near the bucket median even when arrival order and key
//                  order correlate.
//   SelectPivot    resumable exact rank-ceil(f/2) selection over the
//                  snapshot
//   Partition      move frozen items into leftPart/rightPart by pivot
//   DrainSetAside  partition whatever is left in the set-aside list
// Every phase advances one item/element per work unit.
struct SplitJob {
    enum class Phase { Reserve, SelectPivot, Partition, DrainSetAside };

    u64 m0 = 0;               // bucket size at designation
    Frac originZeta;          // zeta in force when designated
    Frac eps;                 // set-aside fraction
    u64 setAsideTarget = 0;   // ceil(eps * m0)
    u64 routed = 0;           // items routed by the Reserve sweep

    ItemList pending;  // designated items not yet routed
    ItemList setAside, frozen, leftPart, rightPart;
    u64 setAsideOriginals = 0;  // routed items still at the head of setAside

    // selection snapshot, built during the Reserve sweep (byte position
    // chosen from the bucket's key hull)
    std::vector<u64> gathered;
    std::array<u64, 256> gatherHist{};
    int gatherByte = 0;
    bool selectorPrimed = false;
    // non-destructive re-gather, used only after a deletion fallback stole
    // a frozen item mid-selection
    ItemNode* gatherCursor = nullptr;
    bool gatherStarted = false;
    RankSelector selector;
    Key pivot = 0;
    bool havePivot = false;
    bool selectionDirty = false;

    u64 partitioned = 0;  // frozen items partitioned so far

    // accounting
    u64 unitsSpent = 0;
    u64 opsTouched = 0;
    u64 peakSize = 0;
    u64 insertsDuringSplit = 0;
    u64 insertsToLeft = 0, insertsToRight = 0;

    Phase phase = Phase::Reserve;
};

struct Bucket {
    ItemList items;  // used while Normal; empty while a SplitJob is live
    u64 size = 0;    // total item count across items and any job lists
    Bucket* prev = nullptr;
    Bucket* next = nullptr;
    TreeNode* leaf = nullptr;
    std::unique_ptr<SplitJob> job;
    bool absorbing = false;  // merge target with an active MergeJob
    // Conservative key hull: every item key lies in [hullLo, hullHi].
    // Inserts widen it, deletions never invalidate it, splits and merges
    // recompute it in O(1). Seeds the selection's byte position.
    Key hullLo = 0, hullHi = 0;
    // After a degenerate (single-sided) split the bucket is exempt from
    // re-designation until its size changes.
    std::optional<u64> degenerateGuard;

    void hull_add(Key k) {
        if (k < hullLo) hullLo = k;
        if (k > hullHi) hullHi = k;
    }

    BucketState state() const {
        if (job) return BucketState::Splitting;
        if (absorbing) return BucketState::Absorbing;
        return BucketState::Normal;
    }
    bool splitting() const { return job != nullptr; }

    template <typename F>
    void for_each_key(F&& f) const {
        items.for_each(f);
        if (job) {
            job->pending.for_each(f);
            job->setAside.for_each(f);
            job->frozen.for_each(f);
            job->leftPart.for_each(f);
            job->rightPart.for_each(f);
        }
    }
};

enum class SplitStatus { Progress, Complete };

// Delivered once per job, when DrainSetAside finishes. The caller owns the
// two item lists and performs the tree surgery (or the degenerate restore).
struct SplitCompletion {
    Key pivot = 0;
    ItemList left, right;
    bool degenerate = false;  // one side empty (indistinct keys)
    u64 m0 = 0;
    Frac originZeta;
    Frac eps;
    u64 unitsTotal = 0;
    u64 opsTouched = 0;
    u64 peakSize = 0;
    u64 insertsDuringSplit = 0;
    u64 insertsToLeft = 0, insertsToRight = 0;
};

// Creates the SplitJob (O(1)); the set-aside move runs under budget in the
// Reserve phase. Returns false if the bucket is already splitting.
// pre: state Normal and size above the splitting threshold (asserted).
bool designate_split(Bucket& b, Frac zeta, Frac eps);

// Advances the job by at most `budget` work units. unitsUsed reports the
// actual charge. Returns Complete exactly once per job and fills `out`.
SplitStatus split_work(Bucket& b, u64 budget, u64& unitsUsed, SplitCompletion& out);

// Normal: append to items. Splitting: append to the set-aside list.
void serve_insert(Bucket& b, ItemNode* n);

// Normal: pop the items head. Splitting: pop the set-aside head, falling
// back to pending, then frozen, then leftPart, then rightPart. A fallback
// activation is reported through `fallbacks` (never expected to fire at
// default pacing).
ItemNode* serve_delete_any(Bucket& b, u64* fallbacks);

// Maximal run [start, start->next, ...] of consecutive Normal buckets whose
// combined size stays <= zeta, stopping early at any non-Normal bucket.
// A run of length 1 means no merge is indicated.
std::vector<Bucket*> merge_run_extent(Bucket* start, Frac zeta);

enum class MergeStatus { Progress, Complete, Aborted };

// Precomputed-run merge per the module contract: absorbs up to `budget`
// buckets from `run` (which excludes the target) into `target`, calling
// `removeLeaf` for each before unlinking it from the bucket list. Aborts
// cleanly if a run member is no longer Normal.
struct MergeJob {
    Bucket* target = nullptr;
    Frac threshold;            // zeta frozen at job start
    std::vector<Bucket*> run;  // remaining suffix, in order (precomputed mode)
    std::size_t nextIdx = 0;
    u64 absorbed = 0;
};

MergeStatus merge_work(MergeJob& job, u64 budget, u64& unitsUsed,
                       const std::function<void(Bucket*)>& removeLeaf);

// Splices `victim`'s items into `target` and transfers its size. The caller
// handles tree surgery and list unlinking. victim must be Normal.
void absorb_bucket(Bucket& target, Bucket& victim);

// Unlinks b from the doubly linked bucket chain (list head/tail are the
// caller's).
void unlink_bucket(Bucket& b, Bucket*& head, Bucket*& tail);
void link_after(Bucket& existing, Bucket& fresh, Bucket*& tail);

}  // namespace ksel
