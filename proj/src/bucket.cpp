#include "ksel/bucket.hpp"

namespace ksel {

bool designate_split(Bucket& b, Frac zeta, Frac eps) {
    if (b.job) return false;  // idempotence guard
    KSEL_ASSERT(b.state() == BucketState::Normal);
    // splitting threshold (5/3)*zeta
    KSEL_ASSERT(count_gt(b.size, Frac{5 * zeta.num, 3 * zeta.den}));
    auto job = std::make_unique<SplitJob>();
    job->m0 = b.size;
    job->originZeta = zeta;
    job->eps = eps;
    job->setAsideTarget = ceil_mul(b.size, eps);
    job->pending = std::move(b.items);
    job->peakSize = b.size;
    job->gathered.reserve(std::size_t(b.size - job->setAsideTarget));
    job->gatherByte =
        (b.hullLo == b.hullHi)
            ? 0
            : RankSelector::top_diff_byte(RankSelector::bias(b.hullLo),
                                          RankSelector::bias(b.hullHi));
    b.degenerateGuard.reset();
    b.job = std::move(job);
    return true;
}

static void finish_selection_if_ready(SplitJob& j) {
    if (!j.selector.done()) return;
    j.pivot = j.selector.result();
    j.havePivot = true;
    j.phase = SplitJob::Phase::Partition;
}

SplitStatus split_work(Bucket& b, u64 budget, u64& unitsUsed, SplitCompletion& out) {
    KSEL_ASSERT(b.job);
    KSEL_ASSERT(budget >= 1);
    SplitJob& j = *b.job;
    u64 used = 0;

    while (used < budget) {
        switch (j.phase) {
            case SplitJob::Phase::Reserve: {
                if (j.pending.empty()) {
                    j.phase = SplitJob::Phase::SelectPivot;
                    break;
                }
                ItemNode* n = j.pending.pop_front();
                // every fourth item is frozen for selection, the rest fund
                // the set-aside list; keep freezing once the funding target
                // is met (late designation edge)
                bool freeze = (j.routed % 4 == 3) || j.setAsideOriginals >= j.setAsideTarget;
                ++j.routed;
                if (freeze) {
                    u64 v = RankSelector::bias(n->key);
                    j.gathered.push_back(v);
                    ++j.gatherHist[(v >> (8 * j.gatherByte)) & 0xffu];
                    j.frozen.push_back(n);
                } else {
                    j.setAside.push_back(n);
                    ++j.setAsideOriginals;
                }
                ++used;
                break;
            }
            case SplitJob::Phase::SelectPivot: {
                if (j.selectionDirty) {
                    // a fallback deletion stole a frozen item; the snapshot
                    // (and any gather cursor into the list) is invalid
                    j.selectionDirty = false;
                    j.selectorPrimed = false;
                    j.gatherStarted = false;
                    j.gathered.clear();
                    break;
                }
                if (j.frozen.empty()) {
                    // Deletion fallback emptied the frozen list; nothing to
                    // select over. Degenerate completion below.
                    j.havePivot = false;
                    j.phase = SplitJob::Phase::Partition;
                    break;
                }
                if (b.hullLo == b.hullHi) {
                    // every key equals the hull; the median is immediate
                    j.pivot = b.hullLo;
                    j.havePivot = true;
                    j.phase = SplitJob::Phase::Partition;
                    ++used;
                    break;
                }
                if (j.selectorPrimed) {
                    used += j.selector.advance(budget - used);
                    finish_selection_if_ready(j);
                    break;
                }
                auto prime = [&] {
                    u64 f = j.gathered.size();
                    j.selector.reset(std::move(j.gathered), (f - 1) / 2,
                                     j.gatherByte, j.gatherHist);
                    j.gathered = {};
                    j.selectorPrimed = true;
                    j.gatherStarted = false;
                    finish_selection_if_ready(j);
                };
                if (!j.gatherStarted && j.gathered.size() == j.frozen.size()) {
                    prime();  // snapshot built by the Reserve sweep
                    break;
                }
                // re-gather non-destructively
                if (!j.gatherStarted) {
                    j.gathered.clear();
                    j.gathered.reserve(j.frozen.size());
                    j.gatherHist.fill(0);
                    j.gatherByte = RankSelector::top_diff_byte(
                        RankSelector::bias(b.hullLo), RankSelector::bias(b.hullHi));
                    j.gatherCursor = j.frozen.front();
                    j.gatherStarted = true;
                }
                {
                    u64 v = RankSelector::bias(j.gatherCursor->key);
                    j.gathered.push_back(v);
                    ++j.gatherHist[(v >> (8 * j.gatherByte)) & 0xffu];
                    j.gatherCursor = j.gatherCursor->next;
                    ++used;
                    if (!j.gatherCursor) prime();
                }
                break;
            }
            case SplitJob::Phase::Partition: {
                if (j.frozen.empty()) {
                    j.phase = SplitJob::Phase::DrainSetAside;
                    break;
                }
                KSEL_ASSERT(j.havePivot);
                ItemNode* n = j.frozen.pop_front();
                (n->key <= j.pivot ? j.leftPart : j.rightPart).push_back(n);
                ++j.partitioned;
                ++used;
                break;
            }
            case SplitJob::Phase::DrainSetAside: {
                if (j.setAside.empty()) {
                    // Complete.
                    out.pivot = j.havePivot ? j.pivot : 0;
                    out.left = std::move(j.leftPart);
                    out.right = std::move(j.rightPart);
                    out.degenerate =
                        !j.havePivot || out.left.empty() || out.right.empty();
                    out.m0 = j.m0;
                    out.originZeta = j.originZeta;
                    out.eps = j.eps;
                    out.opsTouched = j.opsTouched;
                    out.peakSize = j.peakSize;
                    out.insertsDuringSplit = j.insertsDuringSplit;
                    out.insertsToLeft = j.insertsToLeft;
                    out.insertsToRight = j.insertsToRight;
                    j.unitsSpent += used;
                    out.unitsTotal = j.unitsSpent;
                    unitsUsed = used;
                    b.job.reset();
                    return SplitStatus::Complete;
                }
                bool original = j.setAsideOriginals > 0;
                if (original) --j.setAsideOriginals;
                ItemNode* n = j.setAside.pop_front();
                bool toLeft = j.havePivot ? (n->key <= j.pivot) : true;
                (toLeft ? j.leftPart : j.rightPart).push_back(n);
                if (!original) (toLeft ? j.insertsToLeft : j.insertsToRight)++;
                ++used;
                break;
            }
        }
    }
    j.unitsSpent += used;
    unitsUsed = used;
    return SplitStatus::Progress;
}

void serve_insert(Bucket& b, ItemNode* n) {
    if (b.size == 0) {
        b.hullLo = b.hullHi = n->key;
    } else {
        b.hull_add(n->key);
    }
    if (b.job) {
        b.job->setAside.push_back(n);
        ++b.job->insertsDuringSplit;
    } else {
        b.items.push_back(n);
    }
    ++b.size;
    b.degenerateGuard.reset();
    if (b.job && b.size > b.job->peakSize) b.job->peakSize = b.size;
}

ItemNode* serve_delete_any(Bucket& b, u64* fallbacks) {
    KSEL_ASSERT(b.size >= 1);
    ItemNode* n = nullptr;
    if (!b.job) {
        n = b.items.pop_front();
    } else {
        SplitJob& j = *b.job;
        if (!j.setAside.empty()) {
            if (j.setAsideOriginals > 0) --j.setAsideOriginals;
            n = j.setAside.pop_front();
        } else {
            if (fallbacks) ++*fallbacks;
            if (!j.pending.empty()) {
                n = j.pending.pop_front();
            } else if (!j.frozen.empty()) {
                n = j.frozen.pop_front();
                if (j.phase == SplitJob::Phase::Reserve ||
                    j.phase == SplitJob::Phase::SelectPivot)
                    j.selectionDirty = true;
            } else if (!j.leftPart.empty()) {
                n = j.leftPart.pop_front();
            } else {
                n = j.rightPart.pop_front();
            }
        }
    }
    --b.size;
    b.degenerateGuard.reset();
    return n;
}

std::vector<Bucket*> merge_run_extent(Bucket* start, Frac zeta) {
    KSEL_ASSERT(start && start->state() == BucketState::Normal);
    std::vector<Bucket*> run{start};
    u64 combined = start->size;
    if (count_gt(combined, zeta)) return run;
    for (Bucket* b = start->next; b; b = b->next) {
        if (b->state() != BucketState::Normal) break;
        if (count_gt(combined + b->size, zeta)) break;
        combined += b->size;
        run.push_back(b);
    }
    return run;
}

void absorb_bucket(Bucket& target, Bucket& victim) {
    KSEL_ASSERT(victim.state() == BucketState::Normal);
    target.items.splice_back(victim.items);
    target.size += victim.size;
    target.hull_add(victim.hullLo);
    target.hull_add(victim.hullHi);
    victim.size = 0;
    target.degenerateGuard.reset();
}

MergeStatus merge_work(MergeJob& job, u64 budget, u64& unitsUsed,
                       const std::function<void(Bucket*)>& removeLeaf) {
    u64 used = 0;
    while (used < budget && job.nextIdx < job.run.size()) {
        Bucket* victim = job.run[job.nextIdx];
        if (victim->state() != BucketState::Normal) {
            unitsUsed = used;
            return MergeStatus::Aborted;
        }
        absorb_bucket(*job.target, *victim);
        removeLeaf(victim);
        ++job.nextIdx;
        ++job.absorbed;
        ++used;
    }
    unitsUsed = used;
    return job.nextIdx == job.run.size() ? MergeStatus::Complete : MergeStatus::Progress;
}

void unlink_bucket(Bucket& b, Bucket*& head, Bucket*& tail) {
    if (b.prev) {
        b.prev->next = b.next;
    } else {
        head = b.next;
    }
    if (b.next) {
        b.next->prev = b.prev;
    } else {
        tail = b.prev;
    }
    b.prev = b.next = nullptr;
}

void link_after(Bucket& existing, Bucket& fresh, Bucket*& tail) {
    fresh.prev = &existing;
    fresh.next = existing.next;
    if (existing.next) {
        existing.next->prev = &fresh;
    } else {
        tail = &fresh;
    }
    existing.next = &fresh;
}

}  // namespace ksel
