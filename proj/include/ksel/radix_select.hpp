#pragma once

#include <array>
#include <vector>

#include "ksel/common.hpp"

namespace ksel {

// Exact rank selection over a snapshot of 64-bit keys, resumable under a
// per-call touch budget. Deterministic most-significant-byte partitioning:
// each level counts byte classes over the surviving segment and extracts
// the class containing the target rank. The caller supplies the level-0
// histogram (built while gathering the snapshot, one touch per element)
// together with the byte position chosen from a conservative [lo, hi] hull
// of the keys. Extraction of a level doubles as the count pass of the next
// byte down, so a level usually costs a single pass; a level whose class
// holds the whole segment descends a byte without extracting, and at byte 0
// the class already identifies the key. At most 8 count and 8 extraction
// passes can run, bounding touches by 16·n; dense consecutive keys cost
// ~2·n and well-spread keys ~1·n beyond the gather pass.
//
// Signed keys are mapped to unsigned order by flipping the sign bit.
class RankSelector {
public:
    static u64 bias(Key k) { return u64(k) ^ (u64(1) << 63); }
    static Key unbias(u64 b) { return Key(b ^ (u64(1) << 63)); }

    // Byte position (0..7) of the highest byte where a and b differ;
    // requires a != b.
    static int top_diff_byte(u64 a, u64 b) {
        u64 diff = a ^ b;
        int p = 7;
        while (((diff >> (8 * p)) & 0xffu) == 0) --p;
        return p;
    }

    // Takes ownership of the biased key snapshot plus the histogram of byte
    // `bytePos` over it. rank0 is 0-based.
    void reset(std::vector<u64>&& biasedKeys, u64 rank0, int bytePos,
               const std::array<u64, 256>& hist) {
        KSEL_ASSERT(!biasedKeys.empty() && rank0 < biasedKeys.size());
        seg_ = std::move(biasedKeys);
        rank_ = rank0;
        shift_ = 8 * bytePos;
        hist_ = hist;
        done_ = false;
        cur_ = 0;
        phase_ = Phase::Pick;
    }

    bool done() const { return done_; }
    Key result() const {
        KSEL_ASSERT(done_);
        return unbias(result_);
    }

    // Advances by at most `budget` element touches; returns touches used.
    u64 advance(u64 budget) {
        u64 used = 0;
        while (!done_ && used < budget) {
            switch (phase_) {
                case Phase::Pick:
                    pick_target();
                    ++used;  // flat charge for the 256-slot histogram walk
                    break;
                case Phase::Count:
                    while (cur_ < seg_.size() && used < budget) {
                        ++hist_[byte_of(seg_[cur_++], shift_)];
                        ++used;
                    }
                    if (cur_ == seg_.size()) phase_ = Phase::Pick;
                    break;
                case Phase::Extract:
                    while (cur_ < seg_.size() && used < budget) {
                        u64 v = seg_[cur_++];
                        ++used;
                        if (byte_of(v, shift_) == target_) {
                            keep_.push_back(v);
                            if (shift_ > 0) ++nextHist_[byte_of(v, shift_ - 8)];
                            if (v < keepMin_) keepMin_ = v;
                            if (v > keepMax_) keepMax_ = v;
                        }
                    }
                    if (cur_ == seg_.size() && used < budget) {
                        seg_.swap(keep_);
                        keep_.clear();
                        rank_ -= rankBefore_;
                        KSEL_ASSERT(!seg_.empty() && rank_ < seg_.size());
                        if (keepMin_ == keepMax_) {
                            finish(keepMin_);
                        } else {
                            int next = top_diff_byte(keepMin_, keepMax_);
                            if (8 * next == shift_ - 8) {
                                // the extract pass already counted this byte
                                shift_ -= 8;
                                hist_ = nextHist_;
                                phase_ = Phase::Pick;
                            } else {
                                shift_ = 8 * next;
                                begin_count();
                            }
                        }
                        ++used;
                    }
                    break;
            }
        }
        return used;
    }

private:
    enum class Phase { Pick, Count, Extract };

    static unsigned byte_of(u64 v, int shift) {
        return unsigned(v >> shift) & 0xffu;
    }

    void begin_count() {
        hist_.fill(0);
        cur_ = 0;
        phase_ = Phase::Count;
    }

    void finish(u64 v) {
        result_ = v;
        done_ = true;
        seg_.clear();
        seg_.shrink_to_fit();
        keep_.clear();
        keep_.shrink_to_fit();
    }

    void pick_target() {
        u64 acc = 0;
        target_ = 0;
        rankBefore_ = 0;
        for (unsigned v = 0; v < 256; ++v) {
            if (rank_ < acc + hist_[v]) {
                target_ = v;
                rankBefore_ = acc;
                break;
            }
            acc += hist_[v];
        }
        if (shift_ == 0) {
            // classes at byte 0 are exact values: every surviving key
            // shares all higher bytes
            finish((seg_[0] & ~u64(0xff)) | u64(target_));
            return;
        }
        if (hist_[target_] == seg_.size()) {
            // hull was loose: the whole segment shares this byte
            shift_ -= 8;
            begin_count();
            return;
        }
        cur_ = 0;
        keep_.clear();
        keep_.reserve(hist_[target_]);
        nextHist_.fill(0);
        keepMin_ = ~u64(0);
        keepMax_ = 0;
        phase_ = Phase::Extract;
    }

    std::vector<u64> seg_, keep_;
    std::array<u64, 256> hist_{}, nextHist_{};
    u64 rank_ = 0, rankBefore_ = 0;
    u64 keepMin_ = 0, keepMax_ = 0;
    u64 result_ = 0;
    int shift_ = 0;
    unsigned target_ = 0;
    std::size_t cur_ = 0;
    Phase phase_ = Phase::Pick;
    bool done_ = true;
};

}  // namespace ksel
