#pragma once

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "ksel/common.hpp"
#include "ksel/heap.hpp"

namespace ksel {

// Brute-force sorted-multiset mirror of the heap. O(n) per operation by
// design; validates quantile membership of every deleted key and keeps the
// mirror synchronized for full multiset comparisons.
class QuantileOracle {
public:
    explicit QuantileOracle(u32 k) : k_(k) {}

    void o_insert(Key key) {
        data_.insert(std::upper_bound(data_.begin(), data_.end(), key), key);
    }

    struct CheckResult {
        bool ok = true;
        std::string violation;
    };

    // Validates that some occurrence of returnedKey has rank inside
    // quantile i of the pre-deletion multiset, then removes one occurrence
    // (an in-quantile one when available). With requireExact the key must
    // equal the exact midpoint-rank key.
    CheckResult o_check_and_delete(u32 i, Key returnedKey, bool requireExact = false) {
        u64 n = data_.size();
        auto [lo, hi] = SloppyHeap::quantile_bounds(n, k_, i);
        if (hi < lo) return report(i, n, lo, hi, returnedKey, "quantile empty");
        auto range = std::equal_range(data_.begin(), data_.end(), returnedKey);
        if (range.first == range.second)
            return report(i, n, lo, hi, returnedKey, "key not present");
        u64 firstRank = u64(range.first - data_.begin()) + 1;
        u64 lastRank = u64(range.second - data_.begin());
        if (requireExact) {
            u64 rstar = lo + (hi - lo) / 2;
            if (data_[rstar - 1] != returnedKey)
                return report(i, n, lo, hi, returnedKey, "not the exact rank-r* key");
            data_.erase(data_.begin() + i64(rstar - 1));
            return {};
        }
        if (lastRank < lo || firstRank > hi)
            return report(i, n, lo, hi, returnedKey, "no occurrence in quantile");
        u64 pick = std::max(firstRank, lo);  // prefer an in-quantile occurrence
        data_.erase(data_.begin() + i64(pick - 1));
        return {};
    }

    u64 size() const { return data_.size(); }
    const std::vector<Key>& data() const { return data_; }

    bool matches(const std::vector<Key>& sortedKeys) const {
        return data_ == sortedKeys;
    }

private:
    CheckResult report(u32 i, u64 n, u64 lo, u64 hi, Key key, const char* what) {
        std::ostringstream os;
        os << what << ": i=" << i << " n=" << n << " r_lo=" << lo << " r_hi=" << hi
           << " key=" << key;
        auto range = std::equal_range(data_.begin(), data_.end(), key);
        if (range.first != range.second) {
            os << " key_ranks=[" << (range.first - data_.begin()) + 1 << ","
               << (range.second - data_.begin()) << "]";
        }
        return {false, os.str()};
    }

    u32 k_;
    std::vector<Key> data_;
};

}  // namespace ksel
