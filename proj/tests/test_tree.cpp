#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "ksel/bucket.hpp"
#include "ksel/tree.hpp"
#include "ksel/workload.hpp"

using namespace ksel;

namespace {

struct Fixture {
    ItemPool pool;
    BucketTree tree;
    Bucket* head = nullptr;
    Bucket* tail = nullptr;
    std::vector<std::unique_ptr<Bucket>> owned;

    Bucket* make(const std::vector<Key>& keys) {
        auto b = std::make_unique<Bucket>();
        for (Key k : keys) b->items.push_back(pool.alloc(k));
        b->size = keys.size();
        b->hullLo = *std::min_element(keys.begin(), keys.end());
        b->hullHi = *std::max_element(keys.begin(), keys.end());
        owned.push_back(std::move(b));
        return owned.back().get();
    }

    // bucketKeys must be globally sorted bucket-to-bucket
    void build(const std::vector<std::vector<Key>>& bucketKeys) {
        std::vector<std::pair<Bucket*, Key>> ordered;
        for (const auto& keys : bucketKeys) {
            Bucket* b = make(keys);
            if (tail) {
                tail->next = b;
                b->prev = tail;
                tail = b;
            } else {
                head = tail = b;
            }
            ordered.emplace_back(b, keys.back());
        }
        tree.build(ordered);
    }

    std::vector<u64> leaf_sizes() const {
        std::vector<u64> v;
        for (Bucket* b = head; b; b = b->next) v.push_back(b->size);
        return v;
    }

    void audit_ok() {
        auto msg = tree.audit(head);
        INFO(msg);
        CHECK(msg.empty());
    }

    // splits bucket b at its median key; returns false when all keys equal
    bool split_at_median(Bucket* b, Rng& rng) {
        std::vector<Key> keys;
        b->items.for_each([&](Key k) { keys.push_back(k); });
        std::sort(keys.begin(), keys.end());
        Key pivot = keys[keys.size() / 2];
        if (pivot == keys.back()) pivot = keys[rng.below(keys.size())];
        if (pivot == keys.back()) return false;  // indistinct keys
        Bucket* r = owned.emplace_back(std::make_unique<Bucket>()).get();
        ItemList left, right;
        while (!b->items.empty()) {
            ItemNode* n = b->items.pop_front();
            (n->key <= pivot ? left : right).push_back(n);
        }
        r->items = std::move(right);
        r->size = r->items.size();
        r->hullLo = pivot + 1;
        r->hullHi = b->hullHi;
        b->items = std::move(left);
        b->size = b->items.size();
        b->hullHi = pivot;
        link_after(*b, *r, tail);
        tree.split_leaf(b, pivot, b, r);
        return true;
    }
};

}  // namespace

TEST_CASE("build: single bucket of 5 items") {
    Fixture f;
    f.build({{1, 2, 3, 4, 5}});
    CHECK(f.tree.total_size() == 5);
    CHECK(f.tree.leaf_count() == 1);
    CHECK(f.tree.height() == 0);
    f.audit_ok();
}

TEST_CASE("build: bucket sizes [3,5,2] give root size 10 in order") {
    Fixture f;
    f.build({{1, 2, 3}, {4, 5, 6, 7, 8}, {9, 10}});
    CHECK(f.tree.total_size() == 10);
    CHECK(f.leaf_sizes() == std::vector<u64>{3, 5, 2});
    f.audit_ok();
}

TEST_CASE("build: empty sequence is rejected") {
    BucketTree t;
    CHECK_THROWS_AS(t.build({}), EmptyBuild);
}

TEST_CASE("build: 60 buckets of 20 stay within the height bound") {
    Fixture f;
    std::vector<std::vector<Key>> bks;
    Key next = 0;
    for (int i = 0; i < 60; ++i) {
        std::vector<Key> keys;
        for (int j = 0; j < 20; ++j) keys.push_back(next++);
        bks.push_back(keys);
    }
    f.build(bks);
    CHECK(f.tree.total_size() == 1200);
    CHECK(f.tree.leaf_count() == 60);
    CHECK(double(f.tree.height()) <= 1.45 * std::log2(60.0) + 2.5);
    f.audit_ok();
}

TEST_CASE("find_by_key: ties route left at the separator") {
    Fixture f;
    f.build({{5, 10}, {11, 20}});
    CHECK(f.tree.find_by_key(10) == f.head);
    CHECK(f.tree.find_by_key(11) == f.head->next);
    CHECK(f.tree.find_by_key(-100) == f.head);
    CHECK(f.tree.find_by_key(1000) == f.head->next);
}

TEST_CASE("find_by_key agrees with a linear separator scan") {
    Fixture f;
    std::vector<std::vector<Key>> bks;
    Key next = 0;
    Rng rng(7);
    std::vector<Key> maxKeys;
    for (int i = 0; i < 64; ++i) {
        std::vector<Key> keys;
        u64 len = 1 + rng.below(8);
        for (u64 j = 0; j < len; ++j) keys.push_back(next), next += 1 + Key(rng.below(3));
        bks.push_back(keys);
        maxKeys.push_back(keys.back());
    }
    f.build(bks);
    for (int t = 0; t < 1000; ++t) {
        Key q = Key(rng.below(u64(next + 10)));
        // oracle: first bucket whose max key >= q, else the last bucket
        std::size_t idx = 0;
        while (idx + 1 < maxKeys.size() && maxKeys[idx] < q) ++idx;
        Bucket* expect = f.head;
        for (std::size_t i = 0; i < idx; ++i) expect = expect->next;
        CHECK(f.tree.find_by_key(q) == expect);
    }
}

TEST_CASE("find_by_rank: prefix sums over [3,5,2]") {
    Fixture f;
    f.build({{1, 2, 3}, {4, 5, 6, 7, 8}, {9, 10}});
    auto h1 = f.tree.find_by_rank(1);
    CHECK(h1.bucket == f.head);
    CHECK(h1.start_rank == 1);
    auto h4 = f.tree.find_by_rank(4);
    CHECK(h4.bucket == f.head->next);
    CHECK(h4.start_rank == 4);
    auto h10 = f.tree.find_by_rank(10);
    CHECK(h10.bucket == f.tail);
    CHECK(h10.start_rank == 9);
    CHECK_THROWS_AS(f.tree.find_by_rank(0), RankOutOfRange);
    CHECK_THROWS_AS(f.tree.find_by_rank(11), RankOutOfRange);
    CHECK(f.tree.start_rank_of(f.tail) == 9);
}

TEST_CASE("adjust_size propagates and survives a random audit") {
    Fixture f;
    f.build({{1, 2, 3}, {4, 5, 6, 7, 8}, {9, 10}});
    Bucket* mid = f.head->next;
    mid->items.push_back(f.pool.alloc(5));
    ++mid->size;
    f.tree.adjust_size(mid, +1);
    CHECK(f.tree.total_size() == 11);
    f.pool.release(mid->items.pop_front());
    --mid->size;
    f.tree.adjust_size(mid, -1);
    CHECK(f.tree.total_size() == 10);
    f.audit_ok();

    // 10^4 random +-1 adjustments, then full bottom-up recompute via audit
    Rng rng(3);
    std::vector<Bucket*> bs{f.head, f.head->next, f.tail};
    for (int i = 0; i < 10000; ++i) {
        Bucket* b = bs[rng.below(3)];
        if (rng.below(2) == 0 || b->size <= 1) {
            b->items.push_back(f.pool.alloc(b->hullLo));
            ++b->size;
            f.tree.adjust_size(b, +1);
        } else {
            f.pool.release(b->items.pop_front());
            --b->size;
            f.tree.adjust_size(b, -1);
        }
    }
    f.audit_ok();
}

TEST_CASE("split_leaf: single leaf becomes an internal with two leaves") {
    Fixture f;
    f.build({{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}});
    Rng rng(1);
    CHECK(f.split_at_median(f.head, rng));
    CHECK(f.tree.leaf_count() == 2);
    CHECK(f.tree.height() == 1);
    CHECK(f.tree.total_size() == 12);  // conservation
    f.audit_ok();
}

TEST_CASE("100 random splits keep order and size fields consistent") {
    Fixture f;
    std::vector<Key> keys;
    Rng rng(17);
    for (int i = 0; i < 400; ++i) keys.push_back(Key(rng.below(1u << 30)));
    std::sort(keys.begin(), keys.end());
    f.build({keys});
    int splits = 0;
    while (splits < 100) {
        // pick a random leaf by rank descent
        u64 r = 1 + rng.below(f.tree.total_size());
        Bucket* b = f.tree.find_by_rank(r).bucket;
        if (b->size < 2) continue;
        if (f.split_at_median(b, rng)) ++splits;
        f.audit_ok();
    }
    CHECK(f.tree.leaf_count() == 101);
    CHECK(f.tree.total_size() == 400);
    CHECK(double(f.tree.height()) <= 1.45 * std::log2(101.0) + 2.5);
}

TEST_CASE("remove_leaf: two-leaf tree contracts to one") {
    Fixture f;
    f.build({{1, 2}, {3, 4, 5}});
    Bucket* left = f.head;
    unlink_bucket(*left, f.head, f.tail);
    f.tree.remove_leaf(left);
    CHECK(f.tree.leaf_count() == 1);
    CHECK(f.tree.total_size() == 3);
    f.audit_ok();
    Bucket* last = f.head;
    unlink_bucket(*last, f.head, f.tail);
    f.tree.remove_leaf(last);
    CHECK(f.tree.empty());
}

TEST_CASE("interleaved removals and splits hold every audit") {
    Fixture f;
    std::vector<Key> keys;
    Rng rng(23);
    for (int i = 0; i < 2000; ++i) keys.push_back(Key(rng.below(1u << 30)));
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    std::vector<std::vector<Key>> bks;
    for (std::size_t i = 0; i < keys.size(); i += 4)
        bks.emplace_back(keys.begin() + i,
                         keys.begin() + std::min(i + 4, keys.size()));
    f.build(bks);
    int removals = 0;
    for (int step = 0; removals < 1000 && f.tree.leaf_count() > 1; ++step) {
        u64 r = 1 + rng.below(f.tree.total_size());
        Bucket* b = f.tree.find_by_rank(r).bucket;
        if (step % 3 == 0 && b->size >= 2) {
            f.split_at_median(b, rng);
        } else {
            i64 delta = -i64(b->size);
            while (!b->items.empty()) f.pool.release(b->items.pop_front());
            b->size = 0;
            f.tree.adjust_size(b, delta);
            unlink_bucket(*b, f.head, f.tail);
            f.tree.remove_leaf(b);
            ++removals;
        }
        if (step % 16 == 0) f.audit_ok();
    }
    f.audit_ok();
    CHECK(double(f.tree.height()) <=
          1.45 * std::log2(double(f.tree.leaf_count())) + 2.5);
}

TEST_CASE("per-operation node touches stay within 6*height + 16") {
    Fixture f;
    std::vector<std::vector<Key>> bks;
    Key next = 0;
    for (int i = 0; i < 500; ++i) {
        bks.push_back({next, next + 1});
        next += 2;
    }
    f.build(bks);
    Rng rng(5);
    for (int t = 0; t < 2000; ++t) {
        u64 h = u64(f.tree.height());
        u64 bound = 6 * h + 16;
        u64 before = f.tree.node_touches();
        switch (t % 4) {
            case 0: f.tree.find_by_key(Key(rng.below(u64(next)))); break;
            case 1: f.tree.find_by_rank(1 + rng.below(f.tree.total_size())); break;
            case 2: {
                Bucket* b = f.tree.find_by_rank(1 + rng.below(f.tree.total_size())).bucket;
                before = f.tree.node_touches();
                b->items.push_back(f.pool.alloc(b->hullLo));
                ++b->size;
                f.tree.adjust_size(b, +1);
                break;
            }
            case 3: {
                Bucket* b = f.tree.find_by_rank(1 + rng.below(f.tree.total_size())).bucket;
                if (b->size < 2) continue;
                before = f.tree.node_touches();
                f.split_at_median(b, rng);
                break;
            }
        }
        CHECK(f.tree.node_touches() - before <= bound);
    }
    // removals obey the same touch envelope
    for (int t = 0; t < 300 && f.tree.leaf_count() > 2; ++t) {
        Bucket* b = f.tree.find_by_rank(1 + rng.below(f.tree.total_size())).bucket;
        i64 delta = -i64(b->size);
        while (!b->items.empty()) f.pool.release(b->items.pop_front());
        b->size = 0;
        f.tree.adjust_size(b, delta);
        unlink_bucket(*b, f.head, f.tail);
        u64 h = u64(f.tree.height());
        u64 before = f.tree.node_touches();
        f.tree.remove_leaf(b);
        CHECK(f.tree.node_touches() - before <= 6 * h + 16);
    }
    f.audit_ok();
}
