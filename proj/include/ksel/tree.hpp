#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ksel/common.hpp"

namespace ksel {

struct Bucket;

// Node of the leaf-oriented AVL tree. Internal nodes have exactly two
// children and carry the inclusive upper bound of their left subtree;
// leaves reference a bucket. Every node stores the item count and leaf
// count of its subtree.
struct TreeNode {
    TreeNode* parent = nullptr;
    TreeNode* left = nullptr;
    TreeNode* right = nullptr;
    Bucket* bucket = nullptr;  // non-null iff leaf
    Key sep = 0;
    u64 size = 0;
    u32 leaves = 1;
    i32 height = 0;

    bool is_leaf() const { return bucket != nullptr; }
};

// Height-balanced search tree over buckets. Keys <= separator route left.
// All structural updates are worst-case O(height); a node-touch counter
// backs the per-operation work accounting.
class BucketTree {
public:
    BucketTree() = default;
    ~BucketTree() { clear(); }
    BucketTree(const BucketTree&) = delete;
    BucketTree& operator=(const BucketTree&) = delete;
    BucketTree(BucketTree&& o) noexcept : root_(o.root_), touches_(o.touches_) {
        o.root_ = nullptr;
    }
    BucketTree& operator=(BucketTree&& o) noexcept {
        if (this != &o) {
            clear();
            root_ = o.root_;
            touches_ = o.touches_;
            o.root_ = nullptr;
        }
        return *this;
    }

    // Bulk build from buckets in key order with their max keys (separators
    // become the max key of each left neighbor). Throws EmptyBuild.
    void build(const std::vector<std::pair<Bucket*, Key>>& ordered);

    // Root leaf for the first bucket of an empty tree.
    void attach_single(Bucket* b);

    Bucket* find_by_key(Key key);

    struct RankHit {
        Bucket* bucket;
        u64 start_rank;  // 1-based global rank of the bucket's first item
    };
    RankHit find_by_rank(u64 rank);  // throws RankOutOfRange

    // 1-based rank of the bucket's first item, O(height).
    u64 start_rank_of(const Bucket* b);

    void adjust_size(Bucket* b, i64 delta);

    // Replaces the leaf of `original` with an internal node (separator =
    // pivot) over two leaves for `left` and `right`. One of left/right may
    // be `original` itself. Size deltas propagate; rebalancing applies.
    void split_leaf(Bucket* original, Key pivot, Bucket* left, Bucket* right);

    // Removes the bucket's leaf and contracts its parent. When the leaf is
    // a left child the surviving boundary separator is rewritten so the
    // removed leaf's key range joins its left neighbor (required when the
    // neighbor absorbed the items).
    void remove_leaf(Bucket* b);

    void clear();

    bool empty() const { return root_ == nullptr; }
    u64 total_size() const { return root_ ? root_->size : 0; }
    u64 leaf_count() const { return root_ ? root_->leaves : 0; }
    i32 height() const { return root_ ? root_->height : -1; }

    u64 node_touches() const { return touches_; }

    // Full structural audit: size/leaf/height fields, AVL balance, the
    // height bound, in-order leaves vs. the bucket chain, and separator
    // interval consistency for every stored item. Returns "" when clean.
    std::string audit(const Bucket* chainHead) const;

private:
    TreeNode* root_ = nullptr;
    mutable u64 touches_ = 0;

    void touch(const TreeNode*) const { ++touches_; }
    static i32 h(const TreeNode* n) { return n ? n->height : -1; }
    void pull_up(TreeNode* n);
    TreeNode* rotate_left(TreeNode* n);
    TreeNode* rotate_right(TreeNode* n);
    TreeNode* rebalance(TreeNode* n);
    void retrace(TreeNode* n);
    void replace_child(TreeNode* parent, TreeNode* oldChild, TreeNode* newChild);
    TreeNode* build_range(const std::vector<std::pair<Bucket*, Key>>& v,
                          std::size_t lo, std::size_t hi);
    static void destroy(TreeNode* n);
};

}  // namespace ksel
