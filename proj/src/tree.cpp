#include "ksel/tree.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>

#include "ksel/bucket.hpp"

namespace ksel {

void BucketTree::destroy(TreeNode* n) {
    if (!n) return;
    destroy(n->left);
    destroy(n->right);
    delete n;
}

void BucketTree::clear() {
    destroy(root_);
    root_ = nullptr;
}

void BucketTree::pull_up(TreeNode* n) {
    n->height = 1 + std::max(h(n->left), h(n->right));
    n->size = n->left->size + n->right->size;
    n->leaves = n->left->leaves + n->right->leaves;
}

void BucketTree::replace_child(TreeNode* parent, TreeNode* oldChild, TreeNode* newChild) {
    newChild->parent = parent;
    if (!parent) {
        root_ = newChild;
        return;
    }
    if (parent->left == oldChild) {
        parent->left = newChild;
    } else {
        KSEL_ASSERT(parent->right == oldChild);
        parent->right = newChild;
    }
}

TreeNode* BucketTree::rotate_left(TreeNode* n) {
    TreeNode* r = n->right;
    touch(n);
    touch(r);
    replace_child(n->parent, n, r);
    n->right = r->left;
    n->right->parent = n;
    r->left = n;
    n->parent = r;
    pull_up(n);
    pull_up(r);
    return r;
}

TreeNode* BucketTree::rotate_right(TreeNode* n) {
    TreeNode* l = n->left;
    touch(n);
    touch(l);
    replace_child(n->parent, n, l);
    n->left = l->right;
    n->left->parent = n;
    l->right = n;
    n->parent = l;
    pull_up(n);
    pull_up(l);
    return l;
}

TreeNode* BucketTree::rebalance(TreeNode* n) {
    i32 bf = h(n->left) - h(n->right);
    if (bf > 1) {
        if (h(n->left->left) < h(n->left->right)) rotate_left(n->left);
        return rotate_right(n);
    }
    if (bf < -1) {
        if (h(n->right->right) < h(n->right->left)) rotate_right(n->right);
        return rotate_left(n);
    }
    return n;
}

void BucketTree::retrace(TreeNode* n) {
    while (n) {
        touch(n);
        pull_up(n);
        n = rebalance(n)->parent;
    }
}

TreeNode* BucketTree::build_range(const std::vector<std::pair<Bucket*, Key>>& v,
                                  std::size_t lo, std::size_t hi) {
    if (hi - lo == 1) {
        auto* leaf = new TreeNode();
        leaf->bucket = v[lo].first;
        leaf->size = v[lo].first->size;
        leaf->bucket->leaf = leaf;
        return leaf;
    }
    std::size_t mid = lo + (hi - lo) / 2;
    auto* n = new TreeNode();
    n->sep = v[mid - 1].second;
    n->left = build_range(v, lo, mid);
    n->right = build_range(v, mid, hi);
    n->left->parent = n;
    n->right->parent = n;
    pull_up(n);
    return n;
}

void BucketTree::build(const std::vector<std::pair<Bucket*, Key>>& ordered) {
    if (ordered.empty()) throw EmptyBuild("build_from_buckets: empty bucket sequence");
    for (auto& [b, maxKey] : ordered) KSEL_ASSERT(b && b->size > 0);
    clear();
    root_ = build_range(ordered, 0, ordered.size());
    root_->parent = nullptr;
}

void BucketTree::attach_single(Bucket* b) {
    KSEL_ASSERT(!root_);
    auto* leaf = new TreeNode();
    leaf->bucket = b;
    leaf->size = b->size;
    b->leaf = leaf;
    root_ = leaf;
    touch(leaf);
}

Bucket* BucketTree::find_by_key(Key key) {
    KSEL_ASSERT(root_);
    TreeNode* n = root_;
    while (!n->is_leaf()) {
        touch(n);
        n = (key <= n->sep) ? n->left : n->right;
    }
    touch(n);
    return n->bucket;
}

BucketTree::RankHit BucketTree::find_by_rank(u64 rank) {
    if (!root_ || rank < 1 || rank > root_->size)
        throw RankOutOfRange("find_bucket_by_rank: rank out of range");
    TreeNode* n = root_;
    u64 before = 0;  // items strictly left of n's subtree
    while (!n->is_leaf()) {
        touch(n);
        if (rank <= before + n->left->size) {
            n = n->left;
        } else {
            before += n->left->size;
            n = n->right;
        }
    }
    touch(n);
    return {n->bucket, before + 1};
}

u64 BucketTree::start_rank_of(const Bucket* b) {
    KSEL_ASSERT(b && b->leaf);
    u64 before = 0;
    const TreeNode* n = b->leaf;
    while (n->parent) {
        touch(n);
        if (n->parent->right == n) before += n->parent->left->size;
        n = n->parent;
    }
    return before + 1;
}

void BucketTree::adjust_size(Bucket* b, i64 delta) {
    KSEL_ASSERT(b && b->leaf);
    TreeNode* n = b->leaf;
    while (n) {
        touch(n);
        KSEL_ASSERT(delta >= 0 || n->size >= u64(-delta));
        n->size = u64(i64(n->size) + delta);
        n = n->parent;
    }
    KSEL_ASSERT(b->leaf->size == b->size);
}

void BucketTree::split_leaf(Bucket* original, Key pivot, Bucket* left, Bucket* right) {
    KSEL_ASSERT(original && original->leaf && original->leaf->is_leaf());
    KSEL_ASSERT(left != right && (left == original || right == original));
    TreeNode* node = original->leaf;
    touch(node);

    auto* lLeaf = new TreeNode();
    lLeaf->bucket = left;
    lLeaf->size = left->size;
    left->leaf = lLeaf;
    auto* rLeaf = new TreeNode();
    rLeaf->bucket = right;
    rLeaf->size = right->size;
    right->leaf = rLeaf;

    // The leaf node becomes the internal separator node in place.
    node->bucket = nullptr;
    node->sep = pivot;
    node->left = lLeaf;
    node->right = rLeaf;
    lLeaf->parent = node;
    rLeaf->parent = node;
    retrace(node);  // recomputes sizes/leaf counts/heights up to the root
}

void BucketTree::remove_leaf(Bucket* b) {
    KSEL_ASSERT(b && b->leaf && b->leaf->is_leaf());
    TreeNode* leaf = b->leaf;
    b->leaf = nullptr;
    touch(leaf);
    TreeNode* parent = leaf->parent;
    if (!parent) {
        delete leaf;
        root_ = nullptr;
        return;
    }
    // When the leaf is a left child, contraction deletes the separator on
    // its right; the boundary between the left neighbor and the right
    // neighbor must then become the parent's separator.
    if (parent->left == leaf) {
        TreeNode* x = parent;
        while (x->parent && x->parent->left == x) {
            touch(x);
            x = x->parent;
        }
        if (x->parent) x->parent->sep = parent->sep;
    }
    TreeNode* sibling = (parent->left == leaf) ? parent->right : parent->left;
    TreeNode* grand = parent->parent;
    replace_child(grand, parent, sibling);
    delete leaf;
    delete parent;
    retrace(grand);
}

namespace {

struct AuditCtx {
    std::ostringstream err;
    bool ok = true;

    void fail(const std::string& m) {
        if (ok) err << m;
        ok = false;
    }
};

// Recomputes all fields bottom-up and checks interval consistency against
// (lo, hi] bounds induced by the separators.
void audit_node(const TreeNode* n, std::optional<Key> lo, std::optional<Key> hi,
                const Bucket*& cursor, AuditCtx& ctx) {
    if (!ctx.ok) return;
    if (n->is_leaf()) {
        if (n->left || n->right) return ctx.fail("leaf with children");
        if (n->height != 0) return ctx.fail("leaf height != 0");
        if (n->leaves != 1) return ctx.fail("leaf leafcount != 1");
        const Bucket* b = n->bucket;
        if (b->leaf != n) return ctx.fail("bucket/leaf backlink mismatch");
        if (n->size != b->size) return ctx.fail("leaf size != bucket size");
        if (cursor != b) return ctx.fail("in-order leaves diverge from bucket chain");
        cursor = b->next;
        u64 counted = 0;
        b->for_each_key([&](Key k) {
            ++counted;
            if ((lo && k <= *lo) || (hi && k > *hi)) {
                ctx.fail("item outside separator interval");
            }
        });
        if (counted != b->size) ctx.fail("bucket size != stored item count");
        return;
    }
    if (!n->left || !n->right) return ctx.fail("internal node without two children");
    if (n->left->parent != n || n->right->parent != n)
        return ctx.fail("broken parent link");
    if ((lo && n->sep <= *lo) || (hi && n->sep > *hi))
        return ctx.fail("separator outside enclosing interval");
    audit_node(n->left, lo, n->sep, cursor, ctx);
    audit_node(n->right, n->sep, hi, cursor, ctx);
    if (!ctx.ok) return;
    if (n->size != n->left->size + n->right->size) return ctx.fail("size field wrong");
    if (n->leaves != n->left->leaves + n->right->leaves)
        return ctx.fail("leaf count wrong");
    i32 expect = 1 + std::max(n->left->height, n->right->height);
    if (n->height != expect) return ctx.fail("height field wrong");
    if (std::abs(n->left->height - n->right->height) > 1)
        return ctx.fail("balance violated");
}

}  // namespace

std::string BucketTree::audit(const Bucket* chainHead) const {
    if (!root_) return chainHead ? "empty tree but nonempty bucket chain" : "";
    AuditCtx ctx;
    const Bucket* cursor = chainHead;
    audit_node(root_, std::nullopt, std::nullopt, cursor, ctx);
    if (ctx.ok && cursor != nullptr) ctx.fail("bucket chain longer than leaf sequence");
    if (ctx.ok && root_->parent != nullptr) ctx.fail("root has parent");
    if (ctx.ok) {
        // AVL height bound, constants pinned for this balance scheme.
        double bound = 1.45 * std::log2(double(root_->leaves)) + 2.5;
        if (root_->leaves > 1 && double(root_->height) > bound)
            ctx.fail("height bound exceeded");
    }
    return ctx.ok ? std::string() : ctx.err.str();
}

}  // namespace ksel
