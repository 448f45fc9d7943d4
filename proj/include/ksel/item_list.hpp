#pragma once

#include <memory>
#include <vector>

#include "ksel/common.hpp"

namespace ksel {

// Bucket items are keys in intrusive singly linked nodes. Everything the
// engine does to them is O(1): append, pop the head, splice a whole list.
struct ItemNode {
    Key key;
    ItemNode* next;
};

// Chunked pool with a free list. Nodes live as long as the pool; release()
// recycles, the destructor reclaims everything at once.
class ItemPool {
public:
    ItemPool() = default;
    ItemPool(const ItemPool&) = delete;
    ItemPool& operator=(const ItemPool&) = delete;
    ItemPool(ItemPool&&) = default;
    ItemPool& operator=(ItemPool&&) = default;

    ItemNode* alloc(Key key) {
        ItemNode* n;
        if (free_) {
            n = free_;
            free_ = n->next;
        } else {
            if (used_ == kChunk || chunks_.empty()) {
                chunks_.emplace_back(new ItemNode[kChunk]);
                used_ = 0;
            }
            n = &chunks_.back()[used_++];
        }
        n->key = key;
        n->next = nullptr;
        return n;
    }

    void release(ItemNode* n) {
        n->next = free_;
        free_ = n;
    }

private:
    static constexpr std::size_t kChunk = 1024;
    std::vector<std::unique_ptr<ItemNode[]>> chunks_;
    std::size_t used_ = kChunk;
    ItemNode* free_ = nullptr;
};

class ItemList {
public:
    ItemList() = default;
    ItemList(const ItemList&) = delete;
    ItemList& operator=(const ItemList&) = delete;
    ItemList(ItemList&& o) noexcept : head_(o.head_), tail_(o.tail_), size_(o.size_) {
        o.head_ = o.tail_ = nullptr;
        o.size_ = 0;
    }
    ItemList& operator=(ItemList&& o) noexcept {
        head_ = o.head_;
        tail_ = o.tail_;
        size_ = o.size_;
        o.head_ = o.tail_ = nullptr;
        o.size_ = 0;
        return *this;
    }

    void push_back(ItemNode* n) {
        n->next = nullptr;
        if (tail_) {
            tail_->next = n;
        } else {
            head_ = n;
        }
        tail_ = n;
        ++size_;
    }

    ItemNode* pop_front() {
        KSEL_ASSERT(head_);
        ItemNode* n = head_;
        head_ = n->next;
        if (!head_) tail_ = nullptr;
        n->next = nullptr;
        --size_;
        return n;
    }

    // Appends all of `o` in O(1); `o` becomes empty.
    void splice_back(ItemList& o) {
        if (o.empty()) return;
        if (tail_) {
            tail_->next = o.head_;
        } else {
            head_ = o.head_;
        }
        tail_ = o.tail_;
        size_ += o.size_;
        o.head_ = o.tail_ = nullptr;
        o.size_ = 0;
    }

    ItemNode* front() const { return head_; }
    bool empty() const { return head_ == nullptr; }
    u64 size() const { return size_; }

    template <typename F>
    void for_each(F&& f) const {
        for (ItemNode* n = head_; n; n = n->next) f(n->key);
    }

private:
    ItemNode* head_ = nullptr;
    ItemNode* tail_ = nullptr;
    u64 size_ = 0;
};

}  // namespace ksel
