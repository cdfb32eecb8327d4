#pragma once

// Bounded producer/consumer queue between the packet source and the
// pipeline thread. Two overflow policies: Block (offline replay must not
// lose packets) and DropOldest (a live sensor must not stall the socket;
// dropped packets are counted instead).

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>

namespace streamseg {

enum class OverflowPolicy { Block, DropOldest };

template <typename T>
class BoundedQueue {
  public:
    explicit BoundedQueue(size_t capacity = 64,
                          OverflowPolicy policy = OverflowPolicy::Block)
        : capacity_(capacity ? capacity : 1), policy_(policy) {}

    // False only when the queue is already closed.
    bool push(T item) {
        std::unique_lock<std::mutex> lk(mu_);
        if (policy_ == OverflowPolicy::Block) {
            not_full_.wait(lk, [&] {
                return closed_ || items_.size() < capacity_;
            });
            if (closed_) return false;
        } else {
            if (closed_) return false;
            if (items_.size() >= capacity_) {
                items_.pop_front();
                ++dropped_;
            }
        }
        items_.push_back(std::move(item));
        not_empty_.notify_one();
        return true;
    }

    // Blocks until an item or close; nullopt means closed and drained.
    std::optional<T> pop() {
        std::unique_lock<std::mutex> lk(mu_);
        not_empty_.wait(lk, [&] { return closed_ || !items_.empty(); });
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return item;
    }

    void close() {
        std::lock_guard<std::mutex> lk(mu_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

    uint64_t dropped() const {
        std::lock_guard<std::mutex> lk(mu_);
        return dropped_;
    }
    size_t size() const {
        std::lock_guard<std::mutex> lk(mu_);
        return items_.size();
    }

  private:
    const size_t capacity_;
    const OverflowPolicy policy_;
    mutable std::mutex mu_;
    std::condition_variable not_empty_, not_full_;
    std::deque<T> items_;
    bool closed_ = false;
    uint64_t dropped_ = 0;
};

}  // namespace streamseg
