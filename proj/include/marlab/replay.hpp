#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <unordered_set>

#include "marlab/env.hpp"

namespace marlab {

/// One environment transition of a single agent. (agent_id, global_step) is
/// the deduplication key: the same physical sample must not enter a buffer
/// twice no matter how often neighbors re-share it.
struct Transition {
    int agent_id = 0;
    std::int64_t global_step = 0;
    Obs s{};
    double a = 0.0;
    Obs s_next{};
};

/// Fixed-capacity FIFO ring of transitions with duplicate rejection.
class ReplayDataset {
public:
    explicit ReplayDataset(std::size_t capacity = 2048) : capacity_(capacity) {
        if (capacity_ == 0) throw std::invalid_argument("replay capacity must be positive");
    }

    /// Returns false (and changes nothing) when the dedup key is already held.
    bool insert(const Transition& t) {
        const std::uint64_t key = dedup_key(t);
        if (keys_.count(key)) return false;
        if (buf_.size() == capacity_) {
            keys_.erase(dedup_key(buf_.front()));
            buf_.pop_front();
        }
        buf_.push_back(t);
        keys_.insert(key);
        return true;
    }

    std::size_t size() const { return buf_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool contains(const Transition& t) const { return keys_.count(dedup_key(t)) != 0; }
    const Transition& operator[](std::size_t i) const { return buf_[i]; }
    void clear() {
        buf_.clear();
        keys_.clear();
    }

    static std::uint64_t dedup_key(const Transition& t) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(t.agent_id)) << 44) ^
               static_cast<std::uint64_t>(t.global_step);
    }

private:
    std::size_t capacity_;
    std::deque<Transition> buf_;
    std::unordered_set<std::uint64_t> keys_;
};

}  // namespace marlab
