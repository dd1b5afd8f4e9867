#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "amber/error.hpp"
#include "amber/rng.hpp"

namespace amber {

struct Exemplar {
    std::vector<double> input;
    std::size_t label = 0;
};

// Fixed-capacity exemplar store with reservoir insertion: after N items have
// streamed past, every one of them sits in the buffer with probability M/N.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw ParameterError("replay buffer: capacity must be positive");
    }

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return items_.size(); }
    std::uint64_t seen_count() const { return seen_; }
    const std::vector<Exemplar>& items() const { return items_; }

    void insert(Exemplar item, Rng& rng) {
        if (items_.size() < capacity_) {
            items_.push_back(std::move(item));
        } else {
            // Slot r of the N+1 seen-so-far candidates; r < M keeps the item.
            const std::uint64_t r = rng.uniform_int(seen_ + 1);
            if (r < capacity_) items_[static_cast<std::size_t>(r)] = std::move(item);
        }
        seen_ += 1;
    }

    // Uniform draw without replacement; all items when fewer than requested.
    std::vector<Exemplar> sample(std::size_t count, Rng& rng) const {
        if (count >= items_.size()) return items_;
        std::vector<std::size_t> idx(items_.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::vector<Exemplar> out;
        out.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            const auto j = i + static_cast<std::size_t>(rng.uniform_int(idx.size() - i));
            std::swap(idx[i], idx[j]);
            out.push_back(items_[idx[i]]);
        }
        return out;
    }

private:
    std::size_t capacity_;
    std::vector<Exemplar> items_;
    std::uint64_t seen_ = 0;
};

} // namespace amber
