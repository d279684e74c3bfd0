#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace sentinel {

/// One transition plus its fixed bootstrap inclusion mask: bit i set means
/// ensemble member i trains on this transition. The mask is drawn once at
/// insertion and never resampled.
struct MaskedTransition {
    Eigen::VectorXd state;
    int action = 0;
    double reward = 0.0;
    Eigen::VectorXd next_state;
    bool terminal = false;
    std::uint32_t mask = 0;

    bool visible_to(int member) const { return (mask >> member) & 1u; }
};

/// Fixed-capacity ring buffer of masked transitions. Member i's view is the
/// set of stored transitions with bit i set; per-member counts are maintained
/// across overwrites.
class ReplayBuffer {
public:
    ReplayBuffer(std::int64_t capacity, int n_members)
        : capacity_(capacity), view_sizes_(n_members, 0) {
        if (capacity < 1) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
        if (n_members < 1 || n_members > 32)
            throw std::invalid_argument("ReplayBuffer: member count must be in [1, 32]");
        slots_.reserve(static_cast<std::size_t>(capacity));
    }

    void push(MaskedTransition t) {
        if (size() < capacity_) {
            bump_counts(t.mask, +1);
            slots_.push_back(std::move(t));
        } else {
            const std::size_t at = static_cast<std::size_t>(inserted_ % capacity_);
            bump_counts(slots_[at].mask, -1);
            bump_counts(t.mask, +1);
            slots_[at] = std::move(t);
        }
        ++inserted_;
    }

    std::int64_t size() const { return static_cast<std::int64_t>(slots_.size()); }
    std::int64_t capacity() const { return capacity_; }
    std::int64_t total_inserted() const { return inserted_; }
    std::int64_t view_size(int member) const { return view_sizes_[member]; }
    int n_members() const { return static_cast<int>(view_sizes_.size()); }

    const MaskedTransition& at(std::int64_t index) const {
        return slots_[static_cast<std::size_t>(index)];
    }

    /// Uniform sample from member i's masked view (rejection sampling).
    /// Caller must ensure the view is non-empty.
    std::int64_t sample_index(int member, std::mt19937_64& rng) const {
        if (view_sizes_[member] <= 0)
            throw std::logic_error("ReplayBuffer: sampling from empty member view");
        std::uniform_int_distribution<std::int64_t> pick(0, size() - 1);
        while (true) {
            const std::int64_t idx = pick(rng);
            if (slots_[static_cast<std::size_t>(idx)].visible_to(member)) return idx;
        }
    }

private:
    void bump_counts(std::uint32_t mask, int delta) {
        for (int i = 0; i < n_members(); ++i)
            if ((mask >> i) & 1u) view_sizes_[i] += delta;
    }

    std::int64_t capacity_;
    std::vector<MaskedTransition> slots_;
    std::vector<std::int64_t> view_sizes_;
    std::int64_t inserted_ = 0;
};

}  // namespace sentinel
