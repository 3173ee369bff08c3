#pragma once

#include <vector>

#include "stylevar/common.hpp"

namespace stylevar {

// Side lengths h_k = w_k per scale, strictly ascending. The last entry is the
// full feature resolution.
class ScaleSchedule {
public:
    ScaleSchedule() = default;
    explicit ScaleSchedule(std::vector<int> sides) : sides_(std::move(sides)) {
        require(!sides_.empty(), "schedule: at least one scale required");
        for (std::size_t k = 0; k < sides_.size(); ++k) {
            require(sides_[k] > 0, "schedule: side must be positive, got ", sides_[k]);
            require(k == 0 || sides_[k] > sides_[k - 1], "schedule: sides must be strictly ascending");
        }
        offsets_.reserve(sides_.size() + 1);
        int off = 0;
        for (int s : sides_) {
            offsets_.push_back(off);
            off += s * s;
        }
        offsets_.push_back(off);
    }

    // 10-scale schedule of the reference model; 680 tokens in total.
    static ScaleSchedule full() { return ScaleSchedule({1, 2, 3, 4, 5, 6, 8, 10, 13, 16}); }
    static ScaleSchedule toy() { return ScaleSchedule({1, 2, 3, 4}); }

    int num_scales() const { return static_cast<int>(sides_.size()); }
    int side(int k) const { return sides_[static_cast<std::size_t>(k)]; }
    int tokens_at(int k) const { return side(k) * side(k); }
    int final_side() const { return sides_.back(); }
    int total_tokens() const { return offsets_.back(); }
    // first flat token index of scale k
    int token_offset(int k) const { return offsets_[static_cast<std::size_t>(k)]; }
    const std::vector<int>& sides() const { return sides_; }

    bool operator==(const ScaleSchedule& o) const { return sides_ == o.sides_; }

private:
    std::vector<int> sides_;
    std::vector<int> offsets_;
};

}  // namespace stylevar
