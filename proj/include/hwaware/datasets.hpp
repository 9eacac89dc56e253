#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hwaware/grid.hpp"

namespace hwaware {

struct LabeledSet {
    Matrix points;                    // n x 2
    std::vector<std::uint8_t> labels; // n, each 0 or 1

    std::size_t size() const noexcept { return labels.size(); }
    void validate() const;
    LabeledSet subset(std::size_t begin, std::size_t end) const;
};

/// Two interleaving half circles. Class 0 lies on (cos t, sin t), class 1 on
/// (1 - cos t, 0.5 - sin t), t uniform on [0, pi], plus Gaussian noise per
/// coordinate. Class 0 gets ceil(n / 2) points. Rows are shuffled.
LabeledSet make_half_moons(std::size_t n, double noise_std, std::uint64_t seed);

/// First n_train rows and the remainder.
std::pair<LabeledSet, LabeledSet> split(const LabeledSet& set, std::size_t n_train);

/// x,y,label with a header row.
void write_csv(const LabeledSet& set, const std::filesystem::path& path);

}  // namespace hwaware
