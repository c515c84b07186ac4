#pragma once

#include "ntklab/encoding.hpp"
#include "ntklab/image.hpp"
#include "ntklab/network.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace ntklab {

/// Grid scalars of one (layer, slot) of a 2D grid as an r × r gray image,
/// min-max normalized; a constant grid maps to 0.5. Pixel (col, row) holds
/// node (ix = col, iy = row), matching the pixel coordinate convention.
Image grid_to_image(const GridStack& grids, std::size_t layer, int slot);

/// One bit per hidden ReLU neuron, layers in order; bit set iff the
/// pre-activation is strictly positive.
struct ActivationPattern {
    std::vector<std::uint64_t> words;
    std::size_t bits = 0;

    [[nodiscard]] bool test(std::size_t i) const { return (words[i / 64] >> (i % 64)) & 1u; }
    [[nodiscard]] std::size_t popcount() const;
    bool operator==(const ActivationPattern&) const = default;
};

struct ActivationPatternHash {
    std::size_t operator()(const ActivationPattern& p) const;
};

ActivationPattern activation_pattern(const CoordinateModel& model, std::span<const double> x);

/// Patterns for every row of `points`.
std::vector<ActivationPattern> activation_patterns(const CoordinateModel& model,
                                                   const Matrix& points);

inline constexpr int kDefaultRegionResolution = 256;

/// Activation regions hit by a resolution × resolution sample lattice over
/// [0,1]² (lattice point (col, row) at (col/(n−1), row/(n−1))). A finite
/// lattice can miss thin regions, so `count` is a lower bound.
struct RegionCount {
    std::size_t count = 0;
    int resolution = 0;
    /// Row-major region id per lattice point, ids in first-seen order.
    std::vector<int> region_ids;
};

RegionCount count_regions(const CoordinateModel& model,
                          int resolution = kDefaultRegionResolution);

/// Region map with each id hashed to an RGB color.
Image region_image(const RegionCount& regions);

/// Pearson correlation coefficient; 0 when either input is constant.
double pearson(std::span<const double> a, std::span<const double> b);

/// Correlation between the interpolated grid value of (layer, slot) at every
/// pixel coordinate and the grayscale of `target`.
double grid_image_correlation(const GridStack& grids, std::size_t layer, int slot,
                              const Image& target);

}  // namespace ntklab
