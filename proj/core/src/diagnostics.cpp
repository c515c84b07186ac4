#include "ntklab/diagnostics.hpp"

#include "ntklab/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <unordered_map>

namespace ntklab {

namespace {

void require_relu(const CoordinateModel& model) {
    if (model.network.config.activation != Activation::ReLU) {
        throw DomainError("activation patterns need a ReLU network");
    }
}

std::uint64_t mix(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ULL;
    x ^= x >> 33;
    return x;
}

}  // namespace

Image grid_to_image(const GridStack& grids, std::size_t layer, int slot) {
    if (grids.input_dim != 2) throw DomainError("grid_to_image: only 2D grids can be drawn");
    if (layer >= grids.layers.size()) {
        throw DimensionError("grid_to_image: layer " + std::to_string(layer) + " out of range");
    }
    if (slot < 0 || slot >= grids.slots) {
        throw DimensionError("grid_to_image: slot " + std::to_string(slot) + " out of range");
    }
    const GridLayer& g = grids.layers[layer];
    const int r = g.resolution;
    const auto k = static_cast<std::size_t>(grids.slots);
    auto value = [&](int ix, int iy) {
        return g.weights[(static_cast<std::size_t>(ix) * r + iy) * k + static_cast<std::size_t>(slot)];
    };
    double lo = value(0, 0);
    double hi = lo;
    for (int ix = 0; ix < r; ++ix) {
        for (int iy = 0; iy < r; ++iy) {
            lo = std::min(lo, value(ix, iy));
            hi = std::max(hi, value(ix, iy));
        }
    }
    Image img(r, r, 1, 0.5);
    if (hi > lo) {
        for (int ix = 0; ix < r; ++ix) {
            for (int iy = 0; iy < r; ++iy) img.at(ix, iy, 0) = (value(ix, iy) - lo) / (hi - lo);
        }
    }
    return img;
}

std::size_t ActivationPattern::popcount() const {
    std::size_t n = 0;
    for (auto w : words) n += static_cast<std::size_t>(std::popcount(w));
    return n;
}

std::size_t ActivationPatternHash::operator()(const ActivationPattern& p) const {
    std::uint64_t h = p.bits;
    for (auto w : p.words) h = mix(h ^ w) + 0x9e3779b97f4a7c15ULL;
    return static_cast<std::size_t>(h);
}

std::vector<ActivationPattern> activation_patterns(const CoordinateModel& model,
                                                   const Matrix& points) {
    require_relu(model);
    const ForwardTrace trace = forward_trace(model.network, encode_batch(model, points));
    const std::size_t bits = model.network.hidden_neuron_count();
    std::vector<ActivationPattern> out(static_cast<std::size_t>(points.rows()));
    for (auto& p : out) {
        p.bits = bits;
        p.words.assign((bits + 63) / 64, 0);
    }
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < trace.pre.size(); ++l) {
        const Matrix& pre = trace.pre[l];
        for (Eigen::Index i = 0; i < pre.cols(); ++i) {
            auto& p = out[static_cast<std::size_t>(i)];
            for (Eigen::Index n = 0; n < pre.rows(); ++n) {
                if (pre(n, i) > 0.0) {
                    const std::size_t b = offset + static_cast<std::size_t>(n);
                    p.words[b / 64] |= std::uint64_t{1} << (b % 64);
                }
            }
        }
        offset += static_cast<std::size_t>(pre.rows());
    }
    return out;
}

ActivationPattern activation_pattern(const CoordinateModel& model, std::span<const double> x) {
    Matrix point(1, static_cast<Eigen::Index>(x.size()));
    for (std::size_t a = 0; a < x.size(); ++a) point(0, static_cast<Eigen::Index>(a)) = x[a];
    return activation_patterns(model, point).front();
}

RegionCount count_regions(const CoordinateModel& model, int resolution) {
    if (model.input_dim() != 2) throw DomainError("count_regions: model must take 2D input");
    if (resolution < 1) throw DimensionError("count_regions: resolution must be >= 1");
    RegionCount result;
    result.resolution = resolution;
    result.region_ids.resize(static_cast<std::size_t>(resolution) * resolution);
    std::unordered_map<ActivationPattern, int, ActivationPatternHash> ids;
    const double step = resolution > 1 ? 1.0 / (resolution - 1) : 0.0;
    // One lattice row per batch keeps memory flat at high resolution.
    Matrix row_points(resolution, 2);
    for (int row = 0; row < resolution; ++row) {
        for (int col = 0; col < resolution; ++col) {
            row_points(col, 0) = col * step;
            row_points(col, 1) = row * step;
        }
        const auto patterns = activation_patterns(model, row_points);
        for (int col = 0; col < resolution; ++col) {
            const auto [it, inserted] =
                ids.try_emplace(patterns[static_cast<std::size_t>(col)], static_cast<int>(ids.size()));
            result.region_ids[static_cast<std::size_t>(row) * resolution + col] = it->second;
        }
    }
    result.count = ids.size();
    return result;
}

Image region_image(const RegionCount& regions) {
    Image img(regions.resolution, regions.resolution, 3);
    for (std::size_t i = 0; i < regions.region_ids.size(); ++i) {
        const std::uint64_t h = mix(static_cast<std::uint64_t>(regions.region_ids[i]) + 1);
        for (int c = 0; c < 3; ++c) {
            img.data[i * 3 + static_cast<std::size_t>(c)] = static_cast<double>((h >> (16 * c)) & 0xff) / 255.0;
        }
    }
    return img;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("pearson: length mismatch");
    if (a.empty()) return 0.0;
    const auto n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

double grid_image_correlation(const GridStack& grids, std::size_t layer, int slot,
                              const Image& target) {
    if (grids.input_dim != 2) throw DomainError("grid_image_correlation: 2D grids only");
    if (layer >= grids.layers.size() || slot < 0 || slot >= grids.slots) {
        throw DimensionError("grid_image_correlation: layer or slot out of range");
    }
    const Image gray = to_grayscale(target);
    std::vector<double> grid_values;
    grid_values.reserve(gray.pixel_count());
    const double sx = gray.width > 1 ? 1.0 / (gray.width - 1) : 0.0;
    const double sy = gray.height > 1 ? 1.0 / (gray.height - 1) : 0.0;
    for (int row = 0; row < gray.height; ++row) {
        for (int col = 0; col < gray.width; ++col) {
            const double x[2] = {col * sx, row * sy};
            const InterpFootprint fp = interp_footprint(x, grids.layers[layer], 2);
            grid_values.push_back(interpolate(grids.layers[layer], grids.slots, slot, fp));
        }
    }
    return pearson(grid_values, gray.data);
}

}  // namespace ntklab
