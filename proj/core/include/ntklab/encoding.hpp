#pragma once

#include "ntklab/linalg.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace ntklab {

/// Raw coordinates passed straight to the network.
struct IdentitySpec {
    int input_dim = 2;
};

/// Axis-aligned logarithmic Fourier features with `frequencies` octaves.
struct FfeSpec {
    int frequencies = 1;
    int input_dim = 2;

    [[nodiscard]] int output_dim() const { return 2 * input_dim * frequencies; }
};

/// Configuration of a multigrid parametric encoding: one grid per entry of
/// `resolutions`, each node storing `slots` learnable scalars.
struct MpeSpec {
    int input_dim = 2;
    int slots = 1;
    std::vector<int> resolutions;

    [[nodiscard]] int output_dim() const {
        return static_cast<int>(resolutions.size()) * slots + input_dim;
    }
};

using EncodingSpec = std::variant<IdentitySpec, FfeSpec, MpeSpec>;

int encoding_input_dim(const EncodingSpec& spec);
int encoding_output_dim(const EncodingSpec& spec);
std::string encoding_name(const EncodingSpec& spec);

/// One regular grid over the unit hypercube. Nodes are numbered with the
/// x axis slowest: node = (ix * r + iy) * r + iz. Scalars are stored node
/// major, `weights[node * slots + slot]`.
struct GridLayer {
    int resolution = 2;
    std::vector<double> weights;

    [[nodiscard]] double cell_size() const { return 1.0 / (resolution - 1); }
};

/// The learnable grids of a multigrid encoding.
struct GridStack {
    int input_dim = 2;
    int slots = 1;
    std::vector<GridLayer> layers;

    [[nodiscard]] std::size_t node_count(std::size_t layer) const;
    [[nodiscard]] std::size_t parameter_count() const;
    /// Flat index of the first scalar of `layer` in the concatenated grid block.
    [[nodiscard]] std::size_t layer_offset(std::size_t layer) const;
    [[nodiscard]] int output_dim() const {
        return static_cast<int>(layers.size()) * slots + input_dim;
    }
    [[nodiscard]] MpeSpec spec() const;
};

/// Corners of the cell containing a point and their multilinear weights.
/// Corners are ordered by bitmask with axis 0 as the most significant bit,
/// so in 2D the order is w11, w12, w21, w22 indexed [x-index][y-index]
/// from the minimum-coordinate corner.
struct InterpFootprint {
    std::array<std::size_t, 8> nodes{};
    std::array<double, 8> weights{};
    int count = 0;
};

/// Gradient of every interpolated encoding output w.r.t. the grid scalars.
/// `output` indexes the encoding output (layer * slots + slot), `parameter`
/// the flat grid block.
struct SparseGridGradient {
    struct Entry {
        std::size_t output;
        std::size_t parameter;
        double value;
    };
    std::vector<Entry> entries;
};

void validate(const FfeSpec& spec);
void validate(const MpeSpec& spec);

Vector identity_encode(std::span<const double> x);

Vector ffe_encode(std::span<const double> x, const FfeSpec& spec);
/// Writes the 2dL features into `out` without allocating.
void ffe_encode_into(std::span<const double> x, const FfeSpec& spec, std::span<double> out);

/// Points within 1e-9 outside [0,1] are clamped; larger excursions throw
/// DomainError. x = 1 falls into the last cell.
InterpFootprint interp_footprint(std::span<const double> x, int resolution, int input_dim);
InterpFootprint interp_footprint(std::span<const double> x, const GridLayer& layer,
                                 int input_dim);

/// Interpolated value of `slot` on `layer` given a footprint.
double interpolate(const GridLayer& layer, int slots, int slot, const InterpFootprint& fp);

/// [g̃(0,0) … g̃(0,k-1), g̃(1,0) …, g̃(L-1,k-1), x].
Vector mpe_encode(std::span<const double> x, const GridStack& grids);
void mpe_encode_into(std::span<const double> x, const GridStack& grids, std::span<double> out);

SparseGridGradient mpe_grid_gradient(std::span<const double> x, const GridStack& grids);

/// `layers` resolutions spaced geometrically from `coarsest` to `finest` and
/// rounded; a single layer uses `finest`.
std::vector<int> geometric_resolutions(int layers, int coarsest, int finest);

inline constexpr double kGridInitStddev = 0.01;

/// Allocates the grids of `spec` with scalars drawn from N(0, stddev²).
GridStack make_grid_stack(const MpeSpec& spec, std::uint64_t seed,
                          double stddev = kGridInitStddev);

/// Grid export, one row per scalar:
///   # ntklab-grid v1
///   # dim=2 slots=2 layers=1 resolutions=100
///   layer,node,slot,value
void write_grid_csv(std::ostream& out, const GridStack& grids);
void write_grid_csv(const std::string& path, const GridStack& grids);
GridStack read_grid_csv(std::istream& in);
GridStack read_grid_csv(const std::string& path);

}  // namespace ntklab
