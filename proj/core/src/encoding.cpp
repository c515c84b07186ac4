#include "ntklab/encoding.hpp"

#include "ntklab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace ntklab {

namespace {

constexpr double kDomainSlack = 1e-9;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_dim(int d, const char* what) {
    if (d < 1 || d > 3) {
        throw ConfigError(std::string(what) + ": input dimension must be 1..3, got " +
                          std::to_string(d));
    }
}

std::size_t ipow(std::size_t base, int exp) {
    std::size_t r = 1;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

}  // namespace

int encoding_input_dim(const EncodingSpec& spec) {
    return std::visit([](const auto& s) { return s.input_dim; }, spec);
}

int encoding_output_dim(const EncodingSpec& spec) {
    return std::visit(Overloaded{
                          [](const IdentitySpec& s) { return s.input_dim; },
                          [](const FfeSpec& s) { return s.output_dim(); },
                          [](const MpeSpec& s) { return s.output_dim(); },
                      },
                      spec);
}

std::string encoding_name(const EncodingSpec& spec) {
    return std::visit(Overloaded{
                          [](const IdentitySpec&) { return std::string("identity"); },
                          [](const FfeSpec&) { return std::string("ffe"); },
                          [](const MpeSpec&) { return std::string("mpe"); },
                      },
                      spec);
}

std::size_t GridStack::node_count(std::size_t layer) const {
    return ipow(static_cast<std::size_t>(layers.at(layer).resolution), input_dim);
}

std::size_t GridStack::parameter_count() const {
    std::size_t total = 0;
    for (const auto& layer : layers) total += layer.weights.size();
    return total;
}

std::size_t GridStack::layer_offset(std::size_t layer) const {
    std::size_t offset = 0;
    for (std::size_t l = 0; l < layer; ++l) offset += layers[l].weights.size();
    return offset;
}

MpeSpec GridStack::spec() const {
    MpeSpec s{input_dim, slots, {}};
    for (const auto& layer : layers) s.resolutions.push_back(layer.resolution);
    return s;
}

void validate(const FfeSpec& spec) {
    if (spec.frequencies < 1) throw ConfigError("ffe: frequency count L must be >= 1");
    require_dim(spec.input_dim, "ffe");
}

void validate(const MpeSpec& spec) {
    require_dim(spec.input_dim, "mpe");
    if (spec.slots < 1) throw ConfigError("mpe: slots per node k must be >= 1");
    if (spec.resolutions.empty()) throw ConfigError("mpe: at least one grid layer required");
    for (int r : spec.resolutions) {
        if (r < 2) throw ConfigError("mpe: grid resolution must be >= 2 nodes per axis");
    }
}

Vector identity_encode(std::span<const double> x) {
    return Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
}

void ffe_encode_into(std::span<const double> x, const FfeSpec& spec, std::span<double> out) {
    const std::size_t d = x.size();
    std::size_t o = 0;
    double freq = 1.0;
    for (int l = 0; l < spec.frequencies; ++l) {
        for (std::size_t a = 0; a < d; ++a) out[o + a] = std::sin(freq * x[a]);
        for (std::size_t a = 0; a < d; ++a) out[o + d + a] = std::cos(freq * x[a]);
        o += 2 * d;
        freq *= 2.0;
    }
}

Vector ffe_encode(std::span<const double> x, const FfeSpec& spec) {
    validate(spec);
    if (static_cast<int>(x.size()) != spec.input_dim) {
        throw DimensionError("ffe_encode: point has " + std::to_string(x.size()) +
                             " components, spec expects " + std::to_string(spec.input_dim));
    }
    Vector out(spec.output_dim());
    ffe_encode_into(x, spec, std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
    return out;
}

InterpFootprint interp_footprint(std::span<const double> x, int resolution, int input_dim) {
    if (static_cast<int>(x.size()) != input_dim) {
        throw DimensionError("interp_footprint: point dimension mismatch");
    }
    std::array<std::size_t, 3> cell{};
    std::array<double, 3> frac{};
    const double cells = resolution - 1;
    for (int a = 0; a < input_dim; ++a) {
        double v = x[static_cast<std::size_t>(a)];
        if (!(v >= -kDomainSlack && v <= 1.0 + kDomainSlack)) {
            throw DomainError("interp_footprint: coordinate " + std::to_string(v) +
                              " outside [0,1]");
        }
        v = std::clamp(v, 0.0, 1.0);
        const double u = v * cells;
        const auto c = std::min(static_cast<int>(std::floor(u)), resolution - 2);
        cell[static_cast<std::size_t>(a)] = static_cast<std::size_t>(c);
        frac[static_cast<std::size_t>(a)] = u - c;
    }

    InterpFootprint fp;
    fp.count = 1 << input_dim;
    const auto r = static_cast<std::size_t>(resolution);
    for (int corner = 0; corner < fp.count; ++corner) {
        std::size_t node = 0;
        double w = 1.0;
        for (int a = 0; a < input_dim; ++a) {
            const bool upper = (corner >> (input_dim - 1 - a)) & 1;
            const auto ua = static_cast<std::size_t>(a);
            node = node * r + cell[ua] + (upper ? 1 : 0);
            w *= upper ? frac[ua] : 1.0 - frac[ua];
        }
        fp.nodes[static_cast<std::size_t>(corner)] = node;
        fp.weights[static_cast<std::size_t>(corner)] = w;
    }
    return fp;
}

InterpFootprint interp_footprint(std::span<const double> x, const GridLayer& layer,
                                 int input_dim) {
    return interp_footprint(x, layer.resolution, input_dim);
}

double interpolate(const GridLayer& layer, int slots, int slot, const InterpFootprint& fp) {
    double v = 0.0;
    for (int c = 0; c < fp.count; ++c) {
        const auto uc = static_cast<std::size_t>(c);
        v += fp.weights[uc] *
             layer.weights[fp.nodes[uc] * static_cast<std::size_t>(slots) +
                           static_cast<std::size_t>(slot)];
    }
    return v;
}

void mpe_encode_into(std::span<const double> x, const GridStack& grids, std::span<double> out) {
    std::size_t o = 0;
    for (const auto& layer : grids.layers) {
        const InterpFootprint fp = interp_footprint(x, layer, grids.input_dim);
        for (int s = 0; s < grids.slots; ++s) out[o++] = interpolate(layer, grids.slots, s, fp);
    }
    for (double v : x) out[o++] = v;
}

Vector mpe_encode(std::span<const double> x, const GridStack& grids) {
    Vector out(grids.output_dim());
    mpe_encode_into(x, grids, std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
    return out;
}

SparseGridGradient mpe_grid_gradient(std::span<const double> x, const GridStack& grids) {
    SparseGridGradient grad;
    const auto k = static_cast<std::size_t>(grids.slots);
    std::size_t offset = 0;
    for (std::size_t l = 0; l < grids.layers.size(); ++l) {
        const InterpFootprint fp = interp_footprint(x, grids.layers[l], grids.input_dim);
        for (std::size_t s = 0; s < k; ++s) {
            for (int c = 0; c < fp.count; ++c) {
                const auto uc = static_cast<std::size_t>(c);
                grad.entries.push_back({l * k + s, offset + fp.nodes[uc] * k + s, fp.weights[uc]});
            }
        }
        offset += grids.layers[l].weights.size();
    }
    return grad;
}

std::vector<int> geometric_resolutions(int layers, int coarsest, int finest) {
    if (layers < 1) throw ConfigError("grid layer count must be >= 1");
    if (coarsest < 2 || finest < 2) throw ConfigError("grid resolution must be >= 2");
    if (layers == 1) return {finest};
    std::vector<int> out;
    const double ratio = static_cast<double>(finest) / coarsest;
    for (int l = 0; l < layers; ++l) {
        const double t = static_cast<double>(l) / (layers - 1);
        out.push_back(static_cast<int>(std::lround(coarsest * std::pow(ratio, t))));
    }
    return out;
}

GridStack make_grid_stack(const MpeSpec& spec, std::uint64_t seed, double stddev) {
    validate(spec);
    GridStack grids;
    grids.input_dim = spec.input_dim;
    grids.slots = spec.slots;
    if (stddev < 0.0) throw ConfigError("grid init stddev must be non-negative");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, stddev > 0.0 ? stddev : 1.0);
    for (int r : spec.resolutions) {
        GridLayer layer;
        layer.resolution = r;
        layer.weights.resize(ipow(static_cast<std::size_t>(r), spec.input_dim) *
                             static_cast<std::size_t>(spec.slots));
        for (double& w : layer.weights) w = stddev > 0.0 ? normal(rng) : 0.0;
        grids.layers.push_back(std::move(layer));
    }
    return grids;
}

void write_grid_csv(std::ostream& out, const GridStack& grids) {
    out << "# ntklab-grid v1\n";
    out << "# dim=" << grids.input_dim << " slots=" << grids.slots
        << " layers=" << grids.layers.size() << " resolutions=";
    for (std::size_t l = 0; l < grids.layers.size(); ++l) {
        out << (l ? ";" : "") << grids.layers[l].resolution;
    }
    out << "\nlayer,node,slot,value\n" << std::setprecision(17);
    const auto k = static_cast<std::size_t>(grids.slots);
    for (std::size_t l = 0; l < grids.layers.size(); ++l) {
        const auto& w = grids.layers[l].weights;
        for (std::size_t i = 0; i < w.size(); ++i) {
            out << l << ',' << i / k << ',' << i % k << ',' << w[i] << '\n';
        }
    }
}

void write_grid_csv(const std::string& path, const GridStack& grids) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    write_grid_csv(out, grids);
}

GridStack read_grid_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "# ntklab-grid v1") {
        throw IoError("grid csv: missing '# ntklab-grid v1' header");
    }
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
        throw IoError("grid csv: missing shape line");
    }
    MpeSpec spec;
    std::size_t layer_count = 0;
    {
        std::istringstream fields(line.substr(2));
        std::string field;
        while (fields >> field) {
            const auto eq = field.find('=');
            if (eq == std::string::npos) throw IoError("grid csv: bad field '" + field + "'");
            const std::string key = field.substr(0, eq);
            const std::string value = field.substr(eq + 1);
            if (key == "dim") {
                spec.input_dim = std::stoi(value);
            } else if (key == "slots") {
                spec.slots = std::stoi(value);
            } else if (key == "layers") {
                layer_count = std::stoul(value);
            } else if (key == "resolutions") {
                std::istringstream rs(value);
                std::string r;
                while (std::getline(rs, r, ';')) spec.resolutions.push_back(std::stoi(r));
            }
        }
    }
    if (spec.resolutions.size() != layer_count) throw IoError("grid csv: layer count mismatch");
    validate(spec);
    GridStack grids = make_grid_stack(spec, 0, 0.0);
    if (!std::getline(in, line) || line != "layer,node,slot,value") {
        throw IoError("grid csv: missing column header");
    }
    std::size_t rows = 0;
    const auto k = static_cast<std::size_t>(spec.slots);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::size_t l = 0, node = 0, slot = 0;
        double value = 0.0;
        char c1 = 0, c2 = 0, c3 = 0;
        if (!(row >> l >> c1 >> node >> c2 >> slot >> c3 >> value) || l >= grids.layers.size() ||
            slot >= k || node * k + slot >= grids.layers[l].weights.size()) {
            throw IoError("grid csv: malformed row '" + line + "'");
        }
        grids.layers[l].weights[node * k + slot] = value;
        ++rows;
    }
    if (rows != grids.parameter_count()) throw IoError("grid csv: wrong number of rows");
    return grids;
}

GridStack read_grid_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    return read_grid_csv(in);
}

}  // namespace ntklab
