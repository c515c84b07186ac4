#include "ntklab/ntk.hpp"

#include "ntklab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace ntklab {

namespace {

struct NodeHit {
    std::size_t node;
    Eigen::Index sample;
    double weight;
};

std::vector<double> row_of(const Matrix& points, Eigen::Index i) {
    std::vector<double> x(static_cast<std::size_t>(points.cols()));
    for (Eigen::Index a = 0; a < points.cols(); ++a) x[static_cast<std::size_t>(a)] = points(i, a);
    return x;
}

std::vector<NodeHit> layer_hits(const Matrix& points, const GridStack& grids, std::size_t layer) {
    std::vector<NodeHit> hits;
    hits.reserve(static_cast<std::size_t>(points.rows()) << grids.input_dim);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const auto x = row_of(points, i);
        const InterpFootprint fp = interp_footprint(x, grids.layers[layer], grids.input_dim);
        for (int c = 0; c < fp.count; ++c) {
            const auto uc = static_cast<std::size_t>(c);
            hits.push_back({fp.nodes[uc], i, fp.weights[uc]});
        }
    }
    std::stable_sort(hits.begin(), hits.end(),
                     [](const NodeHit& a, const NodeHit& b) { return a.node < b.node; });
    return hits;
}

// Σ_l (Δa_lᵀ Δb_l) ∘ (Aa_lᵀ Ab_l / n_l + β²)
Matrix mlp_kernel(const MlpNetwork& net, const ChannelGradients& a, const ChannelGradients& b) {
    Matrix k = Matrix::Zero(a.input_gradient.cols(), b.input_gradient.cols());
    const double beta2 = net.config.beta * net.config.beta;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const double scale = net.input_scale(l);
        const Matrix dd = a.deltas[l].transpose() * b.deltas[l];
        Matrix aa = a.trace.inputs[l].transpose() * b.trace.inputs[l];
        aa *= scale * scale;
        aa.array() += beta2;
        k += dd.cwiseProduct(aa);
    }
    return k;
}

// Σ over layers, slots and shared nodes of G_a G_b w_a w_b.
Matrix grid_kernel(const GridStack& grids, const Matrix& pa, const ChannelGradients& a,
                   const Matrix& pb, const ChannelGradients& b) {
    Matrix k = Matrix::Zero(pa.rows(), pb.rows());
    const auto slots = static_cast<Eigen::Index>(grids.slots);
    for (std::size_t l = 0; l < grids.layers.size(); ++l) {
        const auto ha = layer_hits(pa, grids, l);
        const auto hb = layer_hits(pb, grids, l);
        const auto first = static_cast<Eigen::Index>(l) * slots;
        // Per-sample slot gradients dotted across the pair.
        const Matrix ga = a.input_gradient.middleRows(first, slots);
        const Matrix gb = b.input_gradient.middleRows(first, slots);
        std::size_t jb = 0;
        for (std::size_t ia = 0; ia < ha.size();) {
            const std::size_t node = ha[ia].node;
            std::size_t ea = ia;
            while (ea < ha.size() && ha[ea].node == node) ++ea;
            while (jb < hb.size() && hb[jb].node < node) ++jb;
            std::size_t eb = jb;
            while (eb < hb.size() && hb[eb].node == node) ++eb;
            for (std::size_t u = ia; u < ea; ++u) {
                for (std::size_t v = jb; v < eb; ++v) {
                    const double g = ga.col(ha[u].sample).dot(gb.col(hb[v].sample));
                    k(ha[u].sample, hb[v].sample) += ha[u].weight * hb[v].weight * g;
                }
            }
            ia = ea;
            jb = eb;
        }
    }
    return k;
}

Matrix stacked_jacobians(const CoordinateModel& model, const Matrix& points, bool include_grid,
                         int channel) {
    const auto n_params = static_cast<Eigen::Index>(model.parameter_count());
    Matrix j(points.rows(), n_params);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        j.row(i) = param_jacobian(model, row_of(points, i), channel).transpose();
    }
    if (!include_grid && model.grid_parameter_count() > 0) {
        const auto mlp = static_cast<Eigen::Index>(model.mlp_parameter_count());
        j.rightCols(n_params - mlp).setZero();
    }
    return j;
}

}  // namespace

Matrix cross_ntk(const CoordinateModel& model, const Matrix& a, const Matrix& b,
                 bool include_grid, int channel) {
    const ChannelGradients ga = channel_gradients(model.network, encode_batch(model, a), channel);
    const ChannelGradients gb = channel_gradients(model.network, encode_batch(model, b), channel);
    Matrix k = mlp_kernel(model.network, ga, gb);
    if (include_grid) {
        if (const GridStack* g = model.grids()) k += grid_kernel(*g, a, ga, b, gb);
    }
    return k;
}

NtkGram empirical_ntk(const CoordinateModel& model, const Matrix& points, bool include_grid,
                      const NtkOptions& options) {
    const auto n = static_cast<std::size_t>(points.rows());
    if (n < 1) throw DimensionError("empirical_ntk: need at least one sample");
    if (n > options.cap) {
        throw CapacityError("empirical_ntk: " + std::to_string(n) + " samples exceed the Gram cap " +
                            std::to_string(options.cap) +
                            "; subsample with stratified_subsample first");
    }
    NtkGram gram;
    gram.component = include_grid || model.grid_parameter_count() == 0 ? KernelComponent::Full
                                                                        : KernelComponent::MlpOnly;
    gram.sample_ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) gram.sample_ids[i] = i;

    if (options.method == NtkMethod::Stacked) {
        gram.k = gram_from_jacobians(stacked_jacobians(model, points, include_grid, options.channel));
        return gram;
    }
    const ChannelGradients cg =
        channel_gradients(model.network, encode_batch(model, points), options.channel);
    Matrix k = mlp_kernel(model.network, cg, cg);
    if (include_grid) {
        if (const GridStack* g = model.grids()) k += grid_kernel(*g, points, cg, points, cg);
    }
    gram.k = 0.5 * (k + k.transpose());
    if (!gram.k.allFinite()) throw NumericError("empirical_ntk: non-finite kernel");
    return gram;
}

Matrix seed_averaged_ntk(const EncodingSpec& encoding, const MlpConfig& mlp,
                         std::span<const std::uint64_t> seeds, const Matrix& points,
                         bool include_grid, int channel) {
    if (seeds.empty()) throw ConfigError("seed_averaged_ntk: need at least one seed");
    Matrix sum = Matrix::Zero(points.rows(), points.rows());
    NtkOptions options;
    options.channel = channel;
    options.cap = static_cast<std::size_t>(points.rows());
    for (std::uint64_t seed : seeds) {
        sum += empirical_ntk(init_model(encoding, mlp, seed), points, include_grid, options).k;
    }
    return sum / static_cast<double>(seeds.size());
}

std::vector<std::size_t> stratified_subsample(std::size_t n, std::size_t cap) {
    std::vector<std::size_t> out;
    if (n <= cap) {
        for (std::size_t i = 0; i < n; ++i) out.push_back(i);
        return out;
    }
    for (std::size_t i = 0; i < cap; ++i) {
        out.push_back(static_cast<std::size_t>((static_cast<double>(i) + 0.5) *
                                               static_cast<double>(n) / static_cast<double>(cap)));
    }
    return out;
}

std::vector<std::size_t> stratified_pixel_subsample(int width, int height, std::size_t cap) {
    const auto total = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    std::vector<std::size_t> out;
    if (total <= cap) {
        for (std::size_t i = 0; i < total; ++i) out.push_back(i);
        return out;
    }
    auto stride = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(total) /
                                                       static_cast<double>(cap))));
    auto count = [&](int s) {
        const int offset = s / 2;
        const auto along = [&](int extent) {
            return static_cast<std::size_t>(offset < extent ? (extent - 1 - offset) / s + 1 : 0);
        };
        return along(width) * along(height);
    };
    while (count(stride) > cap) ++stride;
    const int offset = stride / 2;
    for (int r = offset; r < height; r += stride) {
        for (int c = offset; c < width; c += stride) {
            out.push_back(static_cast<std::size_t>(r) * static_cast<std::size_t>(width) +
                          static_cast<std::size_t>(c));
        }
    }
    return out;
}

WeylReport weyl_check(const NtkGram& base, const NtkGram& composed) {
    if (base.size() != composed.size()) {
        throw DimensionError("weyl_check: kernels must have the same order");
    }
    WeylReport report;
    report.epsilon = 1e-8 * max_abs(composed.k);
    const Spectrum sb = sym_eig(base.k);
    const Spectrum sc = sym_eig(composed.k);
    const Matrix plus = composed.k - base.k;
    const Spectrum sp = sym_eig(0.5 * (plus + plus.transpose()));
    const Eigen::Index n = composed.size();
    report.plus_min_eigenvalue = sp.eigenvalues[n - 1];
    report.precondition_ok = report.plus_min_eigenvalue >= -report.epsilon;

    report.pass = report.precondition_ok;
    report.min_margin = n > 0 ? sc.eigenvalues[0] - sb.eigenvalues[0] : 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double margin = sc.eigenvalues[i] - sb.eigenvalues[i];
        report.rows.push_back({static_cast<std::size_t>(i), sb.eigenvalues[i], sc.eigenvalues[i],
                               margin});
        report.min_margin = std::min(report.min_margin, margin);
        if (margin < report.plus_min_eigenvalue - report.epsilon || margin < -report.epsilon) {
            report.pass = false;
        }
    }
    return report;
}

void write_weyl_csv(std::ostream& out, const WeylReport& report) {
    out << "index,lambda_base,lambda_composed,margin\n" << std::setprecision(17);
    for (const auto& row : report.rows) {
        out << row.index << ',' << row.lambda_base << ',' << row.lambda_composed << ','
            << row.margin << '\n';
    }
}

DynamicsPrediction predict_dynamics(const NtkGram& train, const Matrix& k_test, const Vector& y,
                                    std::span<const double> times) {
    const Eigen::Index n = train.size();
    if (y.size() != n) throw DimensionError("predict_dynamics: Y length must match K_train");
    if (k_test.cols() != n) throw DimensionError("predict_dynamics: K_test must be M × N");

    Spectrum spec = sym_eig(train.k);
    DynamicsPrediction out;
    const double lmax = spec.eigenvalues[0];
    if (!(lmax > 0.0)) throw ConditioningError("predict_dynamics: kernel has no positive eigenvalue");
    if (spec.eigenvalues[n - 1] < 1e-10 * lmax) {
        out.ridge_applied = true;
        out.ridge = 1e-8 * train.k.trace() / static_cast<double>(n);
        spec.eigenvalues.array() += out.ridge;
    }
    const double lmin = spec.eigenvalues[n - 1];
    if (!(lmin > 1e-15 * spec.eigenvalues[0])) {
        throw ConditioningError("predict_dynamics: kernel too ill-conditioned even after ridge " +
                                std::to_string(out.ridge));
    }

    const Vector qy = spec.eigenvectors * y;
    const Matrix test_basis = k_test * spec.eigenvectors.transpose();
    for (double t : times) {
        if (!(t >= 0.0)) throw DomainError("predict_dynamics: times must be non-negative");
        Vector gain(n);
        Vector residual(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double lambda = spec.eigenvalues[i];
            gain[i] = -std::expm1(-lambda * t) / lambda * qy[i];
            residual[i] = std::exp(-lambda * t) * std::abs(qy[i]);
        }
        out.times.push_back(t);
        out.predictions.push_back(test_basis * gain);
        out.residuals.push_back(std::move(residual));
    }
    return out;
}

std::vector<Vector> residual_decay(const NtkGram& k, const Vector& y,
                                   std::span<const double> times) {
    if (y.size() != k.size()) throw DimensionError("residual_decay: Y length must match K");
    const Spectrum spec = sym_eig(k.k);
    const Vector qy = (spec.eigenvectors * y).cwiseAbs();
    std::vector<Vector> out;
    for (double t : times) {
        if (!(t >= 0.0)) throw DomainError("residual_decay: times must be non-negative");
        out.push_back((-spec.eigenvalues.array() * t).exp().matrix().cwiseProduct(qy));
    }
    return out;
}

std::string to_string(SnapshotTag tag) {
    switch (tag) {
        case SnapshotTag::Start: return "start";
        case SnapshotTag::Mid: return "mid";
        case SnapshotTag::End: return "end";
    }
    return "unknown";
}

SpectrumSnapshot spectrum_snapshot(const CoordinateModel& model, const Matrix& points,
                                   bool include_grid, SnapshotTag tag, int epoch,
                                   const NtkOptions& options) {
    SpectrumSnapshot snap;
    snap.spectrum = sym_eig(empirical_ntk(model, points, include_grid, options).k);
    snap.tag = tag;
    snap.epoch = epoch;
    snap.include_grid = include_grid;
    return snap;
}

Vector resample_spectrum(const Vector& eigenvalues, std::size_t length, double floor) {
    const Eigen::Index n = eigenvalues.size();
    if (n == 0 || length == 0) throw DimensionError("resample_spectrum: empty input");
    const Vector logs = clamped_eigenvalues(eigenvalues, floor).array().log10();
    Vector out(static_cast<Eigen::Index>(length));
    for (std::size_t i = 0; i < length; ++i) {
        const double rank = length == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(length - 1);
        const double pos = rank * static_cast<double>(n - 1);
        const auto lo = static_cast<Eigen::Index>(std::floor(pos));
        const Eigen::Index hi = std::min(lo + 1, n - 1);
        const double frac = pos - static_cast<double>(lo);
        out[static_cast<Eigen::Index>(i)] = std::pow(10.0, (1.0 - frac) * logs[lo] + frac * logs[hi]);
    }
    return out;
}

Vector mean_spectrum(const std::vector<Vector>& spectra, std::size_t length, double floor) {
    if (spectra.empty()) throw DimensionError("mean_spectrum: no spectra");
    Vector sum = Vector::Zero(static_cast<Eigen::Index>(length));
    for (const auto& s : spectra) sum += resample_spectrum(s, length, floor);
    return sum / static_cast<double>(spectra.size());
}

void write_dynamics_csv(std::ostream& out, std::span<const DynamicsRow> rows) {
    out << "t,sample_id,predicted,actual\n" << std::setprecision(17);
    for (const auto& r : rows) {
        out << r.t << ',' << r.sample_id << ',' << r.predicted << ',' << r.actual << '\n';
    }
}

}  // namespace ntklab
