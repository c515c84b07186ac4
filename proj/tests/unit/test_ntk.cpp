#include "ntklab/errors.hpp"
#include "ntklab/ntk.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

using namespace ntklab;
using ntklab::testing::random_matrix;
using ntklab::testing::random_psd;

namespace {

Matrix unit_points(Eigen::Index n, int dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix p(n, dim);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = u(rng);
    return p;
}

// K[i][j] from explicit dot products of param_jacobian vectors.
Matrix pairwise_kernel(const CoordinateModel& m, const Matrix& pts, bool include_grid, int channel = 0) {
    const auto mlp_n = static_cast<Eigen::Index>(m.mlp_parameter_count());
    std::vector<Vector> jac;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        Vector row = pts.row(i).transpose();
        Vector j = param_jacobian(m, std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), channel);
        if (!include_grid) j.tail(j.size() - mlp_n).setZero();
        jac.push_back(std::move(j));
    }
    Matrix k(pts.rows(), pts.rows());
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        for (Eigen::Index j = 0; j < pts.rows(); ++j) {
            double acc = 0.0;
            for (Eigen::Index p = 0; p < jac[0].size(); ++p) acc += jac[static_cast<std::size_t>(i)][p] * jac[static_cast<std::size_t>(j)][p];
            k(i, j) = acc;
        }
    }
    return k;
}

double rel_err(const Matrix& a, const Matrix& b) { return max_abs(a - b) / std::max(1.0, max_abs(b)); }

MlpConfig mlp(std::vector<int> hidden, int out = 1) {
    MlpConfig c;
    c.hidden = std::move(hidden);
    c.output_dim = out;
    return c;
}

CoordinateModel grid_model(std::uint64_t seed, double grid_scale = 40.0) {
    CoordinateModel m = init_model(MpeSpec{2, 2, {5, 9}}, mlp({24, 24}, 3), seed);
    for (auto& layer : m.grids()->layers) {
        for (auto& w : layer.weights) w *= grid_scale;
    }
    return m;
}

}  // namespace

TEST(EmpiricalNtk, FactoredStackedAndPairwiseAgree) {
    const Matrix pts = unit_points(17, 2, 1);
    std::vector<CoordinateModel> models = {
        init_model(IdentitySpec{2}, mlp({20, 20}), 1),
        init_model(FfeSpec{3, 2}, mlp({20, 20}, 3), 2),
        grid_model(3),
    };
    for (const auto& m : models) {
        for (bool include_grid : {true, false}) {
            for (int channel = 0; channel < m.output_dim(); ++channel) {
                NtkOptions f;
                f.channel = channel;
                NtkOptions s = f;
                s.method = NtkMethod::Stacked;
                const Matrix oracle = pairwise_kernel(m, pts, include_grid, channel);
                const NtkGram kf = empirical_ntk(m, pts, include_grid, f);
                const NtkGram ks = empirical_ntk(m, pts, include_grid, s);
                EXPECT_LT(rel_err(kf.k, oracle), 1e-10);
                EXPECT_LT(rel_err(ks.k, oracle), 1e-10);
                EXPECT_EQ(kf.k, kf.k.transpose());
                const bool mlp_only = !include_grid && m.grid_parameter_count() > 0;
                EXPECT_EQ(kf.component, mlp_only ? KernelComponent::MlpOnly : KernelComponent::Full);
            }
        }
    }
}

TEST(EmpiricalNtk, ThreeDimensionalGridModel) {
    CoordinateModel m = init_model(MpeSpec{3, 2, {3, 6}}, mlp({16, 16}), 4);
    for (auto& layer : m.grids()->layers) {
        for (auto& w : layer.weights) w *= 40.0;
    }
    const Matrix pts = unit_points(12, 3, 2);
    EXPECT_LT(rel_err(empirical_ntk(m, pts, true).k, pairwise_kernel(m, pts, true)), 1e-10);
}

TEST(EmpiricalNtk, IsPsdAndSymmetric) {
    const CoordinateModel m = grid_model(5);
    const NtkGram g = empirical_ntk(m, unit_points(40, 2, 3), true);
    const Spectrum s = sym_eig(g.k);
    EXPECT_GE(s.eigenvalues.minCoeff(), -1e-9 * s.eigenvalues.maxCoeff());
}

TEST(EmpiricalNtk, DecomposesIntoMlpAndGridBlocks) {
    const CoordinateModel m = grid_model(6);
    const Matrix pts = unit_points(25, 2, 4);
    const Matrix full = empirical_ntk(m, pts, true).k;
    const Matrix mlp_only = empirical_ntk(m, pts, false).k;
    // Grid block oracle: (∂f/∂grid)·(∂f/∂grid) from the tail of the Jacobian.
    const auto mlp_n = static_cast<Eigen::Index>(m.mlp_parameter_count());
    Matrix tail(pts.rows(), static_cast<Eigen::Index>(m.grid_parameter_count()));
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        Vector row = pts.row(i).transpose();
        const Vector j = param_jacobian(m, std::span<const double>(row.data(), 2), 0);
        tail.row(i) = j.tail(j.size() - mlp_n).transpose();
    }
    const Matrix grid_block = tail * tail.transpose();
    EXPECT_LT(rel_err(full - mlp_only, grid_block), 1e-10);
    EXPECT_GT(max_abs(grid_block), 0.0);
}

TEST(EmpiricalNtk, CrossKernelMatchesGramBlocks) {
    const CoordinateModel m = grid_model(7);
    const Matrix a = unit_points(6, 2, 5);
    const Matrix b = unit_points(9, 2, 6);
    Matrix both(15, 2);
    both << a, b;
    const Matrix k = empirical_ntk(m, both, true).k;
    EXPECT_LT(rel_err(cross_ntk(m, a, b, true), k.block(0, 6, 6, 9)), 1e-12);
    EXPECT_LT(rel_err(cross_ntk(m, b, a, false, 0), empirical_ntk(m, both, false).k.block(6, 0, 9, 6)), 1e-12);
}

TEST(EmpiricalNtk, CapAndArgumentErrors) {
    const CoordinateModel m = init_model(IdentitySpec{2}, mlp({4}), 0);
    NtkOptions o;
    o.cap = 10;
    EXPECT_THROW(empirical_ntk(m, unit_points(11, 2, 1), true, o), CapacityError);
    EXPECT_NO_THROW(empirical_ntk(m, unit_points(10, 2, 1), true, o));
    EXPECT_THROW(empirical_ntk(m, Matrix(0, 2), true), DimensionError);
    EXPECT_THROW(empirical_ntk(m, unit_points(3, 3, 1), true), DimensionError);
    o.channel = 2;
    EXPECT_THROW(empirical_ntk(m, unit_points(3, 2, 1), true, o), DimensionError);
}

TEST(EmpiricalNtk, WideSingleLayerApproachesArcCosineKernel) {
    // f(x) = W² relu(W¹x + βb)/√n + βb², unscaled first layer.
    const double beta = 0.1;
    MlpConfig c = mlp({4096});
    c.beta = beta;
    c.input_scaling = InputScaling::None;
    const Matrix pts = unit_points(5, 2, 9);
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = 0; s < 8; ++s) seeds.push_back(s);
    const Matrix avg = seed_averaged_ntk(IdentitySpec{2}, c, seeds, pts, true);

    Matrix analytic(5, 5);
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            const double sij = pts.row(i).dot(pts.row(j)) + beta * beta;
            const double sii = pts.row(i).squaredNorm() + beta * beta;
            const double sjj = pts.row(j).squaredNorm() + beta * beta;
            const double cosine = std::clamp(sij / std::sqrt(sii * sjj), -1.0, 1.0);
            const double theta = std::acos(cosine);
            const double pi = std::numbers::pi;
            const double e_relu = std::sqrt(sii * sjj) / (2 * pi) * (std::sin(theta) + (pi - theta) * cosine);
            const double e_step = (pi - theta) / (2 * pi);
            analytic(i, j) = e_relu + sij * e_step + beta * beta;
        }
    }
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            EXPECT_NEAR(avg(i, j), analytic(i, j), 0.05 * std::sqrt(analytic(i, i) * analytic(j, j)));
        }
    }
}

TEST(Subsample, EvenlySpacedAndBounded) {
    EXPECT_EQ(stratified_subsample(5, 10), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
    const auto s = stratified_subsample(1000, 10);
    ASSERT_EQ(s.size(), 10u);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s[i], 50 + 100 * i);
}

TEST(Subsample, PixelLatticeCoversImage) {
    const auto ids = stratified_pixel_subsample(64, 64, 1024);
    EXPECT_EQ(ids.size(), 1024u);
    EXPECT_EQ(ids.front(), 64u + 1u);
    EXPECT_EQ(std::set<std::size_t>(ids.begin(), ids.end()).size(), ids.size());
    for (std::size_t cap : {1u, 7u, 100u, 512u, 4095u}) {
        const auto sub = stratified_pixel_subsample(64, 48, cap);
        EXPECT_LE(sub.size(), cap);
        EXPECT_GE(sub.size(), 1u);
        for (auto id : sub) EXPECT_LT(id, 64u * 48u);
    }
    EXPECT_EQ(stratified_pixel_subsample(4, 4, 100).size(), 16u);
}

TEST(Weyl, LiftHoldsForPsdSum) {
    std::mt19937_64 rng(11);
    NtkGram base, composed;
    base.k = random_psd(30, 10, rng);
    composed.k = base.k + random_psd(30, 30, rng);
    const WeylReport r = weyl_check(base, composed);
    EXPECT_TRUE(r.pass);
    EXPECT_TRUE(r.precondition_ok);
    EXPECT_GT(r.plus_min_eigenvalue, 0.0);
    ASSERT_EQ(r.rows.size(), 30u);
    for (const auto& row : r.rows) EXPECT_GE(row.lambda_composed, row.lambda_base + r.plus_min_eigenvalue - r.epsilon);
    EXPECT_GE(r.min_margin, -r.epsilon);
}

TEST(Weyl, HoldsForEmpiricalDecomposition) {
    const CoordinateModel m = grid_model(12);
    const Matrix pts = unit_points(40, 2, 13);
    const WeylReport r = weyl_check(empirical_ntk(m, pts, false), empirical_ntk(m, pts, true));
    EXPECT_TRUE(r.pass);
    EXPECT_TRUE(r.precondition_ok);
}

TEST(Weyl, FlagsIndefiniteDifference) {
    std::mt19937_64 rng(14);
    NtkGram base, composed;
    base.k = random_psd(10, 10, rng);
    composed.k = base.k - 0.5 * random_psd(10, 2, rng);
    const WeylReport r = weyl_check(base, composed);
    EXPECT_FALSE(r.precondition_ok);
    EXPECT_FALSE(r.pass);
    NtkGram small;
    small.k = Matrix::Identity(3, 3);
    EXPECT_THROW(weyl_check(base, small), DimensionError);
    std::stringstream csv;
    write_weyl_csv(csv, r);
    std::string header;
    std::getline(csv, header);
    EXPECT_EQ(header, "index,lambda_base,lambda_composed,margin");
}

TEST(Dynamics, MatchesIntegratedLinearizedFlow) {
    std::mt19937_64 rng(15);
    const Matrix all = random_psd(14, 14, rng) / 14.0;
    NtkGram train;
    train.k = all.topLeftCorner(10, 10);
    const Matrix k_test = all.bottomLeftCorner(4, 10);
    const Vector y = random_matrix(10, 1, rng);
    const std::vector<double> times = {0.0, 0.5, 2.0, 5.0};
    const DynamicsPrediction pred = predict_dynamics(train, k_test, y, times);
    EXPECT_FALSE(pred.ridge_applied);

    // RK4 on r' = −K r (train residual, f(0) = 0) and g' = −K_test r.
    Vector r = -y;
    Vector g = Vector::Zero(4);
    const double dt = 1e-3;
    double t = 0.0;
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        while (t < times[ti] - 1e-12) {
            const Vector k1 = -train.k * r;
            const Vector k2 = -train.k * (r + 0.5 * dt * k1);
            const Vector k3 = -train.k * (r + 0.5 * dt * k2);
            const Vector k4 = -train.k * (r + dt * k3);
            g += -k_test * (dt / 6.0) * (r + 2 * (r + 0.5 * dt * k1) + 2 * (r + 0.5 * dt * k2) + (r + dt * k3));
            r += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
            t += dt;
        }
        EXPECT_LT((pred.predictions[ti] - g).cwiseAbs().maxCoeff(), 1e-6) << "t=" << times[ti];
    }
}

TEST(Dynamics, TrainPredictionsConvergeToTargets) {
    std::mt19937_64 rng(16);
    NtkGram train;
    train.k = random_psd(8, 8, rng) + Matrix::Identity(8, 8);
    const Vector y = random_matrix(8, 1, rng);
    const std::vector<double> times = {1e3};
    const DynamicsPrediction pred = predict_dynamics(train, train.k, y, times);
    EXPECT_LT((pred.predictions[0] - y).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_EQ(pred.residuals[0].size(), 8);
}

TEST(Dynamics, RidgeOnSingularKernel) {
    std::mt19937_64 rng(17);
    NtkGram train;
    train.k = random_psd(8, 3, rng);
    const Vector y = random_matrix(8, 1, rng);
    const std::vector<double> times = {1.0};
    const DynamicsPrediction pred = predict_dynamics(train, train.k, y, times);
    EXPECT_TRUE(pred.ridge_applied);
    EXPECT_NEAR(pred.ridge, 1e-8 * train.k.trace() / 8, 1e-20);
    EXPECT_TRUE(pred.predictions[0].allFinite());

    NtkGram zero;
    zero.k = Matrix::Zero(3, 3);
    EXPECT_THROW(predict_dynamics(zero, zero.k, Vector::Ones(3), times), ConditioningError);
    const std::vector<double> negative = {-1.0};
    EXPECT_THROW(predict_dynamics(train, train.k, y, negative), DomainError);
    EXPECT_THROW(predict_dynamics(train, train.k, Vector::Ones(3), times), DimensionError);
}

TEST(Dynamics, ResidualDecayIsMonotone) {
    std::mt19937_64 rng(18);
    NtkGram k;
    k.k = random_psd(12, 12, rng);
    const Vector y = random_matrix(12, 1, rng);
    const std::vector<double> times = {0.0, 0.1, 1.0, 10.0};
    const auto decay = residual_decay(k, y, times);
    const Spectrum s = sym_eig(k.k);
    EXPECT_LT((decay[0] - (s.eigenvectors * y).cwiseAbs()).cwiseAbs().maxCoeff(), 1e-12);
    for (std::size_t t = 1; t < times.size(); ++t) {
        EXPECT_TRUE((decay[t].array() <= decay[t - 1].array() + 1e-15).all());
    }
    // Larger eigenvalues decay faster.
    EXPECT_LT(decay[3][0] / decay[0][0], decay[3][11] / decay[0][11] + 1e-15);
}

TEST(Spectrum, SnapshotTagsAndResampling) {
    EXPECT_EQ(to_string(SnapshotTag::Start), "start");
    EXPECT_EQ(to_string(SnapshotTag::Mid), "mid");
    EXPECT_EQ(to_string(SnapshotTag::End), "end");

    Vector ev(3);
    ev << 100.0, 1.0, 0.0;
    const Vector r = resample_spectrum(ev, 5);
    EXPECT_NEAR(r[0], 100.0, 1e-9);
    EXPECT_NEAR(r[1], 10.0, 1e-9);
    EXPECT_NEAR(r[2], 1.0, 1e-12);
    EXPECT_NEAR(r[4], kEigenvalueFloor, 1e-24);
    EXPECT_NEAR(std::log10(r[3]), -6.0, 1e-9);

    const Vector mean = mean_spectrum({ev, Vector::Constant(3, 2.0)}, 3);
    EXPECT_NEAR(mean[0], 51.0, 1e-9);
    EXPECT_THROW(resample_spectrum(Vector(0), 5), DimensionError);
}

TEST(Spectrum, SnapshotMatchesDirectEigendecomposition) {
    const CoordinateModel m = grid_model(19);
    const Matrix pts = unit_points(30, 2, 20);
    const SpectrumSnapshot snap = spectrum_snapshot(m, pts, true, SnapshotTag::Mid, 7);
    EXPECT_EQ(snap.epoch, 7);
    EXPECT_EQ(snap.tag, SnapshotTag::Mid);
    const Eigen::SelfAdjointEigenSolver<Matrix> es(empirical_ntk(m, pts, true).k);
    const Vector expected = es.eigenvalues().reverse();
    EXPECT_LT((snap.spectrum.eigenvalues - expected).cwiseAbs().maxCoeff(), 1e-9 * expected[0]);
}

TEST(Spectrum, GridRaisesSmallEigenvalues) {
    // The grid block is PSD, so every eigenvalue of the full kernel dominates
    // the MLP-only one.
    const CoordinateModel m = grid_model(21, 200.0);
    const Matrix pts = unit_points(60, 2, 22);
    const Vector full = sym_eig(empirical_ntk(m, pts, true).k).eigenvalues;
    const Vector part = sym_eig(empirical_ntk(m, pts, false).k).eigenvalues;
    for (Eigen::Index i = 0; i < full.size(); ++i) EXPECT_GE(full[i], part[i] - 1e-8 * full[0]);
    EXPECT_GT(clamped_eigenvalues(full).array().log10().mean(),
              clamped_eigenvalues(part).array().log10().mean());
}
