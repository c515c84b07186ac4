#include "ntklab/diagnostics.hpp"
#include "ntklab/errors.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace ntklab;

namespace {

CoordinateModel relu_model(std::vector<int> hidden, std::uint64_t seed) {
    MlpConfig c;
    c.hidden = std::move(hidden);
    return init_model(IdentitySpec{2}, c, seed);
}

}  // namespace

TEST(GridImage, NormalizesAndMapsNodesToPixels) {
    GridStack g = make_grid_stack(MpeSpec{2, 2, {3}}, 0, 0.0);
    auto& w = g.layers[0].weights;
    // slot 1 holds ix + 10·iy.
    for (int ix = 0; ix < 3; ++ix) {
        for (int iy = 0; iy < 3; ++iy) w[static_cast<std::size_t>((ix * 3 + iy) * 2 + 1)] = ix + 10.0 * iy;
    }
    const Image img = grid_to_image(g, 0, 1);
    EXPECT_EQ(img.width, 3);
    EXPECT_EQ(img.channels, 1);
    EXPECT_EQ(img.at(0, 0, 0), 0.0);
    EXPECT_EQ(img.at(2, 2, 0), 1.0);
    EXPECT_NEAR(img.at(2, 0, 0), 2.0 / 22.0, 1e-15);
    EXPECT_NEAR(img.at(0, 1, 0), 10.0 / 22.0, 1e-15);
    // Slot 0 is constant.
    for (double v : grid_to_image(g, 0, 0).data) EXPECT_EQ(v, 0.5);
    EXPECT_THROW(grid_to_image(g, 1, 0), DimensionError);
    EXPECT_THROW(grid_to_image(g, 0, 2), DimensionError);
    EXPECT_THROW(grid_to_image(make_grid_stack(MpeSpec{3, 1, {3}}, 0), 0, 0), DomainError);
}

TEST(ActivationPattern, MatchesPreActivationSigns) {
    const CoordinateModel m = relu_model({20, 50, 70}, 3);
    Matrix pts(5, 2);
    pts << 0.1, 0.2, 0.9, 0.3, 0.5, 0.5, 0.0, 1.0, 0.7, 0.7;
    const auto patterns = activation_patterns(m, pts);
    ASSERT_EQ(patterns.size(), 5u);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        const auto& p = patterns[static_cast<std::size_t>(i)];
        EXPECT_EQ(p.bits, 140u);
        EXPECT_EQ(p.words.size(), 3u);
        // Reference: loop the layers by hand.
        Vector z = pts.row(i).transpose();
        std::size_t bit = 0;
        std::size_t ones = 0;
        for (std::size_t l = 0; l + 1 < m.network.layers.size(); ++l) {
            const auto& layer = m.network.layers[l];
            const Vector pre = layer.weight * z / std::sqrt(static_cast<double>(z.size())) + 0.1 * layer.bias;
            for (Eigen::Index n = 0; n < pre.size(); ++n, ++bit) {
                EXPECT_EQ(p.test(bit), pre[n] > 0.0);
                ones += pre[n] > 0.0;
            }
            z = pre.cwiseMax(0.0);
        }
        EXPECT_EQ(p.popcount(), ones);
        const double x[] = {pts(i, 0), pts(i, 1)};
        EXPECT_EQ(activation_pattern(m, x), p);
    }
    ActivationPatternHash h;
    EXPECT_EQ(h(patterns[0]), h(activation_pattern(m, std::vector<double>{0.1, 0.2})));
}

TEST(ActivationPattern, RequiresRelu) {
    MlpConfig c;
    c.hidden = {4};
    c.activation = Activation::Identity;
    const CoordinateModel m = init_model(IdentitySpec{2}, c, 0);
    EXPECT_THROW(activation_pattern(m, std::vector<double>{0.1, 0.2}), DomainError);
    EXPECT_THROW(count_regions(m, 4), DomainError);
}

TEST(Regions, SingleLayerRespectsArrangementBound) {
    // n lines cut the plane into at most 1 + n + n(n−1)/2 regions.
    for (int n : {1, 2, 3, 5}) {
        const CoordinateModel m = relu_model({n}, static_cast<std::uint64_t>(n));
        const RegionCount r = count_regions(m, 128);
        EXPECT_LE(r.count, static_cast<std::size_t>(1 + n + n * (n - 1) / 2));
        EXPECT_GE(r.count, 1u);
        // Independent count of distinct sign vectors on the same lattice.
        std::set<std::vector<bool>> seen;
        for (int row = 0; row < 128; ++row) {
            for (int col = 0; col < 128; ++col) {
                const Eigen::Vector2d x(col / 127.0, row / 127.0);
                const auto& l0 = m.network.layers[0];
                std::vector<bool> s;
                for (int k = 0; k < n; ++k) s.push_back(l0.weight.row(k).dot(x) / std::sqrt(2.0) + 0.1 * l0.bias[k] > 0.0);
                seen.insert(s);
            }
        }
        EXPECT_EQ(r.count, seen.size());
    }
}

TEST(Regions, IdsAreDenseAndFirstSeen) {
    const CoordinateModel m = relu_model({8, 8}, 11);
    const RegionCount r = count_regions(m, 64);
    EXPECT_EQ(r.resolution, 64);
    ASSERT_EQ(r.region_ids.size(), 64u * 64u);
    EXPECT_EQ(r.region_ids[0], 0);
    int next = 0;
    for (int id : r.region_ids) {
        EXPECT_LE(id, next);
        if (id == next) ++next;
    }
    EXPECT_EQ(static_cast<std::size_t>(next), r.count);
    const Image img = region_image(r);
    EXPECT_EQ(img.channels, 3);
    EXPECT_EQ(img.width, 64);
    EXPECT_THROW(count_regions(m, 0), DimensionError);
}

TEST(Regions, WiderNetworksCutMoreRegions) {
    EXPECT_LT(count_regions(relu_model({4, 4}, 1), 128).count,
              count_regions(relu_model({64, 64}, 1), 128).count);
}

TEST(Pearson, KnownValues) {
    const std::vector<double> a = {1, 2, 3, 4};
    const std::vector<double> b = {2, 4, 6, 8};
    const std::vector<double> c = {4, 3, 2, 1};
    const std::vector<double> flat = {5, 5, 5, 5};
    EXPECT_NEAR(pearson(a, b), 1.0, 1e-15);
    EXPECT_NEAR(pearson(a, c), -1.0, 1e-15);
    EXPECT_EQ(pearson(a, flat), 0.0);
    const std::vector<double> d = {1, 0, 1, 0};
    // cov = −0.5·... computed by hand: mean a 2.5, mean d 0.5.
    EXPECT_NEAR(pearson(a, d), -0.4472135954999579, 1e-14);
    EXPECT_THROW(pearson(a, std::vector<double>{1.0}), DimensionError);
}

TEST(GridCorrelation, GridHoldingTheImageCorrelatesPerfectly) {
    Image target(9, 9, 3);
    for (int y = 0; y < 9; ++y) {
        for (int x = 0; x < 9; ++x) {
            for (int c = 0; c < 3; ++c) target.at(x, y, c) = std::sin(0.7 * x) * std::cos(0.4 * y + c) * 0.5 + 0.5;
        }
    }
    const Image gray = to_grayscale(target);
    GridStack g = make_grid_stack(MpeSpec{2, 1, {9}}, 0, 0.0);
    for (int ix = 0; ix < 9; ++ix) {
        for (int iy = 0; iy < 9; ++iy) g.layers[0].weights[static_cast<std::size_t>(ix * 9 + iy)] = 3.0 * gray.at(ix, iy, 0) - 1.0;
    }
    EXPECT_NEAR(grid_image_correlation(g, 0, 0, target), 1.0, 1e-12);
    for (auto& w : g.layers[0].weights) w = -w;
    EXPECT_NEAR(grid_image_correlation(g, 0, 0, target), -1.0, 1e-12);
    EXPECT_THROW(grid_image_correlation(g, 1, 0, target), DimensionError);
}
