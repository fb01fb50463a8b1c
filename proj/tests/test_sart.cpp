#include "doctest.h"
#include "support.hpp"

#include "owcnf/phantom.hpp"
#include "owcnf/sart.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

using namespace owcnf;
using testing::random_image;

namespace {

Image phantom(int size, std::uint64_t seed) {
    RrmSpec spec;
    spec.image_size = size;
    spec.seed = seed;
    return make_rrm_phantom(spec);
}

double residual(const Image& x, const Sinogram& y, const FanBeamGeometry& g) {
    const Sinogram ax = forward_project(x, g);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y.data[i] - ax.data[i]) * (y.data[i] - ax.data[i]);
    return std::sqrt(s);
}

// 2x2 image seen by two views of two bins each.
FanBeamGeometry tiny_geometry() {
    FanBeamGeometry g = FanBeamGeometry::make(2, 2, 2);
    g.angles = {0.3, 1.9};
    return g;
}

Eigen::MatrixXd dense_matrix(const FanBeamGeometry& g) {
    Eigen::MatrixXd a(g.n_rays(), g.n_pixels());
    for (std::size_t p = 0; p < g.n_pixels(); ++p) {
        Image e(g.image_size, g.image_size);
        e.data[p] = 1.0;
        const Sinogram col = forward_project(e, g);
        for (std::size_t r = 0; r < col.size(); ++r) a(r, p) = col.data[r];
    }
    return a;
}

// x + omega * Dcol^-1 A_S^T Drow^-1 (y_S - A_S x), zero weights skipped.
Eigen::VectorXd dense_update(const Eigen::MatrixXd& a, const std::vector<int>& rows, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& y, double omega) {
    Eigen::MatrixXd as(rows.size(), a.cols());
    Eigen::VectorXd ys(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        as.row(i) = a.row(rows[i]);
        ys(i) = y(rows[i]);
    }
    Eigen::VectorXd r = ys - as * x;
    const Eigen::VectorXd row_sum = as.rowwise().sum();
    for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = row_sum(i) > 0 ? r(i) / row_sum(i) : 0.0;
    Eigen::VectorXd bp = as.transpose() * r;
    const Eigen::VectorXd col_sum = as.colwise().sum().transpose();
    for (Eigen::Index j = 0; j < bp.size(); ++j) bp(j) = col_sum(j) > 0 ? bp(j) / col_sum(j) : 0.0;
    return x + omega * bp;
}

} // namespace

TEST_CASE("subset partitions") {
    const auto strided = make_subsets(10, 3, SubsetOrder::strided);
    CHECK(strided == std::vector<std::vector<int>>{{0, 3, 6, 9}, {1, 4, 7}, {2, 5, 8}});
    const auto seq = make_subsets(10, 3, SubsetOrder::sequential);
    std::vector<int> flat;
    for (const auto& s : seq) flat.insert(flat.end(), s.begin(), s.end());
    CHECK(flat == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
    CHECK(seq.front().front() == 0);
    CHECK_THROWS_AS(make_subsets(10, 11, SubsetOrder::strided), std::invalid_argument);
    CHECK_THROWS_AS(make_subsets(10, 0, SubsetOrder::strided), std::invalid_argument);
}

TEST_CASE("one pass on a dense 2x2 system matches the matrix form of the update") {
    const auto g = tiny_geometry();
    const Eigen::MatrixXd a = dense_matrix(g);
    REQUIRE(a.rows() == 4);
    REQUIRE(a.cols() == 4);
    const Image x_true = random_image(2, 2, 5, 0.2, 1.0);
    const Sinogram y = forward_project(x_true, g);
    const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data.data(), 4);
    const Image x0 = random_image(2, 2, 6, 0.0, 0.5);
    const Eigen::VectorXd x0v = Eigen::Map<const Eigen::VectorXd>(x0.data.data(), 4);

    for (const int n_subsets : {1, 2}) {
        const OsSart sart(g, n_subsets, SubsetOrder::sequential);
        const Image got = sart.run(x0, y, 0.7, 1, false);
        Eigen::VectorXd want = x0v;
        for (int k = 0; k < n_subsets; ++k) {
            std::vector<int> rows;
            for (const int v : sart.subset(k))
                for (int b = 0; b < g.n_bins; ++b) rows.push_back(v * g.n_bins + b);
            want = dense_update(a, rows, want, yv, 0.7);
        }
        for (int i = 0; i < 4; ++i) CHECK(std::abs(got.data[i] - want(i)) <= 1e-6);
    }
}

TEST_CASE("the true image is a fixed point for every subset count") {
    const auto g = FanBeamGeometry::desk();
    const Image x = phantom(64, 3);
    const Sinogram y = forward_project(x, g);
    for (const int n : {1, 10, 30}) {
        const OsSart sart(g, n);
        CHECK(sart.run(x, y, 0.5, 2, true).data == x.data);
        for (int k = 0; k < n; ++k) {
            const Image d = sart.correction(x, y, k);
            CHECK(std::all_of(d.data.begin(), d.data.end(), [](double v) { return v == 0.0; }));
        }
    }
}

TEST_CASE("zero relaxation leaves the start unchanged") {
    const auto g = FanBeamGeometry::desk();
    const Image x0 = random_image(64, 64, 8);
    const Sinogram y = forward_project(phantom(64, 4), g);
    CHECK(OsSart(g, 10).run(x0, y, 0.0, 1, false).data == x0.data);
    SartConfig cfg;
    cfg.omega = 0.0;
    CHECK_THROWS_AS(os_sart(x0, y, g, cfg), std::invalid_argument);
}

TEST_CASE("correction from zero with nonnegative data is nonnegative") {
    const auto g = FanBeamGeometry::desk();
    const Sinogram y = forward_project(phantom(64, 5), g);
    const OsSart sart(g, 10);
    const Image d = sart.correction(Image(64, 64), y, 3);
    CHECK(std::all_of(d.data.begin(), d.data.end(), [](double v) { return v >= 0.0; }));
}

TEST_CASE("one subset and one pass equal x plus omega times the correction") {
    const auto g = FanBeamGeometry::make(32, 60, 64);
    const Image x = random_image(32, 32, 9);
    const Sinogram y = forward_project(random_image(32, 32, 10), g);
    const auto views = g.all_views();
    const Image d = sart_correction(x, y, g, views);
    SartConfig cfg;
    cfg.omega = 0.37;
    cfg.n_subsets = 1;
    cfg.nonneg_clamp = false;
    const Image got = os_sart(x, y, g, cfg);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got.data[i] - (x.data[i] + 0.37 * d.data[i])) <= 1e-7);

    // The cached solver and the one-off correction agree.
    const Image dk = OsSart(g, 1).correction(x, y, 0);
    CHECK(testing::max_abs_diff(dk.data, d.data) <= 1e-12);
}

TEST_CASE("the residual is non-increasing over 20 passes at omega 0.3 on five phantoms") {
    const auto g = FanBeamGeometry::desk();
    const OsSart sart(g, 10);
    for (std::uint64_t seed = 20; seed < 25; ++seed) {
        const Sinogram y = forward_project(phantom(64, seed), g);
        Image x(64, 64);
        double prev = residual(x, y, g);
        for (int pass = 0; pass < 20; ++pass) {
            x = sart.run(std::move(x), y, 0.3, 1, true);
            const double r = residual(x, y, g);
            CHECK(r <= prev);
            prev = r;
        }
    }
}

TEST_CASE("summed corrections of the last pass are reported") {
    const auto g = FanBeamGeometry::desk();
    const OsSart sart(g, 10);
    const Sinogram y = forward_project(phantom(64, 30), g);
    const Image x0 = random_image(64, 64, 31, 0.0, 0.2);
    Image delta;
    const Image x1 = sart.run(x0, y, 0.4, 1, false, &delta);
    for (std::size_t i = 0; i < x1.size(); ++i) CHECK(x1.data[i] == doctest::Approx(x0.data[i] + 0.4 * delta.data[i]).epsilon(1e-9));
    CHECK(sart.run(x0, y, 0.4, 1, false).data == x1.data);
}
