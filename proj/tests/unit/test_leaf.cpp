#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fspn/leaf.hpp"

using namespace fspn;

namespace {

// Naive box sum over a row-major lattice, last axis fastest.
double brute_box(const std::vector<int>& dims, const std::vector<double>& masses, const std::vector<int>& lo,
                 const std::vector<int>& hi)
{
    double s = 0.0;
    std::vector<int> idx(dims.size(), 0);
    for (std::size_t flat = 0; flat < masses.size(); ++flat) {
        std::size_t rem = flat;
        for (std::size_t a = dims.size(); a-- > 0;) {
            idx[a] = static_cast<int>(rem % static_cast<std::size_t>(dims[a]));
            rem /= static_cast<std::size_t>(dims[a]);
        }
        bool in = true;
        for (std::size_t a = 0; a < dims.size(); ++a)
            in = in && idx[a] >= lo[a] && idx[a] <= hi[a];
        if (in)
            s += masses[flat];
    }
    return s;
}

}  // namespace

TEST_CASE("histogram range mass")
{
    Histogram h{{0.1, 0.2, 0.3, 0.4}};
    CHECK(h.mass(Interval::closed(1, 2)) == doctest::Approx(0.5));
    CHECK(h.mass(Interval::closed(0, 3)) == doctest::Approx(1.0));
    CHECK(h.mass(Interval::point(3)) == doctest::Approx(0.4));
}

TEST_CASE("dense joint box mass matches naive summation")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::vector<int> dims{3, 4, 5};
    std::vector<double> m(60);
    double total = 0.0;
    for (auto& x : m)
        total += (x = u(rng));
    for (auto& x : m)
        x /= total;
    DenseJointHistogram d(dims, m);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<int> lo(3), hi(3);
        for (int a = 0; a < 3; ++a) {
            int x = std::uniform_int_distribution<int>(0, dims[a] - 1)(rng);
            int y = std::uniform_int_distribution<int>(0, dims[a] - 1)(rng);
            lo[a] = std::min(x, y);
            hi[a] = std::max(x, y);
        }
        CHECK(d.box_mass(lo, hi) == doctest::Approx(brute_box(dims, m, lo, hi)).epsilon(1e-12));
    }
    const int p[3] = {2, 3, 4};
    CHECK(d.point_mass(p) == m[d.flat_index(p)]);
    CHECK(d.flat_index(p) == 59);
}

TEST_CASE("sparse joint box mass counts unlisted cells at the default mass")
{
    // 3x3 lattice, two listed cells, 7 cells at 0.02 each
    SparseJointHistogram s{{3, 3}, {0, 0, 2, 1}, {0.5, 0.36}, 0.02};
    CHECK(s.lattice_size() == 9.0);
    const int a[2] = {0, 0};
    const int b[2] = {1, 1};
    CHECK(s.point_mass(a) == doctest::Approx(0.5));
    CHECK(s.point_mass(b) == doctest::Approx(0.02));
    const int lo[2] = {0, 0}, hi[2] = {2, 2};
    CHECK(s.box_mass(lo, hi) == doctest::Approx(1.0));
    const int lo2[2] = {1, 0}, hi2[2] = {2, 1};
    // cells (1,0) (1,1) (2,0) default, (2,1) listed
    CHECK(s.box_mass(lo2, hi2) == doctest::Approx(0.36 + 3 * 0.02));
    std::vector<VariableMeta> vars{VariableMeta::discrete("A", 3), VariableMeta::discrete("B", 3)};
    const int scope[2] = {0, 1};
    CHECK(leaf_check(s, scope, vars) == "");
}

TEST_CASE("univariate gaussian mixture mass treats domain edges as unbounded")
{
    const auto meta = VariableMeta::continuous("Y", -3.0, 3.0);
    GaussianMixture g{{1.0}, {0.0}, {1.0}};
    CHECK(g.mass(full_interval(meta), meta) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(g.mass(Interval::closed(-3.0, 0.0), meta) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(g.mass(Interval::closed(0.0, 1.0), meta) == doctest::Approx(0.3413447460685429).epsilon(1e-10));
    CHECK(g.log_density(0.0) == doctest::Approx(-0.5 * std::log(2 * std::numbers::pi)));
}

TEST_CASE("bivariate gaussian orthant mass")
{
    const double rho = 0.9;
    Eigen::MatrixXd cov(2, 2);
    cov << 1.0, rho, rho, 1.0;
    MvGaussianMixture mv({1.0}, {Eigen::VectorXd::Zero(2)}, {cov});
    const double inf = std::numeric_limits<double>::infinity();
    const double lo[2] = {0.0, 0.0}, hi[2] = {inf, inf};
    const double orthant = 0.25 + std::asin(rho) / (2 * std::numbers::pi);
    const double got = mv.box_mass(lo, hi);
    CHECK(got == doctest::Approx(orthant).epsilon(1e-4));

    // Monte Carlo oracle, 10^6 draws
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> n01;
    const int draws = 1000000;
    int hits = 0;
    for (int i = 0; i < draws; ++i) {
        const double z1 = n01(rng);
        const double z2 = rho * z1 + std::sqrt(1 - rho * rho) * n01(rng);
        hits += (z1 >= 0 && z2 >= 0);
    }
    CHECK(std::abs(got - hits / static_cast<double>(draws)) < 0.01);

    const double all_lo[2] = {-inf, -inf};
    CHECK(mv.box_mass(all_lo, hi) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("trivariate box mass agrees with Monte Carlo")
{
    Eigen::MatrixXd cov(3, 3);
    cov << 2.0, 0.6, 0.3, 0.6, 1.0, 0.4, 0.3, 0.4, 1.5;
    Eigen::VectorXd mu(3);
    mu << 0.5, -0.2, 0.1;
    MvGaussianMixture mv({1.0}, {mu}, {cov});
    const double lo[3] = {-0.5, -1.0, 0.0}, hi[3] = {1.5, 0.8, 2.0};
    const double got = mv.box_mass(lo, hi);

    std::mt19937_64 rng(99);
    std::normal_distribution<double> n01;
    const Eigen::MatrixXd chol = cov.llt().matrixL();
    const int draws = 400000;
    int hits = 0;
    for (int i = 0; i < draws; ++i) {
        Eigen::VectorXd z(3);
        for (int k = 0; k < 3; ++k)
            z(k) = n01(rng);
        const Eigen::VectorXd x = mu + chol * z;
        bool in = true;
        for (int k = 0; k < 3; ++k)
            in = in && x(k) >= lo[k] && x(k) <= hi[k];
        hits += in;
    }
    CHECK(std::abs(got - hits / static_cast<double>(draws)) < 0.005);
}

TEST_CASE("free parameter counts")
{
    CHECK(leaf_param_count(Histogram{{0.5, 0.5}}) == 1);
    CHECK(leaf_param_count(GaussianMixture{{0.4, 0.6}, {0, 1}, {1, 1}}) == 5);
    CHECK(leaf_param_count(DenseJointHistogram({2, 3}, std::vector<double>(6, 1.0 / 6))) == 5);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(2, 2);
    CHECK(leaf_param_count(MvGaussianMixture({1.0}, {Eigen::VectorXd::Zero(2)}, {cov})) == 5);
}

TEST_CASE("leaf check rejects unnormalized and mis-shaped leaves")
{
    std::vector<VariableMeta> vars{VariableMeta::discrete("A", 3)};
    const int scope[1] = {0};
    CHECK(leaf_check(Histogram{{0.2, 0.3, 0.4}}, scope, vars) != "");
    CHECK(leaf_check(Histogram{{0.5, 0.5}}, scope, vars) != "");
    CHECK(leaf_check(Histogram{{0.2, 0.3, 0.5}}, scope, vars) == "");
}
