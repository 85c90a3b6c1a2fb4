#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "tvdiff/random.hpp"
#include "tvdiff/spline/natural_spline.hpp"

using namespace tvdiff;
using namespace tvdiff::spline;
using Catch::Approx;

namespace {

/// Textbook Cox-de Boor recursion for a single B-spline, written
/// independently of the library's table version.
double cox_de_boor(const std::vector<double>& t, std::size_t i, int p, double x) {
    if (p == 0) {
        if (t[i] < t[i + 1] && x >= t[i] && x < t[i + 1]) return 1.0;
        // Close the last non-empty interval on the right.
        if (x == t.back() && t[i + 1] == t.back() && t[i] < t[i + 1]) return 1.0;
        return 0.0;
    }
    double v = 0.0;
    if (t[i + p] > t[i]) v += (x - t[i]) / (t[i + p] - t[i]) * cox_de_boor(t, i, p - 1, x);
    if (t[i + p + 1] > t[i + 1]) v += (t[i + p + 1] - x) / (t[i + p + 1] - t[i + 1]) * cox_de_boor(t, i + 1, p - 1, x);
    return v;
}

/// de Boor's algorithm for a cubic spline with coefficients c at x.
double de_boor(const std::vector<double>& t, const Eigen::VectorXd& c, double x) {
    const int p = 3;
    std::size_t k = p;
    while (k + 1 < t.size() - p - 1 && !(x < t[k + 1])) ++k;
    std::vector<double> d(p + 1);
    for (int j = 0; j <= p; ++j) d[j] = c(static_cast<Eigen::Index>(j + k - p));
    for (int r = 1; r <= p; ++r)
        for (int j = p; j >= r; --j) {
            const double alpha = (x - t[j + k - p]) / (t[j + 1 + k - r] - t[j + k - p]);
            d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j];
        }
    return d[p];
}

std::vector<double> clamped(double a, double b, const std::vector<double>& knots) {
    std::vector<double> t(4, a);
    t.insert(t.end(), knots.begin(), knots.end());
    t.insert(t.end(), 4, b);
    return t;
}

/// Truncated-power natural cubic spline basis with knots xi_1 < ... < xi_K
/// (the boundary knots included): 1, x, d_k(x) - d_{K-1}(x).
Eigen::VectorXd truncated_power_row(const std::vector<double>& xi, double x) {
    const std::size_t K = xi.size();
    const auto cube = [](double v) { return v > 0 ? v * v * v : 0.0; };
    const auto d = [&](std::size_t k) { return (cube(x - xi[k]) - cube(x - xi[K - 1])) / (xi[K - 1] - xi[k]); };
    Eigen::VectorXd row(static_cast<Eigen::Index>(K));
    row(0) = 1.0;
    row(1) = x;
    for (std::size_t k = 0; k + 2 < K; ++k) row(static_cast<Eigen::Index>(k + 2)) = d(k) - d(K - 2);
    return row;
}

std::vector<double> grid(double a, double b, int n) {
    std::vector<double> ts;
    for (int g = 0; g < n; ++g) ts.push_back(a + (b - a) * g / (n - 1));
    ts.back() = b;
    return ts;
}

std::vector<double> random_knots(Rng& rng, double a, double b, std::size_t k) {
    std::vector<double> knots;
    for (std::size_t j = 0; j < k; ++j) knots.push_back(draw_uniform(rng, a, b));
    std::sort(knots.begin(), knots.end());
    return knots;
}

}  // namespace

TEST_CASE("basis dimension is k + 2") {
    Rng rng(1);
    for (std::size_t k = 0; k <= 10; ++k) {
        NaturalSplineBasis basis(0.5, 20.5, random_knots(rng, 0.5, 20.5, k));
        CHECK(basis.dimension() == static_cast<Eigen::Index>(k + 2));
        CHECK(basis.matrix(grid(0.5, 20.5, 7)).cols() == static_cast<Eigen::Index>(k + 2));
    }
}

TEST_CASE("second derivative vanishes at both boundaries") {
    Rng rng(2);
    for (std::size_t k = 0; k <= 10; ++k) {
        SplineState s{0.5, 17.5, random_knots(rng, 0.5, 17.5, k), {}};
        s.omega = draw_standard_normal_vector(rng, static_cast<Eigen::Index>(k + 2));
        NaturalSplineBasis basis(s);
        CHECK(std::abs(basis.row(s.a, 2).dot(s.omega)) < 1e-8);
        CHECK(std::abs(basis.row(s.b, 2).dot(s.omega)) < 1e-8);
        // Central differences just inside the boundary agree.
        const double h = 1e-3;
        const auto f = [&](double t) { return evaluate_f(s, t); };
        const double fd_a = (f(s.a + 2 * h) - 2 * f(s.a + h) + f(s.a)) / (h * h);
        const double exact_a = basis.row(s.a + h, 2).dot(s.omega);
        CHECK(fd_a == Approx(exact_a).margin(1e-4 * (1 + std::abs(exact_a)) + 1e-3));
    }
}

TEST_CASE("linear functions are reproduced") {
    Rng rng(3);
    for (std::size_t k : {0u, 1u, 3u, 7u, 10u}) {
        std::vector<double> knots;
        if (k == 3) knots = {0.25, 0.5, 0.75};  // equispaced on [0, 1]
        else knots = random_knots(rng, 0.0, 1.0, k);
        NaturalSplineBasis basis(0.0, 1.0, knots);
        const auto ts = grid(0.0, 1.0, 50);
        const Eigen::MatrixXd X = basis.matrix(ts);
        Eigen::VectorXd y(50);
        for (int r = 0; r < 50; ++r) y(r) = 2.0 - 3.5 * ts[static_cast<std::size_t>(r)];
        const Eigen::VectorXd w = X.colPivHouseholderQr().solve(y);
        CHECK((X * w - y).cwiseAbs().maxCoeff() < 1e-9);
        Eigen::VectorXd t_only(50);
        for (int r = 0; r < 50; ++r) t_only(r) = ts[static_cast<std::size_t>(r)];
        const Eigen::VectorXd w2 = X.colPivHouseholderQr().solve(t_only);
        CHECK((X * w2 - t_only).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("B-spline table matches the scalar recursion") {
    Rng rng(4);
    const auto knots = random_knots(rng, 0.0, 10.0, 4);
    const auto t = clamped(0.0, 10.0, knots);
    for (double x : grid(0.0, 10.0, 37)) {
        const Eigen::VectorXd table = detail::bspline_basis(t, x, 4, 0);
        double sum = 0;
        for (std::size_t i = 0; i + 4 < t.size(); ++i) {
            CHECK(table(static_cast<Eigen::Index>(i)) == Approx(cox_de_boor(t, i, 3, x)).margin(1e-14));
            sum += table(static_cast<Eigen::Index>(i));
        }
        CHECK(sum == Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("evaluate_f matches de Boor evaluation through the natural transform") {
    Rng rng(5);
    SplineState s{1.0, 9.0, random_knots(rng, 1.0, 9.0, 2), {}};
    s.omega = draw_standard_normal_vector(rng, 4);
    NaturalSplineBasis basis(s);
    const Eigen::VectorXd c = basis.transform() * s.omega;
    const auto t = clamped(s.a, s.b, s.knots);
    for (double x : grid(1.0, 9.0, 20)) CHECK(evaluate_f(s, x) == Approx(de_boor(t, c, x)).margin(1e-10));
}

TEST_CASE("basis spans the truncated-power natural splines") {
    Rng rng(6);
    for (std::size_t k : {0u, 1u, 2u, 5u}) {
        const double a = 0.5, b = 12.5;
        const auto knots = random_knots(rng, a, b, k);
        NaturalSplineBasis basis(a, b, knots);
        std::vector<double> xi = {a};
        xi.insert(xi.end(), knots.begin(), knots.end());
        xi.push_back(b);
        const auto ts = grid(a, b, 80);
        const Eigen::MatrixXd ours = basis.matrix(ts);
        Eigen::MatrixXd theirs(80, static_cast<Eigen::Index>(xi.size()));
        for (int r = 0; r < 80; ++r) theirs.row(r) = truncated_power_row(xi, ts[static_cast<std::size_t>(r)]);
        // Each basis reproduces the other's columns.
        const Eigen::MatrixXd fit1 = ours * ours.colPivHouseholderQr().solve(theirs);
        const Eigen::MatrixXd fit2 = theirs * theirs.colPivHouseholderQr().solve(ours);
        CHECK((fit1 - theirs).cwiseAbs().maxCoeff() < 1e-8 * (1 + theirs.cwiseAbs().maxCoeff()));
        CHECK((fit2 - ours).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("columns are linearly independent") {
    Rng rng(7);
    for (std::size_t k = 0; k <= 10; ++k) {
        NaturalSplineBasis basis(0.0, 1.0, random_knots(rng, 0.0, 1.0, k));
        const Eigen::MatrixXd X = basis.matrix(grid(0.0, 1.0, 400));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(X.transpose() * X);
        CHECK(eig.eigenvalues().minCoeff() > 0.0);
    }
}

TEST_CASE("f is C2 across knots") {
    SplineState s{0.0, 10.0, {2.5, 6.0, 7.0}, {}};
    Rng rng(8);
    s.omega = draw_standard_normal_vector(rng, 5);
    NaturalSplineBasis basis(s);
    const double h = 1e-7;
    for (double xi : s.knots)
        for (int deriv = 0; deriv <= 2; ++deriv) {
            const double left = basis.row(xi - h, deriv).dot(s.omega);
            const double right = basis.row(xi + h, deriv).dot(s.omega);
            CHECK(std::abs(left - right) < 1e-6);
        }
}

TEST_CASE("evaluation is linear in omega and zero at omega = 0") {
    SplineState s{0.0, 4.0, {1.0, 3.0}, Eigen::VectorXd::Zero(4)};
    for (double t : grid(0.0, 4.0, 9)) CHECK(evaluate_f(s, t) == 0.0);
    Rng rng(9);
    s.omega = draw_standard_normal_vector(rng, 4);
    SplineState scaled = s;
    scaled.omega *= -2.5;
    for (double t : grid(0.0, 4.0, 9)) CHECK(evaluate_f(scaled, t) == Approx(-2.5 * evaluate_f(s, t)).margin(1e-13));
}

TEST_CASE("constant coefficients give f = 1") {
    for (std::vector<double> knots : {std::vector<double>{}, {3.0}, {1.0, 2.0, 8.0}}) {
        SplineState s{0.0, 10.0, knots, {}};
        s.omega = NaturalSplineBasis(s).constant_coefficients();
        for (double t : grid(0.0, 10.0, 11)) CHECK(evaluate_f(s, t) == Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("invalid topologies and out-of-range abscissae are rejected") {
    CHECK_THROWS_AS(NaturalSplineBasis(1.0, 1.0, {}), std::invalid_argument);
    CHECK_THROWS_AS(NaturalSplineBasis(0.0, 1.0, {0.5, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(NaturalSplineBasis(0.0, 1.0, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(NaturalSplineBasis(0.0, 1.0, {0.7, 0.3}), std::invalid_argument);
    SplineState s{0.0, 1.0, {}, Eigen::VectorXd::Zero(3)};
    CHECK_THROWS_AS(validate(s), std::invalid_argument);
    s.omega = Eigen::VectorXd::Zero(2);
    CHECK_THROWS_AS(evaluate_f(s, 1.5), std::domain_error);
    CHECK_THROWS_AS(evaluate_f(s, -0.1), std::domain_error);
}

TEST_CASE("boundary sits half a unit outside the data") {
    const auto [a, b] = boundary_for({3.0, 1.0, 7.0});
    CHECK(a == 0.5);
    CHECK(b == 7.5);
    CHECK_THROWS_AS(boundary_for({}), std::invalid_argument);
}
