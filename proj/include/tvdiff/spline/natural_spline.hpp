#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tvdiff::spline {

/// Free-knot natural cubic spline f(t) = sum_j omega_j b_j(t) on [a, b].
///
/// `knots` holds the k interior knots in strictly increasing order inside the
/// open interval (a, b); `omega` has exactly k + 2 entries.
struct SplineState {
    double a = 0.0;
    double b = 1.0;
    std::vector<double> knots;
    Eigen::VectorXd omega = Eigen::VectorXd::Zero(2);

    std::size_t k() const noexcept { return knots.size(); }
    std::size_t dimension() const noexcept { return knots.size() + 2; }
};

/// Throws std::invalid_argument when the knot topology or coefficient length is invalid.
inline void validate_topology(double a, double b, const std::vector<double>& knots) {
    if (!(a < b)) throw std::invalid_argument("spline boundary requires a < b");
    for (std::size_t j = 0; j < knots.size(); ++j) {
        if (!(knots[j] > a && knots[j] < b))
            throw std::invalid_argument("spline knot " + std::to_string(j) + " outside (a, b)");
        if (j > 0 && !(knots[j] > knots[j - 1]))
            throw std::invalid_argument("spline knots must be strictly increasing");
    }
}

inline void validate(const SplineState& s) {
    validate_topology(s.a, s.b, s.knots);
    if (static_cast<std::size_t>(s.omega.size()) != s.dimension())
        throw std::invalid_argument("spline coefficient vector must have k + 2 entries");
}

namespace detail {

/// Full clamped cubic knot sequence: a x4, interior knots, b x4.
inline std::vector<double> clamped_knot_vector(double a, double b, const std::vector<double>& interior) {
    std::vector<double> tau;
    tau.reserve(interior.size() + 8);
    tau.insert(tau.end(), 4, a);
    tau.insert(tau.end(), interior.begin(), interior.end());
    tau.insert(tau.end(), 4, b);
    return tau;
}

/// Values (deriv = 0) or derivatives of every B-spline of the given order at x.
/// The right endpoint belongs to the last non-degenerate interval.
inline Eigen::VectorXd bspline_basis(const std::vector<double>& tau, double x, int order, int deriv) {
    const auto n_funcs = static_cast<Eigen::Index>(tau.size()) - order;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_funcs);
    if (deriv >= order) return out;

    if (order == 1) {
        const double right = tau.back();
        for (Eigen::Index j = 0; j < n_funcs; ++j) {
            const double lo = tau[j];
            const double hi = tau[j + 1];
            if (lo < hi && ((x >= lo && x < hi) || (x == right && hi == right))) {
                out(j) = 1.0;
                break;
            }
        }
        return out;
    }

    const Eigen::VectorXd lower = bspline_basis(tau, x, order - 1, deriv > 0 ? deriv - 1 : 0);
    for (Eigen::Index j = 0; j < n_funcs; ++j) {
        const double left_span = tau[j + order - 1] - tau[j];
        const double right_span = tau[j + order] - tau[j + 1];
        double value = 0.0;
        if (deriv == 0) {
            if (left_span > 0.0) value += (x - tau[j]) / left_span * lower(j);
            if (right_span > 0.0) value += (tau[j + order] - x) / right_span * lower(j + 1);
        } else {
            if (left_span > 0.0) value += lower(j) / left_span;
            if (right_span > 0.0) value -= lower(j + 1) / right_span;
            value *= static_cast<double>(order - 1);
        }
        out(j) = value;
    }
    return out;
}

}  // namespace detail

/// Cubic B-spline basis restricted to the natural cubic splines on a knot set.
///
/// The k + 4 clamped cubic B-splines are mapped through an orthonormal basis of
/// the null space of the two boundary constraints f''(a) = f''(b) = 0, giving the
/// k + 2 columns b_j(t).
class NaturalSplineBasis {
public:
    NaturalSplineBasis(double a, double b, std::vector<double> knots)
        : a_(a), b_(b), knots_(std::move(knots)) {
        validate_topology(a_, b_, knots_);
        tau_ = detail::clamped_knot_vector(a_, b_, knots_);
        const Eigen::Index n = static_cast<Eigen::Index>(knots_.size()) + 4;
        Eigen::MatrixXd constraints_t(n, 2);
        constraints_t.col(0) = detail::bspline_basis(tau_, a_, 4, 2);
        constraints_t.col(1) = detail::bspline_basis(tau_, b_, 4, 2);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(constraints_t);
        const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
        transform_ = q.rightCols(n - 2);
    }

    explicit NaturalSplineBasis(const SplineState& s) : NaturalSplineBasis(s.a, s.b, s.knots) {}

    double a() const noexcept { return a_; }
    double b() const noexcept { return b_; }
    const std::vector<double>& knots() const noexcept { return knots_; }
    Eigen::Index dimension() const noexcept { return transform_.cols(); }

    /// Row of basis values (deriv = 0) or derivatives at t; t must lie in [a, b].
    Eigen::VectorXd row(double t, int deriv = 0) const {
        if (!(t >= a_ && t <= b_))
            throw std::domain_error("spline abscissa " + std::to_string(t) + " outside [a, b]");
        return transform_.transpose() * detail::bspline_basis(tau_, t, 4, deriv);
    }

    Eigen::MatrixXd matrix(const std::vector<double>& ts, int deriv = 0) const {
        Eigen::MatrixXd out(static_cast<Eigen::Index>(ts.size()), dimension());
        for (std::size_t r = 0; r < ts.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = row(ts[r], deriv);
        return out;
    }

    /// Coefficients c with sum_j c_j b_j(t) = 1 for all t.
    Eigen::VectorXd constant_coefficients() const {
        // The clamped B-splines sum to one, so the constant lives in their span;
        // project it onto the natural subspace.
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(transform_.rows());
        return transform_.transpose() * ones;
    }

    /// The (k+4) x (k+2) map from natural-spline coefficients to B-spline coefficients.
    const Eigen::MatrixXd& transform() const noexcept { return transform_; }

private:
    double a_;
    double b_;
    std::vector<double> knots_;
    std::vector<double> tau_;
    Eigen::MatrixXd transform_;
};

/// f(t) for the given state.
inline double evaluate_f(const SplineState& s, double t) {
    NaturalSplineBasis basis(s);
    return basis.row(t).dot(s.omega);
}

inline std::vector<double> evaluate_f(const SplineState& s, const std::vector<double>& ts) {
    NaturalSplineBasis basis(s);
    std::vector<double> out(ts.size());
    for (std::size_t r = 0; r < ts.size(); ++r) out[r] = basis.row(ts[r]).dot(s.omega);
    return out;
}

/// Boundary abscissae a = min(t) - 0.5, b = max(t) + 0.5.
inline std::pair<double, double> boundary_for(const std::vector<double>& ts) {
    if (ts.empty()) throw std::invalid_argument("boundary_for requires at least one abscissa");
    const auto [lo, hi] = std::minmax_element(ts.begin(), ts.end());
    return {*lo - 0.5, *hi + 0.5};
}

}  // namespace tvdiff::spline
