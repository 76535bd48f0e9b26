#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace affine {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VecD = Vec<double>;
using MatD = Mat<double>;

// Factorized volatility sigma(x) = rho * diag(sqrt(s_j(x))) with affine
// factors s_j(x) = c_j + kappa_j . x.  Row j of kappa holds kappa_j.
// Consistency with (a, alpha_i) means sigma(x) sigma(x)^T = a + sum_i x_i alpha_i.
template <typename Scalar>
struct VolStructure {
    Mat<Scalar> rho;
    Vec<Scalar> c;
    Mat<Scalar> kappa;
};

// Affine diffusion on R_+^m x R^n:
//   dX = (b + B X) dt + sigma(X) dW,  sigma(x) sigma(x)^T = a + sum_{i<m} x_i alpha[i].
// Coordinates [0,m) are square-root (CIR) type, [m,m+n) are Gaussian (OU) type.
template <typename Scalar>
struct AffineModel {
    Eigen::Index m = 0;
    Eigen::Index n = 0;
    Mat<Scalar> a;
    std::vector<Mat<Scalar>> alpha;
    Vec<Scalar> b;
    Mat<Scalar> B;
    std::optional<VolStructure<Scalar>> vol_structure;
    std::string time_unit = "years";

    Eigen::Index dim() const { return m + n; }
};

// Exponential-affine pricing kernel
//   S_t = exp(-gamma t - u.(X_t - X_0) - int_0^t delta.X_s ds).
template <typename Scalar>
struct PricingKernelSpec {
    Scalar gamma = Scalar(0);
    Vec<Scalar> u;
    Vec<Scalar> delta;
};

struct ValidationReport {
    struct Violation {
        std::string condition;
        std::string message;
    };
    bool passed = true;
    std::vector<Violation> violations;
};

using AffineModelD = AffineModel<double>;
using PricingKernelSpecD = PricingKernelSpec<double>;

namespace detail {

template <typename Scalar>
void require_square(const Mat<Scalar>& M, Eigen::Index d, const char* name) {
    if (M.rows() != d || M.cols() != d) {
        std::ostringstream os;
        os << name << " must be " << d << "x" << d << ", got " << M.rows() << "x"
           << M.cols();
        throw std::invalid_argument(os.str());
    }
}

template <typename Scalar>
void require_length(const Vec<Scalar>& v, Eigen::Index d, const char* name) {
    if (v.size() != d) {
        std::ostringstream os;
        os << name << " must have length " << d << ", got " << v.size();
        throw std::invalid_argument(os.str());
    }
}

// Smallest eigenvalue of the symmetric part; used for the PSD floor.
template <typename Scalar>
Scalar min_eigenvalue(const Mat<Scalar>& M) {
    if (M.rows() == 0) return Scalar(0);
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(
        ((M + M.transpose()) / Scalar(2)).eval(), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

}  // namespace detail

// Throws std::invalid_argument on shape mismatch.  Shape errors are structural
// and deliberately distinct from admissibility violations.
template <typename Scalar>
void check_dimensions(const AffineModel<Scalar>& model) {
    if (model.m < 0 || model.n < 0 || model.dim() == 0)
        throw std::invalid_argument("model dimensions must satisfy m >= 0, n >= 0, m + n > 0");
    const Eigen::Index d = model.dim();
    detail::require_square(model.a, d, "a");
    if (static_cast<Eigen::Index>(model.alpha.size()) != model.m) {
        std::ostringstream os;
        os << "alpha must hold exactly m = " << model.m << " matrices, got "
           << model.alpha.size();
        throw std::invalid_argument(os.str());
    }
    for (std::size_t i = 0; i < model.alpha.size(); ++i)
        detail::require_square(model.alpha[i], d, "alpha[i]");
    detail::require_length(model.b, d, "b");
    detail::require_square(model.B, d, "B");
    if (model.vol_structure) {
        detail::require_square(model.vol_structure->rho, d, "vol_structure.rho");
        detail::require_length(model.vol_structure->c, d, "vol_structure.c");
        detail::require_square(model.vol_structure->kappa, d, "vol_structure.kappa");
    }
}

template <typename Scalar>
void check_dimensions(const AffineModel<Scalar>& model,
                      const PricingKernelSpec<Scalar>& pk) {
    check_dimensions(model);
    detail::require_length(pk.u, model.dim(), "u");
    detail::require_length(pk.delta, model.dim(), "delta");
}

// Checks admissibility conditions (1)-(5) on the canonical state space plus,
// when present, consistency of the factorized volatility with (a, alpha).
// Every violated sub-condition is listed; PSD uses an eigenvalue floor of -1e-12.
template <typename Scalar>
ValidationReport validate_admissibility(const AffineModel<Scalar>& model) {
    check_dimensions(model);
    const Eigen::Index m = model.m;
    const Eigen::Index d = model.dim();
    const Eigen::Index n = model.n;
    const Scalar psd_floor = Scalar(-1e-12);
    const Scalar sym_tol = Scalar(1e-12);

    ValidationReport report;
    auto fail = [&report](const char* id, const std::string& msg) {
        report.passed = false;
        report.violations.push_back({id, msg});
    };
    auto fmt = [](auto&&... parts) {
        std::ostringstream os;
        (os << ... << parts);
        return os.str();
    };

    // (1) a_JJ and alpha_i,JJ symmetric positive semidefinite.
    const auto a_JJ = model.a.bottomRightCorner(n, n);
    if (n > 0) {
        if ((a_JJ - a_JJ.transpose()).cwiseAbs().maxCoeff() > sym_tol)
            fail("(1)", "a_JJ is not symmetric");
        else if (detail::min_eigenvalue<Scalar>(a_JJ) < psd_floor)
            fail("(1)", fmt("a_JJ has eigenvalue ", detail::min_eigenvalue<Scalar>(a_JJ),
                            " below the PSD floor"));
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto JJ = model.alpha[i].bottomRightCorner(n, n);
        if (n == 0) continue;
        if ((JJ - JJ.transpose()).cwiseAbs().maxCoeff() > sym_tol)
            fail("(1)", fmt("alpha[", i, "]_JJ is not symmetric"));
        else if (detail::min_eigenvalue<Scalar>(Mat<Scalar>(JJ)) < psd_floor)
            fail("(1)", fmt("alpha[", i, "]_JJ has eigenvalue below the PSD floor"));
    }

    // (2) a vanishes outside the JJ block.
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c)
            if ((r < m || c < m) && model.a(r, c) != Scalar(0)) {
                fail("(2)", fmt("a(", r, ",", c, ") = ", model.a(r, c),
                                " but a must vanish outside the JJ block"));
                r = c = d;  // one message suffices
            }

    // (3) is structural: only the m square-root coordinates carry an alpha matrix.

    // (4) alpha[i] has no entries on rows/columns of other square-root coordinates.
    for (Eigen::Index i = 0; i < m; ++i) {
        bool ok = true;
        for (Eigen::Index k = 0; k < m && ok; ++k) {
            if (k == i) continue;
            if (model.alpha[i].row(k).cwiseAbs().maxCoeff() != Scalar(0) ||
                model.alpha[i].col(k).cwiseAbs().maxCoeff() != Scalar(0)) {
                fail("(4)", fmt("alpha[", i, "] loads on square-root coordinate ", k));
                ok = false;
            }
        }
    }

    // (5) inward drift on the boundary: b_I >= 0, B_IJ = 0, B_II off-diagonal >= 0.
    for (Eigen::Index i = 0; i < m; ++i) {
        if (model.b(i) < Scalar(0))
            fail("(5)", fmt("b(", i, ") = ", model.b(i), " is negative"));
        for (Eigen::Index c = m; c < d; ++c)
            if (model.B(i, c) != Scalar(0))
                fail("(5)", fmt("B(", i, ",", c, ") must be 0 (B_IJ block)"));
        for (Eigen::Index k = 0; k < m; ++k)
            if (k != i && model.B(i, k) < Scalar(0))
                fail("(5)", fmt("B(", i, ",", k, ") = ", model.B(i, k),
                                " negative off-diagonal in B_II"));
    }

    // Factorized volatility: admissible factors and sigma sigma^T = a + sum_i x_i alpha_i,
    // which for affine structures reduces to matching the constant and each x_i slope.
    if (model.vol_structure) {
        const auto& vs = *model.vol_structure;
        const Scalar match_tol = Scalar(1e-10);
        for (Eigen::Index j = 0; j < d; ++j) {
            if (vs.c(j) < Scalar(0))
                fail("(vol)", fmt("vol factor c(", j, ") is negative"));
            for (Eigen::Index k = 0; k < m; ++k)
                if (vs.kappa(j, k) < Scalar(0))
                    fail("(vol)", fmt("vol factor kappa(", j, ",", k, ") is negative"));
            for (Eigen::Index k = m; k < d; ++k)
                if (vs.kappa(j, k) != Scalar(0))
                    fail("(vol)", fmt("vol factor kappa(", j, ",", k,
                                      ") must be 0 (Gaussian coordinate)"));
        }
        Mat<Scalar> constant = vs.rho * vs.c.asDiagonal() * vs.rho.transpose();
        if ((constant - model.a).cwiseAbs().maxCoeff() > match_tol)
            fail("(vol)", "rho diag(c) rho^T does not match a");
        for (Eigen::Index i = 0; i < d; ++i) {
            Mat<Scalar> slope =
                vs.rho * vs.kappa.col(i).asDiagonal() * vs.rho.transpose();
            const Mat<Scalar>& target =
                i < m ? model.alpha[i] : Mat<Scalar>(Mat<Scalar>::Zero(d, d));
            if ((slope - target).cwiseAbs().maxCoeff() > match_tol)
                fail("(vol)", fmt("rho diag(kappa_., ", i,
                                  ") rho^T does not match the x_", i, " slope"));
        }
    }

    return report;
}

// b + B x.  Square-root coordinates must be nonnegative up to roundoff.
template <typename Scalar>
Vec<Scalar> drift(const AffineModel<Scalar>& model, const Vec<Scalar>& x) {
    detail::require_length(x, model.dim(), "x");
    for (Eigen::Index i = 0; i < model.m; ++i)
        if (x(i) < Scalar(-1e-12))
            throw std::domain_error("state has a negative square-root coordinate");
    return model.b + model.B * x;
}

template <typename Scalar>
struct DiffusionEval {
    Mat<Scalar> sigma;    // empty when the model carries no vol_structure
    Mat<Scalar> alpha_x;  // a + sum_i x_i alpha_i
};

// Evaluates the diffusion at x.  Factor values in [-1e-12, 0] are clamped to 0;
// more negative factors mean x left the state space.
template <typename Scalar>
DiffusionEval<Scalar> diffusion(const AffineModel<Scalar>& model, const Vec<Scalar>& x) {
    detail::require_length(x, model.dim(), "x");
    DiffusionEval<Scalar> out;
    out.alpha_x = model.a;
    for (Eigen::Index i = 0; i < model.m; ++i) out.alpha_x += x(i) * model.alpha[i];
    if (model.vol_structure) {
        const auto& vs = *model.vol_structure;
        Vec<Scalar> s = vs.c + vs.kappa * x;
        for (Eigen::Index j = 0; j < s.size(); ++j) {
            if (s(j) < Scalar(-1e-12))
                throw std::domain_error("volatility factor is negative at x");
            if (s(j) < Scalar(0)) s(j) = Scalar(0);
        }
        out.sigma = vs.rho * s.cwiseSqrt().asDiagonal();
    }
    return out;
}

// Drift change b -> b - a w, beta_i -> beta_i - alpha_i w (column i of B, square-root
// coordinates only).  The diffusion is measure-invariant.  tilt(tilt(M,w),-w) = M.
template <typename Scalar>
AffineModel<Scalar> tilt(const AffineModel<Scalar>& model, const Vec<Scalar>& w) {
    detail::require_length(w, model.dim(), "w");
    AffineModel<Scalar> out = model;
    out.b -= model.a * w;
    for (Eigen::Index i = 0; i < model.m; ++i) out.B.col(i) -= model.alpha[i] * w;
    return out;
}

// Mean of the stationary law when the drift mean-reverts, else nullopt.
// Coordinates with a zero B column influence nothing and merely accumulate
// (integrator states); they are pinned to 0 and excluded from the solve and
// from the mean-reversion check on the remaining block.
template <typename Scalar>
std::optional<Vec<Scalar>> stationary_state(const AffineModel<Scalar>& model) {
    check_dimensions(model);
    const Eigen::Index d = model.dim();
    std::vector<Eigen::Index> kept;
    for (Eigen::Index j = 0; j < d; ++j)
        if (model.B.col(j).cwiseAbs().maxCoeff() != Scalar(0)) kept.push_back(j);

    Vec<Scalar> x = Vec<Scalar>::Zero(d);
    if (!kept.empty()) {
        const Eigen::Index k = static_cast<Eigen::Index>(kept.size());
        Mat<Scalar> B_red(k, k);
        Vec<Scalar> b_red(k);
        for (Eigen::Index r = 0; r < k; ++r) {
            b_red(r) = model.b(kept[r]);
            for (Eigen::Index c = 0; c < k; ++c) B_red(r, c) = model.B(kept[r], kept[c]);
        }
        Eigen::EigenSolver<Mat<Scalar>> es(B_red);
        if (es.eigenvalues().real().maxCoeff() >= Scalar(-1e-12)) return std::nullopt;
        Vec<Scalar> x_red = B_red.fullPivLu().solve((-b_red).eval());
        for (Eigen::Index r = 0; r < k; ++r) x(kept[r]) = x_red(r);
    }
    for (Eigen::Index i = 0; i < model.m; ++i) x(i) = std::max(x(i), Scalar(0));
    return x;
}

}  // namespace affine
