#include "affine/simulate.hpp"

#include "affine/factorization.hpp"
#include "affine/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace affine {

std::string measure_name(Measure m) {
    switch (m) {
        case Measure::P: return "P";
        case Measure::Q: return "Q";
        case Measure::L: return "L";
    }
    return "?";
}

namespace {

std::size_t grid_index(const std::vector<double>& times, double t, const char* what) {
    auto it = std::lower_bound(times.begin(), times.end(), t);
    const double tol = 1e-9 * std::max(1.0, std::abs(t));
    if (it != times.end() && std::abs(*it - t) <= tol)
        return static_cast<std::size_t>(it - times.begin());
    if (it != times.begin() && std::abs(*(it - 1) - t) <= tol)
        return static_cast<std::size_t>(it - times.begin()) - 1;
    std::ostringstream os;
    os << what << " = " << t << " is not on the simulation grid";
    throw std::invalid_argument(os.str());
}

}  // namespace

PathBundle simulate(const AffineModelD& model, const VecD& x0, const SimConfig& cfg) {
    check_dimensions(model);
    detail::require_length(x0, model.dim(), "x0");
    if (!model.vol_structure)
        throw std::invalid_argument("simulate needs a model with a vol_structure");
    const ValidationReport report = validate_admissibility(model);
    if (!report.passed)
        throw std::invalid_argument("model is not admissible: condition " +
                                    report.violations.front().condition + ", " +
                                    report.violations.front().message);
    if (cfg.scheme != "euler-full-truncation")
        throw std::invalid_argument("unknown scheme: " + cfg.scheme);
    if (!(cfg.dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (cfg.n_paths < 1) throw std::invalid_argument("n_paths must be at least 1");
    const double steps_real = cfg.horizon / cfg.dt;
    const auto steps = static_cast<std::int64_t>(std::llround(steps_real));
    if (steps < 1 || std::abs(steps_real - static_cast<double>(steps)) >
                         1e-9 * std::max(1.0, steps_real))
        throw std::invalid_argument("horizon/dt must be an integer step count");
    for (Eigen::Index i = 0; i < model.m; ++i)
        if (x0(i) < -1e-12)
            throw std::domain_error("x0 has a negative square-root coordinate");

    const Eigen::Index d = model.dim();
    const auto& vs = *model.vol_structure;
    const std::size_t n_times = static_cast<std::size_t>(steps) + 1;
    const std::size_t dim = static_cast<std::size_t>(d);

    PathBundle out;
    out.measure = cfg.measure;
    out.n_paths = cfg.n_paths;
    out.dim = d;
    out.times.resize(n_times);
    for (std::size_t k = 0; k < n_times; ++k)
        out.times[k] = static_cast<double>(k) * cfg.dt;
    out.states.resize(static_cast<std::size_t>(cfg.n_paths) * n_times * dim);
    if (cfg.store_increments)
        out.increments.resize(static_cast<std::size_t>(cfg.n_paths) *
                              static_cast<std::size_t>(steps) * dim);

    const double sqrt_dt = std::sqrt(cfg.dt);
    VecD x(d), s(d), dw(d), xn(d);
    for (std::int64_t p = 0; p < cfg.n_paths; ++p) {
        CounterRng rng(cfg.seed, static_cast<std::uint64_t>(p));
        x = x0;
        for (Eigen::Index i = 0; i < model.m; ++i) x(i) = std::max(x(i), 0.0);
        double* path_states =
            out.states.data() + static_cast<std::size_t>(p) * n_times * dim;
        double* path_incr =
            cfg.store_increments
                ? out.increments.data() +
                      static_cast<std::size_t>(p) * static_cast<std::size_t>(steps) * dim
                : nullptr;
        Eigen::Map<VecD>(path_states, d) = x;

        for (std::int64_t k = 0; k < steps; ++k) {
            s.noalias() = vs.kappa * x;
            s += vs.c;
            for (Eigen::Index j = 0; j < d; ++j) {
                if (s(j) < 0.0) s(j) = 0.0;
                dw(j) = rng.next_gaussian() * sqrt_dt;
            }
            if (path_incr)
                Eigen::Map<VecD>(path_incr + static_cast<std::size_t>(k) * dim, d) = dw;
            xn.noalias() = model.B * x;
            xn += model.b;
            xn *= cfg.dt;
            xn += x;
            s = s.cwiseSqrt().cwiseProduct(dw);
            xn.noalias() += vs.rho * s;
            for (Eigen::Index i = 0; i < model.m; ++i)
                if (xn(i) < 0.0) xn(i) = 0.0;
            if (!xn.allFinite()) {
                std::ostringstream os;
                os << "non-finite state at path " << p << ", step " << k + 1;
                throw NumericError(os.str());
            }
            x = xn;
            Eigen::Map<VecD>(path_states + (static_cast<std::size_t>(k) + 1) * dim, d) = x;
        }
    }
    return out;
}

double pairwise_sum(const double* data, std::size_t n) {
    if (n <= 32) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += data[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

McEstimate mc_estimate(const Eigen::Ref<const VecD>& samples) {
    const auto n = static_cast<std::int64_t>(samples.size());
    if (n == 0) throw std::invalid_argument("mc_estimate needs at least one sample");
    McEstimate est;
    est.n = n;
    est.mean = pairwise_sum(samples.data(), static_cast<std::size_t>(n)) /
               static_cast<double>(n);
    if (n == 1) {
        est.std_error = std::numeric_limits<double>::quiet_NaN();
        return est;
    }
    std::vector<double> sq(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const double dev = samples(i) - est.mean;
        sq[static_cast<std::size_t>(i)] = dev * dev;
    }
    const double ss = pairwise_sum(sq.data(), sq.size());
    est.std_error =
        std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
    return est;
}

KernelSeries kernel_processes(const PathBundle& paths, const PricingKernelSpecD& pk,
                              const RiskNeutralFactorization* rnf,
                              const LongTermFactorization* ltf,
                              const std::vector<double>& sample_times) {
    if (paths.measure != Measure::P)
        throw std::invalid_argument(
            "kernel processes need paths simulated under the physical measure");
    const Eigen::Index d = paths.dim;
    detail::require_length(pk.u, d, "u");
    detail::require_length(pk.delta, d, "delta");

    KernelSeries ks;
    ks.times = sample_times.empty() ? paths.times : sample_times;
    std::vector<std::size_t> sidx(ks.times.size());
    for (std::size_t q = 0; q < ks.times.size(); ++q) {
        sidx[q] = grid_index(paths.times, ks.times[q], "sample time");
        if (q > 0 && sidx[q] <= sidx[q - 1])
            throw std::invalid_argument("sample times must be strictly increasing");
    }

    const auto n_cols = static_cast<Eigen::Index>(ks.times.size());
    ks.S.resize(paths.n_paths, n_cols);
    if (rnf) ks.M0.resize(paths.n_paths, n_cols);
    if (ltf) {
        ks.B_inf.resize(paths.n_paths, n_cols);
        ks.M_inf.resize(paths.n_paths, n_cols);
    }

    const std::size_t dim = static_cast<std::size_t>(d);
    const std::size_t n_times = paths.times.size();
    const std::size_t k_last = sidx.empty() ? 0 : sidx.back();
    for (std::int64_t p = 0; p < paths.n_paths; ++p) {
        const double* base =
            paths.states.data() + static_cast<std::size_t>(p) * n_times * dim;
        Eigen::Map<const VecD> x0(base, d);
        double int_delta = 0.0;
        double int_r = 0.0;
        double f_delta = pk.delta.dot(x0);
        double f_r = rnf ? rnf->g + rnf->h.dot(x0) : 0.0;
        std::size_t q = 0;
        for (std::size_t k = 0; k <= k_last; ++k) {
            Eigen::Map<const VecD> xk(base + k * dim, d);
            if (k > 0) {
                const double dt = paths.times[k] - paths.times[k - 1];
                const double g_delta = pk.delta.dot(xk);
                int_delta += 0.5 * (f_delta + g_delta) * dt;
                f_delta = g_delta;
                if (rnf) {
                    const double g_r = rnf->g + rnf->h.dot(xk);
                    int_r += 0.5 * (f_r + g_r) * dt;
                    f_r = g_r;
                }
            }
            if (q < sidx.size() && sidx[q] == k) {
                const double t = paths.times[k];
                const double S =
                    std::exp(-pk.gamma * t - pk.u.dot(xk - x0) - int_delta);
                ks.S(p, q) = S;
                if (rnf) ks.M0(p, q) = S * std::exp(int_r);
                if (ltf) {
                    const double B = std::exp(ltf->lambda * t +
                                              ltf->eigen_coeffs.dot(xk - x0));
                    ks.B_inf(p, q) = B;
                    ks.M_inf(p, q) = S * B;
                }
                ++q;
            }
        }
    }
    return ks;
}

McEstimate martingale_test(const MatD& series, const std::vector<double>& times,
                           double t) {
    if (static_cast<std::size_t>(series.cols()) != times.size())
        throw std::invalid_argument("series and time grid disagree");
    const std::size_t k = grid_index(times, t, "t");
    return mc_estimate(series.col(static_cast<Eigen::Index>(k)));
}

VecD rollover_value(const PathBundle& paths, const RiccatiSolution& sol,
                    const PricingKernelSpecD& pk, double T_compound, double t) {
    if (!(T_compound > 0.0))
        throw std::invalid_argument("compounding period must be positive");
    const auto rolls = static_cast<std::int64_t>(std::floor(t / T_compound + 1e-9));
    const double residual_maturity =
        (static_cast<double>(rolls) + 1.0) * T_compound - t;
    const double needed = std::max(T_compound, residual_maturity);
    if (needed > sol.horizon() * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "roll-over needs a Riccati horizon of at least " << needed
           << ", solution spans " << sol.horizon();
        throw std::out_of_range(os.str());
    }

    // Bond prices are exponential-affine; freeze the two exponents once.
    const double phi_T = sol.phi_at(T_compound);
    const VecD load_T = sol.psi_at(T_compound) - pk.u;
    const double phi_res = sol.phi_at(residual_maturity);
    const VecD load_res = sol.psi_at(residual_maturity) - pk.u;

    const std::size_t idx_t = grid_index(paths.times, t, "t");
    std::vector<std::size_t> roll_idx(static_cast<std::size_t>(rolls) + 1);
    for (std::int64_t i = 0; i <= rolls; ++i)
        roll_idx[static_cast<std::size_t>(i)] = grid_index(
            paths.times, static_cast<double>(i) * T_compound, "roll date");

    const std::size_t dim = static_cast<std::size_t>(paths.dim);
    const std::size_t n_times = paths.times.size();
    VecD values(paths.n_paths);
    for (std::int64_t p = 0; p < paths.n_paths; ++p) {
        const double* base =
            paths.states.data() + static_cast<std::size_t>(p) * n_times * dim;
        double log_denom = 0.0;
        for (std::size_t i = 0; i < roll_idx.size(); ++i) {
            Eigen::Map<const VecD> x(base + roll_idx[i] * dim, paths.dim);
            log_denom += -phi_T - load_T.dot(x);
        }
        Eigen::Map<const VecD> xt(base + idx_t * dim, paths.dim);
        values(p) = std::exp(-phi_res - load_res.dot(xt) - log_denom);
    }
    return values;
}

McEstimate bond_price_mc(const PathBundle& paths, const PricingKernelSpecD& pk,
                         double T) {
    const KernelSeries ks = kernel_processes(paths, pk, nullptr, nullptr, {T});
    return mc_estimate(ks.S.col(0));
}

McEstimate discount_mc(const PathBundle& paths, double g, const VecD& h, double T) {
    detail::require_length(h, paths.dim, "h");
    const std::size_t k_end = grid_index(paths.times, T, "T");
    const std::size_t dim = static_cast<std::size_t>(paths.dim);
    const std::size_t n_times = paths.times.size();
    VecD discounts(paths.n_paths);
    for (std::int64_t p = 0; p < paths.n_paths; ++p) {
        const double* base =
            paths.states.data() + static_cast<std::size_t>(p) * n_times * dim;
        Eigen::Map<const VecD> x0(base, paths.dim);
        double int_r = 0.0;
        double f = g + h.dot(x0);
        for (std::size_t k = 1; k <= k_end; ++k) {
            Eigen::Map<const VecD> xk(base + k * dim, paths.dim);
            const double fk = g + h.dot(xk);
            int_r += 0.5 * (f + fk) * (paths.times[k] - paths.times[k - 1]);
            f = fk;
        }
        discounts(p) = std::exp(-int_r);
    }
    return mc_estimate(discounts);
}

}  // namespace affine
