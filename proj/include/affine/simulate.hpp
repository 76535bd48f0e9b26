#pragma once

#include "affine/errors.hpp"
#include "affine/model.hpp"
#include "affine/riccati.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace affine {

enum class Measure { P, Q, L };

std::string measure_name(Measure m);

struct SimConfig {
    std::int64_t n_paths = 100000;
    double horizon = 1.0;
    double dt = 1.0 / 250.0;
    std::uint64_t seed = 0;
    std::string scheme = "euler-full-truncation";
    Measure measure = Measure::P;  // label recorded on the bundle; the caller
                                   // tilts the model for Q or L beforehand
    bool store_increments = true;
};

// Simulated paths on the uniform grid times[k] = k dt.  Square-root
// coordinates are >= 0 at every stored point.  Bit-exactly reproducible from
// (model, x0, config): path p draws only from its own counter stream.
struct PathBundle {
    std::vector<double> times;
    std::vector<double> states;      // path-major: [(p * n_times + k) * d + j]
    std::vector<double> increments;  // Brownian increments, [(p * steps + k) * d + j]
    Measure measure = Measure::P;
    std::int64_t n_paths = 0;
    Eigen::Index dim = 0;

    std::size_t n_times() const { return times.size(); }
    double state(std::int64_t path, std::size_t k, Eigen::Index j) const {
        return states[(static_cast<std::size_t>(path) * times.size() + k) *
                          static_cast<std::size_t>(dim) +
                      static_cast<std::size_t>(j)];
    }
};

// Euler-Maruyama with full truncation: coefficients are evaluated at the
// clamped state and square-root coordinates are clamped again after each
// update, so stored paths never leave the state space.
PathBundle simulate(const AffineModelD& model, const VecD& x0, const SimConfig& cfg);

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;  // sample std / sqrt(n); NaN when n < 2
    std::int64_t n = 0;
};

// Deterministic two-pass mean/stderr via pairwise summation.
McEstimate mc_estimate(const Eigen::Ref<const VecD>& samples);

double pairwise_sum(const double* data, std::size_t n);

struct RiskNeutralFactorization;
struct LongTermFactorization;

// Pathwise kernel processes sampled at sample_times (every grid time when
// empty).  S is the kernel itself; M0 = S e^{int r} needs the risk-neutral
// factorization; B_inf = e^{lambda t} pi(X_t)/pi(X_0) and M_inf = S B_inf need
// the long-term one.  Pass nullptr to skip the dependent columns.  Time
// integrals use trapezoidal quadrature on the simulation grid.
struct KernelSeries {
    std::vector<double> times;
    MatD S;      // n_paths x times.size()
    MatD M0;     // empty unless rnf given
    MatD B_inf;  // empty unless ltf given
    MatD M_inf;  // empty unless ltf given
};

KernelSeries kernel_processes(const PathBundle& paths, const PricingKernelSpecD& pk,
                              const RiskNeutralFactorization* rnf,
                              const LongTermFactorization* ltf,
                              const std::vector<double>& sample_times = {});

// Estimate of E[series_t] for a process sampled in a KernelSeries-style
// matrix; the caller asserts |mean - 1| < 3 stderr for martingale claims.
McEstimate martingale_test(const MatD& series, const std::vector<double>& times,
                           double t);

// Roll-over strategy value per path: buy bonds maturing at the next multiple
// of T_compound, reinvest at each maturity.  t and the roll dates must lie on
// the path grid; the Riccati solution must span maturity T_compound and the
// remaining life of the held bond.
VecD rollover_value(const PathBundle& paths, const RiccatiSolution& sol,
                    const PricingKernelSpecD& pk, double T_compound, double t);

// MC estimate of E[S_T] from paths simulated under the physical measure;
// comparable to the transform bond price.
McEstimate bond_price_mc(const PathBundle& paths, const PricingKernelSpecD& pk,
                         double T);

// MC estimate of E[e^{-int_0^T (g + h.X) ds}]; with paths simulated under the
// risk-neutral tilt this reprices the same bond as bond_price_mc under P.
McEstimate discount_mc(const PathBundle& paths, double g, const VecD& h, double T);

}  // namespace affine
