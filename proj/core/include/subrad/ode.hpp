#pragma once

#include <array>
#include <functional>
#include <vector>
#include <limits>

#include "subrad/types.hpp"

namespace subrad {

struct OdeOptions {
    double rtol = 1e-8;
    double atol = 1e-10;
    double initial_step = 0.0;  // 0 selects the step automatically
    double max_step = std::numeric_limits<double>::infinity();
    bool fixed_step = false;    // take steps of `fixed_dt` without error control
    double fixed_dt = 1e-3;
    long max_steps = 50'000'000;
};

struct OdeStats {
    long accepted = 0;
    long rejected = 0;
    long rhs_evaluations = 0;
};

/// One accepted step together with its continuous extension. The
/// interpolant is y(t) = sum_k w_k(t) r_k, so any linear functional of the
/// state can be interpolated by applying it to the five coefficient vectors
/// once and combining scalars.
class DenseStep {
public:
    DenseStep(double t0, double t1, const std::array<const Eigen::VectorXcd*, 5>& coeffs)
        : t0_(t0), t1_(t1), coeffs_(coeffs) {}

    double t0() const { return t0_; }
    double t1() const { return t1_; }
    const Eigen::VectorXcd& coeff(int k) const { return *coeffs_[k]; }

    std::array<double, 5> weights(double t) const {
        const double h = t1_ - t0_;
        const double th = h > 0.0 ? (t - t0_) / h : 1.0;
        const double th1 = 1.0 - th;
        return {1.0, th, th * th1, th * th * th1, th * th * th1 * th1};
    }

    void eval(double t, Eigen::VectorXcd& out) const {
        const auto w = weights(t);
        out = w[0] * *coeffs_[0];
        for (int k = 1; k < 5; ++k) out += w[k] * *coeffs_[k];
    }

private:
    double t0_, t1_;
    std::array<const Eigen::VectorXcd*, 5> coeffs_;
};

using OdeRhs = std::function<void(double t, const Eigen::VectorXcd& y, Eigen::VectorXcd& dydt)>;
// Called after every accepted step; returning false stops the integration.
using OdeObserver = std::function<bool(const DenseStep& step)>;

/// Dormand-Prince 5(4) with FSAL, PI step-size control and the fourth-order
/// continuous extension. Integrates y from t0 to t1 in place and returns the
/// time actually reached (earlier than t1 if the observer stopped).
/// Throws IntegrationError on step-size underflow or non-finite states.
class DormandPrince45 {
public:
    explicit DormandPrince45(OdeOptions options = {}) : opt_(options) {}

    double integrate(const OdeRhs& rhs, Eigen::VectorXcd& y, double t0, double t1,
                     const OdeObserver& observer = {});

    const OdeStats& stats() const { return stats_; }
    const OdeOptions& options() const { return opt_; }

private:
    double initial_step(const OdeRhs& rhs, double t, const Eigen::VectorXcd& y, double t1);
    double error_norm(const Eigen::VectorXcd& y, const Eigen::VectorXcd& y1) const;

    OdeOptions opt_;
    OdeStats stats_;
    Eigen::VectorXcd k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, y1_, err_;
    Eigen::VectorXcd r_[5];
};

} // namespace subrad

namespace subrad {

/// Linear functionals sampled on a time grid from the continuous extension.
/// `functional` writes `n_values` numbers for a state vector; it must be
/// linear (it is applied to interpolation coefficients, not to states).
struct SampleRequest {
    std::vector<double> times;  // sorted
    int n_values = 0;
    std::function<void(const Eigen::VectorXcd& y, cplx* out)> functional;
    // Receives each sample in order; returning false stops the integration.
    std::function<bool(std::size_t index, double t, const cplx* values)> on_sample;
};

/// Full states at selected times.
struct SnapshotRequest {
    std::vector<double> times;  // sorted
    std::function<void(std::size_t index, double t, const Eigen::VectorXcd& y)> on_snapshot;
};

/// Runs `solver` from t0 to t1, emitting samples and snapshots whose times
/// fall inside [t0, t1]. Returns the time reached.
double integrate_sampled(DormandPrince45& solver, const OdeRhs& rhs, Eigen::VectorXcd& y, double t0,
                         double t1, const SampleRequest& samples,
                         const SnapshotRequest* snapshots = nullptr);

/// 0, dt, 2 dt, ... up to t_max, with t_max appended when it is off-grid.
std::vector<double> uniform_grid(double t_max, double dt);

} // namespace subrad
