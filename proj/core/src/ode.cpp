#include "subrad/ode.hpp"

#include <algorithm>
#include <cmath>

#include "subrad/errors.hpp"

namespace subrad {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// Continuous extension.
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

constexpr double kSafe = 0.9, kFacMin = 0.2, kFacMax = 10.0, kBeta = 0.04;

} // namespace

double DormandPrince45::error_norm(const Eigen::VectorXcd& y, const Eigen::VectorXcd& y1) const {
    const Eigen::Index n = y.size();
    if (n == 0) return 0.0;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double sc = opt_.atol + opt_.rtol * std::max(std::abs(y[i]), std::abs(y1[i]));
        acc += std::norm(err_[i]) / (sc * sc);
    }
    return std::sqrt(acc / static_cast<double>(n));
}

double DormandPrince45::initial_step(const OdeRhs& rhs, double t, const Eigen::VectorXcd& y,
                                     double t1) {
    const double span = std::abs(t1 - t);
    const Eigen::Index n = std::max<Eigen::Index>(y.size(), 1);
    double dnf = 0.0, dny = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double sk = opt_.atol + opt_.rtol * std::abs(y[i]);
        dnf += std::norm(k1_[i]) / (sk * sk);
        dny += std::norm(y[i]) / (sk * sk);
    }
    double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
    h = std::min({h, opt_.max_step, span});

    tmp_ = y + h * k1_;
    rhs(t + h, tmp_, k2_);
    ++stats_.rhs_evaluations;
    double der2 = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double sk = opt_.atol + opt_.rtol * std::abs(y[i]);
        der2 += std::norm(k2_[i] - k1_[i]) / (sk * sk);
    }
    der2 = std::sqrt(der2 / n) / h;
    const double der12 = std::max(der2, std::sqrt(dnf / n));
    const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 0.2);
    return std::min({100.0 * h, h1, opt_.max_step, span});
}

double DormandPrince45::integrate(const OdeRhs& rhs, Eigen::VectorXcd& y, double t0, double t1,
                                  const OdeObserver& observer) {
    if (!(t1 >= t0)) throw IntegrationError("integration interval is reversed", t0);
    stats_ = {};
    const Eigen::Index n = y.size();
    for (auto* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &tmp_, &y1_, &err_}) v->resize(n);
    for (auto& r : r_) r.resize(n);
    if (t1 == t0) return t0;

    double t = t0;
    rhs(t, y, k1_);
    ++stats_.rhs_evaluations;

    double h;
    if (opt_.fixed_step) {
        if (!(opt_.fixed_dt > 0.0)) throw IntegrationError("fixed step must be positive", t);
        h = opt_.fixed_dt;
    } else {
        h = opt_.initial_step > 0.0 ? opt_.initial_step : initial_step(rhs, t, y, t1);
    }

    double err_old = 1e-4;
    bool last_rejected = false;
    const double uround = std::numeric_limits<double>::epsilon();

    while (t < t1) {
        if (stats_.accepted + stats_.rejected >= opt_.max_steps)
            throw IntegrationError("step limit exceeded", t);
        if (0.1 * std::abs(h) <= std::abs(t) * uround)
            throw IntegrationError("step size underflow", t);
        bool final_step = false;
        if (t + 1.01 * h >= t1) {
            h = t1 - t;
            final_step = true;
        }

        tmp_ = y + h * a21 * k1_;
        rhs(t + c2 * h, tmp_, k2_);
        tmp_ = y + h * (a31 * k1_ + a32 * k2_);
        rhs(t + c3 * h, tmp_, k3_);
        tmp_ = y + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
        rhs(t + c4 * h, tmp_, k4_);
        tmp_ = y + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
        rhs(t + c5 * h, tmp_, k5_);
        tmp_ = y + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
        rhs(t + h, tmp_, k6_);
        y1_ = y + h * (a71 * k1_ + a73 * k3_ + a74 * k4_ + a75 * k5_ + a76 * k6_);
        rhs(t + h, y1_, k7_);
        stats_.rhs_evaluations += 6;

        double err = 0.0;
        if (!opt_.fixed_step) {
            err_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
            err = error_norm(y, y1_);
            if (!std::isfinite(err)) throw IntegrationError("non-finite state encountered", t);
        } else if (!y1_.allFinite()) {
            throw IntegrationError("non-finite state encountered", t);
        }

        if (err <= 1.0) {
            // Dense output coefficients.
            r_[0] = y;
            r_[1] = y1_ - y;
            r_[2] = h * k1_ - r_[1];
            r_[3] = r_[1] - h * k7_ - r_[2];
            r_[4] = h * (d1 * k1_ + d3 * k3_ + d4 * k4_ + d5 * k5_ + d6 * k6_ + d7 * k7_);

            const double t_new = final_step ? t1 : t + h;
            ++stats_.accepted;
            y.swap(y1_);
            k1_.swap(k7_);
            bool keep_going = true;
            if (observer) {
                DenseStep step(t, t_new, {&r_[0], &r_[1], &r_[2], &r_[3], &r_[4]});
                keep_going = observer(step);
            }
            t = t_new;
            if (!keep_going) return t;

            if (!opt_.fixed_step) {
                const double fac11 = std::pow(std::max(err, 1e-16), 0.2 - kBeta * 0.75);
                double fac = fac11 / std::pow(err_old, kBeta) / kSafe;
                fac = std::clamp(fac, 1.0 / kFacMax, 1.0 / kFacMin);
                double h_new = h / fac;
                if (last_rejected) h_new = std::min(h_new, h);
                h = std::min(h_new, opt_.max_step);
                err_old = std::max(err, 1e-4);
            }
            last_rejected = false;
        } else {
            const double fac11 = std::pow(err, 0.2 - kBeta * 0.75);
            h /= std::min(1.0 / kFacMin, fac11 / kSafe);
            last_rejected = true;
            ++stats_.rejected;
        }
    }
    return t;
}

} // namespace subrad

namespace subrad {

std::vector<double> uniform_grid(double t_max, double dt) {
    if (!(dt > 0.0)) throw DomainError("sample spacing must be positive");
    if (!(t_max >= 0.0)) throw DomainError("final time must be non-negative");
    std::vector<double> t;
    const long n = static_cast<long>(std::floor(t_max / dt + 1e-9));
    t.reserve(n + 2);
    for (long k = 0; k <= n; ++k) t.push_back(k * dt);
    if (t_max - t.back() > 1e-9 * std::max(1.0, t_max)) t.push_back(t_max);
    return t;
}

double integrate_sampled(DormandPrince45& solver, const OdeRhs& rhs, Eigen::VectorXcd& y, double t0,
                         double t1, const SampleRequest& samples, const SnapshotRequest* snapshots) {
    const int m = samples.n_values;
    std::vector<cplx> coeff_vals(static_cast<std::size_t>(5 * std::max(m, 0)));
    std::vector<cplx> vals(static_cast<std::size_t>(std::max(m, 0)));
    std::size_t next = 0, next_snap = 0;
    bool stopped = false;

    while (next < samples.times.size() && samples.times[next] < t0) ++next;
    if (snapshots)
        while (next_snap < snapshots->times.size() && snapshots->times[next_snap] < t0) ++next_snap;

    // Samples at t0 come straight from the initial state.
    while (next < samples.times.size() && samples.times[next] == t0) {
        samples.functional(y, vals.data());
        if (samples.on_sample && !samples.on_sample(next, t0, vals.data())) stopped = true;
        ++next;
    }
    if (snapshots)
        while (next_snap < snapshots->times.size() && snapshots->times[next_snap] == t0) {
            snapshots->on_snapshot(next_snap, t0, y);
            ++next_snap;
        }
    if (stopped) return t0;

    Eigen::VectorXcd tmp;
    auto observer = [&](const DenseStep& step) {
        const double ta = step.t0(), tb = step.t1();
        if (next < samples.times.size() && samples.times[next] <= tb) {
            for (int k = 0; k < 5; ++k) samples.functional(step.coeff(k), coeff_vals.data() + k * m);
            while (next < samples.times.size() && samples.times[next] <= tb) {
                const double t = samples.times[next];
                const auto w = step.weights(std::max(t, ta));
                for (int j = 0; j < m; ++j) {
                    cplx v = 0.0;
                    for (int k = 0; k < 5; ++k) v += w[k] * coeff_vals[k * m + j];
                    vals[j] = v;
                }
                const bool go = !samples.on_sample || samples.on_sample(next, t, vals.data());
                ++next;
                if (!go) return false;
            }
        }
        if (snapshots)
            while (next_snap < snapshots->times.size() && snapshots->times[next_snap] <= tb) {
                step.eval(std::max(snapshots->times[next_snap], ta), tmp);
                snapshots->on_snapshot(next_snap, snapshots->times[next_snap], tmp);
                ++next_snap;
            }
        return true;
    };
    return solver.integrate(rhs, y, t0, t1, observer);
}

} // namespace subrad
