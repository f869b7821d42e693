#include "subrad/observables.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "subrad/basis.hpp"
#include "subrad/errors.hpp"

namespace subrad {

double rate_ratio(double gamma_tot, double p_exc) {
    return p_exc > kPopulationFloor ? gamma_tot / p_exc : std::numeric_limits<double>::quiet_NaN();
}

void ObservableSeries::push(double t, double p, double g) {
    times.push_back(t);
    p_exc.push_back(p);
    gamma_tot.push_back(g);
    gamma_inst.push_back(rate_ratio(g, p));
}

namespace {

Eigen::MatrixXcd correlations_pure(const PureState& s) {
    const int n = s.n_atoms;
    Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(n, n);
    const auto& psi = s.amplitudes;
    for (std::uint32_t b = 0; b < psi.size(); ++b) {
        if (psi[b] == 0.0) continue;
        for (int m = 0; m < n; ++m) {
            if (!excited(b, m)) continue;
            c(m, m) += std::norm(psi[b]);
            for (int a = 0; a < n; ++a) {
                if (a == m || excited(b, a)) continue;
                // <psi| s_a^+ s_m^- |psi>: s_a^+ s_m^- |b> = |b - m + a>
                c(a, m) += std::conj(psi[b ^ (1u << m) ^ (1u << a)]) * psi[b];
            }
        }
    }
    return c;
}

Eigen::MatrixXcd correlations_density(const DensityState& s) {
    const int n = s.n_atoms;
    Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(n, n);
    const auto& rho = s.matrix;
    for (std::uint32_t b = 0; b < rho.rows(); ++b) {
        for (int m = 0; m < n; ++m) {
            if (!excited(b, m)) continue;
            c(m, m) += rho(b, b);
            for (int a = 0; a < n; ++a) {
                if (a == m || excited(b, a)) continue;
                c(a, m) += rho(b, b ^ (1u << m) ^ (1u << a));
            }
        }
    }
    return c;
}

} // namespace

Eigen::MatrixXcd correlation_matrix(const QuantumState& state) {
    return std::visit(
        [](const auto& s) -> Eigen::MatrixXcd {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, PureState>) {
                return correlations_pure(s);
            } else if constexpr (std::is_same_v<T, DensityState>) {
                return correlations_density(s);
            } else {
                const int n = s.n_atoms();
                Eigen::MatrixXcd c(n, n);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) c(i, j) = i == j ? cplx(s.pop(i)) : s.coh(i, j);
                return c;
            }
        },
        state);
}

double excited_population(const QuantumState& state) {
    return correlation_matrix(state).diagonal().real().sum();
}

double emission_rate(const QuantumState& state, const CouplingMatrices& couplings) {
    const Eigen::MatrixXcd c = correlation_matrix(state);
    if (c.rows() != couplings.size()) throw DimensionMismatch("state and couplings differ in size");
    return (couplings.Gamma.cast<cplx>().cwiseProduct(c)).sum().real();
}

std::optional<double> instantaneous_rate(const QuantumState& state, const CouplingMatrices& couplings) {
    const Eigen::MatrixXcd c = correlation_matrix(state);
    if (c.rows() != couplings.size()) throw DimensionMismatch("state and couplings differ in size");
    const double p = c.diagonal().real().sum();
    if (!(p > kPopulationFloor)) return std::nullopt;
    return (couplings.Gamma.cast<cplx>().cwiseProduct(c)).sum().real() / p;
}

std::optional<SubradiantPopulation> subradiant_population(const ObservableSeries& series,
                                                          double threshold) {
    const auto& g = series.gamma_inst;
    const std::size_t n = series.size();
    std::optional<SubradiantPopulation> out;
    std::size_t found = n;
    if (n > 0 && std::isfinite(g[0]) && g[0] <= threshold) {
        out = SubradiantPopulation{series.p_exc[0], series.times[0], false};
        found = 0;
    } else {
        for (std::size_t k = 1; k < n; ++k) {
            if (!std::isfinite(g[k - 1]) || !std::isfinite(g[k])) continue;
            if (g[k - 1] > threshold && g[k] <= threshold) {
                const double f = (g[k - 1] - threshold) / (g[k - 1] - g[k]);
                const double t = series.times[k - 1] + f * (series.times[k] - series.times[k - 1]);
                const double p = series.p_exc[k - 1] + f * (series.p_exc[k] - series.p_exc[k - 1]);
                out = SubradiantPopulation{p, t, false};
                found = k;
                break;
            }
        }
    }
    if (out) {
        // Flag a later re-crossing (rate rising above and falling below again).
        bool above = false;
        for (std::size_t k = found + 1; k < n; ++k) {
            if (!std::isfinite(g[k])) continue;
            if (g[k] > threshold) above = true;
            else if (above) {
                out->multiple_crossings = true;
                break;
            }
        }
    }
    return out;
}

double burst_ratio(const ObservableSeries& series) {
    if (series.size() == 0) throw DomainError("empty series");
    const double g0 = series.gamma_tot[0];
    if (!(g0 > 0.0)) throw DomainError("initial emission rate is zero; burst ratio undefined");
    return series.gamma_tot[burst_index(series)] / g0;
}

std::size_t burst_index(const ObservableSeries& series) {
    if (series.size() == 0) throw DomainError("empty series");
    return static_cast<std::size_t>(
        std::max_element(series.gamma_tot.begin(), series.gamma_tot.end()) - series.gamma_tot.begin());
}

double fidelity(const PureState& target, const DensityState& rho) {
    if (target.amplitudes.size() != rho.matrix.rows() || rho.matrix.rows() != rho.matrix.cols())
        throw DimensionMismatch("target and density matrix dimensions differ");
    if (min_eigenvalue(rho) < -1e-8) throw NumericalError("density matrix is not positive semidefinite");
    const double overlap = (target.amplitudes.adjoint() * rho.matrix * target.amplitudes)(0, 0).real();
    return std::sqrt(std::clamp(overlap, 0.0, 1.0));
}

std::vector<double> differentiated_emission(const ObservableSeries& series) {
    const std::size_t n = series.size();
    std::vector<double> d(n, std::numeric_limits<double>::quiet_NaN());
    if (n < 3) return d;
    const auto& t = series.times;
    const auto& p = series.p_exc;
    for (std::size_t k = 1; k + 1 < n; ++k) {
        // Second-order differences on a possibly non-uniform grid.
        const double h1 = t[k] - t[k - 1], h2 = t[k + 1] - t[k];
        d[k] = -(-h2 / (h1 * (h1 + h2)) * p[k - 1] + (h2 - h1) / (h1 * h2) * p[k] +
                 h1 / (h2 * (h1 + h2)) * p[k + 1]);
    }
    d[0] = -(p[1] - p[0]) / (t[1] - t[0]);
    d[n - 1] = -(p[n - 1] - p[n - 2]) / (t[n - 1] - t[n - 2]);
    return d;
}

} // namespace subrad
