#pragma once

#include <vector>

#include "subrad/lindblad.hpp"

namespace subrad {

/// Eigenstructure of one excitation manifold.
///  - Hermitian part: eigenstates of H = sum Delta_n s^ee + sum J s^+ s^- in
///    the manifold, with collective decay rates <psi| sum Gamma s^+ s^- |psi>;
///    sorted by increasing decay rate.
///  - Non-Hermitian part: right eigenvectors of H_eff (unit Euclidean norm),
///    decay rate -2 Im(lambda); sorted by decay rate, ties by energy.
struct ManifoldBlock {
    int n_exc = 0;
    std::vector<std::uint32_t> basis;  // product-basis indices of the manifold
    Eigen::MatrixXcd states;           // columns
    Eigen::VectorXd energies;
    Eigen::VectorXd decay_rates;
    Eigen::VectorXcd nh_eigenvalues;
    Eigen::MatrixXcd nh_modes;
    Eigen::VectorXd nh_decay_rates;

    double darkest_nh_rate() const { return nh_decay_rates.size() ? nh_decay_rates[0] : 0.0; }
};

struct ManifoldSpectrum {
    int n_atoms = 0;
    std::vector<ManifoldBlock> manifolds;  // index = excitation number
};

/// Throws ConsistencyError for driven models, CapacityError above the dense cap.
ManifoldSpectrum manifold_eigenstates(const SystemModel& model);

struct ManifoldOverlaps {
    std::vector<double> manifold;                // O_{N_exc}
    std::vector<std::vector<double>> per_state;  // <psi_i|rho|psi_i>, ordered as in the spectrum
};

ManifoldOverlaps manifold_overlaps(const DensityState& rho, const ManifoldSpectrum& spectrum);

/// Populations of every excitation manifold along a master-equation run,
/// as a (samples x (N+1)) matrix, plus per-state overlaps at snapshot times.
struct OverlapSeries {
    std::vector<double> times;
    Eigen::MatrixXd manifold;
    std::vector<double> snapshot_times;
    std::vector<ManifoldOverlaps> snapshots;
};

OverlapSeries overlap_series(const SystemModel& model, const DensityState& rho0, double t_max,
                             double sample_dt = 0.01, const std::vector<double>& snapshot_times = {},
                             const Tolerances& tol = {}, const ManifoldSpectrum* spectrum = nullptr);

struct DecayFit {
    double rate = 0.0;       // -slope of log(values)
    double intercept = 0.0;  // log(value) at t = 0
    double residual = 0.0;   // rms residual of the log fit
    int points = 0;
};

/// Least-squares line through log(values) for t_lo <= t <= t_hi.
/// Throws NumericalError if any value in the window is non-positive or the
/// window holds fewer than two samples.
DecayFit late_time_decay_fit(const std::vector<double>& times, const std::vector<double>& values,
                             double t_lo, double t_hi);

struct SpectrumOptions {
    double tau_max = 200.0;
    double dtau = 0.05;
    bool per_atom = false;
    Tolerances tolerances{1e-6, 1e-8};
    // Manifolds holding less than this fraction of tr(rho) at t' are dropped
    // from the propagation; higher manifolds are never repopulated.
    double manifold_cutoff = 1e-9;
};

struct SpectrumResult {
    double t_prime = 0.0;
    double tau_max = 0.0;
    std::vector<double> omega;
    std::vector<double> total;
    std::vector<std::vector<double>> per_atom;  // [atom][omega] when requested
    double residual = 0.0;  // max_n |C_n(tau_max)| / max_n |C_n(0)|
    std::vector<std::string> warnings;
};

/// S(w, t') = sum_n 2 Re int_0^tau_max dtau e^{-i w tau} <s_n^+(t'+tau) s_n^-(t')>
/// with the correlation from the quantum regression theorem: s_n^- rho(t') is
/// propagated under the same generator and traced against s_n^+. Trapezoidal
/// quadrature on the tau grid, no window. Undriven models only.
SpectrumResult dynamic_spectrum(const SystemModel& model, const DensityState& rho_t_prime,
                                const std::vector<double>& omega, const SpectrumOptions& options = {},
                                double t_prime = 0.0);

/// The same spectra for several start times of one run starting from rho0,
/// using one backward propagation of s_n^+ per atom shared by every t'.
std::vector<SpectrumResult> dynamic_spectra(const SystemModel& model, const DensityState& rho0,
                                            const std::vector<double>& t_primes,
                                            const std::vector<double>& omega,
                                            const SpectrumOptions& options = {});

/// Local maxima of `values` exceeding `min_fraction` of the global maximum,
/// sorted by decreasing height; returned as indices into the grid.
std::vector<std::size_t> spectral_lines(const std::vector<double>& values, double min_fraction = 0.05);

/// Correlation function quadrature: 2 Re sum_k w_k e^{-i w tau_k} c_k (trapezoid weights).
std::vector<double> correlation_to_spectrum(const std::vector<cplx>& corr, double dtau,
                                            const std::vector<double>& omega);

} // namespace subrad
