#pragma once

#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "subrad/coupling.hpp"
#include "subrad/states.hpp"

namespace subrad {

// Below this excited population the instantaneous rate is undefined.
inline constexpr double kPopulationFloor = 1e-8;

struct CorrelationSnapshot {
    double time = 0.0;
    Eigen::MatrixXcd matrix;  // <s_n^+ s_m^->
};

/// Time series of the emission observables. gamma_inst holds NaN where
/// p_exc is below kPopulationFloor. The *_err vectors are filled by
/// stochastic backends only.
struct ObservableSeries {
    std::vector<double> times;
    std::vector<double> p_exc;
    std::vector<double> gamma_tot;
    std::vector<double> gamma_inst;
    std::vector<double> p_exc_err;
    std::vector<double> gamma_tot_err;
    std::vector<double> gamma_inst_err;
    std::vector<CorrelationSnapshot> correlations;
    nlohmann::json metadata = nlohmann::json::object();

    std::size_t size() const { return times.size(); }
    bool has_errors() const { return !p_exc_err.empty(); }

    // Appends a sample and derives gamma_inst.
    void push(double t, double p, double g);
};

/// gamma_tot / p_exc, or NaN below the population floor.
double rate_ratio(double gamma_tot, double p_exc);

double excited_population(const QuantumState& state);

/// sum_{nm} Gamma_nm <s_n^+ s_m^->
double emission_rate(const QuantumState& state, const CouplingMatrices& couplings);

/// gamma_tot / p_exc; empty when p_exc is below the population floor.
std::optional<double> instantaneous_rate(const QuantumState& state, const CouplingMatrices& couplings);

/// <s_n^+ s_m^-> (Hermitian, populations on the diagonal).
Eigen::MatrixXcd correlation_matrix(const QuantumState& state);

struct SubradiantPopulation {
    double p_sub = 0.0;
    double t_sub = 0.0;
    bool multiple_crossings = false;
};

/// Population left when gamma_inst first falls to `threshold`, with the
/// crossing located by linear interpolation between samples. A series that
/// starts at or below the threshold yields t_sub = 0. Empty if no crossing.
std::optional<SubradiantPopulation> subradiant_population(const ObservableSeries& series,
                                                          double threshold = 0.1);

/// max_t gamma_tot(t) / gamma_tot(0). Throws DomainError when gamma_tot(0) is 0.
double burst_ratio(const ObservableSeries& series);

/// Index of the largest gamma_tot sample (the burst time).
std::size_t burst_index(const ObservableSeries& series);

/// Uhlmann fidelity against a pure target, sqrt(<psi|rho|psi>).
/// Throws NumericalError if rho has eigenvalues below -1e-8.
double fidelity(const PureState& target, const DensityState& rho);

/// -dp_exc/dt by central differences on the sample grid (cross-check of gamma_tot).
std::vector<double> differentiated_emission(const ObservableSeries& series);

} // namespace subrad
