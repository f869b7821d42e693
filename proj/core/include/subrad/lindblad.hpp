#pragma once

#include <functional>
#include <vector>

#include "subrad/block_engine.hpp"
#include "subrad/model.hpp"
#include "subrad/observables.hpp"
#include "subrad/ode.hpp"
#include "subrad/states.hpp"

namespace subrad {

struct Tolerances {
    double rtol = 1e-8;
    double atol = 1e-10;
    bool fixed_step = false;
    double fixed_dt = 1e-3;
    double max_step = std::numeric_limits<double>::infinity();

    OdeOptions ode() const;
    nlohmann::json to_json() const;
};

/// Dense non-Hermitian effective Hamiltonian (including the drive).
Eigen::MatrixXcd effective_hamiltonian(const SystemModel& model);

/// d rho / dt for a dense density matrix.
Eigen::MatrixXcd liouvillian_apply(const SystemModel& model, const DensityState& rho);

struct EvolveOptions {
    double sample_dt = 0.01;
    std::vector<double> correlation_times;
    // Return false to stop early; sees every sample as it is produced.
    std::function<bool(double t, double p_exc, double gamma_tot)> keep_going;
};

struct DensityEvolution {
    std::vector<double> snapshot_times;
    std::vector<DensityState> snapshots;
    ObservableSeries series;
    OdeStats stats;
    double final_trace_error = 0.0;
};

/// Propagates rho0 under the master equation. `time_grid` lists the snapshot
/// times (strictly increasing, starting at 0); its last entry is the final
/// time. Observables are sampled every options.sample_dt.
///
/// Without drive the generator conserves excitation number, so the density
/// matrix is stored as blocks between excitation manifolds; blocks that
/// start out zero stay zero and are dropped.
DensityEvolution evolve_density(const SystemModel& model, const DensityState& rho0,
                                const std::vector<double>& time_grid, const Tolerances& tol = {},
                                const EvolveOptions& options = {});

/// Emission observables for many initial states of one undriven model from a
/// single backward (Heisenberg-picture) propagation of the excitation-number
/// and emission-rate operators: <O(t)>_psi = <psi|e^{L^dagger t}(O)|psi>.
/// Coherences between different excitation manifolds do not enter, so pure
/// states are handled exactly.
class AdjointBatch {
public:
    AdjointBatch(const SystemModel& model, Tolerances tol = {});

    int add(const ExcitationSet& excitations);
    int add(const PureState& state);
    int request_count() const { return static_cast<int>(requests_.size()); }

    // Sees the series after every sample; return false to stop early.
    using Monitor = std::function<bool(double t, const std::vector<ObservableSeries>& series)>;

    // One series per request, sampled every sample_dt up to t_max.
    std::vector<ObservableSeries> run(double t_max, double sample_dt = 0.01, const Monitor& keep_going = {});

    const OdeStats& stats() const { return stats_; }

private:
    struct Request {
        bool basis = true;
        int group = 0;
        int local = 0;
        std::vector<Eigen::VectorXcd> blocks;  // pure-state components per manifold
    };

    SystemModel model_;
    Tolerances tol_;
    std::shared_ptr<const BasisPartition> partition_;
    std::vector<Request> requests_;
    OdeStats stats_;
};

} // namespace subrad
