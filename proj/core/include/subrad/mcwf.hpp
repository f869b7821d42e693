#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "subrad/lindblad.hpp"

namespace subrad {

/// Collective decay channels c_k = sqrt(rate_k) sum_n modes(n, k) s_n^-
/// from the eigendecomposition of Gamma.
struct JumpChannels {
    Eigen::VectorXd rates;
    Eigen::MatrixXd modes;  // N x K, orthonormal columns

    int count() const { return static_cast<int>(rates.size()); }
    Eigen::MatrixXd reconstruct() const { return modes * rates.asDiagonal() * modes.transpose(); }
};

/// Channels with rate below 1e-12 are dropped. Throws NumericalError if
/// Gamma has an eigenvalue below -1e-10.
JumpChannels collective_jump_channels(const CouplingMatrices& couplings);

struct TrajectoryConfig {
    int trajectories = 2000;
    std::uint64_t seed = 0;
    double bisection_tol = 1e-10;  // on the jump time
    bool renormalize_samples = true;  // report normalized states
    bool record_jumps = false;
    int workers = 1;
    Tolerances tolerances;
};

struct JumpEvent {
    double time;
    int channel;
};

struct Trajectory {
    int n_atoms = 0;
    std::vector<double> times;
    std::vector<Eigen::VectorXcd> states;  // normalized, one per time
    std::vector<JumpEvent> jumps;
};

/// Single quantum trajectory with the waiting-time method: the unnormalized
/// state evolves under H_eff until its squared norm falls to a uniform random
/// threshold (located by bisection on the continuous extension), then a
/// channel is chosen with probability proportional to <c_k^dagger c_k>.
/// Fully determined by (config.seed, index).
Trajectory evolve_trajectory(const SystemModel& model, const PureState& psi0,
                             const std::vector<double>& time_grid, const TrajectoryConfig& config,
                             std::uint64_t index);

/// Maps a normalized state to (p_exc, gamma_tot).
using ObservableExtractor = std::function<std::pair<double, double>(const PureState&)>;

/// Mean and standard error of p_exc and gamma_tot over trajectories sharing
/// one time grid; gamma_inst = mean(gamma_tot)/mean(p_exc) with a delta-method
/// error. A single trajectory gives NaN errors; an empty ensemble throws.
ObservableSeries ensemble_average(const std::vector<Trajectory>& trajectories,
                                  const ObservableExtractor& extractor);

/// Default extractor for a model.
ObservableExtractor emission_extractor(const CouplingMatrices& couplings);

struct EnsembleResult {
    ObservableSeries series;
    std::vector<std::vector<JumpEvent>> jump_logs;  // filled when config.record_jumps
};

/// Runs config.trajectories trajectories on config.workers threads and
/// reduces them in fixed chunks of 64, so results do not depend on the
/// worker count. Observables are sampled every sample_dt up to t_max;
/// correlation matrices are averaged at correlation_times.
EnsembleResult run_ensemble(const SystemModel& model, const PureState& psi0, double t_max,
                            const TrajectoryConfig& config, double sample_dt = 0.01,
                            const std::vector<double>& correlation_times = {});

} // namespace subrad
