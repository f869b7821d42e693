#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "subrad/harness/config.hpp"
#include "subrad/observables.hpp"
#include "subrad/spectral.hpp"

namespace subrad::harness {

/// Resolves solver.backend = "auto": master for N <= 10, when a drive,
/// overlaps, spectra or fidelity are requested; cumulant for larger
/// undriven incoherent runs. Throws CapacityError if nothing fits.
std::string select_backend(const RunConfig& config);

/// Time of maximal inversion: the first local maximum of p_exc above half
/// of `target_count`, else the global maximum. Returns the sample index.
std::size_t max_inversion_index(const ObservableSeries& series, int target_count);

struct PreparationResult {
    double time = 0.0;        // of maximal inversion
    double p_exc = 0.0;       // at that time
    double fidelity = 0.0;    // against the checkerboard product state
};

/// Driven master-equation run from the ground state: fidelity of the state
/// at maximal inversion with the checkerboard product state.
PreparationResult preparation_fidelity(const SystemModel& model, const ArrayGeometry& geometry, double t_max,
                                       double sample_dt, const Tolerances& tol);

struct PointSummary {
    std::vector<double> sweep;  // swept values, in axis order
    std::string backend;
    int realizations = 0;
    double p_sub_mean = 0.0;  // p_sub / N
    double p_sub_std = 0.0;
    double t_sub_mean = 0.0;
    int missing_crossings = 0;  // realizations whose gamma_inst never reached the threshold
    int multiple_crossings = 0;
    double burst_mean = 0.0;
    double burst_std = 0.0;
    double max_p_exc = 0.0;
    double fidelity = std::numeric_limits<double>::quiet_NaN();
    double t_inversion = std::numeric_limits<double>::quiet_NaN();
};

struct RunResult {
    std::string backend;
    std::vector<ExcitationSet> initial_sets;  // one per realization for incoherent kinds
    std::vector<ObservableSeries> series;     // one per realization
    ObservableSeries mean;                    // realization average
    std::optional<ManifoldSpectrum> manifolds;
    std::optional<OverlapSeries> overlaps;
    std::vector<SpectrumResult> spectra;
    std::optional<PreparationResult> preparation;
    PointSummary summary;
    std::vector<std::string> warnings;
};

struct RunOptions {
    int workers = 1;
    std::uint64_t point_seed = 0;  // filled per scan point
};

/// Executes one configuration (its scan section is ignored).
RunResult execute(const RunConfig& config, const RunOptions& options);

/// Per-point seed: derived from the config seed and the grid coordinates,
/// so results do not depend on scheduling.
std::uint64_t point_seed(const RunConfig& config, const std::vector<std::size_t>& coordinates);

nlohmann::json run_metadata(const RunConfig& config, const std::string& backend, std::uint64_t seed);

// CLI verbs. Each writes its CSVs and a metadata.json into `out_dir`.
RunResult run(const RunConfig& config, const std::string& out_dir, int workers = 1);
std::vector<PointSummary> scan(const RunConfig& config, const std::string& out_dir, int workers = 1);
std::vector<SpectrumResult> spectrum(const RunConfig& config, const std::string& out_dir, int workers = 1);
/// Schema and capacity checks only; returns a short description.
nlohmann::json validate(const RunConfig& config);

} // namespace subrad::harness
