#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "subrad/coupling.hpp"
#include "subrad/lindblad.hpp"
#include "subrad/model.hpp"
#include "subrad/states.hpp"

namespace subrad::harness {

struct GeometryConfig {
    int dimensionality = 1;
    std::vector<int> counts{10};
    double a = 0.15;  // wavelengths
    CVec3 dipole = default_dipole();

    int n_atoms() const;
    ArrayGeometry build() const;
};

// kind: checkerboard | incoherent (explicit indices) | random | coherent | ground
struct StateConfig {
    std::string kind = "checkerboard";
    double n_exc = 0.5;  // fraction for random/coherent
    std::vector<int> indices;
    Vec3 k = Vec3::Zero();
    std::uint64_t seed = 0;
    int realizations = 1;
};

struct ModelConfig {
    double rabi = 0.0;
    bool coherent_interactions = true;
    std::vector<double> detunings;  // explicit per-atom values; overrides the pattern
    double detuning = 0.0;          // pattern value
    // "off_checkerboard", "checkerboard", "all" or an explicit index list
    std::string detuned_atoms = "off_checkerboard";
    std::vector<int> detuned_indices;

    SystemModel build(const ArrayGeometry& geometry) const;
};

struct SolverConfig {
    std::string backend = "auto";  // auto | master | mcwf | cumulant
    Tolerances tolerances;
    double t_max = 50.0;
    double sample_dt = 0.01;
    std::vector<double> snapshot_times;
    int trajectories = 2000;
    double bisection_tol = 1e-10;
    bool record_jumps = false;
    // End each run once gamma_inst has fallen to observables.threshold
    // (master and cumulant backends). Summaries then cannot flag later
    // re-crossings.
    bool stop_after_crossing = false;
};

struct SpectrumConfig {
    std::vector<double> t_primes;
    double omega_min = -5.0;
    double omega_max = 5.0;
    double omega_step = 0.01;
    double tau_max = 200.0;
    double dtau = 0.05;
    bool per_atom = false;
    Tolerances tolerances{1e-6, 1e-8};

    bool enabled() const { return !t_primes.empty(); }
    std::vector<double> omega_grid() const;
};

struct ObservablesConfig {
    double threshold = 0.1;
    std::vector<double> correlation_times;
    bool overlaps = false;
    std::vector<double> overlap_snapshots;
    bool fidelity = false;  // against the checkerboard product state, at maximal inversion
    SpectrumConfig spectrum;
};

struct ScanAxis {
    std::string key;  // n_exc | n_atoms | a | rabi | detuning | detuning_12 | detuning_32
    std::vector<double> values;
};

struct ScanConfig {
    std::vector<ScanAxis> axes;
    bool empty() const { return axes.empty(); }
    std::size_t point_count() const;
    // Row-major grid coordinates of point `index` (last axis fastest).
    std::vector<std::size_t> coordinates(std::size_t index) const;
};

struct RunConfig {
    std::string name = "run";
    std::uint64_t seed = 0;
    GeometryConfig geometry;
    StateConfig state;
    ModelConfig model;
    SolverConfig solver;
    ObservablesConfig observables;
    ScanConfig scan;

    /// Throws ConfigError naming the offending key path on unknown keys,
    /// wrong types or out-of-range values.
    static RunConfig parse(const nlohmann::json& j);
    static RunConfig load(const std::string& path);

    nlohmann::json to_json() const;

    /// Copy with the sweep values of scan point `index` applied and the
    /// scan section cleared.
    RunConfig at_point(std::size_t index) const;

    // Semantic checks beyond the schema (conflicting sweeps, capacities).
    void check() const;
};

} // namespace subrad::harness
