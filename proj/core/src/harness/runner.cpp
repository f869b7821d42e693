#include "subrad/harness/runner.hpp"

#include <algorithm>
#include <map>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <mutex>
#include <thread>

#include "subrad/cumulant.hpp"
#include "subrad/errors.hpp"
#include "subrad/harness/csv.hpp"
#include "subrad/lindblad.hpp"
#include "subrad/mcwf.hpp"
#include "subrad/rng.hpp"

namespace subrad::harness {

using nlohmann::json;

namespace {

constexpr int kMasterAutoCap = 10;

// Runs fn(i) for i in [0, count) on up to `workers` threads. The first
// exception is rethrown after all threads finish.
template <class Fn>
void parallel_for(std::size_t count, int workers, Fn fn) {
    const std::size_t w = std::min<std::size_t>(std::max(1, workers), count);
    if (w <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < w; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!error) error = std::current_exception();
                    next = count;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

std::vector<double> time_grid(const RunConfig& c, const std::vector<double>& extra = {}) {
    std::vector<double> g{0.0, c.solver.t_max};
    g.insert(g.end(), c.solver.snapshot_times.begin(), c.solver.snapshot_times.end());
    g.insert(g.end(), extra.begin(), extra.end());
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    g.erase(std::remove_if(g.begin(), g.end(), [&](double t) { return t > c.solver.t_max; }), g.end());
    return g;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    int n = 0;
    for (double x : v)
        if (std::isfinite(x)) s += x, ++n;
    return n ? s / n : std::numeric_limits<double>::quiet_NaN();
}

// Sample standard deviation of the finite entries (0 for a single value).
double std_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    int n = 0;
    for (double x : v)
        if (std::isfinite(x)) s += (x - m) * (x - m), ++n;
    if (n == 0) return std::numeric_limits<double>::quiet_NaN();
    return n > 1 ? std::sqrt(s / (n - 1)) : 0.0;
}

// Runs that stopped early are averaged over their common prefix.
ObservableSeries average(const std::vector<ObservableSeries>& all, bool ragged) {
    if (all.size() == 1) return all.front();
    ObservableSeries m;
    std::size_t len = all.front().size();
    for (const auto& s : all) {
        if (ragged) len = std::min(len, s.size());
        else if (s.size() != len) throw ConsistencyError("realizations sampled on different grids");
    }
    for (std::size_t k = 0; k < len; ++k) {
        double p = 0.0, g = 0.0;
        for (const auto& s : all) p += s.p_exc[k], g += s.gamma_tot[k];
        m.push(all.front().times[k], p / all.size(), g / all.size());
    }
    m.metadata["realizations"] = all.size();
    return m;
}

// gamma_inst at or below the threshold, or nothing left to emit.
bool below_threshold(double p, double g, double threshold) { return !(p > kPopulationFloor) || g <= threshold * p; }

int rounded_count(double fraction, int n) { return static_cast<int>(std::lround(fraction * n)); }

std::vector<PureState> initial_states(const RunConfig& c, const ArrayGeometry& geo, std::uint64_t seed,
                                      std::vector<ExcitationSet>& sets) {
    const int n = geo.size();
    const auto& s = c.state;
    if (s.kind == "coherent") return {coherent_spin_state(geo, s.n_exc, s.k)};
    if (s.kind == "checkerboard") sets = {checkerboard_set(geo)};
    else if (s.kind == "incoherent") sets = {ExcitationSet::make(n, s.indices)};
    else if (s.kind == "ground") sets = {ExcitationSet::make(n, {})};
    else sets = random_excitation_sets(n, rounded_count(s.n_exc, n), s.realizations, rng::derive_seed(seed, s.seed));
    std::vector<PureState> out;
    for (const auto& e : sets) out.push_back(incoherent_product_state(e));
    return out;
}

json set_json(const ExcitationSet& e) {
    return e.indices;
}

void summarize(RunResult& r, const RunConfig& c, int n) {
    PointSummary& s = r.summary;
    s.backend = r.backend;
    s.realizations = static_cast<int>(r.series.size());
    std::vector<double> psub, tsub, burst;
    for (const auto& ser : r.series) {
        const auto sp = subradiant_population(ser, c.observables.threshold);
        if (sp) {
            psub.push_back(sp->p_sub / n);
            tsub.push_back(sp->t_sub);
            s.multiple_crossings += sp->multiple_crossings ? 1 : 0;
        } else {
            ++s.missing_crossings;
        }
        double b = std::numeric_limits<double>::quiet_NaN();
        if (!ser.gamma_tot.empty() && ser.gamma_tot.front() > 0.0) b = burst_ratio(ser);
        burst.push_back(b);
    }
    s.p_sub_mean = mean_of(psub);
    s.p_sub_std = std_of(psub);
    s.t_sub_mean = mean_of(tsub);
    s.burst_mean = mean_of(burst);
    s.burst_std = std_of(burst);
    s.max_p_exc = r.mean.p_exc.empty() ? 0.0 : *std::max_element(r.mean.p_exc.begin(), r.mean.p_exc.end());
    if (r.preparation) {
        s.fidelity = r.preparation->fidelity;
        s.t_inversion = r.preparation->time;
        s.max_p_exc = r.preparation->p_exc;
    }
}

} // namespace

std::string select_backend(const RunConfig& c) {
    const int n = c.geometry.n_atoms();
    const bool driven = c.model.rabi != 0.0;
    const bool needs_master = driven || c.observables.overlaps || c.observables.spectrum.enabled() ||
                              c.observables.fidelity || c.state.kind == "coherent";
    std::string b = c.solver.backend;
    if (b == "auto") {
        if (needs_master || n <= kMasterAutoCap) b = "master";
        else b = "cumulant";
    }
    if ((b == "master" || b == "mcwf") && n > kDenseAtomCap)
        throw CapacityError(b + " backend supports at most " + std::to_string(kDenseAtomCap) + " atoms, got " +
                            std::to_string(n));
    if (b == "cumulant") {
        if (n > kCumulantAtomCap)
            throw CapacityError("cumulant backend supports at most " + std::to_string(kCumulantAtomCap) +
                                " atoms, got " + std::to_string(n));
        if (needs_master) throw UnsupportedState("cumulant backend needs an undriven incoherent run");
    }
    return b;
}

std::size_t max_inversion_index(const ObservableSeries& series, int target_count) {
    const auto& p = series.p_exc;
    if (p.empty()) throw DomainError("empty series");
    for (std::size_t k = 1; k + 1 < p.size(); ++k)
        if (p[k] >= p[k - 1] && p[k] > p[k + 1] && p[k] > 0.5 * target_count) return k;
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

PreparationResult preparation_fidelity(const SystemModel& model, const ArrayGeometry& geometry, double t_max,
                                       double sample_dt, const Tolerances& tol) {
    const int n = geometry.size();
    const ExcitationSet target_set = checkerboard_set(geometry);
    const PureState target = incoherent_product_state(target_set);
    const DensityState ground = to_density(incoherent_product_state(ExcitationSet::make(n, {})));
    const int count = target_set.count();

    // Resolve the Rabi period: at least ~100 samples per oscillation.
    EvolveOptions opt;
    opt.sample_dt = std::min(sample_dt, 0.03 / std::max(1.0, std::abs(model.rabi)));
    bool above = false;
    double last = -1.0;
    opt.keep_going = [&](double, double p, double) {
        // Stop one sample after the first qualifying maximum.
        if (above && p < last) return false;
        above = above || p > 0.5 * count;
        last = p;
        return true;
    };
    const auto first = evolve_density(model, ground, {0.0, t_max}, tol, opt);
    const std::size_t k = max_inversion_index(first.series, count);
    PreparationResult r;
    r.time = first.series.times[k];
    r.p_exc = first.series.p_exc[k];
    if (r.time == 0.0) {
        r.fidelity = fidelity(target, ground);
        return r;
    }
    EvolveOptions plain;
    plain.sample_dt = opt.sample_dt;
    const auto second = evolve_density(model, ground, {0.0, r.time}, tol, plain);
    r.fidelity = fidelity(target, second.snapshots.back());
    return r;
}

std::uint64_t point_seed(const RunConfig& config, const std::vector<std::size_t>& coordinates) {
    if (coordinates.empty()) return config.seed;
    std::uint64_t s = config.seed;
    for (std::size_t c : coordinates) s = rng::derive_seed(s, c);
    return s;
}

json run_metadata(const RunConfig& config, const std::string& backend, std::uint64_t seed) {
    json m;
    m["library"] = "subrad";
    m["version"] = SUBRAD_VERSION;
    m["backend"] = backend;
    m["seed"] = seed;
    m["config"] = config.to_json();
    m["tolerances"] = config.solver.tolerances.to_json();
    m["conventions"] = {
        {"units", "lengths in transition wavelengths, rates and frequencies in the single-atom decay rate"},
        {"frame", "rotating at the bare transition frequency"},
        {"basis", "bit n of a product-state index is atom n (atom 0 least significant); set bit = excited"},
        {"checkerboard", config.geometry.dimensionality == 1 ? "even site index" : "even row + column parity"}};
    try {
        const ArrayGeometry geo = config.geometry.build();
        m["checkerboard_atoms"] = set_json(checkerboard_set(geo));
    } catch (const Error&) {
    }
    return m;
}

RunResult execute(const RunConfig& c, const RunOptions& options) {
    RunResult r;
    r.backend = select_backend(c);
    const ArrayGeometry geo = c.geometry.build();
    const SystemModel model = c.model.build(geo);
    const int n = geo.size();
    const Tolerances& tol = c.solver.tolerances;
    const auto& obs = c.observables;

    if (obs.fidelity) {
        r.preparation = preparation_fidelity(model, geo, c.solver.t_max, c.solver.sample_dt, tol);
        r.initial_sets = {ExcitationSet::make(n, {})};
    }

    const std::vector<PureState> states = initial_states(c, geo, options.point_seed, r.initial_sets);
    EvolveOptions eopt;
    eopt.sample_dt = c.solver.sample_dt;
    eopt.correlation_times = obs.correlation_times;
    const double threshold = obs.threshold;
    const bool stop = c.solver.stop_after_crossing;
    if (stop)
        eopt.keep_going = [threshold](double, double p, double g) { return !below_threshold(p, g, threshold); };

    if (r.backend == "master") {
        // The backward batch only needs manifold-diagonal blocks, which also
        // makes it the cheaper route for a single coherent state.
        const bool batch = (states.size() > 1 || c.state.kind == "coherent") && !model.driven() &&
                           obs.correlation_times.empty() && !obs.spectrum.enabled();
        if (batch) {
            AdjointBatch ab(model, tol);
            for (const auto& s : states) ab.add(s);
            AdjointBatch::Monitor monitor;
            if (stop)
                monitor = [threshold](double, const std::vector<ObservableSeries>& all) {
                    return !std::all_of(all.begin(), all.end(), [&](const ObservableSeries& s) {
                        return below_threshold(s.p_exc.back(), s.gamma_tot.back(), threshold);
                    });
                };
            r.series = ab.run(c.solver.t_max, c.solver.sample_dt, monitor);
        } else {
            const auto& t_primes = obs.spectrum.t_primes;
            for (const auto& s : states) {
                auto ev = evolve_density(model, to_density(s), time_grid(c, t_primes), tol, eopt);
                if (obs.spectrum.enabled()) {
                    SpectrumOptions so;
                    so.tau_max = obs.spectrum.tau_max;
                    so.dtau = obs.spectrum.dtau;
                    so.per_atom = obs.spectrum.per_atom;
                    so.tolerances = obs.spectrum.tolerances;
                    const auto omega = obs.spectrum.omega_grid();
                    std::vector<SpectrumResult> spectra(t_primes.size());
                    parallel_for(t_primes.size(), options.workers, [&](std::size_t k) {
                        const auto it = std::find(ev.snapshot_times.begin(), ev.snapshot_times.end(), t_primes[k]);
                        if (it == ev.snapshot_times.end()) throw ConsistencyError("missing snapshot at t'");
                        spectra[k] = dynamic_spectrum(model, ev.snapshots[it - ev.snapshot_times.begin()], omega, so,
                                                      t_primes[k]);
                    });
                    r.spectra = std::move(spectra);
                    for (const auto& sp : r.spectra)
                        for (const auto& w : sp.warnings) r.warnings.push_back(w);
                }
                r.series.push_back(std::move(ev.series));
            }
        }
        if (obs.overlaps) {
            r.manifolds = manifold_eigenstates(model);
            r.overlaps = overlap_series(model, to_density(states.front()), c.solver.t_max, c.solver.sample_dt,
                                        obs.overlap_snapshots, tol, &*r.manifolds);
        }
    } else if (r.backend == "cumulant") {
        for (const auto& e : r.initial_sets) {
            auto ev = evolve_cumulant(model, to_cumulant(e), time_grid(c), tol, eopt);
            for (const auto& w : ev.warnings) r.warnings.push_back(w);
            r.series.push_back(std::move(ev.series));
        }
    } else {
        for (std::size_t i = 0; i < states.size(); ++i) {
            TrajectoryConfig tc;
            tc.trajectories = c.solver.trajectories;
            tc.seed = rng::derive_seed(options.point_seed, 0x6d637766ULL, i);
            tc.bisection_tol = c.solver.bisection_tol;
            tc.record_jumps = c.solver.record_jumps;
            tc.workers = options.workers;
            tc.tolerances = tol;
            auto ens = run_ensemble(model, states[i], c.solver.t_max, tc, c.solver.sample_dt, obs.correlation_times);
            r.series.push_back(std::move(ens.series));
        }
    }
    r.mean = average(r.series, c.solver.stop_after_crossing);
    summarize(r, c, n);
    return r;
}

namespace {

void prepare_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& file) {
    return (std::filesystem::path(dir) / file).string();
}

json summary_json(const PointSummary& s) {
    return {{"backend", s.backend},         {"realizations", s.realizations},
            {"p_sub_over_n_mean", s.p_sub_mean}, {"p_sub_over_n_std", s.p_sub_std},
            {"t_sub_mean", s.t_sub_mean},   {"missing_crossings", s.missing_crossings},
            {"multiple_crossings", s.multiple_crossings}, {"burst_ratio_mean", s.burst_mean},
            {"burst_ratio_std", s.burst_std}, {"max_p_exc", s.max_p_exc},
            {"fidelity", s.fidelity},       {"t_inversion", s.t_inversion}};
}

void write_spectra(const std::vector<SpectrumResult>& spectra, const std::string& dir) {
    for (std::size_t k = 0; k < spectra.size(); ++k)
        write_csv(join(dir, "spectrum_" + std::to_string(k) + ".csv"), spectrum_table(spectra[k]));
}

} // namespace

RunResult run(const RunConfig& config, const std::string& out_dir, int workers) {
    RunOptions opt;
    opt.workers = workers;
    opt.point_seed = point_seed(config, {});
    RunResult r = execute(config, opt);
    prepare_dir(out_dir);

    write_csv(join(out_dir, "series.csv"), series_table(r.mean));
    if (r.series.size() > 1) {
        CsvTable t;
        t.header = {"realization", "p_sub_over_n", "t_sub", "burst_ratio", "excited_mask"};
        for (std::size_t i = 0; i < r.series.size(); ++i) {
            const auto sp = subradiant_population(r.series[i], config.observables.threshold);
            const double nan = std::numeric_limits<double>::quiet_NaN();
            const double mask = r.initial_sets[i].n_atoms <= 32 ? r.initial_sets[i].mask() : std::nan("");
            const auto& s = r.series[i];
            t.rows.push_back({static_cast<double>(i), sp ? sp->p_sub / config.geometry.n_atoms() : nan,
                              sp ? sp->t_sub : nan,
                              !s.gamma_tot.empty() && s.gamma_tot.front() > 0.0 ? burst_ratio(s) : nan, mask});
        }
        write_csv(join(out_dir, "realizations.csv"), t);
    }
    for (std::size_t k = 0; k < r.mean.correlations.size(); ++k)
        write_csv(join(out_dir, "correlation_" + std::to_string(k) + ".csv"), correlation_table(r.mean.correlations[k]));
    if (r.overlaps) {
        write_csv(join(out_dir, "overlaps.csv"), overlap_table(*r.overlaps));
        if (!r.overlaps->snapshots.empty())
            write_csv(join(out_dir, "state_overlaps.csv"), state_overlap_table(*r.overlaps, *r.manifolds));
        CsvTable m;
        m.header = {"manifold", "state", "energy", "decay_rate", "nh_energy", "nh_decay_rate"};
        for (const auto& mb : r.manifolds->manifolds)
            for (Eigen::Index i = 0; i < mb.energies.size(); ++i)
                m.rows.push_back({static_cast<double>(mb.n_exc), static_cast<double>(i), mb.energies[i],
                                  mb.decay_rates[i], mb.nh_eigenvalues[i].real(), mb.nh_decay_rates[i]});
        write_csv(join(out_dir, "manifolds.csv"), m);
    }
    write_spectra(r.spectra, out_dir);

    json meta = run_metadata(config, r.backend, opt.point_seed);
    meta["summary"] = summary_json(r.summary);
    meta["series"] = r.mean.metadata;
    meta["warnings"] = r.warnings;
    if (r.series.size() > 1) {
        json sets = json::array();
        for (const auto& e : r.initial_sets) sets.push_back(set_json(e));
        meta["initial_sets"] = sets;
    }
    if (!r.spectra.empty()) {
        json sp = json::array();
        for (const auto& s : r.spectra)
            sp.push_back({{"t_prime", s.t_prime}, {"tau_max", s.tau_max}, {"residual", s.residual},
                          {"warnings", s.warnings}});
        meta["spectra"] = sp;
    }
    write_json(join(out_dir, "metadata.json"), meta);
    return r;
}

std::vector<PointSummary> scan(const RunConfig& config, const std::string& out_dir, int workers) {
    if (config.scan.empty()) throw ConfigError("scan", "no swept parameters");
    const std::size_t points = config.scan.point_count();
    std::vector<PointSummary> out(points);
    std::vector<std::string> backends(points);
    parallel_for(points, workers, [&](std::size_t i) {
        const RunConfig pc = config.at_point(i);
        const auto coords = config.scan.coordinates(i);
        RunOptions opt;
        opt.workers = 1;
        opt.point_seed = point_seed(config, coords);
        RunResult r = execute(pc, opt);
        r.summary.sweep.clear();
        for (std::size_t a = 0; a < coords.size(); ++a) r.summary.sweep.push_back(config.scan.axes[a].values[coords[a]]);
        out[i] = std::move(r.summary);
    });

    prepare_dir(out_dir);
    CsvTable t;
    t.header.push_back("point");
    for (const auto& a : config.scan.axes) t.header.push_back(a.key);
    t.header.insert(t.header.end(), {"realizations", "p_sub_over_n_mean", "p_sub_over_n_std", "t_sub_mean",
                                     "missing_crossings", "multiple_crossings", "burst_ratio_mean",
                                     "burst_ratio_std", "max_p_exc", "fidelity", "t_inversion"});
    for (std::size_t i = 0; i < points; ++i) {
        const auto& s = out[i];
        std::vector<double> row{static_cast<double>(i)};
        row.insert(row.end(), s.sweep.begin(), s.sweep.end());
        row.insert(row.end(), {static_cast<double>(s.realizations), s.p_sub_mean, s.p_sub_std, s.t_sub_mean,
                               static_cast<double>(s.missing_crossings), static_cast<double>(s.multiple_crossings),
                               s.burst_mean, s.burst_std, s.max_p_exc, s.fidelity, s.t_inversion});
        t.rows.push_back(std::move(row));
    }
    write_csv(join(out_dir, "scan.csv"), t);

    json meta = run_metadata(config, out.empty() ? "" : out.front().backend, config.seed);
    json seeds = json::array();
    for (std::size_t i = 0; i < points; ++i) seeds.push_back(point_seed(config, config.scan.coordinates(i)));
    meta["point_seeds"] = seeds;
    write_json(join(out_dir, "metadata.json"), meta);
    return out;
}

std::vector<SpectrumResult> spectrum(const RunConfig& config, const std::string& out_dir, int workers) {
    if (!config.observables.spectrum.enabled())
        throw ConfigError("observables.spectrum", "the spectrum verb needs observables.spectrum.t_primes");
    RunConfig c = config;
    c.observables.overlaps = false;
    c.observables.correlation_times.clear();
    RunOptions opt;
    opt.workers = workers;
    opt.point_seed = point_seed(c, {});
    RunResult r = execute(c, opt);
    prepare_dir(out_dir);
    write_spectra(r.spectra, out_dir);
    json meta = run_metadata(c, r.backend, opt.point_seed);
    json sp = json::array();
    for (const auto& s : r.spectra)
        sp.push_back({{"t_prime", s.t_prime}, {"tau_max", s.tau_max}, {"residual", s.residual},
                      {"warnings", s.warnings}});
    meta["spectra"] = sp;
    write_json(join(out_dir, "metadata.json"), meta);
    return r.spectra;
}

json validate(const RunConfig& config) {
    config.check();
    json j;
    j["name"] = config.name;
    j["n_atoms"] = config.geometry.n_atoms();
    const ArrayGeometry geo = config.geometry.build();
    config.model.build(geo);
    if (config.scan.empty()) {
        j["backend"] = select_backend(config);
    } else {
        std::map<std::string, int> backends;  // points per backend
        for (std::size_t i = 0; i < config.scan.point_count(); ++i) {
            const RunConfig pc = config.at_point(i);
            pc.geometry.build();
            ++backends[select_backend(pc)];
        }
        j["backends"] = backends;
        j["points"] = config.scan.point_count();
    }
    j["realizations"] = config.state.realizations;
    return j;
}

} // namespace subrad::harness
