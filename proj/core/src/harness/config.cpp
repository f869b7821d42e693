#include "subrad/harness/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "subrad/errors.hpp"

namespace subrad::harness {

using nlohmann::json;

namespace {

const char* type_name(const json& v) { return v.type_name(); }

// Strict object reader: every key must be consumed, unknown keys throw.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_, std::string("expected an object, got ") + type_name(j_));
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }
    std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    const json& raw(const std::string& key) { seen_.insert(key); return j_.at(key); }

    double number(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number()) throw ConfigError(path(key), "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ConfigError(path(key), "must be finite");
        return x;
    }
    double positive(const std::string& key, double fallback) {
        const double x = number(key, fallback);
        if (!(x > 0.0)) throw ConfigError(path(key), "must be positive");
        return x;
    }
    int integer(const std::string& key, int fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number_integer()) throw ConfigError(path(key), "expected an integer");
        return v.get<int>();
    }
    std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
            throw ConfigError(path(key), "expected a non-negative integer");
        return v.get<std::uint64_t>();
    }
    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_boolean()) throw ConfigError(path(key), "expected true or false");
        return v.get<bool>();
    }
    std::string string(const std::string& key, const std::string& fallback, std::initializer_list<const char*> allowed) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_string()) throw ConfigError(path(key), "expected a string");
        std::string s = v.get<std::string>();
        if (allowed.size() != 0 &&
            std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return s == a; })) {
            std::string list;
            for (const char* a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
            throw ConfigError(path(key), "unknown value '" + s + "' (expected one of " + list + ")");
        }
        return s;
    }
    std::vector<double> numbers(const std::string& key) {
        if (!has(key)) return {};
        return numbers_of(j_.at(key), path(key));
    }
    std::vector<int> integers(const std::string& key) {
        if (!has(key)) return {};
        const json& v = j_.at(key);
        if (!v.is_array()) throw ConfigError(path(key), "expected an array of integers");
        std::vector<int> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number_integer())
                throw ConfigError(path(key) + "[" + std::to_string(i) + "]", "expected an integer");
            out.push_back(v[i].get<int>());
        }
        return out;
    }

    static std::vector<double> numbers_of(const json& v, const std::string& p) {
        if (!v.is_array()) throw ConfigError(p, "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) throw ConfigError(p + "[" + std::to_string(i) + "]", "expected a number");
            out.push_back(v[i].get<double>());
        }
        return out;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(path(it.key()), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void require_increasing(const std::vector<double>& v, const std::string& path, bool allow_zero = true) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] < 0.0 || (!allow_zero && v[i] == 0.0) || !std::isfinite(v[i]))
            throw ConfigError(path + "[" + std::to_string(i) + "]", "times must be finite and non-negative");
        if (i > 0 && !(v[i] > v[i - 1])) throw ConfigError(path, "times must be strictly increasing");
    }
}

CVec3 parse_dipole(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 3) throw ConfigError(path, "expected three components");
    CVec3 d;
    for (int i = 0; i < 3; ++i) {
        const json& c = v[i];
        const std::string p = path + "[" + std::to_string(i) + "]";
        if (c.is_number()) {
            d[i] = cplx(c.get<double>(), 0.0);
        } else if (c.is_array() && c.size() == 2 && c[0].is_number() && c[1].is_number()) {
            d[i] = cplx(c[0].get<double>(), c[1].get<double>());
        } else {
            throw ConfigError(p, "expected a number or a [re, im] pair");
        }
    }
    const double norm = d.norm();
    if (!(norm > 0.0)) throw ConfigError(path, "dipole must be non-zero");
    return d / norm;
}

json dipole_json(const CVec3& d) {
    json out = json::array();
    for (int i = 0; i < 3; ++i) out.push_back({d[i].real(), d[i].imag()});
    return out;
}

const std::set<std::string> kSweepKeys{"n_exc", "n_atoms", "a", "rabi", "detuning", "detuning_12", "detuning_32"};

} // namespace

int GeometryConfig::n_atoms() const {
    int n = 1;
    for (int c : counts) n *= c;
    return n;
}

ArrayGeometry GeometryConfig::build() const { return build_lattice(dimensionality, counts, a, dipole); }

SystemModel ModelConfig::build(const ArrayGeometry& geometry) const {
    SystemModel m(coupling_matrices(geometry));
    m.rabi = rabi;
    m.coherent_interactions = coherent_interactions;
    const int n = geometry.size();
    if (!detunings.empty()) {
        if (static_cast<int>(detunings.size()) != n)
            throw ConfigError("model.detunings", "needs one value per atom (" + std::to_string(n) + ")");
        m.detunings = Eigen::Map<const Eigen::VectorXd>(detunings.data(), n);
    } else if (detuning != 0.0) {
        m.detunings = Eigen::VectorXd::Zero(n);
        if (!detuned_indices.empty()) {
            for (int i : detuned_indices) {
                if (i < 0 || i >= n) throw ConfigError("model.detuned_atoms", "atom index out of range");
                m.detunings[i] = detuning;
            }
        } else {
            const ExcitationSet cb = checkerboard_set(geometry);
            for (int i = 0; i < n; ++i) {
                const bool on_cb = cb.contains(i);
                if (detuned_atoms == "all" || (detuned_atoms == "checkerboard" && on_cb) ||
                    (detuned_atoms == "off_checkerboard" && !on_cb))
                    m.detunings[i] = detuning;
            }
        }
    }
    m.validate();
    return m;
}

std::vector<double> SpectrumConfig::omega_grid() const {
    const long k = std::lround((omega_max - omega_min) / omega_step);
    std::vector<double> w(k + 1);
    for (long i = 0; i <= k; ++i) w[i] = omega_min + i * omega_step;
    return w;
}

std::size_t ScanConfig::point_count() const {
    if (axes.empty()) return 0;
    std::size_t n = 1;
    for (const auto& a : axes) n *= a.values.size();
    return n;
}

std::vector<std::size_t> ScanConfig::coordinates(std::size_t index) const {
    std::vector<std::size_t> c(axes.size());
    for (std::size_t i = axes.size(); i-- > 0;) {
        c[i] = index % axes[i].values.size();
        index /= axes[i].values.size();
    }
    return c;
}

RunConfig RunConfig::parse(const json& j) {
    RunConfig c;
    Section root(j, "");
    if (root.has("name")) c.name = root.string("name", c.name, {});
    c.seed = root.seed("seed", 0);

    if (root.has("geometry")) {
        Section s(root.raw("geometry"), "geometry");
        c.geometry.dimensionality = s.integer("dimensionality", 1);
        if (c.geometry.dimensionality != 1 && c.geometry.dimensionality != 2)
            throw ConfigError("geometry.dimensionality", "must be 1 or 2");
        if (s.has("counts")) c.geometry.counts = s.integers("counts");
        if (static_cast<int>(c.geometry.counts.size()) != c.geometry.dimensionality)
            throw ConfigError("geometry.counts", "needs one entry per dimension");
        for (int n : c.geometry.counts)
            if (n < 1) throw ConfigError("geometry.counts", "counts must be positive");
        c.geometry.a = s.positive("a", c.geometry.a);
        if (s.has("dipole")) c.geometry.dipole = parse_dipole(s.raw("dipole"), "geometry.dipole");
        s.finish();
    }

    if (root.has("state")) {
        Section s(root.raw("state"), "state");
        c.state.kind = s.string("kind", c.state.kind, {"checkerboard", "incoherent", "random", "coherent", "ground"});
        c.state.n_exc = s.number("n_exc", c.state.n_exc);
        if (c.state.n_exc < 0.0 || c.state.n_exc > 1.0) throw ConfigError("state.n_exc", "must lie in [0, 1]");
        c.state.indices = s.integers("indices");
        if (s.has("k")) {
            const auto k = s.numbers("k");
            if (k.size() != 3) throw ConfigError("state.k", "expected three components");
            c.state.k = Vec3(k[0], k[1], k[2]);
        }
        c.state.seed = s.seed("seed", 0);
        c.state.realizations = s.integer("realizations", 1);
        if (c.state.realizations < 1) throw ConfigError("state.realizations", "must be at least 1");
        s.finish();
        if (c.state.kind == "incoherent" && c.state.indices.empty())
            throw ConfigError("state.indices", "required for kind 'incoherent'");
        if (c.state.kind != "incoherent" && !c.state.indices.empty())
            throw ConfigError("state.indices", "only valid for kind 'incoherent'");
        if (c.state.kind != "random" && c.state.realizations != 1)
            throw ConfigError("state.realizations", "only random states have several realizations");
    }

    if (root.has("model")) {
        Section s(root.raw("model"), "model");
        c.model.rabi = s.number("rabi", 0.0);
        c.model.coherent_interactions = s.boolean("coherent_interactions", true);
        c.model.detunings = s.numbers("detunings");
        c.model.detuning = s.number("detuning", 0.0);
        if (s.has("detuned_atoms")) {
            const json& v = s.raw("detuned_atoms");
            if (v.is_array()) {
                c.model.detuned_indices = s.integers("detuned_atoms");
                c.model.detuned_atoms = "indices";
            } else {
                c.model.detuned_atoms = s.string("detuned_atoms", "", {"off_checkerboard", "checkerboard", "all"});
            }
        }
        s.finish();
        if (!c.model.detunings.empty() && s.has("detuning") && c.model.detuning != 0.0)
            throw ConfigError("model.detuning", "conflicts with model.detunings");
    }

    if (root.has("solver")) {
        Section s(root.raw("solver"), "solver");
        c.solver.backend = s.string("backend", c.solver.backend, {"auto", "master", "mcwf", "cumulant"});
        c.solver.tolerances.rtol = s.positive("rtol", c.solver.tolerances.rtol);
        c.solver.tolerances.atol = s.positive("atol", c.solver.tolerances.atol);
        c.solver.tolerances.fixed_step = s.boolean("fixed_step", false);
        c.solver.tolerances.fixed_dt = s.positive("fixed_dt", c.solver.tolerances.fixed_dt);
        c.solver.tolerances.max_step = s.positive("max_step", c.solver.tolerances.max_step);
        c.solver.t_max = s.positive("t_max", c.solver.t_max);
        c.solver.sample_dt = s.positive("sample_dt", c.solver.sample_dt);
        c.solver.snapshot_times = s.numbers("snapshot_times");
        require_increasing(c.solver.snapshot_times, "solver.snapshot_times");
        c.solver.trajectories = s.integer("trajectories", c.solver.trajectories);
        if (c.solver.trajectories < 1) throw ConfigError("solver.trajectories", "must be at least 1");
        c.solver.bisection_tol = s.positive("bisection_tol", c.solver.bisection_tol);
        c.solver.record_jumps = s.boolean("record_jumps", false);
        c.solver.stop_after_crossing = s.boolean("stop_after_crossing", false);
        s.finish();
    }

    if (root.has("observables")) {
        Section s(root.raw("observables"), "observables");
        c.observables.threshold = s.positive("threshold", c.observables.threshold);
        c.observables.correlation_times = s.numbers("correlation_times");
        require_increasing(c.observables.correlation_times, "observables.correlation_times");
        c.observables.overlaps = s.boolean("overlaps", false);
        c.observables.overlap_snapshots = s.numbers("overlap_snapshots");
        require_increasing(c.observables.overlap_snapshots, "observables.overlap_snapshots");
        c.observables.fidelity = s.boolean("fidelity", false);
        if (s.has("spectrum")) {
            Section sp(s.raw("spectrum"), "observables.spectrum");
            auto& o = c.observables.spectrum;
            o.t_primes = sp.numbers("t_primes");
            if (o.t_primes.empty()) throw ConfigError("observables.spectrum.t_primes", "needs at least one start time");
            require_increasing(o.t_primes, "observables.spectrum.t_primes");
            o.omega_min = sp.number("omega_min", o.omega_min);
            o.omega_max = sp.number("omega_max", o.omega_max);
            o.omega_step = sp.positive("omega_step", o.omega_step);
            if (!(o.omega_max > o.omega_min)) throw ConfigError("observables.spectrum.omega_max", "must exceed omega_min");
            o.tau_max = sp.positive("tau_max", o.tau_max);
            o.dtau = sp.positive("dtau", o.dtau);
            o.per_atom = sp.boolean("per_atom", false);
            o.tolerances.rtol = sp.positive("rtol", o.tolerances.rtol);
            o.tolerances.atol = sp.positive("atol", o.tolerances.atol);
            sp.finish();
        }
        s.finish();
    }

    if (root.has("scan")) {
        Section s(root.raw("scan"), "scan");
        const json& axes = s.raw("axes");
        if (!axes.is_array() || axes.empty()) throw ConfigError("scan.axes", "expected a non-empty array");
        if (axes.size() > 2) throw ConfigError("scan.axes", "at most two swept parameters");
        for (std::size_t i = 0; i < axes.size(); ++i) {
            const std::string p = "scan.axes[" + std::to_string(i) + "]";
            Section a(axes[i], p);
            ScanAxis axis;
            axis.key = a.string("key", "", {});
            if (!kSweepKeys.count(axis.key)) throw ConfigError(p + ".key", "cannot sweep '" + axis.key + "'");
            const bool listed = a.has("values");
            const bool ranged = a.has("start") || a.has("stop") || a.has("count");
            if (listed == ranged) throw ConfigError(p, "give either values or start/stop/count");
            if (listed) {
                axis.values = a.numbers("values");
            } else {
                const double lo = a.number("start", 0.0), hi = a.number("stop", 0.0);
                const int n = a.integer("count", 0);
                if (n < 1) throw ConfigError(p + ".count", "must be at least 1");
                for (int k = 0; k < n; ++k) axis.values.push_back(n == 1 ? lo : lo + (hi - lo) * k / (n - 1));
            }
            if (axis.values.empty()) throw ConfigError(p + ".values", "must not be empty");
            a.finish();
            c.scan.axes.push_back(std::move(axis));
        }
        s.finish();
    }
    root.finish();
    c.check();
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open config file");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(path, std::string("invalid JSON: ") + e.what());
    }
    return parse(j);
}

void RunConfig::check() const {
    std::set<std::string> keys;
    for (std::size_t i = 0; i < scan.axes.size(); ++i) {
        const std::string& k = scan.axes[i].key;
        const std::string p = "scan.axes[" + std::to_string(i) + "].key";
        if (!keys.insert(k).second) throw ConfigError(p, "'" + k + "' swept twice");
        if ((k == "detuning_12" || k == "detuning_32") && (keys.count("detuning") || model.detuning != 0.0))
            throw ConfigError(p, "'" + k + "' conflicts with the detuning pattern");
        if (k == "detuning" && (keys.count("detuning_12") || keys.count("detuning_32") || !model.detunings.empty()))
            throw ConfigError(p, "'detuning' conflicts with explicit detunings");
        if (k == "n_exc" && state.kind != "random" && state.kind != "coherent")
            throw ConfigError(p, "'n_exc' needs a random or coherent state");
        if (k == "n_atoms" && (geometry.dimensionality != 1 || !state.indices.empty() || !model.detunings.empty()))
            throw ConfigError(p, "'n_atoms' needs a chain without explicit per-atom lists");
        if ((k == "detuning_12" || k == "detuning_32") && geometry.n_atoms() < 3)
            throw ConfigError(p, "'" + k + "' needs at least three atoms");
    }
    const int n = geometry.n_atoms();
    for (int i : state.indices)
        if (i < 0 || i >= n) throw ConfigError("state.indices", "atom index " + std::to_string(i) + " out of range");
    if (!model.detunings.empty() && static_cast<int>(model.detunings.size()) != n)
        throw ConfigError("model.detunings", "needs one value per atom");
    if (solver.backend == "cumulant" && (model.rabi != 0.0 || state.kind == "coherent"))
        throw ConfigError("solver.backend", "cumulant backend needs an undriven incoherent run");
    const bool needs_master = observables.overlaps || observables.spectrum.enabled() || observables.fidelity;
    if (needs_master && solver.backend != "auto" && solver.backend != "master")
        throw ConfigError("solver.backend", "overlaps, spectra and fidelity need the master backend");
    if (observables.fidelity && model.rabi == 0.0)
        throw ConfigError("observables.fidelity", "the preparation fidelity needs a drive (model.rabi)");
    if (observables.fidelity && state.kind != "ground")
        throw ConfigError("observables.fidelity", "the preparation run starts from state.kind = 'ground'");
    if (state.realizations > 1 && (needs_master || !observables.correlation_times.empty()))
        throw ConfigError("state.realizations",
                          "correlations, overlaps, spectra and fidelity need a single realization");
    if (solver.stop_after_crossing &&
        (solver.backend == "mcwf" || needs_master || !observables.correlation_times.empty() ||
         !solver.snapshot_times.empty()))
        throw ConfigError("solver.stop_after_crossing",
                          "only for master or cumulant runs without snapshots, correlations or spectra");
    for (double t : observables.spectrum.t_primes)
        if (t > solver.t_max) throw ConfigError("observables.spectrum.t_primes", "start time beyond solver.t_max");
}

RunConfig RunConfig::at_point(std::size_t index) const {
    if (index >= scan.point_count()) throw ConfigError("scan", "point index out of range");
    RunConfig c = *this;
    const auto coord = scan.coordinates(index);
    for (std::size_t i = 0; i < scan.axes.size(); ++i) {
        const std::string& k = scan.axes[i].key;
        const double v = scan.axes[i].values[coord[i]];
        const std::string p = "scan.axes[" + std::to_string(i) + "]";
        if (k == "n_exc") {
            if (v < 0.0 || v > 1.0) throw ConfigError(p, "n_exc must lie in [0, 1]");
            c.state.n_exc = v;
        } else if (k == "n_atoms") {
            if (v < 1.0 || v != std::floor(v)) throw ConfigError(p, "n_atoms must be a positive integer");
            c.geometry.counts = {static_cast<int>(v)};
        } else if (k == "a") {
            if (!(v > 0.0)) throw ConfigError(p, "a must be positive");
            c.geometry.a = v;
        } else if (k == "rabi") {
            c.model.rabi = v;
        } else if (k == "detuning") {
            c.model.detuning = v;
        } else if (k == "detuning_12" || k == "detuning_32") {
            // Atom 2 (index 1) is the reference.
            if (c.model.detunings.empty()) c.model.detunings.assign(c.geometry.n_atoms(), 0.0);
            c.model.detunings[k == "detuning_12" ? 0 : 2] = v + c.model.detunings[1];
        }
    }
    c.scan.axes.clear();
    return c;
}

json RunConfig::to_json() const {
    json j;
    j["name"] = name;
    j["seed"] = seed;
    j["geometry"] = {{"dimensionality", geometry.dimensionality},
                     {"counts", geometry.counts},
                     {"a", geometry.a},
                     {"dipole", dipole_json(geometry.dipole)}};
    j["state"] = {{"kind", state.kind},
                  {"n_exc", state.n_exc},
                  {"k", {state.k[0], state.k[1], state.k[2]}},
                  {"seed", state.seed},
                  {"realizations", state.realizations}};
    if (!state.indices.empty()) j["state"]["indices"] = state.indices;
    j["model"] = {{"rabi", model.rabi}, {"coherent_interactions", model.coherent_interactions}};
    if (!model.detunings.empty()) {
        j["model"]["detunings"] = model.detunings;
    } else {
        j["model"]["detuning"] = model.detuning;
        if (model.detuned_atoms == "indices")
            j["model"]["detuned_atoms"] = model.detuned_indices;
        else
            j["model"]["detuned_atoms"] = model.detuned_atoms;
    }
    j["solver"] = {{"backend", solver.backend},
                   {"rtol", solver.tolerances.rtol},
                   {"atol", solver.tolerances.atol},
                   {"fixed_step", solver.tolerances.fixed_step},
                   {"fixed_dt", solver.tolerances.fixed_dt},
                   {"t_max", solver.t_max},
                   {"sample_dt", solver.sample_dt},
                   {"snapshot_times", solver.snapshot_times},
                   {"trajectories", solver.trajectories},
                   {"bisection_tol", solver.bisection_tol},
                   {"record_jumps", solver.record_jumps},
                   {"stop_after_crossing", solver.stop_after_crossing}};
    if (std::isfinite(solver.tolerances.max_step)) j["solver"]["max_step"] = solver.tolerances.max_step;
    j["observables"] = {{"threshold", observables.threshold},
                        {"correlation_times", observables.correlation_times},
                        {"overlaps", observables.overlaps},
                        {"overlap_snapshots", observables.overlap_snapshots},
                        {"fidelity", observables.fidelity}};
    if (observables.spectrum.enabled()) {
        const auto& s = observables.spectrum;
        j["observables"]["spectrum"] = {{"t_primes", s.t_primes},   {"omega_min", s.omega_min},
                                        {"omega_max", s.omega_max}, {"omega_step", s.omega_step},
                                        {"tau_max", s.tau_max},     {"dtau", s.dtau},
                                        {"per_atom", s.per_atom},   {"rtol", s.tolerances.rtol},
                                        {"atol", s.tolerances.atol}};
    }
    if (!scan.empty()) {
        json axes = json::array();
        for (const auto& a : scan.axes) axes.push_back({{"key", a.key}, {"values", a.values}});
        j["scan"] = {{"axes", axes}};
    }
    return j;
}

} // namespace subrad::harness
