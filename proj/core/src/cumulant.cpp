#include "subrad/cumulant.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "subrad/errors.hpp"

namespace subrad {

namespace {

void check_distinct(const OpLabel* ops, std::size_t n) {
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (ops[a].atom == ops[b].atom)
                throw ConsistencyError("operator product acts twice on atom " + std::to_string(ops[a].atom) +
                                       "; reduce it with two-level algebra first");
}

cplx moment_of(const OpLabel* ops, std::size_t n, const CumulantState& s) {
    int ne = 0, nr = 0, nl = 0;
    int e[3] = {0, 0, 0}, r = -1, l = -1;
    for (std::size_t k = 0; k < n; ++k) {
        switch (ops[k].op) {
        case SpinOp::Excited: e[ne++] = ops[k].atom; break;
        case SpinOp::Raise: r = ops[k].atom; ++nr; break;
        case SpinOp::Lower: l = ops[k].atom; ++nl; break;
        }
    }
    // The incoherent sector keeps only moments with as many raising as
    // lowering operators, at most one pair.
    if (nr != nl || nr > 1) return 0.0;
    if (n == 1) return ne == 1 ? cplx(s.pop(e[0])) : cplx(0.0);
    if (n == 2) return nr == 1 ? s.coh(r, l) : cplx(s.pp(e[0], e[1]));
    if (n == 3) return nr == 1 ? s.pcoh(e[0], r, l) : cplx(s.ppp(e[0], e[1], e[2]));
    throw ConsistencyError("stored moments go up to third order");
}

// Set partitions of {0..3} into at least two blocks, as restricted growth strings.
struct Partition {
    int blocks;
    std::array<int, 4> label;
};

std::vector<Partition> partitions_of_four() {
    std::vector<Partition> out;
    std::array<int, 4> a{0, 0, 0, 0};
    std::function<void(int, int)> rec = [&](int pos, int maxl) {
        if (pos == 4) {
            if (maxl + 1 >= 2) out.push_back({maxl + 1, a});
            return;
        }
        for (int v = 0; v <= maxl + 1; ++v) {
            a[pos] = v;
            rec(pos + 1, std::max(maxl, v));
        }
    };
    a[0] = 0;
    rec(1, 0);
    return out;
}

// Closure in terms of the stored families: the only products the equations need.
class ClosureMoments final : public FourthMomentProvider {
public:
    explicit ClosureMoments(const CumulantState& s) : s_(s) {}
    cplx ssss(int a, int b, int c, int d) const override {
        return s_.coh(a, b) * s_.coh(c, d) + s_.coh(a, d) * s_.coh(c, b);
    }
    cplx ppss(int a, int b, int c, int d) const override {
        return s_.pop(a) * s_.pcoh(b, c, d) + s_.pop(b) * s_.pcoh(a, c, d) +
               (s_.pp(a, b) - 2.0 * s_.pop(a) * s_.pop(b)) * s_.coh(c, d);
    }

private:
    const CumulantState& s_;
};

void check_model(const SystemModel& model, const CumulantState& state) {
    model.validate();
    if (model.driven()) throw UnsupportedState("the cumulant backend handles undriven dynamics only");
    if (state.n_atoms() != model.size()) throw DimensionMismatch("state and model sizes differ");
    for (int i = 0; i < model.size(); ++i)
        if (std::abs(model.Gamma(i, i) - 1.0) > 1e-12)
            throw DomainError("cumulant equations assume unit single-atom decay");
}

template <class Fourth>
void rhs_impl(const SystemModel& model, const CumulantState& s, const Fourth& f4, CumulantState& d) {
    const int n = model.size();
    const cplx I = kI;
    std::vector<cplx> Gv(static_cast<std::size_t>(n) * n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) Gv[a * n + b] = a == b ? cplx(0.0) : model.G(a, b);
    auto G = [&](int a, int b) { return Gv[a * n + b]; };
    auto Gc = [&](int a, int b) { return std::conj(Gv[a * n + b]); };
    auto J = [&](int a, int b) { return model.J(a, b); };
    auto Gam = [&](int a, int b) { return model.Gamma(a, b); };
    auto Dl = [&](int a) { return model.detuning(a); };

    d.data().setZero();

    // Populations.
    for (int i = 0; i < n; ++i) {
        double v = -s.pop(i);
        for (int m = 0; m < n; ++m)
            if (m != i) v += 2.0 * std::imag(G(i, m) * s.coh(i, m));
        d.pop_ref(i) = v;
    }

    // Coherences and population pairs, i < j, mirrored.
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            cplx c = (I * (Dl(i) - Dl(j)) - 1.0) * s.coh(i, j) + I * J(i, j) * (s.pop(j) - s.pop(i)) +
                     Gam(i, j) * (2.0 * s.pp(i, j) - 0.5 * (s.pop(i) + s.pop(j)));
            double q = -2.0 * s.pp(i, j);
            for (int l = 0; l < n; ++l) {
                if (l == i || l == j) continue;
                c += I * Gc(i, l) * (s.coh(l, j) - 2.0 * s.pcoh(i, l, j)) +
                     I * G(j, l) * (2.0 * s.pcoh(j, i, l) - s.coh(i, l));
                q += 2.0 * std::imag(G(i, l) * s.pcoh(j, i, l)) + 2.0 * std::imag(G(j, l) * s.pcoh(i, j, l));
            }
            d.coh_ref(i, j) = c;
            d.coh_ref(j, i) = std::conj(c);
            d.pp_ref(i, j) = q;
            d.pp_ref(j, i) = q;
        }
    }

    // <p_i s_j^+ s_k^-> for j < k, mirrored to (i, k, j) by conjugation.
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            for (int k = j + 1; k < n; ++k) {
                if (k == i) continue;
                cplx t = (I * (Dl(j) - Dl(k)) - 2.0) * s.pcoh(i, j, k) - I * G(i, j) * s.pcoh(j, i, k) +
                         I * Gc(i, k) * s.pcoh(k, j, i) + I * Gc(j, k) * s.pp(i, k) - I * G(j, k) * s.pp(i, j) +
                         2.0 * Gam(j, k) * s.ppp(i, j, k);
                for (int l = 0; l < n; ++l) {
                    if (l == i || l == j || l == k) continue;
                    const cplx x1 = f4.ssss(l, i, j, k);
                    const cplx x2 = f4.ssss(i, l, j, k);
                    const cplx y1 = f4.ppss(i, j, l, k);
                    const cplx y2 = f4.ppss(i, k, j, l);
                    t += I * Gc(i, l) * x1 - I * G(i, l) * x2 - I * Gc(j, l) * (2.0 * y1 - s.pcoh(i, l, k)) +
                         I * G(k, l) * (2.0 * y2 - s.pcoh(i, j, l));
                }
                d.pcoh_ref(i, j, k) = t;
                d.pcoh_ref(i, k, j) = std::conj(t);
            }
        }
    }

    // Population triples, i < j < k, copied to all orderings.
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            for (int k = j + 1; k < n; ++k) {
                double r = -3.0 * s.ppp(i, j, k);
                for (int l = 0; l < n; ++l) {
                    if (l == i || l == j || l == k) continue;
                    r += 2.0 * std::imag(G(i, l) * f4.ppss(j, k, i, l) + G(j, l) * f4.ppss(i, k, j, l) +
                                         G(k, l) * f4.ppss(i, j, k, l));
                }
                const int idx[6][3] = {{i, j, k}, {i, k, j}, {j, i, k}, {j, k, i}, {k, i, j}, {k, j, i}};
                for (const auto& p : idx) d.ppp_ref(p[0], p[1], p[2]) = r;
            }
        }
    }
}

} // namespace

cplx stored_moment(const std::vector<OpLabel>& ops, const CumulantState& state) {
    if (ops.empty() || ops.size() > 3) throw ConsistencyError("stored moments have order one to three");
    check_distinct(ops.data(), ops.size());
    for (const auto& o : ops)
        if (o.atom < 0 || o.atom >= state.n_atoms()) throw DomainError("atom index out of range");
    return moment_of(ops.data(), ops.size(), state);
}

cplx cumulant_closure(const std::array<OpLabel, 4>& ops, const CumulantState& state) {
    check_distinct(ops.data(), 4);
    for (const auto& o : ops)
        if (o.atom < 0 || o.atom >= state.n_atoms()) throw DomainError("atom index out of range");
    static const std::vector<Partition> parts = partitions_of_four();
    cplx total = 0.0;
    for (const Partition& p : parts) {
        // Coefficient (-1)^b (b-1)! for b blocks: +1, -2, +6.
        const double coef = p.blocks == 2 ? 1.0 : p.blocks == 3 ? -2.0 : 6.0;
        cplx prod = coef;
        for (int b = 0; b < p.blocks && prod != 0.0; ++b) {
            OpLabel sub[3];
            std::size_t m = 0;
            for (int k = 0; k < 4; ++k)
                if (p.label[k] == b) sub[m++] = ops[k];
            prod *= moment_of(sub, m, state);
        }
        total += prod;
    }
    return total;
}

CumulantState cumulant_rhs(const SystemModel& model, const CumulantState& state) {
    check_model(model, state);
    CumulantState d(model.size());
    rhs_impl(model, state, ClosureMoments(state), d);
    return d;
}

CumulantState cumulant_rhs(const SystemModel& model, const CumulantState& state,
                           const FourthMomentProvider& fourth) {
    check_model(model, state);
    CumulantState d(model.size());
    rhs_impl(model, state, fourth, d);
    return d;
}

double cumulant_emission_rate(const SystemModel& model, const CumulantState& state) {
    const int n = model.size();
    double g = 0.0;
    for (int i = 0; i < n; ++i) {
        g += model.Gamma(i, i) * state.pop(i);
        for (int j = 0; j < n; ++j)
            if (j != i) g += model.Gamma(i, j) * state.coh(i, j).real();
    }
    return g;
}

CumulantEvolution evolve_cumulant(const SystemModel& model, const CumulantState& state0,
                                  const std::vector<double>& time_grid, const Tolerances& tol,
                                  const EvolveOptions& options) {
    check_model(model, state0);
    if (time_grid.empty() || time_grid.front() != 0.0) throw DomainError("time grid must start at 0");
    for (std::size_t k = 1; k < time_grid.size(); ++k)
        if (!(time_grid[k] > time_grid[k - 1])) throw DomainError("time grid must be strictly increasing");
    const int n = model.size();
    const double t_max = time_grid.back();
    constexpr double kEps = 1e-3;

    CumulantEvolution out;
    out.series.metadata = {{"backend", "cumulant"}, {"tolerances", tol.to_json()},
                           {"sample_dt", options.sample_dt}};

    CumulantState work(n), deriv(n);
    const ClosureMoments closure(work);
    const OdeRhs rhs = [&](double, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) {
        work.data() = y;
        rhs_impl(model, work, closure, deriv);
        dy = deriv.data();
    };

    // Linear functionals on the flat moment vector.
    Eigen::VectorXd pop_w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(CumulantState::storage_size(n)));
    Eigen::VectorXd gam_w = pop_w;
    for (int i = 0; i < n; ++i) {
        pop_w[i] = 1.0;
        gam_w[i] = model.Gamma(i, i);
        for (int j = 0; j < n; ++j)
            if (j != i) gam_w[static_cast<Eigen::Index>(work.coh_at(i, j))] = model.Gamma(i, j);
    }

    bool warned = false;
    CumulantState probe(n);
    auto monitor = [&](double t, const Eigen::VectorXcd& y) {
        probe.data() = y;
        for (int i = 0; i < n; ++i) {
            const double p = probe.pop(i);
            const double excursion = std::max(-p, p - 1.0);
            out.max_population_excursion = std::max(out.max_population_excursion, excursion);
            if (excursion > kEps && !warned) {
                std::ostringstream msg;
                msg << "population of atom " << i << " left [0, 1] (" << p << ") at t = " << t;
                out.warnings.push_back(msg.str());
                warned = true;
            }
            for (int j = 0; j < n; ++j)
                if (j != i)
                    out.max_cauchy_schwarz_excess = std::max(
                        out.max_cauchy_schwarz_excess, std::norm(probe.coh(i, j)) - probe.pop(i) * probe.pop(j));
        }
    };

    SampleRequest samples;
    samples.times = uniform_grid(t_max, options.sample_dt);
    samples.n_values = 2 + n;
    const Eigen::VectorXcd pop_wc = pop_w.cast<cplx>(), gam_wc = gam_w.cast<cplx>();
    samples.functional = [&](const Eigen::VectorXcd& y, cplx* v) {
        v[0] = pop_wc.dot(y);
        v[1] = gam_wc.dot(y);
        for (int i = 0; i < n; ++i) v[2 + i] = y[i];
    };
    samples.on_sample = [&](std::size_t, double t, const cplx* v) {
        for (int i = 0; i < n; ++i) {
            const double p = v[2 + i].real();
            const double excursion = std::max(-p, p - 1.0);
            out.max_population_excursion = std::max(out.max_population_excursion, excursion);
            if (excursion > kEps && !warned) {
                std::ostringstream msg;
                msg << "population of atom " << i << " left [0, 1] (" << p << ") at t = " << t;
                out.warnings.push_back(msg.str());
                warned = true;
            }
        }
        out.series.push(t, v[0].real(), v[1].real());
        return !options.keep_going || options.keep_going(t, v[0].real(), v[1].real());
    };

    std::vector<double> snap_times = time_grid;
    for (double t : options.correlation_times) {
        if (t < 0.0 || t > t_max) throw DomainError("correlation time outside the integration window");
        snap_times.push_back(t);
    }
    std::sort(snap_times.begin(), snap_times.end());
    snap_times.erase(std::unique(snap_times.begin(), snap_times.end()), snap_times.end());
    SnapshotRequest snaps;
    snaps.times = snap_times;
    snaps.on_snapshot = [&](std::size_t, double t, const Eigen::VectorXcd& y) {
        monitor(t, y);
        if (std::binary_search(time_grid.begin(), time_grid.end(), t)) {
            CumulantState s(n);
            s.data() = y;
            out.snapshot_times.push_back(t);
            out.snapshots.push_back(std::move(s));
        }
        if (std::find(options.correlation_times.begin(), options.correlation_times.end(), t) !=
            options.correlation_times.end()) {
            probe.data() = y;
            out.series.correlations.push_back({t, correlation_matrix(QuantumState(probe))});
        }
    };

    Eigen::VectorXcd y = state0.data();
    DormandPrince45 solver(tol.ode());
    const double reached = integrate_sampled(solver, rhs, y, 0.0, t_max, samples, &snaps);
    monitor(reached, y);
    out.stats = solver.stats();
    out.series.metadata["t_reached"] = reached;
    out.series.metadata["steps"] = out.stats.accepted;
    out.series.metadata["max_population_excursion"] = out.max_population_excursion;
    out.series.metadata["max_cauchy_schwarz_excess"] = out.max_cauchy_schwarz_excess;
    out.series.metadata["warnings"] = out.warnings;
    return out;
}

} // namespace subrad
