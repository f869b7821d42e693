#include "subrad/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "subrad/errors.hpp"

namespace subrad {

namespace {

void check_undriven(const SystemModel& model) {
    model.validate();
    if (model.driven()) throw ConsistencyError("spectral analysis needs an undriven model");
    if (model.size() > kDenseAtomCap)
        throw CapacityError("spectral analysis supports at most " + std::to_string(kDenseAtomCap) + " atoms");
}

Eigen::MatrixXcd dense(const GroupOperator& g) {
    const int d = g.size();
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(d, d);
    for (int r = 0; r < d; ++r) {
        m(r, r) = g.diag[r];
        for (int e = g.row_ptr[r]; e < g.row_ptr[r + 1]; ++e) m(r, g.col[e]) += g.val[e];
    }
    return m;
}

std::vector<int> order_by(const Eigen::VectorXd& primary, const Eigen::VectorXd& secondary) {
    std::vector<int> idx(primary.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (std::abs(primary[a] - primary[b]) > 1e-12) return primary[a] < primary[b];
        return secondary[a] < secondary[b];
    });
    return idx;
}

// Flat-vector indices of the entries X(s - n, s) that make up tr(s_n^+ X)
// for X stored in a layout with blocks (p - 1, p).
std::vector<std::vector<std::size_t>> lowering_trace_indices(const BlockLayout& layout) {
    const BasisPartition& part = layout.partition();
    const int n = part.n_atoms();
    std::vector<std::vector<std::size_t>> idx(n);
    for (std::uint32_t s = 0; s < part.dimension(); ++s) {
        for (int a = 0; a < n; ++a) {
            if (!excited(s, a)) continue;
            const std::uint32_t t = s ^ (1u << a);
            const int b = layout.find(part.group_of(t), part.group_of(s));
            if (b < 0) {
                if (layout.truncated()) continue;
                throw ConsistencyError("layout misses a lowering block");
            }
            const Block& blk = layout.blocks()[b];
            idx[a].push_back(blk.offset + static_cast<std::size_t>(part.local_index(s)) * blk.rows +
                             part.local_index(t));
        }
    }
    return idx;
}

// Packs s_a^- rho (only manifold-diagonal blocks of rho matter) into a
// layout with blocks (p - 1, p).
void pack_lowered(const BlockLayout& layout, const Eigen::MatrixXcd& rho, int a, Eigen::VectorXcd& flat,
                  std::size_t base) {
    const BasisPartition& part = layout.partition();
    for (int b = 0; b < static_cast<int>(layout.blocks().size()); ++b) {
        auto X = layout.view(flat, b, base);
        X.setZero();
        const Block& blk = layout.blocks()[b];
        const auto& rows = part.group(blk.row_group);
        const auto& cols = part.group(blk.col_group);
        for (int i = 0; i < blk.rows; ++i) {
            if (excited(rows[i], a)) continue;
            const std::uint32_t up = rows[i] | (1u << a);
            for (int j = 0; j < blk.cols; ++j) X(i, j) = rho(up, cols[j]);
        }
    }
}

// Highest excitation manifold whose population exceeds cutoff * tr(rho).
int highest_populated(const BasisPartition& part, const Eigen::MatrixXcd& rho, double cutoff) {
    const double tr = rho.trace().real();
    int top = 0;
    for (int g = 0; g < part.group_count(); ++g) {
        double w = 0.0;
        for (std::uint32_t s : part.group(g)) w += rho(s, s).real();
        if (w > cutoff * tr) top = g;
    }
    return top;
}

double residual_of(const std::vector<std::vector<cplx>>& corr) {
    double c0 = 0.0, c1 = 0.0;
    for (const auto& c : corr) {
        if (c.empty()) continue;
        c0 = std::max(c0, std::abs(c.front()));
        c1 = std::max(c1, std::abs(c.back()));
    }
    return c0 > 0.0 ? c1 / c0 : 0.0;
}

SpectrumResult assemble(const std::vector<std::vector<cplx>>& corr, double dtau, const std::vector<double>& omega,
                        bool per_atom, double t_prime, double tau_max) {
    SpectrumResult r;
    r.t_prime = t_prime;
    r.tau_max = tau_max;
    r.omega = omega;
    std::vector<cplx> sum(corr.empty() ? 0 : corr[0].size(), 0.0);
    for (const auto& c : corr)
        for (std::size_t k = 0; k < c.size(); ++k) sum[k] += c[k];
    r.total = correlation_to_spectrum(sum, dtau, omega);
    if (per_atom)
        for (const auto& c : corr) r.per_atom.push_back(correlation_to_spectrum(c, dtau, omega));
    r.residual = residual_of(corr);
    if (r.residual > 1e-4) {
        std::ostringstream msg;
        msg << "correlation not decayed at tau_max = " << tau_max << " (relative magnitude " << r.residual << ")";
        r.warnings.push_back(msg.str());
    }
    const double smin = r.total.empty() ? 0.0 : *std::min_element(r.total.begin(), r.total.end());
    const double smax = r.total.empty() ? 0.0 : *std::max_element(r.total.begin(), r.total.end());
    if (smin < -1e-6 * std::max(1.0, smax)) {
        std::ostringstream msg;
        msg << "spectrum has negative values down to " << smin << " from the finite cutoff";
        r.warnings.push_back(msg.str());
    }
    return r;
}

std::vector<double> tau_grid(const SpectrumOptions& o, double& tau_max) {
    if (!(o.dtau > 0.0) || !(o.tau_max > 0.0)) throw DomainError("tau grid needs positive tau_max and dtau");
    const long k = std::max(1L, std::lround(o.tau_max / o.dtau));
    tau_max = k * o.dtau;
    std::vector<double> t(k + 1);
    for (long i = 0; i <= k; ++i) t[i] = i * o.dtau;
    return t;
}

} // namespace

ManifoldSpectrum manifold_eigenstates(const SystemModel& model) {
    check_undriven(model);
    const int n = model.size();
    auto part = BasisPartition::by_excitation(n);
    SystemModel hermitian = model;
    hermitian.couplings.Gamma.setZero();  // H without the anti-Hermitian part
    const auto h_blocks = effective_hamiltonian_blocks(hermitian, part);
    const auto heff_blocks = effective_hamiltonian_blocks(model, part);
    const auto em_blocks = emission_operator(model.couplings, part);

    ManifoldSpectrum spec;
    spec.n_atoms = n;
    for (int p = 0; p <= n; ++p) {
        ManifoldBlock mb;
        mb.n_exc = p;
        mb.basis = part->group(p);
        const Eigen::MatrixXcd h = dense(h_blocks.groups[p]);
        const Eigen::MatrixXcd em = dense(em_blocks.groups[p]);

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (h + h.adjoint()));
        const Eigen::MatrixXcd& v = es.eigenvectors();
        Eigen::VectorXd rates(v.cols());
        for (Eigen::Index k = 0; k < v.cols(); ++k) rates[k] = v.col(k).dot(em * v.col(k)).real();
        const auto ord = order_by(rates, es.eigenvalues());
        mb.states.resize(v.rows(), v.cols());
        mb.energies.resize(v.cols());
        mb.decay_rates.resize(v.cols());
        for (std::size_t k = 0; k < ord.size(); ++k) {
            mb.states.col(k) = v.col(ord[k]);
            mb.energies[k] = es.eigenvalues()[ord[k]];
            mb.decay_rates[k] = rates[ord[k]];
        }

        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> ces(dense(heff_blocks.groups[p]));
        const Eigen::VectorXcd& lam = ces.eigenvalues();
        Eigen::VectorXd nh_rates = -2.0 * lam.imag();
        Eigen::VectorXd nh_energy = lam.real();
        auto nh_ord = order_by(nh_rates, nh_energy);
        mb.nh_eigenvalues.resize(lam.size());
        mb.nh_decay_rates.resize(lam.size());
        mb.nh_modes.resize(lam.size(), lam.size());
        for (std::size_t k = 0; k < nh_ord.size(); ++k) {
            Eigen::VectorXcd m = ces.eigenvectors().col(nh_ord[k]);
            m /= m.norm();
            // Fix the phase: largest component real and positive.
            Eigen::Index big = 0;
            m.cwiseAbs().maxCoeff(&big);
            m *= std::conj(m[big]) / std::abs(m[big]);
            mb.nh_modes.col(k) = m;
            mb.nh_eigenvalues[k] = lam[nh_ord[k]];
            mb.nh_decay_rates[k] = nh_rates[nh_ord[k]];
        }
        spec.manifolds.push_back(std::move(mb));
    }
    return spec;
}

ManifoldOverlaps manifold_overlaps(const DensityState& rho, const ManifoldSpectrum& spectrum) {
    const auto dim = static_cast<Eigen::Index>(std::size_t{1} << spectrum.n_atoms);
    if (rho.n_atoms != spectrum.n_atoms || rho.matrix.rows() != dim || rho.matrix.cols() != dim)
        throw DimensionMismatch("density matrix and spectrum use different bases");
    ManifoldOverlaps out;
    for (const auto& mb : spectrum.manifolds) {
        const auto d = static_cast<Eigen::Index>(mb.basis.size());
        Eigen::MatrixXcd sub(d, d);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j) sub(i, j) = rho.matrix(mb.basis[i], mb.basis[j]);
        const Eigen::VectorXd diag = (mb.states.adjoint() * sub * mb.states).diagonal().real();
        out.per_state.emplace_back(diag.data(), diag.data() + diag.size());
        out.manifold.push_back(diag.sum());
    }
    return out;
}

OverlapSeries overlap_series(const SystemModel& model, const DensityState& rho0, double t_max,
                             double sample_dt, const std::vector<double>& snapshot_times, const Tolerances& tol,
                             const ManifoldSpectrum* spectrum) {
    check_undriven(model);
    const int n = model.size();
    if (rho0.n_atoms != n) throw DimensionMismatch("state and model sizes differ");
    auto part = BasisPartition::by_excitation(n);
    const BlockLayout layout = BlockLayout::diagonal(part);
    LiouvillianEngine engine(model, layout, Picture::Schrodinger, true);

    ManifoldSpectrum own;
    if (!snapshot_times.empty() && !spectrum) {
        own = manifold_eigenstates(model);
        spectrum = &own;
    }

    OverlapSeries out;
    out.times = uniform_grid(t_max, sample_dt);
    out.manifold = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out.times.size()), n + 1);

    SampleRequest samples;
    samples.times = out.times;
    samples.n_values = n + 1;
    samples.functional = [&](const Eigen::VectorXcd& y, cplx* v) {
        for (int b = 0; b <= n; ++b) v[b] = layout.view(y, b).trace();
    };
    samples.on_sample = [&](std::size_t k, double, const cplx* v) {
        for (int b = 0; b <= n; ++b) out.manifold(static_cast<Eigen::Index>(k), b) = v[b].real();
        return true;
    };
    SnapshotRequest snaps;
    snaps.times = snapshot_times;
    std::sort(snaps.times.begin(), snaps.times.end());
    snaps.on_snapshot = [&](std::size_t, double t, const Eigen::VectorXcd& y) {
        out.snapshot_times.push_back(t);
        ManifoldOverlaps o;
        for (int b = 0; b <= n; ++b) {
            const auto& mb = spectrum->manifolds[b];
            const Eigen::VectorXd d = (mb.states.adjoint() * layout.view(y, b) * mb.states).diagonal().real();
            o.per_state.emplace_back(d.data(), d.data() + d.size());
            o.manifold.push_back(d.sum());
        }
        out.snapshots.push_back(std::move(o));
    };

    Eigen::VectorXcd y = layout.pack(rho0.matrix);
    DormandPrince45 solver(tol.ode());
    const OdeRhs rhs = [&](double, const Eigen::VectorXcd& x, Eigen::VectorXcd& dx) { engine.apply(x, dx); };
    integrate_sampled(solver, rhs, y, 0.0, t_max, samples, &snaps);
    return out;
}

DecayFit late_time_decay_fit(const std::vector<double>& times, const std::vector<double>& values, double t_lo,
                             double t_hi) {
    if (times.size() != values.size()) throw DimensionMismatch("times and values differ in length");
    std::vector<double> x, y;
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] < t_lo || times[k] > t_hi) continue;
        if (!(values[k] > 0.0)) throw NumericalError("non-positive value inside the fit window");
        x.push_back(times[k]);
        y.push_back(std::log(values[k]));
    }
    if (x.size() < 2) throw NumericalError("fit window holds fewer than two samples");
    const double m = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / m;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / m;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
    }
    if (!(sxx > 0.0)) throw NumericalError("fit window has zero width");
    DecayFit f;
    const double slope = sxy / sxx;
    f.rate = -slope;
    f.intercept = my - slope * mx;
    double ss = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double r = y[k] - (f.intercept + slope * x[k]);
        ss += r * r;
    }
    f.residual = std::sqrt(ss / m);
    f.points = static_cast<int>(x.size());
    return f;
}

std::vector<double> correlation_to_spectrum(const std::vector<cplx>& corr, double dtau,
                                            const std::vector<double>& omega) {
    std::vector<double> s(omega.size(), 0.0);
    const std::size_t k_max = corr.size();
    if (k_max < 2) return s;
    for (std::size_t w = 0; w < omega.size(); ++w) {
        const cplx step = std::polar(1.0, -omega[w] * dtau);
        cplx phase = 1.0, acc = 0.0;
        for (std::size_t k = 0; k < k_max; ++k) {
            if (k % 256 == 0) phase = std::polar(1.0, -omega[w] * dtau * static_cast<double>(k));
            const double wk = (k == 0 || k + 1 == k_max) ? 0.5 * dtau : dtau;
            acc += wk * phase * corr[k];
            phase *= step;
        }
        s[w] = 2.0 * acc.real();
    }
    return s;
}

std::vector<std::size_t> spectral_lines(const std::vector<double>& values, double min_fraction) {
    std::vector<std::size_t> peaks;
    if (values.size() < 3) return peaks;
    const double top = *std::max_element(values.begin(), values.end());
    for (std::size_t k = 1; k + 1 < values.size(); ++k)
        if (values[k] > values[k - 1] && values[k] >= values[k + 1] && values[k] >= min_fraction * top)
            peaks.push_back(k);
    std::sort(peaks.begin(), peaks.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    return peaks;
}

SpectrumResult dynamic_spectrum(const SystemModel& model, const DensityState& rho_t_prime,
                                const std::vector<double>& omega, const SpectrumOptions& options, double t_prime) {
    check_undriven(model);
    const int n = model.size();
    const auto dim = static_cast<Eigen::Index>(std::size_t{1} << n);
    if (rho_t_prime.n_atoms != n || rho_t_prime.matrix.rows() != dim)
        throw DimensionMismatch("density matrix does not match the model size");
    double tau_max = 0.0;
    const std::vector<double> taus = tau_grid(options, tau_max);

    auto part = BasisPartition::by_excitation(n);
    const int top = highest_populated(*part, rho_t_prime.matrix, options.manifold_cutoff);
    if (top == 0) {  // nothing left to emit
        const std::vector<std::vector<cplx>> zero(n, std::vector<cplx>(taus.size(), 0.0));
        return assemble(zero, options.dtau, omega, options.per_atom, t_prime, tau_max);
    }
    const BlockLayout layout = BlockLayout::offset_truncated(part, -1, top);
    LiouvillianEngine engine(model, layout, Picture::Schrodinger, false);
    const auto trace_idx = lowering_trace_indices(layout);
    const std::size_t m = layout.size();

    Eigen::VectorXcd y(static_cast<Eigen::Index>(n * m));
    for (int a = 0; a < n; ++a) pack_lowered(layout, rho_t_prime.matrix, a, y, a * m);
    // The problem is linear: rescale so the absolute tolerance stays meaningful
    // for late, nearly empty states.
    const double scale = y.size() ? y.cwiseAbs().maxCoeff() : 0.0;
    if (scale > 0.0) y /= scale;

    std::vector<std::vector<cplx>> corr(n, std::vector<cplx>(taus.size()));
    SampleRequest samples;
    samples.times = taus;
    samples.n_values = n;
    samples.functional = [&](const Eigen::VectorXcd& x, cplx* v) {
        for (int a = 0; a < n; ++a) {
            cplx acc = 0.0;
            const cplx* base = x.data() + a * m;
            for (std::size_t i : trace_idx[a]) acc += base[i];
            v[a] = acc;
        }
    };
    samples.on_sample = [&](std::size_t k, double, const cplx* v) {
        for (int a = 0; a < n; ++a) corr[a][k] = scale * v[a];
        return true;
    };
    DormandPrince45 solver(options.tolerances.ode());
    const OdeRhs rhs = [&](double, const Eigen::VectorXcd& x, Eigen::VectorXcd& dx) { engine.apply(x, dx); };
    integrate_sampled(solver, rhs, y, 0.0, tau_max, samples);
    return assemble(corr, options.dtau, omega, options.per_atom, t_prime, tau_max);
}

std::vector<SpectrumResult> dynamic_spectra(const SystemModel& model, const DensityState& rho0,
                                            const std::vector<double>& t_primes, const std::vector<double>& omega,
                                            const SpectrumOptions& options) {
    check_undriven(model);
    const int n = model.size();
    if (rho0.n_atoms != n) throw DimensionMismatch("state and model sizes differ");
    if (t_primes.empty()) return {};
    std::vector<double> tp = t_primes;
    for (std::size_t k = 1; k < tp.size(); ++k)
        if (!(tp[k] > tp[k - 1])) throw DomainError("start times must be strictly increasing");
    if (tp.front() < 0.0) throw DomainError("start times must be non-negative");
    double tau_max = 0.0;
    const std::vector<double> taus = tau_grid(options, tau_max);

    auto part = BasisPartition::by_excitation(n);
    const std::size_t T = tp.size();

    // Forward run to every start time.
    std::vector<Eigen::MatrixXcd> rhos(T);
    {
        std::vector<double> grid{0.0};
        for (double t : tp)
            if (t > 0.0) grid.push_back(t);
        const BlockLayout diag = BlockLayout::diagonal(part);
        LiouvillianEngine fwd(model, diag, Picture::Schrodinger, true);
        Eigen::VectorXcd y = diag.pack(rho0.matrix);
        SnapshotRequest snaps;
        snaps.times = grid;
        snaps.on_snapshot = [&](std::size_t, double t, const Eigen::VectorXcd& x) {
            for (std::size_t k = 0; k < T; ++k)
                if (tp[k] == t) rhos[k] = diag.unpack(x);
        };
        SampleRequest none;
        none.functional = [](const Eigen::VectorXcd&, cplx*) {};
        DormandPrince45 solver(options.tolerances.ode());
        const OdeRhs rhs = [&](double, const Eigen::VectorXcd& x, Eigen::VectorXcd& dx) { fwd.apply(x, dx); };
        integrate_sampled(solver, rhs, y, 0.0, grid.back(), none, &snaps);
    }

    int top = 0;
    for (const auto& r : rhos) top = std::max(top, highest_populated(*part, r, options.manifold_cutoff));
    if (top == 0) {
        const std::vector<std::vector<cplx>> zero(n, std::vector<cplx>(taus.size(), 0.0));
        std::vector<SpectrumResult> out;
        for (double t : tp) out.push_back(assemble(zero, options.dtau, omega, options.per_atom, t, tau_max));
        return out;
    }
    const BlockLayout low = BlockLayout::offset_truncated(part, -1, top);
    const BlockLayout high = BlockLayout::offset_truncated(part, +1, top);
    const std::size_t m = low.size();
    std::vector<Eigen::VectorXcd> lowered(T, Eigen::VectorXcd(static_cast<Eigen::Index>(n * m)));
    for (std::size_t k = 0; k < T; ++k)
        for (int a = 0; a < n; ++a) pack_lowered(low, rhos[k], a, lowered[k], a * m);

    // Backward run: e^{L^dagger tau} s_a^+ for every atom.
    LiouvillianEngine bwd(model, high, Picture::Heisenberg, false);
    const std::size_t mh = high.size();
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(n * mh));
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < static_cast<int>(high.blocks().size()); ++b) {
            auto A = high.view(y, b, a * mh);
            const Block& blk = high.blocks()[b];
            const auto& cols = part.get()->group(blk.col_group);
            for (int j = 0; j < blk.cols; ++j) {
                if (excited(cols[j], a)) continue;
                A(part->local_index(cols[j] | (1u << a)), j) = 1.0;
            }
        }
    }
    // Block b of `high` is (q + 1, q); its partner in `low` is (q, q + 1).
    std::vector<int> partner(high.blocks().size());
    for (std::size_t b = 0; b < high.blocks().size(); ++b)
        partner[b] = low.find(high.blocks()[b].col_group, high.blocks()[b].row_group);

    std::vector<std::vector<std::vector<cplx>>> corr(T, std::vector<std::vector<cplx>>(n, std::vector<cplx>(taus.size())));
    SampleRequest samples;
    samples.times = taus;
    samples.n_values = static_cast<int>(T) * n;
    samples.functional = [&](const Eigen::VectorXcd& x, cplx* v) {
        for (int a = 0; a < n; ++a) {
            for (std::size_t k = 0; k < T; ++k) {
                cplx acc = 0.0;
                for (std::size_t b = 0; b < high.blocks().size(); ++b) {
                    const auto A = high.view(x, static_cast<int>(b), a * mh);
                    const auto X = low.view(lowered[k], partner[b], a * m);
                    acc += A.cwiseProduct(X.transpose()).sum();
                }
                v[k * n + a] = acc;
            }
        }
    };
    samples.on_sample = [&](std::size_t i, double, const cplx* v) {
        for (std::size_t k = 0; k < T; ++k)
            for (int a = 0; a < n; ++a) corr[k][a][i] = v[k * n + a];
        return true;
    };
    DormandPrince45 solver(options.tolerances.ode());
    const OdeRhs rhs = [&](double, const Eigen::VectorXcd& x, Eigen::VectorXcd& dx) { bwd.apply(x, dx); };
    integrate_sampled(solver, rhs, y, 0.0, tau_max, samples);

    std::vector<SpectrumResult> out;
    for (std::size_t k = 0; k < T; ++k)
        out.push_back(assemble(corr[k], options.dtau, omega, options.per_atom, tp[k], tau_max));
    return out;
}

} // namespace subrad
