#include "subrad/mcwf.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>
#include <mutex>
#include <thread>
#include <bit>

#include "subrad/errors.hpp"
#include "subrad/rng.hpp"

namespace subrad {

JumpChannels collective_jump_channels(const CouplingMatrices& couplings) {
    const Eigen::MatrixXd& G = couplings.Gamma;
    if (G.rows() != G.cols() || G.rows() == 0) throw DimensionMismatch("Gamma must be square and non-empty");
    if ((G - G.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw NumericalError("Gamma is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    const Eigen::VectorXd& lam = es.eigenvalues();
    if (lam.minCoeff() < -1e-10)
        throw NumericalError("Gamma is not positive semidefinite (min eigenvalue " +
                             std::to_string(lam.minCoeff()) + ")");
    std::vector<int> keep;
    for (int k = 0; k < lam.size(); ++k)
        if (lam[k] >= 1e-12) keep.push_back(k);
    JumpChannels ch;
    ch.rates.resize(static_cast<Eigen::Index>(keep.size()));
    ch.modes.resize(G.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) {
        ch.rates[static_cast<Eigen::Index>(i)] = lam[keep[i]];
        ch.modes.col(static_cast<Eigen::Index>(i)) = es.eigenvectors().col(keep[i]);
    }
    return ch;
}

namespace {

// Shared, read-only data for the trajectories of one model.
class TrajectoryKernel {
public:
    TrajectoryKernel(const SystemModel& model, const TrajectoryConfig& config)
        : model_(model), config_(config), channels_(collective_jump_channels(model.couplings)) {
        model_.validate();
        if (model_.size() > kDenseAtomCap)
            throw CapacityError("MCWF backend supports at most " + std::to_string(kDenseAtomCap) + " atoms");
        auto part = BasisPartition::whole(model_.size());
        ham_ = effective_hamiltonian_blocks(model_, part).groups[0];
        emission_ = emission_operator(model_.couplings, part).groups[0];
        dim_ = ham_.size();
    }

    int n_atoms() const { return model_.size(); }
    int dim() const { return dim_; }

    // -i H_eff psi
    void rhs(const Eigen::VectorXcd& psi, Eigen::VectorXcd& out) const {
        out.resize(dim_);
        for (int r = 0; r < dim_; ++r) {
            cplx acc = ham_.diag[r] * psi[r];
            for (int e = ham_.row_ptr[r]; e < ham_.row_ptr[r + 1]; ++e) acc += ham_.val[e] * psi[ham_.col[e]];
            out[r] = -kI * acc;
        }
    }

    // (p_exc, gamma_tot) for a normalized state.
    std::pair<double, double> observables(const Eigen::VectorXcd& psi) const {
        double p = 0.0;
        cplx g = 0.0;
        for (int r = 0; r < dim_; ++r) {
            p += std::popcount(static_cast<std::uint32_t>(r)) * std::norm(psi[r]);
            cplx acc = emission_.diag[r] * psi[r];
            for (int e = emission_.row_ptr[r]; e < emission_.row_ptr[r + 1]; ++e)
                acc += emission_.val[e] * psi[emission_.col[e]];
            g += std::conj(psi[r]) * acc;
        }
        return {p, g.real()};
    }

    // Runs one trajectory; on_sample(k, t, psi) receives normalized states.
    template <class OnSample>
    std::vector<JumpEvent> run(const Eigen::VectorXcd& psi0, const std::vector<double>& times,
                               std::uint64_t index, OnSample&& on_sample) const {
        rng::Stream stream(rng::derive_seed(config_.seed, index));
        std::vector<JumpEvent> jumps;
        const double t_end = times.empty() ? 0.0 : times.back();
        Eigen::VectorXcd y = psi0;
        double t = 0.0;
        std::size_t next = 0;
        double threshold = stream.uniform();
        double last_norm2 = y.squaredNorm();

        auto emit = [&](double ts, const Eigen::VectorXcd& state) {
            const double nrm = state.norm();
            on_sample(next, ts, config_.renormalize_samples && nrm > 0.0 ? Eigen::VectorXcd(state / nrm) : state);
            ++next;
        };
        while (next < times.size() && times[next] <= 0.0) emit(times[next], y);

        DormandPrince45 solver(config_.tolerances.ode());
        const OdeRhs f = [this](double, const Eigen::VectorXcd& x, Eigen::VectorXcd& dx) { rhs(x, dx); };
        Eigen::VectorXcd tmp, jump_state;

        while (t < t_end) {
            // Undriven dynamics leave the ground state alone.
            if (!model_.driven() && y.tail(dim_ - 1).squaredNorm() == 0.0) {
                while (next < times.size()) emit(times[next], y);
                break;
            }
            bool jumped = false;
            double t_jump = 0.0;
            auto observer = [&](const DenseStep& step) {
                tmp = step.coeff(0) + step.coeff(1);
                const double n1 = tmp.squaredNorm();
                if (n1 > last_norm2 + 1e-8)
                    throw IntegrationError("norm increased between jumps", step.t1());
                double t_stop = step.t1();
                if (n1 <= threshold) {
                    double lo = step.t0(), hi = step.t1();
                    while (hi - lo > config_.bisection_tol) {
                        const double mid = 0.5 * (lo + hi);
                        step.eval(mid, tmp);
                        if (tmp.squaredNorm() > threshold) lo = mid;
                        else hi = mid;
                        if (mid == lo && mid == hi) break;
                    }
                    t_stop = hi;
                    jumped = true;
                    t_jump = hi;
                    step.eval(hi, jump_state);
                }
                while (next < times.size() && times[next] <= t_stop) {
                    step.eval(times[next], tmp);
                    emit(times[next], tmp);
                }
                last_norm2 = std::min(last_norm2, n1);
                return !jumped;
            };
            const double reached = solver.integrate(f, y, t, t_end, observer);
            if (!jumped) {
                t = reached;
                break;
            }
            apply_jump(jump_state, stream, y, jumps, t_jump);
            t = t_jump;
            threshold = stream.uniform();
            last_norm2 = 1.0;
        }
        while (next < times.size()) emit(times[next], y);
        return jumps;
    }

private:
    void apply_jump(const Eigen::VectorXcd& psi, rng::Stream& stream, Eigen::VectorXcd& out,
                    std::vector<JumpEvent>& jumps, double t) const {
        const int n = n_atoms();
        const int K = channels_.count();
        // Lowered states s_a^- psi.
        std::vector<Eigen::VectorXcd> lowered(n, Eigen::VectorXcd::Zero(dim_));
        for (int s = 0; s < dim_; ++s)
            for (int a = 0; a < n; ++a)
                if (!excited(static_cast<std::uint32_t>(s), a)) lowered[a][s] = psi[s | (1 << a)];
        std::vector<Eigen::VectorXcd> cand(K);
        std::vector<double> w(K);
        double total = 0.0;
        for (int k = 0; k < K; ++k) {
            cand[k] = Eigen::VectorXcd::Zero(dim_);
            for (int a = 0; a < n; ++a)
                if (channels_.modes(a, k) != 0.0) cand[k] += channels_.modes(a, k) * lowered[a];
            w[k] = channels_.rates[k] * cand[k].squaredNorm();
            total += w[k];
        }
        if (!(total > 0.0)) throw IntegrationError("jump requested from a state that cannot decay", t);
        const double u = stream.uniform() * total;
        int k = 0;
        double acc = w[0];
        while (k + 1 < K && acc <= u) acc += w[++k];
        while (w[k] == 0.0 && k > 0) --k;
        out = cand[k] / cand[k].norm();
        jumps.push_back({t, k});
    }

    SystemModel model_;
    TrajectoryConfig config_;
    JumpChannels channels_;
    GroupOperator ham_;
    GroupOperator emission_;
    int dim_ = 0;
};

void check_initial(const SystemModel& model, const PureState& psi0) {
    if (psi0.n_atoms != model.size() ||
        psi0.amplitudes.size() != static_cast<Eigen::Index>(std::size_t{1} << model.size()))
        throw DimensionMismatch("initial state does not match the model size");
    if (norm_error(psi0) > 1e-10) throw DomainError("initial state is not normalized");
}

// Running sums for one chunk of trajectories.
struct Accumulator {
    std::size_t count = 0;
    std::vector<double> sp, sg, spp, sgg, spg;
    std::vector<Eigen::MatrixXcd> corr;

    Accumulator(std::size_t samples, std::size_t n_corr, int n)
        : sp(samples), sg(samples), spp(samples), sgg(samples), spg(samples),
          corr(n_corr, Eigen::MatrixXcd::Zero(n, n)) {}

    void add(std::size_t k, double p, double g) {
        sp[k] += p;
        sg[k] += g;
        spp[k] += p * p;
        sgg[k] += g * g;
        spg[k] += p * g;
    }

    void merge(const Accumulator& o) {
        count += o.count;
        for (std::size_t k = 0; k < sp.size(); ++k) {
            sp[k] += o.sp[k];
            sg[k] += o.sg[k];
            spp[k] += o.spp[k];
            sgg[k] += o.sgg[k];
            spg[k] += o.spg[k];
        }
        for (std::size_t c = 0; c < corr.size(); ++c) corr[c] += o.corr[c];
    }

    ObservableSeries finish(const std::vector<double>& times) const {
        if (count == 0) throw DomainError("empty trajectory ensemble");
        const double m = static_cast<double>(count);
        const double nan = std::numeric_limits<double>::quiet_NaN();
        ObservableSeries s;
        for (std::size_t k = 0; k < times.size(); ++k) {
            const double mp = sp[k] / m, mg = sg[k] / m;
            s.push(times[k], mp, mg);
            if (count < 2) {
                s.p_exc_err.push_back(nan);
                s.gamma_tot_err.push_back(nan);
                s.gamma_inst_err.push_back(nan);
                continue;
            }
            const double vp = std::max(0.0, (spp[k] - m * mp * mp) / (m - 1));
            const double vg = std::max(0.0, (sgg[k] - m * mg * mg) / (m - 1));
            const double cpg = (spg[k] - m * mp * mg) / (m - 1);
            s.p_exc_err.push_back(std::sqrt(vp / m));
            s.gamma_tot_err.push_back(std::sqrt(vg / m));
            if (mp > kPopulationFloor) {
                const double r = mg / mp;
                const double var = (vg + r * r * vp - 2.0 * r * cpg) / (mp * mp);
                s.gamma_inst_err.push_back(std::sqrt(std::max(0.0, var) / m));
            } else {
                s.gamma_inst_err.push_back(nan);
            }
        }
        return s;
    }
};

} // namespace

Trajectory evolve_trajectory(const SystemModel& model, const PureState& psi0,
                             const std::vector<double>& time_grid, const TrajectoryConfig& config,
                             std::uint64_t index) {
    check_initial(model, psi0);
    for (std::size_t k = 1; k < time_grid.size(); ++k)
        if (!(time_grid[k] > time_grid[k - 1])) throw DomainError("time grid must be strictly increasing");
    if (!time_grid.empty() && time_grid.front() < 0.0) throw DomainError("time grid must start at t >= 0");
    TrajectoryKernel kernel(model, config);
    Trajectory tr;
    tr.n_atoms = model.size();
    tr.times = time_grid;
    tr.states.resize(time_grid.size());
    tr.jumps = kernel.run(psi0.amplitudes, time_grid, index,
                          [&](std::size_t k, double, const Eigen::VectorXcd& s) { tr.states[k] = s; });
    return tr;
}

ObservableExtractor emission_extractor(const CouplingMatrices& couplings) {
    return [couplings](const PureState& s) {
        const QuantumState q = s;
        return std::make_pair(excited_population(q), emission_rate(q, couplings));
    };
}

ObservableSeries ensemble_average(const std::vector<Trajectory>& trajectories,
                                  const ObservableExtractor& extractor) {
    if (trajectories.empty()) throw DomainError("empty trajectory ensemble");
    const auto& times = trajectories.front().times;
    Accumulator acc(times.size(), 0, trajectories.front().n_atoms);
    for (const auto& tr : trajectories) {
        if (tr.times != times) throw DimensionMismatch("trajectories use different time grids");
        for (std::size_t k = 0; k < times.size(); ++k) {
            const double nrm = tr.states[k].norm();
            PureState s{tr.n_atoms, nrm > 0.0 ? Eigen::VectorXcd(tr.states[k] / nrm) : tr.states[k]};
            const auto [p, g] = extractor(s);
            acc.add(k, p, g);
        }
        ++acc.count;
    }
    ObservableSeries s = acc.finish(times);
    s.metadata = {{"backend", "mcwf"}, {"trajectories", trajectories.size()}};
    return s;
}

EnsembleResult run_ensemble(const SystemModel& model, const PureState& psi0, double t_max,
                            const TrajectoryConfig& config, double sample_dt,
                            const std::vector<double>& correlation_times) {
    check_initial(model, psi0);
    if (config.trajectories < 1) throw DomainError("trajectory count must be at least 1");
    const TrajectoryKernel kernel(model, config);
    const int n = model.size();

    const std::vector<double> grid = uniform_grid(t_max, sample_dt);
    std::vector<double> times = grid;
    for (double t : correlation_times) {
        if (t < 0.0 || t > t_max) throw DomainError("correlation time outside the integration window");
        times.push_back(t);
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    std::vector<int> grid_slot(times.size(), -1), corr_slot(times.size(), -1);
    for (std::size_t k = 0; k < times.size(); ++k) {
        auto it = std::lower_bound(grid.begin(), grid.end(), times[k]);
        if (it != grid.end() && *it == times[k]) grid_slot[k] = static_cast<int>(it - grid.begin());
        for (std::size_t c = 0; c < correlation_times.size(); ++c)
            if (correlation_times[c] == times[k]) corr_slot[k] = static_cast<int>(c);
    }

    constexpr int kChunk = 64;
    const int total = config.trajectories;
    const int chunks = (total + kChunk - 1) / kChunk;
    std::vector<Accumulator> results(chunks, Accumulator(grid.size(), correlation_times.size(), n));
    std::vector<std::vector<JumpEvent>> logs(config.record_jumps ? total : 0);

    std::atomic<int> next_chunk{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        try {
            for (int c = next_chunk++; c < chunks; c = next_chunk++) {
                Accumulator& acc = results[c];
                for (int i = c * kChunk; i < std::min(total, (c + 1) * kChunk); ++i) {
                    auto jumps = kernel.run(psi0.amplitudes, times, static_cast<std::uint64_t>(i),
                                            [&](std::size_t k, double, const Eigen::VectorXcd& s) {
                                                if (grid_slot[k] >= 0) {
                                                    const auto [p, g] = kernel.observables(s);
                                                    acc.add(grid_slot[k], p, g);
                                                }
                                                if (corr_slot[k] >= 0)
                                                    acc.corr[corr_slot[k]] +=
                                                        correlation_matrix(QuantumState(PureState{n, s}));
                                            });
                    ++acc.count;
                    if (config.record_jumps) logs[i] = std::move(jumps);
                }
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next_chunk = chunks;
        }
    };
    const int workers = std::max(1, std::min(config.workers, chunks));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    Accumulator sum(grid.size(), correlation_times.size(), n);
    for (const auto& r : results) sum.merge(r);

    EnsembleResult out;
    out.series = sum.finish(grid);
    for (std::size_t c = 0; c < correlation_times.size(); ++c)
        out.series.correlations.push_back({correlation_times[c], sum.corr[c] / static_cast<double>(sum.count)});
    out.series.metadata = {{"backend", "mcwf"},
                           {"trajectories", total},
                           {"seed", config.seed},
                           {"bisection_tol", config.bisection_tol},
                           {"tolerances", config.tolerances.to_json()},
                           {"sample_dt", sample_dt}};
    out.jump_logs = std::move(logs);
    return out;
}

} // namespace subrad
