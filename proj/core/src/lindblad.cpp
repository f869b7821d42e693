#include "subrad/lindblad.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "subrad/errors.hpp"

namespace subrad {

OdeOptions Tolerances::ode() const {
    OdeOptions o;
    o.rtol = rtol;
    o.atol = atol;
    o.fixed_step = fixed_step;
    o.fixed_dt = fixed_dt;
    o.max_step = max_step;
    return o;
}

nlohmann::json Tolerances::to_json() const {
    nlohmann::json j = {{"rtol", rtol}, {"atol", atol}, {"fixed_step", fixed_step}};
    if (fixed_step) j["fixed_dt"] = fixed_dt;
    if (std::isfinite(max_step)) j["max_step"] = max_step;
    return j;
}

namespace {

void check_dense_model(const SystemModel& model) {
    model.validate();
    if (model.size() > kDenseAtomCap)
        throw CapacityError("master-equation backend supports at most " + std::to_string(kDenseAtomCap) +
                            " atoms, got " + std::to_string(model.size()));
}

void check_time_grid(const std::vector<double>& grid) {
    if (grid.empty()) throw DomainError("time grid is empty");
    if (grid.front() != 0.0) throw DomainError("time grid must start at 0");
    for (std::size_t k = 1; k < grid.size(); ++k)
        if (!(grid[k] > grid[k - 1])) throw DomainError("time grid must be strictly increasing");
}

// Writes a group-diagonal operator into the diagonal blocks of a layout.
void fill_blocks(const BlockLayout& layout, const GroupDiagonalOperator& op, Eigen::VectorXcd& flat,
                 std::size_t base) {
    for (int b = 0; b < static_cast<int>(layout.blocks().size()); ++b) {
        const Block& blk = layout.blocks()[b];
        auto X = layout.view(flat, b, base);
        X.setZero();
        if (blk.row_group != blk.col_group) continue;
        const GroupOperator& g = op.groups[blk.row_group];
        for (int r = 0; r < g.size(); ++r) {
            X(r, r) = g.diag[r];
            for (int e = g.row_ptr[r]; e < g.row_ptr[r + 1]; ++e) X(r, g.col[e]) = g.val[e];
        }
    }
}

} // namespace

Eigen::MatrixXcd effective_hamiltonian(const SystemModel& model) {
    check_dense_model(model);
    auto part = BasisPartition::whole(model.size());
    const GroupOperator h = effective_hamiltonian_blocks(model, part).groups[0];
    const int dim = h.size();
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
    for (int r = 0; r < dim; ++r) {
        m(r, r) = h.diag[r];
        for (int e = h.row_ptr[r]; e < h.row_ptr[r + 1]; ++e) m(r, h.col[e]) += h.val[e];
    }
    return m;
}

Eigen::MatrixXcd liouvillian_apply(const SystemModel& model, const DensityState& rho) {
    check_dense_model(model);
    const auto dim = static_cast<Eigen::Index>(std::size_t{1} << model.size());
    if (rho.n_atoms != model.size() || rho.matrix.rows() != dim || rho.matrix.cols() != dim)
        throw DimensionMismatch("density matrix does not match the model size");
    LiouvillianEngine engine(model, BlockLayout::diagonal(BasisPartition::whole(model.size())),
                             Picture::Schrodinger);
    const Eigen::VectorXcd x = engine.layout().pack(rho.matrix);
    Eigen::VectorXcd y;
    engine.apply(x, y);
    return engine.layout().unpack(y);
}

DensityEvolution evolve_density(const SystemModel& model, const DensityState& rho0,
                                const std::vector<double>& time_grid, const Tolerances& tol,
                                const EvolveOptions& options) {
    check_dense_model(model);
    check_time_grid(time_grid);
    const int n = model.size();
    const auto dim = static_cast<Eigen::Index>(std::size_t{1} << n);
    if (rho0.n_atoms != n || rho0.matrix.rows() != dim || rho0.matrix.cols() != dim)
        throw DimensionMismatch("initial density matrix does not match the model size");
    if (hermiticity_error(rho0) > 1e-8) throw DomainError("initial density matrix is not Hermitian");

    const double t_max = time_grid.back();

    // Layout: one block when driven; otherwise manifold blocks, keeping the
    // inter-manifold ones only if the initial state populates them.
    std::shared_ptr<const BasisPartition> part;
    bool diagonal = true;
    if (model.driven()) {
        part = BasisPartition::whole(n);
    } else {
        part = BasisPartition::by_excitation(n);
        for (Eigen::Index i = 0; i < dim && diagonal; ++i)
            for (Eigen::Index j = 0; j < dim; ++j)
                if (rho0.matrix(i, j) != 0.0 &&
                    part->group_of(static_cast<std::uint32_t>(i)) !=
                        part->group_of(static_cast<std::uint32_t>(j))) {
                    diagonal = false;
                    break;
                }
    }
    BlockLayout layout = diagonal ? BlockLayout::diagonal(part) : BlockLayout::all(part);
    LiouvillianEngine engine(model, layout, Picture::Schrodinger, diagonal);

    const GroupDiagonalOperator n_op = excitation_operator(part);
    const GroupDiagonalOperator g_op = emission_operator(model.couplings, part);
    GroupDiagonalOperator id_op{part, {}};
    for (int g = 0; g < part->group_count(); ++g) {
        GroupOperator o;
        o.diag = Eigen::VectorXcd::Ones(part->group_size(g));
        o.row_ptr.assign(part->group_size(g) + 1, 0);
        id_op.groups.push_back(std::move(o));
    }

    DensityEvolution out;
    out.series.metadata = {{"backend", "master"}, {"tolerances", tol.to_json()},
                           {"sample_dt", options.sample_dt},
                           {"layout", diagonal ? "manifold-diagonal" : "full"}};

    SampleRequest samples;
    samples.times = uniform_grid(t_max, options.sample_dt);
    samples.n_values = 2;
    samples.functional = [&](const Eigen::VectorXcd& y, cplx* v) {
        v[0] = trace_product(layout, y, n_op);
        v[1] = trace_product(layout, y, g_op);
    };
    samples.on_sample = [&](std::size_t, double t, const cplx* v) {
        out.series.push(t, v[0].real(), v[1].real());
        return !options.keep_going || options.keep_going(t, v[0].real(), v[1].real());
    };

    // Snapshot times: the requested grid plus correlation times.
    std::vector<double> snap_times = time_grid;
    for (double t : options.correlation_times) {
        if (t < 0.0 || t > t_max) throw DomainError("correlation time outside the integration window");
        snap_times.push_back(t);
    }
    std::sort(snap_times.begin(), snap_times.end());
    snap_times.erase(std::unique(snap_times.begin(), snap_times.end()), snap_times.end());
    std::vector<double> corr_times = options.correlation_times;
    std::sort(corr_times.begin(), corr_times.end());

    SnapshotRequest snaps;
    snaps.times = snap_times;
    snaps.on_snapshot = [&](std::size_t, double t, const Eigen::VectorXcd& y) {
        if (std::binary_search(time_grid.begin(), time_grid.end(), t)) {
            out.snapshot_times.push_back(t);
            out.snapshots.push_back(DensityState{n, layout.unpack(y)});
        }
        if (std::binary_search(corr_times.begin(), corr_times.end(), t))
            out.series.correlations.push_back({t, correlation_from_blocks(layout, y)});
    };

    Eigen::VectorXcd y = layout.pack(rho0.matrix);
    DormandPrince45 solver(tol.ode());
    const OdeRhs rhs = [&](double, const Eigen::VectorXcd& x, Eigen::VectorXcd& dx) { engine.apply(x, dx); };
    const double reached = integrate_sampled(solver, rhs, y, 0.0, t_max, samples, &snaps);
    out.stats = solver.stats();
    out.final_trace_error = std::abs(trace_product(layout, y, id_op) - 1.0);
    out.series.metadata["t_reached"] = reached;
    out.series.metadata["steps"] = out.stats.accepted;
    out.series.metadata["trace_error"] = out.final_trace_error;
    return out;
}

// ---------------------------------------------------------------------------

AdjointBatch::AdjointBatch(const SystemModel& model, Tolerances tol) : model_(model), tol_(tol) {
    check_dense_model(model_);
    if (model_.driven()) throw ConsistencyError("the adjoint batch evaluator needs an undriven model");
    partition_ = BasisPartition::by_excitation(model_.size());
}

int AdjointBatch::add(const ExcitationSet& excitations) {
    if (excitations.n_atoms != model_.size()) throw DimensionMismatch("excitation set size mismatch");
    const std::uint32_t s = excitations.mask();
    Request r;
    r.basis = true;
    r.group = partition_->group_of(s);
    r.local = partition_->local_index(s);
    requests_.push_back(std::move(r));
    return request_count() - 1;
}

int AdjointBatch::add(const PureState& state) {
    if (state.n_atoms != model_.size()) throw DimensionMismatch("state size mismatch");
    if (norm_error(state) > 1e-10) throw DomainError("state is not normalized");
    Request r;
    r.basis = false;
    for (int g = 0; g < partition_->group_count(); ++g) {
        const auto& states = partition_->group(g);
        Eigen::VectorXcd v(static_cast<Eigen::Index>(states.size()));
        for (std::size_t i = 0; i < states.size(); ++i) v[static_cast<Eigen::Index>(i)] = state.amplitudes[states[i]];
        r.blocks.push_back(std::move(v));
    }
    requests_.push_back(std::move(r));
    return request_count() - 1;
}

std::vector<ObservableSeries> AdjointBatch::run(double t_max, double sample_dt, const Monitor& keep_going) {
    const BlockLayout layout = BlockLayout::diagonal(partition_);
    LiouvillianEngine engine(model_, layout, Picture::Heisenberg, true);
    const std::size_t m = layout.size();

    Eigen::VectorXcd y(static_cast<Eigen::Index>(2 * m));
    fill_blocks(layout, excitation_operator(partition_), y, 0);
    fill_blocks(layout, emission_operator(model_.couplings, partition_), y, m);

    std::vector<ObservableSeries> out(requests_.size());
    for (auto& s : out)
        s.metadata = {{"backend", "master"}, {"method", "adjoint-batch"}, {"tolerances", tol_.to_json()},
                      {"sample_dt", sample_dt}};

    SampleRequest samples;
    samples.times = uniform_grid(t_max, sample_dt);
    samples.n_values = 2 * request_count();
    samples.functional = [&](const Eigen::VectorXcd& x, cplx* v) {
        for (std::size_t q = 0; q < requests_.size(); ++q) {
            const Request& r = requests_[q];
            for (int k = 0; k < 2; ++k) {
                const std::size_t base = k * m;
                if (r.basis) {
                    v[2 * q + k] = layout.view(x, r.group, base)(r.local, r.local);
                } else {
                    cplx acc = 0.0;
                    for (int g = 0; g < partition_->group_count(); ++g) {
                        const Eigen::VectorXcd& psi = r.blocks[g];
                        if (psi.squaredNorm() == 0.0) continue;
                        acc += psi.dot(layout.view(x, g, base) * psi);
                    }
                    v[2 * q + k] = acc;
                }
            }
        }
    };
    samples.on_sample = [&](std::size_t, double t, const cplx* v) {
        for (std::size_t q = 0; q < requests_.size(); ++q) out[q].push(t, v[2 * q].real(), v[2 * q + 1].real());
        return !keep_going || keep_going(t, out);
    };

    DormandPrince45 solver(tol_.ode());
    const OdeRhs rhs = [&](double, const Eigen::VectorXcd& x, Eigen::VectorXcd& dx) { engine.apply(x, dx); };
    integrate_sampled(solver, rhs, y, 0.0, t_max, samples);
    stats_ = solver.stats();
    for (auto& s : out) s.metadata["steps"] = stats_.accepted;
    return out;
}

} // namespace subrad
