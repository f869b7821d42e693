#include "subrad/block_engine.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "subrad/errors.hpp"

namespace subrad {

void SystemModel::validate() const {
    const int n = size();
    if (n < 1) throw DomainError("model has no atoms");
    if (couplings.Gamma.rows() != n || couplings.Gamma.cols() != n || couplings.J.cols() != n)
        throw DimensionMismatch("coupling matrices are not square of matching size");
    if (detunings.size() != 0 && detunings.size() != n)
        throw DimensionMismatch("expected " + std::to_string(n) + " detunings, got " +
                                std::to_string(detunings.size()));
    if (!std::isfinite(rabi)) throw DomainError("Rabi frequency must be finite");
}

namespace {

using PartitionPtr = std::shared_ptr<const BasisPartition>;

// Builds a group operator from a callback that lists the off-diagonal
// entries of row `state` as (column state, value) pairs.
template <class Diag, class Row>
GroupOperator build_group(const BasisPartition& part, int g, Diag diag_fn, Row row_fn) {
    const auto& states = part.group(g);
    GroupOperator op;
    op.diag.resize(static_cast<Eigen::Index>(states.size()));
    op.row_ptr.reserve(states.size() + 1);
    for (std::size_t r = 0; r < states.size(); ++r) {
        op.diag[static_cast<Eigen::Index>(r)] = diag_fn(states[r]);
        row_fn(states[r], [&](std::uint32_t c, cplx v) {
            if (part.group_of(c) != g)
                throw ConsistencyError("operator connects different partition groups");
            op.col.push_back(part.local_index(c));
            op.val.push_back(v);
        });
        op.row_ptr.push_back(static_cast<int>(op.col.size()));
    }
    return op;
}

} // namespace

GroupDiagonalOperator effective_hamiltonian_blocks(const SystemModel& model, PartitionPtr partition) {
    model.validate();
    const int n = model.size();
    if (partition->n_atoms() != n) throw DimensionMismatch("partition and model sizes differ");
    if (model.driven() && partition->is_by_excitation())
        throw ConsistencyError("the drive couples excitation manifolds; use the whole-space partition");

    GroupDiagonalOperator h{partition, {}};
    for (int g = 0; g < partition->group_count(); ++g) {
        h.groups.push_back(build_group(
            *partition, g,
            [&](std::uint32_t s) {
                cplx d = 0.0;
                for (int a = 0; a < n; ++a)
                    if (excited(s, a)) d += cplx(model.detuning(a), -0.5 * model.Gamma(a, a));
                return d;
            },
            [&](std::uint32_t r, auto&& emit) {
                // s_a^+ s_b^- maps column state c (b excited, a not) to row r.
                for (int a = 0; a < n; ++a) {
                    if (!excited(r, a)) continue;
                    for (int b = 0; b < n; ++b) {
                        if (b == a || excited(r, b)) continue;
                        const cplx v = model.G(a, b);
                        if (v != 0.0) emit(r ^ (1u << a) ^ (1u << b), v);
                    }
                }
                if (model.driven())
                    for (int a = 0; a < n; ++a) emit(r ^ (1u << a), cplx(model.rabi));
            }));
    }
    return h;
}

GroupDiagonalOperator excitation_operator(PartitionPtr partition) {
    GroupDiagonalOperator op{partition, {}};
    for (int g = 0; g < partition->group_count(); ++g)
        op.groups.push_back(build_group(
            *partition, g, [](std::uint32_t s) { return cplx(std::popcount(s)); },
            [](std::uint32_t, auto&&) {}));
    return op;
}

GroupDiagonalOperator emission_operator(const CouplingMatrices& couplings, PartitionPtr partition) {
    const int n = couplings.size();
    if (partition->n_atoms() != n) throw DimensionMismatch("partition and coupling sizes differ");
    GroupDiagonalOperator op{partition, {}};
    for (int g = 0; g < partition->group_count(); ++g)
        op.groups.push_back(build_group(
            *partition, g,
            [&](std::uint32_t s) {
                double d = 0.0;
                for (int a = 0; a < n; ++a)
                    if (excited(s, a)) d += couplings.Gamma(a, a);
                return cplx(d);
            },
            [&](std::uint32_t r, auto&& emit) {
                for (int a = 0; a < n; ++a) {
                    if (!excited(r, a)) continue;
                    for (int b = 0; b < n; ++b) {
                        if (b == a || excited(r, b)) continue;
                        if (couplings.Gamma(a, b) != 0.0)
                            emit(r ^ (1u << a) ^ (1u << b), cplx(couplings.Gamma(a, b)));
                    }
                }
            }));
    return op;
}

// ---------------------------------------------------------------------------

BlockLayout::BlockLayout(PartitionPtr partition, const std::vector<std::pair<int, int>>& pairs)
    : partition_(std::move(partition)) {
    const int groups = partition_->group_count();
    index_.assign(static_cast<std::size_t>(groups) * groups, -1);
    for (auto [p, q] : pairs) {
        Block b{p, q, size_, partition_->group_size(p), partition_->group_size(q)};
        index_[static_cast<std::size_t>(p) * groups + q] = static_cast<int>(blocks_.size());
        blocks_.push_back(b);
        size_ += static_cast<std::size_t>(b.rows) * b.cols;
    }
}

BlockLayout BlockLayout::diagonal(PartitionPtr partition) {
    std::vector<std::pair<int, int>> pairs;
    for (int g = 0; g < partition->group_count(); ++g) pairs.emplace_back(g, g);
    return BlockLayout(std::move(partition), pairs);
}

BlockLayout BlockLayout::all(PartitionPtr partition) {
    std::vector<std::pair<int, int>> pairs;
    for (int q = 0; q < partition->group_count(); ++q)
        for (int p = 0; p < partition->group_count(); ++p) pairs.emplace_back(p, q);
    return BlockLayout(std::move(partition), pairs);
}

BlockLayout BlockLayout::offset(PartitionPtr partition, int d) {
    if (!partition->is_by_excitation()) {
        return diagonal(std::move(partition));
    }
    std::vector<std::pair<int, int>> pairs;
    for (int q = 0; q < partition->group_count(); ++q) {
        const int p = q + d;
        if (p >= 0 && p < partition->group_count()) pairs.emplace_back(p, q);
    }
    return BlockLayout(std::move(partition), pairs);
}

BlockLayout BlockLayout::offset_truncated(PartitionPtr partition, int d, int max_group) {
    if (!partition->is_by_excitation()) throw ConsistencyError("truncated layouts need an excitation partition");
    std::vector<std::pair<int, int>> pairs;
    for (int q = 0; q < partition->group_count(); ++q) {
        const int p = q + d;
        if (p >= 0 && p < partition->group_count() && p <= max_group && q <= max_group) pairs.emplace_back(p, q);
    }
    BlockLayout out(std::move(partition), pairs);
    out.truncated_ = true;
    return out;
}

int BlockLayout::find(int row_group, int col_group) const {
    const int groups = partition_->group_count();
    if (row_group < 0 || col_group < 0 || row_group >= groups || col_group >= groups) return -1;
    return index_[static_cast<std::size_t>(row_group) * groups + col_group];
}

bool BlockLayout::is_diagonal() const {
    for (const auto& b : blocks_)
        if (b.row_group != b.col_group) return false;
    return true;
}

Eigen::Map<Eigen::MatrixXcd> BlockLayout::view(Eigen::VectorXcd& flat, int b, std::size_t base) const {
    const Block& blk = blocks_[b];
    return {flat.data() + base + blk.offset, blk.rows, blk.cols};
}

Eigen::Map<const Eigen::MatrixXcd> BlockLayout::view(const Eigen::VectorXcd& flat, int b,
                                                     std::size_t base) const {
    const Block& blk = blocks_[b];
    return {flat.data() + base + blk.offset, blk.rows, blk.cols};
}

Eigen::VectorXcd BlockLayout::pack(const Eigen::MatrixXcd& full) const {
    const auto dim = static_cast<Eigen::Index>(partition_->dimension());
    if (full.rows() != dim || full.cols() != dim)
        throw DimensionMismatch("matrix does not match the basis dimension");
    Eigen::VectorXcd flat(static_cast<Eigen::Index>(size_));
    for (int b = 0; b < static_cast<int>(blocks_.size()); ++b) {
        auto v = view(flat, b);
        const auto& rows = partition_->group(blocks_[b].row_group);
        const auto& cols = partition_->group(blocks_[b].col_group);
        for (int j = 0; j < blocks_[b].cols; ++j)
            for (int i = 0; i < blocks_[b].rows; ++i) v(i, j) = full(rows[i], cols[j]);
    }
    return flat;
}

Eigen::MatrixXcd BlockLayout::unpack(const Eigen::VectorXcd& flat, std::size_t base) const {
    const auto dim = static_cast<Eigen::Index>(partition_->dimension());
    Eigen::MatrixXcd full = Eigen::MatrixXcd::Zero(dim, dim);
    for (int b = 0; b < static_cast<int>(blocks_.size()); ++b) {
        auto v = view(flat, b, base);
        const auto& rows = partition_->group(blocks_[b].row_group);
        const auto& cols = partition_->group(blocks_[b].col_group);
        for (int j = 0; j < blocks_[b].cols; ++j)
            for (int i = 0; i < blocks_[b].rows; ++i) full(rows[i], cols[j]) = v(i, j);
    }
    return full;
}

// ---------------------------------------------------------------------------

LiouvillianEngine::LiouvillianEngine(const SystemModel& model, BlockLayout layout, Picture picture,
                                     bool hermitian)
    : layout_(std::move(layout)), picture_(picture), hermitian_(hermitian),
      gamma_(model.couplings.Gamma) {
    const BasisPartition& part = layout_.partition();
    const int n = model.size();
    if (part.n_atoms() != n) throw DimensionMismatch("layout and model sizes differ");
    if (hermitian_ && !layout_.is_diagonal())
        throw ConsistencyError("Hermitian mode requires a diagonal layout");

    ham_ = effective_hamiltonian_blocks(model, layout_.partition_ptr()).groups;
    if (picture_ == Picture::Heisenberg) {
        // -H_eff^dagger; H_eff is complex symmetric, so this is -conj(H_eff).
        for (auto& g : ham_) {
            g.diag = -g.diag.conjugate();
            for (auto& v : g.val) v = -std::conj(v);
        }
    }

    const int groups = part.group_count();
    jumps_.resize(groups);
    for (int g = 0; g < groups; ++g) {
        const int src_group = picture_ == Picture::Schrodinger ? part.upper(g) : part.lower(g);
        JumpList& jl = jumps_[g];
        if (src_group < 0) {
            jl.ptr.assign(part.group_size(g) + 1, 0);
            continue;
        }
        for (std::uint32_t s : part.group(g)) {
            for (int a = 0; a < n; ++a) {
                // Schrodinger: s_a^- X pulls from s | a; Heisenberg: s_a^+ O pulls from s & ~a.
                const bool want = picture_ == Picture::Schrodinger ? !excited(s, a) : excited(s, a);
                if (!want) continue;
                const std::uint32_t t = s ^ (1u << a);
                jl.atom.push_back(a);
                jl.src.push_back(part.local_index(t));
            }
            jl.ptr.push_back(static_cast<int>(jl.atom.size()));
        }
    }

    for (const Block& b : layout_.blocks()) {
        int ps, qs;
        if (picture_ == Picture::Schrodinger) {
            ps = part.upper(b.row_group);
            qs = part.upper(b.col_group);
        } else {
            ps = part.lower(b.row_group);
            qs = part.lower(b.col_group);
        }
        int src = -1;
        if (ps >= 0 && qs >= 0) {
            src = layout_.find(ps, qs);
            if (src < 0 && !layout_.truncated()) throw ConsistencyError("block layout is not closed under the jump term");
        }
        source_block_.push_back(src);
    }
}

void LiouvillianEngine::apply(const Eigen::VectorXcd& x, Eigen::VectorXcd& y) const {
    const std::size_t m = layout_.size();
    if (m == 0 || x.size() % static_cast<Eigen::Index>(m) != 0)
        throw DimensionMismatch("vector size is not a multiple of the layout size");
    y.resize(x.size());
    const std::size_t replicas = static_cast<std::size_t>(x.size()) / m;
    for (std::size_t r = 0; r < replicas; ++r)
        for (int b = 0; b < static_cast<int>(layout_.blocks().size()); ++b)
            apply_block(x, y, r * m, b);
}

void LiouvillianEngine::apply_block(const Eigen::VectorXcd& xv, Eigen::VectorXcd& yv,
                                    std::size_t base, int b) const {
    const Block& blk = layout_.blocks()[b];
    const auto X = layout_.view(xv, b, base);
    auto Y = layout_.view(yv, b, base);
    const GroupOperator& Hp = ham_[blk.row_group];
    const GroupOperator& Hq = ham_[blk.col_group];
    const int rows = blk.rows, cols = blk.cols;
    const cplx I = kI;

    if (hermitian_) {
        // A = X H^dagger by column axpys; Y = -i H X + i X H^dagger = i (A - A^dagger).
        scratch_.resize(rows, cols);
        for (int j = 0; j < cols; ++j) {
            auto a = scratch_.col(j);
            a = std::conj(Hq.diag[j]) * X.col(j);
            for (int e = Hq.row_ptr[j]; e < Hq.row_ptr[j + 1]; ++e)
                a += std::conj(Hq.val[e]) * X.col(Hq.col[e]);
        }
        for (int j = 0; j < cols; ++j)
            for (int i = 0; i <= j; ++i) Y(i, j) = I * (scratch_(i, j) - std::conj(scratch_(j, i)));
    } else {
        for (int j = 0; j < cols; ++j) {
            auto yc = Y.col(j);
            yc = (I * std::conj(Hq.diag[j])) * X.col(j);
            for (int e = Hq.row_ptr[j]; e < Hq.row_ptr[j + 1]; ++e)
                yc += (I * std::conj(Hq.val[e])) * X.col(Hq.col[e]);
            const cplx* xc = X.col(j).data();
            for (int r = 0; r < rows; ++r) {
                cplx acc = Hp.diag[r] * xc[r];
                for (int e = Hp.row_ptr[r]; e < Hp.row_ptr[r + 1]; ++e) acc += Hp.val[e] * xc[Hp.col[e]];
                yc[r] -= I * acc;
            }
        }
    }

    const int src = source_block_[b];
    if (src >= 0) {
        const auto S = layout_.view(xv, src, base);
        const JumpList& Lp = jumps_[blk.row_group];
        const JumpList& Lq = jumps_[blk.col_group];
        const double* gamma = gamma_.data();
        const Eigen::Index ld = gamma_.rows();
        for (int j = 0; j < cols; ++j) {
            const int i_end = hermitian_ ? j + 1 : rows;
            cplx* yc = Y.col(j).data();
            for (int f = Lq.ptr[j]; f < Lq.ptr[j + 1]; ++f) {
                const double* g = gamma + Lq.atom[f] * ld;
                const cplx* sc = S.col(Lq.src[f]).data();
                for (int i = 0; i < i_end; ++i) {
                    cplx acc = 0.0;
                    for (int e = Lp.ptr[i]; e < Lp.ptr[i + 1]; ++e) acc += g[Lp.atom[e]] * sc[Lp.src[e]];
                    yc[i] += acc;
                }
            }
        }
    }

    if (hermitian_)
        for (int j = 0; j < cols; ++j)
            for (int i = j + 1; i < rows; ++i) Y(i, j) = std::conj(Y(j, i));
}

cplx trace_product(const BlockLayout& layout, const Eigen::VectorXcd& x,
                   const GroupDiagonalOperator& op, std::size_t base) {
    cplx tr = 0.0;
    for (int b = 0; b < static_cast<int>(layout.blocks().size()); ++b) {
        const Block& blk = layout.blocks()[b];
        if (blk.row_group != blk.col_group) continue;
        const auto X = layout.view(x, b, base);
        const GroupOperator& o = op.groups[blk.row_group];
        // tr(X O) = sum_{r,c} X(c, r) O(r, c)
        for (int r = 0; r < blk.rows; ++r) {
            tr += X(r, r) * o.diag[r];
            for (int e = o.row_ptr[r]; e < o.row_ptr[r + 1]; ++e) tr += X(o.col[e], r) * o.val[e];
        }
    }
    return tr;
}

Eigen::MatrixXcd correlation_from_blocks(const BlockLayout& layout, const Eigen::VectorXcd& rho,
                                         std::size_t base) {
    const BasisPartition& part = layout.partition();
    const int n = part.n_atoms();
    Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(n, n);
    for (int b = 0; b < static_cast<int>(layout.blocks().size()); ++b) {
        const Block& blk = layout.blocks()[b];
        if (blk.row_group != blk.col_group) continue;
        const auto X = layout.view(rho, b, base);
        const auto& states = part.group(blk.row_group);
        for (int i = 0; i < blk.rows; ++i) {
            const std::uint32_t s = states[i];
            // <s_a^+ s_c^-> = sum_s rho(s, s - c + a) over s with c excited, a not.
            for (int cidx = 0; cidx < n; ++cidx) {
                if (!excited(s, cidx)) continue;
                c(cidx, cidx) += X(i, i);
                for (int a = 0; a < n; ++a) {
                    if (a == cidx || excited(s, a)) continue;
                    const std::uint32_t t = s ^ (1u << cidx) ^ (1u << a);
                    c(a, cidx) += X(i, part.local_index(t));
                }
            }
        }
    }
    return c;
}

} // namespace subrad
