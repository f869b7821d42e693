#pragma once

#include <memory>
#include <vector>

#include "subrad/basis.hpp"
#include "subrad/model.hpp"

namespace subrad {

/// Operator restricted to the basis states of one partition group:
/// a diagonal plus a CSR off-diagonal part, both in local indices.
struct GroupOperator {
    Eigen::VectorXcd diag;
    std::vector<int> row_ptr{0};
    std::vector<int> col;
    std::vector<cplx> val;

    int size() const { return static_cast<int>(diag.size()); }
};

/// Operator that does not connect different partition groups, stored per group.
struct GroupDiagonalOperator {
    std::shared_ptr<const BasisPartition> partition;
    std::vector<GroupOperator> groups;
};

/// H_eff = sum_n (Delta_n - i Gamma_nn/2) s_n^ee + sum_{n!=m} (J_nm - i Gamma_nm/2) s_n^+ s_m^-
///         + Omega sum_n (s_n^+ + s_n^-)
/// The drive term needs the whole-space partition.
GroupDiagonalOperator effective_hamiltonian_blocks(const SystemModel& model,
                                                   std::shared_ptr<const BasisPartition> partition);

/// Total excitation number sum_n s_n^ee.
GroupDiagonalOperator excitation_operator(std::shared_ptr<const BasisPartition> partition);

/// Emission-rate operator sum_{nm} Gamma_nm s_n^+ s_m^-.
GroupDiagonalOperator emission_operator(const CouplingMatrices& couplings,
                                        std::shared_ptr<const BasisPartition> partition);

struct Block {
    int row_group;
    int col_group;
    std::size_t offset;
    int rows;
    int cols;
};

/// Set of (row group, col group) blocks of an operator on the product space,
/// stored column-major one after another in a flat vector.
class BlockLayout {
public:
    // Blocks (g, g).
    static BlockLayout diagonal(std::shared_ptr<const BasisPartition> partition);
    // Every (p, q) pair.
    static BlockLayout all(std::shared_ptr<const BasisPartition> partition);
    // Blocks (q + d, q): operators changing the excitation number by d.
    static BlockLayout offset(std::shared_ptr<const BasisPartition> partition, int d);
    // Offset layout restricted to blocks with both groups <= max_group. Used
    // when every manifold above max_group is empty: the generator never
    // feeds them, so their missing jump sources are exact zeros.
    static BlockLayout offset_truncated(std::shared_ptr<const BasisPartition> partition, int d,
                                        int max_group);

    const BasisPartition& partition() const { return *partition_; }
    const std::shared_ptr<const BasisPartition>& partition_ptr() const { return partition_; }
    const std::vector<Block>& blocks() const { return blocks_; }
    std::size_t size() const { return size_; }
    int find(int row_group, int col_group) const;
    bool is_diagonal() const;
    bool truncated() const { return truncated_; }

    Eigen::Map<Eigen::MatrixXcd> view(Eigen::VectorXcd& flat, int b, std::size_t base = 0) const;
    Eigen::Map<const Eigen::MatrixXcd> view(const Eigen::VectorXcd& flat, int b,
                                            std::size_t base = 0) const;

    // Dense 2^N x 2^N <-> flat. Entries outside the layout are dropped / zero.
    Eigen::VectorXcd pack(const Eigen::MatrixXcd& full) const;
    Eigen::MatrixXcd unpack(const Eigen::VectorXcd& flat, std::size_t base = 0) const;

private:
    BlockLayout(std::shared_ptr<const BasisPartition> partition,
                const std::vector<std::pair<int, int>>& pairs);

    std::shared_ptr<const BasisPartition> partition_;
    std::vector<Block> blocks_;
    std::vector<int> index_;  // row_group * groups + col_group -> block or -1
    std::size_t size_ = 0;
    bool truncated_ = false;
};

enum class Picture {
    Schrodinger,  // d rho/dt = L(rho)
    Heisenberg,   // d O/dt = L^dagger(O)
};

/// Applies the Lindblad generator (or its adjoint) to operators stored in a
/// BlockLayout. Several operators ("replicas") can be stacked in one vector.
///
/// Both pictures share one kernel:
///   Y = -i (H X - X H^dagger) + sum_{nm} Gamma_nm sum_{a in L(i), b in L(j)} X_src(a, b)
/// with H = H_eff and the source block one excitation up for the Schrodinger
/// picture, and H = -H_eff^dagger with the source one excitation down for the
/// Heisenberg picture.
///
/// With `hermitian` set (diagonal layouts only) inputs are assumed Hermitian
/// and only the upper triangle of every block is computed and mirrored.
///
/// apply() uses internal scratch space, so one engine must not be shared
/// between threads.
class LiouvillianEngine {
public:
    LiouvillianEngine(const SystemModel& model, BlockLayout layout, Picture picture,
                      bool hermitian = false);

    const BlockLayout& layout() const { return layout_; }
    Picture picture() const { return picture_; }
    bool hermitian() const { return hermitian_; }

    void apply(const Eigen::VectorXcd& x, Eigen::VectorXcd& y) const;

private:
    struct JumpList {
        std::vector<int> ptr{0};
        std::vector<int> atom;
        std::vector<int> src;
    };

    void apply_block(const Eigen::VectorXcd& x, Eigen::VectorXcd& y, std::size_t base,
                     int b) const;

    BlockLayout layout_;
    Picture picture_;
    bool hermitian_;
    Eigen::MatrixXd gamma_;
    std::vector<GroupOperator> ham_;   // H_eff or -H_eff^dagger per group
    std::vector<JumpList> jumps_;      // per group
    std::vector<int> source_block_;    // per block, -1 if no feeding block
    mutable Eigen::MatrixXcd scratch_;
};

/// tr(X O) for X stored in a layout and O a group-diagonal operator; blocks
/// of X that are not diagonal do not contribute.
cplx trace_product(const BlockLayout& layout, const Eigen::VectorXcd& x,
                   const GroupDiagonalOperator& op, std::size_t base = 0);

/// <s_n^+ s_m^-> for every pair, from the diagonal blocks of rho.
Eigen::MatrixXcd correlation_from_blocks(const BlockLayout& layout, const Eigen::VectorXcd& rho,
                                         std::size_t base = 0);

} // namespace subrad
