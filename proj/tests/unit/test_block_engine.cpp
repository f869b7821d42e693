#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "subrad/block_engine.hpp"
#include "subrad/errors.hpp"

using namespace subrad;
using oracle::Mat;

namespace {

SystemModel model(int n, double a, double rabi = 0.0, bool coherent = true) {
    SystemModel m(coupling_matrices(build_lattice(1, {n}, a)));
    m.detunings = Eigen::VectorXd::LinSpaced(n, -0.7, 0.9);
    m.rabi = rabi;
    m.coherent_interactions = coherent;
    return m;
}

Mat random_matrix(int d, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    return Mat::NullaryExpr(d, d, [&] { return cplx(g(rng), g(rng)); });
}

// Adjoint generator written out directly.
Mat adjoint_lindblad(const SystemModel& m, const Mat& a) {
    const int n = m.size();
    const Mat h = oracle::hamiltonian(m);
    Mat out = cplx(0, 1) * (h * a - a * h);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const Mat sp = oracle::raise(n, i), sm = oracle::lower(n, j);
            out += m.Gamma(i, j) * (sp * a * sm - 0.5 * (sp * sm * a + a * sp * sm));
        }
    return out;
}

double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

} // namespace

TEST(BlockEngine, AllLayoutMatchesDenseGenerator) {
    std::mt19937_64 rng(1);
    for (bool coherent : {true, false}) {
        const SystemModel m = model(3, 0.12, 0.0, coherent);
        const BlockLayout layout = BlockLayout::all(BasisPartition::by_excitation(3));
        LiouvillianEngine eng(m, layout, Picture::Schrodinger);
        const Mat x = random_matrix(8, rng);
        Eigen::VectorXcd y;
        eng.apply(layout.pack(x), y);
        EXPECT_LT(max_abs(layout.unpack(y) - oracle::lindblad(m, x)), 1e-12);
    }
}

TEST(BlockEngine, HermitianDiagonalMode) {
    std::mt19937_64 rng(2);
    const SystemModel m = model(4, 0.1);
    const BlockLayout layout = BlockLayout::diagonal(BasisPartition::by_excitation(4));
    LiouvillianEngine eng(m, layout, Picture::Schrodinger, true);
    const Mat rho = oracle::random_manifold_diagonal_rho(4, rng);
    Eigen::VectorXcd y;
    eng.apply(layout.pack(rho), y);
    EXPECT_LT(max_abs(layout.unpack(y) - oracle::lindblad(m, rho)), 1e-12);
}

TEST(BlockEngine, OffsetLayoutIsInvariant) {
    std::mt19937_64 rng(3);
    const SystemModel m = model(3, 0.2);
    for (int d : {-2, -1, 1}) {
        const BlockLayout layout = BlockLayout::offset(BasisPartition::by_excitation(3), d);
        LiouvillianEngine eng(m, layout, Picture::Schrodinger);
        const Mat x = layout.unpack(layout.pack(random_matrix(8, rng)));
        Eigen::VectorXcd y;
        eng.apply(layout.pack(x), y);
        const Mat expected = oracle::lindblad(m, x);
        EXPECT_LT(max_abs(layout.unpack(y) - expected), 1e-12) << d;
        // Nothing leaks out of the layout.
        EXPECT_LT(max_abs(layout.unpack(layout.pack(expected)) - expected), 1e-12) << d;
    }
}

TEST(BlockEngine, HeisenbergPictureMatchesAdjoint) {
    std::mt19937_64 rng(4);
    const SystemModel m = model(3, 0.15);
    const auto part = BasisPartition::by_excitation(3);
    for (int d : {0, 1, 2}) {
        const BlockLayout layout = d == 0 ? BlockLayout::all(part) : BlockLayout::offset(part, d);
        LiouvillianEngine eng(m, layout, Picture::Heisenberg);
        const Mat a = layout.unpack(layout.pack(random_matrix(8, rng)));
        Eigen::VectorXcd y;
        eng.apply(layout.pack(a), y);
        EXPECT_LT(max_abs(layout.unpack(y) - adjoint_lindblad(m, a)), 1e-12) << d;
    }
}

TEST(BlockEngine, DualityOfPictures) {
    std::mt19937_64 rng(5);
    const SystemModel m = model(4, 0.1);
    const auto part = BasisPartition::by_excitation(4);
    const BlockLayout up = BlockLayout::offset(part, 1), down = BlockLayout::offset(part, -1);
    LiouvillianEngine heis(m, up, Picture::Heisenberg), schr(m, down, Picture::Schrodinger);
    const Mat a = up.unpack(up.pack(random_matrix(16, rng)));
    const Mat x = down.unpack(down.pack(random_matrix(16, rng)));
    Eigen::VectorXcd la, lx;
    heis.apply(up.pack(a), la);
    schr.apply(down.pack(x), lx);
    EXPECT_LT(std::abs((up.unpack(la) * x).trace() - (a * down.unpack(lx)).trace()), 1e-10);
}

TEST(BlockEngine, DrivenWholePartition) {
    std::mt19937_64 rng(6);
    const SystemModel m = model(3, 0.15, 2.5);
    const BlockLayout layout = BlockLayout::diagonal(BasisPartition::whole(3));
    for (bool herm : {false, true}) {
        LiouvillianEngine eng(m, layout, Picture::Schrodinger, herm);
        const Mat rho = oracle::random_density(3, rng);
        Eigen::VectorXcd y;
        eng.apply(layout.pack(rho), y);
        EXPECT_LT(max_abs(layout.unpack(y) - oracle::lindblad(m, rho)), 1e-12);
    }
    EXPECT_THROW(LiouvillianEngine(m, BlockLayout::diagonal(BasisPartition::by_excitation(3)), Picture::Schrodinger),
                 ConsistencyError);
}

TEST(BlockEngine, StackedReplicasAreIndependent) {
    std::mt19937_64 rng(7);
    const SystemModel m = model(3, 0.2);
    const BlockLayout layout = BlockLayout::all(BasisPartition::by_excitation(3));
    LiouvillianEngine eng(m, layout, Picture::Schrodinger);
    const Mat x0 = random_matrix(8, rng), x1 = random_matrix(8, rng);
    Eigen::VectorXcd stacked(2 * layout.size()), y;
    stacked << layout.pack(x0), layout.pack(x1);
    eng.apply(stacked, y);
    EXPECT_LT(max_abs(layout.unpack(y, 0) - oracle::lindblad(m, x0)), 1e-12);
    EXPECT_LT(max_abs(layout.unpack(y, layout.size()) - oracle::lindblad(m, x1)), 1e-12);
    Eigen::VectorXcd bad(layout.size() + 1);
    EXPECT_THROW(eng.apply(bad, y), DimensionMismatch);
}

TEST(BlockEngine, TruncatedLayoutWhenUpperManifoldsAreEmpty) {
    std::mt19937_64 rng(8);
    const SystemModel m = model(4, 0.12);
    const auto part = BasisPartition::by_excitation(4);
    const BlockLayout full = BlockLayout::offset(part, -1);
    const BlockLayout cut = BlockLayout::offset_truncated(part, -1, 2);
    EXPECT_LT(cut.size(), full.size());
    const Mat x = cut.unpack(cut.pack(random_matrix(16, rng)));
    LiouvillianEngine a(m, full, Picture::Schrodinger), b(m, cut, Picture::Schrodinger);
    Eigen::VectorXcd ya, yb;
    a.apply(full.pack(x), ya);
    b.apply(cut.pack(x), yb);
    EXPECT_LT(max_abs(full.unpack(ya) - cut.unpack(yb)), 1e-13);
}

TEST(BlockEngine, ObservableFunctionals) {
    std::mt19937_64 rng(9);
    const SystemModel m = model(3, 0.1);
    const auto part = BasisPartition::by_excitation(3);
    const BlockLayout layout = BlockLayout::diagonal(part);
    const Mat rho = oracle::random_manifold_diagonal_rho(3, rng);
    const auto x = layout.pack(rho);
    Mat nex = Mat::Zero(8, 8), emit = Mat::Zero(8, 8);
    for (int i = 0; i < 3; ++i) {
        nex += oracle::excited(3, i);
        for (int j = 0; j < 3; ++j) emit += m.Gamma(i, j) * oracle::raise(3, i) * oracle::lower(3, j);
    }
    EXPECT_NEAR(std::abs(trace_product(layout, x, excitation_operator(part)) - oracle::expect(rho, nex)), 0.0, 1e-13);
    EXPECT_NEAR(std::abs(trace_product(layout, x, emission_operator(m.couplings, part)) - oracle::expect(rho, emit)),
                0.0, 1e-13);
    const Mat c = correlation_from_blocks(layout, x);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            EXPECT_NEAR(std::abs(c(i, j) - oracle::expect(rho, oracle::raise(3, i) * oracle::lower(3, j))), 0.0, 1e-13);
}
