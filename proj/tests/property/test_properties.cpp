// Randomized invariants over many seeds. Runs standalone:
//   ./tests/subrad_property_tests

#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "subrad/cumulant.hpp"
#include "subrad/lindblad.hpp"
#include "subrad/mcwf.hpp"

using namespace subrad;

namespace {

constexpr int kTrials = 60;

ArrayGeometry random_cloud(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    ArrayGeometry g;
    g.dimensionality = 2;  // no lattice metadata: free positions
    while (g.size() < n) {
        const Vec3 p(u(rng), u(rng), u(rng));
        bool clash = false;
        for (const auto& q : g.positions) clash = clash || (p - q).norm() < 0.02;
        if (!clash) g.positions.push_back(p);
    }
    Eigen::Vector3cd d(cplx(u(rng), u(rng)), cplx(u(rng), u(rng)), cplx(u(rng), u(rng)));
    g.dipole = d.normalized();
    return g;
}

SystemModel random_model(int n, std::mt19937_64& rng, bool drive) {
    SystemModel m(coupling_matrices(random_cloud(n, rng)));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    m.detunings = Eigen::VectorXd::NullaryExpr(n, [&] { return u(rng); });
    if (drive) m.rabi = 2.0 * u(rng);
    return m;
}

} // namespace

TEST(CouplingProperty, SymmetricWithPositiveSemidefiniteGamma) {
    std::mt19937_64 rng(101);
    for (int t = 0; t < kTrials; ++t) {
        const int n = 2 + t % 12;
        const auto c = coupling_matrices(random_cloud(n, rng));
        EXPECT_LT((c.J - c.J.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((c.Gamma - c.Gamma.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((c.Gamma.diagonal().array() - 1.0).abs().maxCoeff(), 1e-12);
        EXPECT_EQ(c.J.diagonal().cwiseAbs().maxCoeff(), 0.0);
        EXPECT_GT(min_gamma_eigenvalue(c), -1e-10);
    }
    for (double a : {0.01, 0.05, 0.1, 0.25, 0.5, 1.0}) {
        const auto c = coupling_matrices(build_lattice(2, {4, 3}, a));
        EXPECT_GT(min_gamma_eigenvalue(c), -1e-10) << a;
    }
}

TEST(MasterProperty, TraceHermiticityPositivity) {
    std::mt19937_64 rng(202);
    for (int t = 0; t < kTrials; ++t) {
        const int n = 1 + t % 4;
        const bool drive = t % 2 == 0;
        const SystemModel m = random_model(n, rng, drive);
        const DensityState rho0{n, oracle::random_density(n, rng)};
        const auto ev = evolve_density(m, rho0, {0.0, 0.5, 2.0}, Tolerances{1e-9, 1e-11});
        for (const auto& r : ev.snapshots) {
            EXPECT_NEAR(r.matrix.trace().real(), 1.0, 1e-8);
            EXPECT_NEAR(r.matrix.trace().imag(), 0.0, 1e-10);
            EXPECT_LT(hermiticity_error(r), 1e-9);
            EXPECT_GT(min_eigenvalue(r), -1e-8);
        }
        // Excitation-number sectors decouple without drive.
        if (!drive) {
            const auto& r = ev.snapshots.back();
            for (int i = 0; i < (1 << n); ++i)
                for (int j = 0; j < (1 << n); ++j)
                    if (__builtin_popcount(i) != __builtin_popcount(j) && rho0.matrix(i, j) == cplx(0.0))
                        EXPECT_EQ(r.matrix(i, j), cplx(0.0));
        }
    }
}

TEST(MasterProperty, GeneratorMatchesOracle) {
    std::mt19937_64 rng(303);
    for (int t = 0; t < kTrials; ++t) {
        const int n = 1 + t % 5;
        const SystemModel m = random_model(n, rng, t % 3 != 0);
        const DensityState rho{n, oracle::random_density(n, rng)};
        const Eigen::MatrixXcd ref = oracle::lindblad(m, rho.matrix);
        EXPECT_LT((liouvillian_apply(m, rho) - ref).cwiseAbs().maxCoeff(), 1e-11 * (1.0 + ref.cwiseAbs().maxCoeff()));
    }
}

TEST(McwfProperty, DeterministicAndWorkerIndependent) {
    std::mt19937_64 rng(404);
    for (int t = 0; t < 6; ++t) {
        const int n = 2 + t % 3;
        const SystemModel m = random_model(n, rng, t % 2 == 0);
        const PureState psi = incoherent_product_state(ExcitationSet::make(n, {0, n - 1}));
        TrajectoryConfig cfg;
        cfg.trajectories = 96;
        cfg.seed = rng();
        cfg.record_jumps = true;
        const auto a = run_ensemble(m, psi, 2.0, cfg, 0.1);
        cfg.workers = 3;
        const auto b = run_ensemble(m, psi, 2.0, cfg, 0.1);
        EXPECT_EQ(a.series.p_exc, b.series.p_exc);
        EXPECT_EQ(a.series.gamma_tot, b.series.gamma_tot);
        EXPECT_EQ(a.series.p_exc_err, b.series.p_exc_err);
        ASSERT_EQ(a.jump_logs.size(), b.jump_logs.size());
        for (std::size_t i = 0; i < a.jump_logs.size(); ++i) {
            ASSERT_EQ(a.jump_logs[i].size(), b.jump_logs[i].size());
            for (std::size_t k = 0; k < a.jump_logs[i].size(); ++k) {
                EXPECT_EQ(a.jump_logs[i][k].time, b.jump_logs[i][k].time);
                EXPECT_EQ(a.jump_logs[i][k].channel, b.jump_logs[i][k].channel);
            }
        }
        for (std::size_t k = 0; k < a.series.size(); ++k) {
            EXPECT_GE(a.series.p_exc[k], -1e-12);
            EXPECT_LE(a.series.p_exc[k], n + 1e-12);
        }
    }
}

TEST(CumulantProperty, MomentSymmetriesPreserved) {
    std::mt19937_64 rng(505);
    for (int t = 0; t < 10; ++t) {
        const int n = 4 + t % 5;
        SystemModel m = random_model(n, rng, false);
        std::vector<int> exc;
        for (int i = 0; i < n; ++i)
            if (rng() % 2) exc.push_back(i);
        const auto ev = evolve_cumulant(m, to_cumulant(ExcitationSet::make(n, exc)), {0.0, 0.7, 3.0},
                                        Tolerances{1e-9, 1e-11});
        for (const auto& s : ev.snapshots)
            for (int i = 0; i < n; ++i) {
                EXPECT_NEAR(s.data()[i].imag(), 0.0, 1e-9);
                for (int j = 0; j < n; ++j) {
                    if (j == i) continue;
                    EXPECT_NEAR(std::abs(s.coh(i, j) - std::conj(s.coh(j, i))), 0.0, 1e-9);
                    EXPECT_NEAR(s.pp(i, j), s.pp(j, i), 1e-9);
                    EXPECT_NEAR(s.data()[s.pp_at(i, j)].imag(), 0.0, 1e-9);
                    for (int k = 0; k < n; ++k) {
                        if (k == i || k == j) continue;
                        EXPECT_NEAR(std::abs(s.pcoh(i, j, k) - std::conj(s.pcoh(i, k, j))), 0.0, 1e-9);
                        EXPECT_NEAR(s.ppp(i, j, k), s.ppp(j, i, k), 1e-9);
                        EXPECT_NEAR(s.ppp(i, j, k), s.ppp(k, j, i), 1e-9);
                    }
                }
            }
    }
}

TEST(CumulantProperty, ClosureImplementationsAgree) {
    std::mt19937_64 rng(606);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const SpinOp kinds[3] = {SpinOp::Excited, SpinOp::Raise, SpinOp::Lower};
    for (int t = 0; t < kTrials; ++t) {
        const int n = 4 + t % 4;
        CumulantState s(n);
        for (Eigen::Index k = 0; k < s.data().size(); ++k) s.data()[k] = cplx(u(rng), u(rng));
        std::vector<int> atoms(n);
        for (int i = 0; i < n; ++i) atoms[i] = i;
        for (int rep = 0; rep < 40; ++rep) {
            std::shuffle(atoms.begin(), atoms.end(), rng);
            std::array<OpLabel, 4> ops;
            for (int q = 0; q < 4; ++q) ops[q] = OpLabel{atoms[q], kinds[rng() % 3]};
            const cplx ref = oracle::literal_closure(ops, s);
            EXPECT_LT(std::abs(cumulant_closure(ops, s) - ref), 1e-12 * (1.0 + std::abs(ref)));
        }
        // The specialized forms inside the equations of motion against the
        // general closure.
        struct General final : FourthMomentProvider {
            const CumulantState& s;
            explicit General(const CumulantState& st) : s(st) {}
            cplx ssss(int a, int b, int c, int d) const override {
                return cumulant_closure({OpLabel{a, SpinOp::Raise}, OpLabel{b, SpinOp::Lower},
                                         OpLabel{c, SpinOp::Raise}, OpLabel{d, SpinOp::Lower}},
                                        s);
            }
            cplx ppss(int a, int b, int c, int d) const override {
                return cumulant_closure({OpLabel{a, SpinOp::Excited}, OpLabel{b, SpinOp::Excited},
                                         OpLabel{c, SpinOp::Raise}, OpLabel{d, SpinOp::Lower}},
                                        s);
            }
        };
        const SystemModel m(coupling_matrices(build_lattice(1, {n}, 0.05 + 0.05 * (t % 5))));
        const Eigen::VectorXcd fast = cumulant_rhs(m, s).data();
        const Eigen::VectorXcd slow = cumulant_rhs(m, s, General(s)).data();
        EXPECT_LT((fast - slow).cwiseAbs().maxCoeff(), 1e-10 * (1.0 + slow.cwiseAbs().maxCoeff()));
    }
}
