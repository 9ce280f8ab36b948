#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "hades/hmc.hpp"
#include "reference.hpp"

using namespace hades;

namespace {

Matrix m1(double v) { return (Matrix(1, 1) << v).finished(); }

Matrix zero_grad(const ContinuousState& q) { return Matrix::Zero(q.sites(), q.symbols()); }

// U = 0.5 * ||q - 0.5||^2
std::pair<double, Matrix> bowl(const ContinuousState& q) {
  Matrix d = q.values().array() - 0.5;
  return {0.5 * d.squaredNorm(), d};
}

ContinuousState bowl_start(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix q(rows, cols);
  for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = 0.45 + 0.1 * uniform01(rng);
  return ContinuousState(q);
}

}  // namespace

TEST(Kinetic, Examples) {
  EXPECT_EQ(kinetic_energy(Matrix::Zero(2, 3), 1.0), 0.0);
  EXPECT_EQ(kinetic_energy((Matrix(1, 2) << 1, 1).finished(), 1.0), 1.0);
  EXPECT_EQ(kinetic_energy((Matrix(1, 2) << 3, 4).finished(), 2.0), 6.25);
}

TEST(Momentum, DeterministicPerStream) {
  Rng a = make_stream({1, 2}), b = make_stream({1, 2}), c = make_stream({1, 3});
  Momentum pa = sample_momentum(4, 20, a);
  EXPECT_EQ(pa.values, sample_momentum(4, 20, b).values);
  EXPECT_NE(pa.values, sample_momentum(4, 20, c).values);
}

TEST(Momentum, StandardNormalMoments) {
  Rng rng = make_stream({99});
  Matrix p = sample_momentum(1000, 100, rng).values;
  double mean = p.mean();
  double var = (p.array() - mean).square().sum() / static_cast<double>(p.size() - 1);
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(Leapfrog, FreeParticle) {
  auto r = leapfrog_step(ContinuousState(m1(0.5)), Momentum{m1(1.0)}, 0.1, zero_grad);
  EXPECT_NEAR(r.q.values()(0, 0), 0.6, 1e-15);
  EXPECT_EQ(r.p.values(0, 0), 1.0);
}

TEST(Leapfrog, ReflectsAtUpperBarrier) {
  auto r = leapfrog_step(ContinuousState(m1(0.95)), Momentum{m1(1.0)}, 0.1, zero_grad);
  EXPECT_NEAR(r.q.values()(0, 0), 0.95, 1e-12);
  EXPECT_EQ(r.p.values(0, 0), -1.0);
}

TEST(Leapfrog, MatchesExpandedUpdateWithoutBarriers) {
  Rng rng(5);
  auto q = bowl_start(rng, 3, 4);
  Matrix p = 0.1 * sample_momentum(3, 4, rng).values;
  const double eps = 0.05;
  auto [u0, g0] = bowl(q);
  auto r = leapfrog_eval(q, Momentum{p}, g0, bowl, HmcConfig{eps});
  Matrix expect_q = q.values() + eps * p - 0.5 * eps * eps * g0;
  Matrix g1 = r.q.values().array() - 0.5;
  Matrix expect_p = p - 0.5 * eps * (g0 + g1);
  EXPECT_LT((r.q.values() - expect_q).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((r.p.values - expect_p).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Leapfrog, TimeReversible) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    auto q0 = bowl_start(rng, 2, 5);
    Momentum p0{0.1 * sample_momentum(2, 5, rng).values};
    HmcConfig cfg;
    cfg.epsilon = 0.01;
    ContinuousState q = q0;
    Momentum p = p0;
    for (int t = 0; t < 100; ++t) {
      auto r = leapfrog_eval(q, p, bowl(q).second, bowl, cfg);
      q = r.q;
      p = r.p;
    }
    p.values = -p.values;
    for (int t = 0; t < 100; ++t) {
      auto r = leapfrog_eval(q, p, bowl(q).second, bowl, cfg);
      q = r.q;
      p = r.p;
    }
    EXPECT_LT((q.values() - q0.values()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((p.values + p0.values).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Leapfrog, ConservesEnergyOnBowl) {
  Rng rng(3);
  auto q = bowl_start(rng, 4, 20);
  Momentum p{0.1 * sample_momentum(4, 20, rng).values};
  HmcConfig cfg;
  cfg.epsilon = 0.01;
  auto [u, g] = bowl(q);
  const double h0 = u + kinetic_energy(p, 1.0);
  for (int t = 0; t < 1000; ++t) {
    auto r = leapfrog_eval(q, p, g, bowl, cfg);
    q = r.q;
    p = r.p;
    u = r.potential;
    g = r.grad;
  }
  EXPECT_LE(std::abs(u + kinetic_energy(p, 1.0) - h0), 0.01 * std::max(h0, 1.0));
}

TEST(Leapfrog, MonotoneFreeFall) {
  // constant negative dU/dq in one coordinate pushes q upward every step
  auto grad = [](const ContinuousState& q) {
    Matrix g = Matrix::Zero(q.sites(), q.symbols());
    g(0, 1) = -1.0;
    return g;
  };
  ContinuousState q((Matrix(1, 3) << 0.2, 0.05, 0.2).finished());
  Momentum p{Matrix::Zero(1, 3)};
  for (int t = 0; t < 10; ++t) {
    auto r = leapfrog_step(q, p, 0.1, grad);
    EXPECT_GT(r.q.values()(0, 1), q.values()(0, 1));
    EXPECT_EQ(r.q.values()(0, 0), 0.2);
    q = r.q;
    p = r.p;
  }
}

TEST(Barriers, HandDerivedCases) {
  auto check = [](double q, double p, double q_out, double p_out) {
    auto [qn, pn] = apply_virtual_barriers(m1(q), Momentum{m1(p)}, 64);
    EXPECT_NEAR(qn.values()(0, 0), q_out, 1e-15) << q;
    EXPECT_EQ(pn.values(0, 0), p_out) << q;
  };
  check(1.2, 0.4, 0.8, -0.4);
  check(-0.05, -0.3, 0.05, 0.3);
  check(2.4, 1.0, 0.4, 1.0);
  check(0.3, 7.0, 0.3, 7.0);
  check(0.0, -1.0, 0.0, -1.0);
  check(1.0, 1.0, 1.0, 1.0);
}

TEST(Barriers, OverflowIsReported) {
  EXPECT_THROW(apply_virtual_barriers(m1(200.0), Momentum{m1(1.0)}, 64), BarrierOverflow);
  EXPECT_THROW(apply_virtual_barriers(m1(std::nan("")), Momentum{m1(1.0)}, 64), BarrierOverflow);
  EXPECT_NO_THROW(apply_virtual_barriers(m1(5.5), Momentum{m1(1.0)}, 64));
}

TEST(Barriers, RandomizedInvariants) {
  Rng rng(17);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 20000; ++trial) {
    Matrix q(2, 3), p(2, 3);
    for (Eigen::Index i = 0; i < q.size(); ++i) {
      q.data()[i] = 3.0 * normal(rng);
      p.data()[i] = normal(rng);
    }
    const double k_before = kinetic_energy(p, 1.0);
    auto [qn, pn] = apply_virtual_barriers(q, Momentum{p}, 64);
    EXPECT_GE(qn.values().minCoeff(), 0.0);
    EXPECT_LE(qn.values().maxCoeff(), 1.0);
    const double k_after = kinetic_energy(pn, 1.0);
    EXPECT_EQ(0, std::memcmp(&k_before, &k_after, sizeof(double)));
    for (Eigen::Index i = 0; i < q.size(); ++i) {
      EXPECT_EQ(std::abs(pn.values.data()[i]), std::abs(p.data()[i]));
      if (q.data()[i] >= 0.0 && q.data()[i] <= 1.0) EXPECT_EQ(qn.values().data()[i], q.data()[i]);
    }
  }
}

TEST(Metropolis, EqualAndLowerEnergyAlwaysAccept) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    EXPECT_TRUE(metropolis_accept(3.0, 3.0, rng));
    EXPECT_TRUE(metropolis_accept(3.0, -2.0, rng));
  }
}

TEST(Metropolis, HalfProbabilityAtLn2) {
  Rng rng = make_stream({2024});
  int accepted = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) accepted += metropolis_accept(1.0, 1.0 + std::log(2.0), rng);
  EXPECT_NEAR(accepted / static_cast<double>(n), 0.5, 0.01);
}

TEST(Metropolis, NonFiniteRejectsAndConsumesOneDraw) {
  Rng a(4), b(4);
  EXPECT_FALSE(metropolis_accept(1.0, std::numeric_limits<double>::infinity(), a));
  EXPECT_FALSE(metropolis_accept(std::nan(""), 1.0, a));
  EXPECT_TRUE(metropolis_accept(1.0, 0.0, a));
  b.discard(3);
  EXPECT_EQ(a(), b());
}

TEST(Chain, ConstantModelAcceptsEveryStep) {
  auto m = reference::constant_model(4, 20, 0.3);
  HmcConfig cfg;
  Rng rng(8);
  auto r = hmc_chain(Sequence({0, 1, 2, 3}), 20, SurrogatePotential{m}, cfg, rng, true);
  EXPECT_EQ(r.proposals, cfg.trajectory_length);
  EXPECT_EQ(r.acceptances, cfg.trajectory_length);
  EXPECT_EQ(r.accepted.size(), static_cast<std::size_t>(cfg.trajectory_length));
  ASSERT_EQ(r.trace.size(), static_cast<std::size_t>(cfg.trajectory_length));
  for (const auto& s : r.trace) {
    EXPECT_TRUE(s.accepted);
    EXPECT_NEAR(s.h_after(), s.h_before(), 1e-9);
  }
}

TEST(Chain, DeterministicGivenStream) {
  auto m = SurrogateModel::initialize({4, 20, 16, 2}, 3);
  HmcConfig cfg;
  cfg.epsilon = 0.5;
  Rng a = make_stream({1, 2, 3}), b = make_stream({1, 2, 3});
  auto ra = hmc_chain(Sequence({5, 5, 5, 5}), 20, SurrogatePotential{m}, cfg, a);
  auto rb = hmc_chain(Sequence({5, 5, 5, 5}), 20, SurrogatePotential{m}, cfg, b);
  EXPECT_EQ(ra.accepted, rb.accepted);
  EXPECT_EQ(ra.acceptances, rb.acceptances);
}

TEST(Chain, OverflowRejectsAndContinues) {
  // A huge slope throws every step past the reflection cap.
  auto m = reference::constant_model(2, 4, 0.0);
  m.fitness_head().out.weight.setConstant(1e12);
  HmcConfig cfg;
  cfg.max_reflections = 1;
  Rng rng(2);
  auto r = hmc_chain(Sequence({0, 1}), 4, SurrogatePotential{m}, cfg, rng, true);
  EXPECT_EQ(r.proposals, cfg.trajectory_length);
  int overflows = 0;
  for (const auto& s : r.trace) overflows += s.barrier_overflow;
  EXPECT_GT(overflows, 0);
  EXPECT_LE(r.acceptances + overflows, cfg.trajectory_length);
}

TEST(Config, Validation) {
  HmcConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.epsilon = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.trajectory_length = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.mass = -1.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.max_reflections = 0;
  EXPECT_THROW(cfg.validate(), Error);
}
