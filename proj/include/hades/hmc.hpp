#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hades/rng.hpp"
#include "hades/seq_core.hpp"
#include "hades/surrogate.hpp"

namespace hades {

enum class BarrierMode { reflect, clamp };
enum class ContinueFrom { continuous, discrete };

struct HmcConfig {
  double epsilon = 0.1;
  int trajectory_length = 16;
  double mass = 1.0;
  int max_reflections = 64;
  int chains = 128;
  /// `clamp` drops the reflective barriers and clips positions into [0, 1].
  BarrierMode barriers = BarrierMode::reflect;
  ContinueFrom continue_from = ContinueFrom::continuous;
  bool resample_every_step = false;
  /// Emit every discretized proposal, accepted or not.
  bool keep_rejected = false;

  void validate() const {
    if (!(epsilon > 0)) throw Error("hmc.epsilon must be > 0");
    if (trajectory_length < 1) throw Error("hmc.trajectory_length must be >= 1");
    if (!(mass > 0)) throw Error("hmc.mass must be > 0");
    if (max_reflections < 1) throw Error("hmc.max_reflections must be >= 1");
    if (chains < 1) throw Error("hmc.chains must be >= 1");
  }
};

/// Raised when a coordinate needs more reflections than allowed in one step.
class BarrierOverflow : public Error {
 public:
  using Error::Error;
};

inline double kinetic_energy(const Matrix& p, double mass) { return p.squaredNorm() / (2.0 * mass); }
inline double kinetic_energy(const Momentum& p, double mass) { return kinetic_energy(p.values, mass); }

inline Momentum sample_momentum(Eigen::Index sites, Eigen::Index symbols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix p(sites, symbols);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = normal(rng);
  return {std::move(p)};
}

/// Reflects every out-of-range coordinate back into [0, 1], flipping the sign
/// of its momentum once per reflection. In-range coordinates are untouched.
inline void reflect_in_place(Matrix& q, Matrix& p, int max_reflections) {
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    double& x = q.data()[i];
    double& v = p.data()[i];
    if (!std::isfinite(x)) throw BarrierOverflow("virtual barrier: non-finite position");
    int n = 0;
    while (x < 0.0 || x > 1.0) {
      if (++n > max_reflections)
        throw BarrierOverflow("virtual barrier: more than " + std::to_string(max_reflections) + " reflections");
      v = -v;
      x = x > 1.0 ? 2.0 - x : -x;
    }
  }
}

inline std::pair<ContinuousState, Momentum> apply_virtual_barriers(Matrix q_raw, Momentum p_half,
                                                                   int max_reflections) {
  reflect_in_place(q_raw, p_half.values, max_reflections);
  return {ContinuousState(std::move(q_raw)), std::move(p_half)};
}

inline void clamp_in_place(Matrix& q) {
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    double& x = q.data()[i];
    if (!std::isfinite(x)) throw BarrierOverflow("clamp: non-finite position");
    x = std::clamp(x, 0.0, 1.0);
  }
}

struct LeapfrogResult {
  ContinuousState q;
  Momentum p;
  /// Half-step momentum after any reflections.
  Momentum p_half;
  double potential = 0.0;
  Matrix grad;
};

/// One leapfrog step with barriers applied between the position update and the
/// second half-kick. `eval(q)` returns (U(q), grad U(q)); `grad_q` is grad U at
/// the starting position.
template <class EvalFn>
LeapfrogResult leapfrog_eval(const ContinuousState& q, const Momentum& p, const Matrix& grad_q, EvalFn&& eval,
                             const HmcConfig& cfg) {
  const double eps = cfg.epsilon;
  Matrix p_half = p.values - (0.5 * eps) * grad_q;
  Matrix q_raw = q.values() + (eps / cfg.mass) * p_half;
  if (cfg.barriers == BarrierMode::reflect)
    reflect_in_place(q_raw, p_half, cfg.max_reflections);
  else
    clamp_in_place(q_raw);
  ContinuousState q_next(std::move(q_raw));
  auto [u_next, g_next] = eval(q_next);
  Matrix p_next = p_half - (0.5 * eps) * g_next;
  return {std::move(q_next), Momentum{std::move(p_next)}, Momentum{std::move(p_half)}, u_next, std::move(g_next)};
}

/// Convenience form taking only a gradient function.
template <class GradFn>
LeapfrogResult leapfrog_step(const ContinuousState& q, const Momentum& p, double epsilon, GradFn&& grad_u,
                             const HmcConfig& base = {}) {
  HmcConfig cfg = base;
  cfg.epsilon = epsilon;
  return leapfrog_eval(
      q, p, grad_u(q),
      [&](const ContinuousState& x) { return std::pair<double, Matrix>(std::nan(""), grad_u(x)); }, cfg);
}

/// Metropolis test on total energies. Always consumes exactly one uniform draw.
inline bool metropolis_accept(double h_current, double h_proposed, Rng& rng) {
  double u = uniform01(rng);
  if (!std::isfinite(h_current) || !std::isfinite(h_proposed)) return false;
  double delta = h_current - h_proposed;
  if (delta >= 0.0) return true;
  return u < std::exp(delta);
}

/// Potential U(q) = -log sigmoid(f(q)) backed by a surrogate.
struct SurrogatePotential {
  const SurrogateModel& model;

  std::pair<double, Matrix> evaluate(const ContinuousState& q) const { return potential_and_gradient(model, q); }
  double energy(const ContinuousState& q) const { return potential_energy(model, q); }
};

struct HmcState {
  ContinuousState q;
  Momentum p;
  double potential = 0.0;
  double kinetic = 0.0;
  Matrix grad;

  double hamiltonian() const { return potential + kinetic; }
};

struct TraceStep {
  int t = 0;
  double potential_before = 0.0;
  double kinetic_before = 0.0;
  double potential_after = 0.0;
  double kinetic_after = 0.0;
  bool accepted = false;
  bool barrier_overflow = false;
  Sequence proposal;

  double h_before() const { return potential_before + kinetic_before; }
  double h_after() const { return potential_after + kinetic_after; }
};

struct ChainResult {
  std::vector<Sequence> accepted;
  int proposals = 0;
  int acceptances = 0;
  std::vector<TraceStep> trace;
};

/// Runs one trajectory of `trajectory_length` steps from the one-hot encoding
/// of `start`. Accepted discretized proposals are returned in order.
template <class Potential>
ChainResult hmc_chain(const Sequence& start, std::size_t alphabet_size, const Potential& potential,
                      const HmcConfig& cfg, Rng& rng, bool record_trace = false) {
  cfg.validate();
  const auto sites = static_cast<Eigen::Index>(start.size());
  const auto symbols = static_cast<Eigen::Index>(alphabet_size);
  auto eval = [&](const ContinuousState& x) { return potential.evaluate(x); };

  HmcState state;
  state.q = encode_one_hot(start, alphabet_size);
  std::tie(state.potential, state.grad) = eval(state.q);
  state.p = sample_momentum(sites, symbols, rng);
  state.kinetic = kinetic_energy(state.p, cfg.mass);

  auto resample = [&] {
    state.p = sample_momentum(sites, symbols, rng);
    state.kinetic = kinetic_energy(state.p, cfg.mass);
  };

  ChainResult out;
  for (int t = 0; t < cfg.trajectory_length; ++t) {
    TraceStep step;
    step.t = t;
    step.potential_before = state.potential;
    step.kinetic_before = state.kinetic;
    ++out.proposals;

    std::optional<LeapfrogResult> next;
    try {
      next = leapfrog_eval(state.q, state.p, state.grad, eval, cfg);
    } catch (const BarrierOverflow&) {
      step.barrier_overflow = true;
      step.potential_after = std::numeric_limits<double>::infinity();
      step.kinetic_after = std::numeric_limits<double>::infinity();
      step.proposal = discretize(state.q);
      if (record_trace) out.trace.push_back(step);
      resample();
      continue;
    }

    Sequence proposal = discretize(next->q);
    ContinuousState proposal_state = encode_one_hot(proposal, alphabet_size);
    step.potential_after = potential.energy(proposal_state);
    step.kinetic_after = kinetic_energy(next->p, cfg.mass);
    step.accepted = metropolis_accept(step.h_before(), step.h_after(), rng);
    step.proposal = proposal;

    if (step.accepted || cfg.keep_rejected) out.accepted.push_back(proposal);
    if (step.accepted) {
      ++out.acceptances;
      if (cfg.continue_from == ContinueFrom::continuous) {
        state.q = std::move(next->q);
        state.potential = next->potential;
        state.grad = std::move(next->grad);
      } else {
        state.q = std::move(proposal_state);
        std::tie(state.potential, state.grad) = eval(state.q);
      }
      state.p = std::move(next->p);
      state.kinetic = step.kinetic_after;
      if (cfg.resample_every_step) resample();
    } else {
      resample();
    }
    if (record_trace) out.trace.push_back(std::move(step));
  }
  return out;
}

}  // namespace hades
