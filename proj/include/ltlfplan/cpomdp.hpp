#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "ltlfplan/common.hpp"
#include "ltlfplan/pbvi.hpp"
#include "ltlfplan/policy.hpp"
#include "ltlfplan/product.hpp"
#include "ltlfplan/solve.hpp"

namespace ltlfplan {

// ---------------------------------------------------------------------------
// Lagrangian and the exponentiated-gradient dual update
// ---------------------------------------------------------------------------

/// L(mu, lambda) = R_o + lc (R_c - rho) + lf (R_f - 1 + delta), from channel
/// values that are already available (exact or estimated).
inline Real lagrangian(const ChannelValues& v, const LagrangePoint& lam, Real delta, Real rho) {
    return v.obj + lam.lc * (v.con - rho) + lam.lf * (v.accept - 1 + delta);
}

/// One multiplicative-weights step on the B-simplex. Both multipliers share
/// one normalizer, which is what keeps the iterate on the simplex exactly.
inline LagrangePoint eg_step(const LagrangePoint& lam, Real p_hat, Real r_hat, Real eta,
                             Real delta, Real rho) {
    const Real ef = std::exp(-eta * (p_hat - 1 + delta));
    const Real ec = std::exp(-eta * (r_hat - rho));
    const Real denom = lam.B + lam.lf * (ef - 1) + lam.lc * (ec - 1);
    return LagrangePoint{lam.B * lam.lf * ef / denom, lam.B * lam.lc * ec / denom, lam.B};
}

// ---------------------------------------------------------------------------
// Monte Carlo evaluation
// ---------------------------------------------------------------------------

struct McEstimate {
    Real mean = 0;
    Real hoeffding = 0;  // 99% confidence halfwidth under the nominal range
};

inline Real hoeffding_halfwidth(Real range, int n, Real alpha = 0.01) {
    return range * std::sqrt(std::log(2.0 / alpha) / (2.0 * n));
}

inline Real channel_range(const ProductPomdp& p, Channel c) {
    switch (c) {
        case Channel::Accept: return 1.0;
        case Channel::Constraint: return std::max(p.bounds.R_max, 1e-12);
        case Channel::Objective: return std::max(p.bounds.R_m, 1e-12);
    }
    return 1.0;
}

/// Mean of N seeded rollouts. `exec_model` lets a policy solved on a
/// transformed geometry (e.g. the goal gadget) act while the rollout itself
/// runs on `p`.
inline McEstimate eval_mc(const ProductPomdp& p, const PurePolicy& pol, Channel channel, int n,
                          std::uint64_t seed, const ProductPomdp* exec_model = nullptr) {
    auto ex = make_executor(exec_model ? *exec_model : p, pol);
    Rng rng(seed);
    Real sum = 0;
    for (int i = 0; i < n; ++i) {
        RolloutValues v = product_rollout(p, *ex, rng);
        switch (channel) {
            case Channel::Objective: sum += v.obj; break;
            case Channel::Constraint: sum += v.con; break;
            case Channel::Accept: sum += v.accept; break;
        }
    }
    return {sum / n, hoeffding_halfwidth(channel_range(p, channel), n)};
}

/// Mixed policies are evaluated as the weighted sum of per-atom estimates
/// (N rollouts per atom).
inline McEstimate eval_mc(const ProductPomdp& p, const MixedPolicy& mix, Channel channel, int n,
                          std::uint64_t seed) {
    mix.check();
    McEstimate out;
    for (std::size_t i = 0; i < mix.policies.size(); ++i) {
        McEstimate e = eval_mc(p, *mix.policies[i], channel, n, seed + 0x9e3779b97f4a7c15ULL * i);
        out.mean += mix.weights[i] * e.mean;
        out.hoeffding += mix.weights[i] * e.hoeffding;
    }
    return out;
}

// ---------------------------------------------------------------------------
// EG-CPOMDP
// ---------------------------------------------------------------------------

struct EgConfig {
    int K = 64;
    Real B = 3;
    std::optional<Real> eta;  // default: sqrt(log 3 / (2 K B^2 G^2))
    Real delta = 0.1;         // accept probability threshold is 1 - delta
    Real rho = 0;             // constraint reward threshold
    int n_eval = 2000;        // MC samples per iteration
    std::uint64_t seed = 0;
};

struct IterRecord {
    int k = 0;
    Real lf = 0, lc = 0;
    Real p_hat = 0;    // accept estimate
    Real r_hat = 0;    // constraint estimate
    Real obj_hat = 0;  // objective estimate
    Real solver_gap = 0;
    Real eps_con = 0, eps_accept = 0;  // estimator halfwidths
};

struct EgTrace {
    std::vector<IterRecord> rows;
    EgConfig cfg;
    RewardBounds bounds;
    Real eta = 0;
};

struct GapCertificate {
    Real reward_gap = 0;       // 2 B G sqrt(2 log3 / K) (+ eps_tot when approximate)
    Real feasibility_gap = 0;  // (R_m - R_lb + reward_gap) / B
    Real eps_bp = 0;
    Real eps_est = 0;
    Real R_lb = 0;  // stands in for the unknown optimal feasible reward
    Real R_m = 0;
    Real G = 1;
    Real eta = 0;
    int K = 0;
    Real B = 0;
    bool conservative = true;  // R_lb substitutes for the true optimum
};

struct OptOutcome {
    PurePolicyPtr policy;
    Real solver_gap = 0;
    /// Geometry the policy executes on when it differs from the planning
    /// product (goal gadget); rollouts still run on the planning product.
    std::shared_ptr<const ProductPomdp> exec_model;
};

struct ChannelEstimates {
    Real obj = 0, con = 0, accept = 0;
    Real eps_con = 0, eps_accept = 0;
};

using OptHook = std::function<OptOutcome(const ProductPomdp&, const LagrangePoint&, Real delta,
                                         Real rho)>;
using EvalHook = std::function<ChannelEstimates(const ProductPomdp&, const OptOutcome&, int k)>;

struct EgResult {
    MixedPolicy mu_bar;
    LagrangePoint lambda_bar;
    GapCertificate certificate;
    EgTrace trace;
};

inline Real default_eta(int K, Real B, Real G) {
    return std::sqrt(std::log(3.0) / (2.0 * K * B * B * G * G));
}

/// The EG-CPOMDP loop: K best responses against exponentiated-gradient dual
/// iterates, returning the uniform mixture, the dual average, and the gap
/// certificate.
inline EgResult run_eg(const ProductPomdp& p, const EgConfig& cfg, const OptHook& opt,
                       const EvalHook& eval) {
    if (cfg.K < 1) throw IterationBudget("K must be at least 1");
    const Real G = p.bounds.G;
    const Real eta = cfg.eta.value_or(default_eta(cfg.K, cfg.B, G));

    EgResult res;
    res.trace.cfg = cfg;
    res.trace.bounds = p.bounds;
    res.trace.eta = eta;

    LagrangePoint lam{cfg.B / 3, cfg.B / 3, cfg.B};
    Real sum_lf = 0, sum_lc = 0;

    for (int k = 1; k <= cfg.K; ++k) {
        OptOutcome out = opt(p, lam, cfg.delta, cfg.rho);
        ChannelEstimates est = eval(p, out, k);

        IterRecord row;
        row.k = k;
        row.lf = lam.lf;
        row.lc = lam.lc;
        row.p_hat = est.accept;
        row.r_hat = est.con;
        row.obj_hat = est.obj;
        row.solver_gap = out.solver_gap;
        row.eps_con = est.eps_con;
        row.eps_accept = est.eps_accept;
        res.trace.rows.push_back(row);

        res.mu_bar.policies.push_back(out.policy);
        sum_lf += lam.lf;
        sum_lc += lam.lc;
        lam = eg_step(lam, est.accept, est.con, eta, cfg.delta, cfg.rho);
    }

    res.mu_bar.weights.assign(cfg.K, 1.0 / cfg.K);
    res.lambda_bar = LagrangePoint{sum_lf / cfg.K, sum_lc / cfg.K, cfg.B};

    GapCertificate& c = res.certificate;
    c.K = cfg.K;
    c.B = cfg.B;
    c.G = G;
    c.eta = eta;
    Real obj_sum = 0;
    for (const auto& row : res.trace.rows) {
        c.eps_bp = std::max(c.eps_bp, row.solver_gap);
        c.eps_est = std::max(c.eps_est, 2 * cfg.B * std::max(row.eps_con, row.eps_accept));
        obj_sum += row.obj_hat;
    }
    const Real eps_tot = c.eps_bp + 2 * c.eps_est;
    c.reward_gap = 2 * cfg.B * G * std::sqrt(2 * std::log(3.0) / cfg.K) + eps_tot;
    c.R_lb = obj_sum / cfg.K;
    c.R_m = p.bounds.R_m;
    c.feasibility_gap = (c.R_m - c.R_lb + c.reward_gap) / cfg.B;
    return res;
}

// ---- built-in hooks -------------------------------------------------------

inline OptHook make_exact_opt_hook(const ExactSolveOptions& opts = {}) {
    return [opts](const ProductPomdp& p, const LagrangePoint& lam, Real delta,
                  Real rho) -> OptOutcome {
        ExactSolveResult r;
        if (p.horizon.kind == HorizonKind::Fixed) {
            r = solve_exact_fixed(p, lam, delta, rho, opts);
        } else if (p.horizon.kind == HorizonKind::Geometric) {
            r = solve_exact_discounted(scalarize(p, lam, delta, rho), opts);
        } else {
            throw WrongHorizon("exact OPT hook supports fixed and geometric horizons");
        }
        return {std::make_shared<const PurePolicy>(std::move(r.policy)), r.solver_gap, nullptr};
    };
}

inline OptHook make_pbvi_opt_hook(const PbviConfig& cfg = {}, Real goal_gamma = 0.999) {
    return [cfg, goal_gamma](const ProductPomdp& p, const LagrangePoint& lam, Real delta,
                             Real rho) -> OptOutcome {
        if (p.horizon.kind == HorizonKind::Geometric) {
            ScalarizedPomdp sp = scalarize(p, lam, delta, rho);
            PbviResult r = solve_pbvi(sp, cfg);
            return {std::make_shared<const PurePolicy>(std::move(r.policy)), r.gap, nullptr};
        }
        if (p.horizon.kind == HorizonKind::Goal) {
            // Specification multiplier only; the goal setting carries no
            // reward constraint.
            auto gl = std::make_shared<GoalLagrangian>(build_goal_lagrangian(p, lam.lf, delta));
            ScalarizedPomdp sp = discounted_goal_view(gl->model, goal_gamma);
            PbviResult r = solve_pbvi(sp, cfg);
            auto model = std::shared_ptr<const ProductPomdp>(gl, &gl->model);
            return {std::make_shared<const PurePolicy>(std::move(r.policy)), r.gap, model};
        }
        throw WrongHorizon("PBVI OPT hook supports geometric and goal horizons");
    };
}

inline EvalHook make_exact_eval_hook(const ExactEvalOptions& opts = {}) {
    return [opts](const ProductPomdp& p, const OptOutcome& out, int) -> ChannelEstimates {
        if (out.exec_model)
            throw WrongHorizon("exact evaluation of transformed-geometry policies is unsupported");
        ChannelValues v = eval_policy_exact_all(p, *out.policy, opts);
        return {v.obj, v.con, v.accept, v.truncation, v.truncation};
    };
}

inline EvalHook make_mc_eval_hook(int n_eval, std::uint64_t seed) {
    return [n_eval, seed](const ProductPomdp& p, const OptOutcome& out, int k) -> ChannelEstimates {
        const ProductPomdp* exec = out.exec_model ? out.exec_model.get() : nullptr;
        auto ex = make_executor(exec ? *exec : p, *out.policy);
        Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(k)));
        Real obj = 0, con = 0, acc = 0;
        for (int i = 0; i < n_eval; ++i) {
            RolloutValues v = product_rollout(p, *ex, rng);
            obj += v.obj;
            con += v.con;
            acc += v.accept;
        }
        ChannelEstimates est;
        est.obj = obj / n_eval;
        est.con = con / n_eval;
        est.accept = acc / n_eval;
        est.eps_con = hoeffding_halfwidth(channel_range(p, Channel::Constraint), n_eval);
        est.eps_accept = hoeffding_halfwidth(channel_range(p, Channel::Accept), n_eval);
        return est;
    };
}

// ---------------------------------------------------------------------------
// Diagnostics on the trace
// ---------------------------------------------------------------------------

/// Per-constraint average slack over the iterations; by linearity this equals
/// the slack of the uniform mixture.
struct FeasibilityReport {
    Real accept_slack = 0;  // mean of (p_hat_k - 1 + delta)
    Real con_slack = 0;     // mean of (r_hat_k - rho)
};

inline FeasibilityReport feasibility_report(const EgTrace& trace) {
    if (trace.rows.empty()) throw IterationBudget("empty trace");
    FeasibilityReport rep;
    for (const auto& r : trace.rows) {
        rep.accept_slack += r.p_hat - 1 + trace.cfg.delta;
        rep.con_slack += r.r_hat - trace.cfg.rho;
    }
    rep.accept_slack /= static_cast<Real>(trace.rows.size());
    rep.con_slack /= static_cast<Real>(trace.rows.size());
    return rep;
}

/// Realized average duality gap of the dual play:
///   (1/K) sum_k L(mu_k, lambda_k) - min_lambda (1/K) sum_k L(mu_k, lambda),
/// the quantity the no-regret bound 2 B G sqrt(2 log3 / K) controls. The
/// minimum over the B-simplex is attained at one of its three vertices.
inline Real realized_duality_gap(const EgTrace& trace) {
    const Real B = trace.cfg.B, delta = trace.cfg.delta, rho = trace.cfg.rho;
    Real played = 0, mean_obj = 0, mean_pa = 0, mean_ra = 0;
    for (const auto& r : trace.rows) {
        played += r.obj_hat + r.lc * (r.r_hat - rho) + r.lf * (r.p_hat - 1 + delta);
        mean_obj += r.obj_hat;
        mean_pa += r.p_hat - 1 + delta;
        mean_ra += r.r_hat - rho;
    }
    const Real k = static_cast<Real>(trace.rows.size());
    played /= k;
    mean_obj /= k;
    mean_pa /= k;
    mean_ra /= k;
    Real best = std::min({mean_obj, mean_obj + B * mean_pa, mean_obj + B * mean_ra});
    return played - best;
}

// ---------------------------------------------------------------------------
// Support reduction (basic feasible solution of the mixture LP)
// ---------------------------------------------------------------------------

struct LpResult {
    bool feasible = false;
    Real value = 0;
    Vec x;
};

/// Dense two-phase primal simplex for  max c.x  s.t.  A x = b, x >= 0.
/// Bland's rule; sized for a handful of rows.
inline LpResult simplex_max(std::vector<Vec> A, Vec b, Vec c) {
    const int m = static_cast<int>(A.size());
    const int n = static_cast<int>(c.size());
    for (int i = 0; i < m; ++i)
        if (b[i] < 0) {
            b[i] = -b[i];
            for (Real& v : A[i]) v = -v;
        }

    const int total = n + m;  // artificials appended
    std::vector<Vec> t(m, Vec(total + 1, 0.0));
    std::vector<int> basis(m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) t[i][j] = A[i][j];
        t[i][n + i] = 1.0;
        t[i][total] = b[i];
        basis[i] = n + i;
    }

    constexpr Real tol = 1e-11;
    auto pivot = [&](int row, int col) {
        Real piv = t[row][col];
        for (Real& v : t[row]) v /= piv;
        for (int i = 0; i < m; ++i) {
            if (i == row || std::abs(t[i][col]) < 1e-15) continue;
            Real f = t[i][col];
            for (int j = 0; j <= total; ++j) t[i][j] -= f * t[row][j];
        }
        basis[row] = col;
    };

    auto solve_phase = [&](const Vec& cost, int allowed_cols) -> bool {
        for (int iter = 0; iter < 100000; ++iter) {
            // reduced costs: c_j - c_B . B^-1 A_j, Bland's smallest-index rule
            int enter = -1;
            for (int j = 0; j < allowed_cols && enter < 0; ++j) {
                Real rc = cost[j];
                for (int i = 0; i < m; ++i) rc -= cost[basis[i]] * t[i][j];
                if (rc > tol) enter = j;
            }
            if (enter < 0) return true;  // optimal
            int leave = -1;
            Real best_ratio = 0;
            for (int i = 0; i < m; ++i) {
                if (t[i][enter] <= tol) continue;
                Real ratio = t[i][total] / t[i][enter];
                if (leave < 0 || ratio < best_ratio - 1e-15 ||
                    (std::abs(ratio - best_ratio) <= 1e-15 && basis[i] < basis[leave])) {
                    leave = i;
                    best_ratio = ratio;
                }
            }
            if (leave < 0) return false;  // unbounded
            pivot(leave, enter);
        }
        throw IterationBudget("simplex iteration cap exceeded");
    };

    // phase 1: drive artificials to zero
    Vec cost1(total, 0.0);
    for (int j = n; j < total; ++j) cost1[j] = -1.0;
    solve_phase(cost1, total);
    Real art = 0;
    for (int i = 0; i < m; ++i)
        if (basis[i] >= n) art += t[i][total];
    LpResult res;
    if (art > 1e-8) return res;  // infeasible

    // pivot leftover degenerate artificials out where possible
    for (int i = 0; i < m; ++i) {
        if (basis[i] < n) continue;
        for (int j = 0; j < n; ++j)
            if (std::abs(t[i][j]) > tol) {
                pivot(i, j);
                break;
            }
    }

    Vec cost2(total, 0.0);
    for (int j = 0; j < n; ++j) cost2[j] = c[j];
    if (!solve_phase(cost2, n)) return res;  // unbounded (cannot happen on the simplex)

    res.feasible = true;
    res.x.assign(n, 0.0);
    for (int i = 0; i < m; ++i)
        if (basis[i] < n) res.x[basis[i]] = t[i][total];
    for (int j = 0; j < n; ++j) res.value += c[j] * res.x[j];
    return res;
}

struct ReducedPolicy {
    MixedPolicy policy;
    bool lp_feasible = false;
    Real lp_value = 0;
};

/// Re-weights the K iterates by a basic feasible solution of
///   max sum w_k R_o(mu_k)
///   s.t. sum w_k R_c(mu_k) >= rho - slack_c,
///        sum w_k R_f(mu_k) >= 1 - delta - slack_f,
///        sum w_k = 1, w >= 0,
/// so the support has size at most three. Default slacks make the uniform
/// weights feasible; when the LP is infeasible under explicit slacks, the
/// uniform mixture is returned with lp_feasible = false.
inline ReducedPolicy reduce_support(const EgResult& run, Real rho, Real delta,
                                    std::optional<Real> slack = std::nullopt) {
    const auto& rows = run.trace.rows;
    const int K = static_cast<int>(rows.size());
    ReducedPolicy out;
    out.policy = run.mu_bar;

    Real mean_c = 0, mean_f = 0;
    for (const auto& r : rows) {
        mean_c += r.r_hat;
        mean_f += r.p_hat;
    }
    mean_c /= K;
    mean_f /= K;
    Real slack_c = slack ? *slack : std::max(0.0, rho - mean_c) + 1e-9;
    Real slack_f = slack ? *slack : std::max(0.0, (1 - delta) - mean_f) + 1e-9;

    // rows: constraint channel - s1 = rho - slack_c ; accept - s2 = 1 - delta
    // - slack_f ; total weight = 1
    std::vector<Vec> A(3, Vec(K + 2, 0.0));
    Vec b(3), c(K + 2, 0.0);
    for (int k = 0; k < K; ++k) {
        A[0][k] = rows[k].r_hat;
        A[1][k] = rows[k].p_hat;
        A[2][k] = 1.0;
        c[k] = rows[k].obj_hat;
    }
    A[0][K] = -1.0;
    A[1][K + 1] = -1.0;
    b[0] = rho - slack_c;
    b[1] = (1 - delta) - slack_f;
    b[2] = 1.0;

    LpResult lp = simplex_max(A, b, c);
    if (!lp.feasible) return out;

    MixedPolicy reduced;
    Real total = 0;
    for (int k = 0; k < K; ++k)
        if (lp.x[k] > 1e-12) {
            reduced.policies.push_back(run.mu_bar.policies[k]);
            reduced.weights.push_back(lp.x[k]);
            total += lp.x[k];
        }
    for (Real& w : reduced.weights) w /= total;
    out.policy = std::move(reduced);
    out.lp_feasible = true;
    out.lp_value = lp.value;
    return out;
}

}  // namespace ltlfplan
