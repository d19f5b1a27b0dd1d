#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "ltlfplan/common.hpp"
#include "ltlfplan/policy.hpp"
#include "ltlfplan/product.hpp"

namespace ltlfplan {

/// Bounded dual variable on the B-scaled simplex: lf, lc >= 0, lf + lc <= B.
struct LagrangePoint {
    Real lf = 0;  // multiplier of the specification constraint
    Real lc = 0;  // multiplier of the reward constraint
    Real B = 1;

    void check() const {
        if (lf < 0 || lc < 0 || lf + lc > B * (1 + 1e-12))
            throw std::invalid_argument("lagrange point off the B-simplex");
    }
};

/// Product geometry with the single reward
///   r_lambda(x,u) = r_o(x,u) + lf * (1-gamma)/gamma * r_f(x) + lc * r_c(x,u)
/// and the additive offset making  L(mu, lambda) = discounted value + offset.
struct ScalarizedPomdp {
    const ProductPomdp* base = nullptr;
    Vec reward;  // [x * U + u]
    Real gamma = 0;
    Real offset = 0;

    Real r(int x, int u) const { return reward[static_cast<std::size_t>(x) * base->num_actions + u]; }
};

/// Geometric-horizon Lagrangian as an infinite-horizon discounted problem.
inline ScalarizedPomdp scalarize(const ProductPomdp& p, const LagrangePoint& lam, Real delta,
                                 Real rho) {
    if (p.horizon.kind != HorizonKind::Geometric)
        throw WrongHorizon("scalarize requires a geometric horizon");
    lam.check();
    const Real g = p.horizon.gamma;
    const Real accept_coeff = lam.lf * (1 - g) / g;

    ScalarizedPomdp sp;
    sp.base = &p;
    sp.gamma = g;
    sp.reward.resize(static_cast<std::size_t>(p.num_states) * p.num_actions);
    for (int x = 0; x < p.num_states; ++x)
        for (int u = 0; u < p.num_actions; ++u)
            sp.reward[static_cast<std::size_t>(x) * p.num_actions + u] =
                p.r_obj(x, u) + accept_coeff * p.r_f(x) + lam.lc * p.r_con(x, u);

    Real accept0 = 0;
    for (int x = 0; x < p.num_states; ++x) accept0 += p.init[x] * p.r_f(x);
    sp.offset = -lam.lf * (1 - delta) - lam.lc * rho - accept_coeff * accept0;
    return sp;
}

// ---------------------------------------------------------------------------
// Exact solver: backward induction over the observation-history tree
// ---------------------------------------------------------------------------

struct ExactSolveOptions {
    std::size_t node_cap = 1000000;
    Real eps_trunc = 1e-9;  // geometric tail tolerance
};

struct ExactSolveResult {
    DecisionTreePolicy policy;
    Real value = 0;       // includes terminal reward and the constant term
    Real solver_gap = 0;  // truncation slack (0 for fixed horizons)
    std::size_t nodes = 0;
};

namespace detail {

struct TreeSolver {
    const ProductPomdp& p;
    const Vec& stage;          // [x*U+u]
    const Vec* terminal;       // [x], may be null
    Real discount;             // 1 for fixed horizon
    int last_t;                // recursion depth: t = 0..last_t
    const ExactSolveOptions& opts;
    DecisionTreePolicy tree;
    std::size_t nodes = 0;

    // Returns (value, node id) for the branch distribution d at time t.
    std::pair<Real, int> solve(const Vec& d, int t) {
        if (++nodes > opts.node_cap)
            throw BlowUp("exact solve exceeded node cap of " + std::to_string(opts.node_cap));
        const Real w = discount == 1.0 ? 1.0 : std::pow(discount, t);
        Real best_v = -std::numeric_limits<Real>::infinity();
        int best_u = 0;
        std::vector<int> best_children;

        Vec d2(p.num_states);
        for (int u = 0; u < p.num_actions; ++u) {
            Real v = 0;
            for (int x = 0; x < p.num_states; ++x)
                if (d[x] != 0) v += w * d[x] * stage[static_cast<std::size_t>(x) * p.num_actions + u];

            std::fill(d2.begin(), d2.end(), 0.0);
            for (int x = 0; x < p.num_states; ++x) {
                if (d[x] == 0) continue;
                for (auto [xn, pr] : p.trans[u].row(x)) d2[xn] += d[x] * pr;
            }

            std::vector<int> children(p.num_obs, -1);
            if (t == last_t) {
                if (terminal)
                    for (int x = 0; x < p.num_states; ++x)
                        if (d2[x] != 0) v += w * d2[x] * (*terminal)[x];
            } else {
                for (int o = 0; o < p.num_obs; ++o) {
                    Vec d3(p.num_states, 0.0);
                    Real mass = 0;
                    for (int x = 0; x < p.num_states; ++x) {
                        if (d2[x] == 0) continue;
                        d3[x] = d2[x] * p.obs.at(x, o);
                        mass += d3[x];
                    }
                    if (mass <= 0) continue;
                    auto [cv, cn] = solve(d3, t + 1);
                    v += cv;
                    children[o] = cn;
                }
            }
            if (v > best_v) {  // ties keep the lowest action index
                best_v = v;
                best_u = u;
                best_children = std::move(children);
            }
        }

        int id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(DecisionTreePolicy::Node{best_u, std::move(best_children)});
        return {best_v, id};
    }
};

/// Drops decision-tree nodes that lost the action argmax.
inline DecisionTreePolicy prune_tree(const DecisionTreePolicy& in) {
    DecisionTreePolicy out;
    out.root.assign(in.root.size(), -1);
    std::vector<int> renum(in.nodes.size(), -1);
    std::vector<int> stack;
    for (int r : in.root)
        if (r >= 0) stack.push_back(r);
    while (!stack.empty()) {
        int n = stack.back();
        stack.pop_back();
        if (renum[n] >= 0) continue;
        renum[n] = 0;
        for (int c : in.nodes[n].child)
            if (c >= 0) stack.push_back(c);
    }
    int next = 0;
    for (std::size_t n = 0; n < in.nodes.size(); ++n)
        if (renum[n] >= 0) renum[n] = next++;
    out.nodes.resize(next);
    for (std::size_t n = 0; n < in.nodes.size(); ++n) {
        if (renum[n] < 0) continue;
        DecisionTreePolicy::Node copy = in.nodes[n];
        for (int& c : copy.child) c = c >= 0 ? renum[c] : -1;
        out.nodes[renum[n]] = std::move(copy);
    }
    for (std::size_t o = 0; o < in.root.size(); ++o)
        out.root[o] = in.root[o] >= 0 ? renum[in.root[o]] : -1;
    return out;
}

inline ExactSolveResult solve_tree(const ProductPomdp& p, const Vec& stage, const Vec* terminal,
                                   Real discount, int last_t, Real constant,
                                   const ExactSolveOptions& opts) {
    detail::TreeSolver solver{p, stage, terminal, discount, last_t, opts};
    ExactSolveResult res;
    res.value = constant;
    solver.tree.root.assign(p.num_obs, -1);
    for (int o = 0; o < p.num_obs; ++o) {
        Vec d(p.num_states, 0.0);
        Real mass = 0;
        for (int x = 0; x < p.num_states; ++x) {
            if (p.init[x] == 0) continue;
            d[x] = p.init[x] * p.obs.at(x, o);
            mass += d[x];
        }
        if (mass <= 0) continue;
        auto [v, node] = solver.solve(d, 0);
        res.value += v;
        solver.tree.root[o] = node;
    }
    res.nodes = solver.nodes;
    res.policy = prune_tree(solver.tree);
    return res;
}

}  // namespace detail

/// Exact optimal pure policy of the Lagrangian on a fixed-horizon product:
/// stage reward r_o + lc * r_c, terminal reward lf * r_f, plus the constant
/// -lf (1 - delta) - lc * rho.
inline ExactSolveResult solve_exact_fixed(const ProductPomdp& p, const LagrangePoint& lam,
                                          Real delta, Real rho,
                                          const ExactSolveOptions& opts = {}) {
    if (p.horizon.kind != HorizonKind::Fixed)
        throw WrongHorizon("solve_exact_fixed requires a fixed horizon");
    lam.check();
    Vec stage(static_cast<std::size_t>(p.num_states) * p.num_actions);
    for (int x = 0; x < p.num_states; ++x)
        for (int u = 0; u < p.num_actions; ++u)
            stage[static_cast<std::size_t>(x) * p.num_actions + u] =
                p.r_obj(x, u) + lam.lc * p.r_con(x, u);
    Vec terminal(p.num_states);
    for (int x = 0; x < p.num_states; ++x) terminal[x] = lam.lf * p.r_f(x);
    Real constant = -lam.lf * (1 - delta) - lam.lc * rho;
    return detail::solve_tree(p, stage, &terminal, 1.0, p.horizon.T, constant, opts);
}

/// Exact maximization of a single custom stage/terminal reward on a fixed
/// horizon (brute-force OPT oracle for tiny instances).
inline ExactSolveResult solve_exact_reward(const ProductPomdp& p, const Vec& stage,
                                           const Vec* terminal,
                                           const ExactSolveOptions& opts = {}) {
    if (p.horizon.kind != HorizonKind::Fixed)
        throw WrongHorizon("solve_exact_reward requires a fixed horizon");
    return detail::solve_tree(p, stage, terminal, 1.0, p.horizon.T, 0.0, opts);
}

/// Truncated exact solve of a discounted scalarized model. The returned value
/// includes the scalarization offset; solver_gap bounds the truncation error
/// of both the value and the returned policy.
inline ExactSolveResult solve_exact_discounted(const ScalarizedPomdp& sp,
                                               const ExactSolveOptions& opts = {}) {
    const ProductPomdp& p = *sp.base;
    Real rmax = 0;
    for (Real r : sp.reward) rmax = std::max(rmax, std::abs(r));
    Real coeff = std::max(rmax / (1 - sp.gamma), 1.0);
    int depth = 1;
    while (std::pow(sp.gamma, depth) * coeff > opts.eps_trunc && depth < 100000) ++depth;

    ExactSolveResult res =
        detail::solve_tree(p, sp.reward, nullptr, sp.gamma, depth - 1, sp.offset, opts);
    res.solver_gap = 2 * std::pow(sp.gamma, depth) * coeff;
    return res;
}

// ---------------------------------------------------------------------------
// Goal-POMDP Lagrangian transformation
// ---------------------------------------------------------------------------

struct GoalLagrangian {
    ProductPomdp model;  // unique goal state appended; limbo step carries the lambda reward
    Real offset = 0;     // transformed value + offset = L(mu, lambda)
};

/// Folds the specification multiplier into a goal model: the goal set is
/// replaced by a unique absorbing goal g, and entering the old goal set costs
/// one extra step worth lambda * (r_f(X_{T+1}) - 2 + delta) before reaching g.
inline GoalLagrangian build_goal_lagrangian(const ProductPomdp& p, Real lambda, Real delta) {
    if (p.horizon.kind != HorizonKind::Goal)
        throw WrongHorizon("goal transformation requires a goal horizon");
    for (int x = 0; x < p.num_states; ++x) {
        if (p.horizon.is_goal_state(x)) continue;
        for (int u = 0; u < p.num_actions; ++u)
            if (p.r_obj(x, u) >= 0) throw NonNegativeReward(x, u);
    }

    GoalLagrangian out;
    ProductPomdp& t = out.model;
    const int g = p.num_states;  // fresh unique goal
    t.num_states = p.num_states + 1;
    t.num_actions = p.num_actions;
    t.num_obs = p.num_obs + 1;  // fresh observation emitted at g
    t.base_states = p.base_states;
    t.dfa_states = p.dfa_states;

    for (int u = 0; u < p.num_actions; ++u) {
        std::vector<std::vector<std::pair<int, Real>>> rows(t.num_states);
        for (int x = 0; x < p.num_states; ++x) {
            if (p.horizon.is_goal_state(x)) {
                rows[x].emplace_back(g, 1.0);
            } else {
                for (auto [xn, pr] : p.trans[u].row(x)) rows[x].emplace_back(xn, pr);
            }
        }
        rows[g].emplace_back(g, 1.0);
        t.trans.push_back(SparseMatrix::from_rows(t.num_states, t.num_states, rows));
    }
    {
        std::vector<std::vector<std::pair<int, Real>>> rows(t.num_states);
        for (int x = 0; x < p.num_states; ++x)
            for (auto [o, pr] : p.obs.row(x)) rows[x].emplace_back(o, pr);
        rows[g].emplace_back(p.num_obs, 1.0);
        t.obs = SparseMatrix::from_rows(t.num_states, t.num_obs, rows);
    }

    t.init = p.init;
    t.init.push_back(0.0);
    t.reward_obj.assign(static_cast<std::size_t>(t.num_states) * t.num_actions, 0.0);
    t.reward_con.assign(static_cast<std::size_t>(t.num_states) * t.num_actions, 0.0);
    for (int x = 0; x < p.num_states; ++x)
        for (int u = 0; u < p.num_actions; ++u) {
            Real r = p.horizon.is_goal_state(x) ? lambda * (p.r_f(x) - 2 + delta) : p.r_obj(x, u);
            t.reward_obj[static_cast<std::size_t>(x) * t.num_actions + u] = r;
        }

    t.accept.assign(t.num_states, 0);
    for (int x = 0; x < p.num_states; ++x) t.accept[x] = p.accept[x];
    t.horizon = HorizonModel::goal({g});
    t.bounds = p.bounds;
    out.offset = lambda;  // total reward = L(mu, lambda) - lambda
    return out;
}

/// Discounted view of a goal model for approximate solving: the unique goal
/// is absorbing with zero reward, so the discounted value approaches the
/// undiscounted goal total as gamma -> 1.
inline ScalarizedPomdp discounted_goal_view(const ProductPomdp& goal_model, Real gamma) {
    if (goal_model.horizon.kind != HorizonKind::Goal)
        throw WrongHorizon("discounted view requires a goal model");
    ScalarizedPomdp sp;
    sp.base = &goal_model;
    sp.gamma = gamma;
    sp.reward = goal_model.reward_obj;
    sp.offset = 0;
    return sp;
}

}  // namespace ltlfplan
