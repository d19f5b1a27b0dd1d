#pragma once

#include <string>
#include <vector>

#include "ltlfplan/common.hpp"
#include "ltlfplan/dfa.hpp"
#include "ltlfplan/model.hpp"

namespace ltlfplan {

/// Synchronous composition of a labeled POMDP and a DFA. Product states pack
/// as x = s * |Q| + q; the automaton advances on the label of the state being
/// left, so Q_{T+1} has consumed L(S_T) and the accept reward reads X_{T+1}.
struct ProductPomdp {
    int num_states = 0;
    int num_actions = 0;
    int num_obs = 0;
    int base_states = 0;
    int dfa_states = 0;
    std::vector<SparseMatrix> trans;  // per action: X x X
    SparseMatrix obs;                 // X x O
    Vec init;
    Vec reward_obj;                   // [x * U + u]
    Vec reward_con;
    std::vector<char> accept;         // r_f(x)
    HorizonModel horizon;             // goal set over product states
    RewardBounds bounds;
    bool pruned = false;
    std::vector<int> orig_index;      // pruned x -> unpruned packed index

    int pack(int s, int q) const { return s * dfa_states + q; }
    int s_of(int x) const { return x / dfa_states; }
    int q_of(int x) const { return x % dfa_states; }

    Real r_obj(int x, int u) const { return reward_obj[static_cast<std::size_t>(x) * num_actions + u]; }
    Real r_con(int x, int u) const { return reward_con[static_cast<std::size_t>(x) * num_actions + u]; }
    Real r_f(int x) const { return accept[x] ? 1.0 : 0.0; }
};

struct BuildProductOptions {
    /// Treat DFA accepting states as goal states (for goal horizons whose
    /// terminal set lives on the automaton rather than the grid).
    bool goal_from_accept = false;
};

inline ProductPomdp build_product(const LabeledPomdp& m, const Dfa& d,
                                  const BuildProductOptions& opts = {}) {
    if (!(d.atoms == m.atoms))
        throw AtomMismatch("DFA was compiled over a different atom table than the model");
    for (int a : d.support)
        if (a >= m.atoms.size())
            throw AtomMismatch("DFA guard references atom index " + std::to_string(a) +
                               " absent from the model");

    ProductPomdp p;
    p.base_states = m.num_states;
    p.dfa_states = d.num_states;
    p.num_states = m.num_states * d.num_states;
    p.num_actions = m.num_actions;
    p.num_obs = m.num_obs;

    // cache delta(q, L(s)) per base state
    std::vector<int> succ_q(static_cast<std::size_t>(m.num_states) * d.num_states);
    for (int s = 0; s < m.num_states; ++s) {
        std::uint32_t a = d.project(m.labels[s]);
        for (int q = 0; q < d.num_states; ++q)
            succ_q[static_cast<std::size_t>(s) * d.num_states + q] = d.step_assignment(q, a);
    }

    p.trans.reserve(m.num_actions);
    for (int u = 0; u < m.num_actions; ++u) {
        std::vector<std::vector<std::pair<int, Real>>> rows(p.num_states);
        for (int s = 0; s < m.num_states; ++s) {
            for (int q = 0; q < d.num_states; ++q) {
                int qn = succ_q[static_cast<std::size_t>(s) * d.num_states + q];
                auto& row = rows[p.pack(s, q)];
                for (auto [sn, pr] : m.trans[u].row(s)) row.emplace_back(p.pack(sn, qn), pr);
            }
        }
        p.trans.push_back(SparseMatrix::from_rows(p.num_states, p.num_states, rows));
    }

    {
        std::vector<std::vector<std::pair<int, Real>>> rows(p.num_states);
        for (int s = 0; s < m.num_states; ++s)
            for (int q = 0; q < d.num_states; ++q) {
                auto& row = rows[p.pack(s, q)];
                for (auto [o, pr] : m.obs.row(s)) row.emplace_back(o, pr);
            }
        p.obs = SparseMatrix::from_rows(p.num_states, p.num_obs, rows);
    }

    p.init.assign(p.num_states, 0.0);
    for (int s = 0; s < m.num_states; ++s)
        if (m.init[s] > 0) p.init[p.pack(s, d.initial)] = m.init[s];

    p.reward_obj.assign(static_cast<std::size_t>(p.num_states) * p.num_actions, 0.0);
    p.reward_con.assign(static_cast<std::size_t>(p.num_states) * p.num_actions, 0.0);
    for (int s = 0; s < m.num_states; ++s)
        for (int q = 0; q < d.num_states; ++q)
            for (int u = 0; u < m.num_actions; ++u) {
                std::size_t i = static_cast<std::size_t>(p.pack(s, q)) * p.num_actions + u;
                p.reward_obj[i] = m.r_obj(s, u);
                p.reward_con[i] = m.r_con(s, u);
            }

    p.accept.resize(p.num_states);
    for (int s = 0; s < m.num_states; ++s)
        for (int q = 0; q < d.num_states; ++q) p.accept[p.pack(s, q)] = d.accepting[q];

    p.horizon = m.horizon;
    if (m.horizon.kind == HorizonKind::Goal) {
        std::vector<int> goals;
        for (int s : m.horizon.goals)
            for (int q = 0; q < d.num_states; ++q) goals.push_back(p.pack(s, q));
        if (opts.goal_from_accept)
            for (int x = 0; x < p.num_states; ++x)
                if (p.accept[x]) goals.push_back(x);
        std::sort(goals.begin(), goals.end());
        goals.erase(std::unique(goals.begin(), goals.end()), goals.end());
        if (goals.empty()) throw WrongHorizon("product goal set is empty");
        p.horizon = HorizonModel::goal(std::move(goals));
    }

    // bounds carry over from the base channels (identical reward rows)
    Real rc_max = 0, ro_max = 0;
    for (int s = 0; s < m.num_states; ++s)
        for (int u = 0; u < m.num_actions; ++u) {
            rc_max = std::max(rc_max, m.r_con(s, u));
            ro_max = std::max(ro_max, m.r_obj(s, u));
        }
    switch (p.horizon.kind) {
        case HorizonKind::Fixed:
            p.bounds.T_max = p.horizon.T;
            p.bounds.R_max = (p.horizon.T + 1) * std::max(rc_max, 0.0);
            p.bounds.R_m = (p.horizon.T + 1) * std::max(ro_max, 0.0);
            break;
        case HorizonKind::Geometric:
            p.bounds.T_max = p.horizon.gamma / (1 - p.horizon.gamma);
            p.bounds.R_max = rc_max / (1 - p.horizon.gamma);
            p.bounds.R_m = std::max(ro_max, 0.0) / (1 - p.horizon.gamma);
            break;
        case HorizonKind::Goal:
            p.bounds.T_max = static_cast<Real>(kGoalStepCap);
            p.bounds.R_max = p.bounds.T_max * std::max(rc_max, 0.0);
            p.bounds.R_m = 0;
            break;
    }
    p.bounds.G = std::max(p.bounds.R_max, 1.0);
    return p;
}

/// Drops product states unreachable from the initial distribution under any
/// action sequence. Pruning is opt-in: the unpruned product keeps the
/// canonical s * |Q| + q indexing.
inline ProductPomdp prune_unreachable(const ProductPomdp& p) {
    std::vector<int> order;
    std::vector<char> seen(p.num_states, 0);
    for (int x = 0; x < p.num_states; ++x)
        if (p.init[x] > 0 && !seen[x]) {
            seen[x] = 1;
            order.push_back(x);
        }
    for (std::size_t i = 0; i < order.size(); ++i)
        for (int u = 0; u < p.num_actions; ++u)
            for (auto [xn, pr] : p.trans[u].row(order[i]))
                if (pr > 0 && !seen[xn]) {
                    seen[xn] = 1;
                    order.push_back(xn);
                }
    std::sort(order.begin(), order.end());

    std::vector<int> renum(p.num_states, -1);
    for (std::size_t i = 0; i < order.size(); ++i) renum[order[i]] = static_cast<int>(i);

    ProductPomdp out;
    out.num_states = static_cast<int>(order.size());
    out.num_actions = p.num_actions;
    out.num_obs = p.num_obs;
    out.base_states = p.base_states;
    out.dfa_states = p.dfa_states;
    out.pruned = true;
    out.orig_index = order;
    out.horizon = p.horizon;
    out.bounds = p.bounds;

    for (int u = 0; u < p.num_actions; ++u) {
        std::vector<std::vector<std::pair<int, Real>>> rows(out.num_states);
        for (int i = 0; i < out.num_states; ++i)
            for (auto [xn, pr] : p.trans[u].row(order[i])) rows[i].emplace_back(renum[xn], pr);
        out.trans.push_back(SparseMatrix::from_rows(out.num_states, out.num_states, rows));
    }
    {
        std::vector<std::vector<std::pair<int, Real>>> rows(out.num_states);
        for (int i = 0; i < out.num_states; ++i)
            for (auto [o, pr] : p.obs.row(order[i])) rows[i].emplace_back(o, pr);
        out.obs = SparseMatrix::from_rows(out.num_states, p.num_obs, rows);
    }
    out.init.assign(out.num_states, 0.0);
    out.reward_obj.resize(static_cast<std::size_t>(out.num_states) * p.num_actions);
    out.reward_con.resize(static_cast<std::size_t>(out.num_states) * p.num_actions);
    out.accept.resize(out.num_states);
    for (int i = 0; i < out.num_states; ++i) {
        out.init[i] = p.init[order[i]];
        out.accept[i] = p.accept[order[i]];
        for (int u = 0; u < p.num_actions; ++u) {
            out.reward_obj[static_cast<std::size_t>(i) * p.num_actions + u] = p.r_obj(order[i], u);
            out.reward_con[static_cast<std::size_t>(i) * p.num_actions + u] = p.r_con(order[i], u);
        }
    }
    if (p.horizon.kind == HorizonKind::Goal) {
        std::vector<int> goals;
        for (int g : p.horizon.goals)
            if (renum[g] >= 0) goals.push_back(renum[g]);
        out.horizon = HorizonModel::goal(std::move(goals));
    }
    return out;
}

/// Summary statistics for the compile-product CLI.
struct ProductStats {
    int states = 0;
    int reachable = 0;
    Real accept_fraction = 0;
};

inline ProductStats product_stats(const ProductPomdp& p) {
    ProductStats st;
    st.states = p.num_states;
    ProductPomdp pr = p.pruned ? p : prune_unreachable(p);
    st.reachable = pr.num_states;
    int acc = 0;
    for (int x = 0; x < p.num_states; ++x) acc += p.accept[x] ? 1 : 0;
    st.accept_fraction = p.num_states ? static_cast<Real>(acc) / p.num_states : 0;
    return st;
}

}  // namespace ltlfplan
