#pragma once

#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "ltlfplan/common.hpp"
#include "ltlfplan/dfa.hpp"
#include "ltlfplan/model.hpp"
#include "ltlfplan/policy.hpp"
#include "ltlfplan/product.hpp"

namespace ltlfplan {

/// Control-sharing multi-agent model: shared state and all past joint actions
/// are common knowledge; each agent privately observes its own local state.
/// Local transitions are conditionally independent given (shared state, joint
/// action).
struct MaModel {
    int num_agents = 0;
    int num_shared = 0;
    std::vector<int> agent_actions;          // |U^i|
    std::vector<SparseMatrix> shared_trans;  // per joint action: S x S

    struct Local {
        int num_states = 1;
        /// Per joint action: rows are (local * S + shared), columns local'.
        std::vector<SparseMatrix> trans;
        AtomTable atoms;
        std::vector<Letter> label;  // [(shared * num_states + local)]
    };
    std::vector<Local> locals;

    AtomTable shared_atoms;
    std::vector<Letter> shared_label;  // per shared state

    /// Initial entries over (shared, local_1, ..., local_N).
    struct InitEntry {
        int shared;
        std::vector<int> local;
        Real prob;
    };
    std::vector<InitEntry> init;

    Vec reward;  // [joint_state * num_joint_actions + joint_action]
    HorizonModel horizon;

    int num_joint_actions() const {
        int n = 1;
        for (int a : agent_actions) n *= a;
        return n;
    }
    int num_local_combos() const {
        int n = 1;
        for (const auto& l : locals) n *= l.num_states;
        return n;
    }
    int num_joint_states() const { return num_shared * num_local_combos(); }

    int pack_action(std::span<const int> u) const {
        int id = 0;
        for (int i = 0; i < num_agents; ++i) id = id * agent_actions[i] + u[i];
        return id;
    }
    std::vector<int> unpack_action(int id) const {
        std::vector<int> u(num_agents);
        for (int i = num_agents - 1; i >= 0; --i) {
            u[i] = id % agent_actions[i];
            id /= agent_actions[i];
        }
        return u;
    }
    int pack_locals(std::span<const int> l) const {
        int id = 0;
        for (int i = 0; i < num_agents; ++i) id = id * locals[i].num_states + l[i];
        return id;
    }
    int pack_joint(int shared, std::span<const int> l) const {
        return shared * num_local_combos() + pack_locals(l);
    }
    Real r(int shared, std::span<const int> l, int joint_u) const {
        return reward[static_cast<std::size_t>(pack_joint(shared, l)) * num_joint_actions() +
                      joint_u];
    }
};

/// Global plus per-agent specifications; the overall specification is their
/// conjunction.
struct SpecBundle {
    FormulaId global = 0;
    std::vector<FormulaId> local;
    Dfa dfa_global;
    std::vector<Dfa> dfa_local;
};

inline SpecBundle build_spec_bundle(FormulaStore& store, const MaModel& ma,
                                    const std::string& global_spec,
                                    const std::vector<std::string>& local_specs) {
    if (static_cast<int>(local_specs.size()) != ma.num_agents)
        throw AtomMismatch("expected one local specification per agent");
    SpecBundle b;
    AtomTable shared_atoms = ma.shared_atoms;
    b.global = parse_spec(store, shared_atoms, global_spec);
    if (!(shared_atoms == ma.shared_atoms))
        throw AtomMismatch("global specification uses atoms absent from the shared labeling");
    b.dfa_global = compile_dfa(store, b.global, ma.shared_atoms);
    for (int i = 0; i < ma.num_agents; ++i) {
        AtomTable atoms = ma.locals[i].atoms;
        b.local.push_back(parse_spec(store, atoms, local_specs[i]));
        if (!(atoms == ma.locals[i].atoms))
            throw AtomMismatch("local specification " + std::to_string(i) +
                               " uses atoms absent from its labeling");
        b.dfa_local.push_back(compile_dfa(store, b.local.back(), ma.locals[i].atoms));
    }
    return b;
}

/// Product of the multi-agent model with the spec bundle, kept factored:
/// the shared product component (s, q^g) and one (local, q^i) component per
/// agent. Acceptance is the conjunction of all component acceptances.
struct FactoredProduct {
    const MaModel* ma = nullptr;
    SpecBundle bundle;

    int shared_q() const { return bundle.dfa_global.num_states; }
    int local_q(int i) const { return bundle.dfa_local[i].num_states; }
    int local_dim(int i) const { return ma->locals[i].num_states * local_q(i); }

    bool accepting(int qg, std::span<const int> qi) const {
        if (!bundle.dfa_global.accepting[qg]) return false;
        for (std::size_t i = 0; i < qi.size(); ++i)
            if (!bundle.dfa_local[i].accepting[qi[i]]) return false;
        return true;
    }
};

inline FactoredProduct build_ma_product(const MaModel& ma, SpecBundle bundle) {
    for (int a : bundle.dfa_global.support)
        if (a >= ma.shared_atoms.size())
            throw AtomMismatch("global DFA references atoms beyond the shared labeling");
    for (int i = 0; i < ma.num_agents; ++i)
        for (int a : bundle.dfa_local[i].support)
            if (a >= ma.locals[i].atoms.size())
                throw AtomMismatch("local DFA references atoms beyond its labeling");
    FactoredProduct fp;
    fp.ma = &ma;
    fp.bundle = std::move(bundle);
    return fp;
}

// ---------------------------------------------------------------------------
// Coordinator reduction (common information approach)
// ---------------------------------------------------------------------------

struct CoordinatorOptions {
    int max_joint_private = 64;     // cap on prod_i |S^i| * |Q^i|
    int max_prescriptions = 4096;   // cap on prod_i |U^i|^(|S^i| |Q^i|)
    std::size_t max_states = 500000;
    std::size_t max_state_actions = 4000000;  // materialized transition rows
};

/// Single-agent reformulation: hidden state (X^g, X^1..X^N, last joint
/// action), actions are prescription tuples, and the observation reveals the
/// next shared state and the realized joint action exactly.
struct CoordinatorPomdp {
    ProductPomdp pomdp;
    const MaModel* ma = nullptr;
    int shared_q = 1;
    std::vector<int> local_states;  // |S^i|
    std::vector<int> local_q;       // |Q^i|
    std::vector<int> agent_actions;
    int num_prescriptions = 1;

    // hidden-state packing: (((s * Qg + qg) * L_1 + x_1) * ... ) * (U+1) + last+1
    // where x_i = local_i * Q_i + q_i
    int num_joint_actions() const {
        int n = 1;
        for (int a : agent_actions) n *= a;
        return n;
    }

    int obs_of(int shared, int last_joint) const {
        return shared * (num_joint_actions() + 1) + (last_joint + 1);
    }

    /// Action of agent i under prescription `gamma` at private (local, q_i).
    int prescribed_action(int gamma, int agent, int local, int qi) const {
        // gamma factors into per-agent tables, most significant agent first
        for (int i = num_agents() - 1; i > agent; --i) gamma /= table_size(i);
        gamma %= table_size(agent);
        // within a table, entries are indexed by (local * Q_i + q_i)
        int entry = local * local_q[agent] + qi;
        for (int e = 0; e < entry; ++e) gamma /= agent_actions[agent];
        return gamma % agent_actions[agent];
    }

    int num_agents() const { return static_cast<int>(agent_actions.size()); }

    int table_size(int agent) const {
        int cells = local_states[agent] * local_q[agent];
        int n = 1;
        for (int c = 0; c < cells; ++c) n *= agent_actions[agent];
        return n;
    }

    /// Joint model action realized by prescription `gamma` at the given
    /// private profile.
    int realized_joint_action(int gamma, std::span<const int> local, std::span<const int> qi) const {
        std::vector<int> u(num_agents());
        for (int i = 0; i < num_agents(); ++i)
            u[i] = prescribed_action(gamma, i, local[i], qi[i]);
        return ma->pack_action(u);
    }
};

inline CoordinatorPomdp build_coordinator(const FactoredProduct& fp,
                                          const CoordinatorOptions& opts = {}) {
    const MaModel& ma = *fp.ma;
    if (ma.horizon.kind == HorizonKind::Goal)
        throw WrongHorizon("coordinator reduction supports fixed and geometric horizons");

    CoordinatorPomdp co;
    co.ma = &ma;
    co.shared_q = fp.shared_q();
    co.agent_actions = ma.agent_actions;
    long long joint_private = 1;
    long long prescriptions = 1;
    for (int i = 0; i < ma.num_agents; ++i) {
        co.local_states.push_back(ma.locals[i].num_states);
        co.local_q.push_back(fp.local_q(i));
        int cells = ma.locals[i].num_states * fp.local_q(i);
        joint_private *= cells;
        long long table = 1;
        for (int c = 0; c < cells; ++c) {
            table *= ma.agent_actions[i];
            if (table > opts.max_prescriptions) break;
        }
        prescriptions *= table;
        if (joint_private > opts.max_joint_private)
            throw BlowUp("joint private space " + std::to_string(joint_private) +
                         " exceeds cap " + std::to_string(opts.max_joint_private));
        if (prescriptions > opts.max_prescriptions)
            throw BlowUp("prescription space " + std::to_string(prescriptions) + " exceeds cap " +
                         std::to_string(opts.max_prescriptions));
    }
    co.num_prescriptions = static_cast<int>(prescriptions);

    const int nU = ma.num_joint_actions();
    const int last_dim = nU + 1;
    std::vector<int> dims;  // for packing: s, qg, (l_i, q_i)..., last
    long long total = static_cast<long long>(ma.num_shared) * co.shared_q;
    for (int i = 0; i < ma.num_agents; ++i) total *= fp.local_dim(i);
    total *= last_dim;
    if (total > static_cast<long long>(opts.max_states))
        throw BlowUp("coordinator state space " + std::to_string(total) + " exceeds cap " +
                     std::to_string(opts.max_states));
    if (total * prescriptions > static_cast<long long>(opts.max_state_actions))
        throw BlowUp("coordinator transition table " + std::to_string(total * prescriptions) +
                     " rows exceeds cap " + std::to_string(opts.max_state_actions));

    ProductPomdp& p = co.pomdp;
    const int N = ma.num_agents;
    p.num_states = static_cast<int>(total);
    p.num_actions = co.num_prescriptions;
    p.num_obs = ma.num_shared * last_dim;
    p.base_states = p.num_states;
    p.dfa_states = 1;

    // packing helpers over (s, qg, x_1.., last)
    auto pack = [&](int s, int qg, std::span<const int> x, int last) {
        long long id = static_cast<long long>(s) * co.shared_q + qg;
        for (int i = 0; i < N; ++i) id = id * fp.local_dim(i) + x[i];
        return static_cast<int>(id * last_dim + (last + 1));
    };

    struct Unpacked {
        int s, qg, last;
        std::vector<int> local, qi;
    };
    auto unpack = [&](int id) {
        Unpacked u;
        u.local.resize(N);
        u.qi.resize(N);
        u.last = id % last_dim - 1;
        id /= last_dim;
        for (int i = N - 1; i >= 0; --i) {
            int x = id % fp.local_dim(i);
            id /= fp.local_dim(i);
            u.local[i] = x / fp.local_q(i);
            u.qi[i] = x % fp.local_q(i);
        }
        u.qg = id % co.shared_q;
        u.s = id / co.shared_q;
        return u;
    };

    // rewards, acceptances, observations, and cached automata steps
    p.reward_obj.assign(static_cast<std::size_t>(p.num_states) * p.num_actions, 0.0);
    p.reward_con.assign(static_cast<std::size_t>(p.num_states) * p.num_actions, 0.0);
    p.accept.assign(p.num_states, 0);

    std::vector<std::vector<std::pair<int, Real>>> obs_rows(p.num_states);
    std::vector<Unpacked> decoded(p.num_states);
    std::vector<int> qg_next(p.num_states);
    std::vector<std::vector<int>> qi_next(p.num_states, std::vector<int>(N));
    for (int id = 0; id < p.num_states; ++id) {
        Unpacked st = unpack(id);
        p.accept[id] = fp.accepting(st.qg, st.qi) ? 1 : 0;
        obs_rows[id].emplace_back(co.obs_of(st.s, st.last), 1.0);
        qg_next[id] = fp.bundle.dfa_global.step(st.qg, ma.shared_label[st.s]);
        for (int i = 0; i < N; ++i) {
            Letter l = ma.locals[i].label[static_cast<std::size_t>(st.s) * ma.locals[i].num_states +
                                          st.local[i]];
            qi_next[id][i] = fp.bundle.dfa_local[i].step(st.qi[i], l);
        }
        decoded[id] = std::move(st);
    }
    p.obs = SparseMatrix::from_rows(p.num_states, p.num_obs, obs_rows);
    obs_rows.clear();
    obs_rows.shrink_to_fit();

    // transitions one prescription at a time, keeping peak memory at a single
    // action's worth of rows
    std::vector<int> xbuf(N);
    for (int gamma = 0; gamma < p.num_actions; ++gamma) {
        std::vector<std::vector<std::pair<int, Real>>> rows(p.num_states);
        for (int id = 0; id < p.num_states; ++id) {
            const Unpacked& st = decoded[id];
            const int ju = co.realized_joint_action(gamma, st.local, st.qi);
            p.reward_obj[static_cast<std::size_t>(id) * p.num_actions + gamma] =
                ma.r(st.s, st.local, ju);

            auto& row = rows[id];
            for (auto [s2, ps] : ma.shared_trans[ju].row(st.s)) {
                // local kernels, expanded recursively
                std::vector<std::pair<std::vector<int>, Real>> combos{{{}, ps}};
                for (int i = 0; i < N; ++i) {
                    std::vector<std::pair<std::vector<int>, Real>> next;
                    int krow = st.local[i] * ma.num_shared + st.s;
                    for (const auto& [prefix, pp] : combos)
                        for (auto [l2, pl] : ma.locals[i].trans[ju].row(krow)) {
                            auto ext = prefix;
                            ext.push_back(l2);
                            next.emplace_back(std::move(ext), pp * pl);
                        }
                    combos = std::move(next);
                }
                for (const auto& [locals2, pr] : combos) {
                    for (int i = 0; i < N; ++i)
                        xbuf[i] = locals2[i] * fp.local_q(i) + qi_next[id][i];
                    row.emplace_back(pack(s2, qg_next[id], xbuf, ju), pr);
                }
            }
            // merge duplicate targets
            std::sort(row.begin(), row.end());
            std::size_t w = 0;
            for (std::size_t r = 0; r < row.size(); ++r) {
                if (w > 0 && row[w - 1].first == row[r].first)
                    row[w - 1].second += row[r].second;
                else
                    row[w++] = row[r];
            }
            row.resize(w);
        }
        p.trans.push_back(SparseMatrix::from_rows(p.num_states, p.num_states, rows));
    }

    p.init.assign(p.num_states, 0.0);
    for (const auto& e : ma.init) {
        for (int i = 0; i < N; ++i) xbuf[i] = e.local[i] * fp.local_q(i) + fp.bundle.dfa_local[i].initial;
        p.init[pack(e.shared, fp.bundle.dfa_global.initial, xbuf, -1)] += e.prob;
    }

    p.horizon = ma.horizon;
    Real r_max = 0;
    for (Real r : ma.reward) r_max = std::max(r_max, r);
    switch (p.horizon.kind) {
        case HorizonKind::Fixed:
            p.bounds.T_max = p.horizon.T;
            p.bounds.R_m = (p.horizon.T + 1) * std::max(r_max, 0.0);
            break;
        case HorizonKind::Geometric:
            p.bounds.T_max = p.horizon.gamma / (1 - p.horizon.gamma);
            p.bounds.R_m = std::max(r_max, 0.0) / (1 - p.horizon.gamma);
            break;
        default: break;
    }
    p.bounds.R_max = 0;  // no reward constraint channel in the multi-agent setting
    p.bounds.G = 1;
    return co;
}

// ---------------------------------------------------------------------------
// Agent-side execution and joint simulation
// ---------------------------------------------------------------------------

/// Executes one agent's share of a coordinator policy from the common
/// information (shared states and past joint actions) plus its own private
/// state; this is the reduced information the coordinator policies assume.
class AgentExecutor {
public:
    AgentExecutor(const CoordinatorPomdp& co, const Dfa& local_dfa, const PurePolicy& policy,
                  int agent)
        : co_(co), dfa_(local_dfa), agent_(agent), exec_(make_executor(co.pomdp, policy)) {
        reset();
    }

    void reset() {
        exec_->reset();
        qi_ = dfa_.initial;
    }

    /// `prev_joint` is the packed joint action at t-1 (-1 at t=0).
    int act(int shared_state, int prev_joint, int own_local) {
        int gamma = exec_->act(co_.obs_of(shared_state, prev_joint));
        int u = co_.prescribed_action(gamma, agent_, own_local, qi_);
        Letter l = co_.ma->locals[agent_].label[static_cast<std::size_t>(shared_state) *
                                                    co_.ma->locals[agent_].num_states +
                                                own_local];
        qi_ = dfa_.step(qi_, l);
        return u;
    }

private:
    const CoordinatorPomdp& co_;
    Dfa dfa_;
    int agent_;
    std::unique_ptr<PolicyExecutor> exec_;
    int qi_ = 0;
};

inline AgentExecutor unpack_policy(const CoordinatorPomdp& co, const FactoredProduct& fp,
                                   const PurePolicy& policy, int agent) {
    return AgentExecutor(co, fp.bundle.dfa_local[agent], policy, agent);
}

struct MaRollout {
    std::vector<int> shared_states;
    std::vector<std::vector<int>> local_states;  // [agent][t]
    std::vector<int> joint_actions;              // packed
    Real reward = 0;
    bool accepted = false;
    int realized_T = 0;
};

/// Samples one joint run. The actor receives (shared state, previous joint
/// action, private profile) and returns the packed joint action; both the
/// central coordinator and a team of AgentExecutors fit this shape.
template <typename Actor>
MaRollout ma_simulate(const FactoredProduct& fp, Actor&& actor, std::uint64_t seed,
                      std::size_t step_cap = kGoalStepCap) {
    const MaModel& ma = *fp.ma;
    Rng rng(seed);

    // sample the initial joint state
    Real u01 = rng.next_real();
    Real acc = 0;
    const MaModel::InitEntry* start = &ma.init.back();
    for (const auto& e : ma.init) {
        acc += e.prob;
        if (u01 < acc) {
            start = &e;
            break;
        }
    }
    int s = start->shared;
    std::vector<int> loc = start->local;

    int qg = fp.bundle.dfa_global.initial;
    std::vector<int> qi(ma.num_agents);
    for (int i = 0; i < ma.num_agents; ++i) qi[i] = fp.bundle.dfa_local[i].initial;

    MaRollout out;
    out.local_states.resize(ma.num_agents);
    int prev_joint = -1;
    for (std::size_t t = 0;; ++t) {
        int ju = actor(s, prev_joint, loc);
        out.shared_states.push_back(s);
        for (int i = 0; i < ma.num_agents; ++i) out.local_states[i].push_back(loc[i]);
        out.joint_actions.push_back(ju);
        out.reward += ma.r(s, loc, ju);

        // automata advance on the labels of the state being left
        qg = fp.bundle.dfa_global.step(qg, ma.shared_label[s]);
        for (int i = 0; i < ma.num_agents; ++i) {
            Letter l = ma.locals[i].label[static_cast<std::size_t>(s) * ma.locals[i].num_states +
                                          loc[i]];
            qi[i] = fp.bundle.dfa_local[i].step(qi[i], l);
        }

        int s2 = rng.sample_sparse(ma.shared_trans[ju].row(s));
        for (int i = 0; i < ma.num_agents; ++i) {
            int krow = loc[i] * ma.num_shared + s;
            loc[i] = rng.sample_sparse(ma.locals[i].trans[ju].row(krow));
        }
        s = s2;
        prev_joint = ju;

        bool stop = false;
        switch (ma.horizon.kind) {
            case HorizonKind::Fixed: stop = (static_cast<int>(t) == ma.horizon.T); break;
            case HorizonKind::Geometric: stop = rng.next_bernoulli(1 - ma.horizon.gamma); break;
            case HorizonKind::Goal:
                if (t + 1 >= step_cap) throw NonTermination(step_cap);
                break;
        }
        if (stop) break;
    }
    out.accepted = fp.accepting(qg, qi);
    out.realized_T = static_cast<int>(out.joint_actions.size()) - 1;
    return out;
}

}  // namespace ltlfplan
