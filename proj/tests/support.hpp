// Shared test helpers: random instance generators and the independent
// oracles the operation examples are frozen against. Everything here stays
// deliberately separate from the implementation paths it checks: trajectory
// enumeration, policy enumeration, and vertex search instead of the library's
// solvers and LPs.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "ltlfplan/cpomdp.hpp"
#include "ltlfplan/dfa.hpp"
#include "ltlfplan/model.hpp"
#include "ltlfplan/multiagent.hpp"
#include "ltlfplan/policy.hpp"
#include "ltlfplan/product.hpp"

namespace testsupport {

using namespace ltlfplan;

// ---------------------------------------------------------------------------
// Random formulas
// ---------------------------------------------------------------------------

inline FormulaId random_formula(FormulaStore& st, Rng& rng, int depth, int num_atoms) {
    int pick = rng.next_int(depth <= 0 ? 2 : 11);
    switch (pick) {
        case 0: return st.lit_true();
        case 1: return st.atom(rng.next_int(num_atoms));
        case 2: return st.f_not(random_formula(st, rng, depth - 1, num_atoms));
        case 3:
            return st.f_and(random_formula(st, rng, depth - 1, num_atoms),
                            random_formula(st, rng, depth - 1, num_atoms));
        case 4:
            return st.f_or(random_formula(st, rng, depth - 1, num_atoms),
                           random_formula(st, rng, depth - 1, num_atoms));
        case 5: return st.f_next(random_formula(st, rng, depth - 1, num_atoms));
        case 6: return st.f_wnext(random_formula(st, rng, depth - 1, num_atoms));
        case 7:
            return st.f_until(random_formula(st, rng, depth - 1, num_atoms),
                              random_formula(st, rng, depth - 1, num_atoms));
        case 8:
            return st.f_release(random_formula(st, rng, depth - 1, num_atoms),
                                random_formula(st, rng, depth - 1, num_atoms));
        case 9: return st.f_ev(random_formula(st, rng, depth - 1, num_atoms));
        default: return st.f_alw(random_formula(st, rng, depth - 1, num_atoms));
    }
}

/// Walks every word of length 1..max_len over num_atoms atoms, handing
/// (word, dfa_state_after_word) to the visitor.
template <typename Visitor>
void for_all_words(const Dfa& d, int num_atoms, int max_len, Visitor&& visit) {
    std::vector<Letter> word;
    std::vector<int> qs{d.initial};
    std::function<void()> rec = [&] {
        if (!word.empty()) visit(std::span<const Letter>(word), qs.back());
        if (static_cast<int>(word.size()) == max_len) return;
        for (Letter l = 0; l < (1u << num_atoms); ++l) {
            word.push_back(l);
            qs.push_back(d.step(qs.back(), l));
            rec();
            word.pop_back();
            qs.pop_back();
        }
    };
    rec();
}

// ---------------------------------------------------------------------------
// Random tiny models and policies
// ---------------------------------------------------------------------------

struct TinyModelSpec {
    int max_states = 4;
    int max_actions = 3;
    int max_obs = 3;
    int max_T = 3;
    int num_atoms = 2;
    bool fully_observed = false;  // observation = state, identity
    bool nonneg_rewards = true;
};

inline Vec random_distribution(Rng& rng, int n) {
    Vec v(n);
    Real sum = 0;
    for (Real& x : v) {
        x = -std::log(1 - rng.next_real());
        sum += x;
    }
    for (Real& x : v) x /= sum;
    return v;
}

inline LabeledPomdp random_tiny_model(Rng& rng, const TinyModelSpec& spec = {}) {
    LabeledPomdp m;
    m.num_states = 2 + rng.next_int(spec.max_states - 1);
    m.num_actions = 1 + rng.next_int(spec.max_actions);
    m.num_obs = spec.fully_observed ? m.num_states : 1 + rng.next_int(spec.max_obs);
    for (int i = 0; i < spec.num_atoms; ++i) m.atoms.intern(std::string(1, 'a' + i));

    m.labels.resize(m.num_states);
    for (int s = 0; s < m.num_states; ++s)
        m.labels[s] = static_cast<Letter>(rng.next_int(1 << spec.num_atoms));

    for (int u = 0; u < m.num_actions; ++u) {
        std::vector<std::vector<std::pair<int, Real>>> rows(m.num_states);
        for (int s = 0; s < m.num_states; ++s) {
            Vec dist = random_distribution(rng, m.num_states);
            for (int s2 = 0; s2 < m.num_states; ++s2)
                if (dist[s2] > 1e-12) rows[s].emplace_back(s2, dist[s2]);
        }
        m.trans.push_back(SparseMatrix::from_rows(m.num_states, m.num_states, rows));
    }
    {
        std::vector<std::vector<std::pair<int, Real>>> rows(m.num_states);
        for (int s = 0; s < m.num_states; ++s) {
            if (spec.fully_observed) {
                rows[s] = {{s, 1.0}};
            } else {
                Vec dist = random_distribution(rng, m.num_obs);
                for (int o = 0; o < m.num_obs; ++o)
                    if (dist[o] > 1e-12) rows[s].emplace_back(o, dist[o]);
            }
        }
        m.obs = SparseMatrix::from_rows(m.num_states, m.num_obs, rows);
    }
    m.init = random_distribution(rng, m.num_states);

    m.reward_obj.resize(static_cast<std::size_t>(m.num_states) * m.num_actions);
    m.reward_con.resize(static_cast<std::size_t>(m.num_states) * m.num_actions);
    for (auto& r : m.reward_obj) r = spec.nonneg_rewards ? rng.next_real() : rng.next_real() - 0.5;
    for (auto& r : m.reward_con) r = rng.next_real();
    m.horizon = HorizonModel::fixed(rng.next_int(spec.max_T + 1));
    return m;
}

/// Random full-depth decision tree over the observation alphabet.
inline DecisionTreePolicy random_tree_policy(Rng& rng, int num_obs, int num_actions, int T) {
    DecisionTreePolicy pol;
    std::function<int(int)> build = [&](int depth) {
        DecisionTreePolicy::Node n;
        n.action = rng.next_int(num_actions);
        n.child.assign(num_obs, -1);
        int id = static_cast<int>(pol.nodes.size());
        pol.nodes.push_back(n);
        if (depth < T)
            for (int o = 0; o < num_obs; ++o) {
                int c = build(depth + 1);
                pol.nodes[id].child[o] = c;
            }
        return id;
    };
    pol.root.resize(num_obs);
    for (int o = 0; o < num_obs; ++o) pol.root[o] = build(0);
    return pol;
}

// ---------------------------------------------------------------------------
// Oracle: exhaustive trajectory enumeration on the base model
// ---------------------------------------------------------------------------

struct BaseExpectations {
    Real obj = 0;
    Real con = 0;
    Real p_sat = 0;  // probability that the generated word satisfies phi
};

/// Walks every (state, observation) path of a fixed-horizon base model under
/// a decision-tree policy and integrates the channel values directly from
/// their definitions.
inline BaseExpectations enumerate_base(const LabeledPomdp& m, const DecisionTreePolicy& pol,
                                       const FormulaStore& store, FormulaId phi) {
    if (m.horizon.kind != HorizonKind::Fixed) throw std::invalid_argument("fixed horizon only");
    const int T = m.horizon.T;
    Evaluator ev(store, phi);
    BaseExpectations out;
    std::vector<Letter> word;

    std::function<void(int, int, Real, int, Real, Real)> rec =
        [&](int s, int t, Real prob, int node, Real obj, Real con) {
            for (int o = 0; o < m.num_obs; ++o) {
                Real zo = m.obs.at(s, o);
                if (zo == 0) continue;
                int nxt;
                if (t == 0) {
                    nxt = o < static_cast<int>(pol.root.size()) ? pol.root[o] : -1;
                } else {
                    const auto& ch = pol.nodes[node].child;
                    nxt = o < static_cast<int>(ch.size()) ? ch[o] : -1;
                }
                int u = nxt >= 0 ? pol.nodes[nxt].action : 0;
                Real obj2 = obj + m.r_obj(s, u);
                Real con2 = con + m.r_con(s, u);
                word.push_back(m.labels[s]);
                if (t == T) {
                    Real p = prob * zo;
                    out.obj += p * obj2;
                    out.con += p * con2;
                    if (ev.eval(word)) out.p_sat += p;
                } else {
                    for (auto [s2, ps] : m.trans[u].row(s))
                        rec(s2, t + 1, prob * zo * ps, nxt, obj2, con2);
                }
                word.pop_back();
            }
        };
    for (int s = 0; s < m.num_states; ++s)
        if (m.init[s] > 0) rec(s, 0, m.init[s], -1, 0, 0);
    return out;
}

// ---------------------------------------------------------------------------
// Oracle: occupancy-measure optimum via deterministic-policy vertices
// ---------------------------------------------------------------------------

struct ChannelPoint {
    Real obj, con, acc;
};

/// Channel values of one deterministic Markov product policy (x, t) -> u by
/// forward dynamic programming.
inline ChannelPoint markov_policy_channels(const ProductPomdp& p, const std::vector<int>& actions) {
    const int T = p.horizon.T;
    const int X = p.num_states;
    Vec d = p.init;
    ChannelPoint out{0, 0, 0};
    for (int t = 0; t <= T; ++t) {
        Vec d2(X, 0.0);
        for (int x = 0; x < X; ++x) {
            if (d[x] == 0) continue;
            int u = actions[static_cast<std::size_t>(t) * X + x];
            out.obj += d[x] * p.r_obj(x, u);
            out.con += d[x] * p.r_con(x, u);
            for (auto [xn, pr] : p.trans[u].row(x)) d2[xn] += d[x] * pr;
        }
        d.swap(d2);
    }
    for (int x = 0; x < X; ++x)
        if (d[x] != 0 && p.accept[x]) out.acc += d[x];
    return out;
}

/// All deterministic Markov policies of a tiny fixed-horizon product,
/// reduced to their channel points (the occupancy polytope vertices).
inline std::vector<ChannelPoint> enumerate_markov_policies(const ProductPomdp& p) {
    if (p.horizon.kind != HorizonKind::Fixed) throw std::invalid_argument("fixed horizon only");
    const int cells = p.num_states * (p.horizon.T + 1);
    double count = std::pow(static_cast<double>(p.num_actions), cells);
    if (count > 2.1e6) throw std::invalid_argument("policy enumeration too large");
    std::vector<ChannelPoint> pts;
    std::vector<int> actions(cells, 0);
    const long long n = static_cast<long long>(count);
    for (long long id = 0; id < n; ++id) {
        long long rem = id;
        for (int c = 0; c < cells; ++c) {
            actions[c] = static_cast<int>(rem % p.num_actions);
            rem /= p.num_actions;
        }
        pts.push_back(markov_policy_channels(p, actions));
    }
    return pts;
}

inline std::vector<ChannelPoint> pareto_filter(std::vector<ChannelPoint> pts) {
    // deduplicate then drop points dominated in all three coordinates
    std::sort(pts.begin(), pts.end(), [](const ChannelPoint& a, const ChannelPoint& b) {
        return std::tie(a.obj, a.con, a.acc) < std::tie(b.obj, b.con, b.acc);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const ChannelPoint& a, const ChannelPoint& b) {
                              return std::abs(a.obj - b.obj) < 1e-12 &&
                                     std::abs(a.con - b.con) < 1e-12 &&
                                     std::abs(a.acc - b.acc) < 1e-12;
                          }),
              pts.end());
    std::vector<ChannelPoint> keep;
    for (const auto& p : pts) {
        bool dominated = false;
        for (const auto& q : pts) {
            if (&p == &q) continue;
            if (q.obj >= p.obj && q.con >= p.con && q.acc >= p.acc &&
                (q.obj > p.obj || q.con > p.con || q.acc > p.acc)) {
                dominated = true;
                break;
            }
        }
        if (!dominated) keep.push_back(p);
    }
    return keep;
}

struct MixtureOptimum {
    bool feasible = false;
    Real value = -std::numeric_limits<Real>::infinity();
};

/// Exact optimum of  max sum w obj  s.t.  sum w con >= rho, sum w acc >= acc_min,
/// sum w = 1, w >= 0  by exhaustive vertex enumeration over <=3-point supports.
inline MixtureOptimum mixture_lp_vertex_search(const std::vector<ChannelPoint>& pts, Real rho,
                                               Real acc_min) {
    MixtureOptimum best;
    const Real tol = 1e-9;
    auto consider = [&](Real obj, Real con, Real acc) {
        if (con < rho - tol || acc < acc_min - tol) return;
        best.feasible = true;
        best.value = std::max(best.value, obj);
    };
    const int n = static_cast<int>(pts.size());
    for (int i = 0; i < n; ++i) consider(pts[i].obj, pts[i].con, pts[i].acc);
    // two-point supports: one constraint tight
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            for (int which = 0; which < 2; ++which) {
                Real ai = which == 0 ? pts[i].con : pts[i].acc;
                Real aj = which == 0 ? pts[j].con : pts[j].acc;
                Real target = which == 0 ? rho : acc_min;
                Real denom = ai - aj;
                if (std::abs(denom) < 1e-12) continue;
                Real w = (target - aj) / denom;  // weight on i
                if (w < -tol || w > 1 + tol) continue;
                w = std::clamp(w, 0.0, 1.0);
                consider(w * pts[i].obj + (1 - w) * pts[j].obj,
                         w * pts[i].con + (1 - w) * pts[j].con,
                         w * pts[i].acc + (1 - w) * pts[j].acc);
            }
        }
    // three-point supports: both constraints tight
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            for (int k = j + 1; k < n; ++k) {
                // solve [con_i con_j con_k; acc_i acc_j acc_k; 1 1 1] w = [rho, acc_min, 1]
                const Real a1 = pts[i].con, a2 = pts[j].con, a3 = pts[k].con;
                const Real b1 = pts[i].acc, b2 = pts[j].acc, b3 = pts[k].acc;
                const Real det = a1 * (b2 - b3) - a2 * (b1 - b3) + a3 * (b1 - b2);
                if (std::abs(det) < 1e-12) continue;
                const Real w1 =
                    (rho * (b2 - b3) - a2 * (acc_min - b3) + a3 * (acc_min - b2)) / det;
                const Real w2 =
                    (a1 * (acc_min - b3) - rho * (b1 - b3) + a3 * (b1 - acc_min)) / det;
                const Real w3 = 1 - w1 - w2;
                if (w1 < -tol || w2 < -tol || w3 < -tol) continue;
                consider(w1 * pts[i].obj + w2 * pts[j].obj + w3 * pts[k].obj,
                         w1 * pts[i].con + w2 * pts[j].con + w3 * pts[k].con,
                         w1 * pts[i].acc + w2 * pts[j].acc + w3 * pts[k].acc);
            }
    return best;
}

// ---------------------------------------------------------------------------
// Random constrained instances with oracle-calibrated thresholds
// ---------------------------------------------------------------------------

struct ConstrainedInstance {
    ProductPomdp product;
    Real rho = 0;
    Real delta = 0;
    Real r_star = 0;  // LP optimum over mixtures (meaningful when fully observed)
    Real r_m = 0;     // unconstrained optimum over deterministic policies
    Real dual_f = 0;  // approximate unconstrained dual optimum (shadow prices)
    Real dual_c = 0;
};

struct InstanceTuning {
    Real obj_scale = 1.0;        // objective reward magnitude
    Real con_scale = 1.0;        // constraint reward magnitude
    Real threshold_frac = 0.4;   // binding position within each channel span
};

/// Tiny fixed-horizon product with jointly feasible, binding thresholds. The
/// thresholds sit inside each channel's span, so the 50/50 mixture of the
/// per-channel maximizers is feasible while the unconstrained optimum usually
/// is not.
inline ConstrainedInstance random_constrained_instance(Rng& rng, bool fully_observed,
                                                       const InstanceTuning& tune = {}) {
    for (;;) {
        TinyModelSpec spec;
        spec.max_states = 3;
        spec.max_actions = 2;
        spec.max_obs = 2;
        spec.num_atoms = 1;
        spec.fully_observed = fully_observed;
        LabeledPomdp m = random_tiny_model(rng, spec);
        m.num_actions = 2;
        while (static_cast<int>(m.trans.size()) > 2) m.trans.pop_back();
        if (static_cast<int>(m.trans.size()) < 2) continue;
        for (Real& r : m.reward_obj) r *= tune.obj_scale;
        for (Real& r : m.reward_con) r *= tune.con_scale;
        m.horizon = HorizonModel::fixed(2);

        FormulaStore st;
        AtomTable at = m.atoms;
        FormulaId phi = parse_spec(st, at, "F a");
        Dfa d = minimize(compile_dfa(st, phi, m.atoms));
        if (d.num_states > 2) continue;
        ConstrainedInstance inst;
        inst.product = build_product(m, d);

        std::vector<ChannelPoint> pts;
        try {
            pts = pareto_filter(enumerate_markov_policies(inst.product));
        } catch (const std::invalid_argument&) {
            continue;
        }
        Real f_min = 1e30, f_max = -1e30, c_min = 1e30, c_max = -1e30, o_max = -1e30;
        for (const auto& p : pts) {
            f_min = std::min(f_min, p.acc);
            f_max = std::max(f_max, p.acc);
            c_min = std::min(c_min, p.con);
            c_max = std::max(c_max, p.con);
            o_max = std::max(o_max, p.obj);
        }
        if (f_max - f_min < 0.2 || c_max - c_min < 0.1 * tune.con_scale) continue;
        inst.rho = c_min + tune.threshold_frac * (c_max - c_min);
        Real acc_min = f_min + tune.threshold_frac * (f_max - f_min);
        inst.delta = 1 - acc_min;
        inst.r_m = o_max;
        MixtureOptimum opt = mixture_lp_vertex_search(pts, inst.rho, acc_min);
        if (!opt.feasible) continue;
        inst.r_star = opt.value;

        // shadow prices: argmin over lambda >= 0 of max_mu L(mu, lambda),
        // located by a coarse-to-fine grid over the Pareto points
        Real best_f = 0, best_c = 0;
        Real lo_f = 0, hi_f = 8, lo_c = 0, hi_c = 8;
        for (int round = 0; round < 4; ++round) {
            Real best_val = std::numeric_limits<Real>::infinity();
            for (int i = 0; i <= 20; ++i)
                for (int j = 0; j <= 20; ++j) {
                    Real lf = lo_f + (hi_f - lo_f) * i / 20.0;
                    Real lc = lo_c + (hi_c - lo_c) * j / 20.0;
                    Real sup = -std::numeric_limits<Real>::infinity();
                    for (const auto& p : pts)
                        sup = std::max(sup, p.obj + lc * (p.con - inst.rho) +
                                                lf * (p.acc - acc_min));
                    if (sup < best_val) {
                        best_val = sup;
                        best_f = lf;
                        best_c = lc;
                    }
                }
            Real span_f = (hi_f - lo_f) / 10, span_c = (hi_c - lo_c) / 10;
            lo_f = std::max(0.0, best_f - span_f);
            hi_f = best_f + span_f;
            lo_c = std::max(0.0, best_c - span_c);
            hi_c = best_c + span_c;
        }
        inst.dual_f = best_f;
        inst.dual_c = best_c;
        return inst;
    }
}

// ---------------------------------------------------------------------------
// Oracle: common-history dynamic program for tiny multi-agent instances
// ---------------------------------------------------------------------------

/// Optimal E[sum r + lambda_f * accept] over reduced-information team policies by
/// direct recursion on the common-information tree (shared states and joint
/// actions observed, beliefs over joint private profiles filtered exactly).
inline Real ma_policy_dp(const FactoredProduct& fp, Real lambda_f) {
    const MaModel& ma = *fp.ma;
    if (ma.horizon.kind != HorizonKind::Fixed) throw std::invalid_argument("fixed horizon only");
    const int T = ma.horizon.T;
    const int N = ma.num_agents;

    // joint private profiles: tuples ((sl_i, q_i))_i packed
    std::vector<int> dims(N);
    int profiles = 1;
    for (int i = 0; i < N; ++i) {
        dims[i] = ma.locals[i].num_states * fp.local_q(i);
        profiles *= dims[i];
    }
    auto unpack_profile = [&](int id) {
        std::vector<std::pair<int, int>> pr(N);  // (local, q)
        for (int i = N - 1; i >= 0; --i) {
            int x = id % dims[i];
            id /= dims[i];
            pr[i] = {x / fp.local_q(i), x % fp.local_q(i)};
        }
        return pr;
    };
    auto pack_profile = [&](const std::vector<std::pair<int, int>>& pr) {
        int id = 0;
        for (int i = 0; i < N; ++i) id = id * dims[i] + pr[i].first * fp.local_q(i) + pr[i].second;
        return id;
    };

    // prescriptions enumerated exactly as tables (local, q) -> action
    std::vector<int> table_cells(N), table_count(N);
    int joint_prescriptions = 1;
    for (int i = 0; i < N; ++i) {
        table_cells[i] = ma.locals[i].num_states * fp.local_q(i);
        int c = 1;
        for (int e = 0; e < table_cells[i]; ++e) c *= ma.agent_actions[i];
        table_count[i] = c;
        joint_prescriptions *= c;
    }
    auto prescribed = [&](int gamma, int agent, int local, int q) {
        for (int i = N - 1; i > agent; --i) gamma /= table_count[i];
        gamma %= table_count[agent];
        int entry = local * fp.local_q(agent) + q;
        for (int e = 0; e < entry; ++e) gamma /= ma.agent_actions[agent];
        return gamma % ma.agent_actions[agent];
    };

    std::function<Real(int, int, const Vec&, int)> value = [&](int t, int s, const Vec& belief,
                                                               int qg) -> Real {
        Real best = -std::numeric_limits<Real>::infinity();
        const int qg2 = fp.bundle.dfa_global.step(qg, ma.shared_label[s]);
        for (int gamma = 0; gamma < joint_prescriptions; ++gamma) {
            Real val = 0;
            // immediate reward and, at the horizon, the accept bonus
            // successor bookkeeping: (joint u, s') -> belief over next profiles
            std::map<std::pair<int, int>, Vec> branches;
            for (int pid = 0; pid < profiles; ++pid) {
                if (belief[pid] == 0) continue;
                auto pr = unpack_profile(pid);
                std::vector<int> u(N), loc(N);
                for (int i = 0; i < N; ++i) {
                    u[i] = prescribed(gamma, i, pr[i].first, pr[i].second);
                    loc[i] = pr[i].first;
                }
                int ju = ma.pack_action(u);
                val += belief[pid] * ma.r(s, loc, ju);

                // advance private automata on the labels being left
                std::vector<int> q2(N);
                for (int i = 0; i < N; ++i) {
                    Letter l = ma.locals[i].label[static_cast<std::size_t>(s) *
                                                      ma.locals[i].num_states +
                                                  pr[i].first];
                    q2[i] = fp.bundle.dfa_local[i].step(pr[i].second, l);
                }

                if (t == T) {
                    // accept = global and every local automaton accepting
                    std::vector<int> qi(N);
                    for (int i = 0; i < N; ++i) qi[i] = q2[i];
                    if (fp.accepting(qg2, qi)) val += belief[pid] * lambda_f;
                    continue;
                }

                for (auto [s2, ps] : ma.shared_trans[ju].row(s)) {
                    // expand local kernels jointly
                    std::vector<std::pair<std::vector<std::pair<int, int>>, Real>> combos{
                        {{}, belief[pid] * ps}};
                    for (int i = 0; i < N; ++i) {
                        std::vector<std::pair<std::vector<std::pair<int, int>>, Real>> next;
                        int krow = pr[i].first * ma.num_shared + s;
                        for (const auto& [prefix, pp] : combos)
                            for (auto [l2, pl] : ma.locals[i].trans[ju].row(krow)) {
                                auto ext = prefix;
                                ext.push_back({l2, q2[i]});
                                next.emplace_back(std::move(ext), pp * pl);
                            }
                        combos = std::move(next);
                    }
                    auto& b = branches[{ju, s2}];
                    if (b.empty()) b.assign(profiles, 0.0);
                    for (const auto& [profile, pp] : combos) b[pack_profile(profile)] += pp;
                }
            }
            if (t < T) {
                for (auto& [key, b] : branches) {
                    Real mass = 0;
                    for (Real x : b) mass += x;
                    if (mass <= 0) continue;
                    Vec nb = b;
                    for (Real& x : nb) x /= mass;
                    val += mass * value(t + 1, key.second, nb, qg2);
                }
            }
            best = std::max(best, val);
        }
        return best;
    };

    // root: shared state observed, private profile belief conditioned on it
    std::map<int, Vec> roots;
    std::map<int, Real> root_mass;
    for (const auto& e : ma.init) {
        std::vector<std::pair<int, int>> pr(N);
        for (int i = 0; i < N; ++i) pr[i] = {e.local[i], fp.bundle.dfa_local[i].initial};
        auto& b = roots[e.shared];
        if (b.empty()) b.assign(profiles, 0.0);
        b[pack_profile(pr)] += e.prob;
        root_mass[e.shared] += e.prob;
    }
    Real total = 0;
    for (auto& [s, b] : roots) {
        Vec nb = b;
        for (Real& x : nb) x /= root_mass[s];
        total += root_mass[s] * value(0, s, nb, fp.bundle.dfa_global.initial);
    }
    return total;
}

}  // namespace testsupport
