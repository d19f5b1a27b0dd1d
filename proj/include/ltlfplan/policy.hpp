#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <variant>
#include <vector>

#include "ltlfplan/common.hpp"
#include "ltlfplan/product.hpp"

namespace ltlfplan {

constexpr Real kBeliefFloor = 1e-12;

/// Posterior over product states; entries nonnegative, sum ~1.
using Belief = Vec;

struct AlphaVector {
    int action = 0;
    Vec values;
};

/// Stationary pure policy: track the belief, act by the maximizing vector.
struct AlphaPolicy {
    std::vector<AlphaVector> alphas;
    std::uint64_t geometry_hash = 0;
};

/// Finite-horizon pure policy as an observation-history tree.
struct DecisionTreePolicy {
    struct Node {
        int action = 0;
        std::vector<int> child;  // per observation, -1 beyond horizon
    };
    std::vector<int> root;  // per first observation
    std::vector<Node> nodes;
};

using PurePolicy = std::variant<AlphaPolicy, DecisionTreePolicy>;
using PurePolicyPtr = std::shared_ptr<const PurePolicy>;

/// Finite distribution over pure policies; weights positive, sum to one.
struct MixedPolicy {
    std::vector<PurePolicyPtr> policies;
    Vec weights;

    void check() const {
        Real sum = 0;
        for (Real w : weights) {
            if (w <= 0) throw std::invalid_argument("mixed policy weight must be positive");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("mixed policy weights must sum to 1");
    }
};

inline std::uint64_t geometry_hash(const ProductPomdp& p) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::uint64_t v) {
        h ^= v;
        h *= 1099511628211ULL;
    };
    mix(static_cast<std::uint64_t>(p.num_states));
    mix(static_cast<std::uint64_t>(p.num_actions));
    mix(static_cast<std::uint64_t>(p.num_obs));
    for (const auto& t : p.trans) mix(t.nnz());
    return h;
}

/// Bayes update with the observation likelihoods; observation probabilities
/// below kBeliefFloor are flagged as impossible.
inline void belief_observe(const ProductPomdp& p, Belief& b, int obs) {
    Real mass = 0;
    for (int x = 0; x < p.num_states; ++x) {
        if (b[x] == 0) continue;
        b[x] *= p.obs.at(x, obs);
        mass += b[x];
    }
    if (mass < kBeliefFloor)
        throw std::runtime_error("impossible observation " + std::to_string(obs) +
                                 " under current belief");
    for (int x = 0; x < p.num_states; ++x) b[x] /= mass;
}

inline void belief_predict(const ProductPomdp& p, Belief& b, int action, Belief& scratch) {
    scratch.assign(p.num_states, 0.0);
    for (int x = 0; x < p.num_states; ++x) {
        if (b[x] == 0) continue;
        for (auto [xn, pr] : p.trans[action].row(x)) scratch[xn] += b[x] * pr;
    }
    b.swap(scratch);
}

inline int best_alpha(const AlphaPolicy& pol, const Belief& b) {
    int best = 0;
    Real best_v = -std::numeric_limits<Real>::infinity();
    for (std::size_t i = 0; i < pol.alphas.size(); ++i) {
        Real v = 0;
        const Vec& a = pol.alphas[i].values;
        for (std::size_t x = 0; x < b.size(); ++x) v += a[x] * b[x];
        if (v > best_v) {
            best_v = v;
            best = static_cast<int>(i);
        }
    }
    return best;
}

/// Belief-tracking executor with explicit support bookkeeping: coordinator
/// and labeled-grid beliefs concentrate on few states, so updates and alpha
/// dot products touch only the support.
class AlphaExecutor final : public PolicyExecutor {
public:
    AlphaExecutor(const ProductPomdp& p, const AlphaPolicy& pol) : p_(p), pol_(pol) {
        belief_.assign(p.num_states, 0.0);
        scratch_.assign(p.num_states, 0.0);
        touched_.assign(p.num_states, 0);
    }

    void reset() override {
        for (int x : support_) belief_[x] = 0;
        support_.clear();
        for (int x = 0; x < p_.num_states; ++x)
            if (p_.init[x] > 0) {
                belief_[x] = p_.init[x];
                support_.push_back(x);
            }
    }

    int act(int obs) override {
        // posterior restricted to the support
        Real mass = 0;
        std::size_t w = 0;
        for (int x : support_) {
            Real v = belief_[x] * p_.obs.at(x, obs);
            belief_[x] = v;
            if (v > 0) {
                support_[w++] = x;
                mass += v;
            }
        }
        support_.resize(w);
        if (mass < kBeliefFloor)
            throw std::runtime_error("impossible observation " + std::to_string(obs) +
                                     " under current belief");
        for (int x : support_) belief_[x] /= mass;

        // maximizing alpha over the support
        int best = 0;
        Real best_v = -std::numeric_limits<Real>::infinity();
        for (std::size_t i = 0; i < pol_.alphas.size(); ++i) {
            Real v = 0;
            const Vec& a = pol_.alphas[i].values;
            for (int x : support_) v += a[x] * belief_[x];
            if (v > best_v) {
                best_v = v;
                best = static_cast<int>(i);
            }
        }
        const int u = pol_.alphas[best].action;

        // predict
        next_support_.clear();
        for (int x : support_) {
            for (auto [xn, pr] : p_.trans[u].row(x)) {
                if (!touched_[xn]) {
                    touched_[xn] = 1;
                    next_support_.push_back(xn);
                }
                scratch_[xn] += belief_[x] * pr;
            }
            belief_[x] = 0;
        }
        support_.clear();
        for (int xn : next_support_) {
            touched_[xn] = 0;
            if (scratch_[xn] > 0) {
                belief_[xn] = scratch_[xn];
                support_.push_back(xn);
            }
            scratch_[xn] = 0;
        }
        return u;
    }

    const Belief& belief() const { return belief_; }

private:
    const ProductPomdp& p_;
    const AlphaPolicy& pol_;
    Belief belief_, scratch_;
    std::vector<int> support_, next_support_;
    std::vector<char> touched_;
};

class TreeExecutor final : public PolicyExecutor {
public:
    explicit TreeExecutor(const DecisionTreePolicy& pol) : pol_(pol) {}
    void reset() override {
        cur_ = -1;
        started_ = false;
    }
    int act(int obs) override {
        if (!started_) {
            started_ = true;
            cur_ = obs < static_cast<int>(pol_.root.size()) ? pol_.root[obs] : -1;
        } else if (cur_ >= 0) {
            const auto& ch = pol_.nodes[cur_].child;
            cur_ = obs < static_cast<int>(ch.size()) ? ch[obs] : -1;
        }
        return cur_ >= 0 ? pol_.nodes[cur_].action : 0;
    }

private:
    const DecisionTreePolicy& pol_;
    int cur_ = -1;
    bool started_ = false;
};

inline std::unique_ptr<PolicyExecutor> make_executor(const ProductPomdp& p, const PurePolicy& pol) {
    if (const auto* a = std::get_if<AlphaPolicy>(&pol))
        return std::make_unique<AlphaExecutor>(p, *a);
    return std::make_unique<TreeExecutor>(std::get<DecisionTreePolicy>(pol));
}

// ---------------------------------------------------------------------------
// Rollouts
// ---------------------------------------------------------------------------

/// Per-rollout totals of the three product reward channels.
struct RolloutValues {
    Real obj = 0;
    Real con = 0;
    Real accept = 0;
    int realized_T = 0;
};

inline RolloutValues product_rollout(const ProductPomdp& p, PolicyExecutor& policy,
                                     Rng& rng, std::size_t step_cap = kGoalStepCap) {
    policy.reset();
    RolloutValues out;
    int x = rng.sample_dense(p.init);
    for (std::size_t t = 0;; ++t) {
        int o = rng.sample_sparse(p.obs.row(x));
        int u = policy.act(o);
        out.obj += p.r_obj(x, u);
        out.con += p.r_con(x, u);
        int xn = rng.sample_sparse(p.trans[u].row(x));
        bool stop = false;
        switch (p.horizon.kind) {
            case HorizonKind::Fixed: stop = (static_cast<int>(t) == p.horizon.T); break;
            case HorizonKind::Geometric: stop = rng.next_bernoulli(1 - p.horizon.gamma); break;
            case HorizonKind::Goal:
                stop = p.horizon.is_goal_state(xn);
                if (!stop && t + 1 >= step_cap) throw NonTermination(step_cap);
                break;
        }
        if (stop) {
            out.accept = p.r_f(xn);
            out.realized_T = static_cast<int>(t);
            return out;
        }
        x = xn;
    }
}

// ---------------------------------------------------------------------------
// Exact channel evaluation by forward enumeration
// ---------------------------------------------------------------------------

enum class Channel { Objective, Constraint, Accept };

struct ChannelValues {
    Real obj = 0;
    Real con = 0;
    Real accept = 0;
    Real truncation = 0;  // residual bound for geometric horizons

    Real get(Channel c) const {
        switch (c) {
            case Channel::Objective: return obj;
            case Channel::Constraint: return con;
            case Channel::Accept: return accept;
        }
        return 0;
    }
};

struct ExactEvalOptions {
    std::size_t node_cap = 1000000;
    Real eps_trunc = 1e-9;
};

namespace detail {

/// Policy cursor over the enumeration: either a tree node or the belief
/// implied by the unnormalized branch distribution.
struct PolicyCursor {
    const AlphaPolicy* alpha = nullptr;
    const DecisionTreePolicy* tree = nullptr;
    int tree_node = -1;
    bool started = false;

    PolicyCursor advanced(int obs) const {
        PolicyCursor c = *this;
        if (tree) {
            if (!c.started) {
                c.started = true;
                c.tree_node = obs < static_cast<int>(tree->root.size()) ? tree->root[obs] : -1;
            } else if (c.tree_node >= 0) {
                const auto& ch = tree->nodes[c.tree_node].child;
                c.tree_node = obs < static_cast<int>(ch.size()) ? ch[obs] : -1;
            }
        }
        return c;
    }

    int action(const Vec& branch) const {
        if (tree) return tree_node >= 0 ? tree->nodes[tree_node].action : 0;
        Real mass = 0;
        for (Real v : branch) mass += v;
        Belief b(branch);
        for (Real& v : b) v /= mass;
        return alpha->alphas[best_alpha(*alpha, b)].action;
    }
};

struct ExactEval {
    const ProductPomdp& p;
    const ExactEvalOptions& opts;
    ChannelValues acc;
    std::size_t nodes = 0;
    int max_depth = 0;  // geometric truncation depth; unused for fixed

    void run(const PurePolicy& pol) {
        PolicyCursor cur;
        if (const auto* a = std::get_if<AlphaPolicy>(&pol)) cur.alpha = a;
        else cur.tree = &std::get<DecisionTreePolicy>(pol);

        if (p.horizon.kind == HorizonKind::Goal)
            throw WrongHorizon("exact evaluation supports fixed and geometric horizons");
        if (p.horizon.kind == HorizonKind::Geometric) {
            Real g = p.horizon.gamma;
            Real r_obj_max = 0, r_con_max = 0;
            for (std::size_t i = 0; i < p.reward_obj.size(); ++i) {
                r_obj_max = std::max(r_obj_max, std::abs(p.reward_obj[i]));
                r_con_max = std::max(r_con_max, std::abs(p.reward_con[i]));
            }
            Real coeff = std::max({r_obj_max / (1 - g), r_con_max / (1 - g), 1.0});
            max_depth = 1;
            while (std::pow(g, max_depth) * coeff > opts.eps_trunc && max_depth < 100000)
                ++max_depth;
            acc.truncation = std::pow(g, max_depth) * coeff;
        }

        for (int o = 0; o < p.num_obs; ++o) {
            Vec d(p.num_states, 0.0);
            Real mass = 0;
            for (int x = 0; x < p.num_states; ++x) {
                if (p.init[x] == 0) continue;
                d[x] = p.init[x] * p.obs.at(x, o);
                mass += d[x];
            }
            if (mass <= 0) continue;
            recurse(d, 0, cur.advanced(o));
        }
    }

    void recurse(const Vec& d, int t, PolicyCursor cur) {
        if (++nodes > opts.node_cap)
            throw BlowUp("exact evaluation exceeded node cap of " + std::to_string(opts.node_cap));
        const bool geometric = p.horizon.kind == HorizonKind::Geometric;
        const Real w = geometric ? std::pow(p.horizon.gamma, t) : 1.0;
        const int u = cur.action(d);

        for (int x = 0; x < p.num_states; ++x) {
            if (d[x] == 0) continue;
            acc.obj += w * d[x] * p.r_obj(x, u);
            acc.con += w * d[x] * p.r_con(x, u);
        }

        Vec d2(p.num_states, 0.0);
        for (int x = 0; x < p.num_states; ++x) {
            if (d[x] == 0) continue;
            for (auto [xn, pr] : p.trans[u].row(x)) d2[xn] += d[x] * pr;
        }

        if (geometric) {
            const Real wf = (1 - p.horizon.gamma) * w;
            for (int x = 0; x < p.num_states; ++x)
                if (d2[x] != 0 && p.accept[x]) acc.accept += wf * d2[x];
            if (t + 1 >= max_depth) return;
        } else {
            if (t == p.horizon.T) {
                for (int x = 0; x < p.num_states; ++x)
                    if (d2[x] != 0 && p.accept[x]) acc.accept += d2[x];
                return;
            }
        }

        for (int o = 0; o < p.num_obs; ++o) {
            Vec d3(p.num_states, 0.0);
            Real mass = 0;
            for (int x = 0; x < p.num_states; ++x) {
                if (d2[x] == 0) continue;
                d3[x] = d2[x] * p.obs.at(x, o);
                mass += d3[x];
            }
            if (mass <= 0) continue;
            recurse(d3, t + 1, cur.advanced(o));
        }
    }
};

}  // namespace detail

/// All three expected channel values of a pure policy by exact forward
/// enumeration over (observation history, state) pairs.
inline ChannelValues eval_policy_exact_all(const ProductPomdp& p, const PurePolicy& pol,
                                           const ExactEvalOptions& opts = {}) {
    detail::ExactEval ev{p, opts};
    ev.run(pol);
    return ev.acc;
}

inline Real eval_policy_exact(const ProductPomdp& p, const PurePolicy& pol, Channel channel,
                              const ExactEvalOptions& opts = {}) {
    return eval_policy_exact_all(p, pol, opts).get(channel);
}

/// Channel values of a mixed policy: the weight-average of its atoms.
inline ChannelValues eval_policy_exact_all(const ProductPomdp& p, const MixedPolicy& mix,
                                           const ExactEvalOptions& opts = {}) {
    mix.check();
    ChannelValues out;
    for (std::size_t i = 0; i < mix.policies.size(); ++i) {
        ChannelValues v = eval_policy_exact_all(p, *mix.policies[i], opts);
        out.obj += mix.weights[i] * v.obj;
        out.con += mix.weights[i] * v.con;
        out.accept += mix.weights[i] * v.accept;
        out.truncation = std::max(out.truncation, v.truncation);
    }
    return out;
}

}  // namespace ltlfplan
