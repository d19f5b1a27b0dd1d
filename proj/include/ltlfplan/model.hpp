#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ltlfplan/common.hpp"
#include "ltlfplan/ltlf.hpp"

namespace ltlfplan {

/// Row-major sparse matrix; rows are the hot access path (transition rows
/// P(s,u,.), observation rows Z(s,.)).
class SparseMatrix {
public:
    SparseMatrix() = default;
    SparseMatrix(int rows, int cols) : rows_(rows), cols_(cols), offsets_(rows + 1, 0) {}

    static SparseMatrix from_rows(int rows, int cols,
                                  const std::vector<std::vector<std::pair<int, Real>>>& data) {
        SparseMatrix m(rows, cols);
        m.offsets_.assign(1, 0);
        for (int r = 0; r < rows; ++r) {
            auto row = data[r];
            std::sort(row.begin(), row.end());
            for (auto& [c, v] : row) {
                m.col_.push_back(c);
                m.val_.push_back(v);
            }
            m.offsets_.push_back(m.col_.size());
        }
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    struct Entry {
        int col;
        Real val;
    };

    class RowView {
    public:
        RowView(const int* c, const Real* v, std::size_t n) : c_(c), v_(v), n_(n) {}
        std::size_t size() const { return n_; }
        struct Iter {
            const int* c;
            const Real* v;
            bool operator!=(const Iter& o) const { return c != o.c; }
            void operator++() { ++c, ++v; }
            std::pair<int, Real> operator*() const { return {*c, *v}; }
        };
        Iter begin() const { return {c_, v_}; }
        Iter end() const { return {c_ + n_, v_ + n_}; }

    private:
        const int* c_;
        const Real* v_;
        std::size_t n_;
    };

    RowView row(int r) const {
        return RowView(col_.data() + offsets_[r], val_.data() + offsets_[r],
                       offsets_[r + 1] - offsets_[r]);
    }

    Real row_sum(int r) const {
        Real s = 0;
        for (auto [c, v] : row(r)) s += v;
        return s;
    }

    /// Value at (r, c); zero when absent.
    Real at(int r, int c) const {
        auto lo = col_.begin() + offsets_[r], hi = col_.begin() + offsets_[r + 1];
        auto it = std::lower_bound(lo, hi, c);
        if (it == hi || *it != c) return 0;
        return val_[static_cast<std::size_t>(it - col_.begin())];
    }

    Real min_value() const {
        Real m = 0;
        for (Real v : val_) m = std::min(m, v);
        return m;
    }

    std::size_t nnz() const { return col_.size(); }

    bool operator==(const SparseMatrix&) const = default;

private:
    int rows_ = 0, cols_ = 0;
    std::vector<std::size_t> offsets_;
    std::vector<int> col_;
    std::vector<Real> val_;
};

enum class HorizonKind { Fixed, Geometric, Goal };

struct HorizonModel {
    HorizonKind kind = HorizonKind::Fixed;
    int T = 0;                // Fixed
    Real gamma = 0;           // Geometric: continuation probability, 0 < gamma < 1
    std::vector<int> goals;   // Goal: terminating states, ascending

    static HorizonModel fixed(int T) { return {HorizonKind::Fixed, T, 0, {}}; }
    static HorizonModel geometric(Real gamma) { return {HorizonKind::Geometric, 0, gamma, {}}; }
    static HorizonModel goal(std::vector<int> goals) {
        std::sort(goals.begin(), goals.end());
        return {HorizonKind::Goal, 0, 0, std::move(goals)};
    }
    bool is_goal_state(int s) const {
        return std::binary_search(goals.begin(), goals.end(), s);
    }
    bool operator==(const HorizonModel&) const = default;
};

/// Assumption-style bounds extracted by validate().
struct RewardBounds {
    Real R_max = 0;  // upper bound on total expected constraint reward
    Real T_max = 0;  // upper bound on E[T]
    Real R_m = 0;    // upper bound on the unconstrained objective value
    Real G = 1;      // max(R_max, 1)
};

/// Finite POMDP with a labeling function, objective/constraint reward
/// channels, and a horizon model. Immutable after construction; simulate is
/// reentrant with caller-owned RNG state.
struct LabeledPomdp {
    int num_states = 0;
    int num_actions = 0;
    int num_obs = 0;
    std::vector<SparseMatrix> trans;  // per action: S x S
    SparseMatrix obs;                 // S x O
    Vec init;                         // length S
    AtomTable atoms;
    std::vector<Letter> labels;       // length S
    Vec reward_obj;                   // [s * U + u]
    Vec reward_con;
    HorizonModel horizon;

    Real r_obj(int s, int u) const { return reward_obj[static_cast<std::size_t>(s) * num_actions + u]; }
    Real r_con(int s, int u) const { return reward_con[static_cast<std::size_t>(s) * num_actions + u]; }
};

struct ValidateOptions {
    Real tol = 1e-9;
};

inline constexpr std::size_t kGoalStepCap = 100000;

/// Stochasticity checks plus the horizon-specific reward bounds.
inline RewardBounds validate(const LabeledPomdp& m, const ValidateOptions& opts = {}) {
    for (int u = 0; u < m.num_actions; ++u)
        for (int s = 0; s < m.num_states; ++s) {
            Real sum = m.trans[u].row_sum(s);
            if (std::abs(sum - 1.0) > opts.tol)
                throw NotStochastic("P[u=" + std::to_string(u) + "][s=" + std::to_string(s) + "]", sum);
        }
    for (int s = 0; s < m.num_states; ++s) {
        Real sum = m.obs.row_sum(s);
        if (std::abs(sum - 1.0) > opts.tol)
            throw NotStochastic("Z[s=" + std::to_string(s) + "]", sum);
    }
    Real isum = 0;
    for (Real p : m.init) isum += p;
    if (std::abs(isum - 1.0) > opts.tol) throw NotStochastic("init", isum);

    Real rc_max = 0, rc_min = 0, ro_max = 0;
    for (std::size_t i = 0; i < m.reward_con.size(); ++i) {
        rc_max = std::max(rc_max, m.reward_con[i]);
        rc_min = std::min(rc_min, m.reward_con[i]);
        ro_max = std::max(ro_max, m.reward_obj[i]);
    }

    RewardBounds b;
    switch (m.horizon.kind) {
        case HorizonKind::Fixed:
            b.T_max = m.horizon.T;
            b.R_max = (m.horizon.T + 1) * std::max(rc_max, 0.0);
            b.R_m = (m.horizon.T + 1) * std::max(ro_max, 0.0);
            break;
        case HorizonKind::Geometric: {
            if (rc_min < 0) {
                for (int s = 0; s < m.num_states; ++s)
                    for (int u = 0; u < m.num_actions; ++u)
                        if (m.r_con(s, u) < 0) throw NegativeConstraintReward(s, u);
            }
            Real g = m.horizon.gamma;
            if (!(g > 0 && g < 1)) throw WrongHorizon("geometric horizon requires 0 < gamma < 1");
            b.T_max = g / (1 - g);
            b.R_max = rc_max / (1 - g);
            b.R_m = std::max(ro_max, 0.0) / (1 - g);
            break;
        }
        case HorizonKind::Goal: {
            // an empty set is allowed here: goal POMDPs whose terminal set is
            // the automaton acceptance get their goals at product build time
            for (int gs : m.horizon.goals)
                if (gs < 0 || gs >= m.num_states) throw WrongHorizon("goal state out of range");
            for (int gs : m.horizon.goals)
                if (m.init[gs] > 0) throw WrongHorizon("initial mass on a goal state");
            // Bounds hold only over proper policies; the simulation step cap
            // stands in for T_max.
            b.T_max = static_cast<Real>(kGoalStepCap);
            b.R_max = b.T_max * std::max(rc_max, 0.0);
            b.R_m = 0;  // goal models require strictly negative rewards off-goal
            break;
        }
    }
    b.G = std::max(b.R_max, 1.0);
    return b;
}

/// Stateful policy: consumes observations one at a time; the implementation
/// owns whatever summary of {O_0:t, U_0:t-1} it needs.
class PolicyExecutor {
public:
    virtual ~PolicyExecutor() = default;
    virtual void reset() = 0;
    virtual int act(int obs) = 0;
};

/// Adapter for tests and ad-hoc policies: full histories in, action out.
class FunctionPolicy final : public PolicyExecutor {
public:
    using Fn = std::function<int(std::span<const int> obs_hist, std::span<const int> act_hist)>;
    explicit FunctionPolicy(Fn fn) : fn_(std::move(fn)) {}
    void reset() override {
        obs_.clear();
        act_.clear();
    }
    int act(int obs) override {
        obs_.push_back(obs);
        int u = fn_(obs_, act_);
        act_.push_back(u);
        return u;
    }

private:
    Fn fn_;
    std::vector<int> obs_, act_;
};

struct Trajectory {
    std::vector<int> states;        // S_0 .. S_T
    std::vector<int> actions;       // U_0 .. U_T
    std::vector<int> observations;  // O_0 .. O_T
    std::vector<Letter> letters;    // L(S_0) .. L(S_T)
    int terminal_state = -1;        // S_{T+1}
    int realized_T = 0;
};

struct SimulateOptions {
    std::size_t step_cap = kGoalStepCap;  // applies to goal horizons
};

/// Samples one run under P, Z, the initial distribution and the horizon
/// model. Deterministic given the seed.
inline Trajectory simulate(const LabeledPomdp& m, PolicyExecutor& policy, std::uint64_t seed,
                           const SimulateOptions& opts = {}) {
    Rng rng(seed);
    policy.reset();
    Trajectory traj;
    int s = rng.sample_dense(m.init);
    for (std::size_t t = 0;; ++t) {
        int o = rng.sample_sparse(m.obs.row(s));
        int u = policy.act(o);
        traj.states.push_back(s);
        traj.actions.push_back(u);
        traj.observations.push_back(o);
        traj.letters.push_back(m.labels[s]);
        int s_next = rng.sample_sparse(m.trans[u].row(s));
        bool stop = false;
        switch (m.horizon.kind) {
            case HorizonKind::Fixed: stop = (static_cast<int>(t) == m.horizon.T); break;
            case HorizonKind::Geometric: stop = rng.next_bernoulli(1 - m.horizon.gamma); break;
            case HorizonKind::Goal:
                stop = m.horizon.is_goal_state(s_next);
                if (!stop && t + 1 >= opts.step_cap) throw NonTermination(opts.step_cap);
                break;
        }
        s = s_next;
        if (stop) break;
    }
    traj.terminal_state = s;
    traj.realized_T = static_cast<int>(traj.actions.size()) - 1;
    return traj;
}

/// The word w = L(S_0) L(S_1) ... L(S_T) generated by a run.
inline std::vector<Letter> label_word(const LabeledPomdp& m, const Trajectory& traj) {
    std::vector<Letter> w;
    w.reserve(traj.states.size());
    for (int s : traj.states) w.push_back(m.labels[s]);
    return w;
}

}  // namespace ltlfplan
