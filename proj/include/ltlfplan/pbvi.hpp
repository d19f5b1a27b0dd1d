#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <vector>

#include "ltlfplan/common.hpp"
#include "ltlfplan/policy.hpp"
#include "ltlfplan/solve.hpp"

namespace ltlfplan {

struct PbviConfig {
    Real target_gap_abs = 1e-6;
    Real target_gap_rel = 1e-3;   // relative to |root value|
    Real timeout_s = 30.0;
    int max_trials = 200000;
    int max_depth = 2000;
    std::size_t max_ub_points = 4000;
    std::uint64_t seed = 0;  // exploration is deterministic; kept for config surfacing
};

struct PbviResult {
    AlphaPolicy policy;
    Real value_lower = 0;
    Real value_upper = 0;
    Real gap = 0;
    bool timed_out = false;
    int trials = 0;
};

namespace detail {

class PbviSolver {
public:
    PbviSolver(const ScalarizedPomdp& sp, const PbviConfig& cfg)
        : sp_(sp), p_(*sp.base), cfg_(cfg), nS_(p_.num_states), nU_(p_.num_actions),
          nO_(p_.num_obs) {}

    PbviResult run() {
        init_bounds();
        init_roots();

        const auto t_start = std::chrono::steady_clock::now();
        auto elapsed = [&] {
            return std::chrono::duration<Real>(std::chrono::steady_clock::now() - t_start).count();
        };

        PbviResult res;
        int trials = 0;
        while (trials < cfg_.max_trials) {
            auto [lb, ub] = root_bounds();
            Real target = std::max(cfg_.target_gap_abs,
                                   cfg_.target_gap_rel * std::max(std::abs(lb), std::abs(ub)));
            if (ub - lb <= target) break;
            if (elapsed() > cfg_.timeout_s) {
                res.timed_out = true;
                break;
            }
            trial(target);
            ++trials;
        }

        auto [lb, ub] = root_bounds();
        res.value_lower = lb;
        res.value_upper = ub;
        res.gap = std::max(ub - lb, 0.0);
        res.trials = trials;
        res.policy.alphas = lb_alphas_;
        res.policy.geometry_hash = geometry_hash(p_);
        return res;
    }

private:
    static constexpr Real kTiny = 1e-12;

    void init_bounds() {
        const Real g = sp_.gamma;
        Real rmax = -std::numeric_limits<Real>::infinity();
        Real rmin = std::numeric_limits<Real>::infinity();
        for (Real r : sp_.reward) {
            rmax = std::max(rmax, r);
            rmin = std::min(rmin, r);
        }
        const Real scale = std::max({std::abs(rmax), std::abs(rmin), 1.0}) / (1 - g);
        const Real tol = 1e-10 * scale;
        // value iteration is monotone from above (and the blind bound from
        // below), so truncating the iteration keeps both bounds valid
        const int iter_cap = 20000;

        // MDP upper bound, from above
        Vec v(nS_, rmax / (1 - g)), v2(nS_);
        for (int it = 0; it < iter_cap; ++it) {
            Real change = 0;
            for (int x = 0; x < nS_; ++x) {
                Real best = -std::numeric_limits<Real>::infinity();
                for (int u = 0; u < nU_; ++u) {
                    Real q = sp_.r(x, u);
                    for (auto [xn, pr] : p_.trans[u].row(x)) q += g * pr * v[xn];
                    best = std::max(best, q);
                }
                v2[x] = best;
                change = std::max(change, std::abs(v2[x] - v[x]));
            }
            v.swap(v2);
            if (change < tol) break;
        }

        // fast-informed bound refinement (bounded effort)
        std::vector<Vec> fib(nU_, v);
        const std::size_t fib_cost = static_cast<std::size_t>(nU_) * nU_ * nO_ * nS_;
        if (fib_cost < 50000000) {
            Vec zo(nS_), best_t(nS_), t(nS_);
            for (int it = 0; it < 120; ++it) {
                Real change = 0;
                std::vector<Vec> next(nU_, Vec(nS_, 0.0));
                for (int u = 0; u < nU_; ++u)
                    for (int x = 0; x < nS_; ++x) next[u][x] = sp_.r(x, u);
                for (int o = 0; o < nO_; ++o) {
                    // best_t(x,u) = max_{u'} sum_{x'} P(x,u,x') Z(x',o) fib_{u'}(x')
                    for (int u = 0; u < nU_; ++u) {
                        std::fill(best_t.begin(), best_t.end(),
                                  -std::numeric_limits<Real>::infinity());
                        for (int up = 0; up < nU_; ++up) {
                            for (int x = 0; x < nS_; ++x) zo[x] = p_.obs.at(x, o) * fib[up][x];
                            for (int x = 0; x < nS_; ++x) {
                                Real s = 0;
                                for (auto [xn, pr] : p_.trans[u].row(x)) s += pr * zo[xn];
                                t[x] = s;
                            }
                            for (int x = 0; x < nS_; ++x) best_t[x] = std::max(best_t[x], t[x]);
                        }
                        for (int x = 0; x < nS_; ++x) next[u][x] += g * best_t[x];
                    }
                }
                for (int u = 0; u < nU_; ++u)
                    for (int x = 0; x < nS_; ++x) {
                        change = std::max(change, std::abs(next[u][x] - fib[u][x]));
                        fib[u][x] = std::min(next[u][x], fib[u][x]);  // keep monotone from above
                    }
                if (change < tol * 10) break;
            }
        }
        corner_.assign(nS_, -std::numeric_limits<Real>::infinity());
        for (int x = 0; x < nS_; ++x)
            for (int u = 0; u < nU_; ++u) corner_[x] = std::max(corner_[x], fib[u][x]);

        // blind-policy lower bound, from below
        lb_alphas_.clear();
        for (int u = 0; u < nU_; ++u) {
            Vec a(nS_, rmin / (1 - g)), a2(nS_);
            for (int it = 0; it < iter_cap; ++it) {
                Real change = 0;
                for (int x = 0; x < nS_; ++x) {
                    Real q = sp_.r(x, u);
                    for (auto [xn, pr] : p_.trans[u].row(x)) q += g * pr * a[xn];
                    a2[x] = q;
                    change = std::max(change, std::abs(a2[x] - a[x]));
                }
                a.swap(a2);
                if (change < tol) break;
            }
            add_alpha(AlphaVector{u, std::move(a)});
        }
    }

    void init_roots() {
        for (auto& br : expand_obs(p_.init))
            roots_.push_back({br.mass, std::move(br.tau)});
    }

    std::pair<Real, Real> root_bounds() const {
        Real lb = 0, ub = 0;
        for (const auto& [w, b] : roots_) {
            lb += w * lower_value(b);
            ub += w * upper_value(b);
        }
        return {lb, ub};
    }

    Real lower_value(const Belief& b) const {
        Real best = -std::numeric_limits<Real>::infinity();
        for (const auto& a : lb_alphas_) {
            Real v = 0;
            for (int x = 0; x < nS_; ++x) v += a.values[x] * b[x];
            best = std::max(best, v);
        }
        return best;
    }

    Real upper_value(const Belief& b) const {
        Real corner_dot = 0;
        for (int x = 0; x < nS_; ++x) corner_dot += corner_[x] * b[x];
        Real best = corner_dot;
        for (const auto& pt : ub_points_) {
            if (pt.gain >= 0) continue;  // no improvement over the corner bound
            Real ratio = std::numeric_limits<Real>::infinity();
            for (std::size_t i = 0; i < pt.support.size(); ++i) {
                Real bi = b[pt.support[i]];
                if (bi <= 0) {
                    ratio = 0;
                    break;
                }
                ratio = std::min(ratio, bi / pt.mass[i]);
            }
            if (ratio <= 0) continue;
            best = std::min(best, corner_dot + ratio * pt.gain);
        }
        return best;
    }

    void add_alpha(AlphaVector a) {
        for (const auto& old : lb_alphas_) {
            bool dominated = true;
            for (int x = 0; x < nS_; ++x)
                if (a.values[x] > old.values[x] + kTiny) {
                    dominated = false;
                    break;
                }
            if (dominated) return;
        }
        std::erase_if(lb_alphas_, [&](const AlphaVector& old) {
            for (int x = 0; x < nS_; ++x)
                if (old.values[x] > a.values[x] + kTiny) return false;
            return true;
        });
        lb_alphas_.push_back(std::move(a));
    }

    void add_ub_point(const Belief& b, Real v) {
        Real corner_dot = 0;
        for (int x = 0; x < nS_; ++x) corner_dot += corner_[x] * b[x];
        Real gain = v - corner_dot;
        if (gain >= -kTiny) return;
        if (v >= upper_value(b) - kTiny) return;  // not an improvement
        UbPoint pt;
        pt.gain = gain;
        for (int x = 0; x < nS_; ++x)
            if (b[x] > 0) {
                pt.support.push_back(x);
                pt.mass.push_back(b[x]);
            }
        ub_points_.push_back(std::move(pt));
        if (ub_points_.size() > cfg_.max_ub_points) {
            // Keep the most informative points; dropping points only loosens
            // the bound, never breaks it.
            std::nth_element(ub_points_.begin(), ub_points_.begin() + cfg_.max_ub_points * 3 / 4,
                             ub_points_.end(),
                             [](const UbPoint& a, const UbPoint& b) { return a.gain < b.gain; });
            ub_points_.resize(cfg_.max_ub_points * 3 / 4);
        }
    }

    // predicted belief and per-observation posteriors
    void predict(const Belief& b, int u, Belief& bp) const {
        bp.assign(nS_, 0.0);
        for (int x = 0; x < nS_; ++x) {
            if (b[x] == 0) continue;
            for (auto [xn, pr] : p_.trans[u].row(x)) bp[xn] += b[x] * pr;
        }
    }

    struct ObsBranch {
        int o;
        Real mass;
        Belief tau;  // normalized posterior
    };

    /// Positive-mass observation branches of the predicted belief, touching
    /// only the observation rows of its support.
    std::vector<ObsBranch> expand_obs(const Belief& bp) const {
        std::vector<int> order;                  // reachable observations
        std::vector<int> slot(nO_, -1);
        std::vector<ObsBranch> out;
        for (int x = 0; x < nS_; ++x) {
            if (bp[x] == 0) continue;
            for (auto [o, z] : p_.obs.row(x)) {
                if (z == 0) continue;
                int s = slot[o];
                if (s < 0) {
                    s = slot[o] = static_cast<int>(out.size());
                    out.push_back(ObsBranch{o, 0.0, Belief(nS_, 0.0)});
                    order.push_back(o);
                }
                out[s].tau[x] += bp[x] * z;
                out[s].mass += bp[x] * z;
            }
        }
        for (auto& br : out)
            if (br.mass > 0)
                for (Real& w : br.tau) w /= br.mass;
        return out;
    }

    Real q_upper(const Belief& b, int u, Belief& bp) const {
        Real q = 0;
        for (int x = 0; x < nS_; ++x)
            if (b[x] != 0) q += b[x] * sp_.r(x, u);
        predict(b, u, bp);
        for (const auto& br : expand_obs(bp)) q += sp_.gamma * br.mass * upper_value(br.tau);
        return q;
    }

    void backup_lower(const Belief& b) {
        Belief bp(nS_);
        Vec gsum(nS_);
        AlphaVector best;
        Real best_val = -std::numeric_limits<Real>::infinity();
        for (int u = 0; u < nU_; ++u) {
            predict(b, u, bp);
            // pick the maximizing alpha per reachable observation; any fixed
            // lower-bound vector is valid for observations this belief cannot
            // produce (the backup stays a policy evaluation)
            std::vector<const Vec*> choice(nO_, &lb_alphas_.front().values);
            for (const auto& br : expand_obs(bp)) {
                Real best_dot = -std::numeric_limits<Real>::infinity();
                for (const auto& a : lb_alphas_) {
                    Real dot = 0;
                    for (int x = 0; x < nS_; ++x)
                        if (br.tau[x] != 0) dot += br.tau[x] * a.values[x];
                    if (dot > best_dot) {
                        best_dot = dot;
                        choice[br.o] = &a.values;
                    }
                }
            }
            std::fill(gsum.begin(), gsum.end(), 0.0);
            for (int x = 0; x < nS_; ++x)
                for (auto [o, z] : p_.obs.row(x)) gsum[x] += z * (*choice[o])[x];
            AlphaVector cand;
            cand.action = u;
            cand.values.resize(nS_);
            for (int x = 0; x < nS_; ++x) {
                Real s = sp_.r(x, u);
                for (auto [xn, pr] : p_.trans[u].row(x)) s += sp_.gamma * pr * gsum[xn];
                cand.values[x] = s;
            }
            Real val = 0;
            for (int x = 0; x < nS_; ++x) val += cand.values[x] * b[x];
            if (val > best_val) {
                best_val = val;
                best = std::move(cand);
            }
        }
        add_alpha(std::move(best));
    }

    void backup_upper(const Belief& b) {
        Belief bp(nS_);
        Real best = -std::numeric_limits<Real>::infinity();
        for (int u = 0; u < nU_; ++u) best = std::max(best, q_upper(b, u, bp));
        add_ub_point(b, best);
    }

    void trial(Real eps) {
        std::vector<Belief> path;
        // pick the root with the largest weighted excess
        Real best_excess = 0;
        int best_root = -1;
        for (std::size_t i = 0; i < roots_.size(); ++i) {
            const auto& [w, b] = roots_[i];
            Real e = w * (upper_value(b) - lower_value(b) - eps);
            if (e > best_excess) {
                best_excess = e;
                best_root = static_cast<int>(i);
            }
        }
        if (best_root < 0) {
            for (const auto& [w, b] : roots_) {
                backup_lower(b);
                backup_upper(b);
            }
            return;
        }

        Belief b = roots_[best_root].second;
        Belief bp(nS_);
        Real eps_t = eps;
        for (int depth = 0; depth < cfg_.max_depth; ++depth) {
            if (upper_value(b) - lower_value(b) <= eps_t) break;
            path.push_back(b);

            // IE-MAX: act greedily on the upper bound
            int best_u = 0;
            Real best_q = -std::numeric_limits<Real>::infinity();
            for (int u = 0; u < nU_; ++u) {
                Real q = q_upper(b, u, bp);
                if (q > best_q) {
                    best_q = q;
                    best_u = u;
                }
            }

            predict(b, best_u, bp);
            Real next_eps = eps_t / sp_.gamma;
            int best_o = -1;
            Real best_e = 0;
            Belief next;
            for (auto& br : expand_obs(bp)) {
                Real e = br.mass * (upper_value(br.tau) - lower_value(br.tau) - next_eps);
                if (e > best_e) {
                    best_e = e;
                    best_o = br.o;
                    next = std::move(br.tau);
                }
            }
            if (best_o < 0) break;
            b = std::move(next);
            eps_t = next_eps;
        }

        for (auto it = path.rbegin(); it != path.rend(); ++it) {
            backup_lower(*it);
            backup_upper(*it);
        }
    }

    struct UbPoint {
        std::vector<int> support;
        Vec mass;
        Real gain = 0;  // value - corner dot, negative when informative
    };

    const ScalarizedPomdp& sp_;
    const ProductPomdp& p_;
    PbviConfig cfg_;
    int nS_, nU_, nO_;
    Vec corner_;
    std::vector<AlphaVector> lb_alphas_;
    std::vector<UbPoint> ub_points_;
    std::vector<std::pair<Real, Belief>> roots_;  // (observation prob, posterior)
};

}  // namespace detail

/// Anytime point-based solver with certified bounds: belief points are
/// expanded toward the optimal reachable space guided by the current
/// lower/upper bounds; returns the alpha-vector lower bound policy and the
/// bracketing values at the initial belief.
inline PbviResult solve_pbvi(const ScalarizedPomdp& sp, const PbviConfig& cfg = {}) {
    if (!(sp.gamma > 0 && sp.gamma < 1)) throw WrongHorizon("solve_pbvi requires gamma in (0,1)");
    detail::PbviSolver solver(sp, cfg);
    return solver.run();
}

}  // namespace ltlfplan
