#include <doctest.h>

#include <cmath>

#include "ltlfplan/pbvi.hpp"
#include "ltlfplan/solve.hpp"
#include "support.hpp"

using namespace ltlfplan;

TEST_SUITE_BEGIN("solve");

namespace {

// three-state chain (advance deterministically, absorb at the end), label a
// on the last state; one action unless split_actions
LabeledPomdp chain3(HorizonModel h, bool split_actions = false) {
    LabeledPomdp m;
    m.num_states = 3;
    m.num_actions = split_actions ? 2 : 1;
    m.num_obs = 1;
    for (int u = 0; u < m.num_actions; ++u)
        m.trans.push_back(
            SparseMatrix::from_rows(3, 3, {{{u == 1 ? 0 : 1, 1.0}}, {{2, 1.0}}, {{2, 1.0}}}));
    m.obs = SparseMatrix::from_rows(3, 1, {{{0, 1.0}}, {{0, 1.0}}, {{0, 1.0}}});
    m.init = {1.0, 0.0, 0.0};
    int a = m.atoms.intern("a");
    m.labels = {0, 0, 1u << a};
    m.reward_obj = Vec(static_cast<std::size_t>(3) * m.num_actions, 0.0);
    m.reward_con = Vec(static_cast<std::size_t>(3) * m.num_actions, 0.0);
    for (int u = 0; u < m.num_actions; ++u) {
        m.reward_obj[0 * m.num_actions + u] = 0.3;
        m.reward_obj[1 * m.num_actions + u] = -0.1;
        m.reward_obj[2 * m.num_actions + u] = 1.0;
        m.reward_con[0 * m.num_actions + u] = 0.2;
        m.reward_con[2 * m.num_actions + u] = 0.5;
    }
    m.horizon = std::move(h);
    return m;
}

ProductPomdp chain3_product(HorizonModel h, const char* spec = "F a") {
    LabeledPomdp m = chain3(std::move(h));
    FormulaStore st;
    AtomTable at = m.atoms;
    Dfa d = minimize(compile_dfa(st, parse_spec(st, at, spec), m.atoms));
    return build_product(m, d);
}

/// The product with the scalarized reward in the objective channel, so the
/// existing exact evaluator computes the discounted scalarized value.
ProductPomdp as_product(const ScalarizedPomdp& sp) {
    ProductPomdp p = *sp.base;
    p.reward_obj = sp.reward;
    return p;
}

DecisionTreePolicy const_tree(int action, int num_obs) {
    DecisionTreePolicy pol;
    pol.nodes.push_back({action, std::vector<int>(num_obs, 0)});
    pol.root.assign(num_obs, 0);
    return pol;
}

}  // namespace

TEST_CASE("scalarize: zero multipliers give back the objective reward") {
    ProductPomdp p = chain3_product(HorizonModel::geometric(0.5));
    ScalarizedPomdp sp = scalarize(p, {0, 0, 1}, /*delta=*/1.0, /*rho=*/0.0);
    CHECK(sp.offset == doctest::Approx(0.0));
    for (int x = 0; x < p.num_states; ++x)
        for (int u = 0; u < p.num_actions; ++u)
            CHECK(sp.r(x, u) == doctest::Approx(p.r_obj(x, u)));
}

TEST_CASE("scalarize: accept bonus coefficient is (1-gamma)/gamma") {
    ProductPomdp p = chain3_product(HorizonModel::geometric(0.5));
    ScalarizedPomdp sp = scalarize(p, {1, 0, 1}, 0.0, 0.0);
    for (int x = 0; x < p.num_states; ++x)
        for (int u = 0; u < p.num_actions; ++u)
            CHECK(sp.r(x, u) - p.r_obj(x, u) == doctest::Approx(1.0 * p.r_f(x)));
    CHECK_THROWS_AS(scalarize(chain3_product(HorizonModel::fixed(2)), {0, 0, 1}, 0, 0),
                    WrongHorizon);
}

TEST_CASE("scalarize: one accepting state, lf=1, delta=0 gives value + offset = 0") {
    // single accepting absorbing state, zero objective reward
    LabeledPomdp m;
    m.num_states = 1;
    m.num_actions = 1;
    m.num_obs = 1;
    m.trans.push_back(SparseMatrix::from_rows(1, 1, {{{0, 1.0}}}));
    m.obs = SparseMatrix::from_rows(1, 1, {{{0, 1.0}}});
    m.init = {1.0};
    m.labels = {0};
    m.reward_obj = {0.0};
    m.reward_con = {0.0};
    m.horizon = HorizonModel::geometric(0.5);
    FormulaStore st;
    ProductPomdp p = build_product(m, compile_dfa(st, st.lit_true(), m.atoms));

    ScalarizedPomdp sp = scalarize(p, {1, 0, 1}, 0.0, 0.0);
    ChannelValues v = eval_policy_exact_all(as_product(sp), const_tree(0, 1), {.eps_trunc = 1e-12});
    CHECK(v.obj + sp.offset == doctest::Approx(0.0).epsilon(1e-9));
    // and that matches R^f - 1 computed by the product evaluator
    ChannelValues w = eval_policy_exact_all(p, const_tree(0, 1), {.eps_trunc = 1e-12});
    CHECK(v.obj + sp.offset == doctest::Approx(w.accept - 1.0).epsilon(1e-9));
}

TEST_CASE("discounting identity on a three-state chain") {
    ProductPomdp p = chain3_product(HorizonModel::geometric(0.5));
    const Real delta = 0.2, rho = 0.3;
    const LagrangePoint lam{0.7, 0.4, 2.0};

    // oracle: expectation over the random horizon, truncated at tail 1e-8
    const Real g = 0.5;
    Real L = 0;
    {
        Vec d = p.init;
        Real cum_obj = 0, cum_con = 0;
        for (int t = 0; t <= 60; ++t) {
            Real eo = 0, ec = 0;
            for (int x = 0; x < p.num_states; ++x) {
                eo += d[x] * p.r_obj(x, 0);
                ec += d[x] * p.r_con(x, 0);
            }
            cum_obj += eo;
            cum_con += ec;
            Vec d2(p.num_states, 0.0);
            for (int x = 0; x < p.num_states; ++x)
                for (auto [xn, pr] : p.trans[0].row(x)) d2[xn] += d[x] * pr;
            Real accept = 0;
            for (int x = 0; x < p.num_states; ++x) accept += d2[x] * p.r_f(x);
            const Real pt = (1 - g) * std::pow(g, t);  // P(T = t)
            L += pt * (cum_obj + lam.lc * (cum_con - rho) + lam.lf * (accept - 1 + delta));
            d.swap(d2);
        }
    }

    ScalarizedPomdp sp = scalarize(p, lam, delta, rho);
    ChannelValues v = eval_policy_exact_all(as_product(sp), const_tree(0, 1), {.eps_trunc = 1e-10});
    CHECK(v.obj + sp.offset == doctest::Approx(L).epsilon(1e-6));
}

TEST_CASE("solve_exact: single-action model returns the only value") {
    ProductPomdp p = chain3_product(HorizonModel::fixed(2));
    ExactSolveResult r = solve_exact_fixed(p, {0, 0, 1}, 1.0, 0.0);
    // path rewards: 0.3 (s0) - 0.1 (s1) + 1.0 (s2)
    CHECK(r.value == doctest::Approx(1.2).epsilon(1e-12));
    CHECK(eval_policy_exact(p, r.policy, Channel::Objective) == doctest::Approx(1.2));
}

TEST_CASE("solve_exact: tiger-like two-plan value, hand computed") {
    // static hidden state, 0.8-informative observation each step, open-left /
    // open-right rewards +-1; optimal two-step value = 1.2
    LabeledPomdp m;
    m.num_states = 2;
    m.num_actions = 2;
    m.num_obs = 2;
    m.trans.push_back(SparseMatrix::from_rows(2, 2, {{{0, 1.0}}, {{1, 1.0}}}));
    m.trans.push_back(SparseMatrix::from_rows(2, 2, {{{0, 1.0}}, {{1, 1.0}}}));
    m.obs = SparseMatrix::from_rows(2, 2, {{{0, 0.8}, {1, 0.2}}, {{0, 0.2}, {1, 0.8}}});
    m.init = {0.5, 0.5};
    m.labels = {0, 0};
    m.reward_obj = {1.0, -1.0, -1.0, 1.0};  // r(s, u) = +1 iff u == s
    m.reward_con.assign(4, 0.0);
    m.horizon = HorizonModel::fixed(1);
    FormulaStore st;
    ProductPomdp p = build_product(m, compile_dfa(st, st.lit_true(), m.atoms));

    ExactSolveResult r = solve_exact_fixed(p, {0, 0, 1}, 1.0, 0.0);
    CHECK(r.value == doctest::Approx(1.2).epsilon(1e-12));
}

TEST_CASE("solve_exact: optimal value is monotone in the horizon for nonnegative rewards") {
    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        LabeledPomdp m = testsupport::random_tiny_model(rng);
        FormulaStore st;
        ProductPomdp p = build_product(m, compile_dfa(st, st.lit_true(), m.atoms));
        Real prev = -1;
        for (int T = 0; T <= 3; ++T) {
            p.horizon = HorizonModel::fixed(T);
            ExactSolveResult r = solve_exact_fixed(p, {0, 0, 1}, 1.0, 0.0);
            CHECK(r.value >= prev - 1e-12);
            prev = r.value;
        }
    }
}

TEST_CASE("solve_exact node cap raises BlowUp") {
    ProductPomdp p = chain3_product(HorizonModel::fixed(3));
    CHECK_THROWS_AS(solve_exact_fixed(p, {0, 0, 1}, 1.0, 0.0, {.node_cap = 2}), BlowUp);
}

TEST_CASE("pbvi: brackets the exact value on a tiny instance") {
    ProductPomdp p = chain3_product(HorizonModel::geometric(0.5));
    ScalarizedPomdp sp = scalarize(p, {0.5, 0.5, 2}, 0.2, 0.1);
    ExactSolveResult exact = solve_exact_discounted(sp, {.eps_trunc = 1e-10});
    PbviResult r = solve_pbvi(sp, {.target_gap_abs = 1e-7, .target_gap_rel = 0});
    const Real exact_disc = exact.value - sp.offset;  // pbvi reports offset-free values
    CHECK(r.value_lower <= exact_disc + 1e-7);
    CHECK(r.value_upper >= exact_disc - 1e-7);
    CHECK(r.value_upper - r.value_lower == doctest::Approx(r.gap));
    CHECK(r.gap <= 1e-6);
}

TEST_CASE("pbvi: constant rewards solve exactly to c/(1-gamma)") {
    ProductPomdp p = chain3_product(HorizonModel::geometric(0.99));
    const Real c = 0.37;
    ScalarizedPomdp sp = scalarize(p, {0, 0, 1}, 1.0, 0.0);
    for (Real& r : sp.reward) r = c;
    PbviResult r = solve_pbvi(sp, {.target_gap_abs = 1e-8, .target_gap_rel = 0});
    CHECK(r.value_lower == doctest::Approx(c / 0.01).epsilon(1e-7));
    CHECK(r.gap <= 1e-6);
}

TEST_CASE("pbvi: tightening the target gap shrinks the reported gap") {
    Rng rng(71);
    testsupport::TinyModelSpec spec;
    spec.max_states = 4;
    spec.max_obs = 2;
    LabeledPomdp m = testsupport::random_tiny_model(rng, spec);
    m.horizon = HorizonModel::geometric(0.9);
    FormulaStore st;
    AtomTable at = m.atoms;
    ProductPomdp p = build_product(m, minimize(compile_dfa(st, parse_spec(st, at, "F a"), m.atoms)));
    ScalarizedPomdp sp = scalarize(p, {0.5, 0.2, 1}, 0.3, 0.1);
    Real prev = std::numeric_limits<Real>::infinity();
    for (Real target : {1.0, 0.1, 0.01}) {
        PbviResult r = solve_pbvi(sp, {.target_gap_abs = target, .target_gap_rel = 0});
        CHECK(r.gap <= prev + 1e-12);
        CHECK(r.gap <= target * 1.0001);
        prev = r.gap;
    }
}

TEST_CASE("pbvi soundness on random small scalarized instances") {
    // the exact oracle expands the full (action, observation) history tree,
    // so keep gamma low and the truncation modest
    Rng rng(90);
    for (int trial = 0; trial < 6; ++trial) {
        testsupport::TinyModelSpec spec;
        spec.max_states = 3;
        spec.max_actions = 2;
        spec.max_obs = 1;
        LabeledPomdp m = testsupport::random_tiny_model(rng, spec);
        m.horizon = HorizonModel::geometric(0.25);
        FormulaStore st;
        AtomTable at = m.atoms;
        ProductPomdp p =
            build_product(m, minimize(compile_dfa(st, parse_spec(st, at, "F a"), m.atoms)));
        if (p.num_states > 6) continue;
        ScalarizedPomdp sp = scalarize(p, {0.4, 0.3, 1}, 0.25, 0.05);
        ExactSolveResult exact = solve_exact_discounted(sp, {.eps_trunc = 5e-7});
        PbviResult r = solve_pbvi(sp, {.target_gap_abs = 1e-8, .target_gap_rel = 0});
        const Real exact_disc = exact.value - sp.offset;
        const Real slop = exact.solver_gap + 1e-9;
        CHECK(r.value_lower <= r.value_upper + 1e-12);
        CHECK(exact_disc >= r.value_lower - slop);
        CHECK(exact_disc <= r.value_upper + slop);
    }
}

TEST_CASE("alpha-policy rollouts are deterministic given the seed") {
    ProductPomdp p = chain3_product(HorizonModel::geometric(0.8));
    ScalarizedPomdp sp = scalarize(p, {0.3, 0.1, 1}, 0.2, 0.0);
    PbviResult r = solve_pbvi(sp, {.target_gap_abs = 1e-4, .target_gap_rel = 0});
    PurePolicy pol = r.policy;
    for (std::uint64_t seed : {5ULL, 99ULL}) {
        auto e1 = make_executor(p, pol);
        auto e2 = make_executor(p, pol);
        Rng r1(seed), r2(seed);
        RolloutValues a = product_rollout(p, *e1, r1);
        RolloutValues b = product_rollout(p, *e2, r2);
        CHECK(a.obj == b.obj);
        CHECK(a.accept == b.accept);
        CHECK(a.realized_T == b.realized_T);
    }
}

TEST_CASE("goal transformation: limbo rewards follow lambda * (r_f - 2 + delta)") {
    // goal product with one accepting and one rejecting goal state
    LabeledPomdp m = chain3(HorizonModel::goal({2}));
    for (Real& r : m.reward_obj) r = -1.0;  // strictly negative off-goal
    FormulaStore st;
    AtomTable at = m.atoms;
    Dfa d = minimize(compile_dfa(st, parse_spec(st, at, "F a"), m.atoms));
    ProductPomdp p = build_product(m, d);

    GoalLagrangian gl = build_goal_lagrangian(p, 1.0, 0.1);
    int accepting_goal = -1, rejecting_goal = -1;
    for (int x : p.horizon.goals) (p.accept[x] ? accepting_goal : rejecting_goal) = x;
    REQUIRE(accepting_goal >= 0);
    REQUIRE(rejecting_goal >= 0);
    CHECK(gl.model.r_obj(accepting_goal, 0) == doctest::Approx(-0.9));
    CHECK(gl.model.r_obj(rejecting_goal, 0) == doctest::Approx(-1.9));
    CHECK(gl.offset == doctest::Approx(1.0));

    // all transformed non-goal rewards strictly negative (lambda > 0)
    const int g = gl.model.num_states - 1;
    for (int x = 0; x < gl.model.num_states; ++x) {
        if (x == g) continue;
        for (int u = 0; u < gl.model.num_actions; ++u) CHECK(gl.model.r_obj(x, u) < 0);
    }
    // the unique goal is absorbing with zero reward
    CHECK(gl.model.horizon.goals == std::vector<int>{g});
    CHECK(gl.model.r_obj(g, 0) == doctest::Approx(0.0));

    // lambda = 0 keeps the objective untouched off-goal and zeroes the limbo
    GoalLagrangian gl0 = build_goal_lagrangian(p, 0.0, 0.1);
    CHECK(gl0.model.r_obj(accepting_goal, 0) == doctest::Approx(0.0));
    for (int x = 0; x < p.num_states; ++x) {
        if (p.horizon.is_goal_state(x)) continue;
        for (int u = 0; u < p.num_actions; ++u)
            CHECK(gl0.model.r_obj(x, u) == doctest::Approx(p.r_obj(x, u)));
    }

    // precondition: nonnegative off-goal rewards are rejected
    ProductPomdp bad = p;
    bad.reward_obj[0] = 0.0;
    CHECK_THROWS_AS(build_goal_lagrangian(bad, 1.0, 0.1), NonNegativeReward);
}

TEST_SUITE_END();
