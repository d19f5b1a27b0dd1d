#include <doctest.h>

#include "ltlfplan/policy.hpp"
#include "ltlfplan/product.hpp"
#include "support.hpp"

using namespace ltlfplan;

TEST_SUITE_BEGIN("product");

namespace {

LabeledPomdp chain_with_a(HorizonModel h) {
    // two states, L(s1) = {a}; action 0 stays, action 1 advances
    LabeledPomdp m;
    m.num_states = 2;
    m.num_actions = 2;
    m.num_obs = 1;
    m.trans.push_back(SparseMatrix::from_rows(2, 2, {{{0, 1.0}}, {{1, 1.0}}}));
    m.trans.push_back(SparseMatrix::from_rows(2, 2, {{{1, 1.0}}, {{1, 1.0}}}));
    m.obs = SparseMatrix::from_rows(2, 1, {{{0, 1.0}}, {{0, 1.0}}});
    m.init = {1.0, 0.0};
    m.atoms.intern("a");
    m.labels = {0, 1};
    m.reward_obj.assign(4, 0.0);
    m.reward_con.assign(4, 0.0);
    m.horizon = std::move(h);
    return m;
}

DecisionTreePolicy constant_policy(int action, int num_obs, int depth) {
    DecisionTreePolicy pol;
    int prev = -1;
    for (int d = depth; d >= 0; --d) {
        DecisionTreePolicy::Node n;
        n.action = action;
        n.child.assign(num_obs, prev);
        pol.nodes.push_back(n);
        prev = static_cast<int>(pol.nodes.size()) - 1;
    }
    pol.root.assign(num_obs, prev);
    return pol;
}

}  // namespace

TEST_CASE("product with DFA(true) keeps one automaton state and r_f = 1") {
    LabeledPomdp m = chain_with_a(HorizonModel::fixed(1));
    m.num_states = 1;
    m.trans.clear();
    m.trans.push_back(SparseMatrix::from_rows(1, 1, {{{0, 1.0}}}));
    m.trans.push_back(SparseMatrix::from_rows(1, 1, {{{0, 1.0}}}));
    m.obs = SparseMatrix::from_rows(1, 1, {{{0, 1.0}}});
    m.init = {1.0};
    m.labels = {0};
    m.reward_obj.assign(2, 0.0);
    m.reward_con.assign(2, 0.0);

    FormulaStore st;
    Dfa d = compile_dfa(st, st.lit_true(), m.atoms);
    ProductPomdp p = build_product(m, d);
    CHECK(p.num_states == 1);
    CHECK(p.r_f(0) == 1.0);

    DecisionTreePolicy pol = constant_policy(0, 1, 1);
    CHECK(eval_policy_exact(p, pol, Channel::Accept) == doctest::Approx(1.0));
}

TEST_CASE("chain x DFA(F a): acceptance iff s1 visited before termination") {
    LabeledPomdp m = chain_with_a(HorizonModel::fixed(1));
    FormulaStore st;
    AtomTable at = m.atoms;
    Dfa d = minimize(compile_dfa(st, parse_spec(st, at, "F a"), m.atoms));
    ProductPomdp p = build_product(m, d);

    // always advance: S_0=0, S_1=1 -> word {}{a} satisfies F a, accept = 1
    DecisionTreePolicy advance = constant_policy(1, 1, 1);
    CHECK(eval_policy_exact(p, advance, Channel::Accept) == doctest::Approx(1.0));
    // always stay: word {}{} fails
    DecisionTreePolicy stay = constant_policy(0, 1, 1);
    CHECK(eval_policy_exact(p, stay, Channel::Accept) == doctest::Approx(0.0));

    // exhaustive 2-step trajectory enumeration agrees
    FormulaId phi = parse_spec(st, at, "F a");
    auto oracle = testsupport::enumerate_base(m, advance, st, phi);
    CHECK(oracle.p_sat == doctest::Approx(1.0));
}

TEST_CASE("product transition rows stay stochastic") {
    Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        LabeledPomdp m = testsupport::random_tiny_model(rng);
        FormulaStore st;
        FormulaId f = testsupport::random_formula(st, rng, 4, 2);
        Dfa d = minimize(compile_dfa(st, f, m.atoms));
        ProductPomdp p = build_product(m, d);
        for (int u = 0; u < p.num_actions; ++u)
            for (int x = 0; x < p.num_states; ++x)
                CHECK(p.trans[u].row_sum(x) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("atom tables must agree between model and DFA") {
    LabeledPomdp m = chain_with_a(HorizonModel::fixed(1));
    FormulaStore st;
    AtomTable other;
    other.intern("zz");
    Dfa d = compile_dfa(st, st.atom(other.intern("zz")), other);
    CHECK_THROWS_AS(build_product(m, d), AtomMismatch);
}

TEST_CASE("product channels equal base expectations and satisfaction probability") {
    Rng rng(31);
    int done = 0;
    while (done < 60) {
        LabeledPomdp m = testsupport::random_tiny_model(rng);
        FormulaStore st;
        FormulaId phi = testsupport::random_formula(st, rng, 3, 2);
        Dfa d = minimize(compile_dfa(st, phi, m.atoms));
        if (d.num_states > 3) continue;  // |Q| <= 3 per the statement
        ++done;
        ProductPomdp p = build_product(m, d);
        DecisionTreePolicy pol =
            testsupport::random_tree_policy(rng, m.num_obs, m.num_actions, m.horizon.T);

        ChannelValues v = eval_policy_exact_all(p, pol);
        auto oracle = testsupport::enumerate_base(m, pol, st, phi);
        CHECK(v.obj == doctest::Approx(oracle.obj).epsilon(1e-10));
        CHECK(v.con == doctest::Approx(oracle.con).epsilon(1e-10));
        CHECK(std::abs(v.accept - oracle.p_sat) < 1e-10);
    }
}

TEST_CASE("constraint channel mirrors the objective channel construction") {
    Rng rng(47);
    LabeledPomdp m = testsupport::random_tiny_model(rng);
    m.reward_con = m.reward_obj;  // identical stage rewards -> identical channel
    FormulaStore st;
    AtomTable at = m.atoms;
    Dfa d = minimize(compile_dfa(st, parse_spec(st, at, "F a"), m.atoms));
    ProductPomdp p = build_product(m, d);
    DecisionTreePolicy pol =
        testsupport::random_tree_policy(rng, m.num_obs, m.num_actions, m.horizon.T);
    ChannelValues v = eval_policy_exact_all(p, pol);
    CHECK(v.obj == doctest::Approx(v.con).epsilon(1e-12));
}

TEST_CASE("geometric evaluation truncates with a reported bound") {
    LabeledPomdp m = chain_with_a(HorizonModel::geometric(0.5));
    m.reward_obj.assign(4, 1.0);
    FormulaStore st;
    AtomTable at = m.atoms;
    Dfa d = minimize(compile_dfa(st, parse_spec(st, at, "F a"), m.atoms));
    ProductPomdp p = build_product(m, d);

    DecisionTreePolicy stay = constant_policy(0, 1, 0);
    ChannelValues v = eval_policy_exact_all(p, stay, {.eps_trunc = 1e-10});
    // constant unit reward: E[sum_0^T r] = 1/(1-gamma) = 2
    CHECK(v.obj == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(v.truncation <= 1e-9);
    CHECK(v.accept == doctest::Approx(0.0));

    DecisionTreePolicy advance = constant_policy(1, 1, 0);
    ChannelValues va = eval_policy_exact_all(p, advance, {.eps_trunc = 1e-10});
    // accept fails only if the run ends at T = 0 (prob 1 - gamma = 0.5)
    CHECK(va.accept == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("node cap raises BlowUp") {
    Rng rng(3);
    testsupport::TinyModelSpec spec;
    spec.max_obs = 3;
    LabeledPomdp m = testsupport::random_tiny_model(rng, spec);
    m.horizon = HorizonModel::fixed(3);
    FormulaStore st;
    Dfa d = compile_dfa(st, st.lit_true(), m.atoms);
    ProductPomdp p = build_product(m, d);
    DecisionTreePolicy pol = constant_policy(0, m.num_obs, 3);
    CHECK_THROWS_AS(eval_policy_exact_all(p, pol, {.node_cap = 2}), BlowUp);
}

TEST_CASE("pruning drops unreachable product states and keeps channel values") {
    LabeledPomdp m = chain_with_a(HorizonModel::fixed(2));
    FormulaStore st;
    AtomTable at = m.atoms;
    Dfa d = minimize(compile_dfa(st, parse_spec(st, at, "F a"), m.atoms));
    ProductPomdp p = build_product(m, d);
    ProductPomdp q = prune_unreachable(p);
    CHECK(q.pruned);
    CHECK(q.num_states <= p.num_states);
    DecisionTreePolicy pol = constant_policy(1, 1, 2);
    CHECK(eval_policy_exact(q, pol, Channel::Accept) ==
          doctest::Approx(eval_policy_exact(p, pol, Channel::Accept)));
    // (2 states) x (2 live DFA states): (s0,q1) and (s1,q0) are unreachable
    ProductStats stats = product_stats(p);
    CHECK(stats.states == p.num_states);
    CHECK(stats.reachable == q.num_states);
}

TEST_SUITE_END();
