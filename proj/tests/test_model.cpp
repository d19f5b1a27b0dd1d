#include <doctest.h>

#include <cmath>

#include "ltlfplan/ltlf.hpp"
#include "ltlfplan/model.hpp"
#include "support.hpp"

using namespace ltlfplan;

TEST_SUITE_BEGIN("model");

namespace {

// 1-state, 1-action model with unit constraint reward.
LabeledPomdp unit_loop(HorizonModel h) {
    LabeledPomdp m;
    m.num_states = 1;
    m.num_actions = 1;
    m.num_obs = 1;
    m.trans.push_back(SparseMatrix::from_rows(1, 1, {{{0, 1.0}}}));
    m.obs = SparseMatrix::from_rows(1, 1, {{{0, 1.0}}});
    m.init = {1.0};
    m.labels = {0};
    m.reward_obj = {0.0};
    m.reward_con = {1.0};
    m.horizon = std::move(h);
    return m;
}

// deterministic two-state chain: action 0 stays, action 1 advances
LabeledPomdp two_chain(HorizonModel h) {
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

}  // namespace

TEST_CASE("validate: geometric bounds") {
    LabeledPomdp m = unit_loop(HorizonModel::geometric(0.5));
    RewardBounds b = validate(m);
    CHECK(b.T_max == doctest::Approx(1.0));
    CHECK(b.R_max == doctest::Approx(2.0));
    CHECK(b.G == doctest::Approx(2.0));
}

TEST_CASE("validate: fixed-horizon bounds") {
    LabeledPomdp m = unit_loop(HorizonModel::fixed(3));
    RewardBounds b = validate(m);
    CHECK(b.T_max == doctest::Approx(3.0));
    CHECK(b.R_max == doctest::Approx(4.0));
}

TEST_CASE("validate rejects substochastic rows") {
    LabeledPomdp m = unit_loop(HorizonModel::fixed(1));
    m.trans[0] = SparseMatrix::from_rows(1, 1, {{{0, 0.9}}});
    CHECK_THROWS_AS(validate(m), NotStochastic);
    try {
        validate(m);
    } catch (const NotStochastic& e) {
        CHECK(e.row == "P[u=0][s=0]");
    }
}

TEST_CASE("validate rejects negative constraint rewards under geometric horizons") {
    LabeledPomdp m = unit_loop(HorizonModel::geometric(0.5));
    m.reward_con = {-0.5};
    CHECK_THROWS_AS(validate(m), NegativeConstraintReward);
    m.horizon = HorizonModel::fixed(2);
    CHECK_NOTHROW(validate(m));  // fixed horizons allow signed constraint rewards
}

TEST_CASE("simulate: deterministic chain with fixed horizon") {
    LabeledPomdp m = two_chain(HorizonModel::fixed(1));
    FunctionPolicy pol([](auto, auto) { return 1; });
    Trajectory t = simulate(m, pol, 123);
    CHECK(t.states == std::vector<int>{0, 1});
    CHECK(t.actions == std::vector<int>{1, 1});
    CHECK(t.realized_T == 1);
    CHECK(t.terminal_state == 1);
    CHECK(label_word(m, t) == std::vector<Letter>{0, 1});
}

TEST_CASE("simulate: geometric horizon mean matches gamma/(1-gamma)") {
    LabeledPomdp m = unit_loop(HorizonModel::geometric(0.99));
    FunctionPolicy pol([](auto, auto) { return 0; });
    const int n = 100000;
    double sum = 0, sumsq = 0;
    for (int i = 0; i < n; ++i) {
        Trajectory t = simulate(m, pol, 1000 + i);
        sum += t.realized_T;
        sumsq += static_cast<double>(t.realized_T) * t.realized_T;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    double se = std::sqrt(var / n);
    CHECK(std::abs(mean - 99.0) < 3 * se);
}

TEST_CASE("simulate: geometric horizons are memoryless") {
    LabeledPomdp m = unit_loop(HorizonModel::geometric(0.8));
    FunctionPolicy pol([](auto, auto) { return 0; });
    std::vector<int> at_least(30, 0);
    for (int i = 0; i < 60000; ++i) {
        Trajectory t = simulate(m, pol, 77000 + i);
        for (int k = 0; k < 30; ++k)
            if (t.realized_T >= k) ++at_least[k];
    }
    for (int k = 0; k < 8; ++k) {
        double cond = static_cast<double>(at_least[k + 1]) / at_least[k];
        CHECK(cond == doctest::Approx(0.8).epsilon(0.03));
    }
}

TEST_CASE("simulate: unreachable goal raises NonTermination at the step cap") {
    LabeledPomdp m = two_chain(HorizonModel::goal({1}));
    m.init = {1.0, 0.0};
    FunctionPolicy stay([](auto, auto) { return 0; });
    CHECK_THROWS_AS(simulate(m, stay, 5, SimulateOptions{.step_cap = 100}), NonTermination);
    FunctionPolicy advance([](auto, auto) { return 1; });
    Trajectory t = simulate(m, advance, 5);
    CHECK(t.terminal_state == 1);
    CHECK(t.realized_T == 0);
}

TEST_CASE("simulate is deterministic per seed") {
    Rng rng(9);
    LabeledPomdp m = testsupport::random_tiny_model(rng);
    FunctionPolicy pol([](std::span<const int> obs, auto) {
        return static_cast<int>(obs.size()) % 2;
    });
    LabeledPomdp m2 = m;
    m2.horizon = HorizonModel::geometric(0.7);
    for (std::uint64_t seed : {1ULL, 42ULL, 777ULL}) {
        Trajectory a = simulate(m2, pol, seed);
        Trajectory b = simulate(m2, pol, seed);
        CHECK(a.states == b.states);
        CHECK(a.actions == b.actions);
        CHECK(a.observations == b.observations);
    }
}

TEST_CASE("empirical transition frequencies match P on a 3-state model") {
    // fixed 3-state model, single action, seeded rollouts
    LabeledPomdp m;
    m.num_states = 3;
    m.num_actions = 1;
    m.num_obs = 1;
    m.trans.push_back(SparseMatrix::from_rows(
        3, 3, {{{0, 0.2}, {1, 0.5}, {2, 0.3}}, {{0, 0.7}, {2, 0.3}}, {{1, 1.0}}}));
    m.obs = SparseMatrix::from_rows(3, 1, {{{0, 1.0}}, {{0, 1.0}}, {{0, 1.0}}});
    m.init = {1.0, 0.0, 0.0};
    m.labels = {0, 0, 0};
    m.reward_obj.assign(3, 0.0);
    m.reward_con.assign(3, 0.0);
    m.horizon = HorizonModel::fixed(5);
    validate(m);

    FunctionPolicy pol([](auto, auto) { return 0; });
    std::array<std::array<long, 3>, 3> counts{};
    std::array<long, 3> visits{};
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        Trajectory t = simulate(m, pol, 50000 + i);
        std::vector<int> path = t.states;
        path.push_back(t.terminal_state);
        for (std::size_t k = 0; k + 1 < path.size(); ++k) {
            ++visits[path[k]];
            ++counts[path[k]][path[k + 1]];
        }
    }
    // Hoeffding 99% bound per cell
    for (int s = 0; s < 3; ++s)
        for (int s2 = 0; s2 < 3; ++s2) {
            double phat = static_cast<double>(counts[s][s2]) / visits[s];
            double eps = std::sqrt(std::log(2 / 0.01) / (2.0 * visits[s]));
            CHECK(std::abs(phat - m.trans[0].at(s, s2)) <= eps);
        }
}

TEST_CASE("label_word crosses modules: simulated ordered-task words satisfy phi2") {
    // 2-cell chain labeled a then b: advancing twice gives word {} {a} .. {b}
    LabeledPomdp m;
    m.num_states = 3;
    m.num_actions = 1;
    m.num_obs = 1;
    m.trans.push_back(
        SparseMatrix::from_rows(3, 3, {{{1, 1.0}}, {{2, 1.0}}, {{2, 1.0}}}));
    m.obs = SparseMatrix::from_rows(3, 1, {{{0, 1.0}}, {{0, 1.0}}, {{0, 1.0}}});
    m.init = {1.0, 0.0, 0.0};
    int a = m.atoms.intern("a"), b = m.atoms.intern("b");
    m.labels = {0, 1u << a, 1u << b};
    m.reward_obj.assign(3, 0.0);
    m.reward_con.assign(3, 0.0);
    m.horizon = HorizonModel::fixed(2);

    FunctionPolicy pol([](auto, auto) { return 0; });
    Trajectory t = simulate(m, pol, 3);
    auto w = label_word(m, t);
    CHECK(w.size() == static_cast<std::size_t>(t.realized_T + 1));

    FormulaStore st;
    AtomTable at = m.atoms;
    FormulaId phi2 = parse_spec(st, at, "!b U (a & F b)");
    CHECK(eval_trace(st, phi2, w));
}

TEST_SUITE_END();
