// Command-line front end: compile-spec, compile-product, plan, bench.
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ltlfplan/bench.hpp"
#include "ltlfplan/cpomdp.hpp"
#include "ltlfplan/model_json.hpp"

using namespace ltlfplan;

namespace {

struct SpecArgs {
    std::string spec;
    std::vector<std::string> atoms;
};

Dfa compile_from_args(FormulaStore& store, const SpecArgs& args, bool do_minimize) {
    AtomTable atoms;
    for (const auto& a : args.atoms) atoms.intern(a);
    if (!args.atoms.empty()) atoms.seal();
    FormulaId f = parse_spec(store, atoms, args.spec);
    Dfa d = compile_dfa(store, f, atoms);
    return do_minimize ? minimize(d) : d;
}

int cmd_compile_spec(const SpecArgs& args, const std::string& json_out, const std::string& dot_out,
                     bool no_minimize) {
    FormulaStore store;
    Dfa d = compile_from_args(store, args, !no_minimize);
    int accepting = 0;
    for (int q = 0; q < d.num_states; ++q) accepting += d.accepting[q];
    std::cout << "states: " << d.num_states << "\naccepting: " << accepting << "\n";
    if (!json_out.empty()) save_json_file(json_out, dfa_to_json(d));
    if (!dot_out.empty()) save_text_file(dot_out, dfa_to_dot(d));
    if (json_out.empty() && dot_out.empty()) std::cout << dfa_to_json(d).dump(1) << "\n";
    return 0;
}

int cmd_compile_product(const std::string& model_path, const std::string& spec) {
    Json mj = load_json_file(model_path);
    if (mj.contains("agents")) {
        std::cerr << "multi-agent models go through the bench subcommand\n";
        return 1;
    }
    LabeledPomdp model = model_from_json(mj);
    validate(model);
    FormulaStore store;
    AtomTable atoms = model.atoms;
    atoms.seal();
    FormulaId f = parse_spec(store, atoms, spec);
    Dfa d = minimize(compile_dfa(store, f, model.atoms));
    ProductPomdp p = build_product(model, d);
    ProductStats st = product_stats(p);
    std::cout << "dfa_states: " << d.num_states << "\n"
              << "product_states: " << st.states << "\n"
              << "reachable_states: " << st.reachable << "\n"
              << "accept_fraction: " << st.accept_fraction << "\n";
    return 0;
}

int cmd_plan(const std::string& model_path, const std::string& spec, Real delta, Real rho, Real B,
             int K, std::optional<Real> eta, std::optional<Real> gamma, const std::string& solver,
             int n_eval, std::uint64_t seed, bool do_reduce, const std::string& out_dir,
             const PbviConfig& pbvi) {
    Json mj = load_json_file(model_path);
    if (mj.contains("agents")) {
        std::cerr << "multi-agent models go through the bench subcommand\n";
        return 1;
    }
    LabeledPomdp model = model_from_json(mj);
    if (gamma) {
        model.horizon = HorizonModel::geometric(*gamma);
    }
    validate(model);

    FormulaStore store;
    AtomTable atoms = model.atoms;
    atoms.seal();
    FormulaId f = parse_spec(store, atoms, spec);
    Dfa d = minimize(compile_dfa(store, f, model.atoms));
    bool goal_from_accept =
        model.horizon.kind == HorizonKind::Goal && model.horizon.goals.empty();
    ProductPomdp p = build_product(model, d, {.goal_from_accept = goal_from_accept});

    EgConfig cfg;
    cfg.K = K;
    cfg.B = B;
    cfg.delta = delta;
    cfg.rho = rho;
    cfg.n_eval = n_eval;
    cfg.seed = seed;
    cfg.eta = eta;

    OptHook opt;
    EvalHook eval;
    if (solver == "exact") {
        opt = make_exact_opt_hook();
        eval = make_exact_eval_hook();
    } else {
        opt = make_pbvi_opt_hook(pbvi);
        eval = make_mc_eval_hook(n_eval, seed);
    }
    EgResult res = run_eg(p, cfg, opt, eval);

    MixedPolicy final_policy = res.mu_bar;
    Json extra;
    if (do_reduce) {
        ReducedPolicy red = reduce_support(res, rho, delta);
        final_policy = red.policy;
        extra["support_reduced"] = red.lp_feasible;
        extra["support_size"] = final_policy.policies.size();
    }

    std::filesystem::create_directories(out_dir);
    Json pol = mixed_policy_to_json(final_policy);
    if (!extra.is_null()) pol["reduction"] = extra;
    save_json_file(out_dir + "/policy.json", pol);
    save_json_file(out_dir + "/certificate.json", certificate_to_json(res.certificate));
    save_text_file(out_dir + "/trace.csv", trace_to_csv(res.trace));

    FeasibilityReport rep = feasibility_report(res.trace);
    std::cout << "objective (trace mean): " << res.certificate.R_lb << "\n"
              << "accept slack (mean p_hat - 1 + delta): " << rep.accept_slack << "\n"
              << "constraint slack (mean r_hat - rho): " << rep.con_slack << "\n"
              << "reward_gap: " << res.certificate.reward_gap << "\n"
              << "feasibility_gap: " << res.certificate.feasibility_gap << "\n"
              << "outputs: " << out_dir << "/{policy.json,certificate.json,trace.csv}\n";
    return 0;
}

int cmd_bench(const std::string& suite, std::vector<std::string> models, const std::string& out_dir,
              const std::string& zoo_dir, int K, int n_eval, std::uint64_t seed,
              Real solver_timeout) {
    bench::Zoo zoo = bench::load_zoo(zoo_dir.empty() ? bench::default_zoo_dir() : zoo_dir);
    if (models.empty()) {
        for (const auto& e : zoo.entries) {
            bool small = e.name.find("-small") != std::string::npos;
            if ((suite == "small") == small) models.push_back(e.name);
        }
    }
    std::filesystem::create_directories(out_dir);

    std::vector<bench::ResultRow> rows;
    for (const auto& id : models) {
        const auto& entry = zoo.get(id);
        bench::Experiment ex;
        ex.model_id = id;
        ex.delta = 1 - entry.table_one_minus_delta;
        // catalog B values pair with (1-gamma)-normalized rewards; raw totals
        // here are 1/(1-gamma) times larger, so B scales accordingly
        Real gamma = entry.multiagent ? entry.ma.horizon.gamma : entry.model.horizon.gamma;
        ex.B = entry.table_B;
        if ((entry.multiagent ? entry.ma.horizon.kind : entry.model.horizon.kind) ==
            HorizonKind::Geometric)
            ex.B = entry.table_B / (1 - gamma);
        ex.K = K;
        ex.n_eval = n_eval;
        ex.seed = seed;
        ex.pbvi.timeout_s = solver_timeout;
        std::cout << "running " << id << " / " << entry.spec_id << " ..." << std::flush;
        bench::ResultRow row = bench::run_experiment(zoo, ex);
        std::cout << (row.blowup ? " blowup" : " done") << " (" << row.wall_s << "s)\n";
        rows.push_back(row);

        // per-experiment artifacts: result JSON and the compiled DFA as DOT
        Json rj{{"model", row.model_id},   {"spec", row.spec_id},
                {"objective", row.obj_est}, {"objective_ci", row.obj_ci},
                {"accept", row.acc_est},    {"accept_ci", row.acc_ci},
                {"one_minus_delta", row.one_minus_delta},
                {"B", row.B},               {"reward_gap", row.reward_gap},
                {"feasibility_gap", row.feasibility_gap},
                {"time_s", row.wall_s},     {"seed", row.seed},
                {"blowup", row.blowup},     {"note", row.note}};
        save_json_file(out_dir + "/" + id + ".json", rj);

        FormulaStore store;
        if (!entry.multiagent) {
            AtomTable atoms = entry.model.atoms;
            FormulaId f = parse_spec(store, atoms, bench::spec_text(entry.spec_id));
            Dfa d = minimize(compile_dfa(store, f, entry.model.atoms));
            save_text_file(out_dir + "/" + id + ".dot", dfa_to_dot(d, "spec"));
        } else {
            SpecBundle b = build_spec_bundle(store, entry.ma, entry.ma_specs.global,
                                             entry.ma_specs.local);
            save_text_file(out_dir + "/" + id + "-global.dot",
                           dfa_to_dot(minimize(b.dfa_global), "global"));
            for (std::size_t i = 0; i < b.dfa_local.size(); ++i)
                save_text_file(out_dir + "/" + id + "-local" + std::to_string(i) + ".dot",
                               dfa_to_dot(minimize(b.dfa_local[i]), "local"));
        }
    }

    save_text_file(out_dir + "/results.csv", bench::emit_csv(rows));
    std::cout << "\n" << bench::emit_text_table(rows);
    std::cout << "aggregate: " << out_dir << "/results.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LTLf-constrained POMDP planning toolkit"};
    app.require_subcommand(1);

    // compile-spec
    auto* sc_spec = app.add_subcommand("compile-spec", "Compile an LTLf formula to a DFA");
    SpecArgs spec_args;
    std::string json_out, dot_out;
    bool no_minimize = false;
    sc_spec->add_option("--spec", spec_args.spec, "LTLf formula")->required();
    sc_spec->add_option("--atoms", spec_args.atoms, "atom names (seals the table)");
    sc_spec->add_option("--json", json_out, "write DFA JSON here");
    sc_spec->add_option("--dot", dot_out, "write DOT here");
    sc_spec->add_flag("--no-minimize", no_minimize, "skip minimization");

    // compile-product
    auto* sc_prod = app.add_subcommand("compile-product", "Product statistics for model x spec");
    std::string model_path, prod_spec;
    sc_prod->add_option("--model", model_path, "model JSON file")->required();
    sc_prod->add_option("--spec", prod_spec, "LTLf formula")->required();

    // plan
    auto* sc_plan = app.add_subcommand("plan", "Run the constrained planner");
    std::string plan_model, plan_spec, plan_solver = "pbvi", plan_out = "plan-out";
    Real delta = 0.1, rho = 0, B = 10;
    int K = 64, n_eval = 2000;
    std::uint64_t seed = 0;
    bool do_reduce = false;
    Real eta_val = 0, gamma_val = 0.99;
    bool eta_set = false, gamma_set = false;
    sc_plan->add_option("--model", plan_model, "model JSON file")->required();
    sc_plan->add_option("--spec", plan_spec, "LTLf formula")->required();
    sc_plan->add_option("--delta", delta, "spec tolerance (require accept >= 1-delta)")->required();
    sc_plan->add_option("--rho", rho, "constraint reward threshold")->required();
    sc_plan->add_option("--B", B, "dual bound")->required();
    sc_plan->add_option("--K", K, "iterations")->required();
    auto* eta_opt = sc_plan->add_option("--eta", eta_val, "learning rate (default from K, B, G)");
    auto* gamma_opt =
        sc_plan->add_option("--gamma", gamma_val, "override: geometric horizon, default 0.99");
    sc_plan->add_option("--solver", plan_solver, "exact|pbvi")
        ->check(CLI::IsMember({"exact", "pbvi"}));
    sc_plan->add_option("--n-eval", n_eval, "MC samples per iteration");
    sc_plan->add_option("--seed", seed, "RNG seed");
    sc_plan->add_flag("--reduce-support", do_reduce, "BFS support reduction of the mixture");
    sc_plan->add_option("--out", plan_out, "output directory");
    PbviConfig plan_pbvi;
    sc_plan->add_option("--pbvi-timeout", plan_pbvi.timeout_s, "solver timeout per call (s)");
    sc_plan->add_option("--pbvi-gap", plan_pbvi.target_gap_rel, "solver relative target gap");

    // bench
    auto* sc_bench = app.add_subcommand("bench", "Run benchmark experiments");
    std::string suite = "small", bench_out = "bench-out", zoo_dir;
    std::vector<std::string> bench_models;
    int bench_k = 12, bench_neval = 300;
    std::uint64_t bench_seed = 0;
    Real bench_timeout = 10.0;
    sc_bench->add_option("--suite", suite, "small|paper")->check(CLI::IsMember({"small", "paper"}));
    sc_bench->add_option("--models", bench_models, "explicit model ids");
    sc_bench->add_option("--out", bench_out, "output directory")->required();
    sc_bench->add_option("--zoo", zoo_dir, "zoo directory (default: bundled)");
    sc_bench->add_option("--K", bench_k, "EG iterations per experiment");
    sc_bench->add_option("--n-eval", bench_neval, "MC samples per iteration");
    sc_bench->add_option("--seed", bench_seed, "RNG seed");
    sc_bench->add_option("--solver-timeout", bench_timeout, "PBVI timeout per call (s)");

    CLI11_PARSE(app, argc, argv);
    eta_set = eta_opt->count() > 0;
    gamma_set = gamma_opt->count() > 0;

    try {
        if (sc_spec->parsed()) return cmd_compile_spec(spec_args, json_out, dot_out, no_minimize);
        if (sc_prod->parsed()) return cmd_compile_product(model_path, prod_spec);
        if (sc_plan->parsed())
            return cmd_plan(plan_model, plan_spec, delta, rho, B, K,
                            eta_set ? std::optional<Real>(eta_val) : std::nullopt,
                            gamma_set ? std::optional<Real>(gamma_val) : std::nullopt, plan_solver,
                            n_eval, seed, do_reduce, plan_out, plan_pbvi);
        if (sc_bench->parsed())
            return cmd_bench(suite, bench_models, bench_out, zoo_dir, bench_k, bench_neval,
                             bench_seed, bench_timeout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
