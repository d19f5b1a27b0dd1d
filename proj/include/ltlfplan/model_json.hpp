#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ltlfplan/cpomdp.hpp"
#include "ltlfplan/dfa.hpp"
#include "ltlfplan/model.hpp"
#include "ltlfplan/multiagent.hpp"

namespace ltlfplan {

using Json = nlohmann::json;

inline Json horizon_to_json(const HorizonModel& h) {
    switch (h.kind) {
        case HorizonKind::Fixed: return {{"type", "fixed"}, {"T", h.T}};
        case HorizonKind::Geometric: return {{"type", "geometric"}, {"gamma", h.gamma}};
        case HorizonKind::Goal: return {{"type", "goal"}, {"goals", h.goals}};
    }
    return {};
}

inline HorizonModel horizon_from_json(const Json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "fixed") return HorizonModel::fixed(j.at("T").get<int>());
    if (type == "geometric") return HorizonModel::geometric(j.at("gamma").get<Real>());
    if (type == "goal") return HorizonModel::goal(j.value("goals", std::vector<int>{}));
    throw SchemaError("unknown horizon type: " + type);
}

namespace detail {

inline Letter letter_from_names(const Json& names, const AtomTable& atoms) {
    Letter l = 0;
    for (const auto& n : names) {
        auto idx = atoms.find(n.get<std::string>());
        if (!idx) throw SchemaError("label references unknown atom " + n.get<std::string>());
        l |= 1u << *idx;
    }
    return l;
}

inline Json letter_to_names(Letter l, const AtomTable& atoms) {
    Json out = Json::array();
    for (int i = 0; i < atoms.size(); ++i)
        if (l & (1u << i)) out.push_back(atoms.name(i));
    return out;
}

inline SparseMatrix matrix_from_rows(const Json& rows, int nr, int nc, const char* what) {
    std::vector<std::vector<std::pair<int, Real>>> data(nr);
    for (const auto& r : rows) {
        int a = r.at(0).get<int>(), b = r.at(1).get<int>();
        Real p = r.at(2).get<Real>();
        if (a < 0 || a >= nr || b < 0 || b >= nc)
            throw SchemaError(std::string(what) + " row out of range");
        data[a].emplace_back(b, p);
    }
    return SparseMatrix::from_rows(nr, nc, data);
}

}  // namespace detail

inline Json model_to_json(const LabeledPomdp& m, const Json& meta = Json()) {
    Json j;
    j["version"] = 1;
    j["states"] = m.num_states;
    j["actions"] = m.num_actions;
    j["observations"] = m.num_obs;
    Json atoms = Json::array();
    for (int i = 0; i < m.atoms.size(); ++i) atoms.push_back(m.atoms.name(i));
    j["atoms"] = atoms;

    Json labels = Json::object();
    for (int s = 0; s < m.num_states; ++s)
        if (m.labels[s]) labels[std::to_string(s)] = detail::letter_to_names(m.labels[s], m.atoms);
    j["labels"] = labels;

    Json trans = Json::array();
    for (int u = 0; u < m.num_actions; ++u)
        for (int s = 0; s < m.num_states; ++s)
            for (auto [s2, p] : m.trans[u].row(s)) trans.push_back({s, u, s2, p});
    j["transitions"] = trans;

    Json obs = Json::array();
    for (int s = 0; s < m.num_states; ++s)
        for (auto [o, p] : m.obs.row(s)) obs.push_back({s, o, p});
    j["observation_fn"] = obs;

    Json init = Json::array();
    for (int s = 0; s < m.num_states; ++s)
        if (m.init[s] > 0) init.push_back({s, m.init[s]});
    j["init"] = init;

    Json ro = Json::array(), rc = Json::array();
    for (int s = 0; s < m.num_states; ++s)
        for (int u = 0; u < m.num_actions; ++u) {
            if (m.r_obj(s, u) != 0) ro.push_back({s, u, m.r_obj(s, u)});
            if (m.r_con(s, u) != 0) rc.push_back({s, u, m.r_con(s, u)});
        }
    j["reward_objective"] = ro;
    j["reward_constraint"] = rc;
    j["horizon"] = horizon_to_json(m.horizon);
    if (!meta.is_null()) j["meta"] = meta;
    return j;
}

inline LabeledPomdp model_from_json(const Json& j) {
    if (j.value("version", 0) != 1) throw SchemaError("unsupported model version");
    LabeledPomdp m;
    m.num_states = j.at("states").get<int>();
    m.num_actions = j.at("actions").get<int>();
    m.num_obs = j.at("observations").get<int>();
    if (m.num_states <= 0 || m.num_actions <= 0 || m.num_obs <= 0)
        throw SchemaError("model dimensions must be positive");

    for (const auto& a : j.at("atoms")) m.atoms.intern(a.get<std::string>());

    m.labels.assign(m.num_states, 0);
    for (const auto& [key, val] : j.at("labels").items()) {
        int s = std::stoi(key);
        if (s < 0 || s >= m.num_states) throw SchemaError("label state out of range");
        m.labels[s] = detail::letter_from_names(val, m.atoms);
    }

    {
        std::vector<std::vector<std::vector<std::pair<int, Real>>>> rows(
            m.num_actions, std::vector<std::vector<std::pair<int, Real>>>(m.num_states));
        for (const auto& r : j.at("transitions")) {
            int s = r.at(0).get<int>(), u = r.at(1).get<int>(), s2 = r.at(2).get<int>();
            Real p = r.at(3).get<Real>();
            if (s < 0 || s >= m.num_states || u < 0 || u >= m.num_actions || s2 < 0 ||
                s2 >= m.num_states)
                throw SchemaError("transition row out of range");
            rows[u][s].emplace_back(s2, p);
        }
        for (int u = 0; u < m.num_actions; ++u)
            m.trans.push_back(SparseMatrix::from_rows(m.num_states, m.num_states, rows[u]));
    }
    m.obs = detail::matrix_from_rows(j.at("observation_fn"), m.num_states, m.num_obs,
                                     "observation_fn");

    m.init.assign(m.num_states, 0.0);
    for (const auto& r : j.at("init")) {
        int s = r.at(0).get<int>();
        if (s < 0 || s >= m.num_states) throw SchemaError("init state out of range");
        m.init[s] = r.at(1).get<Real>();
    }

    m.reward_obj.assign(static_cast<std::size_t>(m.num_states) * m.num_actions, 0.0);
    m.reward_con.assign(static_cast<std::size_t>(m.num_states) * m.num_actions, 0.0);
    auto read_rewards = [&](const char* key, Vec& dst) {
        if (!j.contains(key)) return;
        for (const auto& r : j.at(key)) {
            int s = r.at(0).get<int>(), u = r.at(1).get<int>();
            if (s < 0 || s >= m.num_states || u < 0 || u >= m.num_actions)
                throw SchemaError(std::string(key) + " row out of range");
            dst[static_cast<std::size_t>(s) * m.num_actions + u] = r.at(2).get<Real>();
        }
    };
    read_rewards("reward_objective", m.reward_obj);
    read_rewards("reward_constraint", m.reward_con);
    m.horizon = horizon_from_json(j.at("horizon"));
    return m;
}

// ---------------------------------------------------------------------------
// Multi-agent extension: adds agents[], shared_label, specs to the base
// schema; transitions carry per-agent action tuples.
// ---------------------------------------------------------------------------

struct MaSpecStrings {
    std::string global;
    std::vector<std::string> local;
};

inline Json ma_model_to_json(const MaModel& m, const MaSpecStrings& specs,
                             const Json& meta = Json()) {
    Json j;
    j["version"] = 1;
    j["states"] = m.num_shared;
    j["actions"] = m.agent_actions;

    Json atoms = Json::array();
    for (int i = 0; i < m.shared_atoms.size(); ++i) atoms.push_back(m.shared_atoms.name(i));
    j["atoms"] = atoms;

    Json shared_label = Json::object();
    for (int s = 0; s < m.num_shared; ++s)
        if (m.shared_label[s])
            shared_label[std::to_string(s)] = detail::letter_to_names(m.shared_label[s], m.shared_atoms);
    j["shared_label"] = shared_label;

    Json trans = Json::array();
    for (int ju = 0; ju < m.num_joint_actions(); ++ju) {
        auto tuple = m.unpack_action(ju);
        for (int s = 0; s < m.num_shared; ++s)
            for (auto [s2, p] : m.shared_trans[ju].row(s)) trans.push_back({s, tuple, s2, p});
    }
    j["transitions"] = trans;

    Json agents = Json::array();
    for (int i = 0; i < m.num_agents; ++i) {
        const auto& loc = m.locals[i];
        Json a;
        a["local_states"] = loc.num_states;
        Json latoms = Json::array();
        for (int k = 0; k < loc.atoms.size(); ++k) latoms.push_back(loc.atoms.name(k));
        a["atoms"] = latoms;
        Json lt = Json::array();
        for (int ju = 0; ju < m.num_joint_actions(); ++ju) {
            auto tuple = m.unpack_action(ju);
            for (int sl = 0; sl < loc.num_states; ++sl)
                for (int s = 0; s < m.num_shared; ++s)
                    for (auto [sl2, p] : loc.trans[ju].row(sl * m.num_shared + s))
                        lt.push_back({sl, s, tuple, sl2, p});
        }
        a["local_transitions"] = lt;
        Json ll = Json::array();
        for (int s = 0; s < m.num_shared; ++s)
            for (int sl = 0; sl < loc.num_states; ++sl) {
                Letter l = loc.label[static_cast<std::size_t>(s) * loc.num_states + sl];
                if (l) ll.push_back({s, sl, detail::letter_to_names(l, loc.atoms)});
            }
        a["local_label"] = ll;
        agents.push_back(a);
    }
    j["agents"] = agents;

    Json init = Json::array();
    for (const auto& e : m.init) init.push_back({e.shared, e.local, e.prob});
    j["init"] = init;

    Json rew = Json::array();
    for (int s = 0; s < m.num_shared; ++s) {
        std::vector<int> loc(m.num_agents, 0);
        // iterate local combos
        int combos = m.num_local_combos();
        for (int c = 0; c < combos; ++c) {
            int rem = c;
            for (int i = m.num_agents - 1; i >= 0; --i) {
                loc[i] = rem % m.locals[i].num_states;
                rem /= m.locals[i].num_states;
            }
            for (int ju = 0; ju < m.num_joint_actions(); ++ju) {
                Real r = m.r(s, loc, ju);
                if (r != 0) rew.push_back({s, loc, m.unpack_action(ju), r});
            }
        }
    }
    j["reward_objective"] = rew;
    j["horizon"] = horizon_to_json(m.horizon);
    j["specs"] = {{"global", specs.global}, {"local", specs.local}};
    if (!meta.is_null()) j["meta"] = meta;
    return j;
}

inline MaModel ma_model_from_json(const Json& j, MaSpecStrings* specs_out = nullptr) {
    if (j.value("version", 0) != 1) throw SchemaError("unsupported model version");
    MaModel m;
    m.num_shared = j.at("states").get<int>();
    m.agent_actions = j.at("actions").get<std::vector<int>>();
    m.num_agents = static_cast<int>(m.agent_actions.size());
    if (m.num_agents < 1) throw SchemaError("multi-agent model needs at least one agent");

    for (const auto& a : j.at("atoms")) m.shared_atoms.intern(a.get<std::string>());
    m.shared_label.assign(m.num_shared, 0);
    for (const auto& [key, val] : j.at("shared_label").items())
        m.shared_label.at(std::stoi(key)) = detail::letter_from_names(val, m.shared_atoms);

    const int nJU = m.num_joint_actions();
    {
        std::vector<std::vector<std::vector<std::pair<int, Real>>>> rows(
            nJU, std::vector<std::vector<std::pair<int, Real>>>(m.num_shared));
        for (const auto& r : j.at("transitions")) {
            std::vector<int> tuple = r.at(1).get<std::vector<int>>();
            int ju = m.pack_action(tuple);
            rows.at(ju).at(r.at(0).get<int>()).emplace_back(r.at(2).get<int>(), r.at(3).get<Real>());
        }
        for (int ju = 0; ju < nJU; ++ju)
            m.shared_trans.push_back(SparseMatrix::from_rows(m.num_shared, m.num_shared, rows[ju]));
    }

    for (const auto& a : j.at("agents")) {
        MaModel::Local loc;
        loc.num_states = a.at("local_states").get<int>();
        for (const auto& at : a.value("atoms", Json::array())) loc.atoms.intern(at.get<std::string>());
        const int rows_n = loc.num_states * m.num_shared;
        std::vector<std::vector<std::vector<std::pair<int, Real>>>> rows(
            nJU, std::vector<std::vector<std::pair<int, Real>>>(rows_n));
        for (const auto& r : a.at("local_transitions")) {
            int sl = r.at(0).get<int>(), s = r.at(1).get<int>();
            int ju = m.pack_action(r.at(2).get<std::vector<int>>());
            rows.at(ju).at(sl * m.num_shared + s).emplace_back(r.at(3).get<int>(), r.at(4).get<Real>());
        }
        for (int ju = 0; ju < nJU; ++ju)
            loc.trans.push_back(SparseMatrix::from_rows(rows_n, loc.num_states, rows[ju]));
        loc.label.assign(static_cast<std::size_t>(m.num_shared) * loc.num_states, 0);
        for (const auto& r : a.at("local_label")) {
            int s = r.at(0).get<int>(), sl = r.at(1).get<int>();
            loc.label.at(static_cast<std::size_t>(s) * loc.num_states + sl) =
                detail::letter_from_names(r.at(2), loc.atoms);
        }
        m.locals.push_back(std::move(loc));
    }
    if (static_cast<int>(m.locals.size()) != m.num_agents)
        throw SchemaError("agents[] size must match actions[] size");

    for (const auto& r : j.at("init")) {
        MaModel::InitEntry e;
        e.shared = r.at(0).get<int>();
        e.local = r.at(1).get<std::vector<int>>();
        e.prob = r.at(2).get<Real>();
        m.init.push_back(std::move(e));
    }

    m.reward.assign(static_cast<std::size_t>(m.num_joint_states()) * nJU, 0.0);
    for (const auto& r : j.at("reward_objective")) {
        int s = r.at(0).get<int>();
        std::vector<int> loc = r.at(1).get<std::vector<int>>();
        int ju = m.pack_action(r.at(2).get<std::vector<int>>());
        m.reward[static_cast<std::size_t>(m.pack_joint(s, loc)) * nJU + ju] = r.at(3).get<Real>();
    }
    m.horizon = horizon_from_json(j.at("horizon"));

    if (specs_out && j.contains("specs")) {
        specs_out->global = j.at("specs").at("global").get<std::string>();
        specs_out->local = j.at("specs").at("local").get<std::vector<std::string>>();
    }
    return m;
}

// ---------------------------------------------------------------------------
// DFA, policy, certificate, trace
// ---------------------------------------------------------------------------

inline Json dfa_to_json(const Dfa& d) {
    Json j;
    j["states"] = d.num_states;
    j["initial"] = d.initial;
    Json acc = Json::array();
    for (int q = 0; q < d.num_states; ++q)
        if (d.accepting[q]) acc.push_back(q);
    j["accepting"] = acc;
    Json atoms = Json::array();
    for (int a : d.support) atoms.push_back(d.atoms.name(a));
    j["atoms"] = atoms;
    Json edges = Json::array();
    for (int q = 0; q < d.num_states; ++q)
        for (const auto& e : d.edges(q))
            edges.push_back({{"from", e.from}, {"guard", d.guard_dnf(e.guard)}, {"to", e.to}});
    j["edges"] = edges;
    return j;
}

inline Json policy_to_json(const PurePolicy& pol) {
    Json j;
    if (const auto* a = std::get_if<AlphaPolicy>(&pol)) {
        Json alphas = Json::array();
        for (const auto& av : a->alphas) alphas.push_back({{"action", av.action}, {"vector", av.values}});
        j["alphas"] = alphas;
        j["geometry_hash"] = a->geometry_hash;
    } else {
        const auto& t = std::get<DecisionTreePolicy>(pol);
        Json nodes = Json::array();
        for (const auto& n : t.nodes) nodes.push_back({{"action", n.action}, {"children", n.child}});
        j["tree"] = {{"root", t.root}, {"nodes", nodes}};
    }
    return j;
}

inline PurePolicy policy_from_json(const Json& j) {
    if (j.contains("alphas")) {
        AlphaPolicy a;
        a.geometry_hash = j.value("geometry_hash", 0ULL);
        for (const auto& av : j.at("alphas"))
            a.alphas.push_back({av.at("action").get<int>(), av.at("vector").get<Vec>()});
        return a;
    }
    DecisionTreePolicy t;
    t.root = j.at("tree").at("root").get<std::vector<int>>();
    for (const auto& n : j.at("tree").at("nodes"))
        t.nodes.push_back({n.at("action").get<int>(), n.at("children").get<std::vector<int>>()});
    return t;
}

inline Json mixed_policy_to_json(const MixedPolicy& mix) {
    Json atoms = Json::array();
    for (std::size_t i = 0; i < mix.policies.size(); ++i)
        atoms.push_back({{"weight", mix.weights[i]}, {"policy", policy_to_json(*mix.policies[i])}});
    return Json{{"mixture", atoms}};
}

inline Json certificate_to_json(const GapCertificate& c) {
    return Json{{"reward_gap", c.reward_gap},
                {"feasibility_gap", c.feasibility_gap},
                {"eps_bp", c.eps_bp},
                {"eps_est", c.eps_est},
                {"R_lb", c.R_lb},
                {"R_m", c.R_m},
                {"G", c.G},
                {"eta", c.eta},
                {"K", c.K},
                {"B", c.B},
                {"conservative", c.conservative}};
}

inline std::string trace_to_csv(const EgTrace& t) {
    std::string out = "k,lambda_f,lambda_c,p_hat,r_hat,solver_gap\n";
    char buf[192];
    for (const auto& r : t.rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%.12g,%.12g,%.12g\n", r.k, r.lf, r.lc,
                      r.p_hat, r.r_hat, r.solver_gap);
        out += buf;
    }
    return out;
}

inline Json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open " + path);
    Json j;
    in >> j;
    return j;
}

inline void save_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write " + path);
    out << text;
}

inline void save_json_file(const std::string& path, const Json& j, int indent = 1) {
    save_text_file(path, j.dump(indent) + "\n");
}

}  // namespace ltlfplan
