#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ltlfplan/cpomdp.hpp"
#include "ltlfplan/model_json.hpp"
#include "ltlfplan/multiagent.hpp"

namespace ltlfplan::bench {

// ---------------------------------------------------------------------------
// Specification catalog
// ---------------------------------------------------------------------------

struct SpecEntry {
    std::string id;
    std::string text;
};

inline const std::vector<SpecEntry>& spec_catalog() {
    static const std::vector<SpecEntry> catalog = {
        {"phi1", "F a & G !b"},
        {"phi2", "!b U (a & F b)"},
        {"phi3", "F (a | b) & G (b -> (!d U c))"},
        {"phi4", "G ((a | b | c | d) -> F s)"},
        {"phi5", "(c -> (!b U (a & F b))) & (!c -> (!a U (b & F a)))"},
        {"phi6", "G (s & !col)"},
        {"phi7",
         "(o -> (!b U (c & F b))) & (!o -> (!c U (b & F c))) & G (s & !col)"},
    };
    return catalog;
}

inline std::string spec_text(const std::string& id) {
    for (const auto& e : spec_catalog())
        if (e.id == id) return e.text;
    throw SchemaError("unknown spec id: " + id);
}

// ---------------------------------------------------------------------------
// Gridworld builders
// ---------------------------------------------------------------------------

namespace detail {

// Actions: 0 stay, 1 up, 2 down, 3 left, 4 right. Moves into walls stay put.
inline constexpr int kGridActions = 5;

struct Grid {
    int rows = 0, cols = 0;
    int cells() const { return rows * cols; }
    int at(int r, int c) const { return r * cols + c; }
    int row(int cell) const { return cell / cols; }
    int col(int cell) const { return cell % cols; }
    bool valid(int r, int c) const { return r >= 0 && r < rows && c >= 0 && c < cols; }

    int neighbor(int cell, int dir) const {
        static constexpr int dr[5] = {0, -1, 1, 0, 0};
        static constexpr int dc[5] = {0, 0, 0, -1, 1};
        int r = row(cell) + dr[dir], c = col(cell) + dc[dir];
        return valid(r, c) ? at(r, c) : cell;
    }

    static int opposite(int dir) {
        static constexpr int opp[5] = {0, 2, 1, 4, 3};
        return opp[dir];
    }
};

/// Slip model: intended direction with probability p, the rest spread
/// uniformly over the directions not opposite to it (stay is deterministic).
inline std::vector<std::pair<int, Real>> motion_row(const Grid& g, int cell, int dir, Real p) {
    std::map<int, Real> acc;
    if (dir == 0 || p >= 1.0) {
        acc[g.neighbor(cell, dir)] += 1.0;
    } else {
        acc[g.neighbor(cell, dir)] += p;
        std::vector<int> slips;
        for (int d = 1; d <= 4; ++d)
            if (d != Grid::opposite(dir)) slips.push_back(d);
        for (int d : slips) acc[g.neighbor(cell, d)] += (1 - p) / slips.size();
    }
    return {acc.begin(), acc.end()};
}

/// Observation: the true cell or any 4-neighbor, equally likely.
inline std::vector<std::pair<int, Real>> noisy_location_row(const Grid& g, int cell) {
    std::vector<int> cand{cell};
    for (int d = 1; d <= 4; ++d)
        if (g.neighbor(cell, d) != cell) cand.push_back(g.neighbor(cell, d));
    std::vector<std::pair<int, Real>> row;
    for (int c : cand) row.emplace_back(c, 1.0 / cand.size());
    return row;
}

struct CellSpec {
    std::map<int, std::vector<std::string>> labels;  // cell -> atom names
    std::map<int, Real> rewards;                     // cell -> objective reward (all actions)
};

/// Single-agent gridworld with location observations.
inline LabeledPomdp location_gridworld(const Grid& g, Real p_move, bool noisy_obs, int start,
                                       const CellSpec& cs, const std::vector<std::string>& atoms,
                                       HorizonModel horizon, Real default_reward = 0) {
    LabeledPomdp m;
    m.num_states = g.cells();
    m.num_actions = kGridActions;
    m.num_obs = g.cells();
    for (const auto& a : atoms) m.atoms.intern(a);

    m.labels.assign(m.num_states, 0);
    for (const auto& [cell, names] : cs.labels)
        for (const auto& n : names) m.labels[cell] |= 1u << m.atoms.intern(n);

    for (int u = 0; u < m.num_actions; ++u) {
        std::vector<std::vector<std::pair<int, Real>>> rows(m.num_states);
        for (int s = 0; s < m.num_states; ++s) rows[s] = motion_row(g, s, u, p_move);
        m.trans.push_back(SparseMatrix::from_rows(m.num_states, m.num_states, rows));
    }
    {
        std::vector<std::vector<std::pair<int, Real>>> rows(m.num_states);
        for (int s = 0; s < m.num_states; ++s)
            rows[s] = noisy_obs ? noisy_location_row(g, s)
                                : std::vector<std::pair<int, Real>>{{s, 1.0}};
        m.obs = SparseMatrix::from_rows(m.num_states, m.num_obs, rows);
    }
    m.init.assign(m.num_states, 0.0);
    m.init[start] = 1.0;

    m.reward_obj.assign(static_cast<std::size_t>(m.num_states) * m.num_actions, default_reward);
    for (const auto& [cell, r] : cs.rewards)
        for (int u = 0; u < m.num_actions; ++u)
            m.reward_obj[static_cast<std::size_t>(cell) * m.num_actions + u] = r;
    m.reward_con.assign(static_cast<std::size_t>(m.num_states) * m.num_actions, 0.0);
    m.horizon = std::move(horizon);
    return m;
}

/// Predicate-uncertainty gridworld: deterministic motion, hidden object
/// position in {candidate0, candidate1}, far/close detector observations.
/// State packing: pos * 2 + which.
inline LabeledPomdp predicate_gridworld(const Grid& g, int start, int cand0, int cand1,
                                        Real close_prob0, Real close_prob1,
                                        const std::map<int, Real>& rewards,
                                        const std::map<int, std::vector<std::string>>& fixed_labels,
                                        const std::vector<std::string>& atoms,
                                        HorizonModel horizon) {
    LabeledPomdp m;
    m.num_states = g.cells() * 2;
    m.num_actions = kGridActions;
    m.num_obs = 2;  // 0 = far 'F', 1 = close 'C'
    for (const auto& a : atoms) m.atoms.intern(a);
    int atom_a = m.atoms.intern("a");
    int atom_b = m.atoms.intern("b");

    m.labels.assign(m.num_states, 0);
    for (int pos = 0; pos < g.cells(); ++pos)
        for (int w = 0; w < 2; ++w) {
            int s = pos * 2 + w;
            int bcell = w == 0 ? cand0 : cand1;
            int acell = w == 0 ? cand1 : cand0;
            if (pos == bcell) m.labels[s] |= 1u << atom_b;
            if (pos == acell) m.labels[s] |= 1u << atom_a;
            auto it = fixed_labels.find(pos);
            if (it != fixed_labels.end())
                for (const auto& n : it->second) m.labels[s] |= 1u << m.atoms.intern(n);
        }

    for (int u = 0; u < m.num_actions; ++u) {
        std::vector<std::vector<std::pair<int, Real>>> rows(m.num_states);
        for (int pos = 0; pos < g.cells(); ++pos) {
            int nxt = g.neighbor(pos, u);
            for (int w = 0; w < 2; ++w) rows[pos * 2 + w] = {{nxt * 2 + w, 1.0}};
        }
        m.trans.push_back(SparseMatrix::from_rows(m.num_states, m.num_states, rows));
    }
    {
        auto manhattan = [&](int a, int b) {
            return std::abs(g.row(a) - g.row(b)) + std::abs(g.col(a) - g.col(b));
        };
        std::vector<std::vector<std::pair<int, Real>>> rows(m.num_states);
        for (int pos = 0; pos < g.cells(); ++pos)
            for (int w = 0; w < 2; ++w) {
                int bcell = w == 0 ? cand0 : cand1;
                Real close = w == 0 ? close_prob0 : close_prob1;
                int s = pos * 2 + w;
                if (manhattan(pos, bcell) > 1) {
                    rows[s] = {{0, 1.0}};
                } else {
                    rows[s] = {{0, 1.0 - close}, {1, close}};
                }
            }
        m.obs = SparseMatrix::from_rows(m.num_states, m.num_obs, rows);
    }
    m.init.assign(m.num_states, 0.0);
    m.init[start * 2 + 0] = 0.5;
    m.init[start * 2 + 1] = 0.5;

    m.reward_obj.assign(static_cast<std::size_t>(m.num_states) * m.num_actions, 0.0);
    for (const auto& [cell, r] : rewards)
        for (int w = 0; w < 2; ++w)
            for (int u = 0; u < m.num_actions; ++u)
                m.reward_obj[static_cast<std::size_t>(cell * 2 + w) * m.num_actions + u] = r;
    m.reward_con.assign(static_cast<std::size_t>(m.num_states) * m.num_actions, 0.0);
    m.horizon = std::move(horizon);
    return m;
}

/// Specification-uncertainty goal gridworld: deterministic motion, hidden
/// order bit c revealed by the observation at one cell. State packing:
/// pos * 2 + c.
inline LabeledPomdp spec_uncertainty_gridworld(const Grid& g, int start, int cell_a, int cell_b,
                                               int reveal, int goal, HorizonModel horizon) {
    LabeledPomdp m;
    m.num_states = g.cells() * 2;
    m.num_actions = kGridActions;
    m.num_obs = 3;  // 0 = nothing, 1 = c true, 2 = c false
    int atom_a = m.atoms.intern("a");
    int atom_b = m.atoms.intern("b");
    int atom_c = m.atoms.intern("c");

    m.labels.assign(m.num_states, 0);
    for (int pos = 0; pos < g.cells(); ++pos)
        for (int w = 0; w < 2; ++w) {
            int s = pos * 2 + w;
            if (pos == cell_a) m.labels[s] |= 1u << atom_a;
            if (pos == cell_b) m.labels[s] |= 1u << atom_b;
            if (w == 1) m.labels[s] |= 1u << atom_c;
        }

    for (int u = 0; u < m.num_actions; ++u) {
        std::vector<std::vector<std::pair<int, Real>>> rows(m.num_states);
        for (int pos = 0; pos < g.cells(); ++pos) {
            int nxt = g.neighbor(pos, u);
            for (int w = 0; w < 2; ++w) rows[pos * 2 + w] = {{nxt * 2 + w, 1.0}};
        }
        m.trans.push_back(SparseMatrix::from_rows(m.num_states, m.num_states, rows));
    }
    {
        std::vector<std::vector<std::pair<int, Real>>> rows(m.num_states);
        for (int pos = 0; pos < g.cells(); ++pos)
            for (int w = 0; w < 2; ++w)
                rows[pos * 2 + w] = {{pos == reveal ? (w == 1 ? 1 : 2) : 0, 1.0}};
        m.obs = SparseMatrix::from_rows(m.num_states, m.num_obs, rows);
    }
    m.init.assign(m.num_states, 0.0);
    m.init[start * 2 + 0] = 0.5;
    m.init[start * 2 + 1] = 0.5;

    m.reward_obj.assign(static_cast<std::size_t>(m.num_states) * m.num_actions, -1.0);
    m.reward_con.assign(static_cast<std::size_t>(m.num_states) * m.num_actions, 0.0);
    m.horizon = std::move(horizon);
    m.horizon.kind = HorizonKind::Goal;
    m.horizon.goals = {goal * 2 + 0, goal * 2 + 1};
    return m;
}

// ---- multi-agent lane worlds ----------------------------------------------

struct LaneWorldSpec {
    Grid grid;
    std::vector<int> lane_cells;  // cells where atom s holds (for both agents)
    int start1 = 0, start2 = 0;
    // goal structure per agent: candidate goal cells; switching probability
    std::vector<int> goals1, goals2;
    Real switch_prob = 0.0;  // move to another candidate while sitting on the goal
    Real reward1 = 1.0, reward2 = 1.0;
    bool order_task = false;  // agent 2 must visit both goals in a private order
    std::vector<std::pair<int, int>> one_way;  // (from,to): the reverse move is blocked
    /// Collapse every off-lane cell into one absorbing "off" position. Keeps
    /// large lane worlds tractable; leaving the lanes still falsifies s for
    /// the rest of the run.
    bool collapse_off_lane = false;
    HorizonModel horizon = HorizonModel::geometric(0.99);
};

/// Control-sharing lane world: shared state = position pair, local state =
/// active goal (or visitation order for order tasks).
inline MaModel lane_world(const LaneWorldSpec& spec) {
    const Grid& g = spec.grid;

    std::vector<char> in_lane(g.cells(), 0);
    for (int cell : spec.lane_cells) in_lane[cell] = 1;

    // position space: grid cells, or lane cells plus one absorbing off state
    std::vector<int> pos_cell;   // position -> grid cell (-1 for off)
    std::vector<int> cell_pos(g.cells(), -1);
    if (spec.collapse_off_lane) {
        for (int c = 0; c < g.cells(); ++c)
            if (in_lane[c]) {
                cell_pos[c] = static_cast<int>(pos_cell.size());
                pos_cell.push_back(c);
            }
        pos_cell.push_back(-1);  // off
    } else {
        for (int c = 0; c < g.cells(); ++c) {
            cell_pos[c] = c;
            pos_cell.push_back(c);
        }
    }
    const int C = static_cast<int>(pos_cell.size());
    const int off = spec.collapse_off_lane ? C - 1 : -1;

    MaModel m;
    m.num_agents = 2;
    m.num_shared = C * C;
    m.agent_actions = {kGridActions, kGridActions};

    auto blocked = [&](int from, int to) {
        for (auto [a, b] : spec.one_way)
            if (from == b && to == a) return true;  // wrong way along a one-way lane
        return false;
    };
    auto move = [&](int pos, int dir) {
        if (pos == off) return off;
        int cell = pos_cell[pos];
        int nxt = g.neighbor(cell, dir);
        if (blocked(cell, nxt)) return pos;
        return cell_pos[nxt] >= 0 ? cell_pos[nxt] : off;
    };

    const int nJU = m.num_joint_actions();
    for (int ju = 0; ju < nJU; ++ju) {
        auto tuple = m.unpack_action(ju);
        std::vector<std::vector<std::pair<int, Real>>> rows(m.num_shared);
        for (int p1 = 0; p1 < C; ++p1)
            for (int p2 = 0; p2 < C; ++p2) {
                int n1 = move(p1, tuple[0]), n2 = move(p2, tuple[1]);
                rows[p1 * C + p2] = {{n1 * C + n2, 1.0}};
            }
        m.shared_trans.push_back(SparseMatrix::from_rows(m.num_shared, m.num_shared, rows));
    }

    // shared atoms: s (both agents in lanes), col (Manhattan distance <= 1)
    int atom_s = m.shared_atoms.intern("s");
    int atom_col = m.shared_atoms.intern("col");
    auto manhattan = [&](int a, int b) {
        return std::abs(g.row(a) - g.row(b)) + std::abs(g.col(a) - g.col(b));
    };
    m.shared_label.assign(m.num_shared, 0);
    for (int p1 = 0; p1 < C; ++p1)
        for (int p2 = 0; p2 < C; ++p2) {
            Letter l = 0;
            bool lane1 = p1 != off && in_lane[pos_cell[p1]];
            bool lane2 = p2 != off && in_lane[pos_cell[p2]];
            if (lane1 && lane2) l |= 1u << atom_s;
            if (p1 != off && p2 != off && manhattan(pos_cell[p1], pos_cell[p2]) <= 1)
                l |= 1u << atom_col;
            m.shared_label[p1 * C + p2] = l;
        }

    // locals: agent 1 = active goal among goals1; agent 2 = active goal or
    // visitation-order bit for order tasks
    auto goal_local = [&](const std::vector<int>& goals, int own_agent) {
        MaModel::Local loc;
        loc.num_states = static_cast<int>(goals.size());
        const int rows_n = loc.num_states * m.num_shared;
        for (int ju = 0; ju < nJU; ++ju) {
            std::vector<std::vector<std::pair<int, Real>>> rows(rows_n);
            for (int sl = 0; sl < loc.num_states; ++sl)
                for (int s = 0; s < m.num_shared; ++s) {
                    int pos = own_agent == 0 ? s / C : s % C;
                    int cell = pos == off ? -1 : pos_cell[pos];
                    auto& row = rows[sl * m.num_shared + s];
                    if (loc.num_states > 1 && spec.switch_prob > 0 && cell == goals[sl]) {
                        Real rest = spec.switch_prob / (loc.num_states - 1);
                        for (int sl2 = 0; sl2 < loc.num_states; ++sl2)
                            row.emplace_back(sl2, sl2 == sl ? 1 - spec.switch_prob : rest);
                    } else {
                        row.emplace_back(sl, 1.0);
                    }
                }
            loc.trans.push_back(SparseMatrix::from_rows(rows_n, loc.num_states, rows));
        }
        loc.label.assign(static_cast<std::size_t>(m.num_shared) * loc.num_states, 0);
        return loc;
    };

    m.locals.push_back(goal_local(spec.goals1, 0));
    if (!spec.order_task) {
        m.locals.push_back(goal_local(spec.goals2, 1));
    } else {
        // private order bit o, fixed over time; labels expose o and the two
        // goal-visit atoms b (goals2[0]) and c (goals2[1])
        MaModel::Local loc;
        loc.num_states = 2;
        const int rows_n = 2 * m.num_shared;
        for (int ju = 0; ju < nJU; ++ju) {
            std::vector<std::vector<std::pair<int, Real>>> rows(rows_n);
            for (int sl = 0; sl < 2; ++sl)
                for (int s = 0; s < m.num_shared; ++s) rows[sl * m.num_shared + s] = {{sl, 1.0}};
            loc.trans.push_back(SparseMatrix::from_rows(rows_n, 2, rows));
        }
        int atom_o = loc.atoms.intern("o");
        int atom_b = loc.atoms.intern("b");
        int atom_c = loc.atoms.intern("c");
        loc.label.assign(static_cast<std::size_t>(m.num_shared) * 2, 0);
        for (int s = 0; s < m.num_shared; ++s) {
            int pos2 = s % C;
            int cell2 = pos2 == off ? -1 : pos_cell[pos2];
            for (int sl = 0; sl < 2; ++sl) {
                Letter l = 0;
                if (sl == 1) l |= 1u << atom_o;
                if (cell2 == spec.goals2[0]) l |= 1u << atom_b;
                if (cell2 == spec.goals2[1]) l |= 1u << atom_c;
                loc.label[static_cast<std::size_t>(s) * 2 + sl] = l;
            }
        }
        m.locals.push_back(std::move(loc));
    }

    // initial state: fixed positions, goal slots start at 0 (uniform order bit
    // for order tasks)
    int s0 = cell_pos[spec.start1] * C + cell_pos[spec.start2];
    if (!spec.order_task) {
        m.init.push_back({s0, {0, 0}, 1.0});
    } else {
        m.init.push_back({s0, {0, 0}, 0.5});
        m.init.push_back({s0, {0, 1}, 0.5});
    }

    // rewards: each agent earns its rate while sitting on an active goal
    m.reward.assign(static_cast<std::size_t>(m.num_joint_states()) * nJU, 0.0);
    const int combos = m.num_local_combos();
    for (int s = 0; s < m.num_shared; ++s) {
        int p1 = s / C, p2 = s % C;
        int cell1 = p1 == off ? -1 : pos_cell[p1];
        int cell2 = p2 == off ? -1 : pos_cell[p2];
        for (int c = 0; c < combos; ++c) {
            std::vector<int> loc(2);
            int rem = c;
            for (int i = 1; i >= 0; --i) {
                loc[i] = rem % m.locals[i].num_states;
                rem /= m.locals[i].num_states;
            }
            Real r = 0;
            if (cell1 == spec.goals1[loc[0] % spec.goals1.size()]) r += spec.reward1;
            if (!spec.order_task) {
                if (cell2 == spec.goals2[loc[1] % spec.goals2.size()]) r += spec.reward2;
            } else {
                if (cell2 == spec.goals2[0] || cell2 == spec.goals2[1]) r += spec.reward2;
            }
            if (r != 0) {
                int js = m.pack_joint(s, loc);
                for (int ju = 0; ju < nJU; ++ju)
                    m.reward[static_cast<std::size_t>(js) * nJU + ju] = r;
            }
        }
    }
    m.horizon = spec.horizon;
    return m;
}

inline std::vector<int> cross_lanes(const Grid& g, int lane_row, int lane_col) {
    std::vector<int> cells;
    for (int c = 0; c < g.cols; ++c) cells.push_back(g.at(lane_row, c));
    for (int r = 0; r < g.rows; ++r)
        if (r != lane_row) cells.push_back(g.at(r, lane_col));
    return cells;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// The zoo
// ---------------------------------------------------------------------------

struct ZooEntry {
    std::string name;
    std::string spec_id;
    bool multiagent = false;
    LabeledPomdp model;  // single-agent entries
    MaModel ma;          // multi-agent entries
    MaSpecStrings ma_specs;
    bool goal_from_accept = false;  // goal set completed from DFA acceptance
    Real table_one_minus_delta = 0;
    Real table_B = 0;
    Json meta;
};

struct Zoo {
    std::vector<ZooEntry> entries;

    const ZooEntry& get(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return e;
        throw SchemaError("unknown model id: " + name);
    }
};

/// Assembles every model in memory. The committed data files are generated
/// from this (tools/genzoo) and load_zoo() reads them back.
inline Zoo build_zoo() {
    using namespace detail;
    Zoo zoo;
    const HorizonModel geo = HorizonModel::geometric(0.99);

    auto add = [&](ZooEntry e) { zoo.entries.push_back(std::move(e)); };

    // M1: 8x8 reach-avoid, stochastic motion, noisy location observations.
    {
        Grid g{8, 8};
        CellSpec cs;
        cs.labels[g.at(5, 2)] = {"b"};
        cs.labels[g.at(1, 6)] = {"b"};
        cs.labels[g.at(7, 7)] = {"a"};
        cs.rewards[g.at(1, 6)] = 3;
        cs.rewards[g.at(4, 3)] = 3;
        cs.rewards[g.at(7, 7)] = 1;
        ZooEntry e;
        e.name = "M1";
        e.spec_id = "phi1";
        e.model = location_gridworld(g, 0.95, true, g.at(0, 0), cs, {"a", "b"}, geo);
        e.table_one_minus_delta = 0.70;
        e.table_B = 8;
        e.meta = {{"grid", {8, 8}},
                  {"note", "reach-avoid; obstacles b at (5,2),(1,6), goal a at (7,7)"}};
        add(std::move(e));
    }
    // M1-small: 4x4 desk-scale variant with the same temptation structure.
    {
        Grid g{4, 4};
        CellSpec cs;
        cs.labels[g.at(1, 2)] = {"b"};
        cs.labels[g.at(3, 3)] = {"a"};
        cs.rewards[g.at(1, 2)] = 3;
        cs.rewards[g.at(2, 1)] = 3;
        cs.rewards[g.at(3, 3)] = 1;
        ZooEntry e;
        e.name = "M1-small";
        e.spec_id = "phi1";
        e.model = location_gridworld(g, 0.95, true, g.at(0, 0), cs, {"a", "b"}, geo);
        e.table_one_minus_delta = 0.70;
        e.table_B = 8;
        e.meta = {{"grid", {4, 4}}, {"note", "desk-scale variant of M1"}};
        add(std::move(e));
    }
    // M2: ordered task on the M1 grid, reward at (3,3).
    {
        Grid g{8, 8};
        CellSpec cs;
        cs.labels[g.at(5, 2)] = {"b"};
        cs.labels[g.at(1, 6)] = {"b"};
        cs.labels[g.at(7, 7)] = {"a"};
        cs.rewards[g.at(3, 3)] = 1;
        ZooEntry e;
        e.name = "M2";
        e.spec_id = "phi2";
        e.model = location_gridworld(g, 0.95, true, g.at(0, 0), cs, {"a", "b"}, geo);
        e.table_one_minus_delta = 0.70;
        e.table_B = 6;
        e.meta = {{"grid", {8, 8}}, {"note", "ordered task: reach a then b"}};
        add(std::move(e));
    }
    // M2-small: 4x4 ordered task.
    {
        Grid g{4, 4};
        CellSpec cs;
        cs.labels[g.at(3, 0)] = {"a"};
        cs.labels[g.at(0, 3)] = {"b"};
        cs.rewards[g.at(3, 3)] = 1;
        ZooEntry e;
        e.name = "M2-small";
        e.spec_id = "phi2";
        e.model = location_gridworld(g, 0.95, true, g.at(0, 0), cs, {"a", "b"}, geo);
        e.table_one_minus_delta = 0.70;
        e.table_B = 6;
        e.meta = {{"grid", {4, 4}}, {"note", "desk-scale variant of M2"}};
        add(std::move(e));
    }
    // M3: 4x4 reactive task.
    {
        Grid g{4, 4};
        CellSpec cs;
        cs.labels[g.at(3, 0)] = {"a"};
        cs.labels[g.at(3, 3)] = {"b"};
        cs.labels[g.at(0, 3)] = {"c"};
        cs.labels[g.at(2, 2)] = {"d"};
        cs.rewards[g.at(3, 0)] = 1;
        cs.rewards[g.at(3, 3)] = 2;
        ZooEntry e;
        e.name = "M3";
        e.spec_id = "phi3";
        e.model = location_gridworld(g, 0.95, true, g.at(0, 0), cs, {"a", "b", "c", "d"}, geo);
        e.table_one_minus_delta = 0.80;
        e.table_B = 10;
        e.meta = {{"grid", {4, 4}},
                  {"note", "reactive: reach a or b; touching b requires c before d"}};
        add(std::move(e));
    }
    // M4: predicate uncertainty, reach-avoid.
    {
        Grid g{4, 4};
        std::map<int, Real> rewards{{g.at(3, 0), 2}, {g.at(0, 3), 4}};
        ZooEntry e;
        e.name = "M4";
        e.spec_id = "phi1";
        e.model = predicate_gridworld(g, g.at(0, 0), g.at(3, 0), g.at(0, 3), 0.9, 0.1, rewards, {},
                                      {"a", "b"}, geo);
        e.table_one_minus_delta = 0.85;
        e.table_B = 20;
        e.meta = {{"grid", {4, 4}},
                  {"note", "object b at (3,0) or (0,3); close detector is stronger at (3,0)"}};
        add(std::move(e));
    }
    // M5: predicate uncertainty, ordered task; a fixed at (3,3).
    {
        Grid g{4, 4};
        std::map<int, Real> rewards{{g.at(0, 0), 2}};
        std::map<int, std::vector<std::string>> fixed{{g.at(3, 3), {"a"}}};
        ZooEntry e;
        e.name = "M5";
        e.spec_id = "phi2";
        LabeledPomdp m = predicate_gridworld(g, g.at(0, 0), g.at(3, 0), g.at(0, 3), 0.9, 0.1,
                                             rewards, fixed, {"a", "b"}, geo);
        // the unknown object is only the b target; drop the synthetic a label
        // at the unused candidate
        for (int pos = 0; pos < g.cells(); ++pos)
            for (int w = 0; w < 2; ++w) {
                int s = pos * 2 + w;
                int other = (w == 0) ? g.at(0, 3) : g.at(3, 0);
                if (pos == other) m.labels[s] &= ~(1u << *m.atoms.find("a"));
            }
        e.model = std::move(m);
        e.table_one_minus_delta = 0.75;
        e.table_B = 10;
        e.meta = {{"grid", {4, 4}}, {"note", "visit a at (3,3) then the hidden b"}};
        add(std::move(e));
    }
    // M6: goal POMDP, the goal is the accepting automaton state.
    {
        Grid g{4, 4};
        CellSpec cs;
        cs.labels[g.at(0, 3)] = {"a"};
        cs.labels[g.at(3, 0)] = {"b"};
        ZooEntry e;
        e.name = "M6";
        e.spec_id = "phi2";
        e.model = location_gridworld(g, 0.8, false, g.at(0, 0), cs, {"a", "b"},
                                     HorizonModel::goal({}), -1.0);
        e.goal_from_accept = true;
        e.table_one_minus_delta = 0.9;
        e.table_B = 100;
        e.meta = {{"grid", {4, 4}}, {"note", "-1 per step until the DFA accepts"}};
        add(std::move(e));
    }
    // M7: 5x5 goal POMDP, reach-avoid reactive task, gridworld goal (4,0).
    {
        Grid g{5, 5};
        CellSpec cs;
        cs.labels[g.at(1, 1)] = {"a"};
        cs.labels[g.at(1, 3)] = {"b"};
        cs.labels[g.at(3, 3)] = {"c"};
        cs.labels[g.at(3, 1)] = {"d"};
        cs.labels[g.at(0, 4)] = {"s"};
        ZooEntry e;
        e.name = "M7";
        e.spec_id = "phi4";
        e.model = location_gridworld(g, 0.8, false, g.at(0, 0), cs, {"a", "b", "c", "d", "s"},
                                     HorizonModel::goal({g.at(4, 0)}), -1.0);
        e.table_one_minus_delta = 0.9;
        e.table_B = 100;
        e.meta = {{"grid", {5, 5}}, {"note", "goal cell (4,0); hitting a..d requires visiting s"}};
        add(std::move(e));
    }
    // M7-small: 4x4 desk-scale variant, goal (3,0).
    {
        Grid g{4, 4};
        CellSpec cs;
        cs.labels[g.at(1, 1)] = {"a"};
        cs.labels[g.at(1, 3)] = {"b"};
        cs.labels[g.at(3, 3)] = {"c"};
        cs.labels[g.at(2, 1)] = {"d"};
        cs.labels[g.at(0, 3)] = {"s"};
        ZooEntry e;
        e.name = "M7-small";
        e.spec_id = "phi4";
        e.model = location_gridworld(g, 0.8, false, g.at(0, 0), cs, {"a", "b", "c", "d", "s"},
                                     HorizonModel::goal({g.at(3, 0)}), -1.0);
        e.table_one_minus_delta = 0.9;
        e.table_B = 100;
        e.meta = {{"grid", {4, 4}}, {"note", "desk-scale variant of M7; goal (3,0)"}};
        add(std::move(e));
    }
    // M8: specification uncertainty with gridworld goal (3,3).
    {
        Grid g{4, 4};
        ZooEntry e;
        e.name = "M8";
        e.spec_id = "phi5";
        e.model = spec_uncertainty_gridworld(g, g.at(0, 0), g.at(0, 3), g.at(3, 0), g.at(2, 2),
                                             g.at(3, 3), HorizonModel::goal({}));
        e.table_one_minus_delta = 0.9;
        e.table_B = 100;
        e.meta = {{"grid", {4, 4}},
                  {"note", "order bit c revealed by the observation at (2,2); goal (3,3)"}};
        add(std::move(e));
    }
    // M9: 5x5 cross lanes, one agent goal switching.
    {
        Grid g{5, 5};
        LaneWorldSpec s;
        s.grid = g;
        s.lane_cells = cross_lanes(g, 2, 2);
        s.start1 = g.at(0, 2);
        s.start2 = g.at(2, 0);
        s.goals1 = {g.at(2, 3)};
        s.goals2 = {g.at(0, 2), g.at(2, 4), g.at(4, 2)};
        s.switch_prob = 0.2;
        s.reward1 = 1;
        s.reward2 = 3;
        ZooEntry e;
        e.name = "M9";
        e.spec_id = "phi6";
        e.multiagent = true;
        e.ma = lane_world(s);
        e.ma_specs = {"G (s & !col)", {"true", "true"}};
        e.table_one_minus_delta = 0.95;
        e.table_B = 50;
        e.meta = {{"grid", {5, 5}}, {"note", "A2's goal switches among (0,2),(2,4),(4,2)"}};
        add(std::move(e));
    }
    // M9-small: a single 1x6 lane. A2 commutes between its switching goals on
    // the left; A1 holds its goal on the right. (A 3x3 cross is degenerate:
    // every lane cell sits within collision distance of the center.)
    {
        Grid g{1, 6};
        LaneWorldSpec s;
        s.grid = g;
        for (int c = 0; c < 6; ++c) s.lane_cells.push_back(g.at(0, c));
        s.start1 = g.at(0, 5);
        s.start2 = g.at(0, 1);
        s.goals1 = {g.at(0, 4)};
        s.goals2 = {g.at(0, 0), g.at(0, 2)};
        s.switch_prob = 0.2;
        s.reward1 = 1;
        s.reward2 = 3;
        ZooEntry e;
        e.name = "M9-small";
        e.spec_id = "phi6";
        e.multiagent = true;
        e.ma = lane_world(s);
        e.ma_specs = {"G (s & !col)", {"true", "true"}};
        e.table_one_minus_delta = 0.95;
        e.table_B = 50;
        e.meta = {{"grid", {1, 6}}, {"note", "desk-scale variant of M9 on a single lane"}};
        add(std::move(e));
    }
    // M10: both agents switch between two goals at the lane ends.
    {
        Grid g{5, 5};
        LaneWorldSpec s;
        s.grid = g;
        s.lane_cells = cross_lanes(g, 2, 2);
        s.start1 = g.at(0, 2);
        s.start2 = g.at(2, 0);
        s.goals1 = {g.at(2, 0), g.at(2, 4)};
        s.goals2 = {g.at(0, 2), g.at(4, 2)};
        s.switch_prob = 0.2;
        ZooEntry e;
        e.name = "M10";
        e.spec_id = "phi6";
        e.multiagent = true;
        e.ma = lane_world(s);
        e.ma_specs = {"G (s & !col)", {"true", "true"}};
        e.table_one_minus_delta = 0.95;
        e.table_B = 50;
        e.meta = {{"grid", {5, 5}}, {"note", "goals at the four lane ends"}};
        add(std::move(e));
    }
    // M10-small: both agents switch between two goals on one lane. The lane
    // is one cell shorter than M9-small's so the coordinator transition table
    // stays under its cap with both agents carrying private goal slots.
    {
        Grid g{1, 5};
        LaneWorldSpec s;
        s.grid = g;
        for (int c = 0; c < 5; ++c) s.lane_cells.push_back(g.at(0, c));
        s.start1 = g.at(0, 4);
        s.start2 = g.at(0, 0);
        s.goals1 = {g.at(0, 3), g.at(0, 4)};
        s.goals2 = {g.at(0, 0), g.at(0, 1)};
        s.switch_prob = 0.2;
        ZooEntry e;
        e.name = "M10-small";
        e.spec_id = "phi6";
        e.multiagent = true;
        e.ma = lane_world(s);
        e.ma_specs = {"G (s & !col)", {"true", "true"}};
        e.table_one_minus_delta = 0.95;
        e.table_B = 50;
        e.meta = {{"grid", {1, 5}}, {"note", "desk-scale variant of M10 on a single lane"}};
        add(std::move(e));
    }
    // M11: 5x15 lanes with a one-way segment and a private visitation order.
    {
        Grid g{5, 15};
        LaneWorldSpec s;
        s.grid = g;
        for (int r : {0, 2, 4})
            for (int c = 0; c < g.cols; ++c) s.lane_cells.push_back(g.at(r, c));
        for (int c : {0, 6, 14})
            for (int r : {1, 3}) s.lane_cells.push_back(g.at(r, c));
        s.start1 = g.at(0, 6);
        s.start2 = g.at(2, 0);
        s.goals1 = {g.at(2, 11)};
        s.goals2 = {g.at(0, 14), g.at(4, 14)};  // b then c atoms
        s.order_task = true;
        s.collapse_off_lane = true;
        for (int r = 4; r > 0; --r) s.one_way.push_back({g.at(r, 14), g.at(r - 1, 14)});
        ZooEntry e;
        e.name = "M11";
        e.spec_id = "phi7";
        e.multiagent = true;
        e.ma = lane_world(s);
        e.ma_specs = {"G (s & !col)",
                      {"true", "(o -> (!b U (c & F b))) & (!o -> (!c U (b & F c)))"}};
        e.table_one_minus_delta = 0.7;
        e.table_B = 50;
        e.meta = {{"grid", {5, 15}},
                  {"note", "lanes on rows 0/2/4 and columns 0/6/14; column 14 is one-way upward; "
                           "A2's visitation order o is private; off-lane cells are collapsed "
                           "into one absorbing position that falsifies s"}};
        add(std::move(e));
    }
    // M11-small: 3x5 variant.
    {
        Grid g{3, 5};
        LaneWorldSpec s;
        s.grid = g;
        for (int c = 0; c < g.cols; ++c) {
            s.lane_cells.push_back(g.at(0, c));
            s.lane_cells.push_back(g.at(2, c));
        }
        for (int r = 0; r < g.rows; ++r) {
            s.lane_cells.push_back(g.at(r, 0));
            s.lane_cells.push_back(g.at(r, 4));
        }
        s.start1 = g.at(0, 2);
        s.start2 = g.at(2, 0);
        s.goals1 = {g.at(0, 3)};
        s.goals2 = {g.at(0, 4), g.at(2, 4)};
        s.order_task = true;
        s.one_way = {{g.at(2, 4), g.at(1, 4)}, {g.at(1, 4), g.at(0, 4)}};
        ZooEntry e;
        e.name = "M11-small";
        e.spec_id = "phi7";
        e.multiagent = true;
        e.ma = lane_world(s);
        e.ma_specs = {"G (s & !col)",
                      {"true", "(o -> (!b U (c & F b))) & (!o -> (!c U (b & F c)))"}};
        e.table_one_minus_delta = 0.7;
        e.table_B = 50;
        e.meta = {{"grid", {3, 5}},
                  {"note", "desk-scale variant of M11; the private order automaton makes the "
                           "prescription space exceed the coordinator caps, so planning reports "
                           "a blowup (the model remains usable for simulation and schema tests)"}};
        add(std::move(e));
    }
    return zoo;
}

// ---------------------------------------------------------------------------
// Zoo persistence
// ---------------------------------------------------------------------------

inline Json zoo_entry_to_json(const ZooEntry& e) {
    Json meta = e.meta.is_null() ? Json::object() : e.meta;
    meta["name"] = e.name;
    meta["spec"] = e.spec_id;
    meta["table"] = {{"one_minus_delta", e.table_one_minus_delta}, {"B", e.table_B}};
    if (e.goal_from_accept) meta["goal"] = "dfa-accept";
    if (e.multiagent) return ma_model_to_json(e.ma, e.ma_specs, meta);
    return model_to_json(e.model, meta);
}

inline ZooEntry zoo_entry_from_json(const Json& j) {
    ZooEntry e;
    const Json& meta = j.at("meta");
    e.name = meta.at("name").get<std::string>();
    e.spec_id = meta.at("spec").get<std::string>();
    e.table_one_minus_delta = meta.at("table").at("one_minus_delta").get<Real>();
    e.table_B = meta.at("table").at("B").get<Real>();
    e.goal_from_accept = meta.value("goal", "") == "dfa-accept";
    e.meta = meta;
    e.multiagent = j.contains("agents");
    if (e.multiagent)
        e.ma = ma_model_from_json(j, &e.ma_specs);
    else
        e.model = model_from_json(j);
    return e;
}

inline void save_zoo(const Zoo& zoo, const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& e : zoo.entries)
        save_text_file(dir + "/" + e.name + ".json", zoo_entry_to_json(e).dump() + "\n");
}

inline std::string default_zoo_dir() {
    if (const char* env = std::getenv("LTLFPLAN_ZOO")) return env;
#ifdef LTLFPLAN_ZOO_DIR
    return LTLFPLAN_ZOO_DIR;
#else
    return "data/zoo";
#endif
}

inline Zoo load_zoo(const std::string& dir = default_zoo_dir()) {
    Zoo zoo;
    if (!std::filesystem::is_directory(dir)) throw SchemaError("zoo directory not found: " + dir);
    std::vector<std::string> files;
    for (const auto& p : std::filesystem::directory_iterator(dir))
        if (p.path().extension() == ".json") files.push_back(p.path().string());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) zoo.entries.push_back(zoo_entry_from_json(load_json_file(f)));
    return zoo;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

enum class SolverChoice { Exact, Pbvi };

struct Experiment {
    std::string model_id;
    std::string spec_id;  // empty -> the entry's default pairing
    Real delta = 0.1;
    Real rho = 0;
    Real B = 10;
    int K = 12;
    SolverChoice solver = SolverChoice::Pbvi;
    std::uint64_t seed = 0;
    int n_eval = 300;
    int n_final = 200;  // final Monte Carlo evaluation sample count
    std::optional<Real> eta;
    std::optional<Real> gamma_override;
    PbviConfig pbvi{.target_gap_abs = 1e-3, .target_gap_rel = 0.02, .timeout_s = 10.0};
    Real goal_gamma = 0.995;  // discount of the goal-model solver view
    CoordinatorOptions coordinator;
};

struct ResultRow {
    std::string model_id;
    std::string spec_id;
    Real obj_est = 0, obj_ci = 0;
    Real acc_est = 0, acc_ci = 0;
    Real one_minus_delta = 0;
    Real B = 0;
    Real reward_gap = 0, feasibility_gap = 0;
    Real wall_s = 0;
    std::uint64_t seed = 0;
    bool blowup = false;
    std::string note;
};

/// Full pipeline on one zoo entry: compile the specification, build the
/// product (or coordinator), run the EG loop, and estimate the final policy
/// with n_final Monte Carlo simulations.
inline ResultRow run_experiment(const Zoo& zoo, const Experiment& ex) {
    const ZooEntry& entry = zoo.get(ex.model_id);
    const std::string spec_id = ex.spec_id.empty() ? entry.spec_id : ex.spec_id;

    ResultRow row;
    row.model_id = entry.name;
    row.spec_id = spec_id;
    row.one_minus_delta = 1 - ex.delta;
    row.B = ex.B;
    row.seed = ex.seed;

    const auto t0 = std::chrono::steady_clock::now();
    try {
        FormulaStore store;
        ProductPomdp product;
        if (!entry.multiagent) {
            LabeledPomdp model = entry.model;
            if (ex.gamma_override && model.horizon.kind == HorizonKind::Geometric)
                model.horizon.gamma = *ex.gamma_override;
            validate(model);
            AtomTable atoms = model.atoms;
            atoms.seal();
            FormulaId phi = parse_spec(store, atoms, spec_text(spec_id));
            Dfa dfa = minimize(compile_dfa(store, phi, model.atoms));
            product = build_product(model, dfa, {.goal_from_accept = entry.goal_from_accept});
        } else {
            MaModel ma = entry.ma;
            if (ex.gamma_override && ma.horizon.kind == HorizonKind::Geometric)
                ma.horizon.gamma = *ex.gamma_override;
            SpecBundle bundle =
                build_spec_bundle(store, ma, entry.ma_specs.global, entry.ma_specs.local);
            bundle.dfa_global = minimize(bundle.dfa_global);
            for (auto& d : bundle.dfa_local) d = minimize(d);
            FactoredProduct fp = build_ma_product(ma, std::move(bundle));
            CoordinatorPomdp co = build_coordinator(fp, ex.coordinator);
            product = std::move(co.pomdp);
        }

        EgConfig cfg;
        cfg.K = ex.K;
        cfg.B = ex.B;
        cfg.delta = ex.delta;
        cfg.rho = ex.rho;
        cfg.n_eval = ex.n_eval;
        cfg.seed = ex.seed;
        cfg.eta = ex.eta;

        OptHook opt = ex.solver == SolverChoice::Exact
                          ? make_exact_opt_hook()
                          : make_pbvi_opt_hook(ex.pbvi, ex.goal_gamma);
        EvalHook eval = ex.solver == SolverChoice::Exact
                            ? make_exact_eval_hook()
                            : make_mc_eval_hook(ex.n_eval, ex.seed);
        EgResult res = run_eg(product, cfg, opt, eval);

        McEstimate acc = eval_mc(product, res.mu_bar, Channel::Accept, ex.n_final, ex.seed + 1);
        McEstimate obj = eval_mc(product, res.mu_bar, Channel::Objective, ex.n_final, ex.seed + 2);
        row.acc_est = acc.mean;
        row.acc_ci = acc.hoeffding;
        row.obj_est = obj.mean;
        row.obj_ci = obj.hoeffding;
        row.reward_gap = res.certificate.reward_gap;
        row.feasibility_gap = res.certificate.feasibility_gap;
    } catch (const BlowUp& e) {
        row.blowup = true;
        row.note = e.what();
    } catch (const NonTermination&) {
        row.blowup = true;
        row.note = "policy failed to reach the goal set within the step cap";
    }
    row.wall_s = std::chrono::duration<Real>(std::chrono::steady_clock::now() - t0).count();
    return row;
}

// ---------------------------------------------------------------------------
// Table emission
// ---------------------------------------------------------------------------

inline std::string fmt_real(Real v, int prec = 3) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    return buf;
}

inline std::string emit_csv(const std::vector<ResultRow>& rows) {
    std::string out =
        "model,spec,objective,objective_ci,accept,accept_ci,one_minus_delta,B,reward_gap,"
        "feasibility_gap,time_s,seed,note\n";
    for (const auto& r : rows) {
        std::ostringstream os;
        os << r.model_id << ',' << r.spec_id << ',';
        if (r.blowup)
            os << "-,-,-,-,";
        else
            os << fmt_real(r.obj_est, 6) << ',' << fmt_real(r.obj_ci, 6) << ','
               << fmt_real(r.acc_est, 6) << ',' << fmt_real(r.acc_ci, 6) << ',';
        os << fmt_real(r.one_minus_delta, 6) << ',' << fmt_real(r.B, 6) << ',';
        if (r.blowup)
            os << "-,-,";
        else
            os << fmt_real(r.reward_gap, 6) << ',' << fmt_real(r.feasibility_gap, 6) << ',';
        os << fmt_real(r.wall_s, 4) << ',' << r.seed << ',' << (r.note.empty() ? "-" : r.note)
           << '\n';
        out += os.str();
    }
    return out;
}

inline std::string emit_text_table(const std::vector<ResultRow>& rows) {
    std::vector<std::vector<std::string>> cells;
    cells.push_back({"Model", "Spec", "R", "Rf", "1-delta", "B", "reward_gap", "feas_gap", "time"});
    for (const auto& r : rows) {
        std::vector<std::string> c;
        c.push_back(r.model_id);
        c.push_back(r.spec_id);
        c.push_back(r.blowup ? "-" : fmt_real(r.obj_est));
        c.push_back(r.blowup ? "-" : fmt_real(r.acc_est));
        c.push_back(fmt_real(r.one_minus_delta));
        c.push_back(fmt_real(r.B));
        c.push_back(r.blowup ? "-" : fmt_real(r.reward_gap));
        c.push_back(r.blowup ? "-" : fmt_real(r.feasibility_gap));
        c.push_back(fmt_real(r.wall_s, 3) + "s");
        cells.push_back(std::move(c));
    }
    std::vector<std::size_t> width(cells[0].size(), 0);
    for (const auto& row : cells)
        for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
    std::string out;
    for (const auto& row : cells) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out += row[i];
            out.append(width[i] - row[i].size() + 2, ' ');
        }
        out += '\n';
    }
    return out;
}

}  // namespace ltlfplan::bench
