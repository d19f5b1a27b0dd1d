#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ltlfplan/common.hpp"
#include "ltlfplan/ltlf.hpp"

namespace ltlfplan {

/// Boolean function over the DFA's support atoms, stored as the canonical set
/// of satisfying assignments (minterms). Guards on the out-edges of a state
/// are pairwise disjoint and jointly exhaustive.
struct Guard {
    std::vector<std::uint32_t> minterms;  // ascending

    bool satisfied_by(std::uint32_t assignment) const {
        return std::binary_search(minterms.begin(), minterms.end(), assignment);
    }
};

struct DfaEdge {
    int from;
    Guard guard;
    int to;
};

/// Complete deterministic finite automaton over the alphabet 2^AP, with the
/// transition function restricted to the formula's support atoms.
struct Dfa {
    int num_states = 0;
    int initial = 0;
    std::vector<char> accepting;       // per state
    std::vector<int> support;          // atom indices, ascending
    std::vector<std::int32_t> table;   // [q * num_assignments() + assignment] -> q', -1 = missing
    AtomTable atoms;                   // names, for printing and compatibility checks

    int num_assignments() const { return 1 << static_cast<int>(support.size()); }

    /// Projects a full letter onto the support assignment.
    std::uint32_t project(Letter l) const {
        std::uint32_t a = 0;
        for (std::size_t j = 0; j < support.size(); ++j)
            if (l & (1u << support[j])) a |= 1u << j;
        return a;
    }

    /// Expands a support assignment into a letter over the full atom table.
    Letter expand(std::uint32_t a) const {
        Letter l = 0;
        for (std::size_t j = 0; j < support.size(); ++j)
            if (a & (1u << j)) l |= 1u << support[j];
        return l;
    }

    int step_assignment(int q, std::uint32_t a) const {
        int to = table[static_cast<std::size_t>(q) * num_assignments() + a];
        if (to < 0) throw IncompleteDfa(q);
        return to;
    }

    /// Unique successor of q under the single guard satisfied by l.
    int step(int q, Letter l) const { return step_assignment(q, project(l)); }

    /// Runs the automaton on a word and reports acceptance of the final state.
    bool accepts(std::span<const Letter> word) const {
        int q = initial;
        for (Letter l : word) q = step(q, l);
        return accepting[q];
    }

    /// Out-edges of q with assignments grouped by target state.
    std::vector<DfaEdge> edges(int q) const {
        std::map<int, Guard> by_target;
        for (std::uint32_t a = 0; a < static_cast<std::uint32_t>(num_assignments()); ++a) {
            int to = table[static_cast<std::size_t>(q) * num_assignments() + a];
            if (to < 0) continue;
            by_target[to].minterms.push_back(a);
        }
        std::vector<DfaEdge> out;
        for (auto& [to, g] : by_target) out.push_back(DfaEdge{q, std::move(g), to});
        return out;
    }

    std::string guard_dnf(const Guard& g) const {
        if (g.minterms.size() == static_cast<std::size_t>(num_assignments())) return "true";
        if (g.minterms.empty()) return "false";
        std::string s;
        for (std::size_t i = 0; i < g.minterms.size(); ++i) {
            if (i) s += " | ";
            if (support.empty()) {
                s += "true";
                continue;
            }
            for (std::size_t j = 0; j < support.size(); ++j) {
                if (j) s += " & ";
                if (!(g.minterms[i] & (1u << j))) s += "!";
                s += atoms.name(support[j]);
            }
        }
        return s;
    }
};

struct CompileOptions {
    std::size_t state_cap = 10000;
};

namespace detail {

/// Reduced ordered BDD engine sized for DFA compilation. Variables are
/// formula nodes: literals, the end-of-word marker, and maximal temporal
/// subformulas; everything Boolean in between reduces away, which keeps the
/// derivative state space canonical.
class Bdd {
public:
    static constexpr int kFalse = 0;
    static constexpr int kTrue = 1;

    Bdd() {
        nodes_.push_back({-1, -1, -1});  // false terminal
        nodes_.push_back({-1, -1, -1});  // true terminal
    }

    int var_node(int var) { return mk(var, kFalse, kTrue); }

    int bdd_not(int a) {
        if (a == kFalse) return kTrue;
        if (a == kTrue) return kFalse;
        if (auto it = not_memo_.find(a); it != not_memo_.end()) return it->second;
        int r = mk(nodes_[a].var, bdd_not(nodes_[a].lo), bdd_not(nodes_[a].hi));
        not_memo_.emplace(a, r);
        return r;
    }

    int bdd_and(int a, int b) {
        if (a == kFalse || b == kFalse) return kFalse;
        if (a == kTrue) return b;
        if (b == kTrue) return a;
        if (a == b) return a;
        if (a > b) std::swap(a, b);
        std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
        if (auto it = and_memo_.find(key); it != and_memo_.end()) return it->second;
        auto [var, alo, ahi, blo, bhi] = split(a, b);
        int r = mk(var, bdd_and(alo, blo), bdd_and(ahi, bhi));
        and_memo_.emplace(key, r);
        return r;
    }

    int bdd_or(int a, int b) {
        if (a == kTrue || b == kTrue) return kTrue;
        if (a == kFalse) return b;
        if (b == kFalse) return a;
        if (a == b) return a;
        if (a > b) std::swap(a, b);
        std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
        if (auto it = or_memo_.find(key); it != or_memo_.end()) return it->second;
        auto [var, alo, ahi, blo, bhi] = split(a, b);
        int r = mk(var, bdd_or(alo, blo), bdd_or(ahi, bhi));
        or_memo_.emplace(key, r);
        return r;
    }

    bool is_terminal(int a) const { return a <= kTrue; }
    int var_of(int a) const { return nodes_[a].var; }
    int lo_of(int a) const { return nodes_[a].lo; }
    int hi_of(int a) const { return nodes_[a].hi; }
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        int var, lo, hi;
    };

    std::tuple<int, int, int, int, int> split(int a, int b) const {
        int va = nodes_[a].var, vb = nodes_[b].var;
        int var = std::min(va, vb);
        int alo = a, ahi = a, blo = b, bhi = b;
        if (va == var) {
            alo = nodes_[a].lo;
            ahi = nodes_[a].hi;
        }
        if (vb == var) {
            blo = nodes_[b].lo;
            bhi = nodes_[b].hi;
        }
        return {var, alo, ahi, blo, bhi};
    }

    int mk(int var, int lo, int hi) {
        if (lo == hi) return lo;
        if (nodes_.size() >= (1u << 22) || var >= (1 << 20))
            throw StateBlowup(nodes_.size());
        // exact packing: nodes < 2^22, vars < 2^20
        std::uint64_t key = (static_cast<std::uint64_t>(var) << 44) |
                            (static_cast<std::uint64_t>(lo) << 22) | static_cast<std::uint64_t>(hi);
        auto [it, inserted] = unique_.emplace(key, static_cast<int>(nodes_.size()));
        if (!inserted) return it->second;
        nodes_.push_back({var, lo, hi});
        return static_cast<int>(nodes_.size() - 1);
    }

    std::vector<Node> nodes_;
    std::unordered_map<std::uint64_t, int> unique_;
    std::unordered_map<std::uint64_t, int> and_memo_;
    std::unordered_map<std::uint64_t, int> or_memo_;
    std::unordered_map<int, int> not_memo_;
};

/// Derivative-based DFA construction with BDD-canonical states. BDD variables
/// are formula ids of literals, Empty, and temporal subformulas; a state is
/// accepting when its function holds under the end-of-word assignment.
class DfaCompiler {
public:
    DfaCompiler(FormulaStore& store, FormulaId root) : store_(store) {
        root_bdd_ = to_bdd(root);
    }

    int root_bdd() const { return root_bdd_; }

    /// Substitutes every variable with its derivative under the letter.
    int derive(int state, Letter l, std::uint32_t assignment) {
        if (state == Bdd::kFalse || state == Bdd::kTrue) return state;
        std::uint64_t key =
            (static_cast<std::uint64_t>(state) << 21) | static_cast<std::uint64_t>(assignment);
        if (auto it = derive_memo_.find(key); it != derive_memo_.end()) return it->second;
        const int v = bdd_.var_of(state);
        const int dv = derive_var(v, l, assignment);
        const int lo = derive(bdd_.lo_of(state), l, assignment);
        const int hi = derive(bdd_.hi_of(state), l, assignment);
        int r = bdd_.bdd_or(bdd_.bdd_and(dv, hi), bdd_.bdd_and(bdd_.bdd_not(dv), lo));
        derive_memo_.emplace(key, r);
        return r;
    }

    /// End-of-word acceptance of a state function.
    bool accepting(int state) const {
        while (state > Bdd::kTrue) {
            state = eta_var(bdd_.var_of(state)) ? bdd_.hi_of(state) : bdd_.lo_of(state);
        }
        return state == Bdd::kTrue;
    }

private:
    int to_bdd(FormulaId f) {
        if (auto it = to_bdd_memo_.find(f); it != to_bdd_memo_.end()) return it->second;
        int r;
        switch (store_.op(f)) {
            case Op::True: r = Bdd::kTrue; break;
            case Op::False: r = Bdd::kFalse; break;
            case Op::NonEmpty: r = bdd_.bdd_not(var_for(empty_marker())); break;
            case Op::Empty: r = bdd_.var_node(var_for(empty_marker())); break;
            case Op::Atom: r = bdd_.var_node(var_for(f)); break;
            case Op::NotAtom: r = bdd_.bdd_not(var_for_atom(store_.atom_of(f))); break;
            case Op::Not: r = bdd_.bdd_not(to_bdd(store_.kids(f)[0])); break;
            case Op::And: {
                r = Bdd::kTrue;
                for (FormulaId k : store_.kids(f)) r = bdd_.bdd_and(r, to_bdd(k));
                break;
            }
            case Op::Or: {
                r = Bdd::kFalse;
                for (FormulaId k : store_.kids(f)) r = bdd_.bdd_or(r, to_bdd(k));
                break;
            }
            default: r = bdd_.var_node(var_for(f)); break;  // temporal head
        }
        to_bdd_memo_.emplace(f, r);
        return r;
    }

    int var_for_atom(int atom) { return bdd_.var_node(var_for(store_.atom(atom))); }

    FormulaId empty_marker() const { return store_.empty(); }

    // Variable order is first-use order; any fixed order is valid here.
    int var_for(FormulaId f) {
        auto [it, inserted] = var_index_.emplace(f, static_cast<int>(var_formula_.size()));
        if (inserted) var_formula_.push_back(f);
        return it->second;
    }

    bool eta_var(int var) const {
        FormulaId f = var_formula_[var];
        switch (store_.op(f)) {
            case Op::Empty: return true;  // the remaining word is empty here
            case Op::Atom: return false;
            case Op::WeakNext:
            case Op::Release:
            case Op::Always: return true;
            default: return false;  // Next, Until, Eventually
        }
    }

    /// Derivative of a single variable as a BDD over post-step variables.
    int derive_var(int var, Letter l, std::uint32_t assignment) {
        std::uint64_t key =
            (static_cast<std::uint64_t>(var) << 21) | static_cast<std::uint64_t>(assignment);
        if (auto it = dvar_memo_.find(key); it != dvar_memo_.end()) return it->second;
        FormulaId f = var_formula_[var];
        int r;
        switch (store_.op(f)) {
            case Op::Empty: r = Bdd::kFalse; break;  // a letter was just consumed
            case Op::Atom:
                r = (l & (1u << store_.atom_of(f))) ? Bdd::kTrue : Bdd::kFalse;
                break;
            case Op::Next:
                r = bdd_.bdd_and(to_bdd(store_.kids(f)[0]),
                                 bdd_.bdd_not(bdd_.var_node(var_for(empty_marker()))));
                break;
            case Op::WeakNext:
                r = bdd_.bdd_or(to_bdd(store_.kids(f)[0]),
                                bdd_.var_node(var_for(empty_marker())));
                break;
            case Op::Until: {
                int df = derive_formula(store_.kids(f)[0], l, assignment);
                int dg = derive_formula(store_.kids(f)[1], l, assignment);
                r = bdd_.bdd_or(dg, bdd_.bdd_and(df, bdd_.var_node(var)));
                break;
            }
            case Op::Release: {
                int df = derive_formula(store_.kids(f)[0], l, assignment);
                int dg = derive_formula(store_.kids(f)[1], l, assignment);
                r = bdd_.bdd_and(dg, bdd_.bdd_or(df, bdd_.var_node(var)));
                break;
            }
            case Op::Eventually:
                r = bdd_.bdd_or(derive_formula(store_.kids(f)[0], l, assignment),
                                bdd_.var_node(var));
                break;
            case Op::Always:
                r = bdd_.bdd_and(derive_formula(store_.kids(f)[0], l, assignment),
                                 bdd_.var_node(var));
                break;
            default: throw std::logic_error("unexpected variable kind in derivative");
        }
        dvar_memo_.emplace(key, r);
        return r;
    }

    /// Derivative of an arbitrary subformula (recursing through the Boolean
    /// skeleton, consulting derive_var at the variables).
    int derive_formula(FormulaId f, Letter l, std::uint32_t assignment) {
        switch (store_.op(f)) {
            case Op::True: return Bdd::kTrue;
            case Op::False: return Bdd::kFalse;
            case Op::NonEmpty: return Bdd::kTrue;
            case Op::Empty: return Bdd::kFalse;
            case Op::Atom: return (l & (1u << store_.atom_of(f))) ? Bdd::kTrue : Bdd::kFalse;
            case Op::NotAtom: return (l & (1u << store_.atom_of(f))) ? Bdd::kFalse : Bdd::kTrue;
            case Op::Not: return bdd_.bdd_not(derive_formula(store_.kids(f)[0], l, assignment));
            case Op::And: {
                int r = Bdd::kTrue;
                for (FormulaId k : store_.kids(f))
                    r = bdd_.bdd_and(r, derive_formula(k, l, assignment));
                return r;
            }
            case Op::Or: {
                int r = Bdd::kFalse;
                for (FormulaId k : store_.kids(f))
                    r = bdd_.bdd_or(r, derive_formula(k, l, assignment));
                return r;
            }
            default: return derive_var(var_for(f), l, assignment);
        }
    }

    FormulaStore& store_;
    Bdd bdd_;
    int root_bdd_;
    std::unordered_map<FormulaId, int> to_bdd_memo_;
    std::unordered_map<FormulaId, int> var_index_;
    std::vector<FormulaId> var_formula_;
    std::unordered_map<std::uint64_t, int> dvar_memo_;
    std::unordered_map<std::uint64_t, int> derive_memo_;
};

}  // namespace detail

/// Compiles an LTLf formula into an equivalent complete DFA: for every word w
/// with |w| >= 1, the DFA accepts w iff (w,0) |= f. States are reachable by
/// construction; the state space is canonical up to propositional identity of
/// the formula derivatives.
inline Dfa compile_dfa(FormulaStore& store, FormulaId f, const AtomTable& atoms,
                       const CompileOptions& opts = {}) {
    Dfa dfa;
    dfa.atoms = atoms;
    dfa.support = store.atoms_of(f);
    const int na = dfa.num_assignments();

    detail::DfaCompiler compiler(store, f);
    std::unordered_map<int, int> index;
    std::vector<int> states;
    std::deque<int> queue;
    index.emplace(compiler.root_bdd(), 0);
    states.push_back(compiler.root_bdd());
    queue.push_back(compiler.root_bdd());

    while (!queue.empty()) {
        int cur = queue.front();
        queue.pop_front();
        const int q = index.at(cur);
        if (dfa.table.size() < static_cast<std::size_t>(q + 1) * na)
            dfa.table.resize(static_cast<std::size_t>(q + 1) * na, -1);
        for (std::uint32_t a = 0; a < static_cast<std::uint32_t>(na); ++a) {
            Letter l = dfa.expand(a);
            int nxt = compiler.derive(cur, l, a);
            auto [it, inserted] = index.emplace(nxt, static_cast<int>(states.size()));
            if (inserted) {
                states.push_back(nxt);
                if (states.size() > opts.state_cap) throw StateBlowup(states.size());
                queue.push_back(nxt);
            }
            dfa.table[static_cast<std::size_t>(q) * na + a] = it->second;
        }
    }

    dfa.num_states = static_cast<int>(states.size());
    dfa.table.resize(static_cast<std::size_t>(dfa.num_states) * na, -1);
    dfa.accepting.resize(dfa.num_states);
    for (int q = 0; q < dfa.num_states; ++q) dfa.accepting[q] = compiler.accepting(states[q]);
    dfa.initial = 0;
    return dfa;
}

/// Language-preserving minimization: drop unreachable states, merge
/// equivalent ones (partition refinement), renumber canonically (BFS order,
/// edges explored in ascending assignment order).
inline Dfa minimize(const Dfa& in) {
    const int na = in.num_assignments();

    // reachability
    std::vector<int> order;
    std::vector<char> seen(in.num_states, 0);
    order.push_back(in.initial);
    seen[in.initial] = 1;
    for (std::size_t i = 0; i < order.size(); ++i) {
        int q = order[i];
        for (int a = 0; a < na; ++a) {
            int to = in.table[static_cast<std::size_t>(q) * na + a];
            if (to < 0) throw IncompleteDfa(q);
            if (!seen[to]) {
                seen[to] = 1;
                order.push_back(to);
            }
        }
    }

    // partition refinement on reachable states
    std::vector<int> cls(in.num_states, -1);
    for (int q : order) cls[q] = in.accepting[q] ? 1 : 0;
    int num_classes = 2;
    while (true) {
        std::map<std::vector<int>, int> sig_index;
        std::vector<int> next_cls(in.num_states, -1);
        for (int q : order) {
            std::vector<int> sig;
            sig.reserve(na + 1);
            sig.push_back(cls[q]);
            for (int a = 0; a < na; ++a)
                sig.push_back(cls[in.table[static_cast<std::size_t>(q) * na + a]]);
            auto [it, inserted] = sig_index.emplace(std::move(sig), static_cast<int>(sig_index.size()));
            next_cls[q] = it->second;
        }
        const int n = static_cast<int>(sig_index.size());
        cls = std::move(next_cls);
        if (n == num_classes) break;
        num_classes = n;
    }

    // canonical BFS renumbering of classes
    std::vector<int> class_rep(num_classes, -1);
    for (int q : order)
        if (class_rep[cls[q]] < 0) class_rep[cls[q]] = q;

    Dfa out;
    out.support = in.support;
    out.atoms = in.atoms;
    std::vector<int> renum(num_classes, -1);
    std::vector<int> bfs;
    renum[cls[in.initial]] = 0;
    bfs.push_back(cls[in.initial]);
    for (std::size_t i = 0; i < bfs.size(); ++i) {
        int c = bfs[i];
        int q = class_rep[c];
        for (int a = 0; a < na; ++a) {
            int tc = cls[in.table[static_cast<std::size_t>(q) * na + a]];
            if (renum[tc] < 0) {
                renum[tc] = static_cast<int>(bfs.size());
                bfs.push_back(tc);
            }
        }
    }

    out.num_states = static_cast<int>(bfs.size());
    out.initial = 0;
    out.accepting.resize(out.num_states);
    out.table.assign(static_cast<std::size_t>(out.num_states) * na, -1);
    for (std::size_t i = 0; i < bfs.size(); ++i) {
        int q = class_rep[bfs[i]];
        out.accepting[i] = in.accepting[q];
        for (int a = 0; a < na; ++a)
            out.table[i * na + a] = renum[cls[in.table[static_cast<std::size_t>(q) * na + a]]];
    }
    return out;
}

inline std::string dfa_to_dot(const Dfa& d, const std::string& name = "dfa") {
    std::ostringstream os;
    os << "digraph " << name << " {\n  rankdir=LR;\n  __init [shape=point];\n";
    for (int q = 0; q < d.num_states; ++q)
        os << "  q" << q << " [shape=" << (d.accepting[q] ? "doublecircle" : "circle") << "];\n";
    os << "  __init -> q" << d.initial << ";\n";
    for (int q = 0; q < d.num_states; ++q)
        for (const auto& e : d.edges(q))
            os << "  q" << e.from << " -> q" << e.to << " [label=\"" << d.guard_dnf(e.guard)
               << "\"];\n";
    os << "}\n";
    return os.str();
}

}  // namespace ltlfplan
