#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ltlfplan/common.hpp"

namespace ltlfplan {

/// One truth assignment to the atomic propositions: bit i <=> atom i holds.
using Letter = std::uint32_t;

constexpr int kMaxAtoms = 20;

/// Dense name <-> index table for atomic propositions. Parsing against a
/// sealed table rejects unknown identifiers instead of registering them.
class AtomTable {
public:
    int intern(const std::string& name) {
        auto it = index_.find(name);
        if (it != index_.end()) return it->second;
        if (sealed_) throw SealedAtomError(name);
        if (static_cast<int>(names_.size()) >= kMaxAtoms)
            throw std::invalid_argument("atom table limited to " + std::to_string(kMaxAtoms) + " atoms");
        int id = static_cast<int>(names_.size());
        names_.push_back(name);
        index_.emplace(name, id);
        return id;
    }

    std::optional<int> find(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    int size() const { return static_cast<int>(names_.size()); }
    const std::string& name(int id) const { return names_.at(id); }
    void seal() { sealed_ = true; }
    bool sealed() const { return sealed_; }

    bool operator==(const AtomTable& o) const { return names_ == o.names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> index_;
    bool sealed_ = false;
};

enum class Op : std::uint8_t {
    True,
    False,
    NonEmpty,  // internal: remaining word is nonempty
    Empty,     // internal: remaining word is empty
    Atom,
    NotAtom,
    Not,
    And,
    Or,
    Next,
    WeakNext,
    Until,
    Release,
    Eventually,
    Always,
};

using FormulaId = int;

/// Hash-consed formula nodes. Children always have smaller ids than their
/// parent, so ascending id order is a valid evaluation order. Structural
/// equality is id equality.
class FormulaStore {
public:
    FormulaStore() {
        true_id_ = make(Op::True, -1, {});
        false_id_ = make(Op::False, -1, {});
        nonempty_id_ = make(Op::NonEmpty, -1, {});
        empty_id_ = make(Op::Empty, -1, {});
    }

    FormulaId lit_true() const { return true_id_; }
    FormulaId lit_false() const { return false_id_; }
    FormulaId nonempty() const { return nonempty_id_; }
    FormulaId empty() const { return empty_id_; }

    FormulaId atom(int a) { return make(Op::Atom, a, {}); }
    FormulaId not_atom(int a) { return make(Op::NotAtom, a, {}); }

    // Surface constructors: preserve the shape the user wrote.
    FormulaId f_not(FormulaId f) { return make(Op::Not, -1, {f}); }
    FormulaId f_and(FormulaId a, FormulaId b) { return make(Op::And, -1, {a, b}); }
    FormulaId f_or(FormulaId a, FormulaId b) { return make(Op::Or, -1, {a, b}); }
    FormulaId f_next(FormulaId f) { return make(Op::Next, -1, {f}); }
    FormulaId f_wnext(FormulaId f) { return make(Op::WeakNext, -1, {f}); }
    FormulaId f_until(FormulaId a, FormulaId b) { return make(Op::Until, -1, {a, b}); }
    FormulaId f_release(FormulaId a, FormulaId b) { return make(Op::Release, -1, {a, b}); }
    FormulaId f_ev(FormulaId f) { return make(Op::Eventually, -1, {f}); }
    FormulaId f_alw(FormulaId f) { return make(Op::Always, -1, {f}); }

    Op op(FormulaId f) const { return nodes_[f].op; }
    int atom_of(FormulaId f) const { return nodes_[f].atom; }
    std::span<const FormulaId> kids(FormulaId f) const { return nodes_[f].kids; }

    std::size_t size() const { return nodes_.size(); }

    // ---- normalized (NNF, flattened, constant-folded) constructors ----

    FormulaId n_not(FormulaId f) {
        if (auto it = neg_.find(f); it != neg_.end()) return it->second;
        FormulaId r;
        const auto& n = nodes_[f];
        switch (n.op) {
            case Op::True: r = false_id_; break;
            case Op::False: r = true_id_; break;
            case Op::NonEmpty: r = empty_id_; break;
            case Op::Empty: r = nonempty_id_; break;
            case Op::Atom: r = not_atom(n.atom); break;
            case Op::NotAtom: r = atom(n.atom); break;
            case Op::And: {
                std::vector<FormulaId> ks(n.kids);
                for (auto& k : ks) k = n_not(k);
                r = n_or(ks);
                break;
            }
            case Op::Or: {
                std::vector<FormulaId> ks(n.kids);
                for (auto& k : ks) k = n_not(k);
                r = n_and(ks);
                break;
            }
            case Op::Next: r = n_wnext(n_not(n.kids[0])); break;
            case Op::WeakNext: r = n_next(n_not(n.kids[0])); break;
            case Op::Until: r = n_release(n_not(n.kids[0]), n_not(n.kids[1])); break;
            case Op::Release: r = n_until(n_not(n.kids[0]), n_not(n.kids[1])); break;
            case Op::Eventually: r = n_alw(n_not(n.kids[0])); break;
            case Op::Always: r = n_ev(n_not(n.kids[0])); break;
            case Op::Not: r = normalize(n.kids[0]); break;
        }
        neg_.emplace(f, r);
        neg_.emplace(r, f);
        return r;
    }

    FormulaId n_and(std::span<const FormulaId> parts) {
        std::vector<FormulaId> flat;
        for (FormulaId p : parts) {
            if (nodes_[p].op == Op::And) {
                for (FormulaId k : nodes_[p].kids) flat.push_back(k);
            } else if (p == true_id_) {
                continue;
            } else if (p == false_id_) {
                return false_id_;
            } else {
                flat.push_back(p);
            }
        }
        std::sort(flat.begin(), flat.end());
        flat.erase(std::unique(flat.begin(), flat.end()), flat.end());
        for (FormulaId k : flat) {
            if (k == false_id_) return false_id_;
            auto it = neg_.find(k);
            if (it != neg_.end() && std::binary_search(flat.begin(), flat.end(), it->second))
                return false_id_;
            const auto& n = nodes_[k];
            if (n.op == Op::Atom &&
                std::binary_search(flat.begin(), flat.end(), not_atom(n.atom)))
                return false_id_;
        }
        if (flat.empty()) return true_id_;
        if (flat.size() == 1) return flat[0];
        return make(Op::And, -1, std::move(flat));
    }

    FormulaId n_or(std::span<const FormulaId> parts) {
        std::vector<FormulaId> flat;
        for (FormulaId p : parts) {
            if (nodes_[p].op == Op::Or) {
                for (FormulaId k : nodes_[p].kids) flat.push_back(k);
            } else if (p == false_id_) {
                continue;
            } else if (p == true_id_) {
                return true_id_;
            } else {
                flat.push_back(p);
            }
        }
        std::sort(flat.begin(), flat.end());
        flat.erase(std::unique(flat.begin(), flat.end()), flat.end());
        for (FormulaId k : flat) {
            if (k == true_id_) return true_id_;
            auto it = neg_.find(k);
            if (it != neg_.end() && std::binary_search(flat.begin(), flat.end(), it->second))
                return true_id_;
            const auto& n = nodes_[k];
            if (n.op == Op::Atom &&
                std::binary_search(flat.begin(), flat.end(), not_atom(n.atom)))
                return true_id_;
        }
        if (flat.empty()) return false_id_;
        if (flat.size() == 1) return flat[0];
        return make(Op::Or, -1, std::move(flat));
    }

    /// Whether the formula holds on the empty remaining suffix (end-of-word
    /// acceptance of a normalized formula).
    bool eta(FormulaId f) const {
        switch (nodes_[f].op) {
            case Op::True:
            case Op::Empty:
            case Op::NotAtom:
            case Op::WeakNext:
            case Op::Release:
            case Op::Always: return true;
            case Op::False:
            case Op::NonEmpty:
            case Op::Atom:
            case Op::Next:
            case Op::Until:
            case Op::Eventually: return false;
            case Op::And: {
                for (FormulaId k : nodes_[f].kids)
                    if (!eta(k)) return false;
                return true;
            }
            case Op::Or: {
                for (FormulaId k : nodes_[f].kids)
                    if (eta(k)) return true;
                return false;
            }
            case Op::Not: throw std::logic_error("eta on non-normalized formula");
        }
        return false;
    }


    FormulaId n_and(std::initializer_list<FormulaId> parts) {
        return n_and(std::span<const FormulaId>(parts.begin(), parts.size()));
    }
    FormulaId n_or(std::initializer_list<FormulaId> parts) {
        return n_or(std::span<const FormulaId>(parts.begin(), parts.size()));
    }

    FormulaId n_next(FormulaId f) {
        if (f == false_id_) return false_id_;
        return make(Op::Next, -1, {f});
    }

    FormulaId n_wnext(FormulaId f) {
        if (f == true_id_) return true_id_;
        return make(Op::WeakNext, -1, {f});
    }

    FormulaId n_until(FormulaId a, FormulaId b) {
        if (b == true_id_ || b == false_id_) return b;
        if (a == false_id_) return b;
        if (a == true_id_) return n_ev(b);
        if (a == b) return b;
        return make(Op::Until, -1, {a, b});
    }

    FormulaId n_release(FormulaId a, FormulaId b) {
        if (b == true_id_ || b == false_id_) return b;
        if (a == true_id_) return b;
        if (a == false_id_) return n_alw(b);
        if (a == b) return b;
        return make(Op::Release, -1, {a, b});
    }

    FormulaId n_ev(FormulaId f) {
        if (f == true_id_ || f == false_id_) return f;
        if (nodes_[f].op == Op::Eventually) return f;
        return make(Op::Eventually, -1, {f});
    }

    FormulaId n_alw(FormulaId f) {
        if (f == true_id_ || f == false_id_) return f;
        if (nodes_[f].op == Op::Always) return f;
        return make(Op::Always, -1, {f});
    }

    /// Negation normal form with flattening and constant folding.
    FormulaId normalize(FormulaId f) {
        if (auto it = norm_.find(f); it != norm_.end()) return it->second;
        const auto n = nodes_[f];  // copy: store may grow below
        FormulaId r;
        switch (n.op) {
            case Op::True:
            case Op::False:
            case Op::NonEmpty:
            case Op::Empty:
            case Op::Atom:
            case Op::NotAtom: r = f; break;
            case Op::Not: r = n_not(normalize(n.kids[0])); break;
            case Op::And: r = n_and({normalize(n.kids[0]), normalize(n.kids[1])}); break;
            case Op::Or: r = n_or({normalize(n.kids[0]), normalize(n.kids[1])}); break;
            case Op::Next: r = n_next(normalize(n.kids[0])); break;
            case Op::WeakNext: r = n_wnext(normalize(n.kids[0])); break;
            case Op::Until: r = n_until(normalize(n.kids[0]), normalize(n.kids[1])); break;
            case Op::Release: r = n_release(normalize(n.kids[0]), normalize(n.kids[1])); break;
            case Op::Eventually: r = n_ev(normalize(n.kids[0])); break;
            case Op::Always: r = n_alw(normalize(n.kids[0])); break;
        }
        norm_.emplace(f, r);
        return r;
    }

    /// Sorted list of atom indices occurring in f.
    std::vector<int> atoms_of(FormulaId f) const {
        std::vector<int> out;
        std::vector<FormulaId> stack{f};
        std::vector<char> seen(nodes_.size(), 0);
        while (!stack.empty()) {
            FormulaId x = stack.back();
            stack.pop_back();
            if (seen[x]) continue;
            seen[x] = 1;
            const auto& n = nodes_[x];
            if (n.op == Op::Atom || n.op == Op::NotAtom) out.push_back(n.atom);
            for (FormulaId k : n.kids) stack.push_back(k);
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    /// Reachable node ids of f in ascending (evaluation) order.
    std::vector<FormulaId> subnodes(FormulaId f) const {
        std::vector<FormulaId> out;
        std::vector<FormulaId> stack{f};
        std::vector<char> seen(nodes_.size(), 0);
        while (!stack.empty()) {
            FormulaId x = stack.back();
            stack.pop_back();
            if (seen[x]) continue;
            seen[x] = 1;
            out.push_back(x);
            for (FormulaId k : nodes_[x].kids) stack.push_back(k);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    std::string to_string(FormulaId f, const AtomTable& atoms) const {
        const auto& n = nodes_[f];
        auto paren = [&](FormulaId k) { return "(" + to_string(k, atoms) + ")"; };
        switch (n.op) {
            case Op::True: return "true";
            case Op::False: return "false";
            case Op::NonEmpty: return "~end";
            case Op::Empty: return "end";
            case Op::Atom: return atoms.name(n.atom);
            case Op::NotAtom: return "!" + atoms.name(n.atom);
            case Op::Not: return "!" + paren(n.kids[0]);
            case Op::And: {
                std::string s;
                for (std::size_t i = 0; i < n.kids.size(); ++i)
                    s += (i ? " & " : "") + paren(n.kids[i]);
                return s;
            }
            case Op::Or: {
                std::string s;
                for (std::size_t i = 0; i < n.kids.size(); ++i)
                    s += (i ? " | " : "") + paren(n.kids[i]);
                return s;
            }
            case Op::Next: return "X " + paren(n.kids[0]);
            case Op::WeakNext: return "N " + paren(n.kids[0]);
            case Op::Until: return paren(n.kids[0]) + " U " + paren(n.kids[1]);
            case Op::Release: return paren(n.kids[0]) + " R " + paren(n.kids[1]);
            case Op::Eventually: return "F " + paren(n.kids[0]);
            case Op::Always: return "G " + paren(n.kids[0]);
        }
        return "?";
    }

private:
    struct Node {
        Op op;
        int atom;
        std::vector<FormulaId> kids;
    };

    struct Key {
        Op op;
        int atom;
        std::vector<FormulaId> kids;
        bool operator==(const Key& o) const {
            return op == o.op && atom == o.atom && kids == o.kids;
        }
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            std::size_t h = static_cast<std::size_t>(k.op) * 1000003u + static_cast<std::size_t>(k.atom + 1);
            for (FormulaId id : k.kids) h = h * 1000003u + static_cast<std::size_t>(id) + 0x9e3779b9u;
            return h;
        }
    };

    FormulaId make(Op op, int atom, std::vector<FormulaId> kids) {
        Key key{op, atom, kids};
        auto it = intern_.find(key);
        if (it != intern_.end()) return it->second;
        FormulaId id = static_cast<FormulaId>(nodes_.size());
        nodes_.push_back(Node{op, atom, std::move(kids)});
        intern_.emplace(std::move(key), id);
        return id;
    }

    std::vector<Node> nodes_;
    std::unordered_map<Key, FormulaId, KeyHash> intern_;
    std::unordered_map<FormulaId, FormulaId> neg_;
    std::unordered_map<FormulaId, FormulaId> norm_;
    FormulaId true_id_, false_id_, nonempty_id_, empty_id_;
};

// ---------------------------------------------------------------------------
// Parser
//
// Grammar (loosest to tightest binding):
//   imp    := or ('->' imp)?
//   or     := and ('|' and)*
//   and    := until ('&' until)*
//   until  := unary (('U' | 'R') until)?
//   unary  := ('!' | 'X' | 'F' | 'G') unary | primary
//   primary:= 'true' | 'false' | ident | '(' imp ')'
// Identifiers are [A-Za-z_][A-Za-z0-9_]*; U R X F G are reserved.
// ---------------------------------------------------------------------------

namespace detail {

class Parser {
public:
    Parser(FormulaStore& store, AtomTable& atoms, std::string_view text)
        : store_(store), atoms_(atoms), text_(text) {}

    FormulaId parse() {
        FormulaId f = parse_imp();
        skip_ws();
        if (pos_ != text_.size()) throw SyntaxError("trailing input", pos_);
        return f;
    }

private:
    FormulaId parse_imp() {
        FormulaId lhs = parse_or();
        skip_ws();
        if (match("->")) {
            FormulaId rhs = parse_imp();
            return store_.f_or(store_.f_not(lhs), rhs);
        }
        return lhs;
    }

    FormulaId parse_or() {
        FormulaId lhs = parse_and();
        while (true) {
            skip_ws();
            if (pos_ < text_.size() && text_[pos_] == '|') {
                ++pos_;
                lhs = store_.f_or(lhs, parse_and());
            } else {
                return lhs;
            }
        }
    }

    FormulaId parse_and() {
        FormulaId lhs = parse_until();
        while (true) {
            skip_ws();
            if (pos_ < text_.size() && text_[pos_] == '&') {
                ++pos_;
                lhs = store_.f_and(lhs, parse_until());
            } else {
                return lhs;
            }
        }
    }

    FormulaId parse_until() {
        FormulaId lhs = parse_unary();
        skip_ws();
        if (match_word("U")) return store_.f_until(lhs, parse_until());
        if (match_word("R")) return store_.f_release(lhs, parse_until());
        return lhs;
    }

    FormulaId parse_unary() {
        skip_ws();
        if (pos_ >= text_.size()) throw SyntaxError("unexpected end of input", pos_);
        if (text_[pos_] == '!') {
            ++pos_;
            return store_.f_not(parse_unary());
        }
        if (match_word("X")) return store_.f_next(parse_unary());
        if (match_word("F")) return store_.f_ev(parse_unary());
        if (match_word("G")) return store_.f_alw(parse_unary());
        return parse_primary();
    }

    FormulaId parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) throw SyntaxError("unexpected end of input", pos_);
        if (text_[pos_] == '(') {
            ++pos_;
            FormulaId f = parse_imp();
            skip_ws();
            if (pos_ >= text_.size() || text_[pos_] != ')') throw SyntaxError("expected ')'", pos_);
            ++pos_;
            return f;
        }
        std::size_t start = pos_;
        std::string id = read_ident();
        if (id.empty()) throw SyntaxError("expected atom or '('", start);
        if (id == "true") return store_.lit_true();
        if (id == "false") return store_.f_not(store_.lit_true());
        if (is_reserved(id)) throw SyntaxError("operator '" + id + "' needs a left operand", start);
        return store_.atom(atoms_.intern(id));
    }

    static bool is_reserved(const std::string& s) {
        return s == "U" || s == "R" || s == "X" || s == "F" || s == "G";
    }

    static bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

    std::string read_ident() {
        std::size_t start = pos_;
        if (pos_ < text_.size() &&
            (std::isalpha(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
            while (pos_ < text_.size() && ident_char(text_[pos_])) ++pos_;
        }
        return std::string(text_.substr(start, pos_ - start));
    }

    bool match(std::string_view tok) {
        skip_ws();
        if (text_.substr(pos_).starts_with(tok)) {
            pos_ += tok.size();
            return true;
        }
        return false;
    }

    // Matches a reserved word not glued to a longer identifier.
    bool match_word(std::string_view tok) {
        skip_ws();
        if (!text_.substr(pos_).starts_with(tok)) return false;
        std::size_t end = pos_ + tok.size();
        if (end < text_.size() && ident_char(text_[end])) return false;
        pos_ = end;
        return true;
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    FormulaStore& store_;
    AtomTable& atoms_;
    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses an LTLf specification string. Unknown identifiers are registered in
/// `atoms` unless the table is sealed.
inline FormulaId parse_spec(FormulaStore& store, AtomTable& atoms, std::string_view text) {
    detail::Parser p(store, atoms, text);
    return p.parse();
}

// ---------------------------------------------------------------------------
// Finite-trace evaluation
// ---------------------------------------------------------------------------

/// Evaluates one formula over many words, reusing buffers. Prefer this over
/// repeated eval_trace calls in exhaustive loops.
class Evaluator {
public:
    Evaluator(const FormulaStore& store, FormulaId f) : store_(store), root_(f) {
        nodes_ = store.subnodes(f);
        slot_.assign(store.size(), -1);
        for (std::size_t i = 0; i < nodes_.size(); ++i) slot_[nodes_[i]] = static_cast<int>(i);
        mask_.resize(nodes_.size());
    }

    /// (w,0) |= f per the inductive finite-trace clauses.
    bool eval(std::span<const Letter> word) {
        const std::size_t n = word.size();
        if (n == 0) throw EmptyTrace();
        if (n <= 64) return eval_masks(word);
        return eval_bytes(word);
    }

private:
    bool eval_masks(std::span<const Letter> word) {
        const int n = static_cast<int>(word.size());
        const std::uint64_t lenmask = (n == 64) ? ~0ULL : ((1ULL << n) - 1);
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const FormulaId id = nodes_[i];
            const Op op = store_.op(id);
            std::uint64_t m = 0;
            switch (op) {
                case Op::True:
                case Op::NonEmpty: m = lenmask; break;
                case Op::False:
                case Op::Empty: m = 0; break;
                case Op::Atom: {
                    const Letter bit = 1u << store_.atom_of(id);
                    for (int t = 0; t < n; ++t)
                        if (word[t] & bit) m |= 1ULL << t;
                    break;
                }
                case Op::NotAtom: {
                    const Letter bit = 1u << store_.atom_of(id);
                    for (int t = 0; t < n; ++t)
                        if (!(word[t] & bit)) m |= 1ULL << t;
                    break;
                }
                case Op::Not: m = lenmask & ~sub(id, 0); break;
                case Op::And: {
                    m = lenmask;
                    for (FormulaId k : store_.kids(id)) m &= mask_[slot_[k]];
                    break;
                }
                case Op::Or: {
                    for (FormulaId k : store_.kids(id)) m |= mask_[slot_[k]];
                    break;
                }
                case Op::Next: m = sub(id, 0) >> 1; break;
                case Op::WeakNext: m = (sub(id, 0) >> 1) | (1ULL << (n - 1)); break;
                case Op::Until: {
                    const std::uint64_t a = sub(id, 0), b = sub(id, 1);
                    std::uint64_t u = 0;
                    for (int t = n - 1; t >= 0; --t) {
                        const std::uint64_t bit = 1ULL << t;
                        if ((b & bit) || ((a & bit) && (u & (bit << 1)))) u |= bit;
                    }
                    m = u;
                    break;
                }
                case Op::Release: {
                    const std::uint64_t a = sub(id, 0), b = sub(id, 1);
                    std::uint64_t r = 0;
                    for (int t = n - 1; t >= 0; --t) {
                        const std::uint64_t bit = 1ULL << t;
                        const bool tail = (t == n - 1) || (r & (bit << 1));
                        if ((b & bit) && ((a & bit) || tail)) r |= bit;
                    }
                    m = r;
                    break;
                }
                case Op::Eventually: {
                    m = sub(id, 0);
                    m |= m >> 1;
                    m |= m >> 2;
                    m |= m >> 4;
                    m |= m >> 8;
                    m |= m >> 16;
                    m |= m >> 32;
                    break;
                }
                case Op::Always: {
                    std::uint64_t bad = lenmask & ~sub(id, 0);
                    bad |= bad >> 1;
                    bad |= bad >> 2;
                    bad |= bad >> 4;
                    bad |= bad >> 8;
                    bad |= bad >> 16;
                    bad |= bad >> 32;
                    m = lenmask & ~bad;
                    break;
                }
            }
            mask_[i] = m;
        }
        return mask_[slot_[root_]] & 1ULL;
    }

    bool eval_bytes(std::span<const Letter> word) {
        const int n = static_cast<int>(word.size());
        bytes_.assign(nodes_.size() * static_cast<std::size_t>(n), 0);
        auto row = [&](int slot) { return bytes_.data() + static_cast<std::size_t>(slot) * n; };
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const FormulaId id = nodes_[i];
            const Op op = store_.op(id);
            char* m = row(static_cast<int>(i));
            switch (op) {
                case Op::True:
                case Op::NonEmpty: std::fill(m, m + n, 1); break;
                case Op::False:
                case Op::Empty: break;
                case Op::Atom: {
                    const Letter bit = 1u << store_.atom_of(id);
                    for (int t = 0; t < n; ++t) m[t] = (word[t] & bit) ? 1 : 0;
                    break;
                }
                case Op::NotAtom: {
                    const Letter bit = 1u << store_.atom_of(id);
                    for (int t = 0; t < n; ++t) m[t] = (word[t] & bit) ? 0 : 1;
                    break;
                }
                case Op::Not: {
                    const char* a = row(slot_[store_.kids(id)[0]]);
                    for (int t = 0; t < n; ++t) m[t] = !a[t];
                    break;
                }
                case Op::And: {
                    std::fill(m, m + n, 1);
                    for (FormulaId k : store_.kids(id)) {
                        const char* a = row(slot_[k]);
                        for (int t = 0; t < n; ++t) m[t] = m[t] && a[t];
                    }
                    break;
                }
                case Op::Or: {
                    for (FormulaId k : store_.kids(id)) {
                        const char* a = row(slot_[k]);
                        for (int t = 0; t < n; ++t) m[t] = m[t] || a[t];
                    }
                    break;
                }
                case Op::Next: {
                    const char* a = row(slot_[store_.kids(id)[0]]);
                    for (int t = 0; t < n - 1; ++t) m[t] = a[t + 1];
                    break;
                }
                case Op::WeakNext: {
                    const char* a = row(slot_[store_.kids(id)[0]]);
                    for (int t = 0; t < n - 1; ++t) m[t] = a[t + 1];
                    m[n - 1] = 1;
                    break;
                }
                case Op::Until: {
                    const char* a = row(slot_[store_.kids(id)[0]]);
                    const char* b = row(slot_[store_.kids(id)[1]]);
                    char tail = 0;
                    for (int t = n - 1; t >= 0; --t) {
                        m[t] = b[t] || (a[t] && tail);
                        tail = m[t];
                    }
                    break;
                }
                case Op::Release: {
                    const char* a = row(slot_[store_.kids(id)[0]]);
                    const char* b = row(slot_[store_.kids(id)[1]]);
                    char tail = 1;
                    for (int t = n - 1; t >= 0; --t) {
                        m[t] = b[t] && (a[t] || tail);
                        tail = m[t];
                    }
                    break;
                }
                case Op::Eventually: {
                    const char* a = row(slot_[store_.kids(id)[0]]);
                    char tail = 0;
                    for (int t = n - 1; t >= 0; --t) {
                        m[t] = a[t] || tail;
                        tail = m[t];
                    }
                    break;
                }
                case Op::Always: {
                    const char* a = row(slot_[store_.kids(id)[0]]);
                    char tail = 1;
                    for (int t = n - 1; t >= 0; --t) {
                        m[t] = a[t] && tail;
                        tail = m[t];
                    }
                    break;
                }
            }
        }
        return bytes_[static_cast<std::size_t>(slot_[root_]) * n];
    }

    std::uint64_t sub(FormulaId id, int kid) const { return mask_[slot_[store_.kids(id)[kid]]]; }

    const FormulaStore& store_;
    FormulaId root_;
    std::vector<FormulaId> nodes_;
    std::vector<int> slot_;
    std::vector<std::uint64_t> mask_;
    std::vector<char> bytes_;
};

/// One-shot wrapper around Evaluator.
inline bool eval_trace(const FormulaStore& store, FormulaId f, std::span<const Letter> word) {
    Evaluator ev(store, f);
    return ev.eval(word);
}

}  // namespace ltlfplan
