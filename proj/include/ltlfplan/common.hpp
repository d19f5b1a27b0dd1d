#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ltlfplan {

using Real = double;
using Vec = std::vector<Real>;

/// Parse failure; `offset` is the byte position in the input string.
struct SyntaxError : std::runtime_error {
    std::size_t offset;
    SyntaxError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset(offset) {}
};

/// An identifier was not found in a sealed atom table.
struct SealedAtomError : std::runtime_error {
    std::string atom;
    explicit SealedAtomError(const std::string& name)
        : std::runtime_error("unknown atom in sealed table: " + name), atom(name) {}
};

struct EmptyTrace : std::runtime_error {
    EmptyTrace() : std::runtime_error("trace must contain at least one letter") {}
};

/// Automaton construction exceeded the configured state cap.
struct StateBlowup : std::runtime_error {
    std::size_t states;
    explicit StateBlowup(std::size_t n)
        : std::runtime_error("DFA construction exceeded state cap (" + std::to_string(n) + " states)"),
          states(n) {}
};

struct IncompleteDfa : std::runtime_error {
    explicit IncompleteDfa(int state)
        : std::runtime_error("no guard matches at DFA state " + std::to_string(state)) {}
};

struct NotStochastic : std::runtime_error {
    std::string row;
    NotStochastic(const std::string& row, Real sum)
        : std::runtime_error("row " + row + " sums to " + std::to_string(sum)), row(row) {}
};

struct NegativeConstraintReward : std::runtime_error {
    NegativeConstraintReward(int state, int action)
        : std::runtime_error("constraint reward is negative at (s=" + std::to_string(state) +
                             ", u=" + std::to_string(action) + ") under a geometric horizon") {}
};

struct NonTermination : std::runtime_error {
    explicit NonTermination(std::size_t cap)
        : std::runtime_error("goal run exceeded step cap " + std::to_string(cap)) {}
};

struct AtomMismatch : std::runtime_error {
    explicit AtomMismatch(const std::string& what) : std::runtime_error(what) {}
};

/// Enumeration (history tree, product, coordinator) exceeded a node cap.
struct BlowUp : std::runtime_error {
    explicit BlowUp(const std::string& what) : std::runtime_error(what) {}
};

struct WrongHorizon : std::runtime_error {
    explicit WrongHorizon(const std::string& what) : std::runtime_error(what) {}
};

struct NonNegativeReward : std::runtime_error {
    NonNegativeReward(int state, int action)
        : std::runtime_error("goal model requires strictly negative rewards off-goal, found >= 0 at (s=" +
                             std::to_string(state) + ", u=" + std::to_string(action) + ")") {}
};

struct SchemaError : std::runtime_error {
    explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

struct IterationBudget : std::runtime_error {
    explicit IterationBudget(const std::string& what) : std::runtime_error(what) {}
};

/// splitmix64-seeded xoshiro256** stream.
///
/// Distribution sampling is hand-rolled so that seeded runs reproduce across
/// standard libraries (std::uniform_*_distribution is not pinned by the standard).
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t z = seed;
        for (auto& word : state_) {
            z += 0x9e3779b97f4a7c15ULL;
            std::uint64_t x = z;
            x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
            x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
            word = x ^ (x >> 31);
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    Real next_real() { return static_cast<Real>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    int next_int(int n) { return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }

    bool next_bernoulli(Real p) { return next_real() < p; }

    /// Samples an index from sparse (index, weight) entries; weights must sum to ~1.
    template <typename Entries>
    int sample_sparse(const Entries& entries) {
        Real u = next_real();
        Real acc = 0;
        int last = -1;
        for (const auto& [idx, w] : entries) {
            acc += w;
            last = idx;
            if (u < acc) return idx;
        }
        return last;  // guard against accumulated rounding
    }

    /// Samples an index from a dense weight vector summing to ~1.
    int sample_dense(std::span<const Real> weights) {
        Real u = next_real();
        Real acc = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return static_cast<int>(i);
        }
        for (std::size_t i = weights.size(); i-- > 0;)
            if (weights[i] > 0) return static_cast<int>(i);
        return 0;
    }

    /// Independent substream for parallel rollouts.
    Rng fork(std::uint64_t stream) const {
        Rng r(state_[0] ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
        return r;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t state_[4];
};

}  // namespace ltlfplan
