#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "rprop/seqcore.hpp"

namespace rprop {

struct LayerBound {
    int layer = 0;
    std::int64_t measured = 0;        // quantity checked against the lower bound
    std::int64_t measured_upper = 0;  // quantity checked against the upper bound
    std::int64_t lower = 0;
    std::int64_t upper = 0;
    bool checked = false;  // inside the validity range
    bool pass = true;
    bool attains_lower = false;
    bool attains_upper = false;
};

struct BoundReport {
    std::vector<LayerBound> layers;  // l = 1..L
    int valid_up_to = 0;             // largest layer carrying a verdict
    std::optional<Token> probe;

    bool pass() const;
    bool upper_attained() const;  // every checked layer hits the upper bound
};

enum class WitnessKind { Lower, FractalUpper };

ReasoningTask witness_lower(int s);

// Fractal ordering of pair indices, length 3^(k-1).
std::vector<std::int64_t> s_k(int k, std::int64_t i);

// Chain indices m (pair (m, m+1)) in sequence order for the fractal witness.
std::vector<std::int64_t> fractal_layout(int ltilde);
ReasoningTask witness_fractal(int ltilde);

// Largest l with 2^(l-1) <= s.
int validity_limit(std::size_t s);

BoundReport verify_theorem_finite(const ReasoningTask& task, int L);
BoundReport verify_theorem_infinite(const ReasoningChain& window, const Permutation& sigma, int L, Token probe);

struct BruteResult {
    int max_c = 0;
    Permutation sigma;
    int start_pair = 1;
    int max_effective_steps = 0;
    std::uint64_t tasks_examined = 0;
};

BruteResult brute_force_max(int s, int L, unsigned jobs = 1);

// Guaranteed and maximal step counts for L layers.
std::pair<std::int64_t, std::int64_t> corollary_envelope(int L);
// Step count at which partial failure is first reported empirically (2^(L-1)).
std::int64_t partial_failure_onset(int L);

}  // namespace rprop
