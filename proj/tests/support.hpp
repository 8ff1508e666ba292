#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "rprop/seqcore.hpp"

namespace testsupport {

using rprop::Token;

inline std::vector<Token> toks(std::initializer_list<std::int64_t> v) {
    std::vector<Token> out;
    for (auto x : v) out.push_back(Token{x});
    return out;
}

inline std::vector<rprop::ReasoningPair> pairs_of(std::initializer_list<std::pair<std::int64_t, std::int64_t>> v) {
    std::vector<rprop::ReasoningPair> out;
    for (auto [a, b] : v) out.push_back({Token{a}, Token{b}});
    return out;
}

inline rprop::ReasoningChain chain_of(std::initializer_list<std::pair<std::int64_t, std::int64_t>> v) {
    return rprop::validate_chain(pairs_of(v));
}

// Chain over s+1 distinct tokens drawn from [lo, lo+spread).
inline rprop::ReasoningChain random_chain(int s, std::mt19937_64& rng, std::int64_t lo = 1, std::int64_t spread = 100) {
    std::vector<std::int64_t> pool(static_cast<std::size_t>(spread));
    std::iota(pool.begin(), pool.end(), lo);
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<rprop::ReasoningPair> pairs;
    for (int k = 0; k < s; ++k) pairs.push_back({Token{pool[k]}, Token{pool[k + 1]}});
    return rprop::validate_chain(pairs);
}

inline rprop::Permutation random_perm(int s, std::mt19937_64& rng) {
    std::vector<int> f(static_cast<std::size_t>(s));
    std::iota(f.begin(), f.end(), 1);
    std::shuffle(f.begin(), f.end(), rng);
    return rprop::Permutation::from_forward(f);
}

inline rprop::ReasoningTask random_task(int s, std::mt19937_64& rng, int m = 1) {
    auto seq = rprop::build_sequence(random_chain(s, rng), random_perm(s, rng));
    std::uniform_int_distribution<int> start(1, s - m + 1);
    return rprop::attach_start(seq, start(rng), m);
}

}  // namespace testsupport
