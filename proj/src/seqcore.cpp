#include "rprop/seqcore.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "rprop/error.hpp"

namespace rprop {

const ReasoningPair& ReasoningChain::pair(std::size_t i) const {
    if (i < 1 || i > pairs_.size())
        throw Error(ErrorKind::IndexOutOfRange, "pair index " + std::to_string(i));
    return pairs_[i - 1];
}

std::vector<Token> ReasoningChain::walk() const {
    std::vector<Token> out;
    out.reserve(pairs_.size() + 1);
    for (const auto& p : pairs_) out.push_back(p.first);
    if (!pairs_.empty()) out.push_back(pairs_.back().second);
    return out;
}

std::optional<std::size_t> ReasoningChain::walk_index(Token t) const {
    for (std::size_t k = 0; k < pairs_.size(); ++k)
        if (pairs_[k].first == t) return k;
    if (!pairs_.empty() && pairs_.back().second == t) return pairs_.size();
    return std::nullopt;
}

ReasoningChain validate_chain(const std::vector<ReasoningPair>& pairs) {
    if (pairs.empty()) throw Error(ErrorKind::EmptyInput, "chain needs at least one pair");
    for (std::size_t k = 0; k < pairs.size(); ++k)
        if (pairs[k].first == pairs[k].second)
            throw Error(ErrorKind::DegeneratePair, "pair " + std::to_string(k + 1));
    for (std::size_t k = 0; k + 1 < pairs.size(); ++k)
        if (pairs[k].second != pairs[k + 1].first)
            throw Error(ErrorKind::BrokenChain,
                        "pairs " + std::to_string(k + 1) + " and " + std::to_string(k + 2));
    ReasoningChain chain;
    chain.pairs_ = pairs;
    auto tokens = chain.walk();
    std::sort(tokens.begin(), tokens.end());
    if (std::adjacent_find(tokens.begin(), tokens.end()) != tokens.end())
        throw Error(ErrorKind::LoopDetected, "token repeats along the chain");
    return chain;
}

Permutation Permutation::from_forward(std::vector<int> forward) {
    const int s = static_cast<int>(forward.size());
    std::vector<int> inv(forward.size(), 0);
    for (int k = 1; k <= s; ++k) {
        int v = forward[k - 1];
        if (v < 1 || v > s || inv[v - 1] != 0)
            throw Error(ErrorKind::IndexOutOfRange, "not a permutation of 1.." + std::to_string(s));
        inv[v - 1] = k;
    }
    Permutation p;
    p.forward_ = std::move(forward);
    p.inverse_ = std::move(inv);
    return p;
}

Permutation Permutation::identity(std::size_t s) {
    std::vector<int> f(s);
    std::iota(f.begin(), f.end(), 1);
    return from_forward(std::move(f));
}

int Permutation::at(int k) const {
    if (k < 1 || k > static_cast<int>(forward_.size()))
        throw Error(ErrorKind::IndexOutOfRange, "sigma(" + std::to_string(k) + ")");
    return forward_[k - 1];
}

int Permutation::inverse(int i) const {
    if (i < 1 || i > static_cast<int>(inverse_.size()))
        throw Error(ErrorKind::IndexOutOfRange, "sigma^-1(" + std::to_string(i) + ")");
    return inverse_[i - 1];
}

ReasoningSequence build_sequence(const ReasoningChain& chain, const Permutation& sigma) {
    if (chain.size() != sigma.size())
        throw Error(ErrorKind::LengthMismatch, "chain has " + std::to_string(chain.size()) +
                                                   " pairs, permutation " + std::to_string(sigma.size()));
    ReasoningSequence seq{{}, chain, sigma};
    seq.tokens.reserve(2 * chain.size());
    for (int k = 1; k <= static_cast<int>(chain.size()); ++k) {
        const auto& p = chain.pair(sigma.at(k));
        seq.tokens.push_back(p.first);
        seq.tokens.push_back(p.second);
    }
    return seq;
}

ReasoningPair recover_pair(const ReasoningSequence& seq, int i) {
    if (i < 1 || i > static_cast<int>(seq.chain.size()))
        throw Error(ErrorKind::IndexOutOfRange, "chain index " + std::to_string(i));
    const int k = seq.sigma.inverse(i);
    return {seq.at(2 * k - 1), seq.at(2 * k)};
}

std::vector<Token> ReasoningTask::tokens() const {
    auto out = seq.tokens;
    out.push_back(start);
    return out;
}

ReasoningTask attach_start(const ReasoningSequence& seq, int m0, int m) {
    if (m0 < 1 || m0 > static_cast<int>(seq.chain.size()))
        throw Error(ErrorKind::StartNotInChain, "start pair " + std::to_string(m0));
    if (m < 1) throw Error(ErrorKind::StepsExceedChain, "steps must be >= 1");
    return ReasoningTask{seq, seq.chain.pair(m0).first, m0, m};
}

ReasoningTask attach_start_token(const ReasoningSequence& seq, Token start, int m) {
    for (std::size_t k = 1; k <= seq.chain.size(); ++k)
        if (seq.chain.pair(k).first == start) return attach_start(seq, static_cast<int>(k), m);
    throw Error(ErrorKind::StartNotInChain, "token " + std::to_string(start.value));
}

Token reasoning_result(const ReasoningTask& task) {
    const int last = task.start_pair + task.steps - 1;
    if (last > static_cast<int>(task.s()))
        throw Error(ErrorKind::StepsExceedChain,
                    std::to_string(task.steps) + " steps from pair " + std::to_string(task.start_pair));
    return task.seq.chain.pair(last).second;
}

Truncation truncate(const ReasoningChain& chain, const Permutation& sigma, int i0, int s) {
    if (chain.size() != sigma.size())
        throw Error(ErrorKind::LengthMismatch, "chain and permutation lengths differ");
    if (s < 1 || i0 < 1 || i0 + s - 1 > static_cast<int>(chain.size()))
        throw Error(ErrorKind::WindowOutOfRange,
                    "window [" + std::to_string(i0) + ", " + std::to_string(i0 + s - 1) + "]");
    const auto seq = build_sequence(chain, sigma);
    Truncation t;
    for (int i = i0; i < i0 + s; ++i) {
        const int k = sigma.inverse(i);
        t.index_set.push_back(2 * k - 1);
        t.index_set.push_back(2 * k);
    }
    std::sort(t.index_set.begin(), t.index_set.end());
    t.first_position = t.index_set.front();
    t.last_position = t.index_set.back();
    t.tokens.assign(seq.tokens.begin() + (t.first_position - 1), seq.tokens.begin() + t.last_position);
    return t;
}

bool pair_allowed(const ReasoningPair& p, Split split) {
    const auto r = ((p.second.value - p.first.value) % 5 + 5) % 5;
    if (split == Split::Train) return r == 0 || r == 1 || r == 4;
    return r == 2 || r == 3;
}

namespace {

std::optional<std::vector<ReasoningPair>> draw_chain(const DatasetSpec& spec, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::int64_t> first(spec.token_lo, spec.token_hi);
    std::vector<Token> used{Token{first(rng)}};
    std::vector<ReasoningPair> pairs;
    std::vector<Token> candidates;
    for (int k = 0; k < spec.s; ++k) {
        candidates.clear();
        for (auto v = spec.token_lo; v <= spec.token_hi; ++v) {
            Token t{v};
            if (std::find(used.begin(), used.end(), t) != used.end()) continue;
            if (pair_allowed({used.back(), t}, spec.split)) candidates.push_back(t);
        }
        if (candidates.empty()) return std::nullopt;
        std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
        Token next = candidates[pick(rng)];
        pairs.push_back({used.back(), next});
        used.push_back(next);
    }
    return pairs;
}

}  // namespace

std::vector<ReasoningTask> gen_dataset(const DatasetSpec& spec) {
    if (spec.s < 1 || spec.count < 1 || spec.token_hi < spec.token_lo)
        throw Error(ErrorKind::Unsatisfiable, "invalid dataset parameters");
    if (spec.token_hi - spec.token_lo + 1 < spec.s + 1)
        throw Error(ErrorKind::Unsatisfiable, "token range too small for " + std::to_string(spec.s) + " steps");
    if (spec.steps && (*spec.steps < 1 || *spec.steps > spec.s))
        throw Error(ErrorKind::Unsatisfiable, "steps outside [1, s]");

    constexpr int kMaxAttempts = 1000;
    std::mt19937_64 rng(spec.seed);
    std::vector<ReasoningTask> out;
    out.reserve(spec.count);
    for (int c = 0; c < spec.count; ++c) {
        std::optional<std::vector<ReasoningPair>> pairs;
        for (int attempt = 0; attempt < kMaxAttempts && !pairs; ++attempt) pairs = draw_chain(spec, rng);
        if (!pairs) throw Error(ErrorKind::Unsatisfiable, "no chain after repeated draws");
        auto chain = validate_chain(*pairs);

        std::vector<int> order(spec.s);
        std::iota(order.begin(), order.end(), 1);
        std::shuffle(order.begin(), order.end(), rng);
        auto seq = build_sequence(chain, Permutation::from_forward(order));

        int m = spec.steps ? *spec.steps : std::uniform_int_distribution<int>(1, spec.s)(rng);
        int m0 = std::uniform_int_distribution<int>(1, spec.s - m + 1)(rng);
        out.push_back(attach_start(seq, m0, m));
    }
    return out;
}

}  // namespace rprop
