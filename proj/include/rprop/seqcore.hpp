#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <vector>

namespace rprop {

struct Token {
    std::int64_t value = 0;
    auto operator<=>(const Token&) const = default;
};

struct ReasoningPair {
    Token first;
    Token second;
    bool operator==(const ReasoningPair&) const = default;
};

// All indices below are 1-based: pair(1) is the first pair, position 1 is the
// first token of a sequence.
class ReasoningChain {
public:
    std::size_t size() const { return pairs_.size(); }
    const ReasoningPair& pair(std::size_t i) const;
    const std::vector<ReasoningPair>& pairs() const { return pairs_; }

    // s+1 endpoint tokens in walk order: a^1_1, a^1_2, ..., a^1_s, a^2_s.
    std::vector<Token> walk() const;
    // 0-based index of a token in walk(), if the token belongs to the chain.
    std::optional<std::size_t> walk_index(Token t) const;

    bool operator==(const ReasoningChain&) const = default;

private:
    friend ReasoningChain validate_chain(const std::vector<ReasoningPair>& pairs);
    std::vector<ReasoningPair> pairs_;
};

ReasoningChain validate_chain(const std::vector<ReasoningPair>& pairs);

class Permutation {
public:
    // forward[k-1] = sigma(k), values in 1..s.
    static Permutation from_forward(std::vector<int> forward);
    static Permutation identity(std::size_t s);

    std::size_t size() const { return forward_.size(); }
    int at(int k) const;       // sigma(k)
    int inverse(int i) const;  // sigma^-1(i)
    const std::vector<int>& forward() const { return forward_; }

    bool operator==(const Permutation&) const = default;

private:
    std::vector<int> forward_;
    std::vector<int> inverse_;
};

struct ReasoningSequence {
    std::vector<Token> tokens;  // length 2s
    ReasoningChain chain;
    Permutation sigma;

    Token at(std::size_t position) const { return tokens.at(position - 1); }
};

ReasoningSequence build_sequence(const ReasoningChain& chain, const Permutation& sigma);
ReasoningPair recover_pair(const ReasoningSequence& seq, int i);

struct ReasoningTask {
    ReasoningSequence seq;
    Token start;
    int start_pair = 1;  // m0
    int steps = 1;       // m

    std::size_t s() const { return seq.chain.size(); }
    std::size_t n() const { return 2 * s() + 1; }
    // The 2s sequence tokens followed by the start token.
    std::vector<Token> tokens() const;
};

ReasoningTask attach_start(const ReasoningSequence& seq, int m0, int m);
// Locates the pair whose first token is `start`.
ReasoningTask attach_start_token(const ReasoningSequence& seq, Token start, int m);
Token reasoning_result(const ReasoningTask& task);

struct Truncation {
    std::vector<Token> tokens;
    int first_position = 0;  // min of the window's index set
    int last_position = 0;   // max of the window's index set
    std::vector<int> index_set;
};

Truncation truncate(const ReasoningChain& chain, const Permutation& sigma, int i0, int s);

enum class Split { Train, Test };

struct DatasetSpec {
    int s = 3;
    int count = 1;
    std::uint64_t seed = 0;
    Split split = Split::Train;
    std::int64_t token_lo = 20;
    std::int64_t token_hi = 100;
    // Fixed step count; when empty each task draws m uniformly from [1, s].
    std::optional<int> steps;
};

bool pair_allowed(const ReasoningPair& p, Split split);
std::vector<ReasoningTask> gen_dataset(const DatasetSpec& spec);

}  // namespace rprop
