#pragma once

#include <map>
#include <string>
#include <vector>

#include "rprop/seqcore.hpp"

namespace rprop {

// Value and index sets are kept sorted and duplicate free.
struct Node {
    std::vector<Token> values;
    std::vector<int> indices;  // 1-based positions

    std::size_t size() const { return values.size(); }
    bool contains(Token t) const;
    bool operator==(const Node&) const = default;
};

using Layer = std::vector<Node>;  // Layer[i-1] is the node at position i

struct LayerTrace {
    std::vector<Layer> layers;  // 0..L
    bool masked = true;
    std::size_t n = 0;
    int L = 0;

    const Node& node(int l, std::size_t i) const { return layers.at(l).at(i - 1); }
};

struct InfoQuantity {
    std::vector<std::vector<int>> C;       // C[l][i-1]
    std::map<Token, std::vector<int>> T;   // T[x][l]

    int at(int l, std::size_t i) const { return C.at(l).at(i - 1); }
};

Node merge(const Node& a, const Node& b);
bool overlaps(const Node& a, const Node& b);

Layer init_layer0(const std::vector<Token>& tokens);
Layer adjacent_match(const Layer& layer0);
Layer same_token_match(const Layer& previous, bool masked);

LayerTrace propagate(const std::vector<Token>& tokens, int L, bool masked);
LayerTrace propagate(const ReasoningTask& task, int L, bool masked);

InfoQuantity info_quantity(const LayerTrace& trace);
int effective_steps(const LayerTrace& trace, const ReasoningTask& task);

// True when the node's values occupy a contiguous run of the chain walk.
bool contiguous_on_chain(const Node& node, const ReasoningChain& chain);

// Checks value/index coupling, monotonicity and (when a chain is given)
// contiguity; returns one message per violation.
std::vector<std::string> trace_violations(const LayerTrace& trace, const std::vector<Token>& tokens,
                                          const ReasoningChain* chain = nullptr);

}  // namespace rprop
