#include "rprop/propagate.hpp"

#include <algorithm>
#include <iterator>

#include "rprop/error.hpp"

namespace rprop {

namespace {

template <class T>
std::vector<T> set_union_of(const std::vector<T>& a, const std::vector<T>& b) {
    std::vector<T> out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

}  // namespace

bool Node::contains(Token t) const { return std::binary_search(values.begin(), values.end(), t); }

Node merge(const Node& a, const Node& b) {
    return Node{set_union_of(a.values, b.values), set_union_of(a.indices, b.indices)};
}

bool overlaps(const Node& a, const Node& b) {
    auto i = a.values.begin();
    auto j = b.values.begin();
    while (i != a.values.end() && j != b.values.end()) {
        if (*i < *j) ++i;
        else if (*j < *i) ++j;
        else return true;
    }
    return false;
}

Layer init_layer0(const std::vector<Token>& tokens) {
    if (tokens.empty()) throw Error(ErrorKind::EmptyInput, "no tokens to propagate");
    Layer layer;
    layer.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i)
        layer.push_back(Node{{tokens[i]}, {static_cast<int>(i + 1)}});
    return layer;
}

Layer adjacent_match(const Layer& layer0) {
    Layer next = layer0;
    // position 2k (index 2k-1) takes the node at 2k-1
    for (std::size_t idx = 1; idx < layer0.size(); idx += 2) next[idx] = merge(layer0[idx - 1], layer0[idx]);
    return next;
}

Layer same_token_match(const Layer& previous, bool masked) {
    Layer next = previous;
    for (std::size_t i = 0; i < previous.size(); ++i) {
        const std::size_t end = masked ? i : previous.size();
        for (std::size_t j = 0; j < end; ++j) {
            if (j == i) continue;
            if (overlaps(previous[j], previous[i])) next[i] = merge(next[i], previous[j]);
        }
    }
    return next;
}

LayerTrace propagate(const std::vector<Token>& tokens, int L, bool masked) {
    LayerTrace trace;
    trace.masked = masked;
    trace.n = tokens.size();
    trace.L = L;
    trace.layers.push_back(init_layer0(tokens));
    if (L >= 1) trace.layers.push_back(adjacent_match(trace.layers[0]));
    for (int l = 2; l <= L; ++l) trace.layers.push_back(same_token_match(trace.layers.back(), masked));
    return trace;
}

LayerTrace propagate(const ReasoningTask& task, int L, bool masked) { return propagate(task.tokens(), L, masked); }

InfoQuantity info_quantity(const LayerTrace& trace) {
    InfoQuantity q;
    const auto layers = trace.layers.size();
    for (std::size_t l = 0; l < layers; ++l) {
        std::vector<int> row;
        row.reserve(trace.n);
        for (const auto& node : trace.layers[l]) {
            const int c = static_cast<int>(node.size());
            row.push_back(c);
            for (Token x : node.values) {
                auto& t = q.T[x];
                if (t.size() < layers) t.resize(layers, 0);
                t[l] = std::max(t[l], c);
            }
        }
        q.C.push_back(std::move(row));
    }
    return q;
}

int effective_steps(const LayerTrace& trace, const ReasoningTask& task) {
    const Node& last = trace.layers.back().at(trace.n - 1);
    int steps = 0;
    for (auto k = static_cast<std::size_t>(task.start_pair); k <= task.s(); ++k) {
        const auto& p = task.seq.chain.pair(k);
        if (!last.contains(p.first) || !last.contains(p.second)) break;
        ++steps;
    }
    return steps;
}

bool contiguous_on_chain(const Node& node, const ReasoningChain& chain) {
    std::vector<std::size_t> idx;
    idx.reserve(node.values.size());
    for (Token t : node.values) {
        auto k = chain.walk_index(t);
        if (!k) return false;
        idx.push_back(*k);
    }
    std::sort(idx.begin(), idx.end());
    return idx.empty() || idx.back() - idx.front() + 1 == idx.size();
}

std::vector<std::string> trace_violations(const LayerTrace& trace, const std::vector<Token>& tokens,
                                          const ReasoningChain* chain) {
    std::vector<std::string> out;
    auto where = [](std::size_t l, std::size_t i) {
        return "layer " + std::to_string(l) + " position " + std::to_string(i);
    };
    for (std::size_t l = 0; l < trace.layers.size(); ++l) {
        const auto& layer = trace.layers[l];
        if (layer.size() != tokens.size()) {
            out.push_back("layer " + std::to_string(l) + " has wrong size");
            continue;
        }
        for (std::size_t i = 1; i <= layer.size(); ++i) {
            const Node& node = layer[i - 1];
            std::vector<Token> expected;
            for (int j : node.indices) expected.push_back(tokens.at(j - 1));
            std::sort(expected.begin(), expected.end());
            expected.erase(std::unique(expected.begin(), expected.end()), expected.end());
            if (expected != node.values) out.push_back(where(l, i) + ": values differ from tokens[indices]");
            if (l > 0 && !std::includes(node.indices.begin(), node.indices.end(),
                                        trace.layers[l - 1][i - 1].indices.begin(),
                                        trace.layers[l - 1][i - 1].indices.end()))
                out.push_back(where(l, i) + ": lost information from the previous layer");
            if (chain && !contiguous_on_chain(node, *chain))
                out.push_back(where(l, i) + ": values are not a contiguous chain run");
        }
    }
    return out;
}

}  // namespace rprop
