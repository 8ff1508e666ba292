#include <doctest.h>

#include <algorithm>
#include <map>

#include "rprop/error.hpp"
#include "rprop/propagate.hpp"
#include "support.hpp"

using namespace rprop;
using namespace testsupport;

namespace {

std::vector<Token> values_at(const LayerTrace& t, int l, std::size_t i) { return t.node(l, i).values; }

// Independent engine: every node is a closed interval of chain-walk indices
// plus a position bitmap.
struct IntervalNode {
    std::size_t lo, hi;
    std::vector<bool> positions;
};

std::vector<std::vector<IntervalNode>> interval_oracle(const ReasoningTask& task, int L, bool masked) {
    const auto tokens = task.tokens();
    const auto n = tokens.size();
    std::vector<std::vector<IntervalNode>> layers(1);
    for (std::size_t i = 0; i < n; ++i) {
        auto k = *task.seq.chain.walk_index(tokens[i]);
        IntervalNode node{k, k, std::vector<bool>(n, false)};
        node.positions[i] = true;
        layers[0].push_back(node);
    }
    auto hull = [n](IntervalNode a, const IntervalNode& b) {
        a.lo = std::min(a.lo, b.lo);
        a.hi = std::max(a.hi, b.hi);
        for (std::size_t p = 0; p < n; ++p) a.positions[p] = a.positions[p] || b.positions[p];
        return a;
    };
    if (L >= 1) {
        auto next = layers[0];
        for (std::size_t i = 1; i < n; i += 2) next[i] = hull(layers[0][i], layers[0][i - 1]);
        layers.push_back(next);
    }
    for (int l = 2; l <= L; ++l) {
        const auto& old = layers.back();
        auto next = old;
        bool changed = true;
        while (changed) {
            changed = false;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    if (masked && j >= i) continue;
                    const bool meet = old[j].lo <= old[i].hi && old[i].lo <= old[j].hi;
                    if (!meet) continue;
                    auto merged = hull(next[i], old[j]);
                    if (merged.lo != next[i].lo || merged.hi != next[i].hi || merged.positions != next[i].positions) {
                        next[i] = merged;
                        changed = true;
                    }
                }
        }
        layers.push_back(next);
    }
    return layers;
}

}  // namespace

TEST_CASE("init_layer0") {
    auto layer = init_layer0(toks({1, 2, 2, 3}));
    REQUIRE(layer.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(layer[i].values.size() == 1);
        CHECK(layer[i].indices == std::vector<int>{static_cast<int>(i + 1)});
    }
    auto one = init_layer0(toks({4}));
    CHECK(one[0].values == toks({4}));
    CHECK(init_layer0(toks({1, 2, 6, 3, 2, 4, 3, 5, 4, 6, 4})).size() == 11);
    CHECK_THROWS_AS(init_layer0({}), Error);
}

TEST_CASE("adjacent matching") {
    auto l1 = adjacent_match(init_layer0(toks({1, 2, 2, 3, 3, 4, 4, 5, 1})));
    CHECK(l1[1].values == toks({1, 2}));
    CHECK(l1[3].values == toks({2, 3}));
    CHECK(l1[5].values == toks({3, 4}));
    CHECK(l1[7].values == toks({4, 5}));
    CHECK(l1[8].values == toks({1}));
    CHECK(l1[2].values == toks({2}));
    for (std::size_t i = 1; i < 8; i += 2) CHECK(l1[i].size() == 2);
    auto single = adjacent_match(init_layer0(toks({9})));
    CHECK(single[0].values == toks({9}));
}

TEST_CASE("same-token matching") {
    auto t = propagate(toks({1, 2, 2, 3, 3, 4, 4, 5, 1}), 3, true);
    CHECK(values_at(t, 2, 9) == toks({1, 2}));
    CHECK(values_at(t, 3, 9) == toks({1, 2, 3, 4}));
    CHECK(info_quantity(t).at(3, 9) == 4);

    auto r = propagate(toks({0, 1, 1, 2, 1}), 2, true);
    CHECK(values_at(r, 2, 5) == toks({0, 1, 2}));
    CHECK(info_quantity(r).at(2, 5) == 3);
}

TEST_CASE("only the residual acts at the start for L = 1") {
    std::mt19937_64 rng(1);
    for (int k = 0; k < 20; ++k) {
        auto task = random_task(1 + k % 6, rng);
        CHECK(info_quantity(propagate(task, 1, true)).at(1, task.n()) == 1);
    }
}

TEST_CASE("unmasked sorted sequence reaches four tokens at layer 2") {
    std::vector<Token> x;
    for (int i = 1; i <= 24; ++i) x.push_back(Token{i / 2});
    auto t = propagate(x, 2, false);
    for (int i = 3; i <= 10; ++i) CHECK(values_at(t, 2, 2 * i) == toks({i - 2, i - 1, i, i + 1}));
}

TEST_CASE("info_quantity") {
    auto t = propagate(toks({1, 2, 2, 3, 3, 4, 4, 5, 1}), 3, true);
    auto q = info_quantity(t);
    for (int c : q.C[0]) CHECK(c == 1);
    for (std::size_t i = 2; i <= 8; i += 2) CHECK(q.at(1, i) == 2);
    CHECK(q.at(3, 9) == 4);
    CHECK(q.T.at(Token{1})[3] == 5);
    CHECK(q.T.at(Token{5})[1] == 2);
    for (const auto& [tok, per_layer] : q.T) {
        int brute = 0;
        for (std::size_t i = 1; i <= t.n; ++i)
            if (t.node(3, i).contains(tok)) brute = std::max(brute, static_cast<int>(t.node(3, i).size()));
        CHECK(per_layer[3] == brute);
    }
}

TEST_CASE("effective steps") {
    auto small = attach_start_token(build_sequence(chain_of({{0, 1}, {1, 2}}), Permutation::identity(2)), Token{1}, 1);
    CHECK(effective_steps(propagate(small, 2, true), small) == 1);

    auto sorted = attach_start(build_sequence(chain_of({{1, 2}, {2, 3}, {3, 4}, {4, 5}}), Permutation::identity(4)), 1, 1);
    auto t = propagate(sorted, 3, true);
    CHECK(values_at(t, 3, 9) == toks({1, 2, 3, 4}));
    CHECK(effective_steps(t, sorted) == 3);
    CHECK(effective_steps(propagate(sorted, 1, true), sorted) == 0);
}

TEST_CASE("property: trace invariants on random tasks") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 300; ++trial) {
        const int s = 1 + static_cast<int>(rng() % 10);
        const int L = 1 + static_cast<int>(rng() % 4);
        auto task = random_task(s, rng);
        for (bool masked : {true, false}) {
            auto t = propagate(task, L, masked);
            auto bad = trace_violations(t, task.tokens(), &task.seq.chain);
            CHECK_MESSAGE(bad.empty(), (bad.empty() ? "" : bad.front()));
            for (int l = 1; l <= L; ++l)
                for (std::size_t i = 1; i <= t.n; ++i) CHECK(t.node(l, i).size() >= t.node(l - 1, i).size());
        }
    }
}

TEST_CASE("property: the mask only removes information") {
    std::mt19937_64 rng(78);
    for (int trial = 0; trial < 200; ++trial) {
        const int s = 1 + static_cast<int>(rng() % 10);
        auto task = random_task(s, rng);
        auto a = propagate(task, 4, true);
        auto b = propagate(task, 4, false);
        for (int l = 0; l <= 4; ++l)
            for (std::size_t i = 1; i <= a.n; ++i) {
                const auto& m = a.node(l, i).values;
                const auto& u = b.node(l, i).values;
                CHECK(std::includes(u.begin(), u.end(), m.begin(), m.end()));
            }
    }
}

TEST_CASE("property: layers are computed from a frozen snapshot") {
    std::mt19937_64 rng(79);
    for (int trial = 0; trial < 100; ++trial) {
        auto task = random_task(2 + static_cast<int>(rng() % 8), rng);
        for (bool masked : {true, false}) {
            auto t = propagate(task, 4, masked);
            for (int l = 2; l <= 4; ++l) {
                const Layer copy = t.layers[l - 1];
                CHECK(same_token_match(copy, masked) == t.layers[l]);
            }
        }
    }
}

TEST_CASE("property: interval oracle reproduces every trace for s <= 5, L <= 3") {
    std::mt19937_64 rng(80);
    int compared = 0;
    for (int s = 1; s <= 5; ++s)
        for (int trial = 0; trial < 60; ++trial) {
            auto task = random_task(s, rng);
            const int L = 1 + trial % 3;
            for (bool masked : {true, false}) {
                auto t = propagate(task, L, masked);
                auto oracle = interval_oracle(task, L, masked);
                const auto walk = task.seq.chain.walk();
                for (int l = 0; l <= L; ++l)
                    for (std::size_t i = 1; i <= t.n; ++i) {
                        const auto& o = oracle[l][i - 1];
                        std::vector<Token> vals(walk.begin() + o.lo, walk.begin() + o.hi + 1);
                        std::sort(vals.begin(), vals.end());
                        std::vector<int> idx;
                        for (std::size_t p = 0; p < t.n; ++p)
                            if (o.positions[p]) idx.push_back(static_cast<int>(p + 1));
                        CHECK(t.node(l, i).values == vals);
                        CHECK(t.node(l, i).indices == idx);
                        ++compared;
                    }
            }
        }
    CHECK(compared > 1000);
}
