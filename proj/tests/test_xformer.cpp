#include <doctest.h>

#include <cmath>
#include <random>

#include "rprop/error.hpp"
#include "rprop/intmath.hpp"
#include "rprop/propagate.hpp"
#include "rprop/xformer.hpp"
#include "support.hpp"

using namespace rprop;
using namespace rprop::xf;
using namespace testsupport;

namespace {

ErrorKind kind_of(const auto& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error raised");
    return ErrorKind::ParseError;
}

ReasoningTask example3() {
    auto seq = build_sequence(chain_of({{1, 2}, {2, 4}, {4, 6}, {6, 3}, {3, 5}}),
                              Permutation::from_forward({1, 4, 2, 5, 3}));
    return attach_start_token(seq, Token{4}, 1);
}

ReasoningTask sorted_task(int s, int m0, int m) {
    std::vector<ReasoningPair> p;
    for (int k = 1; k <= s; ++k) p.push_back({Token{10 + k}, Token{11 + k}});
    return attach_start(build_sequence(validate_chain(p), Permutation::identity(s)), m0, m);
}

using Dense = std::vector<DenseRow>;

Dense identity(Coord d) {
    Dense m(d, DenseRow(d, 0.0));
    for (Coord k = 0; k < d; ++k) m[k][k] = 1.0;
    return m;
}

Dense multiply(const Dense& a, const Dense& b) {
    const auto d = a.size();
    Dense out(d, DenseRow(d, 0.0));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t k = 0; k < d; ++k)
            if (a[i][k] != 0.0)
                for (std::size_t j = 0; j < d; ++j) out[i][j] += a[i][k] * b[k][j];
    return out;
}

double bilinear(const DenseRow& x, const Dense& K, const DenseRow& y) {
    double s = 0.0;
    for (std::size_t a = 0; a < x.size(); ++a)
        if (x[a] != 0.0)
            for (std::size_t b = 0; b < y.size(); ++b) s += x[a] * K[a][b] * y[b];
    return s;
}

}  // namespace

TEST_CASE("embedding width") {
    auto small = build_embedding(3, 1, toks({5}));
    CHECK(required_spacing(3, 1) == 32);
    CHECK(small.d_m == 67);
    CHECK(small.slots == std::vector<Coord>{35});

    auto mid = build_embedding(5, 2, toks({4, 1, 3, 2}));
    CHECK(required_spacing(5, 2) == 120);
    CHECK(mid.d_m == 605);
    CHECK(mid.vocab == toks({1, 2, 3, 4}));
    CHECK(mid.slots.front() - 5 == 120);
    CHECK(mid.d_m - mid.slots.back() == 120);

    auto broken = mid;
    broken.slots[2] -= 1;
    CHECK(kind_of([&] { validate_scheme(broken); }) == ErrorKind::InvalidScheme);
    auto narrow = mid;
    narrow.d_m -= 1;
    CHECK(kind_of([&] { validate_scheme(narrow); }) == ErrorKind::InvalidScheme);

    CHECK(kind_of([] { build_embedding(4, 1, toks({1})); }) == ErrorKind::InvalidScheme);
    CHECK(kind_of([] { build_embedding(3, 1, toks({1, 1})); }) == ErrorKind::InvalidScheme);
    CHECK(kind_of([] { build_embedding(17, 8, toks({1, 2, 3, 4, 5, 6, 7, 8, 9})); }) == ErrorKind::SchemeTooLarge);
    CHECK(build_embedding(17, 8, toks({1, 2, 3, 4, 5, 6, 7, 8, 9}), 10'000'000).d_m == 17 + 10 * 2 * 18 * 6562);
}

TEST_CASE("shift examples") {
    CHECK(shift_apply(DenseRow{1, 2, 3, 4}, 1) == DenseRow{2, 3, 4, 1});
    CHECK(shift_apply(DenseRow{1, 2, 3, 4}, -1) == DenseRow{4, 1, 2, 3});
    CHECK(shift_apply(DenseRow{1, 2, 3, 4}, 0) == DenseRow{1, 2, 3, 4});
    CHECK(shift_apply(DenseRow{1, 2, 3, 4}, 9) == DenseRow{2, 3, 4, 1});
    CHECK(shift_apply(SparseRow{{5, 1.0}}, 2, 10) == SparseRow{{3, 1.0}});
    CHECK(shift_apply(SparseRow{{5, 1.0}}, 6, 10) == SparseRow{{9, 1.0}});
    CHECK(shift_apply(SparseRow{{1, 1.0}}, -1, 10) == SparseRow{{2, 1.0}});
}

TEST_CASE("property: shift algebra") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    std::uniform_int_distribution<int> amount(-40, 40);
    for (int trial = 0; trial < 500; ++trial) {
        const Coord d = 1 + trial % 23;
        DenseRow v(d);
        SparseRow sv;
        for (Coord c = 0; c < d; ++c) {
            v[c] = val(rng);
            if (trial % 2 == 0) sv[c + 1] = v[c];
        }
        const int a = amount(rng), b = amount(rng);
        CHECK(shift_apply(shift_apply(v, a), b) == shift_apply(v, a + b));
        CHECK(shift_apply(shift_apply(v, a), -a) == v);
        if (trial % 2 == 0) {
            CHECK(to_dense(shift_apply(sv, a, d), d) == shift_apply(v, a));
            CHECK(shift_apply(shift_apply(sv, a, d), b, d) == shift_apply(sv, a + b, d));
        }
    }
}

TEST_CASE("band key equals the explicit sum of shift powers") {
    auto task = sorted_task(2, 1, 1);
    auto scheme = scheme_for(task, 2);
    REQUIRE(scheme.d_m == 485);
    const auto d = scheme.d_m;
    const auto w = build_weights(scheme);
    CHECK(w.layers[0].key == KeyKind::PositionalAdjacent);
    CHECK(w.layers[0].value_shift == 1);
    CHECK(w.layers[1].band_lo == -static_cast<std::int64_t>(6 * 9));
    CHECK(w.layers[1].band_hi == -1);

    // R e_c = e_{c-1}; the key pairs a query coordinate with keys t = 1..(n+1)3^L above it
    Dense R(d, DenseRow(d, 0.0));
    for (Coord c = 1; c <= d; ++c) R[scheme.wrap(c - 1) - 1][c - 1] = 1.0;
    Dense Rt = identity(d);
    Dense sum(d, DenseRow(d, 0.0));
    Dense Rinv(d, DenseRow(d, 0.0));
    for (Coord a = 0; a < d; ++a)
        for (Coord b = 0; b < d; ++b) Rinv[a][b] = R[b][a];
    for (std::int64_t t = 1; t <= 6 * 9; ++t) {
        Rt = multiply(Rt, Rinv);
        for (Coord a = 0; a < d; ++a)
            for (Coord b = 0; b < d; ++b) sum[a][b] += Rt[b][a];
    }
    for (Coord a = 1; a <= d; ++a)
        if (!scheme.first_position_band(a)) sum[a - 1][a - 1] += 1.0;
    CHECK(dense_key_matrix(w, 1, scheme) == sum);

    const auto state = run(task, scheme);
    const auto K = dense_key_matrix(w, 1, scheme);
    for (std::size_t i = 0; i < task.n(); ++i)
        for (std::size_t j = 0; j <= i; ++j)
            CHECK(state.A[1][i][j] ==
                  doctest::Approx(bilinear(to_dense(state.X[1][i], d), K, to_dense(state.X[1][j], d))));

    const auto K0 = dense_key_matrix(w, 0, scheme);
    for (std::size_t i = 0; i < task.n(); ++i)
        for (std::size_t j = 0; j <= i; ++j)
            CHECK(state.A[0][i][j] ==
                  doctest::Approx(bilinear(to_dense(state.X[0][i], d), K0, to_dense(state.X[0][j], d))));
}

TEST_CASE("layer-0 scores match adjacent pairs") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        auto task = random_task(1 + trial % 5, rng);
        auto state = run(task, scheme_for(task, 2));
        const auto& A = state.A[0];
        for (std::size_t i = 1; i <= task.n(); ++i)
            for (std::size_t j = 1; j <= task.n(); ++j) {
                if (j > i) CHECK(std::isinf(A[i - 1][j - 1]));
                else CHECK(A[i - 1][j - 1] == (i % 2 == 0 && j + 1 == i ? 1.0 : 0.0));
            }
    }
}

TEST_CASE("first column is silent and the self term only touches the diagonal") {
    auto task = example3();
    auto scheme = scheme_for(task, 3);
    auto state = run(task, scheme);
    for (std::size_t l = 1; l < state.A.size(); ++l)
        for (std::size_t i = 0; i < task.n(); ++i) CHECK(state.A[l][i][0] == 0.0);

    auto plain = scheme;
    plain.self_match = false;
    const auto w = build_weights(plain);
    const auto A = attention_scores(state.X[1], 1, plain, w);
    for (std::size_t i = 0; i < task.n(); ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            if (i == j) CHECK(A[i][j] == 0.0);
            else CHECK(A[i][j] == state.A[1][i][j]);
        }
    CHECK(attention_violations(state, propagate(task, 3, true)).empty());
}

TEST_CASE("idealized ffn") {
    auto task = example3();
    auto scheme = scheme_for(task, 2);
    auto state = run(task, scheme);
    const auto B = scheme.block();

    // even position at layer 0 holds its pair at exponents iB-1, iB
    for (std::size_t i = 2; i <= task.n(); i += 2) {
        auto out = idealized_ffn(state.AO[0][i - 1], i, 0, scheme);
        const auto a = task.tokens()[i - 2], b = task.tokens()[i - 1];
        CHECK(out.node.values == std::vector<Token>{a, b});
        CHECK(out.node.alignment == 2);
        SparseRow want{{scheme.wrap(scheme.slot_of(a) - (static_cast<Coord>(i) * B - 1)), 1.0},
                       {scheme.wrap(scheme.slot_of(b) - static_cast<Coord>(i) * B), 1.0}};
        CHECK(out.row == want);
    }
    // position 1 keeps the fixed first-position encoding at every layer
    for (int l = 0; l < 2; ++l) {
        auto out = idealized_ffn(state.AO[l][0], 1, l, scheme);
        CHECK(out.row == SparseRow{{scheme.wrap(scheme.slot_of(Token{1}) - 12 * B), 1.0}});
    }
    // odd positions after layer 0 hold only their own token
    auto odd = idealized_ffn(state.AO[0][2], 3, 0, scheme);
    CHECK(odd.node.values == toks({6}));
}

TEST_CASE("merge segments") {
    CHECK(merge_segments(toks({1, 2, 3}), toks({2, 3})) == toks({1, 2, 3}));
    CHECK(merge_segments(toks({2}), toks({1, 2, 3})) == toks({1, 2, 3}));
    CHECK(merge_segments(toks({1, 2}), toks({2, 3})) == toks({1, 2, 3}));
    CHECK(merge_segments(toks({2, 3, 4}), toks({1, 2, 3})) == toks({1, 2, 3, 4}));
    CHECK(merge_segments(toks({}), toks({7})) == toks({7}));
    CHECK(kind_of([] { merge_segments(toks({1, 2}), toks({4, 5})); }) == ErrorKind::DecodeAmbiguity);
}

TEST_CASE("property: encode and decode are inverse") {
    auto scheme = build_embedding(9, 2, toks({1, 2, 3, 4, 5, 6, 7, 8, 9}));
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 400; ++trial) {
        const std::size_t len = 1 + rng() % 9;
        const std::size_t first = 1 + rng() % (10 - len);
        std::vector<Token> values;
        for (std::size_t k = 0; k < len; ++k) values.push_back(Token{static_cast<std::int64_t>(first + k)});
        const int align = 1 + static_cast<int>(rng() % len);
        if (std::abs(static_cast<int>(len) - align) > 4 || align - 1 > 4) continue;
        const std::size_t pos = 2 + rng() % 8;
        auto node = decode_row(encode_node(values, align, pos, scheme), pos, 1, scheme);
        CHECK(node == DecodedNode{pos, values, align});
    }
    auto single = decode_row(encode_node(toks({4}), 1, 1, scheme), 1, 1, scheme);
    CHECK(single.values == toks({4}));
}

TEST_CASE("layer norm") {
    for (double beta : {0.0, 0.5, -2.0}) {
        auto out = layer_norm(DenseRow(7, 3.25), 1.7, beta);
        for (double v : out) CHECK(v == doctest::Approx(beta));
    }
    DenseRow x{1.0, -2.0, 4.0, 0.5};
    const double mean = 0.875;
    auto wide = layer_norm(x, 1.0, 0.0, 1e8);
    for (std::size_t k = 0; k < x.size(); ++k) CHECK(wide[k] == doctest::Approx((x[k] - mean) / 1e4).epsilon(1e-6));

    // not injective on all of R^d: constant shifts collapse
    DenseRow shifted = x;
    for (auto& v : shifted) v += 3.0;
    auto a = layer_norm(x), b = layer_norm(shifted);
    for (std::size_t k = 0; k < x.size(); ++k) CHECK(a[k] == doctest::Approx(b[k]));
}

TEST_CASE("property: layer norm separates random pairs and reconstructs its input") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> g(0.0, 1.0);
    const std::vector<std::pair<double, double>> params{{1.0, 1e-5}, {0.3, 1e-2}, {-2.0, 1.0}, {5.0, 1e-8}};
    int collisions = 0;
    for (int trial = 0; trial < 100000; ++trial) {
        const auto [alpha, eps] = params[trial % params.size()];
        DenseRow x(6), y(6);
        for (auto& v : x) v = g(rng);
        for (auto& v : y) v = g(rng);
        const auto lx = layer_norm(x, alpha, 0.25, eps), ly = layer_norm(y, alpha, 0.25, eps);
        if (lx == ly) ++collisions;
        if (trial % 100 == 0) {
            double m = 0, var = 0;
            for (double v : x) m += v;
            m /= 6;
            for (double v : x) var += (v - m) * (v - m);
            var /= 6;
            for (std::size_t k = 0; k < 6; ++k)
                CHECK(m + (lx[k] - 0.25) * std::sqrt(var + eps) / alpha == doctest::Approx(x[k]));
        }
    }
    CHECK(collisions == 0);

    auto scheme = build_embedding(5, 2, toks({1, 2, 3, 4}));
    std::vector<DenseRow> images;
    for (std::int64_t a = 1; a <= 3; ++a)
        for (std::size_t pos = 2; pos <= 5; ++pos) {
            images.push_back(layer_norm(to_dense(encode_node(toks({a}), 1, pos, scheme), scheme.d_m)));
            images.push_back(layer_norm(to_dense(encode_node(toks({a, a + 1}), 1, pos, scheme), scheme.d_m)));
        }
    for (std::size_t p = 0; p < images.size(); ++p)
        for (std::size_t q = p + 1; q < images.size(); ++q) CHECK(images[p] != images[q]);
}

TEST_CASE("forward predictions") {
    auto ex = example3();
    auto one = forward(ex, 1, scheme_for(ex, 2));
    REQUIRE(one.prediction.has_value());
    CHECK(*one.prediction == Token{6});

    auto sorted = sorted_task(8, 2, 3);
    auto three = forward(sorted, 3, scheme_for(sorted, 3));
    REQUIRE(three.prediction.has_value());
    CHECK(*three.prediction == reasoning_result(sorted));
    CHECK(*three.prediction == Token{15});

    auto far = sorted_task(8, 2, 5);
    CHECK_FALSE(forward(far, 5, scheme_for(far, 3)).prediction.has_value());

    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        auto task = random_task(5 + trial % 4, rng, 5);
        CHECK_FALSE(forward(task, 5, scheme_for(task, 3)).prediction.has_value());
    }
}

TEST_CASE("property: decoded trace equals propagate and scores split at one") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 25; ++trial) {
        const int s = 1 + trial % 8;
        const int L = 1 + trial % 3;
        auto task = random_task(s, rng);
        auto scheme = scheme_for(task, L);
        auto state = run(task, scheme);
        auto trace = propagate(task, L, true);
        auto decoded = decode_trace(state, scheme);
        CHECK(trace_mismatches(decoded, trace).empty());
        CHECK(attention_violations(state, trace).empty());
        for (const auto& layer : decoded) {
            CHECK(layer.front().values == std::vector<Token>{task.tokens().front()});
            for (std::size_t i = 1; i <= task.n(); ++i)
                CHECK(layer[i - 1].values.at(layer[i - 1].alignment - 1) == task.tokens()[i - 1]);
        }
        for (std::size_t i = 1; i <= task.n(); ++i) CHECK(decoded[0][i - 1].values.size() == 1);
    }
}

TEST_CASE("case classification") {
    CHECK(case_classify(3, 3) == Case::Case1);
    CHECK(case_classify(4, 3) == Case::Case2);
    CHECK(case_classify(5, 3) == Case::Case3);
    CHECK(case_classify(1, 1) == Case::Case3);
    CHECK(case_classify(1, 2) == Case::Case1);
    CHECK(std::string(to_string(Case::Case2)) == "Case2");
}

TEST_CASE("perturbation check") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 4; ++trial) {
        auto task = random_task(2 + trial, rng);
        auto scheme = scheme_for(task, 2 + trial % 2);
        auto state = run(task, scheme);

        auto clean = perturb_check(state, 0.0, 0.0, scheme);
        CHECK(clean.pass);
        CHECK(clean.max_deviation == doctest::Approx(0.0));
        CHECK(clean.delta > 0.0);

        const double n = static_cast<double>(task.n());
        const double eps = clean.delta / (4.0 * (n + 1.0));
        const double eta = clean.delta / (16.0 * n * std::exp(2.0 * clean.max_score));
        auto small = perturb_check(state, eps, eta, scheme, 99 + trial);
        CHECK(small.pass);
        CHECK(small.bound < small.delta);
        CHECK(small.max_deviation <= small.bound);

        auto large = perturb_check(state, 10.0 * clean.delta, 0.0, scheme, 5);
        CHECK_FALSE(large.bound_ok);
        CHECK_FALSE(large.pass);
    }
}
