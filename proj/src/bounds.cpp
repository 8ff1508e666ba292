#include "rprop/bounds.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <thread>

#include "rprop/error.hpp"
#include "rprop/intmath.hpp"
#include "rprop/propagate.hpp"

namespace rprop {

bool BoundReport::pass() const {
    return std::all_of(layers.begin(), layers.end(), [](const LayerBound& b) { return b.pass; });
}

bool BoundReport::upper_attained() const {
    bool any = false;
    for (const auto& b : layers) {
        if (!b.checked) continue;
        if (!b.attains_upper) return false;
        any = true;
    }
    return any;
}

ReasoningTask witness_lower(int s) {
    if (s < 1) throw Error(ErrorKind::IndexOutOfRange, "witness needs s >= 1");
    std::vector<ReasoningPair> pairs;
    for (int k = 1; k <= s; ++k) pairs.push_back({Token{k}, Token{k + 1}});
    auto seq = build_sequence(validate_chain(pairs), Permutation::identity(s));
    return attach_start(seq, 1, 1);
}

std::vector<std::int64_t> s_k(int k, std::int64_t i) {
    if (k < 1) throw Error(ErrorKind::IndexOutOfRange, "s_k needs k >= 1");
    if (k == 1) return {i};
    const auto step = pow3(k - 2);
    auto out = s_k(k - 1, i);
    for (auto start : {i + 2 * step, i + step}) {
        auto part = s_k(k - 1, start);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

std::vector<std::int64_t> fractal_layout(int ltilde) {
    if (ltilde < 2) throw Error(ErrorKind::IndexOutOfRange, "fractal witness needs ltilde >= 2");
    std::vector<std::int64_t> order;
    for (int l = ltilde - 1; l >= 1; --l) {
        auto block = s_k(l, (3 - pow3(l)) / 2);
        order.insert(order.end(), block.begin(), block.end());
    }
    for (int l = 1; l <= ltilde - 1; ++l) {
        auto block = s_k(l, (pow3(l - 1) + 1) / 2);
        order.insert(order.end(), block.begin(), block.end());
    }
    return order;
}

ReasoningTask witness_fractal(int ltilde) {
    const auto half = (pow3(ltilde - 1) - 1) / 2;
    const auto lo = 1 - half;
    std::vector<ReasoningPair> pairs;
    for (auto m = lo; m <= half; ++m) pairs.push_back({Token{m}, Token{m + 1}});
    std::vector<int> forward;
    for (auto m : fractal_layout(ltilde)) forward.push_back(static_cast<int>(m - lo + 1));
    auto seq = build_sequence(validate_chain(pairs), Permutation::from_forward(forward));
    return attach_start(seq, static_cast<int>(1 - lo + 1), 1);
}

int validity_limit(std::size_t s) {
    int l = 0;
    while (pow2(l) <= static_cast<std::int64_t>(s)) ++l;
    return l;
}

namespace {

LayerBound judge(int l, std::int64_t low_measure, std::int64_t high_measure, std::int64_t lower, std::int64_t upper,
                 bool checked) {
    LayerBound b;
    b.layer = l;
    b.measured = low_measure;
    b.measured_upper = high_measure;
    b.lower = lower;
    b.upper = upper;
    b.checked = checked;
    b.attains_lower = low_measure == lower;
    b.attains_upper = high_measure == upper;
    b.pass = !checked || (lower <= low_measure && high_measure <= upper);
    return b;
}

}  // namespace

BoundReport verify_theorem_finite(const ReasoningTask& task, int L) {
    const auto trace = propagate(task, L, true);
    const auto q = info_quantity(trace);
    BoundReport report;
    report.valid_up_to = validity_limit(task.s());
    for (int l = 1; l <= L; ++l) {
        const auto c = q.at(l, task.n());
        report.layers.push_back(judge(l, c, c, pow2(l - 1), pow3(l - 1), l <= report.valid_up_to));
    }
    return report;
}

BoundReport verify_theorem_infinite(const ReasoningChain& window, const Permutation& sigma, int L, Token probe) {
    std::size_t first_pair = 0, last_pair = 0;
    for (std::size_t k = 1; k <= window.size(); ++k) {
        const auto& p = window.pair(k);
        if (p.first == probe || p.second == probe) {
            if (first_pair == 0) first_pair = k;
            last_pair = k;
        }
    }
    if (first_pair == 0) throw Error(ErrorKind::IndexOutOfRange, "probe token not in window");
    const auto pad = pow3(L);
    const auto before = static_cast<std::int64_t>(first_pair) - 1;
    const auto after = static_cast<std::int64_t>(window.size() - last_pair);
    if (before < pad || after < pad)
        throw Error(ErrorKind::WindowTooShort, "need " + std::to_string(pad) + " pairs on each side, have " +
                                                   std::to_string(before) + "/" + std::to_string(after));

    const auto tokens = build_sequence(window, sigma).tokens;
    const auto masked = info_quantity(propagate(tokens, L, true));
    const auto unmasked = info_quantity(propagate(tokens, L, false));
    BoundReport report;
    report.valid_up_to = L;
    report.probe = probe;
    for (int l = 1; l <= L; ++l)
        report.layers.push_back(judge(l, masked.T.at(probe).at(l), unmasked.T.at(probe).at(l), pow2(l - 1) + 1,
                                      pow3(l - 1) + 1, true));
    return report;
}

namespace {

struct Chunk {
    BruteResult best;
    bool found = false;
};

void scan_prefix(int s, int L, int head, Chunk& out) {
    std::vector<ReasoningPair> pairs;
    for (int k = 1; k <= s; ++k) pairs.push_back({Token{k}, Token{k + 1}});
    const auto chain = validate_chain(pairs);

    std::vector<int> rest;
    for (int k = 1; k <= s; ++k)
        if (k != head) rest.push_back(k);
    do {
        std::vector<int> forward{head};
        forward.insert(forward.end(), rest.begin(), rest.end());
        const auto sigma = Permutation::from_forward(forward);
        const auto seq = build_sequence(chain, sigma);
        for (int m0 = 1; m0 <= s; ++m0) {
            const auto task = attach_start(seq, m0, 1);
            const auto trace = propagate(task, L, true);
            const int c = static_cast<int>(trace.node(L, task.n()).size());
            out.best.max_effective_steps = std::max(out.best.max_effective_steps, effective_steps(trace, task));
            ++out.best.tasks_examined;
            if (!out.found || c > out.best.max_c) {
                out.best.max_c = c;
                out.best.sigma = sigma;
                out.best.start_pair = m0;
                out.found = true;
            }
        }
    } while (std::next_permutation(rest.begin(), rest.end()));
}

}  // namespace

BruteResult brute_force_max(int s, int L, unsigned jobs) {
    if (s > 7) throw Error(ErrorKind::TooLarge, std::to_string(s) + "! layouts is beyond the exhaustive limit");
    if (s < 1 || L < 1) throw Error(ErrorKind::IndexOutOfRange, "brute force needs s >= 1 and L >= 1");

    std::vector<Chunk> chunks(s);
    jobs = std::clamp(jobs, 1u, static_cast<unsigned>(s));
    if (jobs == 1) {
        for (int h = 1; h <= s; ++h) scan_prefix(s, L, h, chunks[h - 1]);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < jobs; ++w)
            pool.emplace_back([&, w] {
                for (int h = 1 + static_cast<int>(w); h <= s; h += static_cast<int>(jobs))
                    scan_prefix(s, L, h, chunks[h - 1]);
            });
        for (auto& t : pool) t.join();
    }

    BruteResult total = chunks.front().best;
    total.tasks_examined = 0;
    for (const auto& c : chunks) {
        if (c.best.max_c > total.max_c) {
            total.max_c = c.best.max_c;
            total.sigma = c.best.sigma;
            total.start_pair = c.best.start_pair;
        }
        total.max_effective_steps = std::max(total.max_effective_steps, c.best.max_effective_steps);
        total.tasks_examined += c.best.tasks_examined;
    }
    return total;
}

std::pair<std::int64_t, std::int64_t> corollary_envelope(int L) {
    if (L < 1) throw Error(ErrorKind::IndexOutOfRange, "envelope needs L >= 1");
    return {pow2(L - 1) - 1, (pow3(L - 1) - 1) / 2};
}

std::int64_t partial_failure_onset(int L) {
    if (L < 1) throw Error(ErrorKind::IndexOutOfRange, "envelope needs L >= 1");
    return pow2(L - 1);
}

}  // namespace rprop
