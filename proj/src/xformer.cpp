#include "rprop/xformer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_set>

#include "rprop/error.hpp"
#include "rprop/intmath.hpp"

namespace rprop::xf {

namespace {

constexpr double kTol = 1e-9;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Coord wrap0(Coord c, Coord d) { return ((c % d) + d) % d; }

}  // namespace

std::int64_t EmbeddingScheme::block() const { return pow3(L); }

Coord EmbeddingScheme::slot_of(Token t) const {
    auto it = std::lower_bound(vocab.begin(), vocab.end(), t);
    if (it == vocab.end() || *it != t)
        throw Error(ErrorKind::InvalidScheme, "token " + std::to_string(t.value) + " has no slot");
    return slots[static_cast<std::size_t>(it - vocab.begin())];
}

Coord EmbeddingScheme::wrap(Coord c) const { return wrap0(c - 1, d_m) + 1; }

bool EmbeddingScheme::first_position_band(Coord c) const {
    const auto e = static_cast<Coord>(n + 1) * block();
    for (Coord k : slots)
        if (wrap(k - e) == c) return true;
    return false;
}

Coord required_spacing(std::size_t n, int L) { return 2 * static_cast<Coord>(n + 1) * (pow3(L) + 1); }

EmbeddingScheme build_embedding(std::size_t n, int L, std::vector<Token> vocab, Coord width_cap) {
    if (n % 2 == 0) throw Error(ErrorKind::InvalidScheme, "sequence length must be odd");
    if (L < 1) throw Error(ErrorKind::InvalidScheme, "need at least one layer");
    if (vocab.empty()) throw Error(ErrorKind::InvalidScheme, "empty vocabulary");
    std::sort(vocab.begin(), vocab.end());
    if (std::adjacent_find(vocab.begin(), vocab.end()) != vocab.end())
        throw Error(ErrorKind::InvalidScheme, "vocabulary has duplicates");

    const Coord gap = required_spacing(n, L);
    const Coord width = static_cast<Coord>(n) + static_cast<Coord>(vocab.size() + 1) * gap;
    if (width > width_cap)
        throw Error(ErrorKind::SchemeTooLarge, "d_m = " + std::to_string(width) + " exceeds cap " +
                                                   std::to_string(width_cap) + "; use a smaller s or L");
    EmbeddingScheme scheme;
    scheme.n = n;
    scheme.L = L;
    scheme.vocab = std::move(vocab);
    for (std::size_t q = 0; q < scheme.vocab.size(); ++q)
        scheme.slots.push_back(static_cast<Coord>(n) + static_cast<Coord>(q + 1) * gap);
    scheme.d_m = width;
    validate_scheme(scheme);
    return scheme;
}

void validate_scheme(const EmbeddingScheme& scheme) {
    const Coord gap = required_spacing(scheme.n, scheme.L);
    const auto n = static_cast<Coord>(scheme.n);
    if (scheme.slots.size() != scheme.vocab.size() || scheme.slots.empty())
        throw Error(ErrorKind::InvalidScheme, "one slot per vocabulary entry");
    if (scheme.slots.front() - n < gap) throw Error(ErrorKind::InvalidScheme, "first slot too close to positions");
    for (std::size_t q = 1; q < scheme.slots.size(); ++q)
        if (scheme.slots[q] - scheme.slots[q - 1] < gap)
            throw Error(ErrorKind::InvalidScheme, "slots " + std::to_string(q) + " and " + std::to_string(q + 1) +
                                                      " closer than " + std::to_string(gap));
    if (scheme.d_m - scheme.slots.back() < gap) throw Error(ErrorKind::InvalidScheme, "last slot too close to d_m");

    // every coordinate the encoding can produce must be distinct
    const auto B = scheme.block();
    const auto h = (B - 1) / 2;
    std::unordered_set<Coord> seen;
    auto claim = [&](Coord c) {
        if (!seen.insert(scheme.wrap(c)).second)
            throw Error(ErrorKind::InvalidScheme, "encoding collision at coordinate " + std::to_string(c));
    };
    for (Coord p = 1; p <= n; ++p) claim(p);
    for (Coord k : scheme.slots) {
        claim(k);
        claim(k - 1);
        claim(k - (n + 1) * B);
        for (Coord p = 2; p <= n; ++p)
            for (Coord off = -h; off <= h; ++off)
                if (p * B + off != 1) claim(k - (p * B + off));
    }
}

EmbeddingScheme scheme_for(const ReasoningTask& task, int L, Coord width_cap) {
    return build_embedding(task.n(), L, task.seq.chain.walk(), width_cap);
}

DenseRow shift_apply(const DenseRow& v, std::int64_t t) {
    const auto d = static_cast<Coord>(v.size());
    DenseRow out(v.size());
    if (d == 0) return out;
    for (Coord c = 0; c < d; ++c) out[c] = v[wrap0(c + t, d)];
    return out;
}

SparseRow shift_apply(const SparseRow& v, std::int64_t t, Coord d_m) {
    SparseRow out;
    for (const auto& [c, x] : v) out[wrap0(c - 1 - t, d_m) + 1] += x;
    return out;
}

DenseRow to_dense(const SparseRow& v, Coord d_m) {
    DenseRow out(d_m, 0.0);
    for (const auto& [c, x] : v) out[c - 1] += x;
    return out;
}

std::int64_t WeightSet::readout_shift(int m) const { return -static_cast<std::int64_t>(n) * block - m; }

WeightSet build_weights(const EmbeddingScheme& scheme) {
    WeightSet w;
    w.n = scheme.n;
    w.block = scheme.block();
    LayerWeights first;
    first.key = KeyKind::PositionalAdjacent;
    first.value_shift = 1;
    w.layers.push_back(first);
    for (int l = 1; l < scheme.L; ++l) {
        LayerWeights lw;
        lw.key = KeyKind::ShiftBand;
        lw.band_lo = -static_cast<std::int64_t>(scheme.n + 1) * w.block;
        lw.band_hi = -1;
        lw.self_term = scheme.self_match;
        lw.value_shift = 0;
        w.layers.push_back(lw);
    }
    return w;
}

std::vector<DenseRow> dense_key_matrix(const WeightSet& w, int l, const EmbeddingScheme& scheme) {
    const auto d = scheme.d_m;
    std::vector<DenseRow> K(d, DenseRow(d, 0.0));
    const auto& lw = w.layers.at(l);
    if (lw.key == KeyKind::PositionalAdjacent) {
        for (Coord t = 1; 2 * t <= static_cast<Coord>(scheme.n); ++t) K[2 * t - 1][2 * t - 2] = 1.0;
        return K;
    }
    for (Coord a = 1; a <= d; ++a) {
        for (auto m = lw.band_lo; m <= lw.band_hi; ++m) K[a - 1][scheme.wrap(a - m) - 1] += 1.0;
        if (lw.self_term && !scheme.first_position_band(a)) K[a - 1][a - 1] += 1.0;
    }
    return K;
}

ScoreMatrix attention_scores(const std::vector<SparseRow>& X, int l, const EmbeddingScheme& scheme,
                             const WeightSet& w) {
    const auto n = X.size();
    const auto& lw = w.layers.at(l);
    ScoreMatrix A(n, std::vector<double>(n, kNegInf));
    auto value = [](const SparseRow& r, Coord c) {
        auto it = r.find(c);
        return it == r.end() ? 0.0 : it->second;
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double a = 0.0;
            if (lw.key == KeyKind::PositionalAdjacent) {
                for (Coord t = 1; 2 * t <= static_cast<Coord>(scheme.n); ++t)
                    a += value(X[i], 2 * t) * value(X[j], 2 * t - 1);
            } else {
                for (const auto& [c, u] : X[i])
                    for (const auto& [cp, v] : X[j]) {
                        const auto diff = wrap0(cp - c, scheme.d_m);
                        if (diff >= -lw.band_hi && diff <= -lw.band_lo) a += u * v;
                        if (diff == 0 && lw.self_term && !scheme.first_position_band(c)) a += u * v;
                    }
            }
            A[i][j] = a;
        }
    }
    return A;
}

namespace {

std::vector<double> softmax_row(const std::vector<double>& scores, std::size_t i) {
    double top = kNegInf;
    for (std::size_t j = 0; j <= i; ++j) top = std::max(top, scores[j]);
    std::vector<double> alpha(i + 1);
    double z = 0.0;
    for (std::size_t j = 0; j <= i; ++j) z += alpha[j] = std::exp(scores[j] - top);
    for (auto& a : alpha) a /= z;
    return alpha;
}

}  // namespace

std::vector<SparseRow> attention_output(const std::vector<SparseRow>& X, const ScoreMatrix& A, int l,
                                        const EmbeddingScheme& scheme, const WeightSet& w) {
    const auto shift = w.layers.at(l).value_shift;
    std::vector<SparseRow> out;
    out.reserve(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) {
        const auto alpha = softmax_row(A[i], i);
        SparseRow row = X[i];
        for (std::size_t j = 0; j <= i; ++j)
            for (const auto& [c, v] : shift_apply(X[j], shift, scheme.d_m)) row[c] += alpha[j] * v;
        out.push_back(std::move(row));
    }
    return out;
}

namespace {

struct SlotHit {
    std::size_t q = 0;
    std::int64_t e = 0;  // exponent: coordinate = slot - e
};

std::optional<SlotHit> locate(Coord c, const EmbeddingScheme& s) {
    auto it = std::lower_bound(s.slots.begin(), s.slots.end(), c);
    if (it == s.slots.end()) return std::nullopt;
    const auto e = *it - c;
    if (e > static_cast<Coord>(s.n + 2) * s.block()) return std::nullopt;
    return SlotHit{static_cast<std::size_t>(it - s.slots.begin()), e};
}

struct Placement {
    std::size_t position = 0;
    std::int64_t offset = 0;
};

std::optional<Placement> place(std::int64_t e, const EmbeddingScheme& s) {
    const auto B = s.block();
    const auto h = (B - 1) / 2;
    const auto p = (e + h) / B;
    const auto off = e - p * B;
    if (p == static_cast<std::int64_t>(s.n) + 1) {
        if (off != 0) return std::nullopt;
        return Placement{1, 0};
    }
    if (p < 2 || p > static_cast<std::int64_t>(s.n)) return std::nullopt;
    return Placement{static_cast<std::size_t>(p), off};
}

[[noreturn]] void ambiguous(std::size_t i, int l, const std::string& why) {
    throw Error(ErrorKind::DecodeAmbiguity,
                "layer " + std::to_string(l) + " position " + std::to_string(i) + ": " + why);
}

// Tokens keyed by encoding offset must form one gap-free run.
std::vector<Token> ordered_run(std::vector<std::pair<std::int64_t, Token>> items, std::size_t i, int l) {
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Token> out;
    for (std::size_t k = 0; k < items.size(); ++k) {
        if (k > 0 && items[k].first != items[k - 1].first + 1) ambiguous(i, l, "slot offsets are not contiguous");
        out.push_back(items[k].second);
    }
    return out;
}

enum class EntryRole { Positional, Own, Kept, Dropped };

struct ClassifiedEntry {
    Coord c = 0;
    double v = 0;
    EntryRole role = EntryRole::Positional;
    std::size_t q = 0;
    std::size_t source = 0;  // position the entry came from (l >= 1)
    std::int64_t offset = 0;
    double w = 0;     // value in units of the smallest positive entry
    double dist = 0;  // distance of w to the nearest integer
};

struct ClassifiedRow {
    double unit = 0;  // smallest positive entry, exp(0)/Z
    std::vector<ClassifiedEntry> entries;
};

ClassifiedRow classify(const SparseRow& ao, std::size_t i, int l, const EmbeddingScheme& s, double noise) {
    const double floor = 2.0 * noise;
    ClassifiedRow out;
    out.unit = std::numeric_limits<double>::infinity();
    for (const auto& [c, v] : ao)
        if (v > floor) out.unit = std::min(out.unit, v);
    if (!std::isfinite(out.unit)) ambiguous(i, l, "row is empty");
    const std::int64_t shift = l == 0 ? 1 : 0;

    for (const auto& [c, v] : ao) {
        if (v <= floor) continue;
        ClassifiedEntry e;
        e.c = c;
        e.v = v;
        auto hit = locate(c, s);
        if (!hit) {
            if (l == 0 && (c <= static_cast<Coord>(s.n) || c == s.d_m)) {
                out.entries.push_back(e);
                continue;
            }
            ambiguous(i, l, "coordinate " + std::to_string(c) + " is outside every slot band");
        }
        e.q = hit->q;
        bool own = false;
        if (l == 0) {
            if (hit->e == 0) own = true;
            else if (hit->e != shift) ambiguous(i, l, "unexpected slot exponent");
        } else {
            auto pl = place(hit->e, s);
            if (!pl) ambiguous(i, l, "slot exponent does not name a position");
            e.source = pl->position;
            e.offset = pl->offset;
            own = pl->position == i;
        }
        if (own) {
            e.role = EntryRole::Own;
        } else {
            e.w = v / out.unit;
            e.dist = std::abs(e.w - std::round(e.w));
            double tol = kTol * std::max(1.0, e.w);
            if (noise > 0)
                tol = out.unit > noise ? std::max(tol, noise * (1.0 + e.w) / (out.unit - noise))
                                       : std::numeric_limits<double>::infinity();
            e.role = e.dist > tol ? EntryRole::Kept : EntryRole::Dropped;
        }
        out.entries.push_back(e);
    }
    return out;
}

}  // namespace

SparseRow encode_node(const std::vector<Token>& values, int alignment, std::size_t position,
                      const EmbeddingScheme& scheme) {
    const auto B = scheme.block();
    SparseRow row;
    if (position == 1) {
        if (values.size() != 1) throw Error(ErrorKind::InvalidScheme, "position 1 carries one token");
        row[scheme.wrap(scheme.slot_of(values[0]) - static_cast<Coord>(scheme.n + 1) * B)] = 1.0;
        return row;
    }
    const auto h = (B - 1) / 2;
    for (std::size_t k = 1; k <= values.size(); ++k) {
        const auto off = static_cast<std::int64_t>(k) - alignment;
        if (off < -h || off > h) throw Error(ErrorKind::InvalidScheme, "segment longer than the encoding allows");
        row[scheme.wrap(scheme.slot_of(values[k - 1]) - (static_cast<Coord>(position) * B + off))] = 1.0;
    }
    return row;
}

DecodedNode decode_row(const SparseRow& row, std::size_t position, int l, const EmbeddingScheme& scheme,
                       double floor) {
    if (l == 0) {
        std::vector<Token> found;
        for (const auto& [c, v] : row) {
            if (v <= floor) continue;
            auto hit = locate(c, scheme);
            if (!hit) continue;  // positional coordinate
            if (hit->e != 0) ambiguous(position, l, "embedding entry off its slot");
            found.push_back(scheme.vocab[hit->q]);
        }
        if (found.size() != 1) ambiguous(position, l, "embedding row must hold one token");
        return DecodedNode{position, found, 1};
    }
    std::vector<std::pair<std::int64_t, Token>> items;
    for (const auto& [c, v] : row) {
        if (v <= floor) continue;
        auto hit = locate(c, scheme);
        if (!hit) ambiguous(position, l, "coordinate outside every slot band");
        auto pl = place(hit->e, scheme);
        if (!pl || pl->position != position) ambiguous(position, l, "entry encodes another position");
        items.emplace_back(pl->offset, scheme.vocab[hit->q]);
    }
    if (items.empty()) ambiguous(position, l, "row is empty");
    const auto min_off = std::min_element(items.begin(), items.end())->first;
    auto values = ordered_run(std::move(items), position, l);
    const auto alignment = 1 - min_off;
    if (alignment < 1 || alignment > static_cast<std::int64_t>(values.size()))
        ambiguous(position, l, "own token missing from the segment");
    return DecodedNode{position, values, static_cast<int>(alignment)};
}

std::vector<Token> merge_segments(const std::vector<Token>& a, const std::vector<Token>& b) {
    auto index_of = [](const std::vector<Token>& v, Token t) -> std::optional<std::size_t> {
        auto it = std::find(v.begin(), v.end(), t);
        if (it == v.end()) return std::nullopt;
        return static_cast<std::size_t>(it - v.begin());
    };
    auto inside = [&](const std::vector<Token>& small, const std::vector<Token>& big) {
        auto p = index_of(big, small.front());
        return p && *p + small.size() <= big.size() && std::equal(small.begin(), small.end(), big.begin() + *p);
    };
    auto joined = [&](const std::vector<Token>& left, const std::vector<Token>& right) -> std::optional<std::vector<Token>> {
        auto p = index_of(right, left.back());
        if (!p || *p + 1 > left.size()) return std::nullopt;
        if (!std::equal(right.begin(), right.begin() + *p + 1, left.end() - (*p + 1))) return std::nullopt;
        std::vector<Token> out = left;
        out.insert(out.end(), right.begin() + *p + 1, right.end());
        return out;
    };
    if (a.empty()) return b;
    if (b.empty()) return a;
    if (inside(b, a)) return a;
    if (inside(a, b)) return b;
    if (auto r = joined(a, b)) return *r;
    if (auto r = joined(b, a)) return *r;
    throw Error(ErrorKind::DecodeAmbiguity, "segments do not overlap at an end");
}

DecodedNode decode_attention_row(const SparseRow& ao, std::size_t position, int l, const EmbeddingScheme& scheme,
                                 double noise) {
    const auto row = classify(ao, position, l, scheme, noise);
    std::vector<std::pair<std::int64_t, Token>> own;
    std::vector<Token> shifted;
    std::map<std::size_t, std::vector<std::pair<std::int64_t, Token>>> sources;
    for (const auto& e : row.entries) {
        const Token t = e.role == EntryRole::Positional ? Token{} : scheme.vocab[e.q];
        switch (e.role) {
            case EntryRole::Own: own.emplace_back(e.offset, t); break;
            case EntryRole::Kept:
                if (l == 0) shifted.push_back(t);
                else sources[e.source].emplace_back(e.offset, t);
                break;
            default: break;
        }
    }
    if (own.empty()) ambiguous(position, l, "residual content missing");
    if (l == 0 || position == 1) {
        if (own.size() != 1) ambiguous(position, l, "residual must hold one token");
        const Token self = own.front().second;
        if (position == 1) return DecodedNode{1, {self}, 1};
        if (shifted.size() > 1) ambiguous(position, l, "more than one matched neighbour");
        shifted.push_back(self);
        return DecodedNode{position, shifted, static_cast<int>(shifted.size())};
    }

    Token self{};
    bool has_self = false;
    for (const auto& [off, t] : own)
        if (off == 0) self = t, has_self = true;
    if (!has_self) ambiguous(position, l, "own token missing from the residual");
    auto segment = ordered_run(own, position, l);
    for (auto& [src, items] : sources) segment = merge_segments(segment, ordered_run(items, position, l));
    const auto at = std::find(segment.begin(), segment.end(), self);
    return DecodedNode{position, segment, static_cast<int>(at - segment.begin()) + 1};
}

FfnOutput idealized_ffn(const SparseRow& ao, std::size_t position, int l, const EmbeddingScheme& scheme,
                        double noise) {
    auto node = decode_attention_row(ao, position, l, scheme, noise);
    auto row = encode_node(node.values, node.alignment, position, scheme);
    return {std::move(row), std::move(node)};
}

DenseRow layer_norm(const DenseRow& x, double alpha, double beta, double eps) {
    if (x.empty()) return {};
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size());
    const double scale = alpha / std::sqrt(var + eps);
    DenseRow out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = scale * (x[k] - mean) + beta;
    return out;
}

XfState run(const ReasoningTask& task, const EmbeddingScheme& scheme) {
    XfState st;
    st.tokens = task.tokens();
    const auto n = st.tokens.size();
    if (n != scheme.n) throw Error(ErrorKind::InvalidScheme, "scheme built for a different sequence length");
    const auto w = build_weights(scheme);

    std::vector<SparseRow> X0;
    for (std::size_t i = 1; i <= n; ++i) {
        SparseRow row;
        row[scheme.slot_of(st.tokens[i - 1])] = 1.0;
        row[static_cast<Coord>(i)] += 1.0;
        X0.push_back(std::move(row));
    }
    st.X.push_back(std::move(X0));

    for (int l = 0; l < scheme.L; ++l) {
        st.A.push_back(attention_scores(st.X.back(), l, scheme, w));
        st.AO.push_back(attention_output(st.X.back(), st.A.back(), l, scheme, w));
        std::vector<SparseRow> next;
        std::vector<double> scales;
        for (std::size_t i = 1; i <= n; ++i) {
            next.push_back(idealized_ffn(st.AO.back()[i - 1], i, l, scheme).row);
            // LayerNorm statistics of the sparse canonical row
            const double d = static_cast<double>(scheme.d_m);
            double sum = 0.0, sq = 0.0;
            for (const auto& [c, v] : next.back()) sum += v, sq += v * v;
            const double mean = sum / d;
            scales.push_back(1.0 / std::sqrt(sq / d - mean * mean + 1e-5));
        }
        st.X.push_back(std::move(next));
        st.ln_scale.push_back(std::move(scales));
    }
    return st;
}

std::optional<Token> readout(const XfState& state, int m, const EmbeddingScheme& scheme) {
    const auto w = build_weights(scheme);
    const auto projected = shift_apply(state.X.back().back(), w.readout_shift(m), scheme.d_m);
    std::optional<std::size_t> best;
    double best_logit = 0.0;
    for (std::size_t q = 0; q < scheme.slots.size(); ++q) {
        auto it = projected.find(scheme.slots[q]);
        const double logit = it == projected.end() ? 0.0 : it->second;
        if (std::abs(logit) > kTol && (!best || logit > best_logit)) best = q, best_logit = logit;
    }
    if (!best) return std::nullopt;
    return scheme.vocab[*best];
}

ForwardResult forward(const ReasoningTask& task, int m, const EmbeddingScheme& scheme) {
    ForwardResult r;
    r.state = run(task, scheme);
    r.prediction = readout(r.state, m, scheme);
    return r;
}

std::vector<std::vector<DecodedNode>> decode_trace(const XfState& state, const EmbeddingScheme& scheme) {
    std::vector<std::vector<DecodedNode>> out;
    for (std::size_t l = 0; l < state.X.size(); ++l) {
        std::vector<DecodedNode> layer;
        for (std::size_t i = 1; i <= state.X[l].size(); ++i)
            layer.push_back(decode_row(state.X[l][i - 1], i, static_cast<int>(l), scheme));
        out.push_back(std::move(layer));
    }
    return out;
}

std::vector<std::string> trace_mismatches(const std::vector<std::vector<DecodedNode>>& decoded,
                                          const LayerTrace& trace) {
    std::vector<std::string> out;
    if (decoded.size() != trace.layers.size()) {
        out.push_back("layer counts differ");
        return out;
    }
    for (std::size_t l = 0; l < decoded.size(); ++l)
        for (std::size_t i = 1; i <= trace.n; ++i) {
            auto values = decoded[l].at(i - 1).values;
            std::sort(values.begin(), values.end());
            if (values != trace.node(static_cast<int>(l), i).values)
                out.push_back("layer " + std::to_string(l) + " position " + std::to_string(i));
        }
    return out;
}

std::vector<std::string> attention_violations(const XfState& state, const LayerTrace& trace, double tol) {
    std::vector<std::string> out;
    for (std::size_t l = 1; l < state.A.size(); ++l) {
        const auto& A = state.A[l];
        for (std::size_t i = 1; i <= A.size(); ++i)
            for (std::size_t j = 1; j <= i; ++j) {
                const double a = A[i - 1][j - 1];
                const bool silent = j == 1 || !overlaps(trace.node(static_cast<int>(l), i),
                                                        trace.node(static_cast<int>(l), j));
                const bool ok = silent ? std::abs(a) < tol : a >= 1.0 - tol;
                if (!ok)
                    out.push_back("layer " + std::to_string(l) + " A[" + std::to_string(i) + "," +
                                  std::to_string(j) + "] = " + std::to_string(a));
            }
    }
    return out;
}

Case case_classify(int m, int L) {
    if (m <= pow2(L - 1) - 1) return Case::Case1;
    if (m > (pow3(L - 1) - 1) / 2) return Case::Case3;
    return Case::Case2;
}

const char* to_string(Case c) {
    switch (c) {
        case Case::Case1: return "Case1";
        case Case::Case2: return "Case2";
        case Case::Case3: return "Case3";
    }
    return "?";
}

double max_unmasked_score(const XfState& state) {
    double M = 0.0;
    for (const auto& A : state.A)
        for (std::size_t i = 0; i < A.size(); ++i)
            for (std::size_t j = 0; j <= i; ++j) M = std::max(M, A[i][j]);
    return M;
}

double decode_margin(const XfState& state, const EmbeddingScheme& scheme) {
    double delta = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < state.AO.size(); ++l)
        for (std::size_t i = 2; i <= state.AO[l].size(); ++i) {
            const auto row = classify(state.AO[l][i - 1], i, static_cast<int>(l), scheme, 0.0);
            delta = std::min(delta, row.unit / 4.0);
            for (const auto& e : row.entries)
                if (e.role == EntryRole::Kept) delta = std::min(delta, e.dist * row.unit / (4.0 * (2.0 + e.w)));
        }
    return delta;
}

PerturbReport perturb_check(const XfState& state, double eps, double eta0, const EmbeddingScheme& scheme,
                            std::uint64_t seed) {
    PerturbReport rep;
    const auto n = state.tokens.size();
    const auto d = scheme.d_m;
    const auto w = build_weights(scheme);
    rep.max_score = max_unmasked_score(state);
    rep.delta = decode_margin(state, scheme);
    rep.bound = 4.0 * static_cast<double>(n) * eta0 * std::exp(2.0 * rep.max_score) +
                static_cast<double>(n + 1) * eps;
    rep.bound_ok = rep.bound < rep.delta;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<DenseRow> rows;
    for (const auto& r : state.X[0]) rows.push_back(to_dense(r, d));

    bool unchanged = true;
    for (std::size_t l = 0; l < state.A.size() && unchanged; ++l) {
        const auto shift = w.layers[l].value_shift;
        std::vector<DenseRow> shifted;
        for (const auto& r : rows) shifted.push_back(shift_apply(r, shift));
        std::vector<DenseRow> next;
        for (std::size_t i = 1; i <= n && unchanged; ++i) {
            auto scores = state.A[l][i - 1];
            for (std::size_t j = 0; j < i; ++j) scores[j] += eta0 * unit(rng);
            const auto alpha = softmax_row(scores, i - 1);
            DenseRow ao = rows[i - 1];
            for (std::size_t j = 0; j < i; ++j)
                for (Coord c = 0; c < d; ++c) ao[c] += alpha[j] * shifted[j][c];

            const auto clean = to_dense(state.AO[l][i - 1], d);
            SparseRow kept;
            for (Coord c = 0; c < d; ++c) {
                rep.max_deviation = std::max(rep.max_deviation, std::abs(ao[c] - clean[c]));
                if (ao[c] > 2.0 * rep.bound && ao[c] > 0.0) kept[c + 1] = ao[c];
            }
            try {
                const auto got = decode_attention_row(kept, i, static_cast<int>(l), scheme, rep.bound);
                const auto want = decode_attention_row(state.AO[l][i - 1], i, static_cast<int>(l), scheme);
                if (!(got == want)) unchanged = false;
                auto row = to_dense(encode_node(got.values, got.alignment, i, scheme), d);
                for (auto& v : row) v += eps * unit(rng);
                next.push_back(std::move(row));
            } catch (const Error&) {
                unchanged = false;
            }
        }
        rows = std::move(next);
    }
    for (std::size_t i = 1; i <= n && unchanged; ++i) {
        SparseRow kept;
        for (Coord c = 0; c < d; ++c)
            if (rows[i - 1][c] > 0.5) kept[c + 1] = rows[i - 1][c];
        try {
            const int last = static_cast<int>(state.X.size()) - 1;
            if (!(decode_row(kept, i, last, scheme) == decode_row(state.X.back()[i - 1], i, last, scheme)))
                unchanged = false;
        } catch (const Error&) {
            unchanged = false;
        }
    }
    rep.trace_unchanged = unchanged;
    rep.pass = rep.bound_ok && unchanged;
    return rep;
}

}  // namespace rprop::xf
