#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rprop/propagate.hpp"
#include "rprop/seqcore.hpp"

namespace rprop::xf {

// Coordinates are 1-based, in [1, d_m], to match the shift algebra:
// a one-hot at c moves to c - t under t left shifts.
using Coord = std::int64_t;
using SparseRow = std::map<Coord, double>;
using DenseRow = std::vector<double>;
using ScoreMatrix = std::vector<std::vector<double>>;  // masked entries are -inf

inline constexpr Coord kDefaultWidthCap = 1'000'000;

struct EmbeddingScheme {
    std::size_t n = 0;
    int L = 0;
    std::vector<Token> vocab;  // sorted
    std::vector<Coord> slots;  // slot of vocab[q], strictly increasing
    Coord d_m = 0;
    bool self_match = true;  // key weights also match a row against itself

    std::int64_t block() const;  // 3^L
    Coord slot_of(Token t) const;
    Coord wrap(Coord c) const;   // into [1, d_m]
    bool first_position_band(Coord c) const;
};

Coord required_spacing(std::size_t n, int L);
// Packs slots at exactly the required spacing.
EmbeddingScheme build_embedding(std::size_t n, int L, std::vector<Token> vocab, Coord width_cap = kDefaultWidthCap);
// Throws InvalidScheme when a spacing inequality or the non-collision check fails.
void validate_scheme(const EmbeddingScheme& scheme);
EmbeddingScheme scheme_for(const ReasoningTask& task, int L, Coord width_cap = kDefaultWidthCap);

DenseRow shift_apply(const DenseRow& v, std::int64_t t);
SparseRow shift_apply(const SparseRow& v, std::int64_t t, Coord d_m);
DenseRow to_dense(const SparseRow& v, Coord d_m);

enum class KeyKind { PositionalAdjacent, ShiftBand };

struct LayerWeights {
    KeyKind key = KeyKind::ShiftBand;
    std::int64_t band_lo = 0;  // shift exponents summed in the key, inclusive
    std::int64_t band_hi = 0;
    bool self_term = false;
    std::int64_t value_shift = 0;  // value-output is R^value_shift
};

struct WeightSet {
    std::vector<LayerWeights> layers;  // 0..L-1
    std::int64_t readout_shift(int m) const;
    std::size_t n = 0;
    std::int64_t block = 1;
};

WeightSet build_weights(const EmbeddingScheme& scheme);
// Dense query-key product for layer l; only sensible for small d_m.
std::vector<DenseRow> dense_key_matrix(const WeightSet& w, int l, const EmbeddingScheme& scheme);

ScoreMatrix attention_scores(const std::vector<SparseRow>& X, int l, const EmbeddingScheme& scheme,
                             const WeightSet& w);
std::vector<SparseRow> attention_output(const std::vector<SparseRow>& X, const ScoreMatrix& A, int l,
                                        const EmbeddingScheme& scheme, const WeightSet& w);

struct DecodedNode {
    std::size_t position = 0;
    std::vector<Token> values;  // chain order
    int alignment = 1;          // 1-based index of the position's own token
    bool operator==(const DecodedNode&) const = default;
};

SparseRow encode_node(const std::vector<Token>& values, int alignment, std::size_t position,
                      const EmbeddingScheme& scheme);
// Decodes a canonical row of layer l. Entries at or below `floor` are treated as zero.
DecodedNode decode_row(const SparseRow& row, std::size_t position, int l, const EmbeddingScheme& scheme,
                       double floor = 0.0);

// `noise` is a bound on the absolute perturbation of every entry; 0 for exact rows.
DecodedNode decode_attention_row(const SparseRow& ao, std::size_t position, int l, const EmbeddingScheme& scheme,
                                 double noise = 0.0);

struct FfnOutput {
    SparseRow row;
    DecodedNode node;
};
FfnOutput idealized_ffn(const SparseRow& ao, std::size_t position, int l, const EmbeddingScheme& scheme,
                        double noise = 0.0);

std::vector<Token> merge_segments(const std::vector<Token>& a, const std::vector<Token>& b);

DenseRow layer_norm(const DenseRow& x, double alpha = 1.0, double beta = 0.0, double eps = 1e-5);

struct XfState {
    std::vector<Token> tokens;
    std::vector<std::vector<SparseRow>> X;   // X[l], l = 0..L
    std::vector<ScoreMatrix> A;              // A[l], l = 0..L-1
    std::vector<std::vector<SparseRow>> AO;  // attention plus residual, l = 0..L-1
    std::vector<std::vector<double>> ln_scale;  // per layer and row: 1/sqrt(Var+eps) of the canonical row
};

XfState run(const ReasoningTask& task, const EmbeddingScheme& scheme);
std::optional<Token> readout(const XfState& state, int m, const EmbeddingScheme& scheme);

struct ForwardResult {
    std::optional<Token> prediction;  // empty means NoAnswer
    XfState state;
};
ForwardResult forward(const ReasoningTask& task, int m, const EmbeddingScheme& scheme);

std::vector<std::vector<DecodedNode>> decode_trace(const XfState& state, const EmbeddingScheme& scheme);
std::vector<std::string> trace_mismatches(const std::vector<std::vector<DecodedNode>>& decoded,
                                          const LayerTrace& trace);
// Messages for scores at layers >= 1 that break the zero / at-least-one split.
std::vector<std::string> attention_violations(const XfState& state, const LayerTrace& trace, double tol = 1e-9);

enum class Case { Case1, Case2, Case3 };
Case case_classify(int m, int L);
const char* to_string(Case c);

double max_unmasked_score(const XfState& state);
// Largest uniform perturbation of the attention outputs that cannot change any decode.
double decode_margin(const XfState& state, const EmbeddingScheme& scheme);

struct PerturbReport {
    bool pass = false;
    bool bound_ok = false;
    bool trace_unchanged = false;
    double bound = 0;          // 4 n eta0 exp(2M) + (n+1) eps
    double delta = 0;          // decode margin
    double max_score = 0;      // M
    double max_deviation = 0;  // observed sup-norm change of the attention outputs
};
PerturbReport perturb_check(const XfState& state, double eps, double eta0, const EmbeddingScheme& scheme,
                            std::uint64_t seed = 0);

}  // namespace rprop::xf
