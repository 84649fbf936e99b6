#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ektc/corpus.hpp"

namespace ektc {

using TokenSeq = std::vector<std::string>;

/// Deterministic tokenizer pinned for reproducible scores: lowercase (ASCII),
/// split on whitespace, then split leading/trailing punctuation runs into
/// separate single-character tokens.
TokenSeq tokenize(std::string_view text);

/// Add-epsilon applied to zero precisions of order >= 2 in corpus BLEU.
inline constexpr double kBleuSmoothEpsilon = 1e-9;

/// Corpus-level BLEU-n: geometric mean of clipped modified precisions for
/// orders 1..n times the brevity penalty (exp(1 - r/c) when c < r, else 1).
/// `smooth_epsilon` substitutes zero higher-order precisions; pass nullopt
/// to disable smoothing.
///
/// Throws EmptyCorpus on empty input, LengthMismatch when the lists differ
/// in length.
double bleu(const std::vector<TokenSeq>& candidates, const std::vector<TokenSeq>& references,
            int n, std::optional<double> smooth_epsilon = kBleuSmoothEpsilon);

/// Sentence-level BLEU-n for one pair; smoothing off by default.
double sentence_bleu(const TokenSeq& candidate, const TokenSeq& reference, int n,
                     std::optional<double> smooth_epsilon = std::nullopt);

enum class RougeVariant { R1, R2, RL };

/// Per-pair ROUGE score. R1/R2 are F1 over clipped unigram/bigram overlap
/// counts; RL is LCS-based F1 with equal weighting of precision and recall.
/// Throws EmptyReference when the reference has no tokens.
double rouge(const TokenSeq& candidate, const TokenSeq& reference, RougeVariant variant);

/// Arithmetic mean of per-pair ROUGE over the corpus.
double rouge_mean(const std::vector<TokenSeq>& candidates,
                  const std::vector<TokenSeq>& references, RougeVariant variant);

/// Distinct-n: unique n-grams across all responses divided by total n-gram
/// count. Throws NoNgrams when no response has >= n tokens.
double distinct(const std::vector<TokenSeq>& responses, int n);

/// The automatic-metric table row: corpus BLEU-1..4, mean sentence BLEU-1..4,
/// mean ROUGE-1/2/L, Distinct-1/2, and the evaluated pair count.
struct MetricReport {
    std::array<double, 4> bleu{};
    std::array<double, 4> bleu_sentence_mean{};
    double rouge1 = 0.0;
    double rouge2 = 0.0;
    double rougeL = 0.0;
    double distinct1 = 0.0;
    double distinct2 = 0.0;
    std::size_t n = 0;
    std::string smoothing = "corpus add-epsilon 1e-9";

    bool operator==(const MetricReport&) const = default;
};

/// Computes the full report from paired raw texts (tokenized internally).
MetricReport score_pairs(const std::vector<std::string>& candidates,
                         const std::vector<std::string>& references,
                         std::optional<double> smooth_epsilon = kBleuSmoothEpsilon);

/// JSON form of the report (includes the out-of-scope bertscore as null with
/// a reason string) and the fixed-width metric table.
std::string report_to_json(const MetricReport& report);
std::string report_table(const MetricReport& report, std::string_view row_label = "corpus");

/// Joins generated responses to the golden corpus by (dialogue_id, turn) and
/// scores them. Throws JoinFailure listing the keys of unmatched
/// generations, EmptyCorpus when the generations list is empty.
MetricReport evaluate(const std::vector<GenerationRecord>& generations,
                      const std::vector<Conversation>& golden,
                      std::optional<double> smooth_epsilon = kBleuSmoothEpsilon);

} // namespace ektc
