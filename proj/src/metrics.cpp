#include "ektc/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "ektc/errors.hpp"
#include "json.hpp"

namespace ektc {

namespace {

bool is_punct(char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

// n-gram keyed by its tokens joined with a separator that cannot appear
// inside a token (tokens never contain whitespace).
using NgramCounts = std::map<std::string, std::size_t>;

NgramCounts count_ngrams(const TokenSeq& tokens, int n) {
    NgramCounts counts;
    if (n <= 0 || tokens.size() < static_cast<std::size_t>(n)) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key = tokens[i];
        for (int j = 1; j < n; ++j) {
            key += ' ';
            key += tokens[i + j];
        }
        ++counts[key];
    }
    return counts;
}

std::size_t ngram_total(const TokenSeq& tokens, int n) {
    return tokens.size() >= static_cast<std::size_t>(n) ? tokens.size() - n + 1 : 0;
}

std::size_t clipped_overlap(const NgramCounts& cand, const NgramCounts& ref) {
    std::size_t overlap = 0;
    for (const auto& [gram, count] : cand) {
        auto it = ref.find(gram);
        if (it != ref.end()) overlap += std::min(count, it->second);
    }
    return overlap;
}

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = (a[i - 1] == b[j - 1]) ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double f1(double precision, double recall) {
    double denom = precision + recall;
    return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

double bleu_from_totals(const std::array<std::size_t, 4>& matches,
                        const std::array<std::size_t, 4>& totals, std::size_t cand_len,
                        std::size_t ref_len, int n, std::optional<double> smooth_epsilon) {
    double log_sum = 0.0;
    for (int k = 0; k < n; ++k) {
        double p = totals[static_cast<std::size_t>(k)] > 0
                       ? static_cast<double>(matches[static_cast<std::size_t>(k)]) /
                             static_cast<double>(totals[static_cast<std::size_t>(k)])
                       : 0.0;
        if (p <= 0.0) {
            if (k > 0 && smooth_epsilon) {
                p = *smooth_epsilon;
            } else {
                return 0.0;
            }
        }
        log_sum += std::log(p);
    }
    double score = std::exp(log_sum / n);
    if (cand_len == 0) return 0.0;
    if (cand_len < ref_len)
        score *= std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
    return std::min(score, 1.0);
}

} // namespace

TokenSeq tokenize(std::string_view text) {
    TokenSeq tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i == start) continue;
        std::string_view chunk = text.substr(start, i - start);

        std::size_t lead = 0;
        while (lead < chunk.size() && is_punct(chunk[lead])) ++lead;
        std::size_t trail = chunk.size();
        while (trail > lead && is_punct(chunk[trail - 1])) --trail;

        auto push = [&tokens](std::string_view piece) {
            std::string tok(piece);
            std::transform(tok.begin(), tok.end(), tok.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            tokens.push_back(std::move(tok));
        };
        for (std::size_t p = 0; p < lead; ++p) push(chunk.substr(p, 1));
        if (trail > lead) push(chunk.substr(lead, trail - lead));
        for (std::size_t p = trail; p < chunk.size(); ++p) push(chunk.substr(p, 1));
    }
    return tokens;
}

double bleu(const std::vector<TokenSeq>& candidates, const std::vector<TokenSeq>& references,
            int n, std::optional<double> smooth_epsilon) {
    if (candidates.empty()) throw EmptyCorpus("bleu: no candidate/reference pairs");
    if (candidates.size() != references.size())
        throw LengthMismatch("bleu: " + std::to_string(candidates.size()) + " candidates vs " +
                             std::to_string(references.size()) + " references");
    if (n < 1 || n > 4) throw Error("bleu: order must be in 1..4");

    std::array<std::size_t, 4> matches{}, totals{};
    std::size_t cand_len = 0, ref_len = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        cand_len += candidates[i].size();
        ref_len += references[i].size();
        for (int k = 1; k <= n; ++k) {
            auto cand_counts = count_ngrams(candidates[i], k);
            auto ref_counts = count_ngrams(references[i], k);
            matches[static_cast<std::size_t>(k - 1)] += clipped_overlap(cand_counts, ref_counts);
            totals[static_cast<std::size_t>(k - 1)] += ngram_total(candidates[i], k);
        }
    }
    return bleu_from_totals(matches, totals, cand_len, ref_len, n, smooth_epsilon);
}

double sentence_bleu(const TokenSeq& candidate, const TokenSeq& reference, int n,
                     std::optional<double> smooth_epsilon) {
    return bleu({candidate}, {reference}, n, smooth_epsilon);
}

double rouge(const TokenSeq& candidate, const TokenSeq& reference, RougeVariant variant) {
    if (reference.empty()) throw EmptyReference("rouge: reference has no tokens");
    switch (variant) {
    case RougeVariant::R1:
    case RougeVariant::R2: {
        int n = variant == RougeVariant::R1 ? 1 : 2;
        auto cand_counts = count_ngrams(candidate, n);
        auto ref_counts = count_ngrams(reference, n);
        std::size_t overlap = clipped_overlap(cand_counts, ref_counts);
        std::size_t cand_total = ngram_total(candidate, n);
        std::size_t ref_total = ngram_total(reference, n);
        double precision = cand_total > 0 ? static_cast<double>(overlap) / cand_total : 0.0;
        double recall = ref_total > 0 ? static_cast<double>(overlap) / ref_total : 0.0;
        return f1(precision, recall);
    }
    case RougeVariant::RL: {
        std::size_t lcs = lcs_length(candidate, reference);
        double precision = candidate.empty() ? 0.0 : static_cast<double>(lcs) / candidate.size();
        double recall = static_cast<double>(lcs) / reference.size();
        return f1(precision, recall);
    }
    }
    return 0.0;
}

double rouge_mean(const std::vector<TokenSeq>& candidates,
                  const std::vector<TokenSeq>& references, RougeVariant variant) {
    if (candidates.empty()) throw EmptyCorpus("rouge: no candidate/reference pairs");
    if (candidates.size() != references.size())
        throw LengthMismatch("rouge: list lengths differ");
    double sum = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i)
        sum += rouge(candidates[i], references[i], variant);
    return sum / static_cast<double>(candidates.size());
}

double distinct(const std::vector<TokenSeq>& responses, int n) {
    std::set<std::string> unique;
    std::size_t total = 0;
    for (const TokenSeq& tokens : responses) {
        if (tokens.size() < static_cast<std::size_t>(n)) continue;
        for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
            std::string key = tokens[i];
            for (int j = 1; j < n; ++j) {
                key += ' ';
                key += tokens[i + j];
            }
            unique.insert(std::move(key));
            ++total;
        }
    }
    if (total == 0) throw NoNgrams("distinct: no response has >= n tokens");
    return static_cast<double>(unique.size()) / static_cast<double>(total);
}

MetricReport score_pairs(const std::vector<std::string>& candidates,
                         const std::vector<std::string>& references,
                         std::optional<double> smooth_epsilon) {
    if (candidates.empty()) throw EmptyCorpus("score_pairs: no pairs");
    if (candidates.size() != references.size())
        throw LengthMismatch("score_pairs: list lengths differ");

    std::vector<TokenSeq> cand_tok, ref_tok;
    cand_tok.reserve(candidates.size());
    ref_tok.reserve(references.size());
    for (const std::string& c : candidates) cand_tok.push_back(tokenize(c));
    for (const std::string& r : references) ref_tok.push_back(tokenize(r));

    MetricReport report;
    report.n = candidates.size();
    report.smoothing = smooth_epsilon
                           ? "corpus add-epsilon " + std::to_string(*smooth_epsilon)
                           : "off";
    for (int n = 1; n <= 4; ++n) {
        report.bleu[static_cast<std::size_t>(n - 1)] = bleu(cand_tok, ref_tok, n, smooth_epsilon);
        double sum = 0.0;
        for (std::size_t i = 0; i < cand_tok.size(); ++i)
            sum += sentence_bleu(cand_tok[i], ref_tok[i], n);
        report.bleu_sentence_mean[static_cast<std::size_t>(n - 1)] =
            sum / static_cast<double>(cand_tok.size());
    }
    report.rouge1 = rouge_mean(cand_tok, ref_tok, RougeVariant::R1);
    report.rouge2 = rouge_mean(cand_tok, ref_tok, RougeVariant::R2);
    report.rougeL = rouge_mean(cand_tok, ref_tok, RougeVariant::RL);
    report.distinct1 = distinct(cand_tok, 1);
    report.distinct2 = distinct(cand_tok, 2);
    return report;
}

std::string report_to_json(const MetricReport& report) {
    nlohmann::json j;
    j["bleu"] = report.bleu;
    j["bleu_sentence_mean"] = report.bleu_sentence_mean;
    j["rouge"] = {{"r1", report.rouge1}, {"r2", report.rouge2}, {"rl", report.rougeL}};
    j["distinct"] = {{"d1", report.distinct1}, {"d2", report.distinct2}};
    j["n"] = report.n;
    j["smoothing"] = report.smoothing;
    j["bertscore"] = nullptr;
    j["bertscore_reason"] = "requires pretrained embedding models; not computed";
    return j.dump();
}

MetricReport evaluate(const std::vector<GenerationRecord>& generations,
                      const std::vector<Conversation>& golden,
                      std::optional<double> smooth_epsilon) {
    if (generations.empty()) throw EmptyCorpus("evaluate: no generations");

    std::map<std::pair<std::string, std::size_t>, std::string> golden_by_key;
    for (const Conversation& conv : golden) {
        for (std::size_t ordinal = 0;; ++ordinal) {
            Conversation context;
            std::string golden_text;
            if (!golden_context(conv, ordinal, context, golden_text)) break;
            golden_by_key[{conv.id, ordinal}] = std::move(golden_text);
        }
    }

    std::vector<std::string> candidates, references, missing;
    for (const GenerationRecord& g : generations) {
        auto it = golden_by_key.find({g.dialogue_id, g.turn});
        if (it == golden_by_key.end()) {
            missing.push_back(g.dialogue_id + "#" + std::to_string(g.turn));
            continue;
        }
        candidates.push_back(g.response);
        references.push_back(it->second);
    }
    if (!missing.empty()) {
        std::string keys;
        for (std::size_t i = 0; i < missing.size() && i < 10; ++i) {
            if (i) keys += ", ";
            keys += missing[i];
        }
        if (missing.size() > 10) keys += ", ...";
        throw JoinFailure("evaluate: " + std::to_string(missing.size()) +
                          " generations have no golden turn: " + keys);
    }
    return score_pairs(candidates, references, smooth_epsilon);
}

std::string report_table(const MetricReport& report, std::string_view row_label) {
    char line[256];
    std::string out;
    std::snprintf(line, sizeof(line), "%-12s %7s %7s %7s %7s %7s %7s %7s %7s %7s\n", "",
                  "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "ROU-1", "ROU-2", "ROU-L", "Dist-1",
                  "Dist-2");
    out += line;
    std::snprintf(line, sizeof(line),
                  "%-12.12s %7.4f %7.4f %7.4f %7.4f %7.4f %7.4f %7.4f %7.4f %7.4f\n",
                  std::string(row_label).c_str(), report.bleu[0], report.bleu[1], report.bleu[2],
                  report.bleu[3], report.rouge1, report.rouge2, report.rougeL, report.distinct1,
                  report.distinct2);
    out += line;
    std::snprintf(line, sizeof(line),
                  "%-12s %7.4f %7.4f %7.4f %7.4f   (mean sentence-level BLEU; pairs=%zu)\n",
                  "sent-mean", report.bleu_sentence_mean[0], report.bleu_sentence_mean[1],
                  report.bleu_sentence_mean[2], report.bleu_sentence_mean[3], report.n);
    out += line;
    return out;
}

} // namespace ektc
