#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ektc/corpus.hpp"
#include "ektc/dialogue.hpp"
#include "ektc/llm_client.hpp"
#include "ektc/prompt.hpp"
#include "ektc/tool.hpp"

namespace ektc {

/// The annotator gate's verdict for one assistant turn.
struct AnnotationDecision {
    bool call_tool = false;
    std::string rationale; // the judge's raw reply

    bool operator==(const AnnotationDecision&) const = default;
};

/// The reflector gate's verdict on a tool observation.
struct ReflectionJudgment {
    bool relevant = false;
    struct Aspects {
        bool causal = false;
        bool intent = false;
        bool emotional = false;
        bool operator==(const Aspects&) const = default;
    } aspects;
    std::string rationale;

    bool operator==(const ReflectionJudgment&) const = default;
};

struct EmotionStats {
    std::size_t dialogues = 0;
    std::size_t assistant_turns = 0;
    std::size_t tool_call_turns = 0;

    bool operator==(const EmotionStats&) const = default;
};

/// Corpus-level tool-call statistics. tool_call_ratio is over assistant
/// turns; dialogue_ratio (dialogues containing at least one call) is also
/// reported since the source of the headline rate is ambiguous between the
/// two denominators.
struct CorpusStats {
    std::size_t dialogues = 0;
    std::size_t assistant_turns = 0;
    std::size_t tool_call_turns = 0;
    double tool_call_ratio = 0.0;
    double dialogue_ratio = 0.0;
    std::map<std::string, EmotionStats> per_emotion;

    bool operator==(const CorpusStats&) const = default;
};

CorpusStats compute_stats(const std::vector<Conversation>& corpus);
std::string stats_to_json(const CorpusStats& stats);

/// Decision extraction from judge replies: first case-insensitive standalone
/// occurrence of the marker words, nullopt when neither is found.
std::optional<bool> extract_yes_no(std::string_view reply);
std::optional<bool> extract_relevance(std::string_view reply);

PromptTemplate default_annotator_template();
PromptTemplate default_reflector_template();

/// Asks the judge whether this turn warrants a tool call. The prompt carries
/// the task definition, the tool definition, the dialogue context, the
/// emotion label, and the golden response. Throws JudgeUnparseable when the
/// reply contains neither a yes nor a no marker; callers record such turns
/// as no-call.
AnnotationDecision annotate(const Conversation& context, const std::string& emotion,
                            const std::string& golden, const ToolSpec& tool, ChatClient& judge,
                            const std::string& endpoint = "judge",
                            const PromptTemplate& tmpl = default_annotator_template(),
                            const ChatParams& params = {});

/// Asks the judge whether the observation is relevant to the golden
/// response (causal, intent, and emotional consistency). Throws
/// JudgeUnparseable when no relevant/irrelevant marker is found; callers
/// treat such turns as irrelevant.
ReflectionJudgment reflect(const Observation& observation, const std::string& golden,
                           const ToolSpec& tool, ChatClient& judge,
                           const std::string& endpoint = "judge",
                           const PromptTemplate& tmpl = default_reflector_template(),
                           const ChatParams& params = {});

struct DatagenPolicy {
    bool full_context = false; // tool prompt: last user utterance vs serialized history
    std::string judge_endpoint = "judge";
    ChatParams judge_params{};
    PromptTemplate annotator_template = default_annotator_template();
    PromptTemplate reflector_template = default_reflector_template();
    int jobs = 1;
};

struct BuildResult {
    std::vector<Conversation> corpus;
    CorpusStats stats;
    std::vector<ProvenanceRecord> provenance;
    std::vector<std::string> skipped; // "<dialogue_id>: <reason>"
};

/// Runs the two-gate construction over an ED corpus: per assistant turn,
/// annotate; when the annotator approves, invoke the tool and reflect; the
/// function_call + observation pair is inserted before the golden response
/// iff both gates pass. Dialogues hitting backend failures are skipped
/// whole. Output order is input order regardless of `policy.jobs`.
BuildResult build(const std::vector<EdDialogue>& corpus, const ToolRegistry& registry,
                  const std::string& tool_name, ChatClient& judge, const DatagenPolicy& policy);

/// Deterministic seeded partition of n records into three parts whose sizes
/// match the ratios to within one record. Ratios must be positive and sum
/// to 1 within 1e-9. Throws EmptyCorpus when n is zero.
std::array<std::vector<std::size_t>, 3> split_indices(std::size_t n,
                                                      const std::array<double, 3>& ratios,
                                                      std::uint64_t seed);

std::array<std::vector<Conversation>, 3> split_corpus(const std::vector<Conversation>& corpus,
                                                      const std::array<double, 3>& ratios,
                                                      std::uint64_t seed);

} // namespace ektc
