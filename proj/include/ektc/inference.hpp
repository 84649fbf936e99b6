#pragma once

#include <string>
#include <vector>

#include "ektc/corpus.hpp"
#include "ektc/dialogue.hpp"
#include "ektc/llm_client.hpp"
#include "ektc/prompt.hpp"
#include "ektc/tool.hpp"

namespace ektc {

/// Behaviour of the tool-calling response loop.
struct InferencePolicy {
    enum class OnMalformed { Fallback, Error };
    enum class ToolArgSource { LastUserUtterance, FullContext };

    int max_tool_calls_per_turn = 1;
    OnMalformed on_malformed = OnMalformed::Fallback;
    ToolArgSource tool_arg_source = ToolArgSource::LastUserUtterance;
    std::size_t context_char_budget = 0; // 0 = unlimited
    std::string endpoint = "policy";
    ChatParams params{};
    PromptTemplate prompt_template = PromptTemplate::react_default();
};

/// What one respond() call appended and spent.
struct TurnTrace {
    std::vector<Message> appended; // function_call/observation pairs + final assistant
    bool tool_used = false;
    int model_queries = 0;
    bool truncated = false; // context budget forced history truncation
};

struct RespondResult {
    std::string response;
    TurnTrace trace;
    Conversation conversation; // input conversation plus the appended messages
};

/// Runs one turn of the inference loop: render the prompt, query the policy
/// model, parse; tool invocations append a function_call + observation pair
/// and re-query; a direct response ends the turn. After
/// max_tool_calls_per_turn calls (or a malformed call under Fallback) the
/// next query carries an appended instruction forcing a direct response,
/// and any reply to it is taken as text. Performs at most
/// max_tool_calls_per_turn + 1 model queries.
///
/// The conversation must be valid and end with a user message.
/// BackendUnavailable from the tool propagates; MalformedToolCall surfaces
/// only under OnMalformed::Error.
RespondResult respond(const Conversation& conv, ChatClient& model, const ToolRegistry& registry,
                      const InferencePolicy& policy);

struct BatchResult {
    std::vector<GenerationRecord> generations;
    std::size_t total_turns = 0;
    std::size_t tool_turns = 0;
    double tool_use_ratio = 0.0;
    std::vector<std::string> failures; // "<dialogue_id>: <reason>", excluded from stats
};

/// Teacher-forced batch inference: one generated response per golden
/// assistant turn, each produced from the preceding golden context (the
/// golden trace of the turn itself is not shown to the model). Dialogues are
/// processed in parallel up to `jobs`; output order is input order. Throws
/// EmptyCorpus on an empty corpus.
BatchResult batch_infer(const std::vector<Conversation>& test_corpus, ChatClient& model,
                        const ToolRegistry& registry, const InferencePolicy& policy,
                        int jobs = 1);

} // namespace ektc
