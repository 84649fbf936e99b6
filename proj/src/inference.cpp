#include "ektc/inference.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include "ektc/errors.hpp"
#include "ektc/log.hpp"

namespace ektc {

namespace {

std::string last_user_text(const Conversation& conv) {
    for (auto it = conv.messages.rbegin(); it != conv.messages.rend(); ++it) {
        if (it->role == Role::User) return it->content;
    }
    return "";
}

// Oldest-first truncation to the character budget, never dropping the
// current user message or anything after it.
std::vector<Message> budgeted_history(const Conversation& conv, std::size_t budget,
                                      bool& truncated) {
    truncated = false;
    if (budget == 0) return conv.messages;
    std::size_t last_user = conv.messages.size();
    for (std::size_t i = conv.messages.size(); i-- > 0;) {
        if (conv.messages[i].role == Role::User) {
            last_user = i;
            break;
        }
    }
    std::size_t begin = 0;
    while (begin < last_user &&
           render_history({conv.messages.begin() + static_cast<std::ptrdiff_t>(begin),
                           conv.messages.end()})
                   .size() > budget) {
        ++begin;
        truncated = true;
    }
    if (truncated)
        log_warn("conversation \"" + conv.id + "\": history truncated to budget, dropped " +
                 std::to_string(begin) + " oldest messages");
    return {conv.messages.begin() + static_cast<std::ptrdiff_t>(begin), conv.messages.end()};
}

std::string render_loop_prompt(const Conversation& conv, const ToolRegistry& registry,
                               const InferencePolicy& policy, bool forced_direct,
                               bool& truncated) {
    Conversation view = conv;
    view.messages = budgeted_history(conv, policy.context_char_budget, truncated);
    std::string prompt = render_prompt(view, registry.specs(), policy.prompt_template);
    if (forced_direct) prompt += "\n" + std::string(forced_direct_instruction());
    return prompt;
}

} // namespace

RespondResult respond(const Conversation& conv, ChatClient& model, const ToolRegistry& registry,
                      const InferencePolicy& policy) {
    auto violations = validate(conv, DialogueShape::OpenTurn);
    if (!violations.empty())
        throw Error("respond: conversation invalid (" + violations.front().rule + " at message " +
                    std::to_string(violations.front().index) + ")");
    bool ends_with_user = false;
    for (auto it = conv.messages.rbegin(); it != conv.messages.rend(); ++it) {
        if (it->role == Role::System) continue;
        ends_with_user = it->role == Role::User;
        break;
    }
    if (!ends_with_user) throw Error("respond: conversation must end with a user message");

    RespondResult result;
    result.conversation = conv;
    int tool_calls = 0;
    bool forced_direct = policy.max_tool_calls_per_turn <= 0;

    for (;;) {
        bool truncated = false;
        std::string prompt =
            render_loop_prompt(result.conversation, registry, policy, forced_direct, truncated);
        result.trace.truncated = result.trace.truncated || truncated;

        std::string raw =
            model.complete(single_user_request(policy.endpoint, std::move(prompt), policy.params));
        ++result.trace.model_queries;

        if (forced_direct) {
            // The budget is spent: whatever comes back is the reply, even if
            // it still looks like an action block.
            std::string text;
            try {
                ModelOutput output = parse_model_output(raw);
                if (output.is_tool_invocation()) {
                    log_warn("model attempted a tool call in forced direct mode; using raw text");
                    text = raw;
                } else {
                    text = output.text();
                }
            } catch (const MalformedToolCall&) {
                text = raw;
            }
            if (text.empty()) text = " ";
            result.response = text;
            result.conversation.messages.push_back(assistant_message(text));
            result.trace.appended.push_back(result.conversation.messages.back());
            break;
        }

        ModelOutput output = ModelOutput::direct_response("");
        try {
            output = parse_model_output(raw);
        } catch (const MalformedToolCall& e) {
            if (policy.on_malformed == InferencePolicy::OnMalformed::Error) throw;
            log_warn(std::string("malformed tool call, falling back to direct mode: ") + e.what());
            forced_direct = true;
            continue;
        }

        if (!output.is_tool_invocation()) {
            std::string text = output.text().empty() ? " " : output.text();
            result.response = text;
            result.conversation.messages.push_back(assistant_message(text));
            result.trace.appended.push_back(result.conversation.messages.back());
            break;
        }

        ToolCallPayload payload = output.call();
        if (!registry.has(payload.name)) {
            if (policy.on_malformed == InferencePolicy::OnMalformed::Error)
                throw UnknownTool("model called unregistered tool \"" + payload.name + "\"");
            log_warn("model called unregistered tool \"" + payload.name +
                     "\", falling back to direct mode");
            forced_direct = true;
            continue;
        }
        payload.arguments["prompt"] =
            policy.tool_arg_source == InferencePolicy::ToolArgSource::FullContext
                ? render_history(result.conversation.messages)
                : last_user_text(result.conversation);

        Observation obs = registry.invoke(payload.name, payload.arguments);
        result.conversation.messages.push_back(function_call_message(payload));
        result.trace.appended.push_back(result.conversation.messages.back());
        result.conversation.messages.push_back(observation_message(obs.rendered));
        result.trace.appended.push_back(result.conversation.messages.back());
        result.trace.tool_used = true;
        ++tool_calls;
        if (tool_calls >= policy.max_tool_calls_per_turn) forced_direct = true;
    }
    return result;
}

namespace {

struct DialogueGenerations {
    bool ok = false;
    std::vector<GenerationRecord> records;
    std::string failure;
};

DialogueGenerations infer_dialogue(const Conversation& conv, ChatClient& model,
                                   const ToolRegistry& registry, const InferencePolicy& policy) {
    DialogueGenerations out;
    try {
        for (std::size_t ordinal = 0;; ++ordinal) {
            Conversation context;
            std::string golden;
            if (!golden_context(conv, ordinal, context, golden)) break;
            RespondResult rr = respond(context, model, registry, policy);
            GenerationRecord rec;
            rec.dialogue_id = conv.id;
            rec.turn = ordinal;
            rec.response = rr.response;
            rec.tool_used = rr.trace.tool_used;
            for (auto it = rr.trace.appended.rbegin(); it != rr.trace.appended.rend(); ++it) {
                if (it->role == Role::Observation) {
                    rec.observation = it->content;
                    break;
                }
            }
            out.records.push_back(std::move(rec));
        }
        out.ok = true;
    } catch (const Error& e) {
        out.failure = e.what();
    }
    return out;
}

} // namespace

BatchResult batch_infer(const std::vector<Conversation>& test_corpus, ChatClient& model,
                        const ToolRegistry& registry, const InferencePolicy& policy, int jobs) {
    if (test_corpus.empty()) throw EmptyCorpus("batch_infer: test corpus is empty");
    for (const Conversation& conv : test_corpus) {
        auto violations = validate(conv);
        if (!violations.empty())
            throw SchemaError("batch_infer: dialogue \"" + conv.id + "\" invalid (" +
                              violations.front().rule + ")");
    }

    std::vector<DialogueGenerations> outputs(test_corpus.size());
    jobs = std::max(1, jobs);
    if (jobs == 1 || test_corpus.size() < 2) {
        for (std::size_t i = 0; i < test_corpus.size(); ++i)
            outputs[i] = infer_dialogue(test_corpus[i], model, registry, policy);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= test_corpus.size()) return;
                outputs[i] = infer_dialogue(test_corpus[i], model, registry, policy);
            }
        };
        std::vector<std::thread> workers;
        for (int t = 0; t < jobs; ++t) workers.emplace_back(worker);
        for (std::thread& t : workers) t.join();
    }

    BatchResult result;
    for (std::size_t i = 0; i < test_corpus.size(); ++i) {
        if (!outputs[i].ok) {
            log_warn("dialogue \"" + test_corpus[i].id + "\" failed: " + outputs[i].failure);
            result.failures.push_back(test_corpus[i].id + ": " + outputs[i].failure);
            continue;
        }
        for (GenerationRecord& rec : outputs[i].records) {
            result.total_turns += 1;
            if (rec.tool_used) result.tool_turns += 1;
            result.generations.push_back(std::move(rec));
        }
    }
    result.tool_use_ratio = result.total_turns > 0 ? static_cast<double>(result.tool_turns) /
                                                         static_cast<double>(result.total_turns)
                                                   : 0.0;
    return result;
}

} // namespace ektc
