#include "ektc/datagen.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <random>
#include <thread>

#include "ektc/errors.hpp"
#include "ektc/log.hpp"
#include "json.hpp"

namespace ektc {

namespace {

bool is_word_char(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) != 0;
}

// Lowercased alphabetic words of the reply with their start offsets.
std::vector<std::pair<std::string, std::size_t>> reply_words(std::string_view reply) {
    std::vector<std::pair<std::string, std::size_t>> words;
    std::size_t i = 0;
    while (i < reply.size()) {
        while (i < reply.size() && !is_word_char(reply[i])) ++i;
        std::size_t start = i;
        std::string word;
        while (i < reply.size() && is_word_char(reply[i])) {
            word += static_cast<char>(std::tolower(static_cast<unsigned char>(reply[i])));
            ++i;
        }
        if (!word.empty()) words.emplace_back(std::move(word), start);
    }
    return words;
}

std::optional<bool> first_marker(std::string_view reply, std::string_view positive,
                                 std::string_view negative) {
    for (const auto& [word, offset] : reply_words(reply)) {
        (void)offset;
        if (word == positive) return true;
        if (word == negative) return false;
    }
    return std::nullopt;
}

// Aspect flag: the first standalone yes/no after the first occurrence of the
// aspect keyword; false when the keyword or the marker is missing.
bool aspect_flag(std::string_view reply, std::string_view keyword) {
    auto words = reply_words(reply);
    bool seen = false;
    for (const auto& [word, offset] : words) {
        (void)offset;
        if (!seen) {
            if (word == keyword) seen = true;
            continue;
        }
        if (word == "yes") return true;
        if (word == "no") return false;
    }
    return false;
}

std::string last_user_text(const Conversation& conv) {
    for (auto it = conv.messages.rbegin(); it != conv.messages.rend(); ++it) {
        if (it->role == Role::User) return it->content;
    }
    return "";
}

} // namespace

std::optional<bool> extract_yes_no(std::string_view reply) {
    return first_marker(reply, "yes", "no");
}

std::optional<bool> extract_relevance(std::string_view reply) {
    return first_marker(reply, "relevant", "irrelevant");
}

PromptTemplate default_annotator_template() {
    PromptTemplate tmpl;
    tmpl.text =
        "You label dialogue turns for an empathetic-dialogue assistant that can "
        "call a knowledge tool before replying.\n\n"
        "Annotation task: decide whether calling the tool at this point would "
        "help the assistant understand the speaker and produce the golden "
        "response. Weigh the emotional intensity of the speaker's last "
        "utterance and the context; greetings and small talk do not need the "
        "tool.\n\n"
        "Tool definition: {{tool_name}}: {{tool_description}}\n\n"
        "Dialogue context:\n{{context}}\n\n"
        "Speaker emotion label: {{emotion}}\n\n"
        "Golden response:\n{{golden}}\n\n"
        "Should the assistant call the tool for this turn? Answer yes or no.";
    return tmpl;
}

PromptTemplate default_reflector_template() {
    PromptTemplate tmpl;
    tmpl.text =
        "You review tool outputs for an empathetic-dialogue assistant.\n\n"
        "Relevance judgment task: decide whether the tool output below is "
        "relevant to the golden response. Judge causal consistency, intent "
        "consistency, and emotional consistency; only high relevance counts.\n\n"
        "Tool definition: {{tool_name}}: {{tool_description}}\n\n"
        "Tool output:\n{{observation}}\n\n"
        "Golden response:\n{{golden}}\n\n"
        "Is the tool output relevant to the golden response? Answer relevant "
        "or irrelevant. You may add per-aspect verdicts as \"causal: yes/no\", "
        "\"intent: yes/no\", \"emotional: yes/no\".";
    return tmpl;
}

AnnotationDecision annotate(const Conversation& context, const std::string& emotion,
                            const std::string& golden, const ToolSpec& tool, ChatClient& judge,
                            const std::string& endpoint, const PromptTemplate& tmpl,
                            const ChatParams& params) {
    std::map<std::string, std::string> vars;
    vars["tool_name"] = tool.name;
    vars["tool_description"] = tool.description;
    vars["context"] = render_history(context.messages);
    vars["emotion"] = emotion;
    vars["golden"] = golden;
    std::string reply = judge.complete(single_user_request(endpoint, render_template(tmpl, vars), params));
    auto verdict = extract_yes_no(reply);
    if (!verdict)
        throw JudgeUnparseable("annotator reply has neither yes nor no: \"" + reply + "\"");
    return AnnotationDecision{*verdict, std::move(reply)};
}

ReflectionJudgment reflect(const Observation& observation, const std::string& golden,
                           const ToolSpec& tool, ChatClient& judge, const std::string& endpoint,
                           const PromptTemplate& tmpl, const ChatParams& params) {
    std::map<std::string, std::string> vars;
    vars["tool_name"] = tool.name;
    vars["tool_description"] = tool.description;
    vars["observation"] = observation.rendered;
    vars["golden"] = golden;
    std::string reply = judge.complete(single_user_request(endpoint, render_template(tmpl, vars), params));
    auto verdict = extract_relevance(reply);
    if (!verdict)
        throw JudgeUnparseable("reflector reply has neither relevant nor irrelevant: \"" + reply +
                               "\"");
    ReflectionJudgment judgment;
    judgment.relevant = *verdict;
    judgment.aspects.causal = aspect_flag(reply, "causal");
    judgment.aspects.intent = aspect_flag(reply, "intent");
    judgment.aspects.emotional = aspect_flag(reply, "emotional");
    judgment.rationale = std::move(reply);
    return judgment;
}

CorpusStats compute_stats(const std::vector<Conversation>& corpus) {
    CorpusStats stats;
    stats.dialogues = corpus.size();
    std::size_t dialogues_with_calls = 0;
    for (const Conversation& conv : corpus) {
        EmotionStats& per = stats.per_emotion[conv.emotion_label.value_or("")];
        per.dialogues += 1;
        bool any_call = false;
        // A tool-call turn is an assistant message directly preceded by an
        // observation (closing a function_call/observation pair).
        for (std::size_t i = 0; i < conv.messages.size(); ++i) {
            if (conv.messages[i].role != Role::Assistant) continue;
            stats.assistant_turns += 1;
            per.assistant_turns += 1;
            if (i > 0 && conv.messages[i - 1].role == Role::Observation) {
                stats.tool_call_turns += 1;
                per.tool_call_turns += 1;
                any_call = true;
            }
        }
        if (any_call) ++dialogues_with_calls;
    }
    stats.tool_call_ratio = stats.assistant_turns > 0
                                ? static_cast<double>(stats.tool_call_turns) /
                                      static_cast<double>(stats.assistant_turns)
                                : 0.0;
    stats.dialogue_ratio = stats.dialogues > 0 ? static_cast<double>(dialogues_with_calls) /
                                                     static_cast<double>(stats.dialogues)
                                               : 0.0;
    return stats;
}

std::string stats_to_json(const CorpusStats& stats) {
    nlohmann::json j;
    j["dialogues"] = stats.dialogues;
    j["assistant_turns"] = stats.assistant_turns;
    j["tool_call_turns"] = stats.tool_call_turns;
    j["tool_call_ratio"] = stats.tool_call_ratio;
    j["dialogue_ratio"] = stats.dialogue_ratio;
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [emotion, es] : stats.per_emotion) {
        per[emotion] = {{"dialogues", es.dialogues},
                        {"assistant_turns", es.assistant_turns},
                        {"tool_call_turns", es.tool_call_turns}};
    }
    j["per_emotion"] = std::move(per);
    return j.dump();
}

namespace {

struct DialogueOutput {
    bool ok = false;
    Conversation conversation;
    std::vector<ProvenanceRecord> provenance;
    std::string skip_reason;
};

DialogueOutput build_dialogue(const EdDialogue& dialogue, const ToolRegistry& registry,
                              const std::string& tool_name, const ToolSpec& tool,
                              ChatClient& judge, const DatagenPolicy& policy) {
    DialogueOutput out;
    Conversation conv;
    conv.id = dialogue.id;
    conv.emotion_label = dialogue.emotion;
    std::size_t assistant_ordinal = 0;

    try {
        for (const EdTurn& turn : dialogue.turns) {
            if (turn.speaker == "user") {
                conv.messages.push_back(user_message(turn.text));
                continue;
            }
            const std::string& golden = turn.text;
            ProvenanceRecord prov;
            prov.dialogue_id = dialogue.id;
            prov.turn = assistant_ordinal;

            AnnotationDecision decision;
            try {
                decision = annotate(conv, dialogue.emotion, golden, tool, judge,
                                    policy.judge_endpoint, policy.annotator_template,
                                    policy.judge_params);
            } catch (const JudgeUnparseable& e) {
                log_warn(std::string("annotator unparseable, recording no-call: ") + e.what());
                decision = AnnotationDecision{false, ""};
            }
            prov.annotate = decision.call_tool;

            if (decision.call_tool) {
                std::map<std::string, std::string> args;
                args["prompt"] =
                    policy.full_context ? render_history(conv.messages) : last_user_text(conv);
                Observation obs = registry.invoke(tool_name, args);

                ReflectionJudgment judgment;
                try {
                    judgment = reflect(obs, golden, tool, judge, policy.judge_endpoint,
                                       policy.reflector_template, policy.judge_params);
                } catch (const JudgeUnparseable& e) {
                    log_warn(std::string("reflector unparseable, treating as irrelevant: ") +
                             e.what());
                    judgment.relevant = false;
                }
                prov.reflect = judgment.relevant;

                if (judgment.relevant) {
                    conv.messages.push_back(
                        function_call_message(ToolCallPayload{tool_name, args}));
                    conv.messages.push_back(observation_message(obs.rendered));
                    prov.inserted = true;
                }
            }
            conv.messages.push_back(assistant_message(golden));
            out.provenance.push_back(prov);
            ++assistant_ordinal;
        }
    } catch (const Error& e) {
        out.skip_reason = e.what();
        return out;
    }
    out.ok = true;
    out.conversation = std::move(conv);
    return out;
}

} // namespace

BuildResult build(const std::vector<EdDialogue>& corpus, const ToolRegistry& registry,
                  const std::string& tool_name, ChatClient& judge, const DatagenPolicy& policy) {
    for (const EdDialogue& d : corpus) check_ed_dialogue(d);
    const ToolSpec tool = registry.spec(tool_name);

    std::vector<DialogueOutput> outputs(corpus.size());
    const int jobs = std::max(1, policy.jobs);
    if (jobs == 1 || corpus.size() < 2) {
        for (std::size_t i = 0; i < corpus.size(); ++i)
            outputs[i] = build_dialogue(corpus[i], registry, tool_name, tool, judge, policy);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= corpus.size()) return;
                outputs[i] = build_dialogue(corpus[i], registry, tool_name, tool, judge, policy);
            }
        };
        std::vector<std::thread> workers;
        for (int t = 0; t < jobs; ++t) workers.emplace_back(worker);
        for (std::thread& t : workers) t.join();
    }

    BuildResult result;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        DialogueOutput& out = outputs[i];
        if (!out.ok) {
            log_warn("skipping dialogue \"" + corpus[i].id + "\": " + out.skip_reason);
            result.skipped.push_back(corpus[i].id + ": " + out.skip_reason);
            continue;
        }
        result.provenance.insert(result.provenance.end(), out.provenance.begin(),
                                 out.provenance.end());
        result.corpus.push_back(std::move(out.conversation));
    }
    result.stats = compute_stats(result.corpus);
    return result;
}

std::array<std::vector<std::size_t>, 3> split_indices(std::size_t n,
                                                      const std::array<double, 3>& ratios,
                                                      std::uint64_t seed) {
    if (n == 0) throw EmptyCorpus("split: corpus is empty");
    double sum = ratios[0] + ratios[1] + ratios[2];
    for (double r : ratios) {
        if (r <= 0.0) throw ConfigError("split: ratios must be positive");
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split: ratios must sum to 1");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    // Fisher-Yates with an explicit draw so the partition is reproducible
    // across platforms, not just across runs.
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
        std::swap(order[i], order[j]);
    }

    auto n1 = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[0]));
    auto n2 = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[1]));
    n1 = std::min(n1, n);
    n2 = std::min(n2, n - n1);

    std::array<std::vector<std::size_t>, 3> parts;
    parts[0].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n1));
    parts[1].assign(order.begin() + static_cast<std::ptrdiff_t>(n1),
                    order.begin() + static_cast<std::ptrdiff_t>(n1 + n2));
    parts[2].assign(order.begin() + static_cast<std::ptrdiff_t>(n1 + n2), order.end());
    return parts;
}

std::array<std::vector<Conversation>, 3> split_corpus(const std::vector<Conversation>& corpus,
                                                      const std::array<double, 3>& ratios,
                                                      std::uint64_t seed) {
    auto parts = split_indices(corpus.size(), ratios, seed);
    std::array<std::vector<Conversation>, 3> out;
    for (int p = 0; p < 3; ++p) {
        out[static_cast<std::size_t>(p)].reserve(parts[static_cast<std::size_t>(p)].size());
        for (std::size_t idx : parts[static_cast<std::size_t>(p)])
            out[static_cast<std::size_t>(p)].push_back(corpus[idx]);
    }
    return out;
}

} // namespace ektc
