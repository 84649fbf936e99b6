#include "ektc/evalharness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <random>
#include <set>
#include <thread>

#include "ektc/errors.hpp"
#include "json.hpp"

namespace ektc {

std::string_view aspect_short_name(Aspect aspect) {
    switch (aspect) {
    case Aspect::Empathy: return "Emp.";
    case Aspect::Consistency: return "Con.";
    case Aspect::Fluency: return "Flu.";
    }
    return "Emp.";
}

std::string_view aspect_key(Aspect aspect) {
    switch (aspect) {
    case Aspect::Empathy: return "emp";
    case Aspect::Consistency: return "con";
    case Aspect::Fluency: return "flu";
    }
    return "emp";
}

std::optional<Aspect> aspect_from_name(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "emp" || lower == "empathy") return Aspect::Empathy;
    if (lower == "con" || lower == "consistency") return Aspect::Consistency;
    if (lower == "flu" || lower == "fluency") return Aspect::Fluency;
    return std::nullopt;
}

namespace {

std::string aspect_instruction(Aspect aspect) {
    switch (aspect) {
    case Aspect::Empathy:
        return "Judge empathy: which response better understands the speaker's "
               "emotions and intentions and replies appropriately?";
    case Aspect::Consistency:
        return "Judge consistency: which response is more concise, clear, and "
               "relevant to the topic of the conversation?";
    case Aspect::Fluency:
        return "Judge fluency: which response reads more like natural, smooth "
               "human expression?";
    }
    return "";
}

} // namespace

PromptTemplate default_ab_template(Aspect aspect) {
    PromptTemplate tmpl;
    tmpl.text = "You compare two candidate replies for the next turn of a dialogue.\n\n" +
                aspect_instruction(aspect) +
                "\n\n"
                "Dialogue context:\n{{context}}\n\n"
                "Response A:\n{{first}}\n\n"
                "Response B:\n{{second}}\n\n"
                "Answer with exactly one letter: A or B.";
    return tmpl;
}

namespace {

// First standalone uppercase A or B; lowercase letters are left alone since
// "a" is an ordinary English word.
std::optional<AbWinner> extract_ab_marker(std::string_view reply) {
    for (std::size_t i = 0; i < reply.size(); ++i) {
        char c = reply[i];
        if (c != 'A' && c != 'B') continue;
        bool left_ok = i == 0 || !std::isalnum(static_cast<unsigned char>(reply[i - 1]));
        bool right_ok =
            i + 1 >= reply.size() || !std::isalnum(static_cast<unsigned char>(reply[i + 1]));
        if (left_ok && right_ok) return c == 'A' ? AbWinner::A : AbWinner::B;
    }
    return std::nullopt;
}

} // namespace

AbVerdict ab_judge(const AbItem& item, ChatClient& judge, const std::string& endpoint,
                   const ChatParams& params) {
    std::map<std::string, std::string> vars;
    vars["context"] = render_history(item.context.messages);
    vars["first"] = item.order_flipped ? item.response_b : item.response_a;
    vars["second"] = item.order_flipped ? item.response_a : item.response_b;
    std::string reply = judge.complete(
        single_user_request(endpoint, render_template(default_ab_template(item.aspect), vars), params));
    auto marker = extract_ab_marker(reply);
    if (!marker)
        throw JudgeUnparseable("judge reply has no standalone A or B: \"" + reply + "\"");
    // The marker names the presented position; map back to caller labels.
    AbWinner winner = *marker;
    if (item.order_flipped) winner = winner == AbWinner::A ? AbWinner::B : AbWinner::A;
    return AbVerdict{winner, std::move(reply)};
}

std::string serialize_ab_outcome(const AbOutcome& outcome) {
    nlohmann::json j;
    j["item_id"] = outcome.item_id;
    j["aspect"] = std::string(aspect_key(outcome.aspect));
    switch (outcome.result) {
    case AbOutcome::Result::AWin: j["winner"] = "A"; break;
    case AbOutcome::Result::BWin: j["winner"] = "B"; break;
    case AbOutcome::Result::Flagged: j["winner"] = nullptr; break;
    }
    j["flipped_agreement"] = outcome.flipped_agreement;
    if (!outcome.note.empty()) j["note"] = outcome.note;
    return j.dump();
}

namespace {

AbOutcome judge_item(const AbItem& item, ChatClient& judge, const AbOptions& options) {
    AbOutcome outcome;
    outcome.item_id = item.item_id;
    outcome.aspect = item.aspect;

    std::optional<AbWinner> first;
    try {
        first = ab_judge(item, judge, options.endpoint, options.params).winner;
    } catch (const JudgeUnparseable&) {
        outcome.note = "unparseable";
        return outcome;
    }

    if (!options.flip_agreement) {
        outcome.result = *first == AbWinner::A ? AbOutcome::Result::AWin : AbOutcome::Result::BWin;
        return outcome;
    }

    AbItem flipped = item;
    flipped.order_flipped = !item.order_flipped;
    std::optional<AbWinner> second;
    try {
        second = ab_judge(flipped, judge, options.endpoint, options.params).winner;
    } catch (const JudgeUnparseable&) {
        outcome.note = "unparseable";
        return outcome;
    }

    if (*first != *second) {
        outcome.note = "position_disagreement";
        return outcome;
    }
    outcome.flipped_agreement = true;
    outcome.result = *first == AbWinner::A ? AbOutcome::Result::AWin : AbOutcome::Result::BWin;
    return outcome;
}

} // namespace

std::vector<AbOutcome> run_ab(const std::vector<AbItem>& items, ChatClient& judge,
                              const AbOptions& options) {
    std::vector<AbOutcome> outcomes(items.size());
    const int jobs = std::max(1, options.jobs);
    if (jobs == 1 || items.size() < 2) {
        for (std::size_t i = 0; i < items.size(); ++i)
            outcomes[i] = judge_item(items[i], judge, options);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= items.size()) return;
                outcomes[i] = judge_item(items[i], judge, options);
            }
        };
        std::vector<std::thread> workers;
        for (int t = 0; t < jobs; ++t) workers.emplace_back(worker);
        for (std::thread& t : workers) t.join();
    }
    return outcomes;
}

TallyTable tally(const std::vector<AbOutcome>& outcomes) {
    TallyTable table;
    for (const AbOutcome& o : outcomes) {
        AspectTally& row = table.rows[o.aspect];
        switch (o.result) {
        case AbOutcome::Result::AWin: ++row.wins_a; break;
        case AbOutcome::Result::BWin: ++row.wins_b; break;
        case AbOutcome::Result::Flagged: ++row.flagged; break;
        }
    }
    for (auto& [aspect, row] : table.rows) {
        (void)aspect;
        std::size_t decided = row.wins_a + row.wins_b;
        if (decided > 0) {
            row.win_pct = 100.0 * static_cast<double>(row.wins_a) / static_cast<double>(decided);
            row.lose_pct = 100.0 * static_cast<double>(row.wins_b) / static_cast<double>(decided);
        }
    }
    return table;
}

std::string render_tally(const TallyTable& table) {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-6s %8s %8s %8s %8s %9s\n", "Aspect", "Win", "Lose",
                  "(wins)", "(losses)", "(flagged)");
    out += line;
    for (const auto& [aspect, row] : table.rows) {
        std::size_t decided = row.wins_a + row.wins_b;
        if (decided == 0) {
            std::snprintf(line, sizeof(line), "%-6s %8s %8s %8zu %8zu %9zu  (0 evaluated)\n",
                          std::string(aspect_short_name(aspect)).c_str(), "-", "-", row.wins_a,
                          row.wins_b, row.flagged);
        } else {
            std::snprintf(line, sizeof(line), "%-6s %7.1f%% %7.1f%% %8zu %8zu %9zu\n",
                          std::string(aspect_short_name(aspect)).c_str(), row.win_pct,
                          row.lose_pct, row.wins_a, row.wins_b, row.flagged);
        }
        out += line;
    }
    return out;
}

std::vector<AbItem> make_ab_items(const std::vector<GenerationRecord>& a,
                                  const std::vector<GenerationRecord>& b,
                                  const std::vector<Conversation>& golden,
                                  const std::vector<Aspect>& aspects, std::size_t sample,
                                  std::uint64_t seed) {
    std::map<std::pair<std::string, std::size_t>, const GenerationRecord*> a_by_key, b_by_key;
    for (const GenerationRecord& g : a) a_by_key[{g.dialogue_id, g.turn}] = &g;
    for (const GenerationRecord& g : b) b_by_key[{g.dialogue_id, g.turn}] = &g;

    // Joined turns per golden dialogue, in corpus order.
    struct Joined {
        const Conversation* conv;
        std::vector<std::size_t> turns;
    };
    std::vector<Joined> joined;
    for (const Conversation& conv : golden) {
        Joined j{&conv, {}};
        for (std::size_t ordinal = 0;; ++ordinal) {
            Conversation context;
            std::string golden_text;
            if (!golden_context(conv, ordinal, context, golden_text)) break;
            if (a_by_key.count({conv.id, ordinal}) && b_by_key.count({conv.id, ordinal}))
                j.turns.push_back(ordinal);
        }
        if (!j.turns.empty()) joined.push_back(std::move(j));
    }
    if (joined.empty()) throw EmptyCorpus("eval ab: no (dialogue, turn) joins all three inputs");

    if (sample > 0 && sample < joined.size()) {
        std::mt19937_64 rng(seed);
        for (std::size_t i = 0; i + 1 < joined.size(); ++i) {
            std::size_t j = i + static_cast<std::size_t>(rng() % (joined.size() - i));
            std::swap(joined[i], joined[j]);
        }
        joined.resize(sample);
    }

    std::vector<AbItem> items;
    for (const Joined& j : joined) {
        for (std::size_t ordinal : j.turns) {
            Conversation context;
            std::string golden_text;
            golden_context(*j.conv, ordinal, context, golden_text);
            for (Aspect aspect : aspects) {
                AbItem item;
                item.item_id = j.conv->id + "#" + std::to_string(ordinal);
                item.context = context;
                item.response_a = a_by_key.at({j.conv->id, ordinal})->response;
                item.response_b = b_by_key.at({j.conv->id, ordinal})->response;
                item.aspect = aspect;
                items.push_back(std::move(item));
            }
        }
    }
    return items;
}

} // namespace ektc
