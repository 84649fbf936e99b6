#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ektc/corpus.hpp"
#include "ektc/dialogue.hpp"
#include "ektc/llm_client.hpp"
#include "ektc/prompt.hpp"

namespace ektc {

enum class Aspect { Empathy, Consistency, Fluency };

std::string_view aspect_short_name(Aspect aspect); // "Emp." / "Con." / "Flu."
std::string_view aspect_key(Aspect aspect);        // "emp" / "con" / "flu"
std::optional<Aspect> aspect_from_name(std::string_view name);

/// One pairwise comparison. order_flipped presents response_b first; the
/// verdict is always reported in the caller's A/B labels.
struct AbItem {
    std::string item_id;
    Conversation context;
    std::string response_a;
    std::string response_b;
    Aspect aspect = Aspect::Empathy;
    bool order_flipped = false;
};

enum class AbWinner { A, B };

struct AbVerdict {
    AbWinner winner = AbWinner::A;
    std::string raw;
};

PromptTemplate default_ab_template(Aspect aspect);

/// Renders the aspect template with the context and both responses (order
/// per order_flipped), queries the judge once, and extracts the winner: the
/// first standalone uppercase A or B in the reply, mapped back through
/// order_flipped. Throws JudgeUnparseable when no marker is found.
AbVerdict ab_judge(const AbItem& item, ChatClient& judge,
                   const std::string& endpoint = "evaluator",
                   const ChatParams& params = {});

/// The outcome of judging one item, twice when flip agreement is on.
struct AbOutcome {
    std::string item_id;
    Aspect aspect = Aspect::Empathy;
    enum class Result { AWin, BWin, Flagged } result = Result::Flagged;
    bool flipped_agreement = false; // both orders were judged and agreed
    std::string note;               // flag reason when Result::Flagged
};

std::string serialize_ab_outcome(const AbOutcome& outcome);

struct AbOptions {
    bool flip_agreement = true; // judge each item in both orders; wins need agreement
    std::string endpoint = "evaluator";
    ChatParams params{};
    int jobs = 1;
};

/// Judges all items. With flip agreement on (default), every item is judged
/// in the original and flipped order and a win requires the unflipped
/// verdicts to agree; disagreements and unparseable replies are flagged.
std::vector<AbOutcome> run_ab(const std::vector<AbItem>& items, ChatClient& judge,
                              const AbOptions& options = {});

struct AspectTally {
    std::size_t wins_a = 0;
    std::size_t wins_b = 0;
    std::size_t flagged = 0;
    double win_pct = 0.0;  // wins_a over decided verdicts, percent
    double lose_pct = 0.0; // wins_b over decided verdicts, percent
};

struct TallyTable {
    std::map<Aspect, AspectTally> rows;
};

/// Per-aspect win/lose percentages over decided verdicts; wins + losses +
/// flagged always equals the item count.
TallyTable tally(const std::vector<AbOutcome>& outcomes);

/// Win/Lose table, one row per aspect.
std::string render_tally(const TallyTable& table);

/// Builds comparison items by joining two generation sets with the golden
/// corpus on (dialogue_id, turn), drawing `sample` dialogues reproducibly
/// from `seed` (0 = all), one item per joined turn and aspect. Throws
/// EmptyCorpus when nothing joins.
std::vector<AbItem> make_ab_items(const std::vector<GenerationRecord>& a,
                                  const std::vector<GenerationRecord>& b,
                                  const std::vector<Conversation>& golden,
                                  const std::vector<Aspect>& aspects, std::size_t sample,
                                  std::uint64_t seed);

} // namespace ektc
