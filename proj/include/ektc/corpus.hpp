#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ektc/dialogue.hpp"

namespace ektc {

/// One source dialogue in ED format: alternating user/assistant turns, the
/// assistant turns being the golden responses.
struct EdTurn {
    std::string speaker; // "user" or "assistant"
    std::string text;

    bool operator==(const EdTurn&) const = default;
};

struct EdDialogue {
    std::string id;
    std::string emotion;
    std::vector<EdTurn> turns;

    bool operator==(const EdDialogue&) const = default;
};

/// The 32 emotion labels of the source corpus; unknown labels are accepted
/// with a warning.
const std::vector<std::string>& ed_emotion_labels();

/// Throws SchemaError unless turns alternate user/assistant starting with
/// user and contain at least one assistant turn.
void check_ed_dialogue(const EdDialogue& dialogue);

std::string serialize_ed_record(const EdDialogue& dialogue);
EdDialogue deserialize_ed_record(std::string_view line);

/// Converts an ED dialogue to a plain conversation (no tool traces).
Conversation to_conversation(const EdDialogue& dialogue);

/// One generated response, joinable to its golden assistant turn by
/// (dialogue_id, turn) where turn is the 0-based assistant-turn ordinal.
struct GenerationRecord {
    std::string dialogue_id;
    std::size_t turn = 0;
    std::string response;
    bool tool_used = false;
    std::optional<std::string> observation;

    bool operator==(const GenerationRecord&) const = default;
};

std::string serialize_generation(const GenerationRecord& record);
GenerationRecord deserialize_generation(std::string_view line);

/// One datagen gate decision, appended per assistant turn.
struct ProvenanceRecord {
    std::string dialogue_id;
    std::size_t turn = 0;
    bool annotate = false;
    std::optional<bool> reflect; // absent when the annotator gate said no
    bool inserted = false;

    bool operator==(const ProvenanceRecord&) const = default;
};

std::string serialize_provenance(const ProvenanceRecord& record);
ProvenanceRecord deserialize_provenance(std::string_view line);

// Line-delimited file helpers. Readers throw SchemaError with the offending
// line number prepended; writers emit one record per line with trailing
// newline.
std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);

std::vector<Conversation> read_conversation_corpus(const std::filesystem::path& path);
void write_conversation_corpus(const std::filesystem::path& path,
                               const std::vector<Conversation>& corpus);
std::vector<EdDialogue> read_ed_corpus(const std::filesystem::path& path);
std::vector<GenerationRecord> read_generations(const std::filesystem::path& path);
void write_generations(const std::filesystem::path& path,
                       const std::vector<GenerationRecord>& records);

/// Parses a corpus file whose records are either ED dialogues (field
/// `turns`) or conversations (field `messages`); ED records are converted.
std::vector<Conversation> read_any_corpus(const std::filesystem::path& path);

/// The golden context for the given assistant turn (0-based ordinal over
/// assistant messages): all messages up to and including the user message
/// that opens that turn, plus the golden response text. Returns false when
/// the conversation has no such turn.
bool golden_context(const Conversation& conv, std::size_t assistant_ordinal,
                    Conversation& context_out, std::string& golden_out);

} // namespace ektc
