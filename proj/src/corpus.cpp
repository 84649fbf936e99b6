#include "ektc/corpus.hpp"

#include <fstream>

#include "ektc/errors.hpp"
#include "ektc/log.hpp"
#include "json.hpp"

namespace ektc {

using nlohmann::json;

namespace {

json parse_object(std::string_view line, const char* what) {
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object())
        throw SchemaError(std::string(what) + ": line is not a JSON object");
    return obj;
}

std::string require_string(const json& obj, const char* field, const char* what) {
    if (!obj.contains(field) || !obj[field].is_string())
        throw SchemaError(std::string(what) + ": missing string field \"" + field + "\"");
    return obj[field].get<std::string>();
}

} // namespace

const std::vector<std::string>& ed_emotion_labels() {
    static const std::vector<std::string> labels = {
        "surprised",  "excited",   "annoyed",    "proud",       "angry",     "sad",
        "grateful",   "lonely",    "impressed",  "afraid",      "disgusted", "confident",
        "terrified",  "hopeful",   "anxious",    "disappointed", "joyful",   "prepared",
        "guilty",     "furious",   "nostalgic",  "jealous",     "anticipating", "embarrassed",
        "content",    "devastated", "sentimental", "caring",     "trusting",  "ashamed",
        "apprehensive", "faithful"};
    return labels;
}

void check_ed_dialogue(const EdDialogue& dialogue) {
    if (dialogue.turns.empty())
        throw SchemaError("dialogue \"" + dialogue.id + "\" has no turns");
    bool has_assistant = false;
    for (std::size_t i = 0; i < dialogue.turns.size(); ++i) {
        const std::string& expected = (i % 2 == 0) ? "user" : "assistant";
        if (dialogue.turns[i].speaker != expected)
            throw SchemaError("dialogue \"" + dialogue.id + "\" turn " + std::to_string(i) +
                              ": expected speaker \"" + expected + "\", got \"" +
                              dialogue.turns[i].speaker + "\"");
        if (dialogue.turns[i].speaker == "assistant") has_assistant = true;
    }
    if (!has_assistant)
        throw SchemaError("dialogue \"" + dialogue.id + "\" has no assistant turn");
    const auto& labels = ed_emotion_labels();
    if (std::find(labels.begin(), labels.end(), dialogue.emotion) == labels.end())
        log_warn("dialogue \"" + dialogue.id + "\" carries unknown emotion label \"" +
                 dialogue.emotion + "\"");
}

std::string serialize_ed_record(const EdDialogue& dialogue) {
    json rec;
    rec["id"] = dialogue.id;
    rec["emotion"] = dialogue.emotion;
    json turns = json::array();
    for (const EdTurn& t : dialogue.turns)
        turns.push_back({{"speaker", t.speaker}, {"text", t.text}});
    rec["turns"] = std::move(turns);
    return rec.dump();
}

EdDialogue deserialize_ed_record(std::string_view line) {
    json rec = parse_object(line, "ed record");
    EdDialogue d;
    d.id = require_string(rec, "id", "ed record");
    d.emotion = require_string(rec, "emotion", "ed record");
    if (!rec.contains("turns") || !rec["turns"].is_array())
        throw SchemaError("ed record: missing array field \"turns\"");
    for (const json& jt : rec["turns"]) {
        EdTurn t;
        t.speaker = require_string(jt, "speaker", "ed turn");
        if (t.speaker != "user" && t.speaker != "assistant")
            throw SchemaError("ed turn: unknown speaker \"" + t.speaker + "\"");
        t.text = require_string(jt, "text", "ed turn");
        d.turns.push_back(std::move(t));
    }
    return d;
}

Conversation to_conversation(const EdDialogue& dialogue) {
    Conversation conv;
    conv.id = dialogue.id;
    conv.emotion_label = dialogue.emotion;
    for (const EdTurn& t : dialogue.turns) {
        conv.messages.push_back(t.speaker == "user" ? user_message(t.text)
                                                    : assistant_message(t.text));
    }
    return conv;
}

std::string serialize_generation(const GenerationRecord& record) {
    json rec;
    rec["dialogue_id"] = record.dialogue_id;
    rec["turn"] = record.turn;
    rec["response"] = record.response;
    rec["tool_used"] = record.tool_used;
    rec["observation"] = record.observation ? json(*record.observation) : json(nullptr);
    return rec.dump();
}

GenerationRecord deserialize_generation(std::string_view line) {
    json rec = parse_object(line, "generation record");
    GenerationRecord g;
    g.dialogue_id = require_string(rec, "dialogue_id", "generation record");
    if (!rec.contains("turn") || !rec["turn"].is_number_unsigned())
        throw SchemaError("generation record: missing unsigned field \"turn\"");
    g.turn = rec["turn"].get<std::size_t>();
    g.response = require_string(rec, "response", "generation record");
    if (!rec.contains("tool_used") || !rec["tool_used"].is_boolean())
        throw SchemaError("generation record: missing boolean field \"tool_used\"");
    g.tool_used = rec["tool_used"].get<bool>();
    if (rec.contains("observation") && !rec["observation"].is_null()) {
        if (!rec["observation"].is_string())
            throw SchemaError("generation record: field \"observation\" must be string or null");
        g.observation = rec["observation"].get<std::string>();
    }
    return g;
}

std::string serialize_provenance(const ProvenanceRecord& record) {
    json rec;
    rec["dialogue_id"] = record.dialogue_id;
    rec["turn"] = record.turn;
    rec["annotate"] = record.annotate;
    rec["reflect"] = record.reflect ? json(*record.reflect) : json(nullptr);
    rec["inserted"] = record.inserted;
    return rec.dump();
}

ProvenanceRecord deserialize_provenance(std::string_view line) {
    json rec = parse_object(line, "provenance record");
    ProvenanceRecord p;
    p.dialogue_id = require_string(rec, "dialogue_id", "provenance record");
    if (!rec.contains("turn") || !rec["turn"].is_number_unsigned())
        throw SchemaError("provenance record: missing unsigned field \"turn\"");
    p.turn = rec["turn"].get<std::size_t>();
    if (!rec.contains("annotate") || !rec["annotate"].is_boolean())
        throw SchemaError("provenance record: missing boolean field \"annotate\"");
    p.annotate = rec["annotate"].get<bool>();
    if (rec.contains("reflect") && rec["reflect"].is_boolean())
        p.reflect = rec["reflect"].get<bool>();
    if (!rec.contains("inserted") || !rec["inserted"].is_boolean())
        throw SchemaError("provenance record: missing boolean field \"inserted\"");
    p.inserted = rec["inserted"].get<bool>();
    return p;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    for (const std::string& line : lines) out << line << "\n";
}

namespace {

template <typename T, typename Fn>
std::vector<T> read_records(const std::filesystem::path& path, Fn&& parse) {
    auto lines = read_lines(path);
    std::vector<T> out;
    out.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        try {
            out.push_back(parse(lines[i]));
        } catch (const SchemaError& e) {
            throw SchemaError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

} // namespace

std::vector<Conversation> read_conversation_corpus(const std::filesystem::path& path) {
    return read_records<Conversation>(path,
                                      [](const std::string& l) { return deserialize_record(l); });
}

void write_conversation_corpus(const std::filesystem::path& path,
                               const std::vector<Conversation>& corpus) {
    std::vector<std::string> lines;
    lines.reserve(corpus.size());
    for (const Conversation& c : corpus) lines.push_back(serialize_record(c));
    write_lines(path, lines);
}

std::vector<EdDialogue> read_ed_corpus(const std::filesystem::path& path) {
    return read_records<EdDialogue>(
        path, [](const std::string& l) { return deserialize_ed_record(l); });
}

std::vector<GenerationRecord> read_generations(const std::filesystem::path& path) {
    return read_records<GenerationRecord>(
        path, [](const std::string& l) { return deserialize_generation(l); });
}

void write_generations(const std::filesystem::path& path,
                       const std::vector<GenerationRecord>& records) {
    std::vector<std::string> lines;
    lines.reserve(records.size());
    for (const GenerationRecord& g : records) lines.push_back(serialize_generation(g));
    write_lines(path, lines);
}

std::vector<Conversation> read_any_corpus(const std::filesystem::path& path) {
    return read_records<Conversation>(path, [](const std::string& l) {
        json probe = json::parse(l, nullptr, false);
        if (!probe.is_discarded() && probe.is_object() && probe.contains("turns"))
            return to_conversation(deserialize_ed_record(l));
        return deserialize_record(l);
    });
}

bool golden_context(const Conversation& conv, std::size_t assistant_ordinal,
                    Conversation& context_out, std::string& golden_out) {
    std::size_t ordinal = 0;
    for (std::size_t i = 0; i < conv.messages.size(); ++i) {
        if (conv.messages[i].role != Role::Assistant) continue;
        if (ordinal == assistant_ordinal) {
            std::size_t last_user = i;
            while (last_user > 0 && conv.messages[last_user].role != Role::User) --last_user;
            if (conv.messages[last_user].role != Role::User) return false;
            context_out.id = conv.id;
            context_out.emotion_label = conv.emotion_label;
            context_out.messages.assign(conv.messages.begin(),
                                        conv.messages.begin() +
                                            static_cast<std::ptrdiff_t>(last_user + 1));
            golden_out = conv.messages[i].content;
            return true;
        }
        ++ordinal;
    }
    return false;
}

} // namespace ektc
