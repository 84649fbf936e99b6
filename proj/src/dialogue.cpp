#include "ektc/dialogue.hpp"

#include <algorithm>
#include <cctype>

#include "ektc/errors.hpp"
#include "ektc/log.hpp"
#include "json.hpp"

namespace ektc {

namespace {

using nlohmann::json;

bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    }
    return true;
}

// Matches `marker` case-insensitively at the start of `s` followed by a
// colon, tolerating internal whitespace before the colon. Returns the
// position just past the colon, or npos.
std::size_t match_marker(std::string_view s, std::string_view marker) {
    std::size_t i = 0;
    while (i < s.size() && is_space(s[i])) ++i;
    if (s.size() - i < marker.size()) return std::string_view::npos;
    if (!iequals(s.substr(i, marker.size()), marker)) return std::string_view::npos;
    i += marker.size();
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    if (i >= s.size() || s[i] != ':') return std::string_view::npos;
    return i + 1;
}

// Strips an optional leading ASSISTANT token (with optional colon), the form
// some fine-tuned models prepend to their action lines.
std::string_view strip_assistant_prefix(std::string_view s) {
    std::string_view t = s;
    while (!t.empty() && is_space(t.front())) t.remove_prefix(1);
    constexpr std::string_view kTag = "assistant";
    if (t.size() >= kTag.size() && iequals(t.substr(0, kTag.size()), kTag)) {
        std::string_view rest = t.substr(kTag.size());
        if (!rest.empty() && (rest.front() == ':' || is_space(rest.front()))) {
            if (rest.front() == ':') rest.remove_prefix(1);
            return rest;
        }
    }
    return s;
}

struct Line {
    std::size_t begin; // offset into raw
    std::size_t end;   // one past last char, excluding the newline
};

std::vector<Line> split_lines(std::string_view raw) {
    std::vector<Line> lines;
    std::size_t pos = 0;
    while (pos <= raw.size()) {
        std::size_t nl = raw.find('\n', pos);
        if (nl == std::string_view::npos) {
            lines.push_back({pos, raw.size()});
            break;
        }
        lines.push_back({pos, nl});
        pos = nl + 1;
    }
    return lines;
}

// Extracts the first balanced JSON object starting at the first '{' in
// `text`, honouring string literals and escapes. Returns the object slice
// and the offset just past it, or nullopt when no balanced object exists.
std::optional<std::pair<std::string_view, std::size_t>> first_json_object(std::string_view text) {
    std::size_t start = text.find('{');
    if (start == std::string_view::npos) return std::nullopt;
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            --depth;
            if (depth == 0) return std::make_pair(text.substr(start, i - start + 1), i + 1);
        }
    }
    return std::nullopt;
}

std::map<std::string, std::string> arguments_from_json(const json& obj) {
    std::map<std::string, std::string> args;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (it.value().is_string()) {
            args[it.key()] = it.value().get<std::string>();
        } else {
            // Tolerant reader: non-string values are kept in their compact
            // JSON spelling.
            args[it.key()] = it.value().dump();
        }
    }
    return args;
}

json arguments_to_json(const std::map<std::string, std::string>& args) {
    json obj = json::object();
    for (const auto& [k, v] : args) obj[k] = v;
    return obj;
}

std::string strip_scaffolding(std::string_view raw) {
    std::string_view t = trim(raw);
    for (std::string_view label : {"assistant", "response", "answer"}) {
        if (t.size() > label.size() && iequals(t.substr(0, label.size()), label) &&
            t[label.size()] == ':') {
            t = trim(t.substr(label.size() + 1));
            break;
        }
    }
    return std::string(t);
}

} // namespace

std::string_view role_name(Role role) {
    switch (role) {
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    case Role::FunctionCall: return "function_call";
    case Role::Observation: return "observation";
    case Role::System: return "system";
    }
    return "user";
}

std::optional<Role> role_from_name(std::string_view name) {
    if (name == "user") return Role::User;
    if (name == "assistant") return Role::Assistant;
    if (name == "function_call") return Role::FunctionCall;
    if (name == "observation") return Role::Observation;
    if (name == "system") return Role::System;
    return std::nullopt;
}

Message user_message(std::string content) {
    return Message{Role::User, std::move(content), std::nullopt};
}
Message assistant_message(std::string content) {
    return Message{Role::Assistant, std::move(content), std::nullopt};
}
Message system_message(std::string content) {
    return Message{Role::System, std::move(content), std::nullopt};
}
Message function_call_message(ToolCallPayload payload) {
    return Message{Role::FunctionCall, "", std::move(payload)};
}
Message observation_message(std::string content) {
    return Message{Role::Observation, std::move(content), std::nullopt};
}

ModelOutput parse_model_output(std::string_view raw) {
    const auto lines = split_lines(raw);
    for (std::size_t li = 0; li < lines.size(); ++li) {
        std::string_view line = raw.substr(lines[li].begin, lines[li].end - lines[li].begin);
        std::string_view body = strip_assistant_prefix(line);
        std::size_t after = match_marker(body, "action");
        if (after == std::string_view::npos) continue;

        // Found the Action marker. The tool name runs to an inline
        // `Action Input:` marker or to the end of the line.
        std::string_view rest = body.substr(after);
        std::string name;
        std::string_view payload_text;
        std::size_t inline_input = std::string_view::npos;
        for (std::size_t p = 0; p + 5 < rest.size(); ++p) {
            if (iequals(rest.substr(p, 6), "action")) {
                std::size_t q = match_marker(rest.substr(p), "action input");
                if (q != std::string_view::npos) {
                    inline_input = p;
                    payload_text = raw.substr(
                        lines[li].begin + (body.data() - line.data()) + after + p + q,
                        raw.size());
                    break;
                }
            }
        }
        if (inline_input != std::string_view::npos) {
            name = std::string(trim(rest.substr(0, inline_input)));
        } else {
            name = std::string(trim(rest));
            // Look for the Action Input marker on a later line.
            std::size_t payload_start = std::string_view::npos;
            for (std::size_t lj = li + 1; lj < lines.size(); ++lj) {
                std::string_view next =
                    raw.substr(lines[lj].begin, lines[lj].end - lines[lj].begin);
                std::string_view nbody = strip_assistant_prefix(next);
                std::size_t q = match_marker(nbody, "action input");
                if (q != std::string_view::npos) {
                    payload_start = lines[lj].begin + (nbody.data() - next.data()) + q;
                    break;
                }
                if (!trim(next).empty()) break; // non-blank line before the payload
            }
            if (payload_start == std::string_view::npos)
                throw MalformedToolCall("Action marker without an Action Input payload");
            payload_text = raw.substr(payload_start);
        }

        if (name.empty()) throw MalformedToolCall("Action marker without a tool name");

        auto obj_slice = first_json_object(payload_text);
        if (!obj_slice) throw MalformedToolCall("Action Input payload is not a JSON object");
        json payload = json::parse(obj_slice->first, nullptr, false);
        if (payload.is_discarded() || !payload.is_object())
            throw MalformedToolCall("Action Input payload is not a JSON object");
        auto args = arguments_from_json(payload);
        if (args.find("prompt") == args.end())
            throw MalformedToolCall("Action Input payload lacks the required \"prompt\" key");

        std::string_view tail = trim(payload_text.substr(obj_slice->second));
        if (!tail.empty())
            log_warn("discarding trailing text after action block: \"" +
                     std::string(tail.substr(0, 40)) + (tail.size() > 40 ? "...\"" : "\""));

        return ModelOutput::tool_invocation(ToolCallPayload{std::move(name), std::move(args)});
    }
    return ModelOutput::direct_response(strip_scaffolding(raw));
}

std::string render_action_block(const ToolCallPayload& payload) {
    return "Action: " + payload.name + "\nAction Input: " +
           arguments_to_json(payload.arguments).dump();
}

std::vector<Violation> validate(const Conversation& conv, DialogueShape shape) {
    std::vector<Violation> out;

    // Content and payload rules, independent of the grammar walk.
    for (std::size_t i = 0; i < conv.messages.size(); ++i) {
        const Message& m = conv.messages[i];
        if (m.role == Role::FunctionCall && !m.tool_call)
            out.push_back({"function_call_missing_payload", i, "function_call without tool_call"});
        if (m.role != Role::FunctionCall && m.tool_call)
            out.push_back({"tool_call_on_non_function_call", i,
                           std::string("tool_call on role ") + std::string(role_name(m.role))});
        if ((m.role == Role::User || m.role == Role::Assistant || m.role == Role::Observation) &&
            m.content.empty())
            out.push_back({"empty_content", i,
                           std::string(role_name(m.role)) + " message with empty content"});
    }

    // Grammar walk over non-system messages, recovering after each violation
    // so one broken message yields one violation.
    enum State { ExpectUser, ExpectCallOrAssistant, ExpectObservation };
    State state = ExpectUser;
    std::size_t open_call_index = 0;
    Role prev = Role::System;
    std::size_t non_system = 0;
    std::size_t last_index = 0;
    Role last_role = Role::System;

    for (std::size_t i = 0; i < conv.messages.size(); ++i) {
        Role r = conv.messages[i].role;
        if (r == Role::System) continue;
        ++non_system;
        last_index = i;
        last_role = r;

        bool reprocess = true;
        while (reprocess) {
            reprocess = false;
            switch (state) {
            case ExpectUser:
                if (r == Role::User) {
                    state = ExpectCallOrAssistant;
                } else if (non_system == 1) {
                    out.push_back({"first_message_not_user", i,
                                   std::string("dialogue opens with ") +
                                       std::string(role_name(r))});
                    // Recover as if a user turn had opened.
                    state = ExpectCallOrAssistant;
                    reprocess = true;
                } else if (r == Role::Observation) {
                    out.push_back({"observation_without_function_call", i, ""});
                } else if (r == Role::FunctionCall) {
                    out.push_back({"function_call_outside_turn", i,
                                   "function_call before any user message of the turn"});
                } else { // Assistant
                    out.push_back({"assistant_without_user", i, ""});
                }
                break;
            case ExpectCallOrAssistant:
                if (r == Role::FunctionCall) {
                    state = ExpectObservation;
                    open_call_index = i;
                } else if (r == Role::Assistant) {
                    state = ExpectUser;
                } else if (r == Role::Observation) {
                    out.push_back({"observation_without_function_call", i, ""});
                } else { // User
                    out.push_back({prev == Role::Observation ? "observation_followed_by_user"
                                                             : "user_after_user",
                                   i, ""});
                }
                break;
            case ExpectObservation:
                if (r == Role::Observation) {
                    state = ExpectCallOrAssistant;
                } else {
                    out.push_back({"function_call_without_observation", open_call_index, ""});
                    state = ExpectCallOrAssistant;
                    reprocess = true;
                }
                break;
            }
        }
        prev = r;
    }

    if (non_system == 0) {
        out.push_back({"empty_conversation", 0, "no non-system messages"});
        return out;
    }
    if (state == ExpectObservation) {
        out.push_back({"function_call_without_observation", open_call_index,
                       "dialogue ends on an unanswered function_call"});
    } else if (state == ExpectCallOrAssistant && shape == DialogueShape::CompleteDialogue) {
        out.push_back({"unterminated_turn", last_index,
                       std::string("dialogue ends on ") + std::string(role_name(last_role))});
    }
    return out;
}

std::string serialize_record(const Conversation& conv) {
    for (std::size_t i = 0; i < conv.messages.size(); ++i) {
        if (conv.messages[i].role == Role::System)
            throw SchemaError("system messages are not persisted (message " +
                              std::to_string(i) + ")");
    }
    auto violations = validate(conv);
    if (!violations.empty())
        throw SchemaError("conversation violates trace invariants: " + violations.front().rule +
                          " at message " + std::to_string(violations.front().index));

    json rec = json::object();
    rec["id"] = conv.id;
    rec["emotion"] = conv.emotion_label ? json(*conv.emotion_label) : json(nullptr);
    json msgs = json::array();
    for (const Message& m : conv.messages) {
        json jm = json::object();
        jm["role"] = std::string(role_name(m.role));
        jm["content"] = m.content;
        if (m.tool_call) {
            jm["tool_call"] = {{"name", m.tool_call->name},
                               {"arguments", arguments_to_json(m.tool_call->arguments)}};
        }
        msgs.push_back(std::move(jm));
    }
    rec["messages"] = std::move(msgs);
    return rec.dump();
}

Conversation deserialize_record(std::string_view line) {
    if (trim(line).empty()) throw SchemaError("empty record line");
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) throw SchemaError("record line is not a JSON object");
    if (!rec.contains("id") || !rec["id"].is_string()) throw SchemaError("record lacks string field \"id\"");
    if (!rec.contains("messages") || !rec["messages"].is_array())
        throw SchemaError("record lacks array field \"messages\"");

    Conversation conv;
    conv.id = rec["id"].get<std::string>();
    if (rec.contains("emotion") && !rec["emotion"].is_null()) {
        if (!rec["emotion"].is_string()) throw SchemaError("field \"emotion\" must be string or null");
        conv.emotion_label = rec["emotion"].get<std::string>();
    }
    for (const json& jm : rec["messages"]) {
        if (!jm.is_object() || !jm.contains("role") || !jm["role"].is_string())
            throw SchemaError("message lacks string field \"role\"");
        auto role = role_from_name(jm["role"].get<std::string>());
        if (!role) throw SchemaError("unknown role name \"" + jm["role"].get<std::string>() + "\"");
        Message m;
        m.role = *role;
        if (!jm.contains("content") || !jm["content"].is_string())
            throw SchemaError("message lacks string field \"content\"");
        m.content = jm["content"].get<std::string>();
        if (jm.contains("tool_call")) {
            const json& tc = jm["tool_call"];
            if (!tc.is_object() || !tc.contains("name") || !tc["name"].is_string() ||
                !tc.contains("arguments") || !tc["arguments"].is_object())
                throw SchemaError("malformed tool_call object");
            ToolCallPayload payload;
            payload.name = tc["name"].get<std::string>();
            payload.arguments = arguments_from_json(tc["arguments"]);
            m.tool_call = std::move(payload);
        }
        conv.messages.push_back(std::move(m));
    }
    return conv;
}

std::string render_history(const std::vector<Message>& messages) {
    std::string out;
    for (const Message& m : messages) {
        if (!out.empty()) out += "\n";
        switch (m.role) {
        case Role::FunctionCall:
            out += m.tool_call ? render_action_block(*m.tool_call) : "Action:";
            break;
        case Role::Observation:
            out += "Observation: " + m.content;
            break;
        default:
            out += std::string(role_name(m.role)) + ": " + m.content;
            break;
        }
    }
    return out;
}

} // namespace ektc
