#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ektc {

/// Speaker roles of a dialogue trace. Serialization names are the lowercase
/// snake_case forms: user, assistant, function_call, observation, system.
enum class Role { User, Assistant, FunctionCall, Observation, System };

std::string_view role_name(Role role);
std::optional<Role> role_from_name(std::string_view name);

/// A tool invocation as emitted by the model or constructed by the pipeline.
/// `arguments` must contain the key "prompt"; extra keys are preserved and
/// forwarded untouched.
struct ToolCallPayload {
    std::string name;
    std::map<std::string, std::string> arguments;

    bool operator==(const ToolCallPayload&) const = default;
};

struct Message {
    Role role = Role::User;
    std::string content;
    std::optional<ToolCallPayload> tool_call; // present iff role == FunctionCall

    bool operator==(const Message&) const = default;
};

Message user_message(std::string content);
Message assistant_message(std::string content);
Message system_message(std::string content);
Message function_call_message(ToolCallPayload payload);
Message observation_message(std::string content);

/// An ordered dialogue history. The trace grammar (ignoring system messages)
/// is `User ((FunctionCall Observation)* Assistant)` repeated.
struct Conversation {
    std::string id;
    std::optional<std::string> emotion_label;
    std::vector<Message> messages;

    bool operator==(const Conversation&) const = default;
};

/// Parse result of raw model text: either a tool invocation or a direct
/// textual response.
class ModelOutput {
public:
    static ModelOutput tool_invocation(ToolCallPayload call) {
        return ModelOutput(std::move(call));
    }
    static ModelOutput direct_response(std::string text) {
        return ModelOutput(std::move(text));
    }

    bool is_tool_invocation() const {
        return std::holds_alternative<ToolCallPayload>(value_);
    }
    const ToolCallPayload& call() const { return std::get<ToolCallPayload>(value_); }
    const std::string& text() const { return std::get<std::string>(value_); }

    bool operator==(const ModelOutput&) const = default;

private:
    explicit ModelOutput(ToolCallPayload call) : value_(std::move(call)) {}
    explicit ModelOutput(std::string text) : value_(std::move(text)) {}

    std::variant<ToolCallPayload, std::string> value_;
};

/// Parses raw model-generated text. Returns a tool invocation when the text
/// contains an `Action:` line followed by an `Action Input:` payload that
/// parses as a JSON object; otherwise a direct response with the scaffolding
/// stripped. Markers are matched case-insensitively at line starts and may be
/// prefixed by a literal ASSISTANT token. Text after a complete action block
/// is discarded with a warning.
///
/// Throws MalformedToolCall when an Action marker is present but the payload
/// is unparseable or lacks the "prompt" key.
ModelOutput parse_model_output(std::string_view raw);

/// Canonical writer for the action block the parser accepts:
///   Action: <name>
///   Action Input: <arguments as a JSON object>
std::string render_action_block(const ToolCallPayload& payload);

/// One broken conversation invariant. `rule` is a stable identifier,
/// `index` the offending message position.
struct Violation {
    std::string rule;
    std::size_t index = 0;
    std::string detail;

    bool operator==(const Violation&) const = default;
};

/// Which dialogue shapes validate() accepts.
///  - CompleteDialogue: every turn closed by an assistant message.
///  - OpenTurn: additionally accepts a trailing turn still in progress
///    (ends after a user message or an observation).
enum class DialogueShape { CompleteDialogue, OpenTurn };

/// Returns the empty list iff the conversation satisfies all invariants:
/// the first non-system message is a user message, every function_call is
/// immediately followed by exactly one observation, observations only follow
/// function_calls, tool_call payloads appear exactly on function_call
/// messages, and user/assistant/observation contents are non-empty.
std::vector<Violation> validate(const Conversation& conv,
                                DialogueShape shape = DialogueShape::CompleteDialogue);

/// One-record-per-line persistence (JSON Lines), fields `id`, `emotion`
/// (string or null), `messages`. Requires validate(conv) to pass and the
/// conversation to carry no system messages; throws SchemaError otherwise.
std::string serialize_record(const Conversation& conv);

/// Inverse of serialize_record. Throws SchemaError on malformed lines,
/// missing required fields, or unknown role names.
Conversation deserialize_record(std::string_view line);

/// Renders a message history in the trace format models are prompted with:
/// `user:`/`assistant:` labelled lines, action blocks for function calls,
/// and `Observation:` blocks for tool results.
std::string render_history(const std::vector<Message>& messages);

} // namespace ektc
