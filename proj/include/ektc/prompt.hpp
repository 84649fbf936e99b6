#pragma once

#include <map>
#include <string>
#include <vector>

#include "ektc/dialogue.hpp"
#include "ektc/tool.hpp"

namespace ektc {

/// A text template with `{{placeholder}}` variables. Placeholder names are
/// identifiers ([A-Za-z_][A-Za-z0-9_]*); anything else between double braces
/// is left untouched, so JSON examples survive verbatim.
struct PromptTemplate {
    std::string text;

    /// The tool-learning template used to prompt the policy model: task
    /// instruction, tool block ({{tool_block}}), serialized history
    /// ({{history}}).
    static PromptTemplate react_default();
};

/// Substitutes {{name}} placeholders. Throws UnknownPlaceholder when the
/// template references a variable not present in `vars`.
std::string render_template(const PromptTemplate& tmpl,
                            const std::map<std::string, std::string>& vars);

/// Renders the policy-model prompt: tool descriptions and the action/
/// observation format instructions (omitted entirely when `specs` is empty),
/// followed by the serialized history. Deterministic: same inputs produce
/// byte-identical output.
std::string render_prompt(const Conversation& conv, const std::vector<ToolSpec>& specs,
                          const PromptTemplate& tmpl);

/// The instruction appended to the prompt when the inference loop forces a
/// direct response (tool budget spent or fallback after a malformed call).
std::string_view forced_direct_instruction();

} // namespace ektc
