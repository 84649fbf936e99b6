#include "ektc/prompt.hpp"

#include <cctype>

#include "ektc/errors.hpp"

namespace ektc {

namespace {

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

std::string tool_block(const std::vector<ToolSpec>& specs) {
    if (specs.empty()) return "";
    std::string block =
        "You may call a tool before replying when understanding the speaker's "
        "feelings needs external knowledge.\n\nAvailable tools:\n";
    for (const ToolSpec& s : specs) {
        block += "- " + s.name + ": " + s.description + "\n";
    }
    block +=
        "\nTo call a tool, reply with exactly two lines:\n"
        "Action: <tool name>\n"
        "Action Input: {\"prompt\": \"<text to send to the tool>\"}\n"
        "The tool result is appended to the conversation as an observation. "
        "When no tool call is needed, reply with the response text only.\n\n";
    return block;
}

} // namespace

PromptTemplate PromptTemplate::react_default() {
    PromptTemplate tmpl;
    tmpl.text =
        "You are an empathetic dialogue assistant. Read the conversation, "
        "understand the speaker's emotions and intentions, and continue it "
        "with a short, caring reply.\n\n"
        "{{tool_block}}"
        "Conversation so far:\n"
        "{{history}}\n"
        "assistant:";
    return tmpl;
}

std::string render_template(const PromptTemplate& tmpl,
                            const std::map<std::string, std::string>& vars) {
    const std::string& text = tmpl.text;
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t open = text.find("{{", pos);
        if (open == std::string::npos) {
            out.append(text, pos, std::string::npos);
            break;
        }
        out.append(text, pos, open - pos);
        std::size_t name_start = open + 2;
        std::size_t i = name_start;
        while (i < text.size() && is_ident_char(text[i])) ++i;
        if (i > name_start && i + 1 < text.size() && text[i] == '}' && text[i + 1] == '}' &&
            !std::isdigit(static_cast<unsigned char>(text[name_start]))) {
            std::string name = text.substr(name_start, i - name_start);
            auto it = vars.find(name);
            if (it == vars.end())
                throw UnknownPlaceholder("template references unknown variable \"" + name + "\"");
            out += it->second;
            pos = i + 2;
        } else {
            out += "{{";
            pos = name_start;
        }
    }
    return out;
}

std::string render_prompt(const Conversation& conv, const std::vector<ToolSpec>& specs,
                          const PromptTemplate& tmpl) {
    std::map<std::string, std::string> vars;
    vars["tool_block"] = tool_block(specs);
    vars["history"] = render_history(conv.messages);
    std::string tool_names;
    for (const ToolSpec& s : specs) {
        if (!tool_names.empty()) tool_names += ", ";
        tool_names += s.name;
    }
    vars["tool_names"] = tool_names;
    vars["emotion"] = conv.emotion_label.value_or("");
    return render_template(tmpl, vars);
}

std::string_view forced_direct_instruction() {
    return "Do not call any tool now. Reply with the final response text only.";
}

} // namespace ektc
