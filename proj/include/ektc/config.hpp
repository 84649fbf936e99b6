#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ektc/llm_client.hpp"
#include "ektc/tool.hpp"

namespace ektc {

inline constexpr std::string_view kVersion = "0.1.0";

/// One endpoint profile. A non-empty `script` path makes the endpoint a
/// scripted in-process mock instead of an HTTP endpoint.
struct EndpointConfig {
    std::string url;
    std::string model;
    std::string key;
    std::string path = "/v1/chat/completions";
    double temperature = 0.0;
    int max_tokens = 512;
    int min_interval_ms = 0;
    std::string script;

    bool operator==(const EndpointConfig&) const = default;
};

struct ToolConfig {
    std::string kind = "comet"; // comet | cicero
    std::string name;           // defaults to the preset's public name
    std::vector<std::string> relations; // optional relation-set override
    int k = 5;                  // generations per relation
    std::string url;            // non-empty selects the HTTP backend

    bool operator==(const ToolConfig&) const = default;
};

struct DatagenConfig {
    bool full_context = false;
    std::array<double, 3> split{0.8, 0.1, 0.1};
    std::uint64_t seed = 1;

    bool operator==(const DatagenConfig&) const = default;
};

struct InferenceConfig {
    int max_tool_calls = 1;
    std::string on_malformed = "fallback"; // fallback | error
    std::string tool_arg_source = "last_user"; // last_user | full_context
    std::size_t context_budget = 0;

    bool operator==(const InferenceConfig&) const = default;
};

struct MetricsConfig {
    bool smoothing = true;

    bool operator==(const MetricsConfig&) const = default;
};

/// Effective run configuration: file values, overridden by the environment
/// (EKTC_LLM_URL, EKTC_LLM_KEY, EKTC_TOOL_URL), overridden by flags.
struct Config {
    std::map<std::string, EndpointConfig> endpoints; // policy, judge, evaluator by default
    ToolConfig tool;
    DatagenConfig datagen;
    InferenceConfig inference;
    MetricsConfig metrics;
    RetryPolicy retry;
    int jobs = 1;

    static Config defaults();
};

/// Parses the config JSON. Unknown keys are rejected with ConfigError naming
/// the key; so are malformed values and split presets.
Config parse_config(const std::string& json_text);
Config load_config(const std::filesystem::path& path);

/// Applies the EKTC_* environment overrides to empty fields.
void apply_env_overrides(Config& config);

/// Named split presets: "8:1:1" and "val-from-train" (a tenth of the
/// training portion held out for validation: 0.81/0.09/0.10).
std::optional<std::array<double, 3>> split_preset(std::string_view name);

std::string config_to_json(const Config& config);

/// Dispatches complete() to one client per endpoint profile: scripted mocks
/// for profiles with a script, a shared HTTP client for the rest.
class RoutingChatClient : public ChatClient {
public:
    void add_route(const std::string& endpoint, std::shared_ptr<ChatClient> client);
    std::string complete(const ChatRequest& request) override;

    /// The mock behind an endpoint, or nullptr when it is not scripted.
    MockChatClient* mock(const std::string& endpoint) const;

private:
    std::map<std::string, std::shared_ptr<ChatClient>> routes_;
};

/// Loads a mock script file: {"strict": bool, "rules": [{"match": s |
/// "position": n, "reply": s}, ...]}.
std::shared_ptr<MockChatClient> load_mock_script(const std::filesystem::path& path);

/// Builds the per-endpoint routing client from the config.
std::shared_ptr<RoutingChatClient> make_chat_client(const Config& config);

/// Builds the tool registry from the config: preset spec (with optional
/// relation override), mock backend unless a tool url is configured.
ToolRegistry make_tool_registry(const Config& config);

/// The registered public tool name for the config.
std::string configured_tool_name(const Config& config);

/// Writes `<dir>/manifest.json` capturing the exact effective config, the
/// command line, the seed, and the version.
void write_manifest(const std::filesystem::path& dir, const Config& config,
                    const std::string& command, std::uint64_t seed);

} // namespace ektc
