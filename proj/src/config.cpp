#include "ektc/config.hpp"

#include <cstdlib>
#include <fstream>

#include "ektc/corpus.hpp"
#include "ektc/errors.hpp"
#include "json.hpp"

namespace ektc {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::vector<std::string>& known,
                         const std::string& scope) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw ConfigError("unknown config key \"" + scope + it.key() + "\"");
    }
}

EndpointConfig parse_endpoint(const json& obj, const std::string& scope) {
    reject_unknown_keys(obj,
                        {"url", "model", "key", "path", "temperature", "max_tokens",
                         "min_interval_ms", "script"},
                        scope);
    EndpointConfig ep;
    if (obj.contains("url")) ep.url = obj["url"].get<std::string>();
    if (obj.contains("model")) ep.model = obj["model"].get<std::string>();
    if (obj.contains("key")) ep.key = obj["key"].get<std::string>();
    if (obj.contains("path")) ep.path = obj["path"].get<std::string>();
    if (obj.contains("temperature")) ep.temperature = obj["temperature"].get<double>();
    if (obj.contains("max_tokens")) ep.max_tokens = obj["max_tokens"].get<int>();
    if (obj.contains("min_interval_ms")) ep.min_interval_ms = obj["min_interval_ms"].get<int>();
    if (obj.contains("script")) ep.script = obj["script"].get<std::string>();
    return ep;
}

} // namespace

Config Config::defaults() {
    Config config;
    config.endpoints["policy"] = EndpointConfig{};
    config.endpoints["judge"] = EndpointConfig{};
    config.endpoints["evaluator"] = EndpointConfig{};
    return config;
}

std::optional<std::array<double, 3>> split_preset(std::string_view name) {
    if (name == "8:1:1") return std::array<double, 3>{0.8, 0.1, 0.1};
    if (name == "val-from-train") return std::array<double, 3>{0.81, 0.09, 0.10};
    return std::nullopt;
}

Config parse_config(const std::string& json_text) {
    json root = json::parse(json_text, nullptr, false);
    if (root.is_discarded() || !root.is_object())
        throw ConfigError("config is not a JSON object");
    reject_unknown_keys(
        root, {"endpoints", "tool", "datagen", "inference", "metrics", "retry", "jobs"}, "");

    Config config = Config::defaults();
    try {
        if (root.contains("endpoints")) {
            for (auto it = root["endpoints"].begin(); it != root["endpoints"].end(); ++it)
                config.endpoints[it.key()] =
                    parse_endpoint(it.value(), "endpoints." + it.key() + ".");
        }
        if (root.contains("tool")) {
            const json& t = root["tool"];
            reject_unknown_keys(t, {"kind", "name", "relations", "k", "url"}, "tool.");
            if (t.contains("kind")) config.tool.kind = t["kind"].get<std::string>();
            if (config.tool.kind != "comet" && config.tool.kind != "cicero")
                throw ConfigError("tool.kind must be \"comet\" or \"cicero\"");
            if (t.contains("name")) config.tool.name = t["name"].get<std::string>();
            if (t.contains("relations"))
                config.tool.relations = t["relations"].get<std::vector<std::string>>();
            if (t.contains("k")) config.tool.k = t["k"].get<int>();
            if (config.tool.k < 1) throw ConfigError("tool.k must be >= 1");
            if (t.contains("url")) config.tool.url = t["url"].get<std::string>();
        }
        if (root.contains("datagen")) {
            const json& d = root["datagen"];
            reject_unknown_keys(d, {"full_context", "split", "split_preset", "seed"}, "datagen.");
            if (d.contains("full_context"))
                config.datagen.full_context = d["full_context"].get<bool>();
            if (d.contains("split_preset")) {
                auto preset = split_preset(d["split_preset"].get<std::string>());
                if (!preset)
                    throw ConfigError("unknown datagen.split_preset \"" +
                                      d["split_preset"].get<std::string>() + "\"");
                config.datagen.split = *preset;
            }
            if (d.contains("split")) {
                auto v = d["split"].get<std::vector<double>>();
                if (v.size() != 3) throw ConfigError("datagen.split needs three ratios");
                config.datagen.split = {v[0], v[1], v[2]};
            }
            if (d.contains("seed")) config.datagen.seed = d["seed"].get<std::uint64_t>();
        }
        if (root.contains("inference")) {
            const json& i = root["inference"];
            reject_unknown_keys(
                i, {"max_tool_calls", "on_malformed", "tool_arg_source", "context_budget"},
                "inference.");
            if (i.contains("max_tool_calls"))
                config.inference.max_tool_calls = i["max_tool_calls"].get<int>();
            if (config.inference.max_tool_calls < 0)
                throw ConfigError("inference.max_tool_calls must be >= 0");
            if (i.contains("on_malformed"))
                config.inference.on_malformed = i["on_malformed"].get<std::string>();
            if (config.inference.on_malformed != "fallback" &&
                config.inference.on_malformed != "error")
                throw ConfigError("inference.on_malformed must be \"fallback\" or \"error\"");
            if (i.contains("tool_arg_source"))
                config.inference.tool_arg_source = i["tool_arg_source"].get<std::string>();
            if (config.inference.tool_arg_source != "last_user" &&
                config.inference.tool_arg_source != "full_context")
                throw ConfigError(
                    "inference.tool_arg_source must be \"last_user\" or \"full_context\"");
            if (i.contains("context_budget"))
                config.inference.context_budget = i["context_budget"].get<std::size_t>();
        }
        if (root.contains("metrics")) {
            reject_unknown_keys(root["metrics"], {"smoothing"}, "metrics.");
            if (root["metrics"].contains("smoothing"))
                config.metrics.smoothing = root["metrics"]["smoothing"].get<bool>();
        }
        if (root.contains("retry")) {
            const json& r = root["retry"];
            reject_unknown_keys(
                r, {"max_retries", "initial_backoff_ms", "multiplier", "max_backoff_ms"},
                "retry.");
            if (r.contains("max_retries")) config.retry.max_retries = r["max_retries"].get<int>();
            if (r.contains("initial_backoff_ms"))
                config.retry.initial_backoff_ms = r["initial_backoff_ms"].get<int>();
            if (r.contains("multiplier")) config.retry.multiplier = r["multiplier"].get<double>();
            if (r.contains("max_backoff_ms"))
                config.retry.max_backoff_ms = r["max_backoff_ms"].get<int>();
        }
        if (root.contains("jobs")) config.jobs = root["jobs"].get<int>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config value: ") + e.what());
    }
    return config;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config(text);
}

void apply_env_overrides(Config& config) {
    const char* url = std::getenv("EKTC_LLM_URL");
    const char* key = std::getenv("EKTC_LLM_KEY");
    for (auto& [name, ep] : config.endpoints) {
        (void)name;
        if (url && ep.url.empty() && ep.script.empty()) ep.url = url;
        if (key && ep.key.empty()) ep.key = key;
    }
    const char* tool_url = std::getenv("EKTC_TOOL_URL");
    if (tool_url && config.tool.url.empty()) config.tool.url = tool_url;
}

std::string config_to_json(const Config& config) {
    json root;
    json endpoints = json::object();
    for (const auto& [name, ep] : config.endpoints) {
        endpoints[name] = {{"url", ep.url},
                           {"model", ep.model},
                           {"key", ep.key.empty() ? "" : "<set>"},
                           {"path", ep.path},
                           {"temperature", ep.temperature},
                           {"max_tokens", ep.max_tokens},
                           {"min_interval_ms", ep.min_interval_ms},
                           {"script", ep.script}};
    }
    root["endpoints"] = std::move(endpoints);
    root["tool"] = {{"kind", config.tool.kind},
                    {"name", configured_tool_name(config)},
                    {"relations", config.tool.relations},
                    {"k", config.tool.k},
                    {"url", config.tool.url}};
    root["datagen"] = {{"full_context", config.datagen.full_context},
                       {"split", config.datagen.split},
                       {"seed", config.datagen.seed}};
    root["inference"] = {{"max_tool_calls", config.inference.max_tool_calls},
                         {"on_malformed", config.inference.on_malformed},
                         {"tool_arg_source", config.inference.tool_arg_source},
                         {"context_budget", config.inference.context_budget}};
    root["metrics"] = {{"smoothing", config.metrics.smoothing}};
    root["retry"] = {{"max_retries", config.retry.max_retries},
                     {"initial_backoff_ms", config.retry.initial_backoff_ms},
                     {"multiplier", config.retry.multiplier},
                     {"max_backoff_ms", config.retry.max_backoff_ms}};
    root["jobs"] = config.jobs;
    return root.dump(2);
}

void RoutingChatClient::add_route(const std::string& endpoint,
                                  std::shared_ptr<ChatClient> client) {
    routes_[endpoint] = std::move(client);
}

std::string RoutingChatClient::complete(const ChatRequest& request) {
    auto it = routes_.find(request.endpoint);
    if (it == routes_.end())
        throw ConfigError("no endpoint profile named \"" + request.endpoint + "\"");
    return it->second->complete(request);
}

MockChatClient* RoutingChatClient::mock(const std::string& endpoint) const {
    auto it = routes_.find(endpoint);
    if (it == routes_.end()) return nullptr;
    return dynamic_cast<MockChatClient*>(it->second.get());
}

std::shared_ptr<MockChatClient> load_mock_script(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open mock script " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    json root = json::parse(text, nullptr, false);
    if (root.is_discarded() || !root.is_object())
        throw ConfigError("mock script " + path.string() + " is not a JSON object");
    reject_unknown_keys(root, {"strict", "rules"}, "script.");
    bool strict = root.value("strict", true);
    auto mock = std::make_shared<MockChatClient>(strict);
    if (root.contains("rules")) {
        for (const json& rule : root["rules"]) {
            reject_unknown_keys(rule, {"match", "position", "reply"}, "script.rules.");
            if (!rule.contains("reply") || !rule["reply"].is_string())
                throw ConfigError("mock script rule lacks string field \"reply\"");
            if (rule.contains("match")) {
                mock->add_rule(rule["match"].get<std::string>(), rule["reply"].get<std::string>());
            } else {
                mock->enqueue(rule["reply"].get<std::string>());
            }
        }
    }
    return mock;
}

std::shared_ptr<RoutingChatClient> make_chat_client(const Config& config) {
    auto router = std::make_shared<RoutingChatClient>();
    std::map<std::string, EndpointProfile> http_profiles;
    for (const auto& [name, ep] : config.endpoints) {
        if (!ep.script.empty()) {
            router->add_route(name, load_mock_script(ep.script));
            continue;
        }
        EndpointProfile profile;
        profile.base_url = ep.url;
        profile.model = ep.model;
        profile.api_key = ep.key;
        profile.path = ep.path;
        profile.min_interval_ms = ep.min_interval_ms;
        http_profiles[name] = std::move(profile);
    }
    if (!http_profiles.empty()) {
        HttpChatClient::Options options;
        options.retry = config.retry;
        auto http = std::make_shared<HttpChatClient>(http_profiles, options);
        for (const auto& [name, profile] : http_profiles) {
            (void)profile;
            router->add_route(name, http);
        }
    }
    return router;
}

std::string configured_tool_name(const Config& config) {
    if (!config.tool.name.empty()) return config.tool.name;
    return make_tool_spec(config.tool.kind == "cicero" ? ToolKind::Cicero : ToolKind::Comet).name;
}

ToolRegistry make_tool_registry(const Config& config) {
    ToolRegistry registry(config.tool.k);
    ToolSpec spec =
        make_tool_spec(config.tool.kind == "cicero" ? ToolKind::Cicero : ToolKind::Comet);
    if (!config.tool.name.empty()) spec.name = config.tool.name;
    if (!config.tool.relations.empty()) {
        spec.relation_set.clear();
        for (const std::string& r : config.tool.relations) spec.relation_set.push_back({r});
    }
    std::shared_ptr<ToolBackend> backend;
    if (config.tool.url.empty()) {
        backend = std::make_shared<MockToolBackend>();
    } else {
        HttpToolBackend::Options options;
        options.base_url = config.tool.url;
        backend = std::make_shared<HttpToolBackend>(options);
    }
    registry.register_tool(std::move(spec), std::move(backend));
    return registry;
}

void write_manifest(const std::filesystem::path& dir, const Config& config,
                    const std::string& command, std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    json manifest;
    manifest["command"] = command;
    manifest["seed"] = seed;
    manifest["version"] = std::string(kVersion);
    manifest["config"] = json::parse(config_to_json(config));
    write_lines(dir / "manifest.json", {manifest.dump(2)});
}

} // namespace ektc
