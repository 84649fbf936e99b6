#include "ektc/tool.hpp"

#include <algorithm>
#include <thread>

#include "ektc/errors.hpp"
#include "httplib.h"
#include "json.hpp"

namespace ektc {

namespace {

constexpr std::string_view kEmotionKnowledgebaseName = "EmotionKnowledgebase";

std::string hex64(std::uint64_t v) {
    static const char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

} // namespace

std::uint64_t stable_hash(std::string_view data) {
    // FNV-1a, 64-bit.
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

ToolSpec comet_tool_spec() {
    ToolSpec spec;
    spec.name = std::string(kEmotionKnowledgebaseName);
    spec.description =
        "Generates commonsense inferences about the speaker's situation from a "
        "knowledge base of social and mental-state relations. Given a prompt "
        "describing what the speaker said, it returns, per relation, what the "
        "event involves (xContent), what the speaker needs (xNeed), wants "
        "(xWant), the effect on them (xEffect), and how they feel (xReact). "
        "Use it when understanding the speaker's emotions or intentions needs "
        "background knowledge.";
    spec.relation_set = {{"xContent"}, {"xNeed"}, {"xWant"}, {"xEffect"}, {"xReact"}};
    return spec;
}

ToolSpec cicero_tool_spec() {
    ToolSpec spec;
    spec.name = std::string(kEmotionKnowledgebaseName);
    spec.description =
        "Generates dialogue-level commonsense inferences about the speaker's "
        "situation. Given a prompt describing what the speaker said, it "
        "returns, per relation, the likely cause of the event (Cause), "
        "probable subsequent events (SubEv), the speaker's motivation (Motiv), "
        "and their emotional reaction (React). Use it when understanding the "
        "speaker's emotions or intentions needs background knowledge.";
    spec.relation_set = {{"Cause"}, {"SubEv"}, {"Motiv"}, {"React"}};
    return spec;
}

ToolSpec make_tool_spec(ToolKind kind) {
    return kind == ToolKind::Comet ? comet_tool_spec() : cicero_tool_spec();
}

std::string render_observation(const std::vector<RelationResult>& results) {
    std::string out;
    for (const RelationResult& rr : results) {
        if (!out.empty()) out += "\n";
        out += rr.relation.name + ":";
        for (std::size_t i = 0; i < rr.texts.size(); ++i) {
            out += (i == 0 ? " " : " | ") + rr.texts[i];
        }
    }
    return out;
}

std::vector<std::string> MockToolBackend::mock_generate(const std::string& prompt,
                                                        const Relation& relation, int k) {
    std::vector<std::string> texts;
    texts.reserve(static_cast<std::size_t>(std::max(k, 0)));
    for (int i = 0; i < k; ++i) {
        std::string key = prompt;
        key += '\x1f';
        key += relation.name;
        key += '\x1f';
        key += std::to_string(i);
        texts.push_back(relation.name + "-inference-" + hex64(stable_hash(key)));
    }
    return texts;
}

std::map<std::string, std::vector<std::string>>
MockToolBackend::generate(const std::string& prompt, const std::vector<Relation>& relations,
                          int k) {
    std::map<std::string, std::vector<std::string>> out;
    for (const Relation& r : relations) out[r.name] = mock_generate(prompt, r, k);
    return out;
}

ToolRegistry::ToolRegistry(int generations_per_relation)
    : generations_per_relation_(generations_per_relation) {}

void ToolRegistry::register_tool(ToolSpec spec, std::shared_ptr<ToolBackend> backend) {
    std::unique_lock lock(mutex_);
    for (const Entry& e : entries_) {
        if (e.spec.name == spec.name)
            throw DuplicateName("tool \"" + spec.name + "\" is already registered");
    }
    entries_.push_back(Entry{std::move(spec), std::move(backend)});
}

void ToolRegistry::remove(const std::string& name) {
    std::unique_lock lock(mutex_);
    entries_.erase(std::remove_if(entries_.begin(), entries_.end(),
                                  [&](const Entry& e) { return e.spec.name == name; }),
                   entries_.end());
}

bool ToolRegistry::has(const std::string& name) const {
    std::shared_lock lock(mutex_);
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const Entry& e) { return e.spec.name == name; });
}

ToolSpec ToolRegistry::spec(const std::string& name) const {
    std::shared_lock lock(mutex_);
    for (const Entry& e : entries_) {
        if (e.spec.name == name) return e.spec;
    }
    throw UnknownTool("no tool named \"" + name + "\"");
}

std::vector<ToolSpec> ToolRegistry::specs() const {
    std::shared_lock lock(mutex_);
    std::vector<ToolSpec> out;
    out.reserve(entries_.size());
    for (const Entry& e : entries_) out.push_back(e.spec);
    return out;
}

Observation ToolRegistry::invoke(const std::string& name,
                                 const std::map<std::string, std::string>& args) const {
    ToolSpec spec;
    std::shared_ptr<ToolBackend> backend;
    {
        std::shared_lock lock(mutex_);
        auto it = std::find_if(entries_.begin(), entries_.end(),
                               [&](const Entry& e) { return e.spec.name == name; });
        if (it == entries_.end()) throw UnknownTool("no tool named \"" + name + "\"");
        spec = it->spec;
        backend = it->backend;
    }
    for (const std::string& key : spec.arg_schema) {
        if (args.find(key) == args.end())
            throw MissingArgument("tool \"" + name + "\" requires argument \"" + key + "\"");
    }

    auto generated =
        backend->generate(args.at("prompt"), spec.relation_set, generations_per_relation_);

    Observation obs;
    obs.tool_name = name;
    obs.results.reserve(spec.relation_set.size());
    for (const Relation& r : spec.relation_set) {
        RelationResult rr;
        rr.relation = r;
        if (auto it = generated.find(r.name); it != generated.end()) rr.texts = it->second;
        obs.results.push_back(std::move(rr));
    }
    obs.rendered = render_observation(obs.results);
    return obs;
}

HttpToolBackend::HttpToolBackend(Options options) : options_(std::move(options)) {}

std::map<std::string, std::vector<std::string>>
HttpToolBackend::generate(const std::string& prompt, const std::vector<Relation>& relations,
                          int k) {
    nlohmann::json body;
    body["prompt"] = prompt;
    nlohmann::json rels = nlohmann::json::array();
    for (const Relation& r : relations) rels.push_back(r.name);
    body["relations"] = std::move(rels);
    body["k"] = k;
    const std::string payload = body.dump();

    std::string last_error;
    int backoff_ms = options_.initial_backoff_ms;
    for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms = static_cast<int>(backoff_ms * options_.backoff_multiplier);
        }
        httplib::Client client(options_.base_url);
        client.set_connection_timeout(options_.timeout_sec);
        client.set_read_timeout(options_.timeout_sec);
        auto res = client.Post(options_.path, payload, "application/json");
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500 || res->status == 429) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        if (res->status < 200 || res->status >= 300)
            throw BackendUnavailable("knowledge service returned status " +
                                     std::to_string(res->status));
        nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
        if (reply.is_discarded() || !reply.contains("results") || !reply["results"].is_object())
            throw BackendUnavailable("knowledge service reply lacks \"results\" object");
        std::map<std::string, std::vector<std::string>> out;
        for (auto it = reply["results"].begin(); it != reply["results"].end(); ++it) {
            std::vector<std::string> texts;
            if (it.value().is_array()) {
                for (const auto& t : it.value())
                    if (t.is_string()) texts.push_back(t.get<std::string>());
            }
            out[it.key()] = std::move(texts);
        }
        return out;
    }
    throw BackendUnavailable("knowledge service unreachable after " +
                             std::to_string(options_.max_retries + 1) + " attempts (" +
                             last_error + ")");
}

} // namespace ektc
