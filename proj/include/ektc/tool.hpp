#pragma once

#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

namespace ektc {

/// A knowledge-base relation, e.g. xReact or Cause. Names are opaque
/// strings so third relation sets plug in without code changes.
struct Relation {
    std::string name;

    bool operator==(const Relation&) const = default;
    auto operator<=>(const Relation&) const = default;
};

/// Definition of a callable knowledge tool: public name, the description
/// shown to the model, and the ordered relation set its backend serves.
struct ToolSpec {
    std::string name;
    std::string description;
    std::vector<Relation> relation_set;
    std::vector<std::string> arg_schema{"prompt"};

    bool operator==(const ToolSpec&) const = default;
};

/// Which built-in relation-set preset to use for the tool.
enum class ToolKind { Comet, Cicero };

/// The COMET-backed EmotionKnowledgebase definition: five relations
/// xContent, xNeed, xWant, xEffect, xReact.
ToolSpec comet_tool_spec();

/// The CICERO-backed EmotionKnowledgebase definition: four relations
/// Cause, SubEv, Motiv, React.
ToolSpec cicero_tool_spec();

ToolSpec make_tool_spec(ToolKind kind);

/// Generated inferences for one relation.
struct RelationResult {
    Relation relation;
    std::vector<std::string> texts;

    bool operator==(const RelationResult&) const = default;
};

/// The result of a tool execution: one RelationResult per relation in
/// ToolSpec order, plus the deterministic rendering appended to dialogue
/// history (one `<relation>: t1 | t2 | ...` section per relation, sections
/// joined by newlines).
struct Observation {
    std::string tool_name;
    std::vector<RelationResult> results;
    std::string rendered;

    bool operator==(const Observation&) const = default;
};

std::string render_observation(const std::vector<RelationResult>& results);

/// Serves relation-wise generations for a prompt. Implementations must
/// tolerate concurrent calls.
class ToolBackend {
public:
    virtual ~ToolBackend() = default;

    /// Returns the generated texts per relation name, k per relation.
    /// Throws BackendUnavailable on transport failure.
    virtual std::map<std::string, std::vector<std::string>>
    generate(const std::string& prompt, const std::vector<Relation>& relations, int k) = 0;
};

/// Deterministic in-process stand-in for the knowledge models. Generation i
/// for (prompt, relation) is `<relation>-inference-<h>` where h is a stable
/// 64-bit hash of the inputs, so identical inputs always produce identical
/// observations.
class MockToolBackend : public ToolBackend {
public:
    std::map<std::string, std::vector<std::string>>
    generate(const std::string& prompt, const std::vector<Relation>& relations, int k) override;

    static std::vector<std::string> mock_generate(const std::string& prompt,
                                                  const Relation& relation, int k);
};

/// Stable FNV-1a 64-bit hash used by the mock backend.
std::uint64_t stable_hash(std::string_view data);

/// Name-indexed tool registry. Read-mostly: registration is rare, invoke is
/// safe to call concurrently.
class ToolRegistry {
public:
    explicit ToolRegistry(int generations_per_relation = 5);

    /// Throws DuplicateName when the spec name is already registered.
    void register_tool(ToolSpec spec, std::shared_ptr<ToolBackend> backend);
    void remove(const std::string& name);
    bool has(const std::string& name) const;
    ToolSpec spec(const std::string& name) const; // throws UnknownTool
    std::vector<ToolSpec> specs() const;          // registration order

    /// Runs the named tool. Throws UnknownTool, MissingArgument (arg_schema
    /// keys absent), or BackendUnavailable from the backend.
    Observation invoke(const std::string& name,
                       const std::map<std::string, std::string>& args) const;

    int generations_per_relation() const { return generations_per_relation_; }

private:
    struct Entry {
        ToolSpec spec;
        std::shared_ptr<ToolBackend> backend;
    };

    int generations_per_relation_;
    mutable std::shared_mutex mutex_;
    std::vector<Entry> entries_;
};

/// Remote knowledge-service backend speaking the wire protocol:
/// POST {"prompt", "relations", "k"} -> {"results": {relation: [texts]}}.
/// Transient failures are retried with exponential backoff; status errors
/// map to BackendUnavailable.
class HttpToolBackend : public ToolBackend {
public:
    struct Options {
        std::string base_url;       // e.g. http://host:port
        std::string path = "/generate";
        int max_retries = 3;
        int initial_backoff_ms = 100;
        double backoff_multiplier = 2.0;
        int timeout_sec = 30;
    };

    explicit HttpToolBackend(Options options);

    std::map<std::string, std::vector<std::string>>
    generate(const std::string& prompt, const std::vector<Relation>& relations, int k) override;

private:
    Options options_;
};

} // namespace ektc
