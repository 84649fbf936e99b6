#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace ektc {

/// One chat-completion wire message. Roles are system, user, assistant.
struct ChatMessage {
    std::string role;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct ChatParams {
    double temperature = 0.0;
    int max_tokens = 512;
    std::vector<std::string> stop;

    bool operator==(const ChatParams&) const = default;
};

/// A completion request addressed to a named endpoint profile.
struct ChatRequest {
    std::vector<ChatMessage> messages;
    ChatParams params;
    std::string endpoint;

    bool operator==(const ChatRequest&) const = default;
};

ChatRequest single_user_request(std::string endpoint, std::string content,
                                ChatParams params = {});

/// Abstract chat-completion client shared by the policy model, the
/// annotation/reflection judge, and the A/B evaluator. Implementations are
/// safe to call from multiple threads.
class ChatClient {
public:
    virtual ~ChatClient() = default;

    /// Returns the completion text. Throws TransportError after the retry
    /// budget is exhausted, BadRequest on malformed requests (never
    /// retried), BudgetExceeded when the request quota is spent.
    virtual std::string complete(const ChatRequest& request) = 0;
};

/// Scriptable in-process client. A script is an ordered rule list; each rule
/// matches by substring (against the concatenated message contents) or by
/// request sequence position, first match wins. In strict mode an unmatched
/// request surfaces as BadRequest. Every request is recorded verbatim so
/// tests can assert prompt contents byte-exactly.
class MockChatClient : public ChatClient {
public:
    explicit MockChatClient(bool strict = true) : strict_(strict) {}

    /// Adds a substring rule. An empty needle matches every request.
    void add_rule(std::string substring, std::string reply);

    /// Adds a position rule for the next unclaimed sequence position.
    void enqueue(std::string reply);

    std::string complete(const ChatRequest& request) override;

    std::vector<ChatRequest> requests() const;
    std::size_t request_count() const;

private:
    struct Rule {
        std::optional<std::string> substring;
        std::optional<std::size_t> position;
        std::string reply;
    };

    bool strict_;
    mutable std::mutex mutex_;
    std::vector<Rule> rules_;
    std::size_t position_rules_ = 0;
    std::size_t calls_ = 0;
    std::vector<ChatRequest> log_;
};

/// Connection settings for one named endpoint.
struct EndpointProfile {
    std::string base_url;
    std::string model;
    std::string api_key;
    std::string path = "/v1/chat/completions";
    int min_interval_ms = 0; // per-endpoint rate limit
};

struct RetryPolicy {
    int max_retries = 3;
    int initial_backoff_ms = 200;
    double multiplier = 2.0;
    int max_backoff_ms = 5000;
};

/// Caps the number of requests simultaneously in flight across all
/// endpoints of one client.
class ConcurrencyLimiter {
public:
    explicit ConcurrencyLimiter(int limit) : limit_(limit) {}

    void acquire();
    void release();

private:
    int limit_;
    int in_flight_ = 0;
    std::mutex mutex_;
    std::condition_variable cv_;
};

/// Raw HTTP exchange result, injectable for tests.
struct HttpExchange {
    bool transport_ok = false;
    int status = 0;
    std::string body;
    std::string error;
};

using HttpTransport = std::function<HttpExchange(
    const EndpointProfile& profile, const std::string& body,
    const std::map<std::string, std::string>& headers)>;

HttpTransport default_http_transport(int timeout_sec = 60);

/// Chat-completion client over HTTP: POST {model, messages, temperature,
/// max_tokens, stop}, completion read from choices[0].message.content.
/// Transient failures (transport, 5xx, 429) are retried with exponential
/// backoff; other 4xx surface immediately as BadRequest.
class HttpChatClient : public ChatClient {
public:
    struct Options {
        RetryPolicy retry;
        int in_flight_cap = 8;
        std::size_t max_requests = 0; // 0 = unlimited; counts transport attempts
        HttpTransport transport;      // defaults to default_http_transport()
    };

    explicit HttpChatClient(std::map<std::string, EndpointProfile> profiles,
                            Options options = {});

    std::string complete(const ChatRequest& request) override;

    std::size_t attempts_made() const;

private:
    void rate_limit(const std::string& endpoint, int min_interval_ms);

    std::map<std::string, EndpointProfile> profiles_;
    Options options_;
    ConcurrencyLimiter limiter_;
    mutable std::mutex mutex_;
    std::size_t attempts_ = 0;
    std::map<std::string, std::chrono::steady_clock::time_point> last_request_;
};

} // namespace ektc
