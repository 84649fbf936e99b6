#include "ektc/llm_client.hpp"

#include <algorithm>
#include <thread>

#include "ektc/errors.hpp"
#include "httplib.h"
#include "json.hpp"

namespace ektc {

using nlohmann::json;

ChatRequest single_user_request(std::string endpoint, std::string content, ChatParams params) {
    ChatRequest req;
    req.messages.push_back({"user", std::move(content)});
    req.params = std::move(params);
    req.endpoint = std::move(endpoint);
    return req;
}

void MockChatClient::add_rule(std::string substring, std::string reply) {
    std::lock_guard lock(mutex_);
    rules_.push_back(Rule{std::move(substring), std::nullopt, std::move(reply)});
}

void MockChatClient::enqueue(std::string reply) {
    std::lock_guard lock(mutex_);
    rules_.push_back(Rule{std::nullopt, position_rules_++, std::move(reply)});
}

std::string MockChatClient::complete(const ChatRequest& request) {
    std::lock_guard lock(mutex_);
    log_.push_back(request);
    const std::size_t n = calls_++;

    std::string text;
    for (const ChatMessage& m : request.messages) text += m.content + "\n";

    for (const Rule& rule : rules_) {
        if (rule.position && *rule.position == n) return rule.reply;
        if (rule.substring &&
            (rule.substring->empty() || text.find(*rule.substring) != std::string::npos))
            return rule.reply;
    }
    if (strict_) throw BadRequest("mock script has no rule for request " + std::to_string(n));
    return "";
}

std::vector<ChatRequest> MockChatClient::requests() const {
    std::lock_guard lock(mutex_);
    return log_;
}

std::size_t MockChatClient::request_count() const {
    std::lock_guard lock(mutex_);
    return log_.size();
}

void ConcurrencyLimiter::acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return in_flight_ < limit_; });
    ++in_flight_;
}

void ConcurrencyLimiter::release() {
    {
        std::lock_guard lock(mutex_);
        --in_flight_;
    }
    cv_.notify_one();
}

HttpTransport default_http_transport(int timeout_sec) {
    return [timeout_sec](const EndpointProfile& profile, const std::string& body,
                         const std::map<std::string, std::string>& headers) {
        httplib::Client client(profile.base_url);
        client.set_connection_timeout(timeout_sec);
        client.set_read_timeout(timeout_sec);
        httplib::Headers hl;
        for (const auto& [k, v] : headers) hl.emplace(k, v);
        auto res = client.Post(profile.path, hl, body, "application/json");
        HttpExchange out;
        if (!res) {
            out.error = httplib::to_string(res.error());
            return out;
        }
        out.transport_ok = true;
        out.status = res->status;
        out.body = res->body;
        return out;
    };
}

HttpChatClient::HttpChatClient(std::map<std::string, EndpointProfile> profiles, Options options)
    : profiles_(std::move(profiles)), options_(std::move(options)),
      limiter_(std::max(1, options_.in_flight_cap)) {
    if (!options_.transport) options_.transport = default_http_transport();
}

void HttpChatClient::rate_limit(const std::string& endpoint, int min_interval_ms) {
    if (min_interval_ms <= 0) return;
    std::chrono::steady_clock::time_point wait_until;
    {
        std::lock_guard lock(mutex_);
        auto now = std::chrono::steady_clock::now();
        auto it = last_request_.find(endpoint);
        wait_until = (it == last_request_.end())
                         ? now
                         : it->second + std::chrono::milliseconds(min_interval_ms);
        if (wait_until < now) wait_until = now;
        last_request_[endpoint] = wait_until;
    }
    std::this_thread::sleep_until(wait_until);
}

std::string HttpChatClient::complete(const ChatRequest& request) {
    auto pit = profiles_.find(request.endpoint);
    if (pit == profiles_.end())
        throw ConfigError("no endpoint profile named \"" + request.endpoint + "\"");
    const EndpointProfile& profile = pit->second;

    json body;
    body["model"] = profile.model;
    json messages = json::array();
    for (const ChatMessage& m : request.messages)
        messages.push_back({{"role", m.role}, {"content", m.content}});
    body["messages"] = std::move(messages);
    body["temperature"] = request.params.temperature;
    body["max_tokens"] = request.params.max_tokens;
    if (!request.params.stop.empty()) body["stop"] = request.params.stop;
    const std::string payload = body.dump();

    std::map<std::string, std::string> headers;
    if (!profile.api_key.empty()) headers["Authorization"] = "Bearer " + profile.api_key;

    std::string last_error;
    int backoff_ms = options_.retry.initial_backoff_ms;
    for (int attempt = 0; attempt <= options_.retry.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms = std::min(static_cast<int>(backoff_ms * options_.retry.multiplier),
                                  options_.retry.max_backoff_ms);
        }
        {
            std::lock_guard lock(mutex_);
            if (options_.max_requests != 0 && attempts_ >= options_.max_requests)
                throw BudgetExceeded("request quota of " +
                                     std::to_string(options_.max_requests) + " spent");
            ++attempts_;
        }
        rate_limit(request.endpoint, profile.min_interval_ms);

        limiter_.acquire();
        HttpExchange ex = options_.transport(profile, payload, headers);
        limiter_.release();

        if (!ex.transport_ok) {
            last_error = "transport failure: " + ex.error;
            continue;
        }
        if (ex.status >= 500 || ex.status == 429) {
            last_error = "status " + std::to_string(ex.status);
            continue;
        }
        if (ex.status < 200 || ex.status >= 300)
            throw BadRequest("endpoint \"" + request.endpoint + "\" returned status " +
                             std::to_string(ex.status));
        json reply = json::parse(ex.body, nullptr, false);
        if (reply.is_discarded() || !reply.contains("choices") || !reply["choices"].is_array() ||
            reply["choices"].empty() || !reply["choices"][0].contains("message") ||
            !reply["choices"][0]["message"].contains("content") ||
            !reply["choices"][0]["message"]["content"].is_string()) {
            last_error = "malformed completion reply";
            continue;
        }
        return reply["choices"][0]["message"]["content"].get<std::string>();
    }
    throw TransportError("endpoint \"" + request.endpoint + "\" unreachable after " +
                         std::to_string(options_.retry.max_retries + 1) + " attempts (" +
                         last_error + ")");
}

std::size_t HttpChatClient::attempts_made() const {
    std::lock_guard lock(mutex_);
    return attempts_;
}

} // namespace ektc
