// Copyright 2026 The lenctl Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Streaming client for OpenAI-style chat-completions endpoints.
///
/// Continuation sends the committed text as a trailing assistant message. The
/// server must continue that message instead of opening a new turn; vLLM and
/// compatible servers do so with `continue_final_message`, which is sent by
/// default.

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
// <resolv.h>, pulled in by httplib, defines _res, which collides with Eigen identifiers.
#undef _res
#include <nlohmann/json.hpp>

#include "lenctl/backend.hpp"
#include "lenctl/error.hpp"
#include "lenctl/sse.hpp"

namespace lenctl {

struct HttpBackendConfig {
  /// Base URL up to the API root, e.g. "http://localhost:8000/v1".
  std::string base_url;
  std::string model;
  /// Name of the environment variable holding the bearer token; empty for none.
  std::string api_key_env;
  std::chrono::milliseconds idle_timeout{60000};
  std::chrono::milliseconds connect_timeout{10000};
  /// 0 derives 2 x max_units_hint + 64, or 4096 without a hint.
  int max_tokens = 0;
  bool continue_final_message = true;
  int retries = 1;
};

/// Host part and path prefix of a base URL.
struct EndpointUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing slash

  static EndpointUrl parse(std::string_view url) {
    const std::size_t scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) throw DomainError("endpoint URL needs a scheme: '" + std::string(url) + "'");
    const std::string_view scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw DomainError("unsupported URL scheme '" + std::string(scheme) + "'");
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (scheme == "https") throw DomainError("https endpoints need a build with OpenSSL");
#endif
    const std::size_t path_begin = url.find('/', scheme_end + 3);
    EndpointUrl out;
    out.origin = std::string(url.substr(0, path_begin));
    if (path_begin != std::string_view::npos) out.path = std::string(url.substr(path_begin));
    while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
    if (out.origin.size() <= scheme_end + 3) throw DomainError("endpoint URL has no host");
    return out;
  }
};

inline int derived_max_tokens(const HttpBackendConfig& config, const GenerationRequest& request) {
  if (config.max_tokens > 0) return config.max_tokens;
  if (request.sampling.max_units_hint > 0) return static_cast<int>(2 * request.sampling.max_units_hint + 64);
  return 4096;
}

/// The JSON body sent for a fresh request (no committed text) or a continuation.
inline nlohmann::ordered_json chat_request_body(const HttpBackendConfig& config, const GenerationRequest& request,
                                                std::string_view committed, bool continuation) {
  nlohmann::ordered_json body;
  body["model"] = config.model;
  nlohmann::ordered_json messages = nlohmann::ordered_json::array();
  for (const auto& m : request.context) messages.push_back({{"role", m.role}, {"content", m.content}});
  const std::string assistant = request.assistant_prefix + std::string(committed);
  const bool has_assistant = continuation || !request.assistant_prefix.empty();
  if (has_assistant) messages.push_back({{"role", "assistant"}, {"content", assistant}});
  body["messages"] = std::move(messages);
  body["temperature"] = request.sampling.temperature;
  body["stream"] = true;
  body["stop"] = request.sampling.stop_sequences;
  body["max_tokens"] = derived_max_tokens(config, request);
  if (has_assistant && config.continue_final_message) {
    body["continue_final_message"] = true;
    body["add_generation_prompt"] = false;
  }
  return body;
}

namespace http_detail {

/// Runs one HTTP exchange on a worker thread and hands events to the consumer.
class HttpStream : public TextStream {
 public:
  HttpStream(HttpBackendConfig config, std::string body) : config_(std::move(config)), body_(std::move(body)) {
    worker_ = std::thread([this] { run(); });
  }

  ~HttpStream() override {
    cancel();
    if (worker_.joinable()) worker_.join();
  }

  HttpStream(const HttpStream&) = delete;
  HttpStream& operator=(const HttpStream&) = delete;

  StreamEvent next() override {
    std::unique_lock<std::mutex> lock(mu_);
    if (terminal_) return *terminal_;
    if (cancelled_) return finish(StreamEvent::done("cancelled"));
    const bool ready = cv_.wait_for(lock, config_.idle_timeout, [this] { return !queue_.empty() || cancelled_; });
    if (cancelled_) return finish(StreamEvent::done("cancelled"));
    if (!ready) {
      lock.unlock();
      abort_transport();
      lock.lock();
      return finish(StreamEvent::error("idle timeout after " + std::to_string(config_.idle_timeout.count()) + " ms"));
    }
    StreamEvent ev = std::move(queue_.front());
    queue_.pop_front();
    if (ev.terminal()) return finish(std::move(ev));
    return ev;
  }

  void cancel() override {
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (cancelled_) return;
      cancelled_ = true;
    }
    cv_.notify_all();
    abort_transport();
  }

 private:
  StreamEvent finish(StreamEvent ev) {
    terminal_ = ev;
    return ev;
  }

  void abort_transport() {
    std::lock_guard<std::mutex> lock(client_mu_);
    if (client_) client_->stop();
  }

  void push(StreamEvent ev) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (closed_) return;
      if (ev.terminal()) closed_ = true;
      queue_.push_back(std::move(ev));
    }
    cv_.notify_all();
  }

  bool cancelled() {
    std::lock_guard<std::mutex> lock(mu_);
    return cancelled_;
  }

  void run() {
    EndpointUrl url;
    try {
      url = EndpointUrl::parse(config_.base_url);
    } catch (const std::exception& e) {
      push(StreamEvent::error(e.what()));
      return;
    }
    for (int attempt = 0; attempt <= std::max(0, config_.retries); ++attempt) {
      if (exchange(url) || cancelled()) return;
      if (received_any_) return;  // a partial stream cannot be retried transparently
    }
    push(StreamEvent::error(last_error_));
  }

  // Returns true when a terminal event was pushed.
  bool exchange(const EndpointUrl& url) {
    auto client = std::make_unique<httplib::Client>(url.origin);
    client->set_connection_timeout(config_.connect_timeout);
    client->set_read_timeout(config_.idle_timeout);
    client->set_write_timeout(config_.connect_timeout);
    {
      std::lock_guard<std::mutex> lock(client_mu_);
      client_ = client.get();
    }
    if (cancelled()) {
      std::lock_guard<std::mutex> lock(client_mu_);
      client_ = nullptr;
      return false;
    }

    sse::Parser parser;
    bool done = false;
    int status = 0;
    std::string error_body;
    httplib::Request req;
    req.method = "POST";
    req.path = url.path + "/chat/completions";
    req.headers = {{"Accept", "text/event-stream"}};
    if (!config_.api_key_env.empty()) {
      if (const char* token = std::getenv(config_.api_key_env.c_str()); token && *token) {
        req.headers.emplace("Authorization", std::string("Bearer ") + token);
      }
    }
    req.set_header("Content-Type", "application/json");
    req.body = body_;
    req.response_handler = [&](const httplib::Response& r) {
      status = r.status;
      return true;
    };
    req.content_receiver = [&](const char* data, std::size_t len, std::uint64_t, std::uint64_t) {
      if (cancelled()) return false;
      if (status < 200 || status >= 300) {
        error_body.append(data, std::min<std::size_t>(len, 4096 - std::min<std::size_t>(4096, error_body.size())));
        return true;
      }
      std::vector<std::string> payloads;
      parser.feed(std::string_view(data, len), payloads);
      return handle(payloads, done);
    };

    httplib::Response res;
    httplib::Error err = httplib::Error::Success;
    const bool ok = client->send(req, res, err);
    {
      std::lock_guard<std::mutex> lock(client_mu_);
      client_ = nullptr;
    }
    if (done) return true;
    if (cancelled()) {
      push(StreamEvent::done("cancelled"));
      return true;
    }
    if (status != 0 && (status < 200 || status >= 300)) {
      push(StreamEvent::error("HTTP " + std::to_string(status) + (error_body.empty() ? "" : ": " + error_body)));
      return true;
    }
    if (!ok) {
      last_error_ = "transport error: " + httplib::to_string(err);
      if (received_any_) {
        push(StreamEvent::error(last_error_));
        return true;
      }
      return false;
    }
    std::vector<std::string> payloads;
    parser.finish(payloads);
    handle(payloads, done);
    if (!done) push(StreamEvent::error("stream ended without [DONE]"));
    return true;
  }

  bool handle(std::vector<std::string>& payloads, bool& done) {
    for (auto& p : payloads) {
      if (done) return false;
      if (p == sse::kDone) {
        push(StreamEvent::done(finish_reason_.empty() ? "stop" : finish_reason_));
        done = true;
        return false;
      }
      try {
        sse::Delta d = sse::parse_delta(p);
        if (d.finish_reason) finish_reason_ = *d.finish_reason;
        if (!d.content.empty()) {
          received_any_ = true;
          push(StreamEvent::chunk(std::move(d.content)));
        }
      } catch (const Error& e) {
        push(StreamEvent::error(e.what()));
        done = true;
        return false;
      }
    }
    return true;
  }

  HttpBackendConfig config_;
  std::string body_;
  std::thread worker_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<StreamEvent> queue_;
  bool cancelled_ = false;
  bool closed_ = false;
  std::optional<StreamEvent> terminal_;

  std::mutex client_mu_;
  httplib::Client* client_ = nullptr;

  bool received_any_ = false;
  std::string finish_reason_;
  std::string last_error_ = "transport error";
};

}  // namespace http_detail

class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    (void)EndpointUrl::parse(config_.base_url);
    if (config_.model.empty()) throw DomainError("HTTP backend needs a model name");
    if (config_.idle_timeout.count() <= 0) throw DomainError("idle timeout must be positive");
  }

  std::unique_ptr<TextStream> generate_stream(const GenerationRequest& request) override {
    request.validate();
    return std::make_unique<http_detail::HttpStream>(config_, chat_request_body(config_, request, {}, false).dump());
  }

  std::unique_ptr<TextStream> continue_from(const GenerationRequest& request, std::string_view committed) override {
    request.validate();
    return std::make_unique<http_detail::HttpStream>(config_,
                                                     chat_request_body(config_, request, committed, true).dump());
  }

  [[nodiscard]] std::string describe() const override { return config_.base_url + "#" + config_.model; }

  [[nodiscard]] const HttpBackendConfig& config() const { return config_; }

 private:
  HttpBackendConfig config_;
};

}  // namespace lenctl
