// Copyright 2026 The lenctl Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Local chat-completions server that streams a Backend's output as SSE frames.
/// Test infrastructure: binds to 127.0.0.1 on an ephemeral port.

#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
// <resolv.h>, pulled in by httplib, defines _res, which collides with Eigen identifiers.
#undef _res
#include <nlohmann/json.hpp>

#include "lenctl/backend.hpp"
#include "lenctl/error.hpp"
#include "lenctl/sse.hpp"

namespace lenctl {

struct MockServerOptions {
  /// Stripped from a trailing assistant message before it reaches the backend.
  std::string assistant_prefix;
  /// Non-zero: answer every request with this status and a JSON error.
  int fail_status = 0;
  /// Send this many frames, then stall (for timeout tests). -1: never stall.
  int stall_after_frames = -1;
  std::chrono::milliseconds stall_for{0};
  /// Emit one unparseable frame after the first content frame.
  bool malformed_frame = false;
};

class MockServer {
 public:
  explicit MockServer(Backend& backend, MockServerOptions options = {})
      : backend_(backend), options_(std::move(options)) {
    server_.Post(R"(.*/chat/completions)", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw BackendError("mock server could not bind a port");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockServer() { stop(); }

  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  [[nodiscard]] int port() const { return port_; }
  [[nodiscard]] std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

  /// Request bodies received so far.
  [[nodiscard]] std::vector<nlohmann::json> requests() const {
    std::lock_guard<std::mutex> lock(mu_);
    return requests_;
  }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
      res.status = 400;
      res.set_content(R"({"error":{"message":"invalid JSON"}})", "application/json");
      return;
    }
    {
      std::lock_guard<std::mutex> lock(mu_);
      requests_.push_back(body);
    }
    if (options_.fail_status != 0) {
      res.status = options_.fail_status;
      res.set_content(R"({"error":{"message":"injected failure"}})", "application/json");
      return;
    }

    auto request = std::make_shared<GenerationRequest>();
    std::string committed;
    bool continuation = false;
    try {
      for (const auto& m : body.at("messages")) {
        request->context.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
      }
      if (!request->context.empty() && request->context.back().role == "assistant") {
        committed = request->context.back().content;
        request->context.pop_back();
        continuation = true;
      }
      request->sampling.temperature = body.value("temperature", kDefaultTemperature);
      request->sampling.stop_sequences.clear();
      if (body.contains("stop")) {
        if (body["stop"].is_string()) {
          request->sampling.stop_sequences.push_back(body["stop"].get<std::string>());
        } else {
          for (const auto& s : body["stop"]) request->sampling.stop_sequences.push_back(s.get<std::string>());
        }
      }
      const int max_tokens = body.value("max_tokens", 0);
      request->sampling.max_units_hint = max_tokens > 64 ? (max_tokens - 64) / 2 : 0;
      request->assistant_prefix = options_.assistant_prefix;
      request->validate();
    } catch (const std::exception& e) {
      res.status = 400;
      nlohmann::json err = {{"error", {{"message", e.what()}}}};
      res.set_content(err.dump(), "application/json");
      return;
    }

    std::shared_ptr<TextStream> stream;
    try {
      stream = continuation ? std::shared_ptr<TextStream>(backend_.continue_from(*request, committed))
                            : std::shared_ptr<TextStream>(backend_.generate_stream(*request));
    } catch (const std::exception& e) {
      res.status = 500;
      nlohmann::json err = {{"error", {{"message", e.what()}}}};
      res.set_content(err.dump(), "application/json");
      return;
    }

    const MockServerOptions opts = options_;
    auto frames = std::make_shared<int>(0);
    res.set_chunked_content_provider(
        "text/event-stream",
        [stream, request, opts, frames](std::size_t, httplib::DataSink& sink) {
          StreamEvent ev = stream->next();
          std::string out;
          if (ev.kind == StreamEventKind::TextChunk) {
            out = sse::delta_frame(ev.text);
            if (opts.malformed_frame && *frames == 0) out += "data: {not json\n\n";
          } else if (ev.kind == StreamEventKind::Done) {
            out = sse::delta_frame("", "mock", ev.text == "stop" ? "stop" : "length") + sse::done_frame();
          } else {
            nlohmann::json err = {{"error", {{"message", ev.text}}}};
            out = "data: " + err.dump() + "\n\n";
          }
          if (opts.stall_after_frames >= 0 && *frames == opts.stall_after_frames) {
            std::this_thread::sleep_for(opts.stall_for);
          }
          ++*frames;
          if (!sink.is_writable() || !sink.write(out.data(), out.size())) {
            stream->cancel();
            return false;
          }
          if (ev.terminal()) sink.done();
          return true;
        },
        [stream](bool) { stream->cancel(); });
  }

  Backend& backend_;
  MockServerOptions options_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  mutable std::mutex mu_;
  std::vector<nlohmann::json> requests_;
};

}  // namespace lenctl
