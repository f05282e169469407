// Copyright 2026 The lenctl Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Server-sent events framing for chat-completions streams.

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lenctl/error.hpp"

namespace lenctl::sse {

inline constexpr std::string_view kDone = "[DONE]";

/// Incremental SSE decoder: bytes in, the data payload of each event out.
/// Multi-line data fields are joined with '\n'; comments and other fields are ignored.
class Parser {
 public:
  void feed(std::string_view bytes, std::vector<std::string>& out) {
    buffer_.append(bytes);
    std::size_t start = 0;
    for (;;) {
      const std::size_t nl = buffer_.find('\n', start);
      if (nl == std::string::npos) break;
      std::string_view line(buffer_.data() + start, nl - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      on_line(line, out);
      start = nl + 1;
    }
    buffer_.erase(0, start);
  }

  /// Dispatches a final event that was not followed by a blank line.
  void finish(std::vector<std::string>& out) {
    if (!buffer_.empty()) {
      std::string_view line(buffer_);
      if (line.back() == '\r') line.remove_suffix(1);
      on_line(line, out);
      buffer_.clear();
    }
    dispatch(out);
  }

 private:
  void on_line(std::string_view line, std::vector<std::string>& out) {
    if (line.empty()) {
      dispatch(out);
      return;
    }
    if (line.front() == ':') return;
    const std::size_t colon = line.find(':');
    std::string_view field = line.substr(0, colon);
    std::string_view value = colon == std::string_view::npos ? std::string_view() : line.substr(colon + 1);
    if (!value.empty() && value.front() == ' ') value.remove_prefix(1);
    if (field != "data") return;
    if (has_data_) data_ += '\n';
    data_.append(value);
    has_data_ = true;
  }

  void dispatch(std::vector<std::string>& out) {
    if (has_data_) out.push_back(std::move(data_));
    data_.clear();
    has_data_ = false;
  }

  std::string buffer_;
  std::string data_;
  bool has_data_ = false;
};

/// One decoded chat-completions frame.
struct Delta {
  std::string content;
  std::optional<std::string> finish_reason;
};

/// Parses a streamed chat-completions payload. Throws ParseError on malformed
/// JSON and BackendError on an error object.
inline Delta parse_delta(std::string_view payload) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(payload);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed stream frame: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("stream frame is not a JSON object");
  if (j.contains("error")) {
    const auto& err = j["error"];
    std::string msg = err.is_object() && err.contains("message") && err["message"].is_string()
                          ? err["message"].get<std::string>()
                          : err.dump();
    throw BackendError("endpoint error: " + msg);
  }
  Delta d;
  if (!j.contains("choices") || !j["choices"].is_array()) throw ParseError("stream frame without choices");
  if (j["choices"].empty()) return d;
  const auto& choice = j["choices"][0];
  if (choice.contains("delta") && choice["delta"].is_object()) {
    const auto& delta = choice["delta"];
    if (delta.contains("content") && delta["content"].is_string()) d.content = delta["content"].get<std::string>();
  } else if (choice.contains("text") && choice["text"].is_string()) {
    d.content = choice["text"].get<std::string>();
  }
  if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
    d.finish_reason = choice["finish_reason"].get<std::string>();
  }
  return d;
}

/// "data: {...}\n\n" carrying one content delta.
inline std::string delta_frame(std::string_view content, std::string_view model = "mock",
                               std::optional<std::string_view> finish_reason = std::nullopt) {
  nlohmann::ordered_json j;
  j["object"] = "chat.completion.chunk";
  j["model"] = model;
  nlohmann::ordered_json choice;
  choice["index"] = 0;
  choice["delta"] = {{"content", content}};
  choice["finish_reason"] = finish_reason ? nlohmann::ordered_json(*finish_reason) : nlohmann::ordered_json();
  j["choices"] = nlohmann::ordered_json::array({choice});
  return "data: " + j.dump() + "\n\n";
}

inline std::string done_frame() { return "data: " + std::string(kDone) + "\n\n"; }

}  // namespace lenctl::sse
