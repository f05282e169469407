// Copyright 2026 The lenctl Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Backend selection by URI: "mock:<script>[,<script>...]" for the offline
/// mock, or an http(s) base URL for a chat-completions endpoint.

#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "lenctl/backend.hpp"
#include "lenctl/error.hpp"
#include "lenctl/http_backend.hpp"
#include "lenctl/mock_backend.hpp"

namespace lenctl {

inline bool is_mock_uri(std::string_view uri) { return uri.rfind("mock:", 0) == 0; }

/// Scripts of a mock URI, e.g. "mock:undershoot=5,compliant:3".
inline std::vector<MockScript> parse_mock_uri(std::string_view uri) {
  if (!is_mock_uri(uri)) throw DomainError("not a mock URI: '" + std::string(uri) + "'");
  std::vector<MockScript> out;
  std::string_view rest = uri.substr(5);
  while (true) {
    const auto comma = rest.find(',');
    const auto part = rest.substr(0, comma);
    if (part.empty()) throw DomainError("empty mock script in '" + std::string(uri) + "'");
    out.push_back(MockScript::parse(part));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

/// Opens a backend. `http` supplies model, auth and timeouts for URL backends;
/// its base_url is replaced by `uri`.
inline std::unique_ptr<Backend> open_backend(std::string_view uri, HttpBackendConfig http = {}) {
  if (is_mock_uri(uri)) return std::make_unique<MockBackend>(parse_mock_uri(uri));
  if (uri.rfind("http://", 0) == 0 || uri.rfind("https://", 0) == 0) {
    http.base_url = std::string(uri);
    return std::make_unique<HttpBackend>(std::move(http));
  }
  throw DomainError("unknown backend '" + std::string(uri) + "' (expected mock:<behavior> or an http(s) URL)");
}

}  // namespace lenctl
