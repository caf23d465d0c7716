// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

// HTTP drivers for the proposal contract: the plain wire exchange and an
// OpenAI-style chat completions adapter with file-based prompt templates.

#include "evrev/canonical_json.hpp"
#include "evrev/error.hpp"
#include "evrev/proposal.hpp"

#include <httplib.h>

#include <cstdlib>
#include <random>
#include <regex>
#include <thread>

namespace evrev {

namespace {

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  static const std::regex re(R"(^(http://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) {
    throw Error(ErrorCode::BadConfig, "backend URL must look like http://host[:port]/path");
  }
  return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

std::string replace_all(std::string text, std::string_view key, std::string_view value) {
  for (std::size_t pos = text.find(key); pos != std::string::npos;
       pos = text.find(key, pos + value.size())) {
    text.replace(pos, key.size(), value);
  }
  return text;
}

class HttpBackend final : public ProposalBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config)
      : config_(std::move(config)), endpoint_(split_url(config_.url)) {
    if (config_.prompt_file) {
      prompts_ = parse_json_file(*config_.prompt_file);
      if (!prompts_.contains("templates") || !prompts_["templates"].is_object()) {
        throw Error(ErrorCode::BadConfig, "prompt file needs a \"templates\" object");
      }
    }
  }

  std::string name() const override { return config_.prompt_file ? "http-chat" : "http"; }

  Json exchange(const Json& request_wire) override {
    const Json body = config_.prompt_file ? chat_body(request_wire) : request_wire;
    std::mt19937_64 rng(std::random_device{}());
    for (int attempt = 0;; ++attempt) {
      try {
        const Json reply = post_once(body);
        return config_.prompt_file ? chat_content(reply) : reply;
      } catch (const Error& e) {
        const bool transient = e.code() == ErrorCode::BackendTimeout ||
                               e.code() == ErrorCode::BackendUnavailable;
        if (!transient || attempt >= config_.retries) throw;
      }
      const auto max = std::max<std::int64_t>(config_.max_jitter.count(), 0);
      std::uniform_int_distribution<std::int64_t> jitter(0, max);
      std::this_thread::sleep_for(std::chrono::milliseconds(jitter(rng)));
    }
  }

 private:
  Json post_once(const Json& body) const {
    httplib::Client client(endpoint_.base);
    const auto secs = config_.timeout.count() / 1000;
    const auto usecs = (config_.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!config_.token.empty()) headers.emplace("Authorization", "Bearer " + config_.token);

    auto res = client.Post(endpoint_.path, headers, body.dump(), "application/json");
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
        throw Error(ErrorCode::BackendTimeout, "proposal backend timed out");
      }
      throw Error(ErrorCode::BackendUnavailable,
                  "proposal backend unreachable: " + httplib::to_string(err));
    }
    if (res->status < 200 || res->status >= 300) {
      throw Error(ErrorCode::BackendUnavailable,
                  "proposal backend answered HTTP " + std::to_string(res->status));
    }
    auto parsed = Json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) {
      throw Error(ErrorCode::BackendMalformedReply, res->body);
    }
    return parsed;
  }

  Json chat_body(const Json& w) const {
    const std::string mode = w.value("mode", "selection");
    const auto& templates = prompts_["templates"];
    if (!templates.contains(mode) || !templates[mode].is_string()) {
      throw Error(ErrorCode::BadConfig, "prompt file has no template for mode " + mode);
    }
    std::string prompt = templates[mode].get<std::string>();
    auto str = [&](const char* k) {
      auto it = w.find(k);
      return it != w.end() && it->is_string() ? it->get<std::string>() : std::string();
    };
    Json candidates = Json::array();
    for (const auto& c : w.value("candidates", Json::array())) {
      candidates.push_back(Json{{"id", c.value("id", "")}, {"bbox", c.value("bbox", Json::array())},
                                {"label", c.value("label", Json(nullptr))}});
    }
    prompt = replace_all(prompt, "{image_uid}", str("image_uid"));
    prompt = replace_all(prompt, "{question}", str("question"));
    prompt = replace_all(prompt, "{answer}", str("answer"));
    prompt = replace_all(prompt, "{choices}", w.value("choices", Json::array()).dump());
    prompt = replace_all(prompt, "{candidates}", candidates.dump());
    prompt = replace_all(prompt, "{image_size}", w.value("image_size", Json(nullptr)).dump());

    Json content = Json::array();
    content.push_back(Json{{"type", "text"}, {"text", prompt}});
    const Json image = w.value("image", Json::object());
    if (!image.value("data", "").empty()) {
      content.push_back(Json{{"type", "image_url"},
                             {"image_url", Json{{"url", "data:" + image.value("media_type", "") +
                                                            ";base64," + image.value("data", "")}}}});
    }
    Json messages = Json::array();
    if (prompts_.contains("system")) {
      messages.push_back(Json{{"role", "system"}, {"content", prompts_["system"]}});
    }
    messages.push_back(Json{{"role", "user"}, {"content", std::move(content)}});
    return Json{{"model", prompts_.value("model", "")},
                {"messages", std::move(messages)},
                {"temperature", prompts_.value("temperature", 0.0)}};
  }

  // Returns the assistant text; the proposal layer extracts the first JSON
  // object from it.
  static Json chat_content(const Json& reply) {
    try {
      return Json(reply.at("choices").at(0).at("message").at("content").get<std::string>());
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::BackendMalformedReply, reply.dump());
    }
  }

  HttpBackendConfig config_;
  Endpoint endpoint_;
  Json prompts_;
};

}  // namespace

HttpBackendConfig http_backend_config_from_env() {
  HttpBackendConfig c;
  if (const char* v = std::getenv("EVREV_BACKEND_URL")) c.url = v;
  if (const char* v = std::getenv("EVREV_BACKEND_TOKEN")) c.token = v;
  if (const char* v = std::getenv("EVREV_PROMPT_FILE"); v != nullptr && *v != '\0') {
    c.prompt_file = v;
  }
  return c;
}

std::unique_ptr<ProposalBackend> make_http_backend(HttpBackendConfig config) {
  if (config.url.empty()) {
    throw Error(ErrorCode::BadConfig, "http backend needs a URL (EVREV_BACKEND_URL)");
  }
  return std::make_unique<HttpBackend>(std::move(config));
}

}  // namespace evrev
