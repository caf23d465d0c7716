// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

// HTTP backend against an in-process server.

#include "evrev/error.hpp"
#include "evrev/proposal.hpp"
#include "support.hpp"

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

using namespace evrev;
using evrev::testing::fixture;

namespace {

class FakeModel {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit FakeModel(Handler handler) : handler_(std::move(handler)) {
    server_.Post("/propose", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      last_auth = req.get_header_value("Authorization");
      last_body = req.body;
      handler_(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeModel() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/propose"; }

  std::atomic<int> hits{0};
  std::string last_auth;
  std::string last_body;

 private:
  Handler handler_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

HttpBackendConfig config_for(const FakeModel& model) {
  HttpBackendConfig c;
  c.url = model.url();
  c.timeout = std::chrono::milliseconds(2000);
  c.retries = 1;
  c.max_jitter = std::chrono::milliseconds(5);
  return c;
}

ProposalRequest selection_request() {
  const ImageRecord rec = evrev::testing::states_record();
  return build_request(rec, &rec.qa_items[0], ProposalMode::selection,
                       load_image_payload(fixture("images/img_001.png")));
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Ok;
}

}  // namespace

TEST_CASE("wire contract over HTTP") {
  FakeModel model([](const httplib::Request& req, httplib::Response& res) {
    const Json body = Json::parse(req.body);
    Json reply{{"selected_ids", Json::array()}, {"meta", {{"model", "fake-vlm"}}}};
    for (const auto& c : body["candidates"]) {
      if (c["label"] == "Kansas") reply["selected_ids"].push_back(c["id"]);
    }
    res.set_content(reply.dump(), "application/json");
  });
  auto cfg = config_for(model);
  cfg.token = "s3cret";
  auto backend = make_http_backend(cfg);
  CHECK(backend->name() == "http");

  const auto res = select_evidence(selection_request(), *backend);
  CHECK(res.selected_ids == std::vector<std::string>{"a_3"});
  CHECK(res.backend_meta["model"] == "fake-vlm");
  CHECK(model.last_auth == "Bearer s3cret");
  const Json sent = Json::parse(model.last_body);
  CHECK(sent["mode"] == "selection");
  CHECK(sent["image"]["media_type"] == "image/png");
  CHECK_FALSE(sent["image"]["data"].get<std::string>().empty());
  CHECK(sent["question"] == "Which state borders Texas to the north?");
}

TEST_CASE("malformed HTTP body degrades to an empty selection") {
  FakeModel model([](const httplib::Request&, httplib::Response& res) {
    res.set_content("<html>oops</html>", "text/html");
  });
  auto backend = make_http_backend(config_for(model));
  const auto res = select_evidence(selection_request(), *backend);
  CHECK(res.selected_ids.empty());
  CHECK(res.backend_meta["raw_reply"] == "<html>oops</html>");
  CHECK(model.hits == 1);
}

TEST_CASE("unknown ids from the model are filtered") {
  FakeModel model([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"selected_ids": ["zzz", "a_1"]})", "application/json");
  });
  auto backend = make_http_backend(config_for(model));
  const auto res = select_evidence(selection_request(), *backend);
  CHECK(res.selected_ids == std::vector<std::string>{"a_1"});
  CHECK(res.backend_meta["unknown_ids"] == Json::array({"zzz"}));
}

TEST_CASE("server errors retry once then fail as unavailable") {
  FakeModel model([](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  auto backend = make_http_backend(config_for(model));
  CHECK(code_of([&] { select_evidence(selection_request(), *backend); }) ==
        ErrorCode::BackendUnavailable);
  CHECK(model.hits == 2);
}

TEST_CASE("a retry can recover") {
  std::atomic<int> n{0};
  FakeModel model([&](const httplib::Request&, httplib::Response& res) {
    if (n++ == 0) {
      res.status = 502;
      return;
    }
    res.set_content(R"({"selected_ids": ["a_2"]})", "application/json");
  });
  auto backend = make_http_backend(config_for(model));
  CHECK(select_evidence(selection_request(), *backend).selected_ids ==
        std::vector<std::string>{"a_2"});
}

TEST_CASE("slow backends time out") {
  FakeModel model([](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(600));
    res.set_content("{}", "application/json");
  });
  auto cfg = config_for(model);
  cfg.timeout = std::chrono::milliseconds(150);
  cfg.retries = 0;
  auto backend = make_http_backend(cfg);
  CHECK(code_of([&] { select_evidence(selection_request(), *backend); }) ==
        ErrorCode::BackendTimeout);
}

TEST_CASE("unreachable backends") {
  // Bound but never listening, so connections are refused.
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  const int port = ntohs(addr.sin_port);
  HttpBackendConfig cfg;
  cfg.url = "http://127.0.0.1:" + std::to_string(port) + "/propose";
  cfg.timeout = std::chrono::milliseconds(500);
  cfg.retries = 0;
  auto backend = make_http_backend(cfg);
  CHECK(code_of([&] { select_evidence(selection_request(), *backend); }) ==
        ErrorCode::BackendUnavailable);
  ::close(fd);
}

TEST_CASE("configuration errors") {
  CHECK(code_of([] { make_http_backend({}); }) == ErrorCode::BadConfig);
  HttpBackendConfig cfg;
  cfg.url = "ftp://example.org/x";
  CHECK(code_of([&] { make_http_backend(cfg); }) == ErrorCode::BadConfig);
  cfg.url = "https://example.org/x";
  CHECK(code_of([&] { make_http_backend(cfg); }) == ErrorCode::BadConfig);
  cfg.url = "http://127.0.0.1:9/x";
  cfg.prompt_file = fixture("appendixD.json");
  CHECK(code_of([&] { make_http_backend(cfg); }) == ErrorCode::BadConfig);
  cfg.prompt_file = fixture("config/missing.json");
  CHECK(code_of([&] { make_http_backend(cfg); }) == ErrorCode::IoError);
}

TEST_CASE("environment supplies the endpoint") {
  ::setenv("EVREV_BACKEND_URL", "http://10.0.0.1:8000/v1", 1);
  ::setenv("EVREV_BACKEND_TOKEN", "tok", 1);
  ::setenv("EVREV_PROMPT_FILE", "", 1);
  const auto cfg = http_backend_config_from_env();
  CHECK(cfg.url == "http://10.0.0.1:8000/v1");
  CHECK(cfg.token == "tok");
  CHECK_FALSE(cfg.prompt_file.has_value());
  ::unsetenv("EVREV_BACKEND_URL");
  ::unsetenv("EVREV_BACKEND_TOKEN");
  ::unsetenv("EVREV_PROMPT_FILE");
}

TEST_CASE("chat driver renders the prompt template") {
  FakeModel model([](const httplib::Request& req, httplib::Response& res) {
    const Json body = Json::parse(req.body);
    const std::string text = body["messages"][1]["content"][0]["text"];
    const bool ok = text.find("Which state borders Texas") != std::string::npos &&
                    text.find("\"a_2\"") != std::string::npos;
    Json reply{{"choices",
                {{{"message",
                   {{"role", "assistant"},
                    {"content", ok ? "Here you go:\n```json\n{\"selected_ids\": [\"a_2\"]}\n```"
                                   : "template not rendered"}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  auto cfg = config_for(model);
  cfg.prompt_file = fixture("config/chat_prompts.json");
  auto backend = make_http_backend(cfg);
  CHECK(backend->name() == "http-chat");
  const auto res = select_evidence(selection_request(), *backend);
  CHECK(res.selected_ids == std::vector<std::string>{"a_2"});

  const Json sent = Json::parse(model.last_body);
  CHECK(sent["model"] == "gpt-4o-mini");
  CHECK(sent["messages"][0]["role"] == "system");
  const std::string url = sent["messages"][1]["content"][1]["image_url"]["url"];
  CHECK(url.rfind("data:image/png;base64,", 0) == 0);
}

TEST_CASE("chat replies without content are malformed") {
  FakeModel model([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices": []})", "application/json");
  });
  auto cfg = config_for(model);
  cfg.prompt_file = fixture("config/chat_prompts.json");
  auto backend = make_http_backend(cfg);
  const auto res = select_evidence(selection_request(), *backend);
  CHECK(res.selected_ids.empty());
  CHECK(std::find(res.warnings.begin(), res.warnings.end(), "malformed_reply") !=
        res.warnings.end());
}
