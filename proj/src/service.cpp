// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#include "evrev/service.hpp"

#include "evrev/canonical_json.hpp"

#include <httplib.h>

#include <sys/socket.h>

#include <atomic>
#include <cstdio>
#include <functional>
#include <map>
#include <mutex>
#include <thread>

namespace evrev {

namespace {

using Clock = std::chrono::steady_clock;

struct Lease {
  std::string reviewer;
  Clock::time_point expires;
};

void send_json(httplib::Response& res, const Json& body, int status = 200) {
  res.status = status;
  res.set_content(canonical_dump(body), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  send_json(res,
            Json{{"error", Json{{"code", error_code_name(code)}, {"message", message}}}},
            http_status(code));
}

std::string reviewer_of(const httplib::Request& req) {
  const std::string id = req.get_header_value("X-Reviewer-Id");
  return id.empty() ? "anonymous" : id;
}

std::string etag_for(const std::string& body) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "\"%016zx\"", std::hash<std::string>{}(body));
  return buf;
}

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  Json j = Json::parse(req.body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::ParseError, "request body is not JSON");
  return j;
}

// SO_REUSEADDR only. httplib's default also sets SO_REUSEPORT, which would
// let a second server bind a port that is already serving.
void socket_options(socket_t sock) {
  int yes = 1;
  setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
}

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::Ok: return 200;
    case ErrorCode::NotFound:
    case ErrorCode::UnknownQA: return 404;
    case ErrorCode::Conflict:
    case ErrorCode::AlreadyProposed:
    case ErrorCode::IllegalInState:
    case ErrorCode::NotReviewed:
    case ErrorCode::UnverifiedQA:
    case ErrorCode::NotFinalized: return 409;
    case ErrorCode::BackendTimeout: return 504;
    case ErrorCode::BackendUnavailable:
    case ErrorCode::BackendMalformedReply:
    case ErrorCode::AllRegionsDegenerate:
    case ErrorCode::NoQAGenerated: return 502;
    case ErrorCode::IoError:
    case ErrorCode::CorruptLog:
    case ErrorCode::BadConfig:
    case ErrorCode::PortInUse: return 500;
    default: return 400;
  }
}

struct Server::Impl {
  Workspace& ws;
  ServerOptions options;
  httplib::Server http;
  std::atomic<int> bound_port{-1};
  std::atomic<bool> started{false};
  std::thread worker;

  std::mutex leases_mu;
  std::map<std::string, Lease> leases;

  Impl(Workspace& w, ServerOptions o) : ws(w), options(std::move(o)) {}

  // Takes or renews the lease; Conflict when someone else holds it.
  Json take_lease(const std::string& key, const std::string& reviewer) {
    std::lock_guard lock(leases_mu);
    const auto now = Clock::now();
    auto it = leases.find(key);
    if (it != leases.end() && it->second.expires > now && it->second.reviewer != reviewer) {
      throw Error(ErrorCode::Conflict, "session " + key + " is leased by " + it->second.reviewer);
    }
    leases[key] = {reviewer, now + options.lease_duration};
    return Json{{"session", key},
                {"reviewer", reviewer},
                {"expires_in_seconds", options.lease_duration.count()}};
  }

  void release_lease(const std::string& key, const std::string& reviewer) {
    std::lock_guard lock(leases_mu);
    auto it = leases.find(key);
    if (it == leases.end()) return;
    if (it->second.reviewer != reviewer && it->second.expires > Clock::now()) {
      throw Error(ErrorCode::Conflict, "session " + key + " is leased by " + it->second.reviewer);
    }
    leases.erase(it);
  }

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  static Handler guarded(Handler inner) {
    return [inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
      try {
        inner(req, res);
      } catch (const Error& e) {
        send_error(res, e.code(), e.what());
      } catch (const nlohmann::json::exception& e) {
        send_error(res, ErrorCode::ParseError, e.what());
      } catch (const std::exception& e) {
        send_json(res, Json{{"error", Json{{"code", "Internal"}, {"message", e.what()}}}}, 500);
      }
    };
  }

  Json record_summary(const StoredRecord& s) {
    const ImageRecord& r = s.record;
    Json qa = Json::array();
    for (const auto& q : r.qa_items) {
      qa.push_back(Json{{"qa_id", q.qa_id},
                        {"question_text", q.question_text},
                        {"status", to_string(q.status)}});
    }
    std::size_t live = 0;
    for (const auto& reg : r.regions) live += reg.deleted ? 0 : 1;
    return Json{{"image_uid", r.image_uid},
                {"image_path", r.image_path},
                {"dataset_type", r.dataset_type()},
                {"adapter", r.adapter},
                {"qa_items", std::move(qa)},
                {"region_count", live},
                {"proposal_mode", to_string(choose_mode(r, r.qa_items.empty()
                                                               ? nullptr
                                                               : &r.qa_items.front()))}};
  }

  void routes() {
    http.set_socket_options(socket_options);

    http.Get("/api/records", guarded([this](const httplib::Request&, httplib::Response& res) {
      Json list = Json::array();
      for (const auto& s : ws.records()) list.push_back(record_summary(s));
      send_json(res, list);
    }));

    http.Get(R"(/api/records/([^/]+))",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               const StoredRecord s = ws.record(req.matches[1]);
               Json doc = record_summary(s);
               doc["record"] = record_to_json(s.record);
               send_json(res, doc);
             }));

    http.Get(R"(/api/records/([^/]+)/image)",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               const StoredRecord s = ws.record(req.matches[1]);
               ImagePayload image = load_image_payload(ws.image_path(s));
               if (image.bytes.empty()) {
                 throw Error(ErrorCode::NotFound, "image file not readable: " + s.record.image_path);
               }
               res.set_content(image.bytes, image.media_type);
             }));

    const std::string session_route = R"(/api/records/([^/]+)/qa/([^/]+))";

    http.Post(session_route + "/propose",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
                const std::string uid = req.matches[1], qa = req.matches[2];
                ws.record(uid);
                take_lease(uid + "__" + qa, reviewer_of(req));
                send_json(res, ws.propose(uid, qa));
              }));

    http.Post(session_route + "/edits",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
                const std::string uid = req.matches[1], qa = req.matches[2];
                const std::string reviewer = reviewer_of(req);
                EditOp op;
                try {
                  op = edit_from_json(parse_body(req));
                } catch (const Error& e) {
                  throw Error(ErrorCode::InputError, e.what());
                }
                if (op.actor.empty()) op.actor = reviewer;
                ws.record(uid);
                take_lease(uid + "__" + qa, reviewer);
                send_json(res, ws.apply_edit(uid, qa, std::move(op)));
              }));

    http.Post(session_route + "/finalize",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
                const std::string uid = req.matches[1], qa = req.matches[2];
                ws.record(uid);
                take_lease(uid + "__" + qa, reviewer_of(req));
                send_json(res, ws.finalize(uid, qa));
              }));

    http.Get(session_route + "/session",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               const Json doc = ws.session(req.matches[1], req.matches[2]);
               const std::string body = canonical_dump(doc);
               if (doc.value("state", "") == to_string(SessionState::finalized)) {
                 const std::string tag = etag_for(body);
                 res.set_header("ETag", tag);
                 res.set_header("Cache-Control", "public, max-age=31536000, immutable");
                 if (req.get_header_value("If-None-Match") == tag) {
                   res.status = 304;
                   return;
                 }
               } else {
                 res.set_header("Cache-Control", "no-store");
               }
               res.set_content(body, "application/json");
             }));

    http.Post(session_route + "/lease",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
                const std::string uid = req.matches[1], qa = req.matches[2];
                ws.record(uid);
                send_json(res, take_lease(uid + "__" + qa, reviewer_of(req)));
              }));

    http.Delete(session_route + "/lease",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const std::string uid = req.matches[1], qa = req.matches[2];
                  release_lease(uid + "__" + qa, reviewer_of(req));
                  send_json(res, Json{{"released", true}});
                }));

    http.Get("/api/metrics/utility",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               const auto rows = ws.utility();
               const std::string format = req.get_param_value("format");
               if (format == "csv") {
                 res.set_content(format_utility_csv(rows), "text/csv");
                 return;
               }
               if (format == "text") {
                 res.set_content(format_utility_text(rows), "text/plain");
                 return;
               }
               Json list = Json::array();
               for (const auto& r : rows) {
                 list.push_back(Json{{"dataset", r.dataset},
                                     {"precision", r.scores.precision},
                                     {"recall", r.scores.recall},
                                     {"f1", r.scores.f1},
                                     {"retained_pred_count", r.counts.retained_pred_count},
                                     {"effective_removed_count", r.counts.effective_removed_count},
                                     {"added_gt_count", r.counts.added_gt_count},
                                     {"new_drawn_count", r.counts.new_drawn_count},
                                     {"new_drawn_ratio", r.new_drawn_ratio}});
               }
               send_json(res, list);
             }));

    http.Get("/api/metrics/iaa",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               std::vector<std::filesystem::path> files = options.label_files;
               if (files.empty()) {
                 const auto fallback = ws.data_dir() / "labels.csv";
                 if (!std::filesystem::exists(fallback)) {
                   throw Error(ErrorCode::NotFound, "no labels file configured");
                 }
                 files.push_back(fallback);
               }
               const auto rows = agreement_table(load_label_files(files));
               if (req.get_param_value("format") == "csv") {
                 res.set_content(format_agreement_csv(rows), "text/csv");
                 return;
               }
               Json list = Json::array();
               for (const auto& r : rows) {
                 list.push_back(Json{{"dataset", r.dataset},
                                     {"criterion", to_string(r.criterion)},
                                     {"instances", r.instances},
                                     {"agreement", r.agreement},
                                     {"kappa", r.kappa}});
               }
               send_json(res, list);
             }));
  }
};

Server::Server(Workspace& workspace, ServerOptions options)
    : impl_(std::make_unique<Impl>(workspace, std::move(options))) {
  impl_->routes();
}

Server::~Server() { stop(); }

int Server::bind() {
  if (impl_->bound_port >= 0) return impl_->bound_port;
  if (impl_->options.ui_dir) {
    const auto& dir = *impl_->options.ui_dir;
    if (!std::filesystem::is_directory(dir) || !impl_->http.set_mount_point("/", dir.string())) {
      throw Error(ErrorCode::BadConfig, "UI directory does not exist: " + dir.string());
    }
  }
  const auto& o = impl_->options;
  if (o.port < 0 || o.port > 65535) {
    throw Error(ErrorCode::BadConfig, "port out of range: " + std::to_string(o.port));
  }
  int port = o.port;
  if (port == 0) {
    port = impl_->http.bind_to_any_port(o.host);
    if (port < 0) throw Error(ErrorCode::PortInUse, "cannot bind any port on " + o.host);
  } else if (!impl_->http.bind_to_port(o.host, port)) {
    throw Error(ErrorCode::PortInUse, o.host + ":" + std::to_string(port) + " is not available");
  }
  impl_->bound_port = port;
  return port;
}

void Server::run() {
  bind();
  impl_->started = true;
  impl_->http.listen_after_bind();
}

void Server::start() {
  bind();
  impl_->started = true;
  impl_->worker = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
}

void Server::wait() {
  if (impl_->worker.joinable()) impl_->worker.join();
}

void Server::stop() {
  if (!impl_ || !impl_->started) return;
  impl_->http.wait_until_ready();
  impl_->http.stop();
  wait();
}

int Server::port() const { return impl_->bound_port; }

bool Server::running() const { return impl_->http.is_running(); }

}  // namespace evrev
