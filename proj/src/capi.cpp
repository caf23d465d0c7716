// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#include "evrev/evrev.h"

#include "evrev/canonical_json.hpp"
#include "evrev/error.hpp"
#include "evrev/ingest.hpp"
#include "evrev/service.hpp"
#include "evrev/workspace.hpp"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

using evrev::ErrorCode;
using evrev::Json;

struct evrev_workspace {
  std::unique_ptr<evrev::Workspace> ws;
};

struct evrev_server {
  std::unique_ptr<evrev::Server> server;
};

namespace {

thread_local std::string g_last_error;

constexpr const char* kVersion = "0.3.0";

template <typename F>
evrev_status guard(F&& body) {
  g_last_error.clear();
  try {
    body();
    return EVREV_OK;
  } catch (const evrev::Error& e) {
    g_last_error = e.what();
    return static_cast<evrev_status>(static_cast<int>(e.code()));
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return EVREV_PARSE_ERROR;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return EVREV_IO_ERROR;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return EVREV_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return EVREV_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size());
  out[s.size()] = '\0';
  return out;
}

void put(char** out, const std::string& s) {
  if (out != nullptr) *out = dup_string(s);
}

void put(char** out, const Json& doc) {
  if (out != nullptr) *out = dup_string(evrev::canonical_dump(doc));
}

std::string need(const char* s, const char* what) {
  if (s == nullptr) throw evrev::Error(ErrorCode::InputError, std::string(what) + " is NULL");
  return s;
}

evrev::Workspace& need_ws(evrev_workspace* ws) {
  if (ws == nullptr || !ws->ws) throw evrev::Error(ErrorCode::InputError, "workspace is NULL");
  return *ws->ws;
}

Json parse_options(const char* text) {
  if (text == nullptr || *text == '\0') return Json::object();
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw evrev::Error(ErrorCode::BadConfig, "options must be a JSON object");
  }
  return j;
}

std::string format_of(const char* format) {
  const std::string f = format == nullptr || *format == '\0' ? "text" : format;
  if (f != "text" && f != "csv" && f != "json") {
    throw evrev::Error(ErrorCode::InputError, "format must be text, csv or json");
  }
  return f;
}

evrev::WorkspaceConfig config_from(const std::string& data_dir, const Json& o) {
  evrev::WorkspaceConfig c;
  c.data_dir = data_dir;
  c.http = evrev::http_backend_config_from_env();
  try {
    if (o.contains("backend")) c.backend = o["backend"].get<std::string>();
    if (o.contains("backend_url")) c.http.url = o["backend_url"].get<std::string>();
    if (o.contains("backend_token")) c.http.token = o["backend_token"].get<std::string>();
    if (o.contains("prompt_file")) {
      const auto p = o["prompt_file"].get<std::string>();
      if (p.empty()) {
        c.http.prompt_file.reset();
      } else {
        c.http.prompt_file = p;
      }
    }
    if (o.contains("backend_timeout_ms")) {
      c.http.timeout = std::chrono::milliseconds(o["backend_timeout_ms"].get<std::int64_t>());
    }
    if (o.contains("backend_retries")) c.http.retries = o["backend_retries"].get<int>();
    if (o.contains("backend_concurrency")) {
      c.backend_concurrency = o["backend_concurrency"].get<int>();
    }
    if (o.contains("mock_seed")) c.mock_seed = o["mock_seed"].get<std::uint64_t>();
    if (o.contains("retain_iou")) c.retain_iou = o["retain_iou"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw evrev::Error(ErrorCode::BadConfig, std::string("bad workspace option: ") + e.what());
  }
  return c;
}

Json violations_json(const evrev::ValidationReport& report) {
  Json out = Json::array();
  for (const auto& v : report) {
    out.push_back(Json{{"path", v.path},
                       {"message", v.message},
                       {"severity", v.severity == evrev::Severity::error ? "error" : "warning"}});
  }
  return out;
}

Json utility_json(const std::vector<evrev::UtilityRow>& rows) {
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
  return list;
}

Json agreement_json(const std::vector<evrev::AgreementRow>& rows) {
  Json list = Json::array();
  for (const auto& r : rows) {
    list.push_back(Json{{"dataset", r.dataset},
                        {"criterion", evrev::to_string(r.criterion)},
                        {"instances", r.instances},
                        {"agreement", r.agreement},
                        {"kappa", r.kappa}});
  }
  return list;
}

}  // namespace

extern "C" {

const char* evrev_version(void) { return kVersion; }

const char* evrev_status_name(int status) {
  if (status == EVREV_INTERNAL) return "Internal";
  return evrev::error_code_name(static_cast<ErrorCode>(status)).data();
}

const char* evrev_last_error(void) { return g_last_error.c_str(); }

void evrev_string_free(char* s) { std::free(s); }

evrev_status evrev_workspace_open(const char* data_dir, const char* config_json,
                                  evrev_workspace** out) {
  return guard([&] {
    if (out == nullptr) throw evrev::Error(ErrorCode::InputError, "out is NULL");
    *out = nullptr;
    auto config = config_from(need(data_dir, "data_dir"), parse_options(config_json));
    auto handle = std::make_unique<evrev_workspace>();
    handle->ws = std::make_unique<evrev::Workspace>(std::move(config));
    *out = handle.release();
  });
}

void evrev_workspace_close(evrev_workspace* ws) { delete ws; }

evrev_status evrev_validate_file(const char* dataset_path, char** out) {
  return guard([&] {
    const auto entries = evrev::load_dataset(need(dataset_path, "dataset_path"));
    Json report = Json::array();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      Json item{{"index", i},
                {"image_uid", ""},
                {"adapter", entries[i].adapter},
                {"violations", Json::array()}};
      try {
        const auto rec = evrev::adapt_record(entries[i].raw, entries[i].adapter);
        item["image_uid"] = rec.image_uid;
        item["violations"] = violations_json(evrev::validate_record(rec));
      } catch (const evrev::AdaptationError& e) {
        item["violations"] = violations_json(e.violations());
        item["error"] = e.what();
      } catch (const evrev::Error& e) {
        item["error"] = e.what();
      }
      report.push_back(std::move(item));
    }
    put(out, report);
  });
}

evrev_status evrev_ingest(evrev_workspace* ws, const char* dataset_path, char** out) {
  return guard([&] {
    const auto uids = need_ws(ws).ingest(need(dataset_path, "dataset_path"));
    put(out, Json{{"stored", uids}});
  });
}

evrev_status evrev_list_records(evrev_workspace* ws, char** out) {
  return guard([&] {
    Json list = Json::array();
    for (const auto& s : need_ws(ws).records()) {
      list.push_back(Json{{"image_uid", s.record.image_uid},
                          {"image_path", s.record.image_path},
                          {"dataset_type", s.record.dataset_type()},
                          {"qa_count", s.record.qa_items.size()},
                          {"region_count", s.record.regions.size()}});
    }
    put(out, list);
  });
}

evrev_status evrev_get_record(evrev_workspace* ws, const char* image_uid, char** out) {
  return guard([&] {
    put(out, evrev::record_to_json(need_ws(ws).record(need(image_uid, "image_uid")).record));
  });
}

evrev_status evrev_propose(evrev_workspace* ws, const char* image_uid, const char* qa_id,
                           char** out) {
  return guard([&] {
    put(out, need_ws(ws).propose(need(image_uid, "image_uid"), need(qa_id, "qa_id")));
  });
}

evrev_status evrev_apply_edit(evrev_workspace* ws, const char* image_uid, const char* qa_id,
                              const char* edit_json, char** out) {
  return guard([&] {
    const Json j = Json::parse(need(edit_json, "edit_json"), nullptr, false);
    if (j.is_discarded()) throw evrev::Error(ErrorCode::ParseError, "edit is not JSON");
    put(out, need_ws(ws).apply_edit(need(image_uid, "image_uid"), need(qa_id, "qa_id"),
                                    evrev::edit_from_json(j)));
  });
}

evrev_status evrev_finalize(evrev_workspace* ws, const char* image_uid, const char* qa_id,
                            char** out) {
  return guard([&] {
    put(out, need_ws(ws).finalize(need(image_uid, "image_uid"), need(qa_id, "qa_id")));
  });
}

evrev_status evrev_get_session(evrev_workspace* ws, const char* image_uid, const char* qa_id,
                               char** out) {
  return guard([&] {
    put(out, need_ws(ws).session(need(image_uid, "image_uid"), need(qa_id, "qa_id")));
  });
}

evrev_status evrev_export(evrev_workspace* ws, const char* out_dir, int overlay, char** out) {
  return guard([&] {
    Json paths = Json::array();
    for (const auto& p : need_ws(ws).export_all(need(out_dir, "out_dir"), overlay != 0)) {
      paths.push_back(p.string());
    }
    put(out, paths);
  });
}

evrev_status evrev_evaluate(const char* sessions_dir, const char* format, char** out) {
  return guard([&] {
    const std::string f = format_of(format);
    const auto rows =
        evrev::utility_table(evrev::collect_session_counts(need(sessions_dir, "sessions_dir")));
    if (f == "csv") {
      put(out, evrev::format_utility_csv(rows));
    } else if (f == "json") {
      put(out, utility_json(rows));
    } else {
      put(out, evrev::format_utility_text(rows));
    }
  });
}

evrev_status evrev_iaa(const char* const* label_files, size_t count, const char* format,
                       char** out) {
  return guard([&] {
    const std::string f = format_of(format);
    std::vector<std::filesystem::path> files;
    for (size_t i = 0; i < count; ++i) files.emplace_back(need(label_files[i], "label file"));
    const auto rows = evrev::agreement_table(evrev::load_label_files(files));
    if (f == "csv") {
      put(out, evrev::format_agreement_csv(rows));
    } else if (f == "json") {
      put(out, agreement_json(rows));
    } else {
      put(out, evrev::format_agreement_text(rows));
    }
  });
}

evrev_status evrev_server_start(evrev_workspace* ws, const char* options_json,
                                evrev_server** out) {
  return guard([&] {
    if (out == nullptr) throw evrev::Error(ErrorCode::InputError, "out is NULL");
    *out = nullptr;
    const Json o = parse_options(options_json);
    evrev::ServerOptions opts;
    try {
      opts.host = o.value("host", opts.host);
      opts.port = o.value("port", opts.port);
      if (o.contains("ui_dir") && !o["ui_dir"].get<std::string>().empty()) {
        opts.ui_dir = o["ui_dir"].get<std::string>();
      }
      for (const auto& l : o.value("labels", Json::array())) {
        opts.label_files.emplace_back(l.get<std::string>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw evrev::Error(ErrorCode::BadConfig, std::string("bad server option: ") + e.what());
    }
    auto handle = std::make_unique<evrev_server>();
    handle->server = std::make_unique<evrev::Server>(need_ws(ws), std::move(opts));
    handle->server->start();
    *out = handle.release();
  });
}

int evrev_server_port(const evrev_server* server) {
  return server != nullptr && server->server ? server->server->port() : -1;
}

evrev_status evrev_server_wait(evrev_server* server) {
  return guard([&] {
    if (server == nullptr) throw evrev::Error(ErrorCode::InputError, "server is NULL");
    server->server->wait();
  });
}

void evrev_server_stop(evrev_server* server) {
  if (server == nullptr) return;
  if (server->server) server->server->stop();
  delete server;
}

}  // extern "C"
