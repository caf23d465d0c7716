// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

// evrev: batch front end over the C API.

#include "evrev/evrev.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using Json = nlohmann::ordered_json;

struct Failure {
  int status;
  std::string message;
};

// Owns one string handed out by the library.
class Out {
 public:
  Out() = default;
  Out(const Out&) = delete;
  Out& operator=(const Out&) = delete;
  ~Out() { evrev_string_free(p_); }
  char** slot() {
    evrev_string_free(p_);
    p_ = nullptr;
    return &p_;
  }
  std::string str() const { return p_ ? p_ : ""; }
  Json json() const { return Json::parse(str()); }

 private:
  char* p_ = nullptr;
};

void check(evrev_status s) {
  if (s != EVREV_OK) throw Failure{s, evrev_last_error()};
}

struct Settings {
  std::string data_dir = "evrev-data";
  std::string out_dir = "evrev-out";
  std::string backend = "mock";
  double retain_iou = 0.5;
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string backend_url;
  std::string backend_token;
  std::string prompt_file;
  std::uint64_t mock_seed = 0;
  std::string ui_dir;
  std::string config;
};

std::string canon_key(std::string k) {
  for (auto& c : k) {
    if (c == '_') c = '-';
  }
  return k;
}

// Applies config file values to options the command line and environment
// left unset, so the precedence is flags > environment > config file.
void apply_config(CLI::App& app, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw Failure{EVREV_BAD_CONFIG, "cannot read config file " + path};
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::Error& e) {
    throw Failure{EVREV_BAD_CONFIG, path + ": " + e.what()};
  }
  std::vector<CLI::App*> scopes{&app};
  for (auto* sub : app.get_subcommands()) scopes.push_back(sub);
  for (const auto& item : items) {
    if (item.inputs.empty()) continue;
    const std::string name = "--" + canon_key(item.name);
    bool known = false;
    for (CLI::App* scope : scopes) {
      if (!item.parents.empty() && item.parents.front() != scope->get_name()) continue;
      CLI::Option* opt = nullptr;
      try {
        opt = scope->get_option(name);
      } catch (const CLI::OptionNotFound&) {
        continue;
      }
      known = true;
      if (opt->count() > 0) continue;
      opt->clear();
      for (const auto& v : item.inputs) opt->add_result(v);
      try {
        opt->run_callback();
      } catch (const CLI::ParseError& e) {
        throw Failure{EVREV_BAD_CONFIG, path + ": " + item.name + ": " + e.what()};
      }
    }
    if (!known && item.parents.empty()) {
      throw Failure{EVREV_BAD_CONFIG, path + ": unknown setting " + item.name};
    }
  }
}

struct Workspace {
  evrev_workspace* ws = nullptr;
  explicit Workspace(const Settings& s) {
    Json cfg{{"backend", s.backend},
             {"retain_iou", s.retain_iou},
             {"mock_seed", s.mock_seed},
             {"prompt_file", s.prompt_file}};
    if (!s.backend_url.empty()) cfg["backend_url"] = s.backend_url;
    if (!s.backend_token.empty()) cfg["backend_token"] = s.backend_token;
    check(evrev_workspace_open(s.data_dir.c_str(), cfg.dump().c_str(), &ws));
  }
  ~Workspace() { evrev_workspace_close(ws); }
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;
};

// (uid, qa) pairs for every stored record; q_0 for records without QA.
std::vector<std::pair<std::string, std::string>> all_sessions(evrev_workspace* ws) {
  Out list;
  check(evrev_list_records(ws, list.slot()));
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& r : list.json()) {
    const std::string uid = r["image_uid"];
    Out rec;
    check(evrev_get_record(ws, uid.c_str(), rec.slot()));
    const Json doc = rec.json();
    if (doc["qa_items"].empty()) {
      out.emplace_back(uid, "q_0");
    } else {
      for (const auto& q : doc["qa_items"]) out.emplace_back(uid, q["qa_id"].get<std::string>());
    }
  }
  return out;
}

std::vector<Json> read_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure{EVREV_IO_ERROR, "cannot read edit script " + path};
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::vector<Json> ops;
  const Json whole = Json::parse(text, nullptr, false);
  if (!whole.is_discarded() && whole.is_array()) {
    for (const auto& op : whole) ops.push_back(op);
    return ops;
  }
  // JSON Lines; blank lines and lines starting with # are skipped.
  std::istringstream lines(text);
  std::size_t n = 0;
  for (std::string line; std::getline(lines, line);) {
    ++n;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    Json op = Json::parse(line, nullptr, false);
    if (op.is_discarded()) {
      throw Failure{EVREV_PARSE_ERROR, path + ":" + std::to_string(n) + ": not JSON"};
    }
    ops.push_back(std::move(op));
  }
  return ops;
}

evrev_server* g_server = nullptr;

void on_signal(int) {
  // evrev_server_wait returns once the server stops; main cleans up.
  if (g_server != nullptr) evrev_server_stop(g_server), g_server = nullptr;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evrev: evidence review for diagram QA datasets", "evrev"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(evrev_version()));
  Settings s;
  app.add_option("--data-dir", s.data_dir, "Workspace directory")->envname("EVREV_DATA_DIR");
  app.add_option("--backend", s.backend, "Proposal backend")
      ->envname("EVREV_BACKEND")
      ->check(CLI::IsMember({"mock", "http"}));
  app.add_option("--retain-iou", s.retain_iou, "IoU needed to count a proposal as retained")
      ->envname("EVREV_RETAIN_IOU")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--backend-url", s.backend_url, "HTTP backend endpoint")
      ->envname("EVREV_BACKEND_URL");
  app.add_option("--backend-token", s.backend_token, "HTTP backend bearer token")
      ->envname("EVREV_BACKEND_TOKEN");
  app.add_option("--prompt-file", s.prompt_file, "Chat prompt templates (JSON)")
      ->envname("EVREV_PROMPT_FILE");
  app.add_option("--mock-seed", s.mock_seed, "Seed for the mock backend");
  app.add_option("--config", s.config, "TOML config file")->envname("EVREV_CONFIG");

  auto* ingest = app.add_subcommand("ingest", "Load a dataset file into the workspace");
  std::string dataset;
  ingest->add_option("file", dataset, "Dataset JSON")->required();

  auto* validate = app.add_subcommand("validate", "Check a dataset file without storing it");
  validate->add_option("file", dataset, "Dataset JSON")->required();

  std::string uid, qa;
  bool all = false;
  auto* propose = app.add_subcommand("propose", "Ask the backend for evidence proposals");
  propose->add_option("--uid", uid, "Only this record");
  propose->add_option("--qa", qa, "Only this QA item");

  auto* edit = app.add_subcommand("edit", "Apply reviewer edits");
  std::string op_json, script;
  edit->add_option("--uid", uid, "Record (default for ops without image_uid)");
  edit->add_option("--qa", qa, "QA item (default for ops without qa_id)");
  auto* op_opt = edit->add_option("--op-json", op_json, "One edit op as JSON");
  auto* script_opt = edit->add_option("--script", script, "JSON array or JSON Lines of ops");
  op_opt->excludes(script_opt);

  auto* finalize = app.add_subcommand("finalize", "Finalize reviewed sessions");
  finalize->add_option("--uid", uid, "Record");
  finalize->add_option("--qa", qa, "QA item");
  finalize->add_flag("--all", all, "Every session that is in review");

  auto* exporter = app.add_subcommand("export", "Write finalized attributions");
  bool overlay = false;
  exporter->add_option("--out-dir", s.out_dir, "Output directory")->envname("EVREV_OUT_DIR");
  exporter->add_flag("--overlay", overlay, "Also write SVG overlays");

  auto* evaluate = app.add_subcommand("evaluate", "Proposal utility over finalized sessions");
  std::string sessions_dir;
  bool csv = false;
  evaluate->add_option("--sessions", sessions_dir, "Session directory (default DATA_DIR/sessions)");
  evaluate->add_flag("--csv", csv, "CSV instead of a text table");

  auto* iaa = app.add_subcommand("iaa", "Inter-annotator agreement from label files");
  std::vector<std::string> labels;
  iaa->add_option("--labels", labels, "Labels CSV; repeat for one file per rater")->required();
  iaa->add_flag("--csv", csv, "CSV instead of a text table");

  auto* session = app.add_subcommand("session", "Print a session document");
  session->add_option("--uid", uid, "Record")->required();
  session->add_option("--qa", qa, "QA item")->required();

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--port", s.port, "Listen port (0 picks one)")
      ->envname("EVREV_PORT")
      ->check(CLI::Range(0, 65535));
  serve->add_option("--host", s.host, "Listen address");
  serve->add_option("--ui-dir", s.ui_dir, "Static UI assets to serve at /");
  serve->add_option("--labels", labels, "Labels CSV for /api/metrics/iaa");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    apply_config(app, s.config);

    if (validate->parsed()) {
      Out report;
      check(evrev_validate_file(dataset.c_str(), report.slot()));
      bool failed = false;
      for (const auto& item : report.json()) {
        const std::string id = item["image_uid"].get<std::string>();
        std::cout << "record " << item["index"].get<std::size_t>() << " ("
                  << (id.empty() ? "?" : id) << ", " << item["adapter"].get<std::string>()
                  << "): ";
        if (item.contains("error")) {
          failed = true;
          std::cout << item["error"].get<std::string>() << '\n';
        } else if (item["violations"].empty()) {
          std::cout << "ok\n";
        } else {
          std::cout << item["violations"].size() << " warning(s)\n";
        }
        for (const auto& v : item["violations"]) {
          std::cout << "  " << v["severity"].get<std::string>() << " "
                    << v["path"].get<std::string>() << ": " << v["message"].get<std::string>()
                    << '\n';
        }
      }
      return failed ? EVREV_ADAPTATION_FAILED : 0;
    }

    if (evaluate->parsed()) {
      const std::string dir = sessions_dir.empty() ? s.data_dir + "/sessions" : sessions_dir;
      Out table;
      check(evrev_evaluate(dir.c_str(), csv ? "csv" : "text", table.slot()));
      std::cout << table.str();
      return 0;
    }

    if (iaa->parsed()) {
      std::vector<const char*> files;
      for (const auto& l : labels) files.push_back(l.c_str());
      Out table;
      check(evrev_iaa(files.data(), files.size(), csv ? "csv" : "text", table.slot()));
      std::cout << table.str();
      return 0;
    }

    Workspace ws(s);

    if (ingest->parsed()) {
      Out result;
      check(evrev_ingest(ws.ws, dataset.c_str(), result.slot()));
      const Json stored = result.json()["stored"];
      std::cout << "stored " << stored.size() << " record(s)";
      for (const auto& id : stored) std::cout << ' ' << id.get<std::string>();
      std::cout << '\n';
      return 0;
    }

    if (propose->parsed()) {
      std::vector<std::pair<std::string, std::string>> targets;
      for (const auto& t : all_sessions(ws.ws)) {
        if ((uid.empty() || t.first == uid) && (qa.empty() || t.second == qa)) targets.push_back(t);
      }
      if (targets.empty()) throw Failure{EVREV_NOT_FOUND, "no matching record or QA item"};
      for (const auto& [u, q] : targets) {
        Out doc;
        const evrev_status st = evrev_propose(ws.ws, u.c_str(), q.c_str(), doc.slot());
        if (st == EVREV_ALREADY_PROPOSED) {
          std::cout << u << "__" << q << ": already proposed, skipped\n";
          continue;
        }
        check(st);
        const Json j = doc.json();
        const auto& view = j["view"];
        std::cout << u << "__" << q << ": " << view["mode"].get<std::string>() << ", "
                  << view["proposed"].size() << " proposed region(s)";
        const auto& warnings = j["proposal"]["response"]["warnings"];
        if (!warnings.empty()) std::cout << ", warnings " << warnings.dump();
        std::cout << '\n';
      }
      return 0;
    }

    if (edit->parsed()) {
      std::vector<Json> ops;
      if (!op_json.empty()) {
        Json op = Json::parse(op_json, nullptr, false);
        if (op.is_discarded()) throw Failure{EVREV_PARSE_ERROR, "--op-json is not JSON"};
        ops.push_back(std::move(op));
      } else if (!script.empty()) {
        ops = read_script(script);
      } else {
        throw Failure{EVREV_INPUT_ERROR, "edit needs --op-json or --script"};
      }
      for (auto& op : ops) {
        const std::string u = op.contains("image_uid") ? op["image_uid"].get<std::string>() : uid;
        const std::string q = op.contains("qa_id") ? op["qa_id"].get<std::string>() : qa;
        if (u.empty() || q.empty()) {
          throw Failure{EVREV_INPUT_ERROR, "edit op without a target session: " + op.dump()};
        }
        op.erase("image_uid");
        op.erase("qa_id");
        Out result;
        check(evrev_apply_edit(ws.ws, u.c_str(), q.c_str(), op.dump().c_str(), result.slot()));
        const Json applied = result.json()["applied"];
        std::cout << u << "__" << q << ": #" << applied["timestamp"].get<std::uint64_t>() << ' '
                  << applied["op"].get<std::string>() << ' '
                  << applied["target_id"].get<std::string>() << " -> "
                  << result.json()["state"].get<std::string>() << '\n';
      }
      return 0;
    }

    if (finalize->parsed()) {
      std::vector<std::pair<std::string, std::string>> targets;
      if (all) {
        for (const auto& [u, q] : all_sessions(ws.ws)) {
          Out doc;
          if (evrev_get_session(ws.ws, u.c_str(), q.c_str(), doc.slot()) != EVREV_OK) continue;
          if (doc.json()["state"] == "in_review") targets.emplace_back(u, q);
        }
      } else {
        if (uid.empty() || qa.empty()) throw Failure{EVREV_INPUT_ERROR, "finalize needs --uid and --qa, or --all"};
        targets.emplace_back(uid, qa);
      }
      for (const auto& [u, q] : targets) {
        Out doc;
        check(evrev_finalize(ws.ws, u.c_str(), q.c_str(), doc.slot()));
        const Json c = doc.json()["final"]["counts"];
        std::cout << u << "__" << q << ": finalized retained=" << c["retained_pred_count"]
                  << " removed=" << c["effective_removed_count"]
                  << " added_gt=" << c["added_gt_count"] << " new_drawn=" << c["new_drawn_count"]
                  << '\n';
      }
      return 0;
    }

    if (exporter->parsed()) {
      Out paths;
      check(evrev_export(ws.ws, s.out_dir.c_str(), overlay ? 1 : 0, paths.slot()));
      for (const auto& p : paths.json()) std::cout << p.get<std::string>() << '\n';
      return 0;
    }

    if (session->parsed()) {
      Out doc;
      check(evrev_get_session(ws.ws, uid.c_str(), qa.c_str(), doc.slot()));
      std::cout << doc.str();
      return 0;
    }

    if (serve->parsed()) {
      Json opts{{"host", s.host}, {"port", s.port}, {"ui_dir", s.ui_dir}, {"labels", labels}};
      check(evrev_server_start(ws.ws, opts.dump().c_str(), &g_server));
      std::cout << "serving on http://" << s.host << ':' << evrev_server_port(g_server) << '\n'
                << std::flush;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      evrev_server* server = g_server;
      if (server != nullptr) check(evrev_server_wait(server));
      return 0;
    }
  } catch (const Failure& f) {
    std::cerr << "evrev: " << evrev_status_name(f.status) << ": " << f.message << '\n';
    return f.status == 0 ? 1 : f.status;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "evrev: unexpected library output: " << e.what() << '\n';
    return EVREV_INTERNAL;
  }
  return 0;
}
