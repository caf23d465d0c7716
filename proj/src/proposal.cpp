// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#include "evrev/proposal.hpp"

#include "evrev/canonical_json.hpp"
#include "evrev/error.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace evrev {

std::string_view to_string(ProposalMode mode) {
  switch (mode) {
    case ProposalMode::selection: return "selection";
    case ProposalMode::region_generation: return "region_generation";
    case ProposalMode::qa_and_region_generation: return "qa_and_region_generation";
  }
  return "selection";
}

std::optional<ProposalMode> proposal_mode_from_string(std::string_view text) {
  for (auto m : {ProposalMode::selection, ProposalMode::region_generation,
                 ProposalMode::qa_and_region_generation}) {
    if (to_string(m) == text) return m;
  }
  return std::nullopt;
}

namespace {

bool is_candidate(const Region& r) {
  return !r.deleted &&
         (r.provenance.source == Source::ground_truth || r.provenance.source == Source::predicted);
}

std::string base64_encode(std::string_view bytes) {
  if (bytes.empty()) return {};
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  if (text.empty()) return {};
  if (text.size() % 4 != 0) {
    throw Error(ErrorCode::ParseError, "base64 payload length is not a multiple of 4");
  }
  std::string out(3 * text.size() / 4, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error(ErrorCode::ParseError, "invalid base64 payload");
  std::size_t pad = 0;
  if (text.ends_with("==")) pad = 2;
  else if (text.ends_with("=")) pad = 1;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool contains_sequence(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

}  // namespace

ProposalMode choose_mode(const ImageRecord& record, const QAItem* qa) {
  if (qa == nullptr || record.qa_items.empty()) {
    return ProposalMode::qa_and_region_generation;
  }
  const bool has_pool = std::any_of(record.regions.begin(), record.regions.end(), is_candidate);
  return has_pool ? ProposalMode::selection : ProposalMode::region_generation;
}

ProposalRequest build_request(const ImageRecord& record, const QAItem* qa, ProposalMode mode,
                              ImagePayload image) {
  ProposalRequest req;
  req.mode = mode;
  req.image_uid = record.image_uid;
  req.image = std::move(image);
  req.image_size = record.image_size;
  if (mode != ProposalMode::qa_and_region_generation && qa != nullptr) {
    req.qa = QAPrompt{qa->question_text, qa->answer_text, qa->choices};
  }
  if (mode == ProposalMode::selection) {
    for (const auto& r : record.regions) {
      if (is_candidate(r)) req.candidates.push_back({r.region_id, r.bbox, r.label});
    }
  }
  return req;
}

void check_request(const ProposalRequest& request) {
  const bool selection = request.mode == ProposalMode::selection;
  if (selection == request.candidates.empty()) {
    throw Error(ErrorCode::InputError,
                selection ? "selection needs a non-empty candidate pool"
                          : "candidates are only sent in selection mode");
  }
  const bool qa_mode = request.mode == ProposalMode::qa_and_region_generation;
  if (qa_mode == request.qa.has_value()) {
    throw Error(ErrorCode::InputError, qa_mode ? "QA generation must not carry a QA item"
                                               : "this mode needs a QA item");
  }
  if (request.qa && request.qa->question_text.empty()) {
    throw Error(ErrorCode::InputError, "question text is empty");
  }
}

// ---------------------------------------------------------------------------
// Wire format

Json request_to_wire(const ProposalRequest& request) {
  Json w = Json::object();
  w["mode"] = to_string(request.mode);
  w["image_uid"] = request.image_uid;
  w["image"] = Json{{"data", base64_encode(request.image.bytes)},
                    {"media_type", request.image.media_type}};
  w["image_size"] = request.image_size
                        ? Json::array({request.image_size->width, request.image_size->height})
                        : Json(nullptr);
  if (request.qa) {
    w["question"] = request.qa->question_text;
    w["answer"] = request.qa->answer_text;
    w["choices"] = request.qa->choices;
  } else {
    w["question"] = nullptr;
    w["answer"] = nullptr;
    w["choices"] = Json::array();
  }
  Json cands = Json::array();
  for (const auto& c : request.candidates) {
    cands.push_back(Json{{"id", c.region_id},
                         {"bbox", bbox_to_json(c.bbox)},
                         {"label", c.label ? Json(*c.label) : Json(nullptr)}});
  }
  w["candidates"] = std::move(cands);
  return w;
}

ProposalRequest request_from_wire(const Json& w) {
  try {
    ProposalRequest req;
    auto mode = proposal_mode_from_string(w.at("mode").get<std::string>());
    if (!mode) throw Error(ErrorCode::ParseError, "unknown proposal mode");
    req.mode = *mode;
    req.image_uid = w.value("image_uid", "");
    if (auto it = w.find("image"); it != w.end() && it->is_object()) {
      req.image.bytes = base64_decode(it->value("data", ""));
      req.image.media_type = it->value("media_type", "");
    }
    if (auto it = w.find("image_size"); it != w.end() && it->is_array() && it->size() == 2) {
      req.image_size = ImageSize{(*it)[0].get<double>(), (*it)[1].get<double>()};
    }
    if (auto it = w.find("question"); it != w.end() && it->is_string()) {
      QAPrompt qa;
      qa.question_text = it->get<std::string>();
      qa.answer_text = w.value("answer", "");
      qa.choices = w.value("choices", std::vector<std::string>{});
      req.qa = std::move(qa);
    }
    for (const auto& c : w.value("candidates", Json::array())) {
      Candidate cand;
      cand.region_id = c.at("id").get<std::string>();
      cand.bbox = bbox_from_json(c.at("bbox"));
      if (auto l = c.find("label"); l != c.end() && l->is_string()) cand.label = l->get<std::string>();
      req.candidates.push_back(std::move(cand));
    }
    return req;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed proposal request: ") + e.what());
  }
}

Json response_to_wire(const ProposalResponse& r) {
  Json w = Json::object();
  w["selected_ids"] = r.selected_ids;
  Json regions = Json::array();
  for (const auto& g : r.generated_regions) {
    regions.push_back(Json{{"bbox", bbox_to_json(g.bbox)},
                           {"label", g.label ? Json(*g.label) : Json(nullptr)}});
  }
  w["regions"] = std::move(regions);
  Json qa = Json::array();
  for (const auto& g : r.generated_qa) {
    qa.push_back(Json{{"question", g.qa.question_text},
                      {"answer", g.qa.answer_text},
                      {"choices", g.qa.choices},
                      {"evidence", g.evidence}});
  }
  w["qa"] = std::move(qa);
  w["meta"] = r.backend_meta;
  w["warnings"] = r.warnings;
  return w;
}

ProposalResponse response_from_wire(const Json& w) {
  try {
    ProposalResponse r;
    r.selected_ids = w.value("selected_ids", std::vector<std::string>{});
    for (const auto& g : w.value("regions", Json::array())) {
      GeneratedRegion reg;
      reg.bbox = bbox_from_json(g.at("bbox"));
      if (auto l = g.find("label"); l != g.end() && l->is_string()) reg.label = l->get<std::string>();
      r.generated_regions.push_back(std::move(reg));
    }
    for (const auto& g : w.value("qa", Json::array())) {
      GeneratedQA q;
      q.qa.question_text = g.value("question", "");
      q.qa.answer_text = g.value("answer", "");
      q.qa.choices = g.value("choices", std::vector<std::string>{});
      q.evidence = g.value("evidence", std::vector<std::size_t>{});
      r.generated_qa.push_back(std::move(q));
    }
    r.backend_meta = w.value("meta", Json::object());
    r.warnings = w.value("warnings", std::vector<std::string>{});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed proposal response: ") + e.what());
  }
}

std::optional<Json> extract_first_json_object(std::string_view text) {
  for (std::size_t start = text.find('{'); start != std::string_view::npos;
       start = text.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escaped) escaped = false;
        else if (c == '\\') escaped = true;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}' && --depth == 0) {
        auto parsed = Json::parse(text.substr(start, i - start + 1), nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) return parsed;
        break;
      }
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Mock backend

Json MockBackend::exchange(const Json& request_wire) {
  const ProposalRequest req = request_from_wire(request_wire);
  Json reply = Json{{"selected_ids", Json::array()},
                    {"regions", Json::array()},
                    {"qa", Json::array()},
                    {"meta", Json{{"model", "mock"}, {"seed", seed_}}}};

  auto central = [&]() -> std::optional<Json> {
    if (!req.image_size) return std::nullopt;
    const double w = req.image_size->width;
    const double h = req.image_size->height;
    return Json{{"bbox", bbox_to_json({w / 4, h / 4, w / 2, h / 2})}, {"label", nullptr}};
  };

  switch (req.mode) {
    case ProposalMode::selection: {
      const auto q = req.qa ? tokenize(req.qa->question_text) : std::vector<std::string>{};
      const auto a = req.qa ? tokenize(req.qa->answer_text) : std::vector<std::string>{};
      for (const auto& c : req.candidates) {
        if (!c.label) continue;
        const auto l = tokenize(*c.label);
        if (contains_sequence(q, l) || contains_sequence(a, l)) {
          reply["selected_ids"].push_back(c.region_id);
        }
      }
      break;
    }
    case ProposalMode::region_generation:
      if (auto box = central()) reply["regions"].push_back(*box);
      break;
    case ProposalMode::qa_and_region_generation: {
      Json item = {{"question", "What does this image show?"},
                   {"answer", req.image_uid},
                   {"choices", Json::array()},
                   {"evidence", Json::array()}};
      if (auto box = central()) {
        reply["regions"].push_back(*box);
        item["evidence"].push_back(0);
      }
      reply["qa"].push_back(std::move(item));
      break;
    }
  }
  return reply;
}

// ---------------------------------------------------------------------------
// Bounded backend

BoundedBackend::BoundedBackend(std::shared_ptr<ProposalBackend> inner, int width)
    : inner_(std::move(inner)), slots_(std::clamp(width, 1, 1024)) {}

Json BoundedBackend::exchange(const Json& request_wire) {
  slots_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{slots_};
  return inner_->exchange(request_wire);
}

// ---------------------------------------------------------------------------
// Proposal operations

namespace {

struct Reply {
  Json doc;  // object, or null when degraded
  bool degraded = false;
};

Reply call_backend(const ProposalRequest& request, ProposalBackend& backend,
                   ProposalResponse& out) {
  out.backend_meta["backend"] = backend.name();
  Json raw;
  try {
    raw = backend.exchange(request_to_wire(request));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::BackendMalformedReply) throw;
    out.backend_meta["raw_reply"] = e.what();
    out.warnings.push_back("malformed_reply");
    return {Json(nullptr), true};
  }
  if (raw.is_string()) {
    const std::string text = raw.get<std::string>();
    out.backend_meta["raw_reply"] = text;
    if (auto obj = extract_first_json_object(text)) {
      raw = std::move(*obj);
    } else {
      out.warnings.push_back("malformed_reply");
      return {Json(nullptr), true};
    }
  }
  if (!raw.is_object()) {
    out.backend_meta["raw_reply"] = raw.dump();
    out.warnings.push_back("malformed_reply");
    return {Json(nullptr), true};
  }
  if (auto m = raw.find("meta"); m != raw.end() && m->is_object()) {
    for (const auto& [k, v] : m->items()) out.backend_meta[k] = v;
  }
  return {raw, false};
}

bool non_empty_array(const Json& doc, const char* key) {
  auto it = doc.find(key);
  return it != doc.end() && it->is_array() && !it->empty();
}

/// Parses, clips and filters generated boxes. Returns the mapping from reply
/// index to kept index.
std::vector<std::optional<std::size_t>> collect_regions(const Json& doc,
                                                        const ProposalRequest& request,
                                                        ProposalResponse& out) {
  std::vector<std::optional<std::size_t>> kept_index;
  auto it = doc.find("regions");
  if (it == doc.end() || it->is_null()) return kept_index;
  if (!it->is_array()) {
    out.warnings.push_back("malformed_regions");
    return kept_index;
  }
  std::size_t total = 0;
  Json clipped = Json::array();
  for (std::size_t i = 0; i < it->size(); ++i) {
    const Json& g = (*it)[i];
    kept_index.emplace_back(std::nullopt);
    ++total;
    BBox box;
    try {
      box = bbox_from_json(g.is_object() ? g.at("bbox") : g);
    } catch (const std::exception&) {
      out.warnings.push_back("malformed_region_dropped");
      continue;
    }
    if (request.image_size) {
      const BBox c = clip_to(box, *request.image_size);
      if (!(c == box)) {
        clipped.push_back(Json{{"index", i}, {"original", bbox_to_json(box)},
                               {"clipped", bbox_to_json(c)}});
        box = c;
      }
    }
    if (!is_well_formed(box)) continue;
    GeneratedRegion reg{box, std::nullopt};
    if (g.is_object()) {
      if (auto l = g.find("label"); l != g.end() && l->is_string()) reg.label = l->get<std::string>();
    }
    kept_index.back() = out.generated_regions.size();
    out.generated_regions.push_back(std::move(reg));
  }
  if (!clipped.empty()) out.backend_meta["clipped"] = std::move(clipped);
  if (total > 0 && out.generated_regions.empty()) {
    throw Error(ErrorCode::AllRegionsDegenerate, "every generated region is degenerate");
  }
  return kept_index;
}

void require_mode(const ProposalRequest& request, ProposalMode mode) {
  if (request.mode != mode) {
    throw Error(ErrorCode::InputError, "request mode " + std::string(to_string(request.mode)) +
                                           " does not match " + std::string(to_string(mode)));
  }
  check_request(request);
}

}  // namespace

ProposalResponse select_evidence(const ProposalRequest& request, ProposalBackend& backend) {
  require_mode(request, ProposalMode::selection);
  ProposalResponse out;
  const Reply reply = call_backend(request, backend, out);
  if (reply.degraded) return out;

  auto ids = reply.doc.find("selected_ids");
  if (ids == reply.doc.end() || !ids->is_array()) {
    out.backend_meta["raw_reply"] = reply.doc.dump();
    out.warnings.push_back("malformed_reply");
    return out;
  }
  std::set<std::string> pool;
  for (const auto& c : request.candidates) pool.insert(c.region_id);
  std::set<std::string> seen;
  Json unknown = Json::array();
  for (const auto& id : *ids) {
    const std::string s = id.is_string() ? id.get<std::string>() : id.dump();
    if (!pool.contains(s)) {
      unknown.push_back(s);
      continue;
    }
    if (seen.insert(s).second) out.selected_ids.push_back(s);
  }
  if (!unknown.empty()) {
    out.backend_meta["unknown_ids"] = std::move(unknown);
    out.warnings.push_back("unknown_ids_filtered");
  }
  if (non_empty_array(reply.doc, "regions") || non_empty_array(reply.doc, "qa")) {
    out.warnings.push_back("generated_content_ignored");
  }
  return out;
}

ProposalResponse generate_regions(const ProposalRequest& request, ProposalBackend& backend) {
  require_mode(request, ProposalMode::region_generation);
  ProposalResponse out;
  const Reply reply = call_backend(request, backend, out);
  if (reply.degraded) return out;
  collect_regions(reply.doc, request, out);
  if (non_empty_array(reply.doc, "selected_ids") || non_empty_array(reply.doc, "qa")) {
    out.warnings.push_back("unexpected_content_ignored");
  }
  return out;
}

ProposalResponse generate_qa_and_regions(const ProposalRequest& request,
                                         ProposalBackend& backend) {
  require_mode(request, ProposalMode::qa_and_region_generation);
  ProposalResponse out;
  const Reply reply = call_backend(request, backend, out);
  if (reply.degraded) return out;
  const auto kept = collect_regions(reply.doc, request, out);

  auto qa = reply.doc.find("qa");
  if (qa != reply.doc.end() && qa->is_array()) {
    for (const auto& item : *qa) {
      if (!item.is_object()) continue;
      GeneratedQA g;
      auto text = [&](const char* k) {
        auto it = item.find(k);
        return it != item.end() && it->is_string() ? it->get<std::string>() : std::string();
      };
      g.qa.question_text = text("question");
      if (g.qa.question_text.empty()) {
        out.warnings.push_back("empty_question_dropped");
        continue;
      }
      g.qa.answer_text = text("answer");
      if (auto ch = item.find("choices"); ch != item.end() && ch->is_array()) {
        for (const auto& c : *ch) {
          if (c.is_string()) g.qa.choices.push_back(c.get<std::string>());
        }
      }
      if (auto ev = item.find("evidence"); ev != item.end() && ev->is_array()) {
        for (const auto& e : *ev) {
          if (!e.is_number_unsigned() && !e.is_number_integer()) continue;
          const auto i = e.get<long long>();
          if (i >= 0 && static_cast<std::size_t>(i) < kept.size() && kept[i]) {
            g.evidence.push_back(*kept[i]);
          }
        }
      } else {
        for (std::size_t i = 0; i < out.generated_regions.size(); ++i) g.evidence.push_back(i);
      }
      out.generated_qa.push_back(std::move(g));
    }
  }
  if (out.generated_qa.empty()) {
    throw Error(ErrorCode::NoQAGenerated, "backend produced no usable QA item");
  }
  return out;
}

ProposalResponse propose(const ProposalRequest& request, ProposalBackend& backend) {
  switch (request.mode) {
    case ProposalMode::selection: return select_evidence(request, backend);
    case ProposalMode::region_generation: return generate_regions(request, backend);
    case ProposalMode::qa_and_region_generation: return generate_qa_and_regions(request, backend);
  }
  throw Error(ErrorCode::InputError, "unknown proposal mode");
}

// ---------------------------------------------------------------------------
// Images

ImagePayload load_image_payload(const std::filesystem::path& path) {
  ImagePayload p;
  std::ifstream in(path, std::ios::binary);
  if (!in) return p;
  std::ostringstream ss;
  ss << in.rdbuf();
  p.bytes = ss.str();
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".png") p.media_type = "image/png";
  else if (ext == ".jpg" || ext == ".jpeg") p.media_type = "image/jpeg";
  else if (ext == ".gif") p.media_type = "image/gif";
  else if (ext == ".webp") p.media_type = "image/webp";
  else if (ext == ".svg") p.media_type = "image/svg+xml";
  else p.media_type = "application/octet-stream";
  return p;
}

std::optional<ImageSize> probe_image_size(const std::string& bytes) {
  auto u8 = [&](std::size_t i) { return static_cast<unsigned>(static_cast<unsigned char>(bytes[i])); };
  auto be16 = [&](std::size_t i) { return (u8(i) << 8) | u8(i + 1); };
  auto be32 = [&](std::size_t i) { return (be16(i) << 16) | be16(i + 2); };

  static constexpr unsigned char kPng[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 24 && std::equal(kPng, kPng + 8, bytes.begin(),
                                       [](unsigned char a, char b) { return a == static_cast<unsigned char>(b); }) &&
      bytes.compare(12, 4, "IHDR") == 0) {
    return ImageSize{static_cast<double>(be32(16)), static_cast<double>(be32(20))};
  }
  if (bytes.size() >= 10 && bytes.compare(0, 4, "GIF8") == 0) {
    return ImageSize{static_cast<double>(u8(6) | (u8(7) << 8)),
                     static_cast<double>(u8(8) | (u8(9) << 8))};
  }
  if (bytes.size() >= 4 && u8(0) == 0xFF && u8(1) == 0xD8) {
    std::size_t i = 2;
    while (i + 9 < bytes.size()) {
      if (u8(i) != 0xFF) return std::nullopt;
      const unsigned marker = u8(i + 1);
      if (marker == 0xD8 || marker == 0x01 || (marker >= 0xD0 && marker <= 0xD7)) {
        i += 2;
        continue;
      }
      const unsigned len = be16(i + 2);
      const bool sof = marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 && marker != 0xC8 &&
                       marker != 0xCC;
      if (sof) {
        return ImageSize{static_cast<double>(be16(i + 7)), static_cast<double>(be16(i + 5))};
      }
      i += 2 + len;
    }
  }
  return std::nullopt;
}

}  // namespace evrev
