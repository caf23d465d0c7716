// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#include "evrev/ingest.hpp"

#include "evrev/canonical_json.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace evrev {

// ---------------------------------------------------------------------------
// Box normalization

RawBBox classify_array(const std::array<double, 4>& v, ArrayConvention convention,
                       const std::optional<ImageSize>& image_size) {
  switch (convention) {
    case ArrayConvention::xywh: return ArrayXYWH{v[0], v[1], v[2], v[3]};
    case ArrayConvention::corners: return ArrayCorners{v[0], v[1], v[2], v[3]};
    case ArrayConvention::fractional: return FractionalXYWH{v[0], v[1], v[2], v[3]};
    case ArrayConvention::detect: break;
  }
  const bool unit = std::all_of(v.begin(), v.end(), [](double c) { return c >= 0.0 && c <= 1.0; });
  if (unit) {
    return FractionalXYWH{v[0], v[1], v[2], v[3]};
  }
  if (image_size) {
    const double W = image_size->width + kBoundsTolerancePx;
    const double H = image_size->height + kBoundsTolerancePx;
    const bool xywh_fits = v[0] + v[2] <= W && v[1] + v[3] <= H;
    const bool corners_fit = v[2] > v[0] && v[3] > v[1] && v[2] <= W && v[3] <= H;
    if (!xywh_fits && corners_fit) {
      return ArrayCorners{v[0], v[1], v[2], v[3]};
    }
  }
  return ArrayXYWH{v[0], v[1], v[2], v[3]};
}

namespace {

bool is_number_array(const Json& j, std::size_t n) {
  return j.is_array() && j.size() == n &&
         std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_number(); });
}

bool has_numbers(const Json& obj, std::initializer_list<const char*> keys) {
  return std::all_of(keys.begin(), keys.end(), [&](const char* k) {
    auto it = obj.find(k);
    return it != obj.end() && it->is_number();
  });
}

}  // namespace

RawBBox parse_raw_bbox(const Json& value, ArrayConvention convention,
                       const std::optional<ImageSize>& image_size) {
  if (is_number_array(value, 4)) {
    return classify_array({value[0].get<double>(), value[1].get<double>(),
                           value[2].get<double>(), value[3].get<double>()},
                          convention, image_size);
  }
  if (value.is_array() && value.size() == 2 && is_number_array(value[0], 2) &&
      is_number_array(value[1], 2)) {
    return ArrayCorners{value[0][0].get<double>(), value[0][1].get<double>(),
                        value[1][0].get<double>(), value[1][1].get<double>()};
  }
  if (value.is_object()) {
    if (has_numbers(value, {"left", "top", "width", "height"})) {
      return NamedLTWH{value["left"].get<double>(), value["top"].get<double>(),
                       value["width"].get<double>(), value["height"].get<double>()};
    }
    if (has_numbers(value, {"x1", "y1", "x2", "y2"})) {
      return NamedCorners{value["x1"].get<double>(), value["y1"].get<double>(),
                          value["x2"].get<double>(), value["y2"].get<double>()};
    }
    if (has_numbers(value, {"x", "y", "w", "h"})) {
      return ArrayXYWH{value["x"].get<double>(), value["y"].get<double>(),
                       value["w"].get<double>(), value["h"].get<double>()};
    }
    if (has_numbers(value, {"x", "y", "width", "height"})) {
      return ArrayXYWH{value["x"].get<double>(), value["y"].get<double>(),
                       value["width"].get<double>(), value["height"].get<double>()};
    }
  }
  throw Error(ErrorCode::ParseError, "unrecognized box value " + value.dump());
}

NormalizedBox normalize_bbox(const RawBBox& raw, const std::optional<ImageSize>& image_size) {
  BBox b = std::visit(
      [&](const auto& v) -> BBox {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ArrayXYWH>) {
          return {v.x, v.y, v.w, v.h};
        } else if constexpr (std::is_same_v<T, NamedLTWH>) {
          return {v.left, v.top, v.width, v.height};
        } else if constexpr (std::is_same_v<T, ArrayCorners> || std::is_same_v<T, NamedCorners>) {
          return {v.x1, v.y1, v.x2 - v.x1, v.y2 - v.y1};
        } else {
          for (double c : {v.x, v.y, v.w, v.h}) {
            if (!(c >= 0.0 && c <= 1.0)) {
              throw Error(ErrorCode::DegenerateBox, "fractional component outside [0, 1]");
            }
          }
          if (!image_size) {
            throw Error(ErrorCode::MissingImageSize, "fractional box needs image dimensions");
          }
          return {v.x * image_size->width, v.y * image_size->height, v.w * image_size->width,
                  v.h * image_size->height};
        }
      },
      raw);

  if (!std::isfinite(b.x) || !std::isfinite(b.y) || !std::isfinite(b.w) || !std::isfinite(b.h)) {
    throw Error(ErrorCode::DegenerateBox, "non-finite box coordinate");
  }
  if (b.w <= 0 || b.h <= 0) {
    throw Error(ErrorCode::DegenerateBox, "box has non-positive width or height");
  }
  NormalizedBox out{b, false};
  auto clamp_axis = [&](double& origin, double& extent, const char* axis) {
    if (origin >= 0) return;
    if (origin <= -kBoundsTolerancePx) {
      throw Error(ErrorCode::NegativeOrigin, std::string(axis) + " origin is negative");
    }
    extent += origin;
    origin = 0;
    out.clamped = true;
  };
  clamp_axis(out.box.x, out.box.w, "x");
  clamp_axis(out.box.y, out.box.h, "y");
  if (out.box.w <= 0 || out.box.h <= 0) {
    throw Error(ErrorCode::DegenerateBox, "box vanished after clamping origin");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Record building shared by the adapters

namespace {

constexpr std::array<const char*, 6> kBoxKeys = {"bbox", "box", "rect", "rectangle",
                                                  "boundingBox", "bounding_box"};
constexpr std::array<const char*, 6> kLabelKeys = {"label", "name", "text",
                                                    "value", "state", "type"};

struct PendingRegion {
  RawBBox raw;
  std::optional<std::string> label;
  std::optional<std::string> source_id;
  std::optional<std::string> original_id;  // written back by the generic writer
  Provenance provenance;
};

class RecordBuilder {
 public:
  RecordBuilder(const Json& raw, std::string_view adapter) : raw_(raw) {
    record_.adapter = std::string(adapter);
  }

  ImageRecord& record() { return record_; }

  void consume(std::string_view key) { consumed_.insert(std::string(key)); }

  /// Marks `key` consumed and returns the value if present.
  const Json* take(std::string_view key) {
    consume(key);
    auto it = raw_.find(std::string(key));
    return it == raw_.end() ? nullptr : &*it;
  }

  std::string take_string(std::string_view key, std::string fallback = {}) {
    const Json* v = take(key);
    if (v == nullptr || v->is_null()) return fallback;
    if (v->is_string()) return v->get<std::string>();
    return v->dump();
  }

  void set_size(double w, double h) {
    if (std::isfinite(w) && std::isfinite(h) && w > 0 && h > 0) {
      record_.image_size = ImageSize{w, h};
    }
  }

  /// `entry` is a box value or an object wrapping one.
  void add_region(const Json& entry, Source default_source, ArrayConvention convention) {
    PendingRegion p;
    p.provenance.source = default_source;
    const Json* box = &entry;
    if (entry.is_object()) {
      for (const char* k : kBoxKeys) {
        if (auto it = entry.find(k); it != entry.end()) {
          box = &*it;
          break;
        }
      }
      for (const char* k : kLabelKeys) {
        if (auto it = entry.find(k); it != entry.end() && it->is_string()) {
          p.label = it->get<std::string>();
          break;
        }
      }
      if (auto it = entry.find("id"); it != entry.end() && (it->is_string() || it->is_number())) {
        p.source_id = it->is_string() ? it->get<std::string>() : it->dump();
      }
      if (auto it = entry.find("source_id"); it != entry.end() && it->is_string()) {
        p.original_id = it->get<std::string>();
      }
      const Json* src = nullptr;
      if (auto it = entry.find("source"); it != entry.end()) {
        src = &*it;
      } else if (auto m = entry.find("meta"); m != entry.end() && m->is_object()) {
        if (auto ms = m->find("source"); ms != m->end()) src = &*ms;
      }
      if (src != nullptr && src->is_string()) {
        if (auto s = source_from_any_string(src->get<std::string>())) p.provenance.source = *s;
      }
      if (auto it = entry.find("edited"); it != entry.end() && it->is_boolean()) {
        p.provenance.edited = it->get<bool>();
      }
    }
    p.raw = parse_raw_bbox(*box, convention, record_.image_size);
    pending_.push_back(std::move(p));
  }

  void add_region_list(const Json* list, Source source, ArrayConvention convention) {
    if (list == nullptr || list->is_null()) return;
    if (list->is_array()) {
      for (const auto& e : *list) add_region(e, source, convention);
    } else if (list->is_object()) {
      // {id: box-entry} maps.
      for (const auto& [key, e] : list->items()) {
        Json entry = e.is_object() ? e : Json{{"bbox", e}};
        if (!entry.contains("id")) entry["id"] = key;
        add_region(entry, source, convention);
      }
    } else {
      throw Error(ErrorCode::ParseError, "region list must be an array or object");
    }
  }

  void add_qa(std::string question, std::string answer, std::vector<std::string> choices,
              std::string qa_id = {}, QAStatus status = QAStatus::unverified,
              std::string note = {}) {
    QAItem q;
    q.qa_id = qa_id.empty() ? "q_" + std::to_string(record_.qa_items.size()) : std::move(qa_id);
    q.question_text = std::move(question);
    q.answer_text = std::move(answer);
    q.choices = std::move(choices);
    q.status = status;
    q.note = std::move(note);
    record_.qa_items.push_back(std::move(q));
  }

  ImageRecord finish() {
    bool fractional_kept = false;
    std::set<std::string> taken;
    for (const auto& p : pending_) {
      if (p.source_id && is_export_region_id(*p.source_id)) taken.insert(*p.source_id);
    }
    long long counter = 0;
    auto fresh_id = [&] {
      std::string id;
      do {
        id = "a_" + std::to_string(++counter);
      } while (taken.contains(id));
      taken.insert(id);
      return id;
    };
    std::set<std::string> used;
    for (auto& p : pending_) {
      Region r;
      if (p.source_id && is_export_region_id(*p.source_id) && !used.contains(*p.source_id)) {
        r.region_id = *p.source_id;
        r.source_id = p.original_id;
      } else {
        r.region_id = fresh_id();
        r.source_id = p.source_id;
      }
      used.insert(r.region_id);
      r.label = p.label;
      r.provenance = p.provenance;
      try {
        r.bbox = normalize_bbox(p.raw, record_.image_size).box;
      } catch (const Error& e) {
        const auto* frac = std::get_if<FractionalXYWH>(&p.raw);
        if (e.code() == ErrorCode::MissingImageSize && frac != nullptr) {
          r.bbox = BBox{frac->x, frac->y, frac->w, frac->h};
          fractional_kept = true;
        } else {
          throw AdaptationError("region " + r.region_id + ": " + e.what(),
                                {{"regions", e.what(), Severity::error}});
        }
      }
      record_.regions.push_back(std::move(r));
    }

    for (const auto& [key, value] : raw_.items()) {
      if (!consumed_.contains(key)) record_.source_metadata[key] = value;
    }
    if (fractional_kept) record_.source_metadata["coords"] = "fractional";

    auto report = validate_record(record_);
    if (has_errors(report)) {
      std::string msg = "record " + record_.image_uid + " violates the meta-schema:";
      for (const auto& v : report) {
        if (v.severity == Severity::error) msg += " " + v.path + " (" + v.message + ")";
      }
      throw AdaptationError(msg, std::move(report));
    }
    return std::move(record_);
  }

 private:
  const Json& raw_;
  ImageRecord record_;
  std::set<std::string> consumed_;
  std::vector<PendingRegion> pending_;
};

std::vector<std::string> string_list(const Json* v) {
  std::vector<std::string> out;
  if (v == nullptr || !v->is_array()) return out;
  for (const auto& e : *v) out.push_back(e.is_string() ? e.get<std::string>() : e.dump());
  return out;
}

std::string str_field(const Json& obj, std::string_view key, std::string fallback = {}) {
  auto it = obj.find(std::string(key));
  if (it == obj.end() || it->is_null()) return fallback;
  return it->is_string() ? it->get<std::string>() : it->dump();
}

std::string file_stem(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

double num_or_nan(const Json* v) {
  return v != nullptr && v->is_number() ? v->get<double>() : std::nan("");
}

class SimpleAdapter : public Adapter {
 public:
  SimpleAdapter(std::string name, std::vector<std::string> keys)
      : name_(std::move(name)), keys_(std::move(keys)) {}
  std::string_view name() const override { return name_; }
  const std::vector<std::string>& fingerprint() const override { return keys_; }

 private:
  std::string name_;
  std::vector<std::string> keys_;
};

/// The documented multi-image input shape. Also reads the optional fields the
/// generic writer emits (image_size, qa_id/status/note, per-box source, ...).
class GenericAdapter final : public SimpleAdapter {
 public:
  GenericAdapter() : SimpleAdapter("generic_v1", {"image_uid", "image_path"}) {}

  ImageRecord adapt(const Json& raw, const AdaptOptions&) const override {
    RecordBuilder b(raw, name());
    auto& rec = b.record();
    rec.image_uid = b.take_string("image_uid");
    rec.image_path = b.take_string("image_path");
    if (const Json* s = b.take("image_size"); s != nullptr && is_number_array(*s, 2)) {
      b.set_size((*s)[0].get<double>(), (*s)[1].get<double>());
    }
    const Json* iw = raw.contains("image_width") ? b.take("image_width") : nullptr;
    const Json* ih = raw.contains("image_height") ? b.take("image_height") : nullptr;
    if (iw != nullptr && ih != nullptr) b.set_size(num_or_nan(iw), num_or_nan(ih));
    if (const Json* a = b.take("source_adapter"); a != nullptr && a->is_string()) {
      rec.adapter = a->get<std::string>();
    }

    b.add_region_list(b.take("bbox"), Source::ground_truth, ArrayConvention::detect);
    b.add_region_list(b.take("predicted_boxes"), Source::predicted, ArrayConvention::detect);

    if (const Json* qs = b.take("questions"); qs != nullptr && qs->is_array()) {
      for (const auto& q : *qs) {
        if (!q.is_object()) throw Error(ErrorCode::ParseError, "question entry must be an object");
        auto ch = q.find("choices");
        b.add_qa(str_field(q, "question_text"), str_field(q, "answer_text"),
                 string_list(ch == q.end() ? nullptr : &*ch), str_field(q, "qa_id"),
                 qa_status_from_string(str_field(q, "status")).value_or(QAStatus::unverified),
                 str_field(q, "note"));
      }
    }

    if (const Json* attributions = b.take("attributions");
        attributions != nullptr && attributions->is_array()) {
      for (const auto& a : *attributions) {
        AttributionMapping m;
        m.qa_id = str_field(a, "qa_id");
        auto ev = a.find("evidence");
        m.evidence = string_list(ev == a.end() ? nullptr : &*ev);
        m.no_evidence = a.value("no_evidence", false);
        rec.attributions.push_back(std::move(m));
      }
    }
    return b.finish();
  }
};

/// Reads back the per-image documents written by export_record.
class UnifiedOutputAdapter final : public SimpleAdapter {
 public:
  UnifiedOutputAdapter() : SimpleAdapter("unified_output_v1", {"image", "qa", "annotations"}) {}

  ImageRecord adapt(const Json& raw, const AdaptOptions& options) const override {
    RecordBuilder b(raw, name());
    auto& rec = b.record();
    rec.image_path = b.take_string("image");
    rec.image_uid = options.uid_hint.empty() ? file_stem(rec.image_path) : options.uid_hint;

    if (const Json* qa = b.take("qa"); qa != nullptr && qa->is_object()) {
      auto ch = qa->find("choices");
      b.add_qa(str_field(*qa, "question"), str_field(*qa, "answer"),
               string_list(ch == qa->end() ? nullptr : &*ch));
    }
    const Json* annotations = b.take("annotations");
    b.add_region_list(annotations, Source::ground_truth, ArrayConvention::xywh);

    if (const Json* dt = b.take("dataset_type"); dt != nullptr && dt->is_string() &&
                                                 !dt->get<std::string>().empty()) {
      rec.source_metadata["dataset_type"] = *dt;
    }
    bool no_evidence = false;
    if (const Json* md = b.take("metadata"); md != nullptr && md->is_object()) {
      for (const auto& [k, v] : md->items()) {
        if (k == "no_visual_evidence") {
          no_evidence = v.is_boolean() && v.get<bool>();
        } else {
          rec.source_metadata[k] = v;
        }
      }
    }
    ImageRecord out = b.finish();
    if (!out.qa_items.empty()) {
      AttributionMapping m{out.qa_items.front().qa_id, {}, no_evidence};
      for (const auto& r : out.regions) m.evidence.push_back(r.region_id);
      out.attributions.push_back(std::move(m));
    }
    return out;
  }
};

// Dataset-family adapters. The shapes are synthetic stand-ins keyed by
// structure; see tests/fixtures/adapters for one example file each.

class ChartAdapter final : public SimpleAdapter {
 public:
  ChartAdapter() : SimpleAdapter("chart_style", {"imgname", "query", "label"}) {}

  ImageRecord adapt(const Json& raw, const AdaptOptions&) const override {
    RecordBuilder b(raw, name());
    auto& rec = b.record();
    rec.image_path = b.take_string("imgname");
    rec.image_uid = raw.contains("id") ? b.take_string("id") : file_stem(rec.image_path);
    b.set_size(num_or_nan(b.take("width")), num_or_nan(b.take("height")));
    b.add_region_list(b.take("elements"), Source::ground_truth, ArrayConvention::corners);
    b.add_region_list(b.take("model_boxes"), Source::predicted, ArrayConvention::corners);
    b.add_qa(b.take_string("query"), b.take_string("label"), {});
    return b.finish();
  }
};

class MapAdapter final : public SimpleAdapter {
 public:
  MapAdapter() : SimpleAdapter("map_style", {"map_id", "image_file", "question"}) {}

  ImageRecord adapt(const Json& raw, const AdaptOptions&) const override {
    RecordBuilder b(raw, name());
    auto& rec = b.record();
    rec.image_uid = b.take_string("map_id");
    rec.image_path = b.take_string("image_file");
    if (const Json* s = b.take("map_size"); s != nullptr && is_number_array(*s, 2)) {
      b.set_size((*s)[0].get<double>(), (*s)[1].get<double>());
    }
    b.add_region_list(b.take("regions"), Source::ground_truth, ArrayConvention::corners);
    b.add_qa(b.take_string("question"), b.take_string("answer"), string_list(b.take("options")));
    return b.finish();
  }
};

class MapRegionAdapter final : public SimpleAdapter {
 public:
  MapRegionAdapter() : SimpleAdapter("map_region_style", {"map_path", "qa"}) {}

  ImageRecord adapt(const Json& raw, const AdaptOptions&) const override {
    RecordBuilder b(raw, name());
    auto& rec = b.record();
    rec.image_path = b.take_string("map_path");
    rec.image_uid = raw.contains("id") ? b.take_string("id") : file_stem(rec.image_path);
    if (const Json* s = b.take("size"); s != nullptr && s->is_object()) {
      auto w = s->find("w");
      auto h = s->find("h");
      b.set_size(w == s->end() ? std::nan("") : num_or_nan(&*w),
                 h == s->end() ? std::nan("") : num_or_nan(&*h));
    }
    b.add_region_list(b.take("regions"), Source::ground_truth, ArrayConvention::xywh);
    if (const Json* qa = b.take("qa"); qa != nullptr && qa->is_array()) {
      for (const auto& q : *qa) {
        auto opts = q.find("options");
        b.add_qa(str_field(q, "q"), str_field(q, "a"),
                 string_list(opts == q.end() ? nullptr : &*opts));
      }
    }
    return b.finish();
  }
};

class DiagramAdapter final : public SimpleAdapter {
 public:
  DiagramAdapter() : SimpleAdapter("diagram_style", {"imageName", "questions", "textBoxes"}) {}

  ImageRecord adapt(const Json& raw, const AdaptOptions&) const override {
    RecordBuilder b(raw, name());
    auto& rec = b.record();
    rec.image_path = b.take_string("imageName");
    rec.image_uid = file_stem(rec.image_path);
    if (const Json* s = b.take("imageSize"); s != nullptr && s->is_object()) {
      b.set_size(s->value("width", std::nan("")), s->value("height", std::nan("")));
    }
    b.add_region_list(b.take("textBoxes"), Source::ground_truth, ArrayConvention::corners);
    b.add_region_list(b.take("blobs"), Source::ground_truth, ArrayConvention::corners);
    if (const Json* qs = b.take("questions"); qs != nullptr && qs->is_object()) {
      for (const auto& [text, q] : qs->items()) {
        auto opts = q.find("answerTexts");
        auto choices = string_list(opts == q.end() ? nullptr : &*opts);
        std::string answer;
        if (auto c = q.find("correctAnswer"); c != q.end() && c->is_number_integer()) {
          const auto i = c->get<long long>();
          if (i >= 0 && static_cast<std::size_t>(i) < choices.size()) answer = choices[i];
        }
        b.add_qa(text, answer, choices);
      }
    }
    return b.finish();
  }
};

class CircuitAdapter final : public SimpleAdapter {
 public:
  CircuitAdapter() : SimpleAdapter("circuit_style", {"file", "question", "components"}) {}

  ImageRecord adapt(const Json& raw, const AdaptOptions&) const override {
    RecordBuilder b(raw, name());
    auto& rec = b.record();
    rec.image_path = b.take_string("file");
    rec.image_uid = file_stem(rec.image_path);
    b.set_size(num_or_nan(b.take("img_w")), num_or_nan(b.take("img_h")));
    b.add_region_list(b.take("components"), Source::ground_truth, ArrayConvention::fractional);
    b.add_qa(b.take_string("question"), b.take_string("answer"), string_list(b.take("choices")));
    return b.finish();
  }
};

class InfographicAdapter final : public SimpleAdapter {
 public:
  InfographicAdapter()
      : SimpleAdapter("infographic_style", {"image_local_name", "questionId", "question"}) {}

  ImageRecord adapt(const Json& raw, const AdaptOptions&) const override {
    RecordBuilder b(raw, name());
    auto& rec = b.record();
    rec.image_path = b.take_string("image_local_name");
    rec.image_uid = file_stem(rec.image_path) + "_" + b.take_string("questionId");
    b.set_size(num_or_nan(b.take("page_width")), num_or_nan(b.take("page_height")));
    b.add_region_list(b.take("ocr_boxes"), Source::ground_truth, ArrayConvention::xywh);
    auto answers = string_list(b.take("answers"));
    b.add_qa(b.take_string("question"), answers.empty() ? std::string() : answers.front(), {});
    if (!answers.empty()) rec.source_metadata["answers"] = Json{{"accepted", answers}};
    return b.finish();
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// Registry and detection

AdapterRegistry::AdapterRegistry(std::vector<std::unique_ptr<Adapter>> adapters)
    : adapters_(std::move(adapters)) {}

bool has_key_path(const Json& raw, std::string_view path) {
  const Json* cur = &raw;
  while (!path.empty()) {
    const auto dot = path.find('.');
    const auto head = path.substr(0, dot);
    if (!cur->is_object()) return false;
    auto it = cur->find(std::string(head));
    if (it == cur->end()) return false;
    cur = &*it;
    path = dot == std::string_view::npos ? std::string_view{} : path.substr(dot + 1);
  }
  return true;
}

const Adapter& AdapterRegistry::detect(const Json& raw) const {
  const Adapter* best = nullptr;
  std::size_t best_score = 0;
  if (raw.is_object()) {
    for (const auto& a : adapters_) {
      const auto& keys = a->fingerprint();
      const bool match = std::all_of(keys.begin(), keys.end(),
                                     [&](const std::string& k) { return has_key_path(raw, k); });
      if (match && keys.size() > best_score) {
        best = a.get();
        best_score = keys.size();
      }
    }
  }
  if (best == nullptr) {
    throw Error(ErrorCode::UnrecognizedShape, "no adapter fingerprint matches the record");
  }
  return *best;
}

const Adapter& AdapterRegistry::get(std::string_view name) const {
  for (const auto& a : adapters_) {
    if (a->name() == name) return *a;
  }
  throw Error(ErrorCode::InputError, "unknown adapter " + std::string(name));
}

std::vector<std::string> AdapterRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& a : adapters_) out.emplace_back(a->name());
  return out;
}

const AdapterRegistry& default_registry() {
  static const AdapterRegistry registry = [] {
    std::vector<std::unique_ptr<Adapter>> v;
    v.push_back(std::make_unique<GenericAdapter>());
    v.push_back(std::make_unique<UnifiedOutputAdapter>());
    v.push_back(std::make_unique<ChartAdapter>());
    v.push_back(std::make_unique<MapAdapter>());
    v.push_back(std::make_unique<MapRegionAdapter>());
    v.push_back(std::make_unique<DiagramAdapter>());
    v.push_back(std::make_unique<CircuitAdapter>());
    v.push_back(std::make_unique<InfographicAdapter>());
    return AdapterRegistry(std::move(v));
  }();
  return registry;
}

std::string detect_schema(const Json& raw, const AdapterRegistry& registry) {
  return std::string(registry.detect(raw).name());
}

ImageRecord adapt_record(const Json& raw, std::string_view adapter,
                         const AdapterRegistry& registry, const AdaptOptions& options) {
  const Adapter& a = registry.get(adapter);
  if (registry.detect(raw).name() != a.name()) {
    throw Error(ErrorCode::InputError,
                "record shape does not match adapter " + std::string(adapter));
  }
  try {
    return a.adapt(raw, options);
  } catch (const AdaptationError&) {
    throw;
  } catch (const Error& e) {
    throw AdaptationError(e.what(), {{"", e.what(), Severity::error}});
  } catch (const nlohmann::json::exception& e) {
    throw AdaptationError(e.what(), {{"", e.what(), Severity::error}});
  }
}

std::vector<LoadedEntry> parse_dataset(const Json& doc, const AdapterRegistry& registry) {
  if (!doc.is_array()) {
    throw Error(ErrorCode::NotAnArray, "dataset top level must be a JSON array");
  }
  std::vector<LoadedEntry> out;
  out.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    try {
      out.push_back({doc[i], std::string(registry.detect(doc[i]).name())});
    } catch (const Error& e) {
      throw RecordError(e.code(), i, e.what());
    }
  }
  return out;
}

std::vector<LoadedEntry> load_dataset(const std::filesystem::path& path,
                                      const AdapterRegistry& registry) {
  return parse_dataset(parse_json_file(path), registry);
}

std::vector<ImageRecord> ingest_file(const std::filesystem::path& path,
                                     const AdapterRegistry& registry) {
  const auto entries = load_dataset(path, registry);
  std::vector<ImageRecord> out;
  std::set<std::string> uids;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    ImageRecord rec;
    try {
      rec = adapt_record(entries[i].raw, entries[i].adapter, registry);
    } catch (const Error& e) {
      throw RecordError(e.code(), i, e.what());
    }
    if (!uids.insert(rec.image_uid).second) {
      throw RecordError(ErrorCode::InvalidRecord, i, "duplicate image_uid " + rec.image_uid);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

ImageRecord load_export_document(const std::filesystem::path& path,
                                 const AdapterRegistry& registry) {
  const Json doc = parse_json_file(path);
  AdaptOptions options;
  const std::string stem = path.stem().string();
  options.uid_hint = stem.substr(0, stem.find("__"));
  return adapt_record(doc, detect_schema(doc, registry), registry, options);
}

}  // namespace evrev
