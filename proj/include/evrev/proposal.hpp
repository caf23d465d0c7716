// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "evrev/meta_schema.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

namespace evrev {

enum class ProposalMode { selection, region_generation, qa_and_region_generation };

std::string_view to_string(ProposalMode mode);
std::optional<ProposalMode> proposal_mode_from_string(std::string_view text);

struct ImagePayload {
  std::string bytes;
  std::string media_type;
};

struct QAPrompt {
  std::string question_text;
  std::string answer_text;
  std::vector<std::string> choices;
};

struct Candidate {
  std::string region_id;
  BBox bbox;
  std::optional<std::string> label;
};

struct ProposalRequest {
  ProposalMode mode = ProposalMode::selection;
  std::string image_uid;
  ImagePayload image;
  std::optional<ImageSize> image_size;
  std::optional<QAPrompt> qa;  // absent iff qa_and_region_generation
  std::vector<Candidate> candidates;  // empty iff mode != selection
};

struct GeneratedRegion {
  BBox bbox;
  std::optional<std::string> label;

  friend bool operator==(const GeneratedRegion&, const GeneratedRegion&) = default;
};

struct GeneratedQA {
  QAPrompt qa;
  // Indices into ProposalResponse::generated_regions; a provisional mapping.
  std::vector<std::size_t> evidence;
};

struct ProposalResponse {
  std::vector<std::string> selected_ids;
  std::vector<GeneratedRegion> generated_regions;
  std::vector<GeneratedQA> generated_qa;
  Json backend_meta = Json::object();
  std::vector<std::string> warnings;
};

/// Which proposal setting a record/QA pair falls into.
ProposalMode choose_mode(const ImageRecord& record, const QAItem* qa);

/// Builds the request for `mode`. Candidates are the non-deleted regions
/// whose source is ground_truth or predicted.
ProposalRequest build_request(const ImageRecord& record, const QAItem* qa, ProposalMode mode,
                              ImagePayload image = {});

/// Checks the request invariants; throws InputError.
void check_request(const ProposalRequest& request);

// Wire format (JSON over HTTP POST).
Json request_to_wire(const ProposalRequest& request);
ProposalRequest request_from_wire(const Json& wire);
Json response_to_wire(const ProposalResponse& response);
ProposalResponse response_from_wire(const Json& wire);

/// First complete JSON object embedded in free text, if any.
std::optional<Json> extract_first_json_object(std::string_view text);

/// One request/response exchange with a proposal model.
///
/// Implementations return the reply document and throw BackendTimeout,
/// BackendUnavailable or BackendMalformedReply. They must be safe to call
/// from several threads at once.
class ProposalBackend {
 public:
  virtual ~ProposalBackend() = default;
  virtual std::string name() const = 0;
  virtual Json exchange(const Json& request_wire) = 0;
};

/// Deterministic stand-in. Pure function of (request, seed).
///
/// selection: candidates whose label occurs as a case-insensitive token
/// sequence in the question or answer. region_generation: one box covering
/// the central quarter of the image. qa_and_region_generation: one
/// "What does this image show?" item answered with the image uid, paired with
/// the central box.
class MockBackend final : public ProposalBackend {
 public:
  explicit MockBackend(std::uint64_t seed = 0) : seed_(seed) {}
  std::string name() const override { return "mock"; }
  Json exchange(const Json& request_wire) override;

 private:
  std::uint64_t seed_;
};

struct HttpBackendConfig {
  std::string url;  // e.g. http://host:port/propose
  std::string token;
  std::chrono::milliseconds timeout{60'000};
  int retries = 1;
  std::chrono::milliseconds max_jitter{500};
  // When set, requests go to an OpenAI-style chat completions endpoint with
  // the prompt templates from this file instead of the raw wire contract.
  std::optional<std::filesystem::path> prompt_file;
};

/// Reads EVREV_BACKEND_URL / EVREV_BACKEND_TOKEN / EVREV_PROMPT_FILE.
HttpBackendConfig http_backend_config_from_env();

std::unique_ptr<ProposalBackend> make_http_backend(HttpBackendConfig config);

/// Bounds how many exchanges are in flight across threads.
class BoundedBackend final : public ProposalBackend {
 public:
  BoundedBackend(std::shared_ptr<ProposalBackend> inner, int width);
  std::string name() const override { return inner_->name(); }
  Json exchange(const Json& request_wire) override;

 private:
  std::shared_ptr<ProposalBackend> inner_;
  std::counting_semaphore<1024> slots_;
};

/// Selection mode. Never introduces regions outside the candidate pool;
/// unparseable replies degrade to an empty selection with a warning.
ProposalResponse select_evidence(const ProposalRequest& request, ProposalBackend& backend);

/// Region generation. Boxes are clipped to the image; AllRegionsDegenerate
/// when every returned box is invalid.
ProposalResponse generate_regions(const ProposalRequest& request, ProposalBackend& backend);

/// QA and region generation. NoQAGenerated when no usable QA item comes back.
ProposalResponse generate_qa_and_regions(const ProposalRequest& request,
                                         ProposalBackend& backend);

/// Dispatches on request.mode.
ProposalResponse propose(const ProposalRequest& request, ProposalBackend& backend);

/// Reads the image file and guesses its media type from the extension.
/// Returns an empty payload when the file is not readable.
ImagePayload load_image_payload(const std::filesystem::path& path);

/// Pixel dimensions from a PNG or JPEG header, without decoding.
std::optional<ImageSize> probe_image_size(const std::string& bytes);

}  // namespace evrev
