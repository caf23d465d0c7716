// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "evrev/meta_schema.hpp"

#include <filesystem>
#include <string>

namespace evrev {

/// Deterministic serializer for every document the project writes.
///
/// Keys keep insertion order, indentation is two spaces, the output ends in
/// a single LF. Numbers never use exponent notation: integral values print
/// as integers and everything else as the shortest fixed-point string that
/// parses back to the same double. Parsing the output and dumping it again
/// reproduces the same bytes.
std::string canonical_dump(const Json& doc);

/// Single-line variant for JSON Lines files (no trailing newline).
std::string canonical_dump_line(const Json& doc);

std::string format_number(double value);

Json parse_json_file(const std::filesystem::path& path);

/// Writes via a temporary sibling and rename.
void write_text_file_atomic(const std::filesystem::path& path, const std::string& text);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace evrev
