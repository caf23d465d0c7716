// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#include "evrev/canonical_json.hpp"

#include "evrev/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace evrev {

namespace {

void dump_value(const Json& v, std::string& out, int indent, int depth) {
  const bool pretty = indent > 0;
  auto newline = [&](int d) {
    if (pretty) {
      out.push_back('\n');
      out.append(static_cast<std::size_t>(d * indent), ' ');
    }
  };

  switch (v.type()) {
    case Json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out.push_back('{');
      bool first = true;
      for (const auto& [key, child] : v.items()) {
        if (!first) out.push_back(',');
        first = false;
        newline(depth + 1);
        out += Json(key).dump();
        out += pretty ? ": " : ":";
        dump_value(child, out, indent, depth + 1);
      }
      newline(depth);
      out.push_back('}');
      return;
    }
    case Json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      // Flat numeric arrays (bboxes) stay on one line.
      const bool inline_array =
          std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_number(); });
      out.push_back('[');
      bool first = true;
      for (const auto& child : v) {
        if (!first) out += inline_array && pretty ? ", " : ",";
        first = false;
        if (!inline_array) newline(depth + 1);
        dump_value(child, out, indent, depth + 1);
      }
      if (!inline_array) newline(depth);
      out.push_back(']');
      return;
    }
    case Json::value_t::number_float:
      out += format_number(v.get<double>());
      return;
    default:
      out += v.dump(-1, ' ', false, Json::error_handler_t::replace);
      return;
  }
}

}  // namespace

std::string format_number(double value) {
  if (!std::isfinite(value)) {
    return "null";
  }
  if (value == 0.0) {
    return "0";
  }
  if (std::nearbyint(value) == value && std::fabs(value) < 1e15) {
    return std::to_string(static_cast<long long>(value));
  }
  std::array<char, 512> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                 std::chars_format::fixed);
  if (ec != std::errc{}) {
    throw Error(ErrorCode::InputError, "number not representable");
  }
  return std::string(buf.data(), ptr);
}

std::string canonical_dump(const Json& doc) {
  std::string out;
  dump_value(doc, out, 2, 0);
  out.push_back('\n');
  return out;
}

std::string canonical_dump_line(const Json& doc) {
  std::string out;
  dump_value(doc, out, 0, 0);
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json parse_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

void write_text_file_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    }
    out << text;
    if (!out.flush()) {
      throw Error(ErrorCode::IoError, "short write to " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace evrev
