#include "orientdet/ioformats.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "orientdet/error.hpp"

namespace orientdet {

namespace {

struct Token {
  std::string_view text;
  std::size_t column = 0;  // 1-based.
};

std::vector<Token> Tokenize(std::string_view line) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    tokens.push_back({line.substr(start, i - start), start + 1});
  }
  return tokens;
}

// Calls fn(line_number, line) for every line.
template <typename Fn>
void ForEachLine(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = text.find('\n', pos);
    const std::string_view line =
        text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    ++line_no;
    if (!(end == std::string_view::npos && line.empty())) fn(line_no, line);
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
}

double ParseNumber(const Token& tok, std::size_t line, const char* what) {
  double value = 0.0;
  const char* first = tok.text.data();
  const char* last = first + tok.text.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last || !std::isfinite(value)) {
    throw ParseError(std::string("expected ") + what + ", got '" + std::string(tok.text) + "'",
                     line, tok.column);
  }
  return value;
}

long ParseInteger(const Token& tok, std::size_t line, const char* what) {
  long value = 0;
  const char* first = tok.text.data();
  const char* last = first + tok.text.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ParseError(std::string("expected ") + what + ", got '" + std::string(tok.text) + "'",
                     line, tok.column);
  }
  return value;
}

Quad ParseQuad(std::span<const Token> tokens, std::size_t line) {
  std::array<Point2, 4> v{};
  for (int i = 0; i < 4; ++i) {
    v[i].x = ParseNumber(tokens[2 * i], line, "coordinate");
    v[i].y = ParseNumber(tokens[2 * i + 1], line, "coordinate");
  }
  return Quad(v);
}

std::string ShortestRoundTrip(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s == "-0") s = "0";
  return s;
}

bool StartsWithNoCase(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  return ToLower(s.substr(0, prefix.size())) == prefix;
}

void AppendQuad(std::string& out, const Quad& q) {
  for (const Point2& p : q.vertices()) {
    out += ' ';
    out += FormatFixed(p.x, 2);
    out += ' ';
    out += FormatFixed(p.y, 2);
  }
}

constexpr char kGridMagic[4] = {'O', 'D', 'G', '1'};

void PutU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t GetU32(std::string_view bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return v;
}

const std::string kTaskPrefix = "Task1_";

}  // namespace

const std::vector<std::string>& DotaCategories() {
  static const std::vector<std::string> kNames = {
      "plane",        "baseball-diamond", "bridge",           "ground-track-field",
      "small-vehicle", "large-vehicle",   "ship",             "tennis-court",
      "basketball-court", "storage-tank", "soccer-ball-field", "roundabout",
      "harbor",       "swimming-pool",    "helicopter"};
  return kNames;
}

std::string ToLower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

AnnotationFile ParseDotaAnnotation(std::string_view text) {
  AnnotationFile file;
  ForEachLine(text, [&](std::size_t line_no, std::string_view line) {
    const auto tokens = Tokenize(line);
    if (tokens.empty()) return;
    if (file.records.empty()) {
      const std::string_view first = tokens.front().text;
      for (std::string_view key : {std::string_view("imagesource:"), std::string_view("gsd:")}) {
        if (StartsWithNoCase(first, key)) {
          const std::size_t start = tokens.front().column - 1 + key.size();
          std::string value(line.substr(start));
          while (!value.empty() && (value.back() == '\r' || value.back() == ' ')) value.pop_back();
          file.metadata[std::string(key.substr(0, key.size() - 1))] = value;
          return;
        }
      }
    }
    if (tokens.size() < 9) {
      // Report the first token that should have been numeric, if any.
      for (std::size_t i = 0; i < std::min<std::size_t>(tokens.size(), 8); ++i) {
        ParseNumber(tokens[i], line_no, "coordinate");
      }
      throw ParseError("expected 8 coordinates, a category and a difficult flag; got " +
                           std::to_string(tokens.size()) + " fields",
                       line_no, line.size() + 1);
    }
    if (tokens.size() > 10) {
      throw ParseError("unexpected extra field '" + std::string(tokens[10].text) + "'", line_no,
                       tokens[10].column);
    }
    AnnotationRecord rec;
    rec.quad = ParseQuad(tokens, line_no);
    rec.category = ToLower(tokens[8].text);
    if (tokens.size() == 10) {
      const long d = ParseInteger(tokens[9], line_no, "difficult flag 0 or 1");
      if (d != 0 && d != 1) {
        throw ParseError("difficult flag must be 0 or 1", line_no, tokens[9].column);
      }
      rec.difficult = static_cast<int>(d);
    } else {
      file.warnings.push_back({line_no, "missing difficult flag, assuming 0"});
    }
    file.records.push_back(std::move(rec));
  });
  return file;
}

AnnotationFile ReadDotaAnnotationFile(const std::filesystem::path& path) {
  try {
    return ParseDotaAnnotation(ReadTextFile(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string FormatDotaAnnotation(const AnnotationFile& file) {
  std::string out;
  for (const char* key : {"imagesource", "gsd"}) {
    if (const auto it = file.metadata.find(key); it != file.metadata.end()) {
      out += key;
      out += ':';
      out += it->second;
      out += '\n';
    }
  }
  for (const AnnotationRecord& rec : file.records) {
    for (std::size_t i = 0; i < 4; ++i) {
      out += ShortestRoundTrip(rec.quad[i].x);
      out += ' ';
      out += ShortestRoundTrip(rec.quad[i].y);
      out += ' ';
    }
    out += rec.category;
    out += ' ';
    out += std::to_string(rec.difficult);
    out += '\n';
  }
  return out;
}

std::string FormatFixed(double value, int decimals) {
  char buf[128];
  const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed, decimals);
  std::string s(buf, res.ptr);
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string FormatDetectionLine(const std::string& image_id, const OrientedBox& box,
                                double score) {
  std::string line = image_id;
  line += ' ';
  line += FormatFixed(score, 4);
  AppendQuad(line, BoxToQuad(box));
  return line;
}

void WriteDetections(const std::filesystem::path& dir, const DetectionsByClass& dets,
                     std::span<const std::string> classes) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> names(classes.begin(), classes.end());
  for (const auto& [name, _] : dets) names.push_back(name);
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  for (const std::string& name : names) {
    std::string content;
    if (const auto it = dets.find(name); it != dets.end()) {
      for (const ScoredBox& d : it->second) {
        content += FormatDetectionLine(d.image_id, d.box, d.score);
        content += '\n';
      }
    }
    WriteFileAtomic(dir / (kTaskPrefix + name + ".txt"), content);
  }
}

DetectionFiles ReadDetections(const std::filesystem::path& dir,
                              std::span<const std::string> known_classes) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error("detection directory '" + dir.string() + "' does not exist");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with(kTaskPrefix) && name.ends_with(".txt")) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  DetectionFiles out;
  for (const auto& path : files) {
    const std::string stem = path.filename().string();
    std::string cls = ToLower(stem.substr(kTaskPrefix.size(), stem.size() - kTaskPrefix.size() - 4));
    if (!known_classes.empty() &&
        std::find(known_classes.begin(), known_classes.end(), cls) == known_classes.end()) {
      out.warnings.push_back({0, "unknown class '" + cls + "' in " + path.filename().string() +
                                     ", collected under 'unknown'"});
      cls = "unknown";
    }
    auto& bucket = out.by_class[cls];
    const std::string text = ReadTextFile(path);
    try {
      ForEachLine(text, [&](std::size_t line_no, std::string_view line) {
        const auto tokens = Tokenize(line);
        if (tokens.empty()) return;
        if (tokens.size() != 10) {
          throw ParseError("expected 'image-id score x1 y1 x2 y2 x3 y3 x4 y4', got " +
                               std::to_string(tokens.size()) + " fields",
                           line_no, 1);
        }
        ScoredBox det;
        det.image_id = std::string(tokens[0].text);
        det.score = ParseNumber(tokens[1], line_no, "score");
        const Quad q = ParseQuad(std::span<const Token>(tokens).subspan(2), line_no);
        try {
          det.box = QuadToBox(q);
        } catch (const ZeroAreaError&) {
          out.warnings.push_back({line_no, path.filename().string() +
                                               ": degenerate quad skipped"});
          return;
        }
        bucket.push_back(std::move(det));
      });
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
  }
  return out;
}

std::vector<NamedDetection> ParseLabeledDetections(std::string_view text) {
  std::vector<NamedDetection> out;
  ForEachLine(text, [&](std::size_t line_no, std::string_view line) {
    const auto tokens = Tokenize(line);
    if (tokens.empty() || tokens.front().text.starts_with('#')) return;
    if (tokens.size() != 10) {
      throw ParseError("expected 'category score x1 y1 x2 y2 x3 y3 x4 y4', got " +
                           std::to_string(tokens.size()) + " fields",
                       line_no, 1);
    }
    NamedDetection det;
    det.category = ToLower(tokens[0].text);
    det.score = ParseNumber(tokens[1], line_no, "score");
    const Quad q = ParseQuad(std::span<const Token>(tokens).subspan(2), line_no);
    try {
      det.box = QuadToBox(q);
    } catch (const ZeroAreaError&) {
      throw ParseError("degenerate quad", line_no, tokens[2].column);
    }
    out.push_back(std::move(det));
  });
  return out;
}

std::string FormatLabeledDetections(std::span<const NamedDetection> dets) {
  std::string out;
  for (const NamedDetection& d : dets) {
    out += d.category;
    out += ' ';
    out += FormatFixed(d.score, 4);
    AppendQuad(out, BoxToQuad(d.box));
    out += '\n';
  }
  return out;
}

std::string FormatTilePlan(const TilePlan& plan) {
  std::string out;
  for (const Window& w : plan.windows) {
    out += std::to_string(w.x0) + ' ' + std::to_string(w.y0) + ' ' + std::to_string(w.w) + ' ' +
           std::to_string(w.h) + '\n';
  }
  return out;
}

std::vector<Window> ParseTilePlan(std::string_view text) {
  std::vector<Window> windows;
  ForEachLine(text, [&](std::size_t line_no, std::string_view line) {
    const auto tokens = Tokenize(line);
    if (tokens.empty() || tokens.front().text.starts_with('#')) return;
    if (tokens.size() != 4) {
      throw ParseError("expected 'x0 y0 w h', got " + std::to_string(tokens.size()) + " fields",
                       line_no, 1);
    }
    Window w;
    w.x0 = static_cast<int>(ParseInteger(tokens[0], line_no, "integer x0"));
    w.y0 = static_cast<int>(ParseInteger(tokens[1], line_no, "integer y0"));
    w.w = static_cast<int>(ParseInteger(tokens[2], line_no, "integer width"));
    w.h = static_cast<int>(ParseInteger(tokens[3], line_no, "integer height"));
    if (w.w <= 0 || w.h <= 0) throw ParseError("window size must be positive", line_no, 1);
    windows.push_back(w);
  });
  return windows;
}

AnchorMap ParseAnchorMap(std::string_view text) {
  AnchorMap map;
  bool have_header = false;
  std::size_t next = 0;
  ForEachLine(text, [&](std::size_t line_no, std::string_view line) {
    const auto tokens = Tokenize(line);
    if (tokens.empty() || tokens.front().text.starts_with('#')) return;
    if (!have_header) {
      if (tokens.size() != 3) throw ParseError("expected header 'H W stride'", line_no, 1);
      const long h = ParseInteger(tokens[0], line_no, "integer height");
      const long w = ParseInteger(tokens[1], line_no, "integer width");
      const long s = ParseInteger(tokens[2], line_no, "integer stride");
      if (h <= 0 || w <= 0 || s <= 0) throw ParseError("header values must be positive", line_no, 1);
      map = AnchorMap(static_cast<int>(h), static_cast<int>(w), static_cast<int>(s));
      have_header = true;
      return;
    }
    if (tokens.size() != 5) throw ParseError("expected 'cx cy w h theta'", line_no, 1);
    if (next >= map.size()) throw ParseError("more anchors than H*W", line_no, 1);
    OrientedBox b{ParseNumber(tokens[0], line_no, "cx"), ParseNumber(tokens[1], line_no, "cy"),
                  ParseNumber(tokens[2], line_no, "w"), ParseNumber(tokens[3], line_no, "h"),
                  ParseNumber(tokens[4], line_no, "theta")};
    map.boxes()[next++] = b;
  });
  if (!have_header) throw ParseError("anchor map is empty");
  if (next != map.size()) {
    throw ParseError("anchor map lists " + std::to_string(next) + " anchors, header promises " +
                     std::to_string(map.size()));
  }
  return map;
}

std::string FormatAnchorMap(const AnchorMap& map) {
  std::string out = std::to_string(map.height()) + ' ' + std::to_string(map.width()) + ' ' +
                    std::to_string(map.stride()) + '\n';
  for (const OrientedBox& b : map.boxes()) {
    out += ShortestRoundTrip(b.cx) + ' ' + ShortestRoundTrip(b.cy) + ' ' + ShortestRoundTrip(b.w) +
           ' ' + ShortestRoundTrip(b.h) + ' ' + ShortestRoundTrip(b.theta) + '\n';
  }
  return out;
}

std::string EncodeGrid(const FeatureGrid& grid) {
  std::string out(kGridMagic, sizeof kGridMagic);
  PutU32(out, static_cast<std::uint32_t>(grid.height()));
  PutU32(out, static_cast<std::uint32_t>(grid.width()));
  PutU32(out, static_cast<std::uint32_t>(grid.channels()));
  PutU32(out, static_cast<std::uint32_t>(grid.stride()));
  out.reserve(out.size() + grid.values().size() * 8);
  for (double v : grid.values()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
  }
  return out;
}

FeatureGrid DecodeGrid(std::string_view bytes) {
  constexpr std::size_t kHeader = 4 + 4 * 4;
  if (bytes.size() < kHeader || std::memcmp(bytes.data(), kGridMagic, 4) != 0) {
    throw ParseError("not a grid container (bad magic or short header)");
  }
  const std::uint32_t h = GetU32(bytes, 4);
  const std::uint32_t w = GetU32(bytes, 8);
  const std::uint32_t c = GetU32(bytes, 12);
  const std::uint32_t s = GetU32(bytes, 16);
  if (h == 0 || w == 0 || c == 0 || s == 0 || h > (1u << 24) || w > (1u << 24) || c > (1u << 24)) {
    throw ParseError("grid container has invalid dimensions");
  }
  const std::size_t count = static_cast<std::size_t>(h) * w * c;
  if (bytes.size() != kHeader + count * 8) {
    throw ParseError("grid container holds " + std::to_string(bytes.size() - kHeader) +
                     " payload bytes, expected " + std::to_string(count * 8));
  }
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[kHeader + i * 8 + b]))
              << (8 * b);
    }
    values[i] = std::bit_cast<double>(bits);
  }
  return FeatureGrid(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c),
                     static_cast<int>(s), std::move(values));
}

FeatureGrid OffsetFieldToGrid(const OffsetField& field, int stride) {
  return FeatureGrid(field.height(), field.width(), field.depth(), stride, field.values());
}

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileAtomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace orientdet
