#pragma once

// On-disk formats.
//
// DOTA annotation (one file per image):
//   [imagesource:<text>]            optional leading metadata lines
//   [gsd:<value>]
//   x1 y1 x2 y2 x3 y3 x4 y4 category difficult
//
// Detection submission (one file per class, Task1_<class>.txt):
//   image-id score x1 y1 x2 y2 x3 y3 x4 y4
// with coordinates in fixed 2-decimal and scores in fixed 4-decimal notation.
//
// Labeled detection list (per-chip files and NMS input):
//   category score x1 y1 x2 y2 x3 y3 x4 y4
//
// Tile plan: one window per line, "x0 y0 w h".
//
// Anchor map text: a header line "H W stride" followed by H*W row-major
// lines "cx cy w h theta".
//
// Grid container (binary, little-endian):
//   bytes 0..3   magic "ODG1"
//   uint32 x 4   height, width, channels, stride
//   float64 x N  values, row-major over (y, x, channel)
//
// All text is UTF-8 and written independently of the process locale.

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "orientdet/evalkit.hpp"
#include "orientdet/featops.hpp"
#include "orientdet/geometry.hpp"
#include "orientdet/pipeline.hpp"

namespace orientdet {

// The 15 DOTA-v1.0 category names, lowercase.
const std::vector<std::string>& DotaCategories();

std::string ToLower(std::string_view s);

struct Warning {
  std::size_t line = 0;  // 1-based; 0 when not tied to a line.
  std::string message;
};

struct AnnotationRecord {
  Quad quad;
  std::string category;  // Lowercase.
  int difficult = 0;
};

struct AnnotationFile {
  std::map<std::string, std::string> metadata;  // e.g. "gsd" -> "0.5"
  std::vector<AnnotationRecord> records;
  std::vector<Warning> warnings;
};

// Throws ParseError carrying line and column for malformed records.
AnnotationFile ParseDotaAnnotation(std::string_view text);
AnnotationFile ReadDotaAnnotationFile(const std::filesystem::path& path);

// Coordinates in shortest round-trip form, so parsing the output reproduces
// the records exactly.
std::string FormatDotaAnnotation(const AnnotationFile& file);

// Fixed-precision, locale-independent decimal; never prints "-0.00".
std::string FormatFixed(double value, int decimals);

// One submission line (no newline).
std::string FormatDetectionLine(const std::string& image_id, const OrientedBox& box, double score);

// Writes Task1_<class>.txt for every class in `classes` and in `dets`;
// classes without detections get an empty file. Files are written atomically.
void WriteDetections(const std::filesystem::path& dir, const DetectionsByClass& dets,
                     std::span<const std::string> classes = {});

struct DetectionFiles {
  DetectionsByClass by_class;
  std::vector<Warning> warnings;
};

// Reads every Task1_*.txt under `dir`. Files whose class is not in
// `known_classes` (when non-empty) land in the "unknown" bucket with a
// warning. Quads are reduced with QuadToBox.
DetectionFiles ReadDetections(const std::filesystem::path& dir,
                              std::span<const std::string> known_classes = {});

struct NamedDetection {
  std::string category;
  OrientedBox box;
  double score = 0.0;
};

std::vector<NamedDetection> ParseLabeledDetections(std::string_view text);
std::string FormatLabeledDetections(std::span<const NamedDetection> dets);

std::string FormatTilePlan(const TilePlan& plan);
// Blank lines and lines starting with '#' are skipped.
std::vector<Window> ParseTilePlan(std::string_view text);

AnchorMap ParseAnchorMap(std::string_view text);
std::string FormatAnchorMap(const AnchorMap& map);

std::string EncodeGrid(const FeatureGrid& grid);
// Throws ParseError on a bad magic, truncated data or trailing bytes.
FeatureGrid DecodeGrid(std::string_view bytes);

// An offset field as a grid with 2k^2 channels.
FeatureGrid OffsetFieldToGrid(const OffsetField& field, int stride);

std::string ReadTextFile(const std::filesystem::path& path);
// Writes to a temporary sibling and renames it over `path`.
void WriteFileAtomic(const std::filesystem::path& path, std::string_view content);

}  // namespace orientdet
