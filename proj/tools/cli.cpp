#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "orientdet/anchors.hpp"
#include "orientdet/error.hpp"
#include "orientdet/evalkit.hpp"
#include "orientdet/featops.hpp"
#include "orientdet/ioformats.hpp"
#include "orientdet/parallel.hpp"
#include "orientdet/pipeline.hpp"
#include "orientdet/postprocess.hpp"

namespace orientdet::cli {

namespace fs = std::filesystem;

namespace {

// Raised for invalid flag combinations that CLI11 cannot express.
struct UsageError : Error {
  using Error::Error;
};

std::string Shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  return s == "-0" ? "0" : s;
}

void PrintWarnings(std::ostream& err, const std::string& source, const std::vector<Warning>& warnings) {
  for (const Warning& w : warnings) {
    err << "warning: " << source;
    if (w.line != 0) err << ":" << w.line;
    err << ": " << w.message << '\n';
  }
}

// Category names -> dense class ids in sorted name order.
class ClassTable {
 public:
  explicit ClassTable(std::set<std::string> names) : names_(names.begin(), names.end()) {}
  int Id(const std::string& name) const {
    const auto it = std::lower_bound(names_.begin(), names_.end(), name);
    return static_cast<int>(it - names_.begin());
  }
  const std::string& Name(int id) const { return names_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
};

std::string ChipFileName(const Window& w) {
  return std::to_string(w.x0) + "_" + std::to_string(w.y0) + ".txt";
}

std::vector<LabeledBox> ToLabeled(const AnnotationFile& file, const ClassTable& table,
                                  std::vector<Warning>& warnings) {
  std::vector<LabeledBox> out;
  for (std::size_t i = 0; i < file.records.size(); ++i) {
    const AnnotationRecord& rec = file.records[i];
    try {
      out.push_back({QuadToBox(rec.quad), table.Id(rec.category)});
    } catch (const ZeroAreaError&) {
      warnings.push_back({0, "record " + std::to_string(i + 1) + " has a degenerate quad, skipped"});
    }
  }
  return out;
}

std::set<std::string> Categories(const AnnotationFile& file) {
  std::set<std::string> names;
  for (const AnnotationRecord& rec : file.records) names.insert(rec.category);
  return names;
}

// ---------------------------------------------------------------------------

struct TileArgs {
  int width = 0;
  int height = 0;
  int chip = 1024;
  int stride = 824;
  std::string out;
};

int RunTile(const TileArgs& a, std::ostream& out) {
  if (a.stride > a.chip) {
    throw UsageError("--stride (" + std::to_string(a.stride) + ") must not exceed --chip (" +
                     std::to_string(a.chip) + ")");
  }
  const TilePlan plan = PlanTiles(a.width, a.height, a.chip, a.stride);
  WriteFileAtomic(a.out, FormatTilePlan(plan));
  out << plan.windows.size() << " windows\n";
  return kOk;
}

struct MergeArgs {
  std::string plan;
  std::string chips;
  double nms = kDefaultMergeIoU;
  std::string out;
  std::string image_id = "image";
  std::vector<std::string> classes;
};

int RunMerge(const MergeArgs& a, std::ostream& out, int threads) {
  const std::vector<Window> windows = ParseTilePlan(ReadTextFile(a.plan));
  std::vector<std::string> missing;
  for (const Window& w : windows) {
    if (!fs::is_regular_file(fs::path(a.chips) / ChipFileName(w))) {
      missing.push_back("x0=" + std::to_string(w.x0) + " y0=" + std::to_string(w.y0) + " (" +
                        ChipFileName(w) + ")");
    }
  }
  if (!missing.empty()) {
    std::string msg = "missing chip file for " + std::to_string(missing.size()) + " window(s):";
    for (const std::string& m : missing) msg += "\n  " + m;
    throw Error(msg);
  }

  std::vector<std::vector<NamedDetection>> parsed(windows.size());
  ParallelFor(windows.size(), threads, [&](std::size_t i) {
    const fs::path path = fs::path(a.chips) / ChipFileName(windows[i]);
    try {
      parsed[i] = ParseLabeledDetections(ReadTextFile(path));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
  });

  std::set<std::string> names;
  for (const auto& chip : parsed) {
    for (const NamedDetection& d : chip) names.insert(d.category);
  }
  const ClassTable table(names);
  std::vector<ChipDetections> chips(windows.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    chips[i].window = windows[i];
    for (const NamedDetection& d : parsed[i]) {
      chips[i].detections.push_back({d.box, table.Id(d.category), d.score});
    }
    total += parsed[i].size();
  }

  const std::vector<Detection> merged = MergeDetections(chips, a.nms);
  DetectionsByClass by_class;
  for (const Detection& d : merged) {
    by_class[table.Name(d.class_id)].push_back({a.image_id, d.box, d.score});
  }
  WriteDetections(a.out, by_class, a.classes);
  out << "merged " << total << " detections from " << windows.size() << " chips into "
      << merged.size() << '\n';
  return kOk;
}

struct EvalArgs {
  std::string dets;
  std::string gt;
  double iou = 0.5;
  std::string metric = "voc07";
  bool range = false;
  bool json = false;
  std::string out;
};

GroundTruthByClass ReadGroundTruthDir(const fs::path& dir, std::ostream& err) {
  if (!fs::is_directory(dir)) throw Error("ground-truth directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  GroundTruthByClass gts;
  for (const fs::path& path : files) {
    const AnnotationFile file = ReadDotaAnnotationFile(path);
    PrintWarnings(err, path.string(), file.warnings);
    const std::string image_id = path.stem().string();
    for (std::size_t i = 0; i < file.records.size(); ++i) {
      const AnnotationRecord& rec = file.records[i];
      try {
        gts[rec.category].push_back({image_id, QuadToBox(rec.quad), rec.difficult != 0});
      } catch (const ZeroAreaError&) {
        err << "warning: " << path.string() << ": record " << i + 1
            << " has a degenerate quad, skipped\n";
      }
    }
  }
  return gts;
}

int RunEval(const EvalArgs& a, std::ostream& out, std::ostream& err, int threads) {
  if (!(a.iou > 0.0 && a.iou <= 1.0)) throw UsageError("--iou must lie in (0, 1]");
  GroundTruthByClass gts = ReadGroundTruthDir(a.gt, err);

  std::vector<std::string> known = DotaCategories();
  for (const auto& [name, _] : gts) known.push_back(name);
  DetectionFiles det_files = ReadDetections(a.dets, known);
  PrintWarnings(err, a.dets, det_files.warnings);

  // Evaluate on the classes present on both sides.
  DetectionsByClass dets;
  for (auto& [name, list] : det_files.by_class) {
    if (gts.count(name) != 0) {
      dets[name] = std::move(list);
    } else {
      err << "warning: class '" << name << "' has detections but no ground truth; ignored\n";
    }
  }
  for (auto it = gts.begin(); it != gts.end();) {
    if (dets.count(it->first) == 0) {
      err << "warning: class '" << it->first << "' has ground truth but no detection file; ignored\n";
      it = gts.erase(it);
    } else {
      ++it;
    }
  }

  const std::vector<double> thresholds = a.range ? RangeThresholds() : std::vector<double>{a.iou};
  const EvalReport report = MapEval(dets, gts, thresholds, ParseMetric(a.metric), threads);
  if (report.no_ground_truth) err << "warning: no ground truth to evaluate; mAP reported as 0\n";
  const std::string text = a.json ? FormatJson(report) + "\n" : FormatTsv(report);
  if (!a.out.empty()) WriteFileAtomic(a.out, text);
  out << text;
  return kOk;
}

struct NmsArgs {
  std::string in;
  double iou = 0.5;
  bool class_agnostic = false;
  std::string out;
};

int RunNms(const NmsArgs& a, std::ostream& out) {
  std::vector<NamedDetection> named;
  try {
    named = ParseLabeledDetections(ReadTextFile(a.in));
  } catch (const ParseError& e) {
    throw ParseError(a.in + ": " + e.what());
  }
  std::set<std::string> names;
  for (const NamedDetection& d : named) names.insert(d.category);
  const ClassTable table(names);
  std::vector<Detection> dets;
  for (const NamedDetection& d : named) dets.push_back({d.box, table.Id(d.category), d.score});

  const std::vector<std::size_t> keep = RotatedNmsIndices(dets, {a.iou, !a.class_agnostic});
  std::vector<NamedDetection> kept;
  for (std::size_t i : keep) kept.push_back(named[i]);
  const std::string text = FormatLabeledDetections(kept);
  if (a.out.empty()) {
    out << text;
  } else {
    WriteFileAtomic(a.out, text);
    out << "kept " << kept.size() << " of " << named.size() << " detections\n";
  }
  return kOk;
}

struct OffsetsArgs {
  std::string anchors;
  int k = 3;
  int stride = 8;
  bool dump = false;
  std::string out;
};

int RunOffsets(const OffsetsArgs& a, std::ostream& out, std::ostream& err) {
  if (a.k < 1 || a.k % 2 == 0) throw UsageError("--k must be a positive odd integer");
  if (a.stride < 1) throw UsageError("--stride must be positive");
  AnchorMap anchors;
  try {
    anchors = ParseAnchorMap(ReadTextFile(a.anchors));
  } catch (const ParseError& e) {
    throw ParseError(a.anchors + ": " + e.what());
  }
  if (anchors.stride() != a.stride) {
    err << "warning: anchor map declares stride " << anchors.stride() << ", using --stride "
        << a.stride << '\n';
  }
  const OffsetField field = ComputeOffsetField(anchors, a.k, a.stride);
  if (!a.out.empty()) WriteFileAtomic(a.out, EncodeGrid(OffsetFieldToGrid(field, a.stride)));
  if (a.dump) {
    // One line per location: y x dx0 dy0 dx1 dy1 ...
    for (int y = 0; y < field.height(); ++y) {
      for (int x = 0; x < field.width(); ++x) {
        out << y << ' ' << x;
        for (int t = 0; t < a.k * a.k; ++t) {
          const Point2 o = field.offset(y, x, t);
          out << ' ' << Shortest(o.x) << ' ' << Shortest(o.y);
        }
        out << '\n';
      }
    }
  } else {
    out << "offset field " << field.height() << "x" << field.width() << "x" << field.depth() << '\n';
  }
  return kOk;
}

struct SimulateArgs {
  std::string gt;
  int width = 0;
  int height = 0;
  int chip = 1024;
  int stride = 824;
  std::string out;
  std::string plan;
  std::uint64_t seed = 0;
  double center_jitter = 0.0;
  double side_jitter = 0.0;
  double angle_jitter = 0.0;
  double score_decay = 0.5;
};

int RunSimulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  if (a.stride > a.chip) throw UsageError("--stride must not exceed --chip");
  const AnnotationFile file = ReadDotaAnnotationFile(a.gt);
  PrintWarnings(err, a.gt, file.warnings);
  const ClassTable table(Categories(file));
  std::vector<Warning> warnings;
  const std::vector<LabeledBox> gts = ToLabeled(file, table, warnings);
  PrintWarnings(err, a.gt, warnings);

  const TilePlan plan = PlanTiles(a.width, a.height, a.chip, a.stride);
  const JitterSpec jitter{a.center_jitter, a.side_jitter, a.angle_jitter, a.score_decay};
  fs::create_directories(a.out);
  std::size_t total = 0;
  for (std::size_t i = 0; i < plan.windows.size(); ++i) {
    const Window& w = plan.windows[i];
    std::vector<NamedDetection> named;
    for (const Detection& d : SimulateChipDetections(gts, w, jitter, a.seed + i)) {
      named.push_back({table.Name(d.class_id), d.box, d.score});
    }
    total += named.size();
    WriteFileAtomic(fs::path(a.out) / ChipFileName(w), FormatLabeledDetections(named));
  }
  if (!a.plan.empty()) WriteFileAtomic(a.plan, FormatTilePlan(plan));
  out << "simulated " << total << " detections over " << plan.windows.size() << " chips\n";
  return kOk;
}

struct HeadArgs {
  int size = 12;
  int stride = 8;
  HeadConfig config;
  std::size_t top_k = 2000;
  std::optional<double> score_thr;
  double nms = 0.5;
  std::uint64_t seed = 0;
  bool fam = false;
};

int RunHead(const HeadArgs& a, std::ostream& out) {
  if (a.size < 1 || a.stride < 1) throw UsageError("--size and --stride must be positive");
  a.config.Validate();
  const HeadWeights weights = HeadWeights::Random(a.config, a.seed);
  FeatureGrid features(a.size, a.size, a.config.channels, a.stride);
  std::mt19937_64 rng(a.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (double& v : features.values()) v = unit(rng);

  PyramidSpec spec;
  spec.levels = {{"P", a.stride}};
  const GridSize grid{a.size, a.size};
  const std::vector<AnchorMap> anchors = GenerateAnchors(spec, std::span<const GridSize>(&grid, 1));
  HeadOptions options;
  options.keep_fam_classification = a.fam;
  const auto levels =
      HeadForward(std::span<const FeatureGrid>(&features, 1), a.config, weights, anchors, options);
  const HeadLevelOutput& level = levels.front();
  const auto& candidates = a.fam ? level.fam_candidates : level.candidates;
  const double floor = a.score_thr.value_or(a.fam ? kFamScoreThreshold : kOdmScoreThreshold);
  const auto top = SelectTopK(candidates, a.top_k, floor);
  const auto kept = RotatedNms(top, {a.nms, true});
  out << "offsets " << level.offsets.height() << "x" << level.offsets.width() << "x"
      << level.offsets.depth() << '\n'
      << "oriented " << level.oriented.grid().height() << "x" << level.oriented.grid().width()
      << "x" << level.oriented.grid().channels() << '\n'
      << "pooled " << level.pooled.height() << "x" << level.pooled.width() << "x"
      << level.pooled.channels() << '\n'
      << (a.fam ? "fam " : "") << "candidates " << candidates.size() << ", after top-k " << top.size()
      << ", after nms " << kept.size() << '\n';
  return kOk;
}

struct AssignArgs {
  std::string gt;
  int width = 0;
  int height = 0;
  AssignOptions options;
  bool no_rescue = false;
};

int RunAssign(const AssignArgs& a, std::ostream& out, std::ostream& err) {
  if (a.width < 1 || a.height < 1) throw UsageError("--width and --height must be positive");
  const AnnotationFile file = ReadDotaAnnotationFile(a.gt);
  PrintWarnings(err, a.gt, file.warnings);
  const ClassTable table(Categories(file));
  std::vector<Warning> warnings;
  std::vector<OrientedBox> gts;
  for (const LabeledBox& b : ToLabeled(file, table, warnings)) gts.push_back(b.box);
  PrintWarnings(err, a.gt, warnings);

  const PyramidSpec spec = PyramidSpec::Default();
  std::vector<GridSize> sizes;
  for (const PyramidLevel& level : spec.levels) {
    sizes.push_back({(a.height + level.stride - 1) / level.stride,
                     (a.width + level.stride - 1) / level.stride});
  }
  const auto maps = GenerateAnchors(spec, sizes);
  const auto flat = FlattenAnchors(maps);
  AssignOptions options = a.options;
  options.low_quality_rescue = !a.no_rescue;
  const Assignment assignment = Assign(flat, gts, options);
  out << "anchors " << flat.size() << ", positive " << assignment.CountPositive() << ", ignore "
      << assignment.CountIgnore() << ", negative " << assignment.CountNegative() << '\n';
  return kOk;
}

}  // namespace

int Run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Oriented object detection kernels: tiling, merging, NMS, evaluation and offsets.",
               "orientdet"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  TileArgs tile;
  auto* tile_cmd = app.add_subcommand("tile", "Plan overlapping chips over a large image");
  tile_cmd->add_option("--width", tile.width, "Image width in pixels")->required()->check(CLI::PositiveNumber);
  tile_cmd->add_option("--height", tile.height, "Image height in pixels")->required()->check(CLI::PositiveNumber);
  tile_cmd->add_option("--chip", tile.chip, "Chip side in pixels")->check(CLI::PositiveNumber);
  tile_cmd->add_option("--stride", tile.stride, "Distance between chip origins")->check(CLI::PositiveNumber);
  tile_cmd->add_option("--out", tile.out, "Tile plan output file")->required();

  MergeArgs merge;
  auto* merge_cmd = app.add_subcommand("merge", "Map chip detections to the image and suppress duplicates");
  merge_cmd->add_option("--plan", merge.plan, "Tile plan file")->required()->check(CLI::ExistingFile);
  merge_cmd->add_option("--chips", merge.chips, "Directory of <x0>_<y0>.txt chip detection files")
      ->required()
      ->check(CLI::ExistingDirectory);
  merge_cmd->add_option("--nms", merge.nms, "Rotated IoU threshold for duplicate suppression")
      ->check(CLI::Range(0.0, 1.0));
  merge_cmd->add_option("--out", merge.out, "Output directory for Task1_<class>.txt files")->required();
  merge_cmd->add_option("--image-id", merge.image_id, "Image id written on every line");
  merge_cmd->add_option("--classes", merge.classes, "Classes that always get an output file");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Per-class AP and mAP of rotated detections");
  eval_cmd->add_option("--dets", eval.dets, "Directory of Task1_<class>.txt files")->required();
  eval_cmd->add_option("--gt", eval.gt, "Directory of DOTA annotation files, one per image")->required();
  eval_cmd->add_option("--iou", eval.iou, "IoU threshold for a true positive");
  eval_cmd->add_option("--metric", eval.metric, "AP definition")->check(CLI::IsMember({"voc07", "voc12"}));
  eval_cmd->add_flag("--range", eval.range, "Evaluate at IoU 0.50:0.05:0.95 instead of --iou");
  eval_cmd->add_flag("--json", eval.json, "Print JSON instead of a tab-separated table");
  eval_cmd->add_option("--out", eval.out, "Also write the report to this file");

  NmsArgs nms;
  auto* nms_cmd = app.add_subcommand("nms", "Greedy rotated NMS over a labeled detection file");
  nms_cmd->add_option("--in", nms.in, "Detections, one 'category score x1 y1 ... y4' per line")
      ->required()
      ->check(CLI::ExistingFile);
  nms_cmd->add_option("--iou", nms.iou, "Suppress when IoU exceeds this")->check(CLI::Range(0.0, 1.0));
  nms_cmd->add_flag("--class-agnostic", nms.class_agnostic, "Suppress across classes");
  nms_cmd->add_option("--out", nms.out, "Output file (stdout when omitted)");

  OffsetsArgs offsets;
  auto* offsets_cmd = app.add_subcommand("offsets", "Offset field of an anchor map");
  offsets_cmd->add_option("--anchors", offsets.anchors, "Anchor map file")->required()->check(CLI::ExistingFile);
  offsets_cmd->add_option("--k", offsets.k, "Kernel size");
  offsets_cmd->add_option("--stride", offsets.stride, "Feature stride");
  offsets_cmd->add_flag("--dump", offsets.dump, "Print every offset as text");
  offsets_cmd->add_option("--out", offsets.out, "Write the field as a binary grid file");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Write per-chip detections derived from ground truth");
  sim_cmd->add_option("--gt", sim.gt, "DOTA annotation file")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--width", sim.width, "Image width")->required()->check(CLI::PositiveNumber);
  sim_cmd->add_option("--height", sim.height, "Image height")->required()->check(CLI::PositiveNumber);
  sim_cmd->add_option("--chip", sim.chip, "Chip side in pixels")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--stride", sim.stride, "Distance between chip origins")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--out", sim.out, "Output directory for chip files")->required();
  sim_cmd->add_option("--plan", sim.plan, "Also write the tile plan here");
  sim_cmd->add_option("--seed", sim.seed, "Random seed");
  sim_cmd->add_option("--center-jitter", sim.center_jitter, "Max center shift in pixels")->check(CLI::NonNegativeNumber);
  sim_cmd->add_option("--side-jitter", sim.side_jitter, "Max relative side change")->check(CLI::Range(0.0, 0.9));
  sim_cmd->add_option("--angle-jitter", sim.angle_jitter, "Max angle change in radians")->check(CLI::NonNegativeNumber);
  sim_cmd->add_option("--score-decay", sim.score_decay, "Score lost per unit of mean noise")->check(CLI::Range(0.0, 1.0));

  HeadArgs head;
  auto* head_cmd = app.add_subcommand("head", "Run the detection head with random weights on random features");
  head_cmd->add_option("--size", head.size, "Feature grid side");
  head_cmd->add_option("--stride", head.stride, "Feature stride");
  head_cmd->add_option("--channels", head.config.channels, "Feature channels");
  head_cmd->add_option("--orientations", head.config.orientations, "ARF orientation count")
      ->check(CLI::IsMember({1, 2, 4, 8}));
  head_cmd->add_option("--classes", head.config.num_classes, "Number of classes");
  head_cmd->add_option("--top-k", head.top_k, "Candidates kept before NMS");
  head_cmd->add_option("--score-thr", head.score_thr,
                       "Minimum candidate score [default: 0.05, or 0 with --fam]");
  head_cmd->add_flag("--fam", head.fam, "Predict from the FAM classifier and refined anchors");
  head_cmd->add_option("--nms", head.nms, "NMS IoU threshold")->check(CLI::Range(0.0, 1.0));
  head_cmd->add_option("--seed", head.seed, "Random seed for weights and features");

  AssignArgs assign;
  auto* assign_cmd = app.add_subcommand("assign", "Label the default anchor pyramid against an annotation");
  assign_cmd->add_option("--gt", assign.gt, "DOTA annotation file")->required()->check(CLI::ExistingFile);
  assign_cmd->add_option("--width", assign.width, "Image width")->required();
  assign_cmd->add_option("--height", assign.height, "Image height")->required();
  assign_cmd->add_option("--fg", assign.options.fg_threshold, "Foreground IoU threshold");
  assign_cmd->add_option("--bg", assign.options.bg_threshold, "Background IoU threshold");
  assign_cmd->add_flag("--no-rescue", assign.no_rescue, "Disable best-anchor rescue of unmatched ground truth");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  const int threads = ThreadsFromEnv(1);
  try {
    if (*tile_cmd) return RunTile(tile, out);
    if (*merge_cmd) return RunMerge(merge, out, threads);
    if (*eval_cmd) return RunEval(eval, out, err, threads);
    if (*nms_cmd) return RunNms(nms, out);
    if (*offsets_cmd) return RunOffsets(offsets, out, err);
    if (*sim_cmd) return RunSimulate(sim, out, err);
    if (*head_cmd) return RunHead(head, out);
    if (*assign_cmd) return RunAssign(assign, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\nRun with --help for more information.\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace orientdet::cli
