#include "cdsal/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "text.hpp"

namespace cdsal {

using nlohmann::json;
using nlohmann::ordered_json;

void GazeTable::add(GazePoint point) {
  if (point.frame < 0) {
    throw Error(ErrorKind::kValidation, "gaze frame index must be >= 0");
  }
  Key key{point.observer, point.viewing, point.frame};
  if (index_.count(key) != 0) {
    throw Error(ErrorKind::kValidation,
                "duplicate gaze key (observer " + point.observer + ", " +
                    std::string(to_string(point.viewing)) + ", frame " +
                    std::to_string(point.frame) + ")");
  }
  const std::size_t row = rows_.size();
  index_.emplace(std::move(key), row);
  if (static_cast<std::size_t>(point.frame) >= by_frame_.size()) {
    by_frame_.resize(static_cast<std::size_t>(point.frame) + 1);
  }
  by_frame_[static_cast<std::size_t>(point.frame)].push_back(row);
  max_frame_ = std::max(max_frame_, point.frame);
  rows_.push_back(std::move(point));
}

const GazePoint* GazeTable::find(std::string_view observer, Viewing viewing,
                                 int frame) const {
  const auto it = index_.find(Key{std::string(observer), viewing, frame});
  return it == index_.end() ? nullptr : &rows_[it->second];
}

std::vector<Point> GazeTable::points(int frame, Viewing viewing) const {
  std::vector<Point> out;
  if (frame < 0 || static_cast<std::size_t>(frame) >= by_frame_.size()) {
    return out;
  }
  for (std::size_t row : by_frame_[static_cast<std::size_t>(frame)]) {
    const GazePoint& g = rows_[row];
    if (g.viewing == viewing) out.push_back({g.x, g.y});
  }
  return out;
}

bool GazeTable::has_viewing(Viewing viewing) const {
  return std::any_of(rows_.begin(), rows_.end(), [viewing](const GazePoint& g) {
    return g.viewing == viewing;
  });
}

Dims ManifestEntry::map_dims() const {
  return {static_cast<int>(std::lround(geometry.display_w_px * gaze_to_map_scale)),
          static_cast<int>(std::lround(geometry.display_h_px * gaze_to_map_scale))};
}

std::vector<Point> SequenceBundle::map_gaze(int frame, Viewing viewing) const {
  std::vector<Point> pts = gaze.points(frame, viewing);
  const double max_x = std::nextafter(static_cast<double>(map_dims.width), 0.0);
  const double max_y = std::nextafter(static_cast<double>(map_dims.height), 0.0);
  for (Point& p : pts) {
    p.x = std::min(p.x * gaze_to_map_scale, max_x);
    p.y = std::min(p.y * gaze_to_map_scale, max_y);
  }
  return pts;
}

double SequenceBundle::degrees_to_pixels(double degrees) const {
  return degrees_to_map_pixels(geometry, degrees, gaze_to_map_scale);
}

namespace {

void unknown_key(const ParseOptions& options, const std::string& source,
                 std::size_t line, const std::string& key,
                 const std::string& where) {
  const std::string rule = "unknown key '" + key + "' in " + where;
  if (options.mode == ParseMode::kStrict) throw ParseError(source, line, rule);
  if (options.warnings != nullptr) {
    options.warnings->push_back(source + ":" + std::to_string(line) + ": " + rule);
  }
}

void check_keys(const json& object, std::initializer_list<std::string_view> allowed,
                const ParseOptions& options, const std::string& source,
                std::size_t line, const std::string& where) {
  for (const auto& item : object.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      unknown_key(options, source, line, item.key(), where);
    }
  }
}

long long require_int(const json& object, const char* key,
                      const std::string& source, std::size_t line) {
  const auto it = object.find(key);
  if (it == object.end()) {
    throw ParseError(source, line, std::string("missing key '") + key + "'");
  }
  if (!it->is_number_integer()) {
    throw ParseError(source, line, std::string("key '") + key + "' must be an integer");
  }
  return it->get<long long>();
}

int narrow_int(long long value, const char* what, const std::string& source,
               std::size_t line) {
  if (value < std::numeric_limits<int>::min() ||
      value > std::numeric_limits<int>::max()) {
    throw ParseError(source, line, std::string(what) + " out of range");
  }
  return static_cast<int>(value);
}

BlockRecord parse_block(const json& node, const ParseOptions& options,
                        const std::string& source, std::size_t line) {
  if (!node.is_object()) throw ParseError(source, line, "block must be an object");
  check_keys(node, {"mv", "dct", "bits"}, options, source, line, "block");
  BlockRecord block;
  if (const auto mv = node.find("mv"); mv != node.end()) {
    if (!mv->is_array() || mv->size() != 2 || !(*mv)[0].is_number_integer() ||
        !(*mv)[1].is_number_integer()) {
      throw ParseError(source, line, "mv must be [dx, dy] integers");
    }
    block.mv = MotionVector{
        narrow_int((*mv)[0].get<long long>(), "mv dx", source, line),
        narrow_int((*mv)[1].get<long long>(), "mv dy", source, line)};
  }
  const auto dct = node.find("dct");
  if (dct == node.end() || !dct->is_array()) {
    throw ParseError(source, line, "block needs a 'dct' integer array");
  }
  block.dct.reserve(dct->size());
  for (const json& level : *dct) {
    if (!level.is_number_integer()) {
      throw ParseError(source, line, "dct levels must be integers");
    }
    block.dct.push_back(narrow_int(level.get<long long>(), "dct level", source, line));
  }
  block.bits = require_int(node, "bits", source, line);
  return block;
}

FrameFeatures parse_frame(const json& node, const ParseOptions& options,
                          const std::string& source, std::size_t line) {
  if (!node.is_object()) throw ParseError(source, line, "frame record must be an object");
  check_keys(node, {"frame", "type", "block_size", "grid_w", "grid_h", "blocks"},
             options, source, line, "frame record");
  FrameFeatures frame;
  frame.frame = narrow_int(require_int(node, "frame", source, line), "frame", source, line);
  const auto type = node.find("type");
  if (type == node.end() || !type->is_string()) {
    throw ParseError(source, line, "missing string key 'type'");
  }
  const std::string type_text = type->get<std::string>();
  if (type_text == "I") {
    frame.type = FrameType::kI;
  } else if (type_text == "P") {
    frame.type = FrameType::kP;
  } else {
    throw ParseError(source, line, "type must be \"I\" or \"P\"");
  }
  frame.block_size = narrow_int(require_int(node, "block_size", source, line),
                                "block_size", source, line);
  frame.grid_w = narrow_int(require_int(node, "grid_w", source, line), "grid_w", source, line);
  frame.grid_h = narrow_int(require_int(node, "grid_h", source, line), "grid_h", source, line);
  const auto blocks = node.find("blocks");
  if (blocks == node.end() || !blocks->is_array()) {
    throw ParseError(source, line, "missing array key 'blocks'");
  }
  frame.blocks.reserve(blocks->size());
  for (const json& b : *blocks) {
    frame.blocks.push_back(parse_block(b, options, source, line));
  }
  try {
    frame.validate();
  } catch (const Error& e) {
    throw ParseError(source, line, e.what());
  }
  return frame;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::kConfig, "cannot write " + path.string());
  }
  return out;
}

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

}  // namespace

std::vector<FrameFeatures> read_features(std::istream& in,
                                         const std::string& source_name,
                                         const ParseOptions& options) {
  std::vector<FrameFeatures> frames;
  std::vector<std::size_t> lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    json node;
    try {
      node = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(source_name, line_no, std::string("syntax error: ") + e.what());
    }
    frames.push_back(parse_frame(node, options, source_name, line_no));
    lines.push_back(line_no);
  }

  std::vector<std::size_t> order(frames.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return frames[a].frame < frames[b].frame;
  });
  std::vector<FrameFeatures> sorted;
  sorted.reserve(frames.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    if (frames[i].frame != static_cast<int>(k)) {
      throw ParseError(source_name, lines[i],
                       "non-contiguous frames: expected frame " +
                           std::to_string(k) + ", found " +
                           std::to_string(frames[i].frame));
    }
    sorted.push_back(std::move(frames[i]));
  }
  return sorted;
}

std::vector<FrameFeatures> load_features(const std::filesystem::path& path,
                                         const ParseOptions& options) {
  std::ifstream in = open_input(path);
  return read_features(in, path.string(), options);
}

std::string feature_line(const FrameFeatures& frame) {
  ordered_json node;
  node["frame"] = frame.frame;
  node["type"] = std::string(to_string(frame.type));
  node["block_size"] = frame.block_size;
  node["grid_w"] = frame.grid_w;
  node["grid_h"] = frame.grid_h;
  ordered_json blocks = ordered_json::array();
  for (const BlockRecord& b : frame.blocks) {
    ordered_json block;
    if (b.mv) block["mv"] = {b.mv->dx, b.mv->dy};
    block["dct"] = b.dct;
    block["bits"] = b.bits;
    blocks.push_back(std::move(block));
  }
  node["blocks"] = std::move(blocks);
  return node.dump();
}

void write_features(std::ostream& out, const std::vector<FrameFeatures>& frames) {
  for (const FrameFeatures& f : frames) out << feature_line(f) << '\n';
}

void write_features(const std::filesystem::path& path,
                    const std::vector<FrameFeatures>& frames) {
  std::ofstream out = open_output(path);
  write_features(out, frames);
}

GazeTable read_gaze(std::istream& in, const std::string& source_name,
                    const ViewingGeometry& geom, const ParseOptions& options) {
  geom.validate();
  static constexpr std::string_view kColumns[] = {"sequence", "frame", "observer",
                                                  "viewing", "x", "y"};
  std::string line;
  std::size_t line_no = 0;
  std::size_t column[6] = {0, 1, 2, 3, 4, 5};
  std::size_t field_count = 6;
  bool have_header = false;
  std::optional<std::string> sequence;
  GazeTable table;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = text::strip_cr(line);
    if (is_blank(row)) continue;
    const auto fields = text::split(row, ',');
    if (!have_header) {
      have_header = true;
      if (row == kGazeHeader) continue;
      if (options.mode == ParseMode::kStrict) {
        throw ParseError(source_name, line_no,
                         "header must be '" + std::string(kGazeHeader) + "'");
      }
      for (std::size_t c = 0; c < 6; ++c) {
        const auto it = std::find(fields.begin(), fields.end(), kColumns[c]);
        if (it == fields.end()) {
          throw ParseError(source_name, line_no,
                           "missing column '" + std::string(kColumns[c]) + "'");
        }
        column[c] = static_cast<std::size_t>(it - fields.begin());
      }
      for (std::string_view name : fields) {
        if (std::find(std::begin(kColumns), std::end(kColumns), name) ==
                std::end(kColumns) && options.warnings != nullptr) {
          options.warnings->push_back(source_name + ":" + std::to_string(line_no) +
                                      ": ignoring column '" + std::string(name) + "'");
        }
      }
      field_count = fields.size();
      continue;
    }
    if (fields.size() != field_count) {
      throw ParseError(source_name, line_no,
                       "expected " + std::to_string(field_count) + " fields, found " +
                           std::to_string(fields.size()));
    }
    const std::string_view seq = fields[column[0]];
    if (seq.empty()) throw ParseError(source_name, line_no, "empty sequence id");
    if (!sequence) {
      sequence = std::string(seq);
      table = GazeTable(*sequence);
    } else if (seq != *sequence) {
      throw ParseError(source_name, line_no,
                       "mixed sequence ids in one gaze file ('" + *sequence +
                           "' and '" + std::string(seq) + "')");
    }
    const auto frame = text::parse_int(fields[column[1]]);
    if (!frame || *frame < 0 || *frame > std::numeric_limits<int>::max()) {
      throw ParseError(source_name, line_no, "frame must be a nonnegative integer");
    }
    const std::string_view observer = fields[column[2]];
    if (observer.empty()) throw ParseError(source_name, line_no, "empty observer id");
    const auto viewing = parse_viewing(fields[column[3]]);
    if (!viewing) {
      throw ParseError(source_name, line_no,
                       "unknown viewing label '" + std::string(fields[column[3]]) +
                           "' (expected primary or counterpart)");
    }
    const auto x = text::parse_double(fields[column[4]]);
    const auto y = text::parse_double(fields[column[5]]);
    if (!x || !y) throw ParseError(source_name, line_no, "x and y must be real numbers");
    if (*x < 0.0 || *x >= geom.display_w_px || *y < 0.0 || *y >= geom.display_h_px) {
      throw ParseError(source_name, line_no,
                       "gaze coordinate outside the display [0, w) x [0, h)");
    }
    try {
      table.add(GazePoint{*x, *y, static_cast<int>(*frame), std::string(observer),
                          *viewing});
    } catch (const Error& e) {
      throw ParseError(source_name, line_no, e.what());
    }
  }
  if (!have_header) throw ParseError(source_name, 0, "empty gaze file (no header)");
  return table;
}

GazeTable load_gaze(const std::filesystem::path& path, const ViewingGeometry& geom,
                    const ParseOptions& options) {
  std::ifstream in = open_input(path);
  return read_gaze(in, path.string(), geom, options);
}

void write_gaze(std::ostream& out, const GazeTable& table) {
  out << kGazeHeader << '\n';
  for (const GazePoint& g : table.rows()) {
    out << table.sequence_id() << ',' << g.frame << ',' << g.observer << ','
        << to_string(g.viewing) << ',' << text::format_double(g.x) << ','
        << text::format_double(g.y) << '\n';
  }
}

void write_gaze(const std::filesystem::path& path, const GazeTable& table) {
  std::ofstream out = open_output(path);
  write_gaze(out, table);
}

namespace {

double require_positive(const json& object, const char* key,
                        const std::string& source) {
  const auto it = object.find(key);
  if (it == object.end() || !it->is_number()) {
    throw ParseError(source, 0, std::string("geometry needs numeric '") + key + "'");
  }
  return it->get<double>();
}

std::string require_string(const json& object, const char* key,
                           const std::string& source) {
  const auto it = object.find(key);
  if (it == object.end() || !it->is_string() || it->get<std::string>().empty()) {
    throw ParseError(source, 0, std::string("sequence needs string '") + key + "'");
  }
  return it->get<std::string>();
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path,
                       const ParseOptions& options) {
  const std::string source = path.string();
  std::ifstream in = open_input(path);
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(source, 0, std::string("syntax error: ") + e.what());
  }
  if (!root.is_object()) throw ParseError(source, 0, "manifest must be an object");
  check_keys(root, {"sequences", "models"}, options, source, 0, "manifest");
  const auto seqs = root.find("sequences");
  if (seqs == root.end() || !seqs->is_array()) {
    throw ParseError(source, 0, "manifest needs a 'sequences' array");
  }
  Manifest manifest;
  if (const auto models = root.find("models"); models != root.end()) {
    if (!models->is_object()) throw ParseError(source, 0, "'models' must be an object");
    manifest.model_config = *models;
  }
  const std::filesystem::path base = path.parent_path();
  std::set<std::string> ids;
  for (const json& s : *seqs) {
    if (!s.is_object()) throw ParseError(source, 0, "sequence entry must be an object");
    check_keys(s, {"id", "features", "gaze", "geometry", "gaze_to_map_scale", "frame_count"},
               options, source, 0, "sequence entry");
    ManifestEntry entry;
    entry.id = require_string(s, "id", source);
    if (!ids.insert(entry.id).second) {
      throw ParseError(source, 0, "duplicate sequence id '" + entry.id + "'");
    }
    entry.features = base / require_string(s, "features", source);
    entry.gaze = base / require_string(s, "gaze", source);
    const auto geom = s.find("geometry");
    if (geom == s.end() || !geom->is_object()) {
      throw ParseError(source, 0, "sequence '" + entry.id + "' needs a geometry block");
    }
    check_keys(*geom, {"screen_w_px", "screen_h_px", "screen_diagonal_in",
                       "viewing_distance_cm", "display_w_px", "display_h_px"},
               options, source, 0, "geometry");
    entry.geometry.screen_w_px = require_positive(*geom, "screen_w_px", source);
    entry.geometry.screen_h_px = require_positive(*geom, "screen_h_px", source);
    entry.geometry.screen_diagonal_in = require_positive(*geom, "screen_diagonal_in", source);
    entry.geometry.viewing_distance_cm = require_positive(*geom, "viewing_distance_cm", source);
    entry.geometry.display_w_px = require_positive(*geom, "display_w_px", source);
    entry.geometry.display_h_px = require_positive(*geom, "display_h_px", source);
    try {
      entry.geometry.validate();
    } catch (const Error& e) {
      throw ParseError(source, 0, "sequence '" + entry.id + "': " + e.what());
    }
    const auto scale = s.find("gaze_to_map_scale");
    if (scale == s.end() || !scale->is_number() || !(scale->get<double>() > 0.0)) {
      throw ParseError(source, 0,
                       "sequence '" + entry.id + "' needs a positive gaze_to_map_scale");
    }
    entry.gaze_to_map_scale = scale->get<double>();
    const Dims dims = entry.map_dims();
    if (dims.width < 1 || dims.height < 1) {
      throw ParseError(source, 0, "sequence '" + entry.id + "' maps to an empty frame");
    }
    if (const auto fc = s.find("frame_count"); fc != s.end()) {
      if (!fc->is_number_integer() || fc->get<long long>() < 0) {
        throw ParseError(source, 0, "frame_count must be a nonnegative integer");
      }
      entry.frame_count = fc->get<std::size_t>();
    }
    manifest.sequences.push_back(std::move(entry));
  }
  return manifest;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  const std::filesystem::path base = path.parent_path();
  ordered_json root;
  ordered_json seqs = ordered_json::array();
  const auto relative = [&base](const std::filesystem::path& p) {
    std::error_code ec;
    const auto rel = std::filesystem::relative(p, base.empty() ? "." : base, ec);
    return (ec || rel.empty()) ? p.generic_string() : rel.generic_string();
  };
  for (const ManifestEntry& e : manifest.sequences) {
    ordered_json s;
    s["id"] = e.id;
    s["features"] = relative(e.features);
    s["gaze"] = relative(e.gaze);
    s["geometry"] = {{"screen_w_px", e.geometry.screen_w_px},
                     {"screen_h_px", e.geometry.screen_h_px},
                     {"screen_diagonal_in", e.geometry.screen_diagonal_in},
                     {"viewing_distance_cm", e.geometry.viewing_distance_cm},
                     {"display_w_px", e.geometry.display_w_px},
                     {"display_h_px", e.geometry.display_h_px}};
    s["gaze_to_map_scale"] = e.gaze_to_map_scale;
    if (e.frame_count) s["frame_count"] = *e.frame_count;
    seqs.push_back(std::move(s));
  }
  root["sequences"] = std::move(seqs);
  if (!manifest.model_config.empty()) root["models"] = manifest.model_config;
  std::ofstream out = open_output(path);
  out << root.dump(2) << '\n';
}

SequenceBundle load_bundle(const ManifestEntry& entry, const ParseOptions& options) {
  for (const auto& p : {entry.features, entry.gaze}) {
    if (!std::filesystem::is_regular_file(p)) {
      throw ParseError(p.string(), 0,
                       "dangling file reference from sequence '" + entry.id + "'");
    }
  }
  SequenceBundle bundle;
  bundle.sequence_id = entry.id;
  bundle.geometry = entry.geometry;
  bundle.gaze_to_map_scale = entry.gaze_to_map_scale;
  bundle.map_dims = entry.map_dims();
  bundle.frames = load_features(entry.features, options);
  bundle.gaze = load_gaze(entry.gaze, entry.geometry, options);

  const std::string feature_source = entry.features.string();
  for (const FrameFeatures& f : bundle.frames) {
    if (!f.covers(bundle.map_dims)) {
      throw ParseError(feature_source, 0,
                       "frame " + std::to_string(f.frame) + ": block grid " +
                           std::to_string(f.grid_w) + "x" + std::to_string(f.grid_h) +
                           " does not cover the " + std::to_string(bundle.map_dims.width) +
                           "x" + std::to_string(bundle.map_dims.height) + " map");
    }
  }
  if (!bundle.gaze.empty() && bundle.gaze.sequence_id() != entry.id) {
    throw ParseError(entry.gaze.string(), 0,
                     "gaze rows belong to sequence '" + bundle.gaze.sequence_id() +
                         "', manifest expects '" + entry.id + "'");
  }
  if (entry.frame_count && *entry.frame_count != bundle.frame_count()) {
    throw ParseError(feature_source, 0,
                     "frame-count mismatch for '" + entry.id + "': manifest says " +
                         std::to_string(*entry.frame_count) + ", features have " +
                         std::to_string(bundle.frame_count()));
  }
  if (bundle.gaze.max_frame() >= static_cast<int>(bundle.frame_count())) {
    throw ParseError(entry.gaze.string(), 0,
                     "gaze references frame " + std::to_string(bundle.gaze.max_frame()) +
                         " of a " + std::to_string(bundle.frame_count()) +
                         "-frame sequence");
  }
  return bundle;
}

std::vector<SequenceBundle> load_bundles(const std::filesystem::path& manifest_path,
                                         const ParseOptions& options) {
  const Manifest manifest = load_manifest(manifest_path, options);
  std::vector<SequenceBundle> bundles;
  bundles.reserve(manifest.sequences.size());
  for (const ManifestEntry& entry : manifest.sequences) {
    bundles.push_back(load_bundle(entry, options));
  }
  return bundles;
}

}  // namespace cdsal
