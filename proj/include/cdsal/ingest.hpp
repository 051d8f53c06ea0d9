#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "cdsal/core.hpp"
#include "json.hpp"

namespace cdsal {

enum class ParseMode { kStrict, kLenient };

struct ParseOptions {
  ParseMode mode = ParseMode::kStrict;
  // Lenient-mode diagnostics (unknown keys, extra columns) are appended here
  // when non-null.
  std::vector<std::string>* warnings = nullptr;
};

// Gaze rows of one sequence, unique per (observer, viewing, frame).
class GazeTable {
 public:
  GazeTable() = default;
  explicit GazeTable(std::string sequence_id)
      : sequence_id_(std::move(sequence_id)) {}

  // Throws kValidation on a duplicate key or negative frame.
  void add(GazePoint point);

  const std::string& sequence_id() const { return sequence_id_; }
  const std::vector<GazePoint>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }

  const GazePoint* find(std::string_view observer, Viewing viewing,
                        int frame) const;

  // Gaze locations (display pixels) of one frame/viewing, in row order.
  std::vector<Point> points(int frame, Viewing viewing) const;

  bool has_viewing(Viewing viewing) const;
  int max_frame() const { return max_frame_; }

 private:
  using Key = std::tuple<std::string, Viewing, int>;

  std::string sequence_id_;
  std::vector<GazePoint> rows_;
  std::map<Key, std::size_t> index_;
  std::vector<std::vector<std::size_t>> by_frame_;
  int max_frame_ = -1;
};

struct ManifestEntry {
  std::string id;
  std::filesystem::path features;  // resolved against the manifest directory
  std::filesystem::path gaze;
  ViewingGeometry geometry;
  double gaze_to_map_scale = 1.0;
  std::optional<std::size_t> frame_count;  // cross-checked when present

  // Saliency-map resolution: display size times gaze_to_map_scale.
  Dims map_dims() const;
};

struct Manifest {
  std::vector<ManifestEntry> sequences;
  nlohmann::json model_config = nlohmann::json::object();
};

struct SequenceBundle {
  std::string sequence_id;
  ViewingGeometry geometry;
  double gaze_to_map_scale = 1.0;
  Dims map_dims;
  std::vector<FrameFeatures> frames;
  GazeTable gaze;

  std::size_t frame_count() const { return frames.size(); }
  // Gaze of one frame/viewing scaled into map pixels.
  std::vector<Point> map_gaze(int frame, Viewing viewing) const;
  // Degrees of visual angle in map pixels for this sequence.
  double degrees_to_pixels(double degrees) const;
};

// --- feature stream (.featjsonl) ---------------------------------------------

std::vector<FrameFeatures> read_features(std::istream& in,
                                         const std::string& source_name,
                                         const ParseOptions& options = {});
std::vector<FrameFeatures> load_features(const std::filesystem::path& path,
                                         const ParseOptions& options = {});
// Canonical form: one compact JSON object per line, fixed key order.
std::string feature_line(const FrameFeatures& frame);
void write_features(std::ostream& out, const std::vector<FrameFeatures>& frames);
void write_features(const std::filesystem::path& path,
                    const std::vector<FrameFeatures>& frames);

// --- gaze table (.csv) -------------------------------------------------------

inline constexpr std::string_view kGazeHeader =
    "sequence,frame,observer,viewing,x,y";

GazeTable read_gaze(std::istream& in, const std::string& source_name,
                    const ViewingGeometry& geom,
                    const ParseOptions& options = {});
GazeTable load_gaze(const std::filesystem::path& path,
                    const ViewingGeometry& geom,
                    const ParseOptions& options = {});
void write_gaze(std::ostream& out, const GazeTable& table);
void write_gaze(const std::filesystem::path& path, const GazeTable& table);

// --- manifest (.json) --------------------------------------------------------

Manifest load_manifest(const std::filesystem::path& path,
                       const ParseOptions& options = {});
// Paths are written relative to the manifest's directory when possible.
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

SequenceBundle load_bundle(const ManifestEntry& entry,
                           const ParseOptions& options = {});
std::vector<SequenceBundle> load_bundles(const std::filesystem::path& manifest,
                                         const ParseOptions& options = {});

}  // namespace cdsal
