#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hoist/mask.hpp"

namespace hoist {

// A short video: T frames of H x W RGB bytes, the unit of inference.
struct VideoClip {
  std::string clip_id;
  int t = 0, h = 0, w = 0;
  std::vector<uint8_t> frames;  // t*h*w*3, row-major, RGB
  double fps = 6.0;

  uint8_t& px(int ti, int y, int x, int c) {
    return frames[((static_cast<size_t>(ti) * h + y) * w + x) * 3 + c];
  }
  uint8_t px(int ti, int y, int x, int c) const {
    return frames[((static_cast<size_t>(ti) * h + y) * w + x) * 3 + c];
  }
  void validate() const;  // throws on invariant violation
};

enum class TrackKind { hand, object };

// One hand or object instance over a whole clip. Frames where the instance
// has no segment carry an empty mask and no box; objects additionally carry
// per-frame held flags, and a not-held frame is always empty.
struct TrackAnnotation {
  int track_id = -1;
  TrackKind kind = TrackKind::object;
  StMask masks;
  std::vector<std::optional<Box>> boxes;  // per frame
  std::vector<uint8_t> held;              // per frame; objects only

  bool held_at(int t) const { return !held.empty() && held[static_cast<size_t>(t)] != 0; }
  bool ever_nonempty() const;
};

struct ClipRecord {
  VideoClip clip;
  std::vector<TrackAnnotation> tracks;
};

enum class Split { train, valid, test };

struct DatasetSummary {
  int64_t videos = 0;
  int64_t frames = 0;
  int64_t object_instances = 0;
  // Table-style histogram rows: clips with 0 / 1 / 2 / >=3 object tracks.
  int64_t videos_with_0 = 0, videos_with_1 = 0, videos_with_2 = 0, videos_with_3plus = 0;
};

struct Dataset {
  std::vector<ClipRecord> clips;
  Split split = Split::train;

  DatasetSummary summary() const;
  const ClipRecord* find_clip(const std::string& clip_id) const;
};

struct ValidationIssue {
  std::string clip_id;
  int track_id = -1;
  int frame = -1;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool clean() const { return issues.empty(); }
};

// Lossless binary PPM (P6) frame files.
void write_ppm(const std::filesystem::path& path, const uint8_t* rgb, int h, int w);
void read_ppm(const std::filesystem::path& path, std::vector<uint8_t>& rgb, int& h, int& w);

// One clip directory: frame images plus annotations.json.
void save_clip(const std::filesystem::path& dir, const ClipRecord& rec);
ClipRecord load_clip(const std::filesystem::path& dir, bool with_pixels = true);

// Directory of clip subdirectories. with_pixels=false checks that the frame
// files exist but skips decoding them (enough for evaluation).
Dataset load_dataset(const std::filesystem::path& path, bool with_pixels = true);
void save_dataset(const std::filesystem::path& path, const Dataset& ds);

ValidationReport validate_annotations(const Dataset& ds);

const char* split_name(Split s);

}  // namespace hoist
