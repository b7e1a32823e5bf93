#include "hoist/data_model.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace hoist {

void VideoClip::validate() const {
  if (t < 1) throw std::invalid_argument("clip " + clip_id + ": T must be >= 1");
  if (h < 16 || w < 16) throw std::invalid_argument("clip " + clip_id + ": H and W must be >= 16");
  if (frames.size() != static_cast<size_t>(t) * h * w * 3)
    throw std::invalid_argument("clip " + clip_id + ": frame buffer size mismatch");
}

bool TrackAnnotation::ever_nonempty() const {
  for (int ti = 0; ti < masks.t; ++ti)
    if (!masks.frame_empty(ti)) return true;
  return false;
}

DatasetSummary Dataset::summary() const {
  DatasetSummary s;
  s.videos = static_cast<int64_t>(clips.size());
  for (const auto& rec : clips) {
    s.frames += rec.clip.t;
    int64_t objs = 0;
    for (const auto& tr : rec.tracks)
      if (tr.kind == TrackKind::object) ++objs;
    s.object_instances += objs;
    if (objs == 0)
      ++s.videos_with_0;
    else if (objs == 1)
      ++s.videos_with_1;
    else if (objs == 2)
      ++s.videos_with_2;
    else
      ++s.videos_with_3plus;
  }
  return s;
}

const ClipRecord* Dataset::find_clip(const std::string& clip_id) const {
  for (const auto& rec : clips)
    if (rec.clip.clip_id == clip_id) return &rec;
  return nullptr;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "train";
}

void write_ppm(const fs::path& path, const uint8_t* rgb, int h, int w) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path.string());
  f << "P6\n" << w << " " << h << "\n255\n";
  f.write(reinterpret_cast<const char*>(rgb), static_cast<std::streamsize>(h) * w * 3);
  if (!f) throw std::runtime_error("short write: " + path.string());
}

void read_ppm(const fs::path& path, std::vector<uint8_t>& rgb, int& h, int& w) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path.string());
  std::string magic;
  f >> magic;
  if (magic != "P6") throw std::runtime_error("not a P6 ppm: " + path.string());
  int maxval = 0;
  f >> w >> h >> maxval;
  if (w <= 0 || h <= 0 || maxval != 255) throw std::runtime_error("bad ppm header: " + path.string());
  f.get();  // single whitespace after header
  rgb.resize(static_cast<size_t>(h) * w * 3);
  f.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!f) throw std::runtime_error("short read: " + path.string());
}

namespace {

std::string frame_name(int ti) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04d.ppm", ti);
  return buf;
}

json mask_to_json(const Mask2D& m) {
  if (m.empty_mask()) return nullptr;
  json counts = json::array();
  for (int c : rle_encode(m).counts) counts.push_back(c);
  return counts;
}

json track_to_json(const TrackAnnotation& tr, int T) {
  json j;
  j["track_id"] = tr.track_id;
  j["kind"] = tr.kind == TrackKind::hand ? "hand" : "object";
  if (tr.kind == TrackKind::object) {
    json held = json::array();
    for (int t = 0; t < T; ++t) held.push_back(tr.held_at(t));
    j["held"] = held;
  }
  json masks = json::array(), boxes = json::array();
  for (int t = 0; t < T; ++t) {
    masks.push_back(mask_to_json(tr.masks.frame(t)));
    if (tr.boxes[static_cast<size_t>(t)]) {
      const Box& b = *tr.boxes[static_cast<size_t>(t)];
      boxes.push_back(json::array({b.x0, b.y0, b.x1, b.y1}));
    } else {
      boxes.push_back(nullptr);
    }
  }
  j["masks"] = masks;
  j["boxes"] = boxes;
  return j;
}

[[noreturn]] void load_fail(const std::string& clip, const std::string& what) {
  throw std::runtime_error("load error in clip '" + clip + "': " + what);
}

TrackAnnotation track_from_json(const json& j, const std::string& clip_id, int T, int H, int W) {
  TrackAnnotation tr;
  if (!j.contains("track_id") || !j["track_id"].is_number_integer())
    load_fail(clip_id, "track missing integer field 'track_id'");
  tr.track_id = j["track_id"].get<int>();
  if (tr.track_id < 0) load_fail(clip_id, "track_id must be non-negative");
  const std::string kind = j.value("kind", "");
  if (kind == "hand")
    tr.kind = TrackKind::hand;
  else if (kind == "object")
    tr.kind = TrackKind::object;
  else
    load_fail(clip_id, "track " + std::to_string(tr.track_id) + ": bad 'kind'");

  if (tr.kind == TrackKind::object) {
    if (!j.contains("held") || !j["held"].is_array() || static_cast<int>(j["held"].size()) != T)
      load_fail(clip_id, "track " + std::to_string(tr.track_id) + ": field 'held' must have T entries");
    for (const auto& b : j["held"]) tr.held.push_back(b.get<bool>() ? 1 : 0);
  }

  if (!j.contains("masks") || static_cast<int>(j["masks"].size()) != T)
    load_fail(clip_id, "track " + std::to_string(tr.track_id) + ": field 'masks' must have T entries");
  if (!j.contains("boxes") || static_cast<int>(j["boxes"].size()) != T)
    load_fail(clip_id, "track " + std::to_string(tr.track_id) + ": field 'boxes' must have T entries");

  tr.masks = StMask(T, H, W);
  for (int t = 0; t < T; ++t) {
    const json& jm = j["masks"][static_cast<size_t>(t)];
    if (jm.is_null()) continue;
    RleMask rle;
    rle.h = H;
    rle.w = W;
    for (const auto& c : jm) rle.counts.push_back(c.get<int>());
    Mask2D m;
    try {
      m = rle_decode(rle);
    } catch (const std::exception& e) {
      load_fail(clip_id, "track " + std::to_string(tr.track_id) + " frame " + std::to_string(t) +
                             ": " + e.what());
    }
    if (m.empty_mask())
      load_fail(clip_id, "track " + std::to_string(tr.track_id) + " frame " + std::to_string(t) +
                             ": empty mask must be encoded as null");
    tr.masks.set_frame(t, m);
  }
  for (int t = 0; t < T; ++t) {
    const json& jb = j["boxes"][static_cast<size_t>(t)];
    if (jb.is_null()) {
      tr.boxes.push_back(std::nullopt);
    } else {
      if (!jb.is_array() || jb.size() != 4)
        load_fail(clip_id, "track " + std::to_string(tr.track_id) + ": box must be [x0,y0,x1,y1]");
      tr.boxes.push_back(Box{jb[0].get<int>(), jb[1].get<int>(), jb[2].get<int>(), jb[3].get<int>()});
    }
  }
  return tr;
}

}  // namespace

void save_clip(const fs::path& dir, const ClipRecord& rec) {
  fs::create_directories(dir);
  const VideoClip& c = rec.clip;
  c.validate();
  json j;
  j["clip_id"] = c.clip_id;
  j["T"] = c.t;
  j["H"] = c.h;
  j["W"] = c.w;
  j["fps"] = c.fps;
  json frames = json::array();
  for (int t = 0; t < c.t; ++t) {
    const std::string name = frame_name(t);
    write_ppm(dir / name, c.frames.data() + static_cast<size_t>(t) * c.h * c.w * 3, c.h, c.w);
    frames.push_back(name);
  }
  j["frames"] = frames;
  json tracks = json::array();
  for (const auto& tr : rec.tracks) tracks.push_back(track_to_json(tr, c.t));
  j["tracks"] = tracks;
  std::ofstream f(dir / "annotations.json");
  if (!f) throw std::runtime_error("cannot write " + (dir / "annotations.json").string());
  f << j.dump(1) << "\n";
}

ClipRecord load_clip(const fs::path& dir, bool with_pixels) {
  const fs::path ann = dir / "annotations.json";
  if (!fs::exists(ann)) throw std::runtime_error("no annotations.json in " + dir.string());
  json j;
  {
    std::ifstream f(ann);
    try {
      f >> j;
    } catch (const std::exception& e) {
      throw std::runtime_error("malformed annotations.json in " + dir.string() + ": " + e.what());
    }
  }
  ClipRecord rec;
  VideoClip& c = rec.clip;
  c.clip_id = j.value("clip_id", "");
  if (c.clip_id.empty()) load_fail(dir.string(), "missing clip_id");
  c.t = j.value("T", 0);
  c.h = j.value("H", 0);
  c.w = j.value("W", 0);
  c.fps = j.value("fps", 6.0);
  if (c.t < 1 || c.h < 16 || c.w < 16) load_fail(c.clip_id, "bad T/H/W");
  if (!j.contains("frames") || static_cast<int>(j["frames"].size()) != c.t)
    load_fail(c.clip_id, "field 'frames' must list T files");

  c.frames.assign(static_cast<size_t>(c.t) * c.h * c.w * 3, 0);
  for (int t = 0; t < c.t; ++t) {
    const fs::path fp = dir / j["frames"][static_cast<size_t>(t)].get<std::string>();
    if (!fs::exists(fp)) load_fail(c.clip_id, "dangling frame reference: " + fp.string());
    if (with_pixels) {
      std::vector<uint8_t> rgb;
      int h = 0, w = 0;
      read_ppm(fp, rgb, h, w);
      if (h != c.h || w != c.w) load_fail(c.clip_id, "frame size mismatch: " + fp.string());
      std::copy(rgb.begin(), rgb.end(), c.frames.begin() + static_cast<size_t>(t) * c.h * c.w * 3);
    }
  }

  std::set<int> seen_ids;
  for (const auto& jt : j["tracks"]) {
    TrackAnnotation tr = track_from_json(jt, c.clip_id, c.t, c.h, c.w);
    if (!seen_ids.insert(tr.track_id).second)
      load_fail(c.clip_id, "duplicate track_id " + std::to_string(tr.track_id));
    rec.tracks.push_back(std::move(tr));
  }
  return rec;
}

Dataset load_dataset(const fs::path& path, bool with_pixels) {
  if (!fs::exists(path)) throw std::runtime_error("no such dataset directory: " + path.string());
  Dataset ds;
  std::vector<fs::path> clip_dirs;
  if (fs::exists(path / "annotations.json")) {
    clip_dirs.push_back(path);
  } else {
    for (const auto& e : fs::directory_iterator(path))
      if (e.is_directory() && fs::exists(e.path() / "annotations.json"))
        clip_dirs.push_back(e.path());
  }
  if (clip_dirs.empty())
    throw std::runtime_error("no annotations.json under " + path.string());
  std::sort(clip_dirs.begin(), clip_dirs.end());
  for (const auto& d : clip_dirs) ds.clips.push_back(load_clip(d, with_pixels));
  return ds;
}

void save_dataset(const fs::path& path, const Dataset& ds) {
  fs::create_directories(path);
  for (const auto& rec : ds.clips) save_clip(path / rec.clip.clip_id, rec);
}

ValidationReport validate_annotations(const Dataset& ds) {
  ValidationReport rep;
  auto issue = [&rep](const std::string& clip, int track, int frame, std::string msg) {
    rep.issues.push_back({clip, track, frame, std::move(msg)});
  };
  for (const auto& rec : ds.clips) {
    const VideoClip& c = rec.clip;
    for (const auto& tr : rec.tracks) {
      if (tr.masks.t != c.t || tr.masks.h != c.h || tr.masks.w != c.w) {
        issue(c.clip_id, tr.track_id, -1, "mask volume shape does not match clip");
        continue;
      }
      if (static_cast<int>(tr.boxes.size()) != c.t) {
        issue(c.clip_id, tr.track_id, -1, "box list length does not match clip");
        continue;
      }
      for (int t = 0; t < c.t; ++t) {
        const Mask2D m = tr.masks.frame(t);
        const bool empty = m.empty_mask();
        const auto& box = tr.boxes[static_cast<size_t>(t)];
        if (empty && box)
          issue(c.clip_id, tr.track_id, t, "empty mask but box present");
        if (!empty && !box)
          issue(c.clip_id, tr.track_id, t, "nonempty mask but box absent");
        if (!empty && box) {
          const Box tight = *tight_bbox(m);
          if (!(tight == *box)) {
            std::ostringstream os;
            os << "box [" << box->x0 << "," << box->y0 << "," << box->x1 << "," << box->y1
               << "] is not the tight bbox [" << tight.x0 << "," << tight.y0 << "," << tight.x1
               << "," << tight.y1 << "]";
            issue(c.clip_id, tr.track_id, t, os.str());
          }
        }
        if (tr.kind == TrackKind::object && !tr.held_at(t) && !empty)
          issue(c.clip_id, tr.track_id, t, "not held but mask nonempty");
      }
    }
  }
  return rep;
}

}  // namespace hoist
