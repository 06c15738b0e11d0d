#include "hbm/dataset_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <unordered_map>

#include "hbm/errors.hpp"

namespace hbm {

namespace fs = std::filesystem;
using nlohmann::json;

void ByteReader::need(std::size_t n, const char* what) const {
  if (bytes_.size() - pos_ < n) {
    throw ParseError(source_ + ": truncated while reading " + what + " (" +
                         std::to_string(n) + " bytes needed, " +
                         std::to_string(bytes_.size() - pos_) + " left)",
                     pos_);
  }
}

std::uint32_t ByteReader::u32(const char* what) {
  need(4, what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
  }
  pos_ += 4;
  return v;
}

float ByteReader::f32(const char* what) {
  return std::bit_cast<float>(u32(what));
}

double ByteReader::f64(const char* what) {
  need(8, what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
  }
  pos_ += 8;
  return std::bit_cast<double>(v);
}

std::string ByteReader::bytes(std::size_t n, const char* what) {
  need(n, what);
  std::string s(bytes_.begin() + static_cast<long>(pos_),
                bytes_.begin() + static_cast<long>(pos_ + n));
  pos_ += n;
  return s;
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::f64(double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    buf_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
}

void ByteWriter::bytes(const std::string& s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text(const fs::path& path) {
  auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

void write_file(const fs::path& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, text.data(), text.size());
}

std::vector<std::uint8_t> encode_features(const FeatureStream& stream) {
  const std::size_t T = stream.audio.dim(0);
  if (stream.visual.dim(0) != T) {
    throw ShapeError("encode_features: audio " +
                     shape_str(stream.audio.shape()) + " and visual " +
                     shape_str(stream.visual.shape()) +
                     " disagree on frame count");
  }
  ByteWriter w;
  w.bytes("HBML");
  w.u32(kFeatureFormatVersion);
  w.u32(static_cast<std::uint32_t>(T));
  w.u32(static_cast<std::uint32_t>(stream.audio.dim(1)));
  w.u32(static_cast<std::uint32_t>(stream.visual.dim(1)));
  for (double v : stream.audio.data()) w.f32(static_cast<float>(v));
  for (double v : stream.visual.data()) w.f32(static_cast<float>(v));
  return std::move(w.buffer());
}

FeatureStream decode_features(const std::vector<std::uint8_t>& bytes,
                              const std::string& source) {
  ByteReader r(bytes, source);
  if (r.bytes(4, "magic") != "HBML") {
    throw ParseError(source + ": bad magic, expected \"HBML\"", 0);
  }
  const auto version = r.u32("version");
  if (version != kFeatureFormatVersion) {
    throw VersionError(source + ": feature format version " +
                       std::to_string(version) + " is not supported (expected " +
                       std::to_string(kFeatureFormatVersion) + ")");
  }
  const std::size_t T = r.u32("T");
  const std::size_t da = r.u32("D_a");
  const std::size_t dv = r.u32("D_v");
  auto read_block = [&](std::size_t dim, const char* what) {
    std::vector<double> v(T * dim);
    for (auto& x : v) x = r.f32(what);
    return Tensor::from_data({T, dim}, std::move(v));
  };
  FeatureStream fs;
  fs.audio = read_block(da, "audio values");
  fs.visual = read_block(dv, "visual values");
  if (!r.at_end()) {
    throw ParseError(source + ": trailing bytes after visual values",
                     r.offset());
  }
  return fs;
}

namespace {

json segments_json(const std::vector<Segment>& segs) {
  json arr = json::array();
  for (const auto& s : segs) arr.push_back({s.start, s.end});
  return arr;
}

json annotation_json(const StreamAnnotation& a) {
  return {{"id", a.id},
          {"num_frames", a.num_frames},
          {"audio_fake", segments_json(a.audio_fake)},
          {"visual_fake", segments_json(a.visual_fake)}};
}

json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source + ": " + e.what(), e.byte);
  }
}

std::vector<Segment> segments_from(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw ParseError(where + ": expected an array");
  std::vector<Segment> out;
  for (const auto& item : arr) {
    if (!item.is_array() || item.size() != 2 || !item[0].is_number_unsigned() ||
        !item[1].is_number_unsigned()) {
      throw ParseError(where + ": each segment must be [start, end] with "
                               "non-negative integers");
    }
    out.push_back({item[0].get<std::size_t>(), item[1].get<std::size_t>()});
  }
  return out;
}

StreamAnnotation annotation_from(const json& obj, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  for (const char* key : {"id", "num_frames", "audio_fake", "visual_fake"}) {
    if (!obj.contains(key)) {
      throw ParseError(where + ": missing key '" + key + "'");
    }
  }
  if (!obj["id"].is_string() || !obj["num_frames"].is_number_unsigned()) {
    throw ParseError(where + ": 'id' must be a string and 'num_frames' a "
                             "non-negative integer");
  }
  StreamAnnotation a;
  a.id = obj["id"].get<std::string>();
  a.num_frames = obj["num_frames"].get<std::size_t>();
  a.audio_fake = segments_from(obj["audio_fake"], where + ".audio_fake");
  a.visual_fake = segments_from(obj["visual_fake"], where + ".visual_fake");
  try {
    a.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(where + ": " + e.what());
  }
  return a;
}

}  // namespace

std::string annotations_to_json(const std::vector<StreamAnnotation>& anns) {
  json arr = json::array();
  for (const auto& a : anns) arr.push_back(annotation_json(a));
  return arr.dump(1) + "\n";
}

std::vector<StreamAnnotation> annotations_from_json(const std::string& text,
                                                    const std::string& source) {
  const json doc = parse_json(text, source);
  if (!doc.is_array()) throw ParseError(source + ": expected a JSON array");
  std::vector<StreamAnnotation> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    out.push_back(annotation_from(doc[i], source + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::vector<StreamAnnotation> load_annotations(const fs::path& path) {
  return annotations_from_json(read_text(path), path.string());
}

void save_dataset(const fs::path& dir, const std::vector<Clip>& clips) {
  fs::create_directories(dir / "features");
  json manifest = {{"format", "hbm-dataset"},
                   {"version", kManifestVersion},
                   {"clips", json::array()}};
  std::vector<StreamAnnotation> anns;
  for (const auto& clip : clips) {
    const std::string rel = "features/" + clip.annotation.id + ".hbml";
    const auto bytes = encode_features(clip.features);
    write_file(dir / rel, bytes.data(), bytes.size());
    manifest["clips"].push_back(
        {{"id", clip.annotation.id}, {"features", rel}, {"split", clip.split}});
    anns.push_back(clip.annotation);
  }
  write_text(dir / "manifest.json", manifest.dump(1) + "\n");
  write_text(dir / "annotations.json", annotations_to_json(anns));
}

std::vector<Clip> load_dataset(const fs::path& dir) {
  const auto manifest_path = (dir / "manifest.json").string();
  const json manifest = parse_json(read_text(dir / "manifest.json"), manifest_path);
  if (!manifest.is_object() || !manifest.contains("version") ||
      !manifest.contains("clips") || !manifest["clips"].is_array()) {
    throw ParseError(manifest_path + ": expected {\"version\", \"clips\": [...]}");
  }
  if (manifest["version"] != kManifestVersion) {
    throw VersionError(manifest_path + ": manifest version " +
                       manifest["version"].dump() + " is not supported");
  }
  const auto anns = load_annotations(dir / "annotations.json");
  std::unordered_map<std::string, const StreamAnnotation*> by_id;
  for (const auto& a : anns) by_id[a.id] = &a;

  std::vector<Clip> clips;
  for (std::size_t i = 0; i < manifest["clips"].size(); ++i) {
    const auto& entry = manifest["clips"][i];
    const std::string where = manifest_path + ": clips[" + std::to_string(i) + "]";
    if (!entry.is_object() || !entry.contains("id") || !entry.contains("features") ||
        !entry["id"].is_string() || !entry["features"].is_string()) {
      throw ParseError(where + ": expected {\"id\": str, \"features\": str}");
    }
    const auto id = entry["id"].get<std::string>();
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw ParseError(where + ": no annotation for clip '" + id + "'");
    }
    const auto rel = entry["features"].get<std::string>();
    Clip clip;
    clip.features = decode_features(read_file(dir / rel), (dir / rel).string());
    clip.annotation = *it->second;
    clip.split = entry.value("split", std::string("train"));
    if (clip.features.frames() != clip.annotation.num_frames) {
      throw ParseError(where + ": feature file has " +
                       std::to_string(clip.features.frames()) +
                       " frames but the annotation says " +
                       std::to_string(clip.annotation.num_frames));
    }
    clips.push_back(std::move(clip));
  }
  return clips;
}

}  // namespace hbm
