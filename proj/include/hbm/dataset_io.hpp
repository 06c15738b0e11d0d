#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hbm/synth.hpp"

namespace hbm {

inline constexpr std::uint32_t kFeatureFormatVersion = 1;
inline constexpr std::uint32_t kManifestVersion = 1;

// Feature file, little-endian: "HBML", u32 version, u32 T, u32 D_a, u32 D_v,
// T*D_a f32 audio values, T*D_v f32 visual values.
std::vector<std::uint8_t> encode_features(const FeatureStream& stream);
FeatureStream decode_features(const std::vector<std::uint8_t>& bytes,
                              const std::string& source = "<memory>");

// Dataset directory layout:
//   manifest.json      {"version", "clips": [{"id", "features", "split"}]}
//   annotations.json   [{"id", "num_frames", "audio_fake", "visual_fake"}]
//   features/<id>.hbml
void save_dataset(const std::filesystem::path& dir,
                  const std::vector<Clip>& clips);
std::vector<Clip> load_dataset(const std::filesystem::path& dir);

std::string annotations_to_json(const std::vector<StreamAnnotation>& anns);
std::vector<StreamAnnotation> annotations_from_json(const std::string& text,
                                                    const std::string& source);
std::vector<StreamAnnotation> load_annotations(
    const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const void* data,
                std::size_t size);
void write_text(const std::filesystem::path& path, const std::string& text);

// Little-endian cursor over a byte buffer; every read reports the byte
// offset on truncation.
class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}

  std::uint32_t u32(const char* what);
  float f32(const char* what);
  double f64(const char* what);
  std::string bytes(std::size_t n, const char* what);
  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }
  const std::string& source() const { return source_; }

 private:
  void need(std::size_t n, const char* what) const;
  const std::vector<std::uint8_t>& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

class ByteWriter {
 public:
  void u32(std::uint32_t v);
  void f32(float v);
  void f64(double v);
  void bytes(const std::string& s);
  std::vector<std::uint8_t>& buffer() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

}  // namespace hbm
