#pragma once

#include "owcnf/image.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace owcnf::io {

// Container layout (all integers little-endian):
//   "OWCF" | version u32 | record count u32 |
//   per record: name length u16 | name bytes (UTF-8) | dtype u8 | ndim u8 |
//               dims u32 x ndim | payload (prod(dims) x float32 LE)
inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr std::uint8_t kDtypeFloat32 = 1;

struct TensorRecord {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> data;

    std::size_t element_count() const;
};

class ContainerError : public std::runtime_error {
public:
    enum class Kind { io, bad_magic, bad_version, truncated, duplicate_name, bad_record };

    ContainerError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

void write_container(const std::filesystem::path& path, std::span<const TensorRecord> records);
std::vector<TensorRecord> read_container(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_container(std::span<const TensorRecord> records);
std::vector<TensorRecord> decode_container(std::span<const std::uint8_t> bytes);

const TensorRecord& find_record(const std::vector<TensorRecord>& records, const std::string& name);
const TensorRecord* try_find_record(const std::vector<TensorRecord>& records, const std::string& name);

TensorRecord image_record(const std::string& name, const Image& img);
Image record_to_image(const TensorRecord& rec);
TensorRecord sinogram_record(const std::string& name, const Sinogram& sino);
Sinogram record_to_sinogram(const TensorRecord& rec);

void write_image(const std::filesystem::path& path, const Image& img);
Image read_image(const std::filesystem::path& path);
void write_sinogram(const std::filesystem::path& path, const Sinogram& sino);
Sinogram read_sinogram(const std::filesystem::path& path);

/// 16-bit binary PGM (P5). Values map linearly from [lo, hi] to [0, 65535]
/// with clamping.
void export_pgm(const Image& img, const std::filesystem::path& path, double lo, double hi);

/// UTF-8 `key = value` text with `[section]` headers. `#` and `;` start
/// comments. Keys are addressed as "section.key".
class Config {
public:
    static Config parse(const std::string& text, const std::string& origin = "<string>");
    static Config load(const std::filesystem::path& path);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& fallback) const;

    void set(const std::string& key, const std::string& value);
    /// Applies "section.key=value".
    void apply_override(const std::string& assignment);
    /// Copies every key of `other` into this config.
    void merge(const Config& other);

    std::string to_string() const;
    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
    std::string origin_;
};

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Shortest round-trippable decimal representation.
std::string format_double(double v);

} // namespace owcnf::io
