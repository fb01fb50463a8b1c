#include "owcnf/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

namespace owcnf::io {

namespace {

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) {
        out.push_back(static_cast<std::uint8_t>((v >> s) & 0xff));
    }
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) {
            throw ContainerError(ContainerError::Kind::truncated,
                                 std::string("container truncated while reading ") + what);
        }
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return bytes_[pos_++];
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        const std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        }
        pos_ += 4;
        return v;
    }
    std::string str(std::size_t n, const char* what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(s);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

double parse_double(const std::string& key, const std::string& s) {
    double v = 0.0;
    const auto t = trim(s);
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        throw std::invalid_argument("config: '" + key + "' is not a number: '" + s + "'");
    }
    return v;
}

} // namespace

std::size_t TensorRecord::element_count() const {
    std::size_t n = 1;
    for (auto d : dims) {
        n *= d;
    }
    return n;
}

std::vector<std::uint8_t> encode_container(std::span<const TensorRecord> records) {
    std::set<std::string> names;
    std::vector<std::uint8_t> out = {'O', 'W', 'C', 'F'};
    put_u32(out, kContainerVersion);
    put_u32(out, static_cast<std::uint32_t>(records.size()));
    for (const auto& r : records) {
        if (!names.insert(r.name).second) {
            throw ContainerError(ContainerError::Kind::duplicate_name, "duplicate record name '" + r.name + "'");
        }
        if (r.name.size() > 0xffff || r.dims.size() > 0xff) {
            throw ContainerError(ContainerError::Kind::bad_record, "record '" + r.name + "' name or rank too large");
        }
        if (r.element_count() != r.data.size()) {
            throw ContainerError(ContainerError::Kind::bad_record,
                                 "record '" + r.name + "' dims do not match payload length");
        }
        put_u16(out, static_cast<std::uint16_t>(r.name.size()));
        out.insert(out.end(), r.name.begin(), r.name.end());
        put_u8(out, kDtypeFloat32);
        put_u8(out, static_cast<std::uint8_t>(r.dims.size()));
        for (auto d : r.dims) {
            put_u32(out, d);
        }
        out.reserve(out.size() + 4 * r.data.size());
        for (float v : r.data) {
            put_u32(out, std::bit_cast<std::uint32_t>(v));
        }
    }
    return out;
}

std::vector<TensorRecord> decode_container(std::span<const std::uint8_t> bytes) {
    Reader in(bytes);
    if (in.str(4, "magic") != "OWCF") {
        throw ContainerError(ContainerError::Kind::bad_magic, "not an OWCF container (bad magic)");
    }
    const std::uint32_t version = in.u32("version");
    if (version != kContainerVersion) {
        throw ContainerError(ContainerError::Kind::bad_version,
                             "unsupported container version " + std::to_string(version));
    }
    const std::uint32_t count = in.u32("record count");
    std::vector<TensorRecord> records;
    std::set<std::string> names;
    for (std::uint32_t i = 0; i < count; ++i) {
        TensorRecord r;
        const std::uint16_t name_len = in.u16("name length");
        r.name = in.str(name_len, "name");
        if (!names.insert(r.name).second) {
            throw ContainerError(ContainerError::Kind::duplicate_name, "duplicate record name '" + r.name + "'");
        }
        const std::uint8_t dtype = in.u8("dtype");
        if (dtype != kDtypeFloat32) {
            throw ContainerError(ContainerError::Kind::bad_record,
                                 "record '" + r.name + "' has unknown dtype " + std::to_string(dtype));
        }
        const std::uint8_t ndim = in.u8("ndim");
        std::size_t n = 1;
        for (std::uint8_t d = 0; d < ndim; ++d) {
            r.dims.push_back(in.u32("dims"));
            n *= r.dims.back();
        }
        if (n > in.remaining() / 4) {
            throw ContainerError(ContainerError::Kind::truncated, "container truncated in payload of '" + r.name + "'");
        }
        r.data.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            r.data[k] = std::bit_cast<float>(in.u32("payload"));
        }
        records.push_back(std::move(r));
    }
    if (in.remaining() != 0) {
        throw ContainerError(ContainerError::Kind::bad_record, "trailing bytes after last record");
    }
    return records;
}

void write_container(const std::filesystem::path& path, std::span<const TensorRecord> records) {
    const auto bytes = encode_container(records);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw ContainerError(ContainerError::Kind::io, "cannot open '" + path.string() + "' for writing");
    }
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) {
        throw ContainerError(ContainerError::Kind::io, "write failed for '" + path.string() + "'");
    }
}

std::vector<TensorRecord> read_container(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw ContainerError(ContainerError::Kind::io, "cannot open '" + path.string() + "'");
    }
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    try {
        return decode_container(bytes);
    } catch (const ContainerError& e) {
        throw ContainerError(e.kind(), path.string() + ": " + e.what());
    }
}

const TensorRecord* try_find_record(const std::vector<TensorRecord>& records, const std::string& name) {
    for (const auto& r : records) {
        if (r.name == name) {
            return &r;
        }
    }
    return nullptr;
}

const TensorRecord& find_record(const std::vector<TensorRecord>& records, const std::string& name) {
    if (const auto* r = try_find_record(records, name)) {
        return *r;
    }
    throw ContainerError(ContainerError::Kind::bad_record, "missing record '" + name + "'");
}

TensorRecord image_record(const std::string& name, const Image& img) {
    require_consistent(img, "image_record");
    TensorRecord r{name, {static_cast<std::uint32_t>(img.height), static_cast<std::uint32_t>(img.width)}, {}};
    r.data.assign(img.data.begin(), img.data.end());
    return r;
}

Image record_to_image(const TensorRecord& rec) {
    if (rec.dims.size() != 2) {
        throw ContainerError(ContainerError::Kind::bad_record, "record '" + rec.name + "' is not a 2D image");
    }
    Image img(static_cast<int>(rec.dims[1]), static_cast<int>(rec.dims[0]));
    std::copy(rec.data.begin(), rec.data.end(), img.data.begin());
    return img;
}

TensorRecord sinogram_record(const std::string& name, const Sinogram& sino) {
    require_consistent(sino, "sinogram_record");
    TensorRecord r{name, {static_cast<std::uint32_t>(sino.n_views), static_cast<std::uint32_t>(sino.n_bins)}, {}};
    r.data.assign(sino.data.begin(), sino.data.end());
    return r;
}

Sinogram record_to_sinogram(const TensorRecord& rec) {
    if (rec.dims.size() != 2) {
        throw ContainerError(ContainerError::Kind::bad_record, "record '" + rec.name + "' is not a 2D sinogram");
    }
    Sinogram s(static_cast<int>(rec.dims[0]), static_cast<int>(rec.dims[1]));
    std::copy(rec.data.begin(), rec.data.end(), s.data.begin());
    return s;
}

void write_image(const std::filesystem::path& path, const Image& img) {
    const TensorRecord r = image_record("image", img);
    write_container(path, std::span(&r, 1));
}

Image read_image(const std::filesystem::path& path) { return record_to_image(find_record(read_container(path), "image")); }

void write_sinogram(const std::filesystem::path& path, const Sinogram& sino) {
    const TensorRecord r = sinogram_record("sinogram", sino);
    write_container(path, std::span(&r, 1));
}

Sinogram read_sinogram(const std::filesystem::path& path) {
    return record_to_sinogram(find_record(read_container(path), "sinogram"));
}

void export_pgm(const Image& img, const std::filesystem::path& path, double lo, double hi) {
    require_consistent(img, "export_pgm");
    if (!(lo < hi)) {
        throw std::invalid_argument("export_pgm: window requires lo < hi");
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw std::runtime_error("export_pgm: cannot open '" + path.string() + "'");
    }
    f << "P5\n" << img.width << " " << img.height << "\n65535\n";
    std::vector<char> buf;
    buf.reserve(img.data.size() * 2);
    for (double v : img.data) {
        double t = (v - lo) / (hi - lo);
        t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
        const auto q = static_cast<std::uint16_t>(std::lround(t * 65535.0));
        buf.push_back(static_cast<char>(q >> 8));
        buf.push_back(static_cast<char>(q & 0xff));
    }
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) {
        throw std::runtime_error("export_pgm: write failed for '" + path.string() + "'");
    }
}

Config Config::parse(const std::string& text, const std::string& origin) {
    Config cfg;
    cfg.origin_ = origin;
    std::stringstream ss(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": malformed section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) {
            throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": empty key");
        }
        cfg.entries_[section.empty() ? key : section + "." + key] = trim(line.substr(eq + 1));
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path) { return parse(read_text(path), path.string()); }

bool Config::has(const std::string& key) const { return entries_.count(key) != 0; }

std::string Config::get_string(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        throw std::invalid_argument("config " + origin_ + ": missing key '" + key + "'");
    }
    return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : parse_double(key, it->second);
}

long long Config::get_int(const std::string& key, long long fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        return fallback;
    }
    long long v = 0;
    const auto& s = it->second;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw std::invalid_argument("config: '" + key + "' is not an integer: '" + s + "'");
    }
    return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        return fallback;
    }
    const auto& s = it->second;
    if (s == "true" || s == "1" || s == "yes" || s == "on") {
        return true;
    }
    if (s == "false" || s == "0" || s == "no" || s == "off") {
        return false;
    }
    throw std::invalid_argument("config: '" + key + "' is not a boolean: '" + s + "'");
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        return fallback;
    }
    std::vector<double> out;
    for (const auto& item : split_list(it->second)) {
        out.push_back(parse_double(key, item));
    }
    return out;
}

std::vector<std::string> Config::get_strings(const std::string& key, const std::vector<std::string>& fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : split_list(it->second);
}

void Config::set(const std::string& key, const std::string& value) { entries_[key] = value; }

void Config::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || assignment.find('.') > eq) {
        throw std::invalid_argument("override must look like section.key=value: '" + assignment + "'");
    }
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::merge(const Config& other) {
    for (const auto& [k, v] : other.entries_) {
        entries_[k] = v;
    }
}

std::string Config::to_string() const {
    std::ostringstream out;
    // Keys without a section must precede the first header to parse back.
    for (const auto& [key, value] : entries_) {
        if (key.find('.') == std::string::npos) {
            out << key << " = " << value << "\n";
        }
    }
    std::string current;
    for (const auto& [key, value] : entries_) {
        const auto dot = key.find('.');
        if (dot == std::string::npos) {
            continue;
        }
        const std::string section = key.substr(0, dot);
        if (section != current) {
            out << (out.tellp() > 0 ? "\n" : "") << "[" << section << "]\n";
            current = section;
        }
        out << key.substr(dot + 1) << " = " << value << "\n";
    }
    return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    f << text;
    if (!f) {
        throw std::runtime_error("write failed for '" + path.string() + "'");
    }
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot open '" + path.string() + "'");
    }
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::string format_double(double v) {
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace owcnf::io
