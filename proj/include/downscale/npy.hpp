#pragma once

// NPY v1.0 arrays (little-endian float32/float64/uint8, C order) and the
// `<name>.meta.json` sidecar that turns an array into a FieldStack.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "raster.hpp"

namespace downscale::npy {

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

enum class Dtype { f4, f8, u1 };

struct Array {
    std::vector<std::size_t> shape;
    Dtype dtype = Dtype::f4;
    std::vector<double> data;  // converted to double regardless of storage dtype

    std::size_t count() const {
        std::size_t n = 1;
        for (auto s : shape) n *= s;
        return n;
    }
};

namespace detail {

inline constexpr char kMagic[] = "\x93NUMPY";

inline std::size_t itemsize(Dtype t) { return t == Dtype::f8 ? 8 : t == Dtype::f4 ? 4 : 1; }

inline const char* descr(Dtype t) { return t == Dtype::f8 ? "<f8" : t == Dtype::f4 ? "<f4" : "|u1"; }

inline std::string header_dict(Dtype t, std::span<const std::size_t> shape) {
    std::string s = std::string("{'descr': '") + descr(t) + "', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        s += std::to_string(shape[i]);
        if (shape.size() == 1 || i + 1 < shape.size()) s += ",";
        if (i + 1 < shape.size()) s += " ";
    }
    s += "), }";
    // magic(6) + version(2) + len(2) + dict + padding + '\n' is a multiple of 64
    const std::size_t total = 10 + s.size() + 1;
    s.append((64 - total % 64) % 64, ' ');
    s += '\n';
    return s;
}

inline std::string value_after(const std::string& dict, const std::string& key) {
    const auto k = dict.find("'" + key + "'");
    if (k == std::string::npos) throw ValidationError("npy header: missing key '" + key + "'");
    auto c = dict.find(':', k);
    if (c == std::string::npos) throw ValidationError("npy header: malformed entry '" + key + "'");
    ++c;
    while (c < dict.size() && dict[c] == ' ') ++c;
    return dict.substr(c);
}

inline Array parse_header(const std::string& dict) {
    Array a;
    const std::string d = value_after(dict, "descr");
    if (d.rfind("'<f4'", 0) == 0) a.dtype = Dtype::f4;
    else if (d.rfind("'<f8'", 0) == 0) a.dtype = Dtype::f8;
    else if (d.rfind("'|u1'", 0) == 0 || d.rfind("'<u1'", 0) == 0) a.dtype = Dtype::u1;
    else throw ValidationError("npy header: unsupported dtype " + d.substr(0, d.find(',')));
    if (value_after(dict, "fortran_order").rfind("False", 0) != 0)
        throw ValidationError("npy header: fortran_order arrays are not supported");
    const std::string sh = value_after(dict, "shape");
    if (sh.empty() || sh[0] != '(') throw ValidationError("npy header: malformed shape");
    const auto close = sh.find(')');
    if (close == std::string::npos) throw ValidationError("npy header: malformed shape");
    std::string body = sh.substr(1, close - 1);
    std::size_t pos = 0;
    while (pos < body.size()) {
        while (pos < body.size() && (body[pos] == ' ' || body[pos] == ',')) ++pos;
        if (pos >= body.size()) break;
        std::size_t end = pos;
        while (end < body.size() && body[end] >= '0' && body[end] <= '9') ++end;
        if (end == pos) throw ValidationError("npy header: malformed shape");
        a.shape.push_back(std::stoull(body.substr(pos, end - pos)));
        pos = end;
    }
    return a;
}

}  // namespace detail

inline void write(const std::filesystem::path& path, Dtype dtype, std::span<const std::size_t> shape,
                  std::span<const double> values) {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    downscale::detail::require(n == values.size(), "npy::write: shape does not match value count");
    const std::string header = detail::header_dict(dtype, shape);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing");
    out.write(detail::kMagic, 6);
    const char version[2] = {1, 0};
    out.write(version, 2);
    const auto hlen = static_cast<std::uint16_t>(header.size());
    out.write(reinterpret_cast<const char*>(&hlen), 2);
    out.write(header.data(), std::streamsize(header.size()));
    std::vector<char> buf(n * detail::itemsize(dtype));
    for (std::size_t i = 0; i < n; ++i) {
        switch (dtype) {
            case Dtype::f4: {
                const float f = static_cast<float>(values[i]);
                std::memcpy(&buf[i * 4], &f, 4);
                break;
            }
            case Dtype::f8: std::memcpy(&buf[i * 8], &values[i], 8); break;
            case Dtype::u1: buf[i] = static_cast<char>(static_cast<std::uint8_t>(values[i])); break;
        }
    }
    out.write(buf.data(), std::streamsize(buf.size()));
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline Array read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    char magic[6];
    unsigned char version[2];
    in.read(magic, 6);
    in.read(reinterpret_cast<char*>(version), 2);
    if (!in || std::memcmp(magic, detail::kMagic, 6) != 0)
        throw ValidationError("'" + path.string() + "' is not an NPY file");
    std::uint32_t hlen = 0;
    if (version[0] == 1) {
        std::uint16_t h16 = 0;
        in.read(reinterpret_cast<char*>(&h16), 2);
        hlen = h16;
    } else if (version[0] == 2 || version[0] == 3) {
        in.read(reinterpret_cast<char*>(&hlen), 4);
    } else {
        throw ValidationError("unsupported NPY version in '" + path.string() + "'");
    }
    std::string dict(hlen, '\0');
    in.read(dict.data(), hlen);
    if (!in) throw ValidationError("truncated NPY header in '" + path.string() + "'");
    Array a = detail::parse_header(dict);
    const std::size_t n = a.count();
    const std::size_t bytes = n * detail::itemsize(a.dtype);
    std::vector<char> buf(bytes);
    in.read(buf.data(), std::streamsize(bytes));
    if (std::size_t(in.gcount()) != bytes)
        throw ValidationError("shape mismatch in '" + path.string() + "': header declares " +
                              std::to_string(n) + " elements, payload is shorter");
    in.peek();
    if (!in.eof())
        throw ValidationError("shape mismatch in '" + path.string() + "': payload longer than header shape");
    a.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        switch (a.dtype) {
            case Dtype::f4: {
                float f;
                std::memcpy(&f, &buf[i * 4], 4);
                a.data[i] = f;
                break;
            }
            case Dtype::f8: std::memcpy(&a.data[i], &buf[i * 8], 8); break;
            case Dtype::u1: a.data[i] = static_cast<unsigned char>(buf[i]); break;
        }
    }
    return a;
}

inline std::filesystem::path meta_path(const std::filesystem::path& npy_path) {
    auto p = npy_path;
    return p.replace_extension(".meta.json");
}

inline std::filesystem::path mask_path(const std::filesystem::path& npy_path) {
    auto p = npy_path;
    return p.replace_extension(".mask.npy");
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("invalid JSON in '" + path.string() + "': " + e.what());
    }
}

/// Grid from the lat/lon keys of a sidecar (or any JSON object holding them).
inline Grid grid_from_json(const nlohmann::json& j) {
    try {
        return Grid(j.at("lat").get<std::vector<double>>(), j.at("lon").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("grid metadata: ") + e.what());
    }
}

inline nlohmann::json meta_json(const FieldStack& s, const std::string& units = "1") {
    nlohmann::json j;
    std::vector<std::string> dates;
    for (const auto& d : s.dates()) dates.push_back(d.iso());
    j["dates"] = dates;
    j["lat"] = s.grid().lat();
    j["lon"] = s.grid().lon();
    j["space"] = std::string(to_string(s.space()));
    j["var_name"] = s.var_name();
    j["units"] = units;
    return j;
}

/// Writes `<name>.npy` (float32) + `<name>.meta.json` (+ `<name>.mask.npy` when masked).
inline void save_stack(const std::filesystem::path& path, const FieldStack& s) {
    std::vector<std::size_t> shape;
    if (!s.is_static()) shape.push_back(s.n_layers());
    shape.push_back(s.rows());
    shape.push_back(s.cols());
    write(path, Dtype::f4, shape, s.values());
    if (s.has_mask()) {
        std::vector<double> m(s.mask().begin(), s.mask().end());
        write(mask_path(path), Dtype::u1, shape, m);
    } else {
        std::filesystem::remove(mask_path(path));  // a stale mask would be picked up on load
    }
    std::ofstream meta(meta_path(path));
    if (!meta) throw ValidationError("cannot write sidecar for '" + path.string() + "'");
    meta << meta_json(s).dump(2) << "\n";
}

/// Loads an array and its sidecar. 2D arrays load as static fields.
inline FieldStack load_stack(const std::filesystem::path& path) {
    const Array a = read(path);
    if (a.dtype == Dtype::u1) throw ValidationError("'" + path.string() + "': field arrays must be float");
    if (a.shape.size() != 2 && a.shape.size() != 3)
        throw ValidationError("'" + path.string() + "': expected a 2D or 3D array");
    const nlohmann::json meta = read_json(meta_path(path));
    const Grid grid = grid_from_json(meta);
    const std::size_t rows = a.shape[a.shape.size() - 2], cols = a.shape.back();
    if (rows != grid.n_lat() || cols != grid.n_lon())
        throw ValidationError("'" + path.string() + "': array shape does not match sidecar lat/lon");
    std::vector<Date> dates;
    if (meta.contains("dates"))
        for (const auto& d : meta.at("dates")) dates.push_back(Date::parse(d.get<std::string>()));
    if (a.shape.size() == 3 && dates.size() != a.shape[0])
        throw ValidationError("'" + path.string() + "': shape mismatch between array days (" +
                              std::to_string(a.shape[0]) + ") and sidecar dates (" +
                              std::to_string(dates.size()) + ")");
    if (a.shape.size() == 2 && !dates.empty())
        throw ValidationError("'" + path.string() + "': 2D array with dated sidecar");
    std::vector<std::uint8_t> mask;
    if (std::filesystem::exists(mask_path(path))) {
        const Array m = read(mask_path(path));
        if (m.shape != a.shape) throw ValidationError("'" + path.string() + "': mask shape mismatch");
        mask.reserve(m.data.size());
        for (double v : m.data) mask.push_back(v != 0.0 ? 1 : 0);
    } else {
        for (double v : a.data)
            if (!std::isfinite(v))
                throw ValidationError("'" + path.string() + "': non-finite values without a validity mask");
    }
    const Space space = parse_space(meta.value("space", std::string("raw")));
    return FieldStack(grid, std::move(dates), a.data, space, meta.value("var_name", std::string("field")),
                      std::move(mask));
}

}  // namespace downscale::npy
