#pragma once

// Minimal NPY v1.0 codec: little-endian f4/f8/i8, C order. Plus the label
// reader shared by the CLI (NPY i8 or a one-column CSV headed `label`).

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dvpool/error.hpp"
#include "dvpool/matrix.hpp"
#include "dvpool/tensor.hpp"

namespace dvpool {

static_assert(std::endian::native == std::endian::little,
              "the NPY codec assumes a little-endian host");

enum class DType { f4, f8, i8 };

inline std::string_view descr(DType t) {
    switch (t) {
        case DType::f4: return "<f4";
        case DType::f8: return "<f8";
        case DType::i8: return "<i8";
    }
    return "?";
}

inline std::size_t item_size(DType t) { return t == DType::f4 ? 4 : 8; }

using Bytes = std::vector<std::uint8_t>;

/// An n-dimensional array as stored in an .npy file.
struct NpyArray {
    Shape shape;
    std::variant<std::vector<float>, std::vector<double>, std::vector<std::int64_t>> values;

    DType dtype() const { return static_cast<DType>(values.index()); }
    std::size_t size() const {
        return std::visit([](const auto& v) { return v.size(); }, values);
    }

    static NpyArray of(Shape shape, std::vector<double> v) { return {std::move(shape), std::move(v)}; }
    static NpyArray of(Shape shape, std::vector<float> v) { return {std::move(shape), std::move(v)}; }
    static NpyArray of(Shape shape, std::vector<std::int64_t> v) {
        return {std::move(shape), std::move(v)};
    }

    /// Float payload widened to double. Integer arrays are rejected.
    std::vector<double> as_doubles() const {
        if (const auto* d = std::get_if<std::vector<double>>(&values)) return *d;
        if (const auto* f = std::get_if<std::vector<float>>(&values))
            return std::vector<double>(f->begin(), f->end());
        throw IoError("expected a floating-point array (f4 or f8), got i8");
    }

    friend bool operator==(const NpyArray&, const NpyArray&) = default;
};

namespace detail {

inline constexpr char kNpyMagic[] = "\x93NUMPY";
inline constexpr std::size_t kNpyMagicLen = 6;
inline constexpr std::size_t kNpyAlign = 64;

inline std::string header_dict(const NpyArray& a) {
    std::string shape = "(";
    for (std::size_t i = 0; i < a.shape.size(); ++i) {
        if (i) shape += ", ";
        shape += std::to_string(a.shape[i]);
    }
    if (a.shape.size() == 1) shape += ",";
    shape += ")";
    return "{'descr': '" + std::string(descr(a.dtype())) + "', 'fortran_order': False, 'shape': " +
           shape + ", }";
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '\n'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
        s.remove_suffix(1);
    return s;
}

/// Raw text of the value stored under 'key' in a Python dict literal.
inline std::string_view dict_value(std::string_view dict, std::string_view key) {
    const std::string quoted = "'" + std::string(key) + "'";
    const auto at = dict.find(quoted);
    if (at == std::string_view::npos) throw IoError("npy header missing key " + quoted);
    auto rest = dict.substr(at + quoted.size());
    rest = trim(rest);
    if (rest.empty() || rest.front() != ':') throw IoError("npy header: malformed entry " + quoted);
    rest = trim(rest.substr(1));
    std::size_t end = 0;
    if (!rest.empty() && rest.front() == '(') {
        end = rest.find(')');
        if (end == std::string_view::npos) throw IoError("npy header: unterminated shape tuple");
        ++end;
    } else if (!rest.empty() && rest.front() == '\'') {
        end = rest.find('\'', 1);
        if (end == std::string_view::npos) throw IoError("npy header: unterminated string");
        ++end;
    } else {
        end = std::min(rest.find(','), rest.find('}'));
        if (end == std::string_view::npos) end = rest.size();
    }
    return trim(rest.substr(0, end));
}

inline Shape parse_shape(std::string_view tuple) {
    if (tuple.size() < 2 || tuple.front() != '(' || tuple.back() != ')')
        throw IoError("npy header: shape is not a tuple");
    tuple = tuple.substr(1, tuple.size() - 2);
    Shape shape;
    while (!(tuple = trim(tuple)).empty()) {
        const auto comma = tuple.find(',');
        const auto item = trim(tuple.substr(0, comma));
        std::size_t dim = 0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), dim);
        if (ec != std::errc() || ptr != item.data() + item.size())
            throw IoError("npy header: bad shape entry '" + std::string(item) + "'");
        shape.push_back(dim);
        if (comma == std::string_view::npos) break;
        tuple.remove_prefix(comma + 1);
    }
    return shape;
}

template <typename T>
std::vector<T> decode_payload(std::span<const std::uint8_t> payload, std::size_t count) {
    std::vector<T> out(count);
    if (count) std::memcpy(out.data(), payload.data(), count * sizeof(T));
    return out;
}

}  // namespace detail

inline NpyArray read_npy(std::span<const std::uint8_t> bytes) {
    using namespace detail;
    if (bytes.size() < kNpyMagicLen + 4 ||
        std::memcmp(bytes.data(), kNpyMagic, kNpyMagicLen) != 0)
        throw IoError("not an npy file: bad magic");
    const unsigned major = bytes[6];
    const unsigned minor = bytes[7];
    if (major != 1 || minor != 0)
        throw IoError("unsupported npy version " + std::to_string(major) + "." +
                      std::to_string(minor) + " (only 1.0)");
    const std::size_t header_len = bytes[8] | (static_cast<std::size_t>(bytes[9]) << 8);
    const std::size_t data_start = 10 + header_len;
    if (bytes.size() < data_start) throw IoError("truncated npy header");
    const std::string_view dict(reinterpret_cast<const char*>(bytes.data()) + 10, header_len);

    const auto fortran = dict_value(dict, "fortran_order");
    if (fortran == "True") throw IoError("fortran_order arrays are not supported (C order only)");
    if (fortran != "False") throw IoError("npy header: bad fortran_order value");

    const auto type = dict_value(dict, "descr");
    NpyArray a;
    a.shape = parse_shape(dict_value(dict, "shape"));
    const std::size_t count = shape_product(a.shape);
    DType dtype;
    if (type == "'<f4'") dtype = DType::f4;
    else if (type == "'<f8'") dtype = DType::f8;
    else if (type == "'<i8'") dtype = DType::i8;
    else throw IoError("unsupported npy dtype " + std::string(type) + " (expected <f4, <f8 or <i8)");

    const std::size_t need = count * item_size(dtype);
    const auto payload = bytes.subspan(data_start);
    if (payload.size() < need)
        throw IoError("truncated npy payload: expected " + std::to_string(need) + " bytes, got " +
                      std::to_string(payload.size()));
    if (payload.size() > need) throw IoError("npy payload has trailing bytes");
    switch (dtype) {
        case DType::f4: a.values = decode_payload<float>(payload, count); break;
        case DType::f8: a.values = decode_payload<double>(payload, count); break;
        case DType::i8: a.values = decode_payload<std::int64_t>(payload, count); break;
    }
    return a;
}

/// Encodes with the same header layout numpy writes (padded to 64 bytes).
inline Bytes write_npy(const NpyArray& a) {
    detail::require(a.size() == shape_product(a.shape), "write_npy: data length does not match shape");
    std::string header = detail::header_dict(a);
    const std::size_t unpadded = 10 + header.size() + 1;
    const std::size_t padded = (unpadded + detail::kNpyAlign - 1) / detail::kNpyAlign * detail::kNpyAlign;
    header.append(padded - unpadded, ' ');
    header.push_back('\n');
    if (header.size() > 0xFFFF) throw IoError("npy header too long for format 1.0");

    Bytes out(detail::kNpyMagic, detail::kNpyMagic + detail::kNpyMagicLen);
    out.push_back(1);
    out.push_back(0);
    out.push_back(static_cast<std::uint8_t>(header.size() & 0xFF));
    out.push_back(static_cast<std::uint8_t>(header.size() >> 8));
    out.insert(out.end(), header.begin(), header.end());
    std::visit(
        [&](const auto& v) {
            const auto* raw = reinterpret_cast<const std::uint8_t*>(v.data());
            out.insert(out.end(), raw, raw + v.size() * sizeof(v[0]));
        },
        a.values);
    return out;
}

inline Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
}

inline NpyArray load_npy(const std::filesystem::path& path) {
    try {
        return read_npy(read_file(path));
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

inline void save_npy(const std::filesystem::path& path, const NpyArray& a) {
    write_file(path, write_npy(a));
}

/// 2D float array as a Matrix (f4 widened).
inline Matrix to_matrix(const NpyArray& a) {
    if (a.shape.size() != 2)
        throw IoError("expected a 2D array, got shape " + shape_string(a.shape));
    return Matrix(a.shape[0], a.shape[1], a.as_doubles());
}

inline NpyArray from_matrix(const Matrix& m) {
    return NpyArray::of({m.rows(), m.cols()}, std::vector<double>(m.data().begin(), m.data().end()));
}

/// Splits an N x C x [D x] H x W array into N feature maps.
inline std::vector<FeatureMap> to_feature_maps(const NpyArray& a) {
    if (a.shape.size() != 4 && a.shape.size() != 5)
        throw IoError("expected N x C x H x W or N x C x D x H x W, got shape " +
                      shape_string(a.shape));
    const auto values = a.as_doubles();
    const Shape map_shape(a.shape.begin() + 1, a.shape.end());
    const std::size_t per = shape_product(map_shape);
    std::vector<FeatureMap> maps;
    maps.reserve(a.shape[0]);
    for (std::size_t i = 0; i < a.shape[0]; ++i)
        maps.emplace_back(map_shape, std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(i * per),
                                                         values.begin() + static_cast<std::ptrdiff_t>((i + 1) * per)));
    return maps;
}

inline NpyArray from_feature_maps(std::span<const FeatureMap> maps) {
    detail::require(!maps.empty(), "from_feature_maps: empty batch");
    Shape shape{maps.size()};
    shape.insert(shape.end(), maps[0].shape().begin(), maps[0].shape().end());
    std::vector<double> values;
    values.reserve(shape_product(shape));
    for (const auto& m : maps) {
        detail::require(m.shape() == maps[0].shape(), "from_feature_maps: ragged batch");
        values.insert(values.end(), m.data().begin(), m.data().end());
    }
    return NpyArray::of(std::move(shape), std::move(values));
}

/// Parses a one-column CSV whose header is exactly `label`.
inline std::vector<std::int64_t> parse_label_csv(std::string_view text) {
    std::vector<std::int64_t> labels;
    bool header = true;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (header) {
            if (detail::trim(line) != "label")
                throw IoError("label CSV must start with a `label` header line");
            header = false;
            continue;
        }
        if (line.empty() && text.empty()) break;
        const auto cell = detail::trim(line);
        std::int64_t v = 0;
        const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size())
            throw IoError("label CSV line " + std::to_string(line_no) + ": '" + std::string(cell) +
                          "' is not an integer");
        if (v < 0) throw IoError("label CSV line " + std::to_string(line_no) + ": negative label");
        labels.push_back(v);
    }
    if (header) throw IoError("label CSV must start with a `label` header line");
    return labels;
}

/// Labels from `.npy` (1D i8) or `.csv`; negatives are rejected.
inline std::vector<std::int64_t> read_labels(const std::filesystem::path& path) {
    if (path.extension() == ".csv") {
        const auto bytes = read_file(path);
        try {
            return parse_label_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
        } catch (const IoError& e) {
            throw IoError(path.string() + ": " + e.what());
        }
    }
    const NpyArray a = load_npy(path);
    const auto* ints = std::get_if<std::vector<std::int64_t>>(&a.values);
    if (!ints) throw IoError(path.string() + ": labels must be an integer (<i8) array");
    if (a.shape.size() != 1) throw IoError(path.string() + ": labels must be 1D, got shape " + shape_string(a.shape));
    for (auto v : *ints)
        if (v < 0) throw IoError(path.string() + ": negative label");
    return *ints;
}

}  // namespace dvpool
