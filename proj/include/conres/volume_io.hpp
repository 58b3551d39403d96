#pragma once

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "conres/phantom.hpp"

namespace conres {

static_assert(std::endian::native == std::endian::little, "container payloads are little-endian");

// Volume container: 8-byte magic "CRESVOL1", u64 little-endian header length,
// UTF-8 JSON header {"shape":[C,S,H,W],"label_classes":int,"spacing":[f,f,f],
// "dtype":"f32","id":str}, image payload as little-endian f32 row-major, then
// label payload as u8 class ids row-major.
inline constexpr char kVolumeMagic[8] = {'C', 'R', 'E', 'S', 'V', 'O', 'L', '1'};

namespace io_detail {

inline void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint64_t read_u64(std::istream& is, const char* what) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw IoError(std::string("truncated payload: ") + what);
    return v;
}

inline void read_exact(std::istream& is, void* dst, std::size_t n, const char* what) {
    is.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (is.gcount() != static_cast<std::streamsize>(n))
        throw IoError(std::string("payload size mismatch: ") + what + " (expected " + std::to_string(n) +
                      " bytes, got " + std::to_string(is.gcount()) + ")");
}

}  // namespace io_detail

inline void write_volume(const std::string& path, const VolumeSample& sample) {
    if (sample.image.rank() != 4) throw UsageError("write_volume: image must be [C,S,H,W]");
    if (sample.label.rank() != 3) throw UsageError("write_volume: label must be [S,H,W]");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);

    nlohmann::json header;
    header["shape"] = sample.image.shape;
    header["label_classes"] = sample.label_classes;
    header["spacing"] = sample.spacing;
    header["dtype"] = "f32";
    header["id"] = sample.id;
    const std::string hs = header.dump();

    os.write(kVolumeMagic, 8);
    io_detail::write_u64(os, hs.size());
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    os.write(reinterpret_cast<const char*>(sample.image.data.data()),
             static_cast<std::streamsize>(sample.image.data.size() * sizeof(float)));
    os.write(reinterpret_cast<const char*>(sample.label.data.data()),
             static_cast<std::streamsize>(sample.label.data.size()));
    if (!os) throw IoError("write failed: " + path);
}

inline VolumeSample read_volume(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);

    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kVolumeMagic, 8) != 0) throw IoError("bad magic in " + path);

    const std::uint64_t hlen = io_detail::read_u64(is, "header length");
    std::string hs(hlen, '\0');
    io_detail::read_exact(is, hs.data(), hlen, "header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed header JSON in " + path + ": " + e.what());
    }
    if (header.value("dtype", "") != "f32") throw IoError("unsupported dtype in " + path);

    const auto shape = header.at("shape").get<Shape>();
    if (shape.size() != 4) throw IoError("header shape must be [C,S,H,W] in " + path);

    VolumeSample out;
    out.label_classes = header.at("label_classes").get<std::int64_t>();
    const auto spacing = header.at("spacing").get<std::vector<double>>();
    if (spacing.size() != 3) throw IoError("header spacing must have 3 entries in " + path);
    std::copy(spacing.begin(), spacing.end(), out.spacing.begin());
    out.id = header.value("id", "");

    out.image = Tensor<float>(shape);
    io_detail::read_exact(is, out.image.data.data(), out.image.data.size() * sizeof(float), "image payload");
    out.label = Mask({shape[1], shape[2], shape[3]});
    io_detail::read_exact(is, out.label.data.data(), out.label.data.size(), "label payload");

    // must be exactly at EOF: extra bytes mean the header disagrees with the payload
    char probe;
    is.read(&probe, 1);
    if (!is.eof()) throw IoError("payload size mismatch: trailing bytes after label payload in " + path);

    validate_labels(out.label, out.label_classes);
    return out;
}

}  // namespace conres
