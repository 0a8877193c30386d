#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "amem/net.hpp"

namespace amem {

// Checkpoint layout (little-endian):
//   "AMEM1" (5 bytes), version byte, depth d (u32), dims k_0..k_d (u32 each),
//   nonlin id byte, nonlin parameter (f64), then each W_i row-major f64,
//   layer order input -> output.
inline constexpr char kCheckpointMagic[5] = {'A', 'M', 'E', 'M', '1'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32_le(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64_le(std::string& buf, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct ByteReader {
    const unsigned char* p;
    std::size_t left;
    void need(std::size_t n, const char* what) {
        if (left < n) throw std::runtime_error(std::string("checkpoint: truncated at ") + what);
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
        p += 4;
        left -= 4;
        return v;
    }
    double f64(const char* what) {
        need(8, what);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= std::uint64_t(p[i]) << (8 * i);
        p += 8;
        left -= 8;
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::uint8_t byte(const char* what) {
        need(1, what);
        std::uint8_t v = *p;
        ++p;
        --left;
        return v;
    }
};

} // namespace detail

inline std::string serialize_net(const Net& net) {
    net.validate();
    std::string buf;
    buf.append(kCheckpointMagic, 5);
    buf.push_back(static_cast<char>(kCheckpointVersion));
    detail::put_u32_le(buf, static_cast<std::uint32_t>(net.depth()));
    for (std::size_t d : net.dims) detail::put_u32_le(buf, static_cast<std::uint32_t>(d));
    buf.push_back(static_cast<char>(net.nonlin.kind));
    detail::put_f64_le(buf, net.nonlin.param);
    for (const Mat& w : net.weights)
        for (double v : w.data) detail::put_f64_le(buf, v);
    return buf;
}

inline Net deserialize_net(const std::string& bytes) {
    detail::ByteReader r{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()};
    r.need(5, "magic");
    if (std::memcmp(r.p, kCheckpointMagic, 5) != 0)
        throw std::runtime_error("checkpoint: bad magic");
    r.p += 5;
    r.left -= 5;
    std::uint8_t version = r.byte("version");
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    std::uint32_t depth = r.u32("depth");
    if (depth == 0 || depth > 4096) throw std::runtime_error("checkpoint: implausible depth");
    std::vector<std::size_t> dims(depth + 1);
    for (auto& d : dims) d = r.u32("dims");
    Nonlin nl;
    nl.kind = static_cast<NonlinKind>(r.byte("nonlin id"));
    nl.param = r.f64("nonlin param");
    Net net = Net::zeros(dims, nl);
    std::size_t weight_count = 0;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) weight_count += dims[i] * dims[i + 1];
    if (r.left != weight_count * 8)
        throw std::runtime_error("checkpoint: length mismatch (expected " +
                                 std::to_string(weight_count * 8) + " weight bytes, have " +
                                 std::to_string(r.left) + ")");
    for (Mat& w : net.weights)
        for (double& v : w.data) v = r.f64("weights");
    return net;
}

inline void save_net(const Net& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    std::string bytes = serialize_net(net);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("checkpoint: write failure on " + path);
}

inline Net load_net(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_net(bytes);
}

// --- images ---

namespace detail {
inline unsigned char quantize(double v) {
    double c = v < 0 ? 0 : (v > 1 ? 1 : v);
    return static_cast<unsigned char>(static_cast<int>(c * 255.0 + 0.5));
}
} // namespace detail

// binary P6, 8-bit; pixels row-major RGB triples in [0,1], clamped on write
inline void write_ppm(const std::vector<double>& pixels, std::size_t h, std::size_t w,
                      const std::string& path) {
    if (pixels.size() != h * w * 3) throw std::invalid_argument("write_ppm: pixel count mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_ppm: cannot write " + path);
    out << "P6\n" << w << " " << h << "\n255\n";
    for (double v : pixels) out.put(static_cast<char>(detail::quantize(v)));
    if (!out) throw std::runtime_error("write_ppm: write failure on " + path);
}

// binary P5 grayscale
inline void write_pgm(const std::vector<double>& pixels, std::size_t h, std::size_t w,
                      const std::string& path) {
    if (pixels.size() != h * w) throw std::invalid_argument("write_pgm: pixel count mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pgm: cannot write " + path);
    out << "P5\n" << w << " " << h << "\n255\n";
    for (double v : pixels) out.put(static_cast<char>(detail::quantize(v)));
    if (!out) throw std::runtime_error("write_pgm: write failure on " + path);
}

// --- CSV ---

using Cell = std::variant<std::int64_t, double, std::string>;

// reals print with 17 significant digits so a reparse recovers the exact bits
inline std::string format_cell(const Cell& c) {
    if (std::holds_alternative<std::int64_t>(c)) return std::to_string(std::get<std::int64_t>(c));
    if (std::holds_alternative<double>(c)) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", std::get<double>(c));
        return buf;
    }
    return std::get<std::string>(c);
}

inline void write_csv(const std::vector<std::string>& header,
                      const std::vector<std::vector<Cell>>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_csv: cannot write " + path);
    for (std::size_t i = 0; i < header.size(); ++i)
        out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw std::invalid_argument("write_csv: row width does not match header");
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << format_cell(row[i]);
        out << "\n";
    }
    if (!out) throw std::runtime_error("write_csv: write failure on " + path);
}

} // namespace amem
