#pragma once

#include <cstdint>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "amem/linalg.hpp"
#include "amem/rng.hpp"

namespace amem {

struct ImageShape {
    std::size_t h = 0, w = 0, channels = 1;
    std::size_t pixels() const { return h * w * channels; }
    bool valid() const { return h > 0 && w > 0 && channels > 0; }
};

struct Dataset {
    std::vector<Vec> examples;
    std::vector<std::uint8_t> labels; // optional, empty when absent
    ImageShape shape;                 // zero when not image data
    bool unit_norm = false;

    std::size_t n() const { return examples.size(); }
    std::size_t dim() const { return examples.empty() ? 0 : examples.front().dim(); }
};

namespace detail {

inline std::uint32_t read_u32_be(std::istream& in, const char* what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error(std::string("idx: truncated file reading ") + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

inline void write_u32_be(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

} // namespace detail

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

// MNIST-style IDX ingestion: big-endian headers, byte pixels scaled to [0,1].
// subset picks a seeded sample without replacement; subset = 0 keeps nothing
// and a subset larger than the file is an error. An empty labels_path skips
// labels.
inline Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                              std::size_t subset, std::uint64_t seed) {
    std::ifstream in(images_path, std::ios::binary);
    if (!in) throw std::runtime_error("idx: cannot open " + images_path);
    std::uint32_t magic = detail::read_u32_be(in, "magic");
    if (magic != kIdxImagesMagic)
        throw std::runtime_error("idx: bad image magic in " + images_path);
    std::uint32_t count = detail::read_u32_be(in, "count");
    std::uint32_t rows = detail::read_u32_be(in, "rows");
    std::uint32_t cols = detail::read_u32_be(in, "cols");
    std::vector<std::uint8_t> raw(std::size_t(count) * rows * cols);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
        throw std::runtime_error("idx: truncated pixel data in " + images_path);

    std::vector<std::uint8_t> all_labels;
    if (!labels_path.empty()) {
        std::ifstream lin(labels_path, std::ios::binary);
        if (!lin) throw std::runtime_error("idx: cannot open " + labels_path);
        if (detail::read_u32_be(lin, "magic") != kIdxLabelsMagic)
            throw std::runtime_error("idx: bad label magic in " + labels_path);
        std::uint32_t lcount = detail::read_u32_be(lin, "count");
        if (lcount != count) throw std::runtime_error("idx: label/image count mismatch");
        all_labels.resize(lcount);
        lin.read(reinterpret_cast<char*>(all_labels.data()), lcount);
        if (static_cast<std::size_t>(lin.gcount()) != all_labels.size())
            throw std::runtime_error("idx: truncated label data in " + labels_path);
    }

    if (subset > count) throw std::runtime_error("idx: subset larger than file");
    Rng rng(derive_seed(seed, 0x1dc));
    auto picked = rng.sample_without_replacement(count, subset);

    Dataset ds;
    ds.shape = {rows, cols, 1};
    const std::size_t dim = std::size_t(rows) * cols;
    for (std::size_t idx : picked) {
        Vec v(dim);
        const std::uint8_t* px = raw.data() + idx * dim;
        for (std::size_t i = 0; i < dim; ++i) v[i] = static_cast<double>(px[i]) / 255.0;
        ds.examples.push_back(std::move(v));
        if (!all_labels.empty()) ds.labels.push_back(all_labels[idx]);
    }
    return ds;
}

// Re-serialize a dataset in the same IDX layout (values clamped to [0,1] and
// quantized back to bytes).
inline void save_idx_images(const Dataset& ds, const std::string& path) {
    if (!ds.shape.valid() || ds.shape.channels != 1)
        throw std::invalid_argument("idx: only single-channel image datasets serialize to IDX");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("idx: cannot write " + path);
    detail::write_u32_be(out, kIdxImagesMagic);
    detail::write_u32_be(out, static_cast<std::uint32_t>(ds.n()));
    detail::write_u32_be(out, static_cast<std::uint32_t>(ds.shape.h));
    detail::write_u32_be(out, static_cast<std::uint32_t>(ds.shape.w));
    for (const Vec& v : ds.examples) {
        for (double val : v.data) {
            double c = val < 0 ? 0 : (val > 1 ? 1 : val);
            out.put(static_cast<char>(static_cast<int>(c * 255.0 + 0.5)));
        }
    }
    if (!out) throw std::runtime_error("idx: write failure on " + path);
}

inline void save_idx_labels(const std::vector<std::uint8_t>& labels, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("idx: cannot write " + path);
    detail::write_u32_be(out, kIdxLabelsMagic);
    detail::write_u32_be(out, static_cast<std::uint32_t>(labels.size()));
    out.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size()));
}

enum class Layout2d { ring, uniform_box };

// Deterministic 2-D point sets in [-1, 1]^2. ring places n points at angles
// 2 pi i / n on radius 0.8.
inline Dataset synth_2d(std::size_t n, Layout2d layout, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("synth_2d: n must be positive");
    Dataset ds;
    if (layout == Layout2d::ring) {
        for (std::size_t i = 0; i < n; ++i) {
            double th = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
            Vec p(2);
            p[0] = 0.8 * std::cos(th);
            p[1] = 0.8 * std::sin(th);
            ds.examples.push_back(std::move(p));
        }
    } else {
        Rng rng(derive_seed(seed, 0x2d));
        for (std::size_t i = 0; i < n; ++i) {
            Vec p(2);
            // rejection keeps points pairwise separated
            for (int attempt = 0; attempt < 1000; ++attempt) {
                p[0] = rng.uniform(-1.0, 1.0);
                p[1] = rng.uniform(-1.0, 1.0);
                bool ok = true;
                for (const Vec& q : ds.examples) ok = ok && distance(p, q) > 1e-3;
                if (ok) break;
            }
            ds.examples.push_back(p);
        }
    }
    return ds;
}

struct CorruptionSpec {
    enum class Kind { uniform_pixels, occlusion_square, gaussian };
    Kind kind = Kind::uniform_pixels;
    double param = 0.25;   // fraction p / side_fraction / variance sigma^2
    double color = 0.0;    // occlusion fill, ignored when uniform_color
    bool uniform_color = false;
    std::uint64_t seed = 0;

    static CorruptionSpec uniform_pixels(double p, std::uint64_t seed) {
        return {Kind::uniform_pixels, p, 0.0, false, seed};
    }
    static CorruptionSpec occlusion(double side_fraction, double color, std::uint64_t seed) {
        return {Kind::occlusion_square, side_fraction, color, false, seed};
    }
    static CorruptionSpec occlusion_random_color(double side_fraction, std::uint64_t seed) {
        return {Kind::occlusion_square, side_fraction, 0.0, true, seed};
    }
    static CorruptionSpec gaussian(double variance, std::uint64_t seed) {
        return {Kind::gaussian, variance, 0.0, false, seed};
    }

    CorruptionSpec with_seed(std::uint64_t s) const {
        CorruptionSpec c = *this;
        c.seed = s;
        return c;
    }

    std::string name() const {
        switch (kind) {
        case Kind::uniform_pixels: return "uniform_pixels";
        case Kind::occlusion_square: return "occlusion_square";
        case Kind::gaussian: return "gaussian";
        }
        return "?";
    }
};

// Apply a corruption model. uniform_pixels resamples a seeded p-fraction of
// coordinates as U[0,1); occlusion overwrites a seeded square; gaussian adds
// N(0, sigma^2) per coordinate, deliberately unclipped (retrieval is expected
// to work from far outside the data range).
inline Vec corrupt(const Vec& x, const CorruptionSpec& spec, const ImageShape* shape = nullptr) {
    Rng rng(derive_seed(spec.seed, 0xc0));
    Vec out = x;
    switch (spec.kind) {
    case CorruptionSpec::Kind::uniform_pixels: {
        if (spec.param < 0.0 || spec.param > 1.0)
            throw std::invalid_argument("corrupt: fraction must lie in [0,1]");
        std::size_t m = static_cast<std::size_t>(spec.param * static_cast<double>(x.dim()) + 0.5);
        auto coords = rng.sample_without_replacement(x.dim(), m);
        for (std::size_t c : coords) out[c] = rng.uniform01();
        break;
    }
    case CorruptionSpec::Kind::occlusion_square: {
        if (!shape || !shape->valid())
            throw std::invalid_argument("corrupt: occlusion requires an image shape");
        if (spec.param <= 0.0 || spec.param > 1.0)
            throw std::invalid_argument("corrupt: side fraction must lie in (0,1]");
        std::size_t sh = static_cast<std::size_t>(std::ceil(spec.param * double(shape->h)));
        std::size_t sw = static_cast<std::size_t>(std::ceil(spec.param * double(shape->w)));
        std::size_t r0 = static_cast<std::size_t>(rng.below(shape->h - sh + 1));
        std::size_t c0 = static_cast<std::size_t>(rng.below(shape->w - sw + 1));
        double color = spec.uniform_color ? rng.uniform01() : spec.color;
        for (std::size_t r = r0; r < r0 + sh; ++r)
            for (std::size_t c = c0; c < c0 + sw; ++c)
                for (std::size_t ch = 0; ch < shape->channels; ++ch)
                    out[(r * shape->w + c) * shape->channels + ch] = color;
        break;
    }
    case CorruptionSpec::Kind::gaussian: {
        if (spec.param < 0.0) throw std::invalid_argument("corrupt: variance must be >= 0");
        double sigma = std::sqrt(spec.param);
        for (std::size_t i = 0; i < out.dim(); ++i) out[i] += sigma * rng.normal();
        break;
    }
    }
    return out;
}

inline Dataset normalize_unit(const Dataset& ds) {
    Dataset out = ds;
    for (Vec& v : out.examples) {
        double n = v.norm2();
        if (n == 0.0) throw std::invalid_argument("normalize_unit: zero vector in dataset");
        for (std::size_t i = 0; i < v.dim(); ++i) v[i] /= n;
    }
    out.unit_norm = true;
    return out;
}

} // namespace amem
