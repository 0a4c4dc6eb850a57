#include "pullback/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "pullback/errors.hpp"
#include "pullback/rng.hpp"

namespace pullback {

namespace {

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path, const char* what) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
        throw FormatError(path.string() + ": truncated header while reading " + what);
    }
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

void write_be32(std::ostream& out, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                                static_cast<char>(v)};
    out.write(b.data(), 4);
}

std::ifstream open_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

std::string hex(std::uint32_t v) {
    std::ostringstream os;
    os << "0x" << std::hex << std::setw(8) << std::setfill('0') << v << std::dec << " (" << v << ")";
    return os.str();
}

}  // namespace

void Dataset::validate() const {
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].size() != input_dim) {
            throw ShapeError("dataset '" + name + "': sample " + std::to_string(i) + " has length " +
                             std::to_string(samples[i].size()) + ", expected " + std::to_string(input_dim));
        }
        if (!all_finite(samples[i])) {
            throw DomainError("dataset '" + name + "': sample " + std::to_string(i) + " is not finite");
        }
    }
    if (!labels.empty() && labels.size() != samples.size()) {
        throw ShapeError("dataset '" + name + "': label count differs from sample count");
    }
}

Dataset Dataset::prefix(std::size_t n) const {
    Dataset out;
    out.input_dim = input_dim;
    out.name = name;
    out.split = split;
    const std::size_t count = std::min(n, samples.size());
    out.samples.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(count));
    if (!labels.empty()) out.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(count));
    return out;
}

Dataset load_idx(const std::filesystem::path& images, const std::optional<std::filesystem::path>& labels,
                 std::optional<std::size_t> limit) {
    std::ifstream in = open_binary(images);
    const std::uint32_t magic = read_be32(in, images, "magic number");
    if (magic != kIdxImageMagic) {
        throw FormatError(images.string() + ": bad image magic number " + hex(magic) + " (expected " +
                          hex(kIdxImageMagic) + ")");
    }
    const std::uint32_t count = read_be32(in, images, "item count");
    const std::uint32_t rows = read_be32(in, images, "row count");
    const std::uint32_t cols = read_be32(in, images, "column count");

    Dataset ds;
    ds.name = images.filename().string();
    ds.input_dim = std::size_t{rows} * cols;
    const std::size_t n = limit ? std::min<std::size_t>(*limit, count) : count;
    ds.samples.reserve(n);
    std::vector<unsigned char> buffer(ds.input_dim);
    for (std::size_t i = 0; i < n; ++i) {
        if (!in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()))) {
            throw FormatError(images.string() + ": file truncated at image " + std::to_string(i) + " of " +
                              std::to_string(count) + " (length error)");
        }
        DenseVector x(ds.input_dim);
        for (std::size_t p = 0; p < x.size(); ++p) x[p] = static_cast<double>(buffer[p]) / 255.0;
        ds.samples.push_back(std::move(x));
    }

    if (labels) {
        std::ifstream lin = open_binary(*labels);
        const std::uint32_t lmagic = read_be32(lin, *labels, "magic number");
        if (lmagic != kIdxLabelMagic) {
            throw FormatError(labels->string() + ": bad label magic number " + hex(lmagic) + " (expected " +
                              hex(kIdxLabelMagic) + ")");
        }
        const std::uint32_t lcount = read_be32(lin, *labels, "item count");
        if (lcount < n) throw FormatError(labels->string() + ": fewer labels than images (length error)");
        std::vector<unsigned char> lbuf(n);
        if (!lin.read(reinterpret_cast<char*>(lbuf.data()), static_cast<std::streamsize>(n))) {
            throw FormatError(labels->string() + ": file truncated (length error)");
        }
        ds.labels.assign(lbuf.begin(), lbuf.end());
    }
    return ds;
}

void write_idx_images(const std::filesystem::path& path, const std::vector<DenseVector>& samples,
                      std::uint32_t rows, std::uint32_t cols) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    write_be32(out, kIdxImageMagic);
    write_be32(out, static_cast<std::uint32_t>(samples.size()));
    write_be32(out, rows);
    write_be32(out, cols);
    for (const DenseVector& x : samples) {
        if (x.size() != std::size_t{rows} * cols) throw ShapeError("write_idx_images: sample size mismatch");
        for (double v : x) {
            const double clamped = std::clamp(v, 0.0, 1.0);
            out.put(static_cast<char>(static_cast<unsigned char>(std::lround(clamped * 255.0))));
        }
    }
}

void write_idx_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    write_be32(out, kIdxLabelMagic);
    write_be32(out, static_cast<std::uint32_t>(labels.size()));
    for (int l : labels) out.put(static_cast<char>(static_cast<unsigned char>(l)));
}

ManifoldKind parse_manifold_kind(const std::string& name) {
    if (name == "noisy-circle") return ManifoldKind::noisy_circle;
    if (name == "two-blobs") return ManifoldKind::two_blobs;
    if (name == "linear-subspace") return ManifoldKind::linear_subspace;
    throw InvalidArgument("unknown synthetic manifold '" + name + "'");
}

const char* to_string(ManifoldKind kind) {
    switch (kind) {
        case ManifoldKind::noisy_circle: return "noisy-circle";
        case ManifoldKind::two_blobs: return "two-blobs";
        case ManifoldKind::linear_subspace: return "linear-subspace";
    }
    return "unknown";
}

DenseMatrix manifold_frame(std::size_t ambient_dim, std::uint64_t seed) {
    if (ambient_dim < 2) throw InvalidArgument("manifold_frame: ambient_dim must be at least 2");
    RngState rng(derive_seed(seed, 0x6672616d65));
    // Gram–Schmidt on two Gaussian columns.
    DenseVector a = sample_std_normal(rng, ambient_dim);
    DenseVector b = sample_std_normal(rng, ambient_dim);
    const double na = norm2(a);
    for (double& v : a) v /= na;
    const double proj = dot(a, b);
    for (std::size_t i = 0; i < ambient_dim; ++i) b[i] -= proj * a[i];
    const double nb = norm2(b);
    for (double& v : b) v /= nb;
    DenseMatrix frame(ambient_dim, 2);
    for (std::size_t i = 0; i < ambient_dim; ++i) {
        frame(i, 0) = a[i];
        frame(i, 1) = b[i];
    }
    return frame;
}

Dataset synth_manifold(const ManifoldSpec& spec) {
    if (spec.n == 0) throw InvalidArgument("synth_manifold: n must be at least 1");
    const std::size_t intrinsic = spec.kind == ManifoldKind::two_blobs ? 1 : 2;
    if (spec.ambient_dim < intrinsic) {
        throw InvalidArgument("synth_manifold: ambient_dim " + std::to_string(spec.ambient_dim) +
                              " is below the intrinsic dimension of " + to_string(spec.kind));
    }
    if (!(spec.noise_std >= 0.0) || !std::isfinite(spec.noise_std)) {
        throw InvalidArgument("synth_manifold: noise_std must be finite and non-negative");
    }
    if (!(spec.radius > 0.0) || !std::isfinite(spec.radius)) {
        throw InvalidArgument("synth_manifold: radius must be finite and positive");
    }

    Dataset ds;
    ds.name = to_string(spec.kind);
    ds.split = spec.stream == 0 ? Split::train : Split::test;
    ds.input_dim = spec.ambient_dim;
    ds.samples.reserve(spec.n);
    RngState rng(spec.stream == 0 ? spec.seed : derive_seed(spec.seed, spec.stream));

    const DenseMatrix frame =
        spec.kind == ManifoldKind::two_blobs ? DenseMatrix() : manifold_frame(spec.ambient_dim, spec.seed);
    for (std::size_t i = 0; i < spec.n; ++i) {
        DenseVector x(spec.ambient_dim, 0.0);
        switch (spec.kind) {
            case ManifoldKind::noisy_circle: {
                const double angle = 2.0 * std::numbers::pi * rng.uniform();
                const double c = spec.radius * std::cos(angle);
                const double s = spec.radius * std::sin(angle);
                for (std::size_t d = 0; d < x.size(); ++d) x[d] = c * frame(d, 0) + s * frame(d, 1);
                break;
            }
            case ManifoldKind::linear_subspace: {
                const double u = spec.radius * rng.normal();
                const double v = spec.radius * rng.normal();
                for (std::size_t d = 0; d < x.size(); ++d) x[d] = u * frame(d, 0) + v * frame(d, 1);
                break;
            }
            case ManifoldKind::two_blobs: {
                // Alternate classes so that every prefix is balanced.
                const int label = static_cast<int>(i % 2);
                x[0] = label == 0 ? spec.separation : -spec.separation;
                ds.labels.push_back(label);
                break;
            }
        }
        if (spec.noise_std > 0.0) {
            for (double& v : x) v += spec.noise_std * rng.normal();
        }
        ds.samples.push_back(std::move(x));
    }
    return ds;
}

}  // namespace pullback
