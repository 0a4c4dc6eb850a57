#include "pullback/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "pullback/csv.hpp"
#include "pullback/errors.hpp"

namespace pullback {

namespace {

constexpr std::string_view kMagic = "PBVAECKP";

class Writer {
public:
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
    void raw(std::string_view s) { out_.append(s); }
    std::string& bytes() { return out_; }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    std::string out_;
};

class Reader {
public:
    Reader(std::string_view bytes, const std::string& source) : in_(bytes), source_(source) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    double f64() { return std::bit_cast<double>(get(8)); }
    std::string_view raw(std::size_t n) {
        need(n);
        std::string_view s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    // Guards allocation sizes read from the file.
    std::size_t count(std::size_t limit, const char* what) {
        const std::uint64_t v = u64();
        if (v > limit) fail(std::string("implausible ") + what + " " + std::to_string(v));
        return static_cast<std::size_t>(v);
    }
    bool done() const { return pos_ == in_.size(); }
    [[noreturn]] void fail(const std::string& msg) const { throw FormatError(source_ + ": " + msg); }

private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) fail("checkpoint is truncated");
    }
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::string_view in_;
    std::string source_;
    std::size_t pos_ = 0;
};

constexpr std::size_t kMaxDim = std::size_t{1} << 24;

void write_network(Writer& w, const MlpNetwork& net) {
    w.u64(net.input_dim());
    w.u64(net.layers().size());
    for (const Layer& l : net.layers()) {
        w.u32(static_cast<std::uint32_t>(l.kind));
        w.u64(l.in_dim);
        w.u64(l.out_dim);
    }
}

void write_values(Writer& w, const MlpNetwork& net) {
    DenseVector p(net.parameter_count());
    net.copy_parameters(p);
    for (double v : p) w.f64(v);
    for (const Layer& l : net.layers()) {
        if (l.kind != LayerKind::frozen_norm) continue;
        for (double v : l.scale) w.f64(v);
        for (double v : l.shift) w.f64(v);
    }
}

MlpNetwork read_network(Reader& r) {
    const std::size_t input_dim = r.count(kMaxDim, "input dimension");
    const std::size_t n_layers = r.count(4096, "layer count");
    std::vector<Layer> layers;
    layers.reserve(n_layers);
    for (std::size_t i = 0; i < n_layers; ++i) {
        const std::uint32_t kind = r.u32();
        const std::size_t in = r.count(kMaxDim, "layer width");
        const std::size_t out = r.count(kMaxDim, "layer width");
        switch (kind) {
            case static_cast<std::uint32_t>(LayerKind::affine):
                layers.push_back(Layer::affine(DenseMatrix(out, in), DenseVector(out, 0.0)));
                break;
            case static_cast<std::uint32_t>(LayerKind::tanh):
            case static_cast<std::uint32_t>(LayerKind::sigmoid):
            case static_cast<std::uint32_t>(LayerKind::frozen_norm):
                if (in != out) r.fail("elementwise layer with differing widths");
                layers.push_back(kind == static_cast<std::uint32_t>(LayerKind::tanh)      ? Layer::tanh(in)
                                 : kind == static_cast<std::uint32_t>(LayerKind::sigmoid) ? Layer::sigmoid(in)
                                                                                          : Layer::frozen_norm(in));
                break;
            default:
                r.fail("unknown layer kind " + std::to_string(kind));
        }
    }
    try {
        return MlpNetwork(input_dim, std::move(layers));
    } catch (const Error& e) {
        r.fail(std::string("inconsistent architecture descriptor: ") + e.what());
    }
}

void read_values(Reader& r, MlpNetwork& net) {
    DenseVector p(net.parameter_count());
    for (double& v : p) v = r.f64();
    net.load_parameters(p);
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        if (net.layers()[i].kind != LayerKind::frozen_norm) continue;
        Layer& l = net.layer(i);
        for (double& v : l.scale) v = r.f64();
        for (double& v : l.shift) v = r.f64();
    }
}

std::string widths_text(const std::vector<std::size_t>& w) {
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "/" : "") + std::to_string(w[i]);
    return s;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string serialize_checkpoint(const VaeModel& model) {
    model.validate();
    Writer w;
    w.raw(kMagic);
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(model.likelihood));
    w.f64(model.beta);
    std::vector<const MlpNetwork*> nets{&model.encoder_trunk, &model.mu_head, &model.logsigma_head, &model.decoder};
    if (model.decoder_logsigma) nets.push_back(&*model.decoder_logsigma);
    w.u32(static_cast<std::uint32_t>(nets.size()));
    for (const MlpNetwork* n : nets) write_network(w, *n);
    for (const MlpNetwork* n : nets) write_values(w, *n);
    w.u64(fnv1a64(w.bytes()));
    return std::move(w.bytes());
}

VaeModel deserialize_checkpoint(std::string_view bytes, const std::string& source) {
    Reader r(bytes, source);
    if (bytes.size() < kMagic.size() + 8 || r.raw(kMagic.size()) != kMagic) r.fail("not a checkpoint (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        r.fail("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
               std::to_string(kCheckpointVersion) + ")");
    }
    const std::string_view body = bytes.substr(0, bytes.size() - 8);
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i)
        stored |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[body.size() + i])) << (8 * i);
    if (stored != fnv1a64(body)) r.fail("checksum mismatch, file is corrupt");

    VaeModel m;
    const std::uint32_t lik = r.u32();
    if (lik > static_cast<std::uint32_t>(Likelihood::gaussian)) r.fail("unknown likelihood code " + std::to_string(lik));
    m.likelihood = static_cast<Likelihood>(lik);
    m.beta = r.f64();
    const std::uint32_t n_nets = r.u32();
    if (n_nets != 4 && n_nets != 5) r.fail("expected 4 or 5 networks, found " + std::to_string(n_nets));
    m.encoder_trunk = read_network(r);
    m.mu_head = read_network(r);
    m.logsigma_head = read_network(r);
    m.decoder = read_network(r);
    if (n_nets == 5) m.decoder_logsigma = read_network(r);
    read_values(r, m.encoder_trunk);
    read_values(r, m.mu_head);
    read_values(r, m.logsigma_head);
    read_values(r, m.decoder);
    if (m.decoder_logsigma) read_values(r, *m.decoder_logsigma);
    r.u64();
    if (!r.done()) r.fail("trailing bytes after checksum");
    try {
        m.validate();
    } catch (const Error& e) {
        r.fail(std::string("inconsistent model: ") + e.what());
    }
    return m;
}

void save_checkpoint(const std::filesystem::path& path, const VaeModel& model) {
    write_file_atomic(path, serialize_checkpoint(model));
}

VaeModel load_checkpoint(const std::filesystem::path& path) {
    return deserialize_checkpoint(read_file(path), path.string());
}

Architecture architecture_of(const VaeModel& model) {
    Architecture a;
    for (const Layer& l : model.encoder_trunk.layers()) {
        if (l.kind == LayerKind::affine) a.encoder_hidden.push_back(l.out_dim);
        if (l.kind == LayerKind::frozen_norm) a.normalization = true;
    }
    a.latent_dim = model.latent_dim();
    a.decoder_sigma = model.decoder_logsigma.has_value();
    return a;
}

void require_architecture(const VaeModel& model, const Architecture& expected, std::size_t input_dim) {
    const Architecture a = architecture_of(model);
    if (model.input_dim() != input_dim) {
        throw FormatError("checkpoint expects input dimension " + std::to_string(model.input_dim()) +
                          ", data has " + std::to_string(input_dim));
    }
    if (a.encoder_hidden != expected.encoder_hidden || a.latent_dim != expected.latent_dim ||
        a.normalization != expected.normalization || a.decoder_sigma != expected.decoder_sigma) {
        throw FormatError("checkpoint architecture " + widths_text(a.encoder_hidden) + " latent " +
                          std::to_string(a.latent_dim) + " does not match the configured " +
                          widths_text(expected.encoder_hidden) + " latent " + std::to_string(expected.latent_dim));
    }
}

}  // namespace pullback
