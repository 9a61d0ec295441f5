#ifndef CS2NET_MODEL_HPP
#define CS2NET_MODEL_HPP

#include <array>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "cs2net/attention.hpp"

namespace cs2net {

// ---------------------------------------------------------------------------
// ModelConfig
// ---------------------------------------------------------------------------

struct ModelConfig {
    int dims = 2;  // 2 or 3
    int in_channels = 1;
    int base_width = 0;  // 0 -> default per dims (32 for 2D, 16 for 3D)
    static constexpr int levels = 4;
    bool sab_enabled = true;
    bool cab_enabled = true;
    bool capture_attention = false;

    int width() const { return base_width > 0 ? base_width : (dims == 2 ? 32 : 16); }

    void validate() const {
        if (dims != 2 && dims != 3) throw ConfigError("ModelConfig: dims must be 2 or 3");
        if (in_channels < 1) throw ConfigError("ModelConfig: in_channels must be >= 1");
        if (base_width < 0) throw ConfigError("ModelConfig: base_width must be >= 1");
    }
};

// ---------------------------------------------------------------------------
// Model: 4-level residual encoder, CSAM bottleneck, 4-level decoder with
// skip concatenation, 1x1(x1) conv + sigmoid head.
// ---------------------------------------------------------------------------

template <class T>
class Model {
public:
    Model() = default;

    Model(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
        cfg_.validate();
        int w = cfg_.width();
        int sr = cfg_.dims;
        int in_ch = cfg_.in_channels;
        for (int i = 0; i < ModelConfig::levels; ++i) {
            int out_ch = w << i;
            enc_.emplace_back(in_ch, out_ch, sr, rng);
            in_ch = out_ch;
        }
        int deep = w << (ModelConfig::levels - 1);
        csam_ = CSAM<T>(cfg_.dims, deep, cfg_.sab_enabled, cfg_.cab_enabled, rng);
        int cur = deep;
        for (int i = ModelConfig::levels - 1; i >= 0; --i) {
            int skip_ch = w << i;
            ups_.emplace_back(cur, skip_ch, sr, rng);
            dec_.emplace_back(2 * skip_ch, skip_ch, sr, rng);
            cur = skip_ch;
        }
        std::vector<int> k1(static_cast<size_t>(sr), 1);
        std::vector<int> p0(static_cast<size_t>(sr), 0);
        head_ = Conv<T>(ConvSpec::make(w, 1, k1, p0), rng);
    }

    const ModelConfig& config() const { return cfg_; }

    void set_training(bool on) { training_ = on; }
    void set_capture_attention(bool on) { cfg_.capture_attention = on; }
    bool training() const { return training_; }

    AttentionMapCapture& capture() { return capture_; }

    // x: [B, in_channels, spatial...] with spatial dims divisible by 2^levels.
    Tensor<T> forward(const Tensor<T>& x) {
        int sr = cfg_.dims;
        if (x.rank() != sr + 2)
            throw DimensionError("model forward: expected rank " + std::to_string(sr + 2) +
                                 " input [B,C,spatial], got " + x.shape().str());
        Index div = Index(1) << ModelConfig::levels;
        for (Index a = 2; a < x.rank(); ++a)
            if (x.shape()[a] % div != 0)
                throw DimensionError("model forward: spatial dim " + std::to_string(x.shape()[a]) +
                                     " not divisible by " + std::to_string(div));

        capture_.enabled = cfg_.capture_attention;
        std::vector<Tensor<T>> skips;
        Tensor<T> cur = x;
        for (auto& block : enc_) {
            cur = block.forward(cur, training_);
            skips.push_back(cur);
            cur = max_pool(cur, sr);
        }
        cur = csam_.forward(cur, training_, cfg_.capture_attention ? &capture_ : nullptr);
        for (int i = 0; i < ModelConfig::levels; ++i) {
            cur = ups_[static_cast<size_t>(i)].forward(cur);
            cur = concat(cur, skips[static_cast<size_t>(ModelConfig::levels - 1 - i)], Index(1));
            cur = dec_[static_cast<size_t>(i)].forward(cur, training_);
        }
        return sigmoid(head_.forward(cur));
    }

    ParamMap<T> named_parameters() const {
        ParamMap<T> out;
        for (size_t i = 0; i < enc_.size(); ++i) enc_[i].collect(out, "enc" + std::to_string(i));
        csam_.collect(out, "csam");
        for (size_t i = 0; i < ups_.size(); ++i) {
            ups_[i].collect(out, "up" + std::to_string(i));
            dec_[i].collect(out, "dec" + std::to_string(i));
        }
        head_.collect(out, "head");
        return out;
    }

    ParamMap<T> named_buffers() const {
        ParamMap<T> out;
        for (size_t i = 0; i < enc_.size(); ++i)
            enc_[i].collect_buffers(out, "enc" + std::to_string(i));
        csam_.collect_buffers(out, "csam");
        for (size_t i = 0; i < dec_.size(); ++i)
            dec_[i].collect_buffers(out, "dec" + std::to_string(i));
        return out;
    }

    Index parameter_count() const {
        Index n = 0;
        for (const auto& [name, t] : named_parameters()) n += t.numel();
        return n;
    }

    std::vector<int> encoder_widths() const {
        std::vector<int> w;
        for (int i = 0; i < ModelConfig::levels; ++i) w.push_back(cfg_.width() << i);
        return w;
    }

private:
    ModelConfig cfg_;
    std::vector<ResidualBlock<T>> enc_;
    CSAM<T> csam_;
    std::vector<TConv<T>> ups_;
    std::vector<ResidualBlock<T>> dec_;
    Conv<T> head_;
    bool training_ = true;
    AttentionMapCapture capture_;
};

// ---------------------------------------------------------------------------
// Checkpoint: little-endian binary.
//   magic "CS2N", u32 version, config block, u64 iteration,
//   u32 tensor count, then per tensor:
//     u16 name length, name bytes, u8 rank, u32 dims..., f32 data.
// Parameters and batch-norm buffers are stored in one flat list; optimizer
// state rides along as extra tensors prefixed "adam.".
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class V>
void write_pod(std::ostream& os, V v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <class V>
V read_pod(std::istream& is) {
    V v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(V));
    if (!is) throw ParseError("checkpoint: truncated file");
    return v;
}

inline void write_named_f32(std::ostream& os, const std::string& name, const Shape& shape,
                            const float* data) {
    write_pod<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(shape.rank()));
    for (Index d : shape.dims) write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    os.write(reinterpret_cast<const char*>(data),
             static_cast<std::streamsize>(shape.numel() * sizeof(float)));
}

struct NamedF32 {
    std::string name;
    Shape shape;
    std::vector<float> data;
};

inline NamedF32 read_named_f32(std::istream& is) {
    NamedF32 t;
    auto len = read_pod<std::uint16_t>(is);
    t.name.resize(len);
    is.read(t.name.data(), len);
    auto rank = read_pod<std::uint8_t>(is);
    std::vector<Index> dims;
    for (int i = 0; i < rank; ++i) dims.push_back(static_cast<Index>(read_pod<std::uint32_t>(is)));
    t.shape = Shape(dims);
    t.data.resize(static_cast<size_t>(t.shape.numel()));
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!is) throw ParseError("checkpoint: truncated tensor payload for '" + t.name + "'");
    return t;
}

}  // namespace detail

struct CheckpointExtra {
    // extra named tensors (e.g. optimizer state); stored after model tensors
    std::vector<detail::NamedF32> tensors;
};

template <class T>
void save_checkpoint(const Model<T>& model, const std::string& path, std::uint64_t iteration = 0,
                     const CheckpointExtra* extra = nullptr) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParseError("cannot open " + path + " for writing");
    os.write("CS2N", 4);
    detail::write_pod<std::uint32_t>(os, kCheckpointVersion);
    const ModelConfig& c = model.config();
    detail::write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(c.dims));
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(c.in_channels));
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(c.width()));
    detail::write_pod<std::uint8_t>(os, c.sab_enabled ? 1 : 0);
    detail::write_pod<std::uint8_t>(os, c.cab_enabled ? 1 : 0);
    detail::write_pod<std::uint64_t>(os, iteration);

    ParamMap<T> params = model.named_parameters();
    ParamMap<T> buffers = model.named_buffers();
    std::uint32_t count = static_cast<std::uint32_t>(params.size() + buffers.size() +
                                                     (extra ? extra->tensors.size() : 0));
    detail::write_pod<std::uint32_t>(os, count);
    auto write_tensor = [&os](const std::string& name, const Tensor<T>& t) {
        std::vector<float> f32(t.data().begin(), t.data().end());
        detail::write_named_f32(os, name, t.shape(), f32.data());
    };
    for (const auto& [name, t] : params) write_tensor(name, t);
    for (const auto& [name, t] : buffers) write_tensor(name, t);
    if (extra)
        for (const auto& t : extra->tensors) detail::write_named_f32(os, t.name, t.shape, t.data.data());
    if (!os) throw ParseError("checkpoint: write failure on " + path);
}

struct LoadedCheckpoint {
    ModelConfig config;
    std::uint64_t iteration = 0;
    std::vector<detail::NamedF32> extra;  // tensors not matched to the model
};

// Rebuilds a model from the stored config and fills its parameters/buffers.
// Every model tensor must be present with a matching shape.
template <class T>
LoadedCheckpoint load_checkpoint(const std::string& path, Model<T>& out_model) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "CS2N", 4) != 0)
        throw ParseError("checkpoint: bad magic in " + path);
    auto version = detail::read_pod<std::uint32_t>(is);
    if (version != kCheckpointVersion)
        throw ParseError("checkpoint: unsupported version " + std::to_string(version));

    LoadedCheckpoint lc;
    lc.config.dims = detail::read_pod<std::uint8_t>(is);
    lc.config.in_channels = static_cast<int>(detail::read_pod<std::uint32_t>(is));
    lc.config.base_width = static_cast<int>(detail::read_pod<std::uint32_t>(is));
    lc.config.sab_enabled = detail::read_pod<std::uint8_t>(is) != 0;
    lc.config.cab_enabled = detail::read_pod<std::uint8_t>(is) != 0;
    lc.iteration = detail::read_pod<std::uint64_t>(is);

    Rng rng(0);
    out_model = Model<T>(lc.config, rng);

    ParamMap<T> dest = out_model.named_parameters();
    for (auto& [name, t] : out_model.named_buffers()) dest.emplace_back(name, t);

    auto count = detail::read_pod<std::uint32_t>(is);
    std::vector<bool> filled(dest.size(), false);
    for (std::uint32_t i = 0; i < count; ++i) {
        detail::NamedF32 t = detail::read_named_f32(is);
        bool matched = false;
        for (size_t d = 0; d < dest.size(); ++d) {
            if (dest[d].first != t.name) continue;
            if (dest[d].second.shape() != t.shape)
                throw ParseError("checkpoint: shape mismatch for '" + t.name + "': file has " +
                                 t.shape.str() + ", model expects " + dest[d].second.shape().str());
            std::copy(t.data.begin(), t.data.end(), dest[d].second.data().begin());
            filled[d] = true;
            matched = true;
            break;
        }
        if (!matched) lc.extra.push_back(std::move(t));
    }
    for (size_t d = 0; d < dest.size(); ++d)
        if (!filled[d])
            throw ParseError("checkpoint: missing tensor '" + dest[d].first + "' in " + path);
    return lc;
}

// Loads parameters into an already-built model. The first stored tensor that
// is absent from the model or disagrees in shape aborts the load, named.
template <class T>
LoadedCheckpoint apply_checkpoint(const std::string& path, Model<T>& model) {
    LoadedCheckpoint lc;
    {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw ParseError("cannot open " + path);
        char magic[4];
        is.read(magic, 4);
        if (!is || std::memcmp(magic, "CS2N", 4) != 0)
            throw ParseError("checkpoint: bad magic in " + path);
        auto version = detail::read_pod<std::uint32_t>(is);
        if (version != kCheckpointVersion)
            throw ParseError("checkpoint: unsupported version " + std::to_string(version));
        lc.config.dims = detail::read_pod<std::uint8_t>(is);
        lc.config.in_channels = static_cast<int>(detail::read_pod<std::uint32_t>(is));
        lc.config.base_width = static_cast<int>(detail::read_pod<std::uint32_t>(is));
        lc.config.sab_enabled = detail::read_pod<std::uint8_t>(is) != 0;
        lc.config.cab_enabled = detail::read_pod<std::uint8_t>(is) != 0;
        lc.iteration = detail::read_pod<std::uint64_t>(is);

        ParamMap<T> dest = model.named_parameters();
        for (auto& [name, t] : model.named_buffers()) dest.emplace_back(name, t);
        std::vector<bool> filled(dest.size(), false);
        auto count = detail::read_pod<std::uint32_t>(is);
        for (std::uint32_t i = 0; i < count; ++i) {
            detail::NamedF32 t = detail::read_named_f32(is);
            if (t.name.rfind("adam.", 0) == 0) {
                lc.extra.push_back(std::move(t));
                continue;
            }
            bool matched = false;
            for (size_t d = 0; d < dest.size(); ++d) {
                if (dest[d].first != t.name) continue;
                if (dest[d].second.shape() != t.shape)
                    throw ParseError("checkpoint: shape mismatch for '" + t.name + "': file has " +
                                     t.shape.str() + ", model expects " +
                                     dest[d].second.shape().str());
                std::copy(t.data.begin(), t.data.end(), dest[d].second.data().begin());
                filled[d] = true;
                matched = true;
                break;
            }
            if (!matched)
                throw ParseError("checkpoint: tensor '" + t.name + "' has no home in this model");
        }
        for (size_t d = 0; d < dest.size(); ++d)
            if (!filled[d])
                throw ParseError("checkpoint: missing tensor '" + dest[d].first + "' in " + path);
    }
    return lc;
}

}  // namespace cs2net

#endif
