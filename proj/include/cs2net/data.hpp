#ifndef CS2NET_DATA_HPP
#define CS2NET_DATA_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cs2net/tensor.hpp"

namespace cs2net {

// ---------------------------------------------------------------------------
// Sample
// ---------------------------------------------------------------------------

struct SampleMeta {
    std::uint64_t seed = 0;
    double noise_variance = 0.0;  // on the 0-255 intensity scale
};

struct Sample {
    Tensor<float> input;                      // [1, spatial...], values in [0,1]
    Tensor<float> mask;                       // [1, spatial...], values in {0,1}
    std::optional<Tensor<float>> centerline;  // same shape, {0,1}
    SampleMeta meta;
};

// ---------------------------------------------------------------------------
// SynthConfig
// ---------------------------------------------------------------------------

struct SynthConfig {
    int dims = 2;
    std::vector<Index> size;  // per axis (H,W) or (H,W,D)
    int min_curves = 2, max_curves = 5;  // curve count (2D) / root count (3D)
    double min_width = 1.5, max_width = 4.0;  // stroke width (2D) / tube radius (3D)
    double bifurcation_prob = 0.6;            // 3D only
    int max_depth = 4;                        // 3D only
    double fg_mean = 200.0, bg_mean = 60.0;   // 0-255 intensities
    double noise_variance = 0.0;              // sigma^2 on the 0-255 scale
    std::uint64_t seed = 0;

    void validate() const {
        if (dims != 2 && dims != 3) throw ConfigError("SynthConfig: dims must be 2 or 3");
        if (size.size() != static_cast<size_t>(dims))
            throw ConfigError("SynthConfig: size must have one entry per axis");
        if (min_width < 1.0) throw ConfigError("SynthConfig: widths must be >= 1");
        if (noise_variance < 0) throw ConfigError("SynthConfig: noise variance must be >= 0");
    }
};

Sample synth_2d(const SynthConfig& cfg);
Sample synth_3d(const SynthConfig& cfg);

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

struct AugmentConfig {
    std::vector<Index> crop;  // empty = no crop; else per spatial axis
    double rotation_deg = 45.0;  // rotation drawn from [-r, +r]; 2D only
    bool flip_horizontal = true;
    bool flip_vertical = true;
    bool mirror = true;  // mirror flip about the image centre (2D transpose-free flip combo)
    bool contrast = true;  // random gamma in [0.7, 1.3]
    bool enabled = true;   // false = test-set pathway, sample passes through untouched
};

Sample augment(const Sample& s, const AugmentConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// Splits and I/O
// ---------------------------------------------------------------------------

std::vector<std::vector<int>> kfold_split(int n, int k, std::uint64_t seed);

// 8-bit binary PGM (P5). Reads normalize to [0,1]; mask writes use {0,255}.
void write_pgm(const std::string& path, const std::vector<std::uint8_t>& pixels, int height,
               int width);
std::vector<std::uint8_t> read_pgm(const std::string& path, int& height, int& width);

Tensor<float> read_image(const std::string& path);               // [1,H,W] in [0,1]
void write_image(const std::string& path, const Tensor<float>& img);  // clamps to [0,1]

// VOL1: text header (magic, dims, dtype) + raw little-endian payload.
// dtype "f32le" for intensities, "u8" for masks stored {0,255}.
Tensor<float> read_volume(const std::string& path);               // [1,H,W,D] in [0,1]
void write_volume(const std::string& path, const Tensor<float>& vol, bool as_mask);

// Manifest: one tab-separated line per sample: input, mask, optional centerline.
struct ManifestEntry {
    std::string input;
    std::string mask;
    std::string centerline;  // may be empty
};
std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

Sample load_sample(const ManifestEntry& e, int dims);

}  // namespace cs2net

#endif
