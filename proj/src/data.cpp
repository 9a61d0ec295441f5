#include "cs2net/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

namespace cs2net {

namespace fs = std::filesystem;

namespace {

struct Vec2 {
    double y, x;
};
struct Vec3 {
    double y, x, z;
};

// Centripetal-free Catmull-Rom on four control points.
Vec2 catmull_rom(const Vec2& p0, const Vec2& p1, const Vec2& p2, const Vec2& p3, double t) {
    double t2 = t * t, t3 = t2 * t;
    auto comp = [&](double a, double b, double c, double d) {
        return 0.5 * ((2 * b) + (-a + c) * t + (2 * a - 5 * b + 4 * c - d) * t2 +
                      (-a + 3 * b - 3 * c + d) * t3);
    };
    return {comp(p0.y, p1.y, p2.y, p3.y), comp(p0.x, p1.x, p2.x, p3.x)};
}

// Stamp a disk of radius w/2 around p: set mask, update the Gaussian
// cross-section profile, and mark the nearest pixel as centerline.
void stamp_2d(const Vec2& p, double width, Index H, Index W, std::vector<std::uint8_t>& mask,
              std::vector<float>& profile, std::vector<std::uint8_t>& centerline) {
    double r = width / 2.0;
    double sigma = std::max(r / 2.0, 0.5);
    int y0 = std::max(0, static_cast<int>(std::floor(p.y - r - 1)));
    int y1 = std::min(static_cast<int>(H) - 1, static_cast<int>(std::ceil(p.y + r + 1)));
    int x0 = std::max(0, static_cast<int>(std::floor(p.x - r - 1)));
    int x1 = std::min(static_cast<int>(W) - 1, static_cast<int>(std::ceil(p.x + r + 1)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            double dy = y - p.y, dx = x - p.x;
            double d = std::sqrt(dy * dy + dx * dx);
            if (d <= r) {
                size_t idx = static_cast<size_t>(y) * static_cast<size_t>(W) + x;
                mask[idx] = 1;
                float v = static_cast<float>(std::exp(-(d * d) / (2.0 * sigma * sigma)));
                profile[idx] = std::max(profile[idx], v);
            }
        }
    int cy = static_cast<int>(std::lround(p.y)), cx = static_cast<int>(std::lround(p.x));
    if (cy >= 0 && cy < H && cx >= 0 && cx < W) {
        size_t idx = static_cast<size_t>(cy) * static_cast<size_t>(W) + cx;
        centerline[idx] = 1;
        mask[idx] = 1;
        profile[idx] = std::max(profile[idx], 1.0f);
    }
}

void stamp_3d(const Vec3& p, double radius, Index H, Index W, Index D,
              std::vector<std::uint8_t>& mask, std::vector<float>& profile,
              std::vector<std::uint8_t>& centerline) {
    double sigma = std::max(radius / 2.0, 0.5);
    int y0 = std::max(0, static_cast<int>(std::floor(p.y - radius - 1)));
    int y1 = std::min(static_cast<int>(H) - 1, static_cast<int>(std::ceil(p.y + radius + 1)));
    int x0 = std::max(0, static_cast<int>(std::floor(p.x - radius - 1)));
    int x1 = std::min(static_cast<int>(W) - 1, static_cast<int>(std::ceil(p.x + radius + 1)));
    int z0 = std::max(0, static_cast<int>(std::floor(p.z - radius - 1)));
    int z1 = std::min(static_cast<int>(D) - 1, static_cast<int>(std::ceil(p.z + radius + 1)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            for (int z = z0; z <= z1; ++z) {
                double dy = y - p.y, dx = x - p.x, dz = z - p.z;
                double d = std::sqrt(dy * dy + dx * dx + dz * dz);
                if (d <= radius) {
                    size_t idx = (static_cast<size_t>(y) * W + x) * static_cast<size_t>(D) + z;
                    mask[idx] = 1;
                    float v = static_cast<float>(std::exp(-(d * d) / (2.0 * sigma * sigma)));
                    profile[idx] = std::max(profile[idx], v);
                }
            }
    int cy = static_cast<int>(std::lround(p.y)), cx = static_cast<int>(std::lround(p.x)),
        cz = static_cast<int>(std::lround(p.z));
    if (cy >= 0 && cy < H && cx >= 0 && cx < W && cz >= 0 && cz < D) {
        size_t idx = (static_cast<size_t>(cy) * W + cx) * static_cast<size_t>(D) + cz;
        centerline[idx] = 1;
        mask[idx] = 1;
        profile[idx] = std::max(profile[idx], 1.0f);
    }
}

Sample finalize(const SynthConfig& cfg, std::vector<float> profile,
                std::vector<std::uint8_t> mask, std::vector<std::uint8_t> centerline, Rng& rng) {
    size_t n = profile.size();
    std::vector<float> img(n);
    std::normal_distribution<double> noise(0.0, std::sqrt(cfg.noise_variance));
    for (size_t i = 0; i < n; ++i) {
        double v255 = cfg.bg_mean + (cfg.fg_mean - cfg.bg_mean) * profile[i];
        if (cfg.noise_variance > 0) v255 += noise(rng);
        v255 = std::clamp(v255, 0.0, 255.0);
        img[i] = static_cast<float>(v255 / 255.0);
    }
    std::vector<Index> dims = {1};
    dims.insert(dims.end(), cfg.size.begin(), cfg.size.end());
    Shape shape(dims);
    Sample s;
    s.input = Tensor<float>::from_vector(shape, std::move(img));
    std::vector<float> m(n), c(n);
    for (size_t i = 0; i < n; ++i) {
        m[i] = mask[i] ? 1.0f : 0.0f;
        c[i] = centerline[i] ? 1.0f : 0.0f;
    }
    s.mask = Tensor<float>::from_vector(shape, std::move(m));
    s.centerline = Tensor<float>::from_vector(shape, std::move(c));
    s.meta.seed = cfg.seed;
    s.meta.noise_variance = cfg.noise_variance;
    return s;
}

}  // namespace

Sample synth_2d(const SynthConfig& cfg) {
    cfg.validate();
    if (cfg.dims != 2) throw ConfigError("synth_2d: dims must be 2");
    Index H = cfg.size[0], W = cfg.size[1];
    size_t n = static_cast<size_t>(H * W);
    std::vector<std::uint8_t> mask(n, 0), centerline(n, 0);
    std::vector<float> profile(n, 0.0f);
    Rng rng(cfg.seed);

    int count = cfg.min_curves == cfg.max_curves
                    ? cfg.min_curves
                    : static_cast<int>(std::uniform_int_distribution<int>(
                          cfg.min_curves, cfg.max_curves)(rng));
    if (count <= 0)
        std::cerr << "warning: synth_2d generated an empty-foreground sample (zero curves)\n";

    std::uniform_real_distribution<double> posy(0.05 * H, 0.95 * H);
    std::uniform_real_distribution<double> posx(0.05 * W, 0.95 * W);
    std::uniform_real_distribution<double> wdist(cfg.min_width, cfg.max_width);
    for (int cidx = 0; cidx < count; ++cidx) {
        double width = wdist(rng);
        // 6 control points forming a loose spline across the image
        std::vector<Vec2> ctrl(6);
        for (auto& p : ctrl) p = {posy(rng), posx(rng)};
        // dense samples; step ~0.4 px keeps the trace 8-connected
        for (size_t seg = 0; seg + 3 < ctrl.size() + 0; ++seg) {
            const Vec2 &p0 = ctrl[seg], &p1 = ctrl[seg + 1], &p2 = ctrl[seg + 2],
                       &p3 = ctrl[seg + 3];
            double seg_len = std::hypot(p2.y - p1.y, p2.x - p1.x);
            int steps = std::max(8, static_cast<int>(seg_len / 0.4));
            for (int i = 0; i <= steps; ++i) {
                Vec2 p = catmull_rom(p0, p1, p2, p3, static_cast<double>(i) / steps);
                if (p.y < -width || p.y > H + width || p.x < -width || p.x > W + width) continue;
                stamp_2d(p, width, H, W, mask, profile, centerline);
            }
        }
    }
    return finalize(cfg, std::move(profile), std::move(mask), std::move(centerline), rng);
}

namespace {

struct TubeSegment {
    Vec3 start, dir;  // dir normalized
    double length;
    double radius;
    int depth;
};

}  // namespace

Sample synth_3d(const SynthConfig& cfg) {
    cfg.validate();
    if (cfg.dims != 3) throw ConfigError("synth_3d: dims must be 3");
    Index H = cfg.size[0], W = cfg.size[1], D = cfg.size[2];
    size_t n = static_cast<size_t>(H * W * D);
    std::vector<std::uint8_t> mask(n, 0), centerline(n, 0);
    std::vector<float> profile(n, 0.0f);
    Rng rng(cfg.seed);

    int roots = cfg.min_curves == cfg.max_curves
                    ? cfg.min_curves
                    : static_cast<int>(std::uniform_int_distribution<int>(
                          cfg.min_curves, cfg.max_curves)(rng));
    if (roots <= 0)
        std::cerr << "warning: synth_3d generated an empty-foreground sample (zero trees)\n";

    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_real_distribution<double> rdist(cfg.min_width, cfg.max_width);
    double min_dim = static_cast<double>(std::min({H, W, D}));

    auto rand_unit = [&](Rng& r) {
        std::normal_distribution<double> g(0.0, 1.0);
        Vec3 v{g(r), g(r), g(r)};
        double norm = std::sqrt(v.y * v.y + v.x * v.x + v.z * v.z);
        if (norm < 1e-9) return Vec3{1, 0, 0};
        return Vec3{v.y / norm, v.x / norm, v.z / norm};
    };
    auto perturb = [&](const Vec3& d, double amount, Rng& r) {
        Vec3 q = rand_unit(r);
        Vec3 v{d.y + amount * q.y, d.x + amount * q.x, d.z + amount * q.z};
        double norm = std::sqrt(v.y * v.y + v.x * v.x + v.z * v.z);
        return Vec3{v.y / norm, v.x / norm, v.z / norm};
    };

    for (int t = 0; t < roots; ++t) {
        std::vector<TubeSegment> queue;
        Vec3 start{0.1 * H + 0.8 * H * u01(rng), 0.1 * W + 0.8 * W * u01(rng),
                   0.1 * D + 0.8 * D * u01(rng)};
        queue.push_back({start, rand_unit(rng), min_dim * (0.25 + 0.25 * u01(rng)), rdist(rng), 0});
        while (!queue.empty()) {
            TubeSegment seg = queue.back();
            queue.pop_back();
            // slight curvature: bend the direction every few steps
            Vec3 p = seg.start, d = seg.dir;
            double step = 0.4;
            int steps = static_cast<int>(seg.length / step);
            for (int i = 0; i <= steps; ++i) {
                if (p.y < -seg.radius || p.y > H + seg.radius || p.x < -seg.radius ||
                    p.x > W + seg.radius || p.z < -seg.radius || p.z > D + seg.radius)
                    break;
                stamp_3d(p, seg.radius, H, W, D, mask, profile, centerline);
                if (i % 16 == 15) d = perturb(d, 0.15, rng);
                p = {p.y + d.y * step, p.x + d.x * step, p.z + d.z * step};
            }
            if (seg.depth + 1 >= cfg.max_depth) continue;
            double child_len = seg.length * 0.7;
            if (child_len < 3.0) continue;
            bool bifurcate = u01(rng) < cfg.bifurcation_prob;
            int children = bifurcate ? 2 : 1;
            for (int c = 0; c < children; ++c) {
                double child_r = std::max(1.0, seg.radius * (bifurcate ? 0.75 : 0.85));
                Vec3 cd = perturb(d, bifurcate ? 0.8 : 0.2, rng);
                queue.push_back({p, cd, child_len, child_r, seg.depth + 1});
            }
        }
    }
    return finalize(cfg, std::move(profile), std::move(mask), std::move(centerline), rng);
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

namespace {

std::vector<Index> spatial_of(const Tensor<float>& t) {
    return {t.shape().dims.begin() + 1, t.shape().dims.end()};
}

Tensor<float> rotate_2d(const Tensor<float>& t, double angle_rad, bool bilinear, float fill) {
    auto sp = spatial_of(t);
    Index H = sp[0], W = sp[1];
    double cy = (H - 1) / 2.0, cx = (W - 1) / 2.0;
    double ca = std::cos(angle_rad), sa = std::sin(angle_rad);
    std::vector<float> out(t.data().size(), fill);
    const auto& src = t.data();
    for (Index y = 0; y < H; ++y)
        for (Index x = 0; x < W; ++x) {
            // inverse map: rotate output coordinate back into the source
            double sy = ca * (y - cy) + sa * (x - cx) + cy;
            double sx = -sa * (y - cy) + ca * (x - cx) + cx;
            float v;
            if (bilinear) {
                Index y0 = static_cast<Index>(std::floor(sy)), x0 = static_cast<Index>(std::floor(sx));
                if (y0 < -1 || y0 > H - 1 || x0 < -1 || x0 > W - 1) continue;
                double fy = sy - y0, fx = sx - x0;
                auto px = [&](Index yy, Index xx) -> double {
                    if (yy < 0 || yy >= H || xx < 0 || xx >= W) return fill;
                    return src[static_cast<size_t>(yy * W + xx)];
                };
                v = static_cast<float>((1 - fy) * ((1 - fx) * px(y0, x0) + fx * px(y0, x0 + 1)) +
                                       fy * ((1 - fx) * px(y0 + 1, x0) + fx * px(y0 + 1, x0 + 1)));
            } else {
                Index yy = static_cast<Index>(std::lround(sy)), xx = static_cast<Index>(std::lround(sx));
                if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
                v = src[static_cast<size_t>(yy * W + xx)];
            }
            out[static_cast<size_t>(y * W + x)] = v;
        }
    return Tensor<float>::from_vector(t.shape(), std::move(out));
}

// Flip along spatial axis `axis` (0-based within the spatial dims).
Tensor<float> flip_axis(const Tensor<float>& t, int axis) {
    auto sp = spatial_of(t);
    int sr = static_cast<int>(sp.size());
    std::vector<Index> strides(static_cast<size_t>(sr), 1);
    for (int a = sr - 2; a >= 0; --a) strides[static_cast<size_t>(a)] = strides[static_cast<size_t>(a + 1)] * sp[static_cast<size_t>(a + 1)];
    Index total = 1;
    for (Index d : sp) total *= d;
    std::vector<float> out(t.data().size());
    const auto& src = t.data();
    for (Index i = 0; i < total; ++i) {
        Index rem = i, j = 0;
        for (int a = 0; a < sr; ++a) {
            Index c = rem / strides[static_cast<size_t>(a)];
            rem %= strides[static_cast<size_t>(a)];
            if (a == axis) c = sp[static_cast<size_t>(a)] - 1 - c;
            j += c * strides[static_cast<size_t>(a)];
        }
        out[static_cast<size_t>(j)] = src[static_cast<size_t>(i)];
    }
    return Tensor<float>::from_vector(t.shape(), std::move(out));
}

Tensor<float> crop_at(const Tensor<float>& t, const std::vector<Index>& origin,
                      const std::vector<Index>& size) {
    auto sp = spatial_of(t);
    int sr = static_cast<int>(sp.size());
    std::vector<Index> odims = {1};
    odims.insert(odims.end(), size.begin(), size.end());
    Index total = 1;
    for (Index d : size) total *= d;
    std::vector<float> out(static_cast<size_t>(total));
    const auto& src = t.data();
    if (sr == 2) {
        Index W = sp[1];
        for (Index y = 0; y < size[0]; ++y)
            for (Index x = 0; x < size[1]; ++x)
                out[static_cast<size_t>(y * size[1] + x)] =
                    src[static_cast<size_t>((origin[0] + y) * W + origin[1] + x)];
    } else {
        Index W = sp[1], D = sp[2];
        for (Index y = 0; y < size[0]; ++y)
            for (Index x = 0; x < size[1]; ++x)
                for (Index z = 0; z < size[2]; ++z)
                    out[static_cast<size_t>((y * size[1] + x) * size[2] + z)] =
                        src[static_cast<size_t>(((origin[0] + y) * W + origin[1] + x) * D +
                                                origin[2] + z)];
    }
    return Tensor<float>::from_vector(Shape(odims), std::move(out));
}

}  // namespace

Sample augment(const Sample& s, const AugmentConfig& cfg, Rng& rng) {
    if (!cfg.enabled) return s;
    auto sp = spatial_of(s.input);
    int sr = static_cast<int>(sp.size());

    Sample out = s;
    auto apply_all = [&](auto&& fn) {
        out.input = fn(out.input, true);
        out.mask = fn(out.mask, false);
        if (out.centerline) out.centerline = fn(*out.centerline, false);
    };

    if (sr == 2 && cfg.rotation_deg > 0) {
        std::uniform_real_distribution<double> adist(-cfg.rotation_deg, cfg.rotation_deg);
        double angle = adist(rng) * M_PI / 180.0;
        // background mean of the input fills exposed corners
        double bg = 0;
        for (float v : out.input.data()) bg += v;
        bg /= static_cast<double>(out.input.numel());
        apply_all([&](const Tensor<float>& t, bool intensity) {
            return rotate_2d(t, angle, intensity, intensity ? static_cast<float>(bg) : 0.0f);
        });
    }
    if (cfg.flip_horizontal && std::uniform_int_distribution<int>(0, 1)(rng)) {
        apply_all([&](const Tensor<float>& t, bool) { return flip_axis(t, sr - 1); });
    }
    if (cfg.flip_vertical && std::uniform_int_distribution<int>(0, 1)(rng)) {
        apply_all([&](const Tensor<float>& t, bool) { return flip_axis(t, 0); });
    }
    if (cfg.mirror && std::uniform_int_distribution<int>(0, 1)(rng)) {
        // mirror about the image centre: flip every spatial axis
        apply_all([&](const Tensor<float>& t, bool) {
            Tensor<float> r = t;
            for (int a = 0; a < sr; ++a) r = flip_axis(r, a);
            return r;
        });
    }
    if (!cfg.crop.empty()) {
        if (cfg.crop.size() != static_cast<size_t>(sr))
            throw DimensionError("augment: crop rank mismatch");
        auto cur = spatial_of(out.input);
        std::vector<Index> origin(static_cast<size_t>(sr));
        for (int a = 0; a < sr; ++a) {
            if (cfg.crop[static_cast<size_t>(a)] > cur[static_cast<size_t>(a)])
                throw DimensionError("augment: crop larger than image on axis " + std::to_string(a));
            Index room = cur[static_cast<size_t>(a)] - cfg.crop[static_cast<size_t>(a)];
            origin[static_cast<size_t>(a)] =
                room > 0 ? std::uniform_int_distribution<Index>(0, room)(rng) : 0;
        }
        apply_all([&](const Tensor<float>& t, bool) { return crop_at(t, origin, cfg.crop); });
    }
    if (cfg.contrast) {
        double gamma = std::uniform_real_distribution<double>(0.7, 1.3)(rng);
        auto& d = out.input.data();
        for (float& v : d) v = static_cast<float>(std::pow(std::max(0.0f, v), gamma));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Folds
// ---------------------------------------------------------------------------

std::vector<std::vector<int>> kfold_split(int n, int k, std::uint64_t seed) {
    if (k < 1 || k > n) throw ContractError("kfold_split: need 1 <= k <= n");
    std::vector<int> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<std::vector<int>> folds(static_cast<size_t>(k));
    for (int i = 0; i < n; ++i) folds[static_cast<size_t>(i % k)].push_back(idx[static_cast<size_t>(i)]);
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

// ---------------------------------------------------------------------------
// PGM
// ---------------------------------------------------------------------------

void write_pgm(const std::string& path, const std::vector<std::uint8_t>& pixels, int height,
               int width) {
    if (pixels.size() != static_cast<size_t>(height) * static_cast<size_t>(width))
        throw DimensionError("write_pgm: size mismatch");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open " + path + " for writing");
    f << "P5\n" << width << " " << height << "\n255\n";
    f.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
}

std::vector<std::uint8_t> read_pgm(const std::string& path, int& height, int& width) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open " + path);
    std::string magic;
    f >> magic;
    if (magic != "P5")
        throw ParseError(path + ": not a binary PGM (bad magic at byte 0)");
    int maxval = 0;
    f >> width >> height >> maxval;
    if (!f || width < 1 || height < 1)
        throw ParseError(path + ": malformed PGM header at byte " + std::to_string(f.tellg()));
    if (maxval != 255) throw ParseError(path + ": only 8-bit PGM supported");
    f.get();  // single whitespace after maxval
    std::vector<std::uint8_t> pixels(static_cast<size_t>(width) * static_cast<size_t>(height));
    f.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (static_cast<size_t>(f.gcount()) != pixels.size())
        throw ParseError(path + ": short pixel payload at byte " + std::to_string(f.tellg()));
    return pixels;
}

Tensor<float> read_image(const std::string& path) {
    int h = 0, w = 0;
    std::vector<std::uint8_t> px = read_pgm(path, h, w);
    std::vector<float> data(px.size());
    for (size_t i = 0; i < px.size(); ++i) data[i] = static_cast<float>(px[i]) / 255.0f;
    return Tensor<float>::from_vector(Shape{1, h, w}, std::move(data));
}

void write_image(const std::string& path, const Tensor<float>& img) {
    auto sp = img.rank() == 3 ? std::vector<Index>{img.shape()[1], img.shape()[2]}
                              : std::vector<Index>{img.shape()[0], img.shape()[1]};
    std::vector<std::uint8_t> px(img.data().size());
    for (size_t i = 0; i < px.size(); ++i)
        px[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.data()[i], 0.0f, 1.0f) * 255.0f));
    write_pgm(path, px, static_cast<int>(sp[0]), static_cast<int>(sp[1]));
}

// ---------------------------------------------------------------------------
// VOL1
// ---------------------------------------------------------------------------

void write_volume(const std::string& path, const Tensor<float>& vol, bool as_mask) {
    auto dims = vol.rank() == 4 ? std::vector<Index>{vol.shape()[1], vol.shape()[2], vol.shape()[3]}
                                : vol.shape().dims;
    if (dims.size() != 3) throw DimensionError("write_volume: expected 3 spatial dims");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open " + path + " for writing");
    f << "VOL1 " << dims[0] << " " << dims[1] << " " << dims[2] << " "
      << (as_mask ? "u8" : "f32le") << "\n";
    if (as_mask) {
        std::vector<std::uint8_t> buf(vol.data().size());
        for (size_t i = 0; i < buf.size(); ++i) buf[i] = vol.data()[i] >= 0.5f ? 255 : 0;
        f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    } else {
        f.write(reinterpret_cast<const char*>(vol.data().data()),
                static_cast<std::streamsize>(vol.data().size() * sizeof(float)));
    }
}

Tensor<float> read_volume(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open " + path);
    std::string magic, dtype;
    Index h = 0, w = 0, d = 0;
    f >> magic >> h >> w >> d >> dtype;
    if (magic != "VOL1" || !f || h < 1 || w < 1 || d < 1)
        throw ParseError(path + ": malformed VOL1 header at byte " + std::to_string(f.tellg()));
    f.get();  // newline
    size_t n = static_cast<size_t>(h * w * d);
    std::vector<float> data(n);
    if (dtype == "u8") {
        std::vector<std::uint8_t> buf(n);
        f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
        if (static_cast<size_t>(f.gcount()) != n)
            throw ParseError(path + ": short payload at byte " + std::to_string(f.tellg()));
        for (size_t i = 0; i < n; ++i) data[i] = static_cast<float>(buf[i]) / 255.0f;
    } else if (dtype == "f32le") {
        f.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * sizeof(float)));
        if (static_cast<size_t>(f.gcount()) != n * sizeof(float))
            throw ParseError(path + ": short payload at byte " + std::to_string(f.tellg()));
    } else {
        throw ParseError(path + ": unknown dtype '" + dtype + "'");
    }
    return Tensor<float>::from_vector(Shape{1, h, w, d}, std::move(data));
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open " + path);
    std::vector<ManifestEntry> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream is(line);
        ManifestEntry e;
        std::getline(is, e.input, '\t');
        if (!std::getline(is, e.mask, '\t'))
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected input<TAB>mask");
        std::getline(is, e.centerline, '\t');
        // relative entries resolve against the manifest's own directory, so a
        // dataset directory can be moved or renamed as a unit
        auto resolve = [&](std::string& p) {
            if (!p.empty() && fs::path(p).is_relative())
                p = (fs::path(path).parent_path() / p).string();
        };
        resolve(e.input);
        resolve(e.mask);
        resolve(e.centerline);
        entries.push_back(std::move(e));
    }
    return entries;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream f(path);
    if (!f) throw ParseError("cannot open " + path + " for writing");
    for (const auto& e : entries) {
        f << e.input << '\t' << e.mask;
        if (!e.centerline.empty()) f << '\t' << e.centerline;
        f << '\n';
    }
}

Sample load_sample(const ManifestEntry& e, int dims) {
    Sample s;
    auto load = [dims](const std::string& p) {
        return dims == 2 ? read_image(p) : read_volume(p);
    };
    s.input = load(e.input);
    Tensor<float> m = load(e.mask);
    for (float& v : m.data()) v = v >= 0.5f ? 1.0f : 0.0f;
    s.mask = m;
    if (!e.centerline.empty()) {
        Tensor<float> c = load(e.centerline);
        for (float& v : c.data()) v = v >= 0.5f ? 1.0f : 0.0f;
        s.centerline = c;
    }
    return s;
}

}  // namespace cs2net
