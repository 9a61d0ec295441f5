// Command-line surface: dataset synthesis, training, inference, evaluation,
// and gradient checking. Exit codes: 0 success, 1 check failure, 2 usage or
// config error, 3 numeric abort.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cs2net/config.hpp"
#include "cs2net/data.hpp"
#include "cs2net/gradcheck.hpp"
#include "cs2net/metrics.hpp"
#include "cs2net/model.hpp"
#include "cs2net/png.hpp"
#include "cs2net/train.hpp"

namespace fs = std::filesystem;
using namespace cs2net;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

std::string sample_stem(int index) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "sample_%03d", index);
    return buf;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

int cmd_synth(int dims, int count, long size, double noise_var, std::uint64_t seed,
              const std::string& out_dir) {
    fs::create_directories(out_dir);
    SynthConfig cfg;
    cfg.dims = dims;
    cfg.size.assign(static_cast<size_t>(dims), static_cast<Index>(size));
    cfg.noise_variance = noise_var;

    std::vector<ManifestEntry> manifest;
    for (int i = 0; i < count; ++i) {
        cfg.seed = seed + static_cast<std::uint64_t>(i);
        Sample s = dims == 2 ? synth_2d(cfg) : synth_3d(cfg);
        // the manifest keeps bare filenames so identical runs into different
        // directories produce byte-identical files
        std::string ext = dims == 2 ? ".pgm" : ".vol";
        ManifestEntry e;
        e.input = sample_stem(i) + ext;
        e.mask = sample_stem(i) + "_mask" + ext;
        e.centerline = sample_stem(i) + "_centerline" + ext;
        fs::path dir(out_dir);
        if (dims == 2) {
            write_image((dir / e.input).string(), s.input);
            write_image((dir / e.mask).string(), s.mask);
            write_image((dir / e.centerline).string(), *s.centerline);
        } else {
            write_volume((dir / e.input).string(), s.input, false);
            write_volume((dir / e.mask).string(), s.mask, true);
            write_volume((dir / e.centerline).string(), *s.centerline, true);
        }
        manifest.push_back(e);
    }
    write_manifest((fs::path(out_dir) / "manifest.txt").string(), manifest);
    std::cout << "wrote " << count << " samples to " << out_dir << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

const std::map<std::string, std::vector<std::string>> kTrainConfigKeys = {
    {"model", {"dims", "in_channels", "base_width", "sab", "cab"}},
    {"train",
     {"base_lr", "weight_decay", "batch_size", "max_iters", "loss", "schedule_unit", "seed",
      "val_interval", "alpha", "verbose"}},
    {"augment",
     {"enabled", "crop", "rotation_deg", "flip_horizontal", "flip_vertical", "mirror",
      "contrast"}},
    {"data", {"manifest", "count", "size", "noise_var", "seed", "val_count"}},
};

TrainConfig parse_train_config(const ConfigFile& cf) {
    TrainConfig cfg;
    cfg.model.dims = static_cast<int>(cf.get_long("model", "dims", 2));
    cfg.model.in_channels = static_cast<int>(cf.get_long("model", "in_channels", 1));
    cfg.model.base_width = static_cast<int>(cf.get_long("model", "base_width", 0));
    cfg.model.sab_enabled = cf.get_bool("model", "sab", true);
    cfg.model.cab_enabled = cf.get_bool("model", "cab", true);

    cfg.base_lr = cf.get_double("train", "base_lr", 1e-4);
    cfg.weight_decay = cf.get_double("train", "weight_decay", 5e-4);
    cfg.batch_size = static_cast<int>(cf.get_long("train", "batch_size", 8));
    cfg.max_iters = cf.get_long("train", "max_iters", 100);
    cfg.seed = static_cast<std::uint64_t>(cf.get_long("train", "seed", 0));
    cfg.val_interval = cf.get_long("train", "val_interval", 0);
    cfg.loss_cfg.alpha = cf.get_double("train", "alpha", 0.6);
    cfg.verbose = cf.get_bool("train", "verbose", true);

    std::string loss = cf.get("train", "loss", "bce");
    if (loss == "bce")
        cfg.loss = LossKind::bce;
    else if (loss == "combined")
        cfg.loss = LossKind::combined;
    else
        throw ConfigError("train.loss must be 'bce' or 'combined', got '" + loss + "'");

    std::string unit = cf.get("train", "schedule_unit", "step");
    if (unit == "step")
        cfg.schedule_unit = ScheduleUnit::step;
    else if (unit == "epoch")
        cfg.schedule_unit = ScheduleUnit::epoch;
    else
        throw ConfigError("train.schedule_unit must be 'step' or 'epoch', got '" + unit + "'");

    cfg.augment.enabled = cf.get_bool("augment", "enabled", false);
    cfg.augment.rotation_deg = cf.get_double("augment", "rotation_deg", 45.0);
    cfg.augment.flip_horizontal = cf.get_bool("augment", "flip_horizontal", true);
    cfg.augment.flip_vertical = cf.get_bool("augment", "flip_vertical", true);
    cfg.augment.mirror = cf.get_bool("augment", "mirror", true);
    cfg.augment.contrast = cf.get_bool("augment", "contrast", true);
    long crop = cf.get_long("augment", "crop", 0);
    if (crop > 0) cfg.augment.crop.assign(static_cast<size_t>(cfg.model.dims), crop);
    return cfg;
}

std::vector<Sample> build_dataset(const ConfigFile& cf, int dims) {
    std::string manifest = cf.get("data", "manifest", "");
    std::vector<Sample> set;
    if (!manifest.empty()) {
        for (const auto& e : read_manifest(manifest)) set.push_back(load_sample(e, dims));
        return set;
    }
    SynthConfig sc;
    sc.dims = dims;
    long size = cf.get_long("data", "size", 64);
    sc.size.assign(static_cast<size_t>(dims), static_cast<Index>(size));
    sc.noise_variance = cf.get_double("data", "noise_var", 0.0);
    std::uint64_t seed = static_cast<std::uint64_t>(cf.get_long("data", "seed", 0));
    long count = cf.get_long("data", "count", 4);
    for (long i = 0; i < count; ++i) {
        sc.seed = seed + static_cast<std::uint64_t>(i);
        set.push_back(dims == 2 ? synth_2d(sc) : synth_3d(sc));
    }
    return set;
}

void apply_ablation(ModelConfig& mc, const std::string& ablation) {
    if (ablation.empty() || ablation == "full") {
        mc.sab_enabled = true;
        mc.cab_enabled = true;
    } else if (ablation == "backbone") {
        mc.sab_enabled = false;
        mc.cab_enabled = false;
    } else if (ablation == "+sab") {
        mc.sab_enabled = true;
        mc.cab_enabled = false;
    } else if (ablation == "+cab") {
        mc.sab_enabled = false;
        mc.cab_enabled = true;
    } else {
        throw ConfigError("unknown ablation '" + ablation +
                          "' (expected backbone, +sab, +cab, or full)");
    }
}

int cmd_train(const std::string& config_path, int fold_k, const std::string& ablation,
              const std::string& out_dir) {
    ConfigFile cf = ConfigFile::parse_file(config_path);
    cf.validate_keys(kTrainConfigKeys);
    TrainConfig cfg = parse_train_config(cf);
    apply_ablation(cfg.model, ablation);
    cfg.validate();
    fs::create_directories(out_dir);

    std::vector<Sample> dataset = build_dataset(cf, cfg.model.dims);

    if (fold_k > 0) {
        MetricsReport rep = run_fold_experiment(cfg, dataset, fold_k, out_dir);
        rep.write_csv((fs::path(out_dir) / "folds.csv").string());
        return kExitOk;
    }

    long val_count = cf.get_long("data", "val_count", 0);
    std::vector<Sample> val_set, train_set = dataset;
    if (val_count > 0 && val_count < static_cast<long>(dataset.size())) {
        val_set.assign(dataset.end() - val_count, dataset.end());
        train_set.assign(dataset.begin(), dataset.end() - val_count);
    }

    TrainResult res = train(cfg, train_set, val_set, out_dir);
    double train_dice = evaluate_dice(res.model, train_set);

    MetricsReport rep;
    rep.columns = {"dice"};
    rep.add_row("train", {Rate{train_dice, true}});
    if (!val_set.empty()) rep.add_row("val", {Rate{evaluate_dice(res.model, val_set), true}});
    rep.write_csv((fs::path(out_dir) / "report.csv").string());
    std::cout << "final_train_dice=" << train_dice << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------

bool is_volume_path(const std::string& p) { return fs::path(p).extension() == ".vol"; }

int cmd_infer(const std::string& ckpt, const std::string& in_path, const std::string& out_dir,
              bool dump_attention, long window) {
    Model<float> model;
    load_checkpoint(ckpt, model);
    model.set_training(false);
    model.set_capture_attention(dump_attention);
    fs::create_directories(out_dir);

    bool volume = is_volume_path(in_path);
    if ((model.config().dims == 3) != volume)
        throw ConfigError(std::string("checkpoint is ") + (model.config().dims == 3 ? "3D" : "2D") +
                          " but input file is " + (volume ? "a volume" : "an image"));

    Tensor<float> input = volume ? read_volume(in_path) : read_image(in_path);
    std::vector<Index> win;
    if (volume && window > 0) win.assign(3, static_cast<Index>(window));
    InferResult res = infer(model, input, win);

    const auto& sp = res.probability.shape();
    if (!volume) {
        Index H = sp[1], W = sp[2];
        write_image((fs::path(out_dir) / "probability.pgm").string(), res.probability);
        std::vector<std::uint8_t> mask255(res.mask.size());
        for (size_t i = 0; i < res.mask.size(); ++i) mask255[i] = res.mask[i] ? 255 : 0;
        write_pgm((fs::path(out_dir) / "mask.pgm").string(), mask255, static_cast<int>(H),
                  static_cast<int>(W));
    } else {
        Index H = sp[1], W = sp[2], D = sp[3];
        write_volume((fs::path(out_dir) / "probability.vol").string(), res.probability, false);
        Tensor<float> mask_t = Tensor<float>::zeros(sp);
        for (size_t i = 0; i < res.mask.size(); ++i)
            mask_t.data()[i] = res.mask[i] ? 1.0f : 0.0f;
        write_volume((fs::path(out_dir) / "mask.vol").string(), mask_t, true);
        // axial maximum-intensity projection of the probability map
        std::vector<std::uint8_t> mip(static_cast<size_t>(H * W), 0);
        const auto& p = res.probability.data();
        for (Index i = 0; i < H; ++i)
            for (Index j = 0; j < W; ++j) {
                float m = 0.0f;
                for (Index k = 0; k < D; ++k)
                    m = std::max(m, p[static_cast<size_t>((i * W + j) * D + k)]);
                mip[static_cast<size_t>(i * W + j)] =
                    static_cast<std::uint8_t>(std::lround(std::min(1.0f, m) * 255.0f));
            }
        write_png_gray((fs::path(out_dir) / "mip.png").string(), mip, static_cast<int>(H),
                       static_cast<int>(W));
    }

    if (dump_attention) {
        const AttentionMapCapture& cap = model.capture();
        int emitted = 0;
        if (cap.spatial_stored > 0) {
            write_pgm_heatmap((fs::path(out_dir) / "attention_spatial.pgm").string(),
                              cap.spatial_rows, cap.spatial_stored, cap.spatial_n);
            ++emitted;
        }
        if (cap.channel_c > 0) {
            write_pgm_heatmap((fs::path(out_dir) / "attention_channel.pgm").string(),
                              cap.channel_matrix, cap.channel_c, cap.channel_c);
            ++emitted;
        }
        if (emitted == 0) {
            std::cerr << "error: --dump-attention requested but the model captured no maps\n";
            return kExitCheckFailed;
        }
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

std::vector<std::string> matched_names(const std::string& pred_dir, const std::string& gt_dir,
                                       const std::string& ext) {
    auto list = [&](const std::string& dir) {
        std::set<std::string> names;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file() && e.path().extension() == ext)
                names.insert(e.path().filename().string());
        return names;
    };
    std::set<std::string> pred = list(pred_dir), gt = list(gt_dir);
    std::vector<std::string> only_pred, only_gt, both;
    std::set_difference(pred.begin(), pred.end(), gt.begin(), gt.end(),
                        std::back_inserter(only_pred));
    std::set_difference(gt.begin(), gt.end(), pred.begin(), pred.end(),
                        std::back_inserter(only_gt));
    std::set_intersection(pred.begin(), pred.end(), gt.begin(), gt.end(),
                          std::back_inserter(both));
    if (!only_pred.empty() || !only_gt.empty()) {
        std::string msg = "mismatched file lists;";
        for (const auto& n : only_pred) msg += " prediction-only: " + n;
        for (const auto& n : only_gt) msg += " ground-truth-only: " + n;
        throw ConfigError(msg);
    }
    if (both.empty()) throw ConfigError("no " + ext + " files found in " + pred_dir);
    return both;
}

std::vector<std::uint8_t> threshold_mask(const Tensor<float>& t) {
    std::vector<std::uint8_t> m(t.data().size());
    for (size_t i = 0; i < m.size(); ++i) m[i] = t.data()[i] >= 0.5f ? 1 : 0;
    return m;
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& mode,
             const std::string& out_dir) {
    fs::create_directories(out_dir);
    bool volume = mode == "volume3d";
    std::string ext = volume ? ".vol" : ".pgm";
    std::vector<std::string> names = matched_names(pred_dir, gt_dir, ext);

    MetricsReport rep;
    std::vector<double> pooled_scores;
    std::vector<std::uint8_t> pooled_gt;

    if (mode == "pixel" || mode == "volume3d") {
        rep.columns = volume ? std::vector<std::string>{"tpr", "fnr", "fpr", "dice", "or", "ur"}
                             : std::vector<std::string>{"acc", "se", "sp", "fnr", "fpr", "dice"};
        for (const auto& name : names) {
            std::string pp = (fs::path(pred_dir) / name).string();
            std::string gp = (fs::path(gt_dir) / name).string();
            Tensor<float> pred = volume ? read_volume(pp) : read_image(pp);
            Tensor<float> gt = volume ? read_volume(gp) : read_image(gp);
            if (pred.shape().dims != gt.shape().dims)
                throw DimensionError("eval: shape mismatch for " + name);
            std::vector<std::uint8_t> pm = threshold_mask(pred), gm = threshold_mask(gt);
            ConfusionCounts c = confusion(pm, gm);
            BasicRates r = basic_rates(c);
            Rate dice{dice_coefficient(pm, gm), true};
            if (volume) {
                OrUr ou = or_ur(pm, gm);
                rep.add_row(name, {r.se, r.fnr, r.fpr, dice, ou.over, ou.under});
            } else {
                rep.add_row(name, {r.acc, r.se, r.sp, r.fnr, r.fpr, dice});
            }
            for (size_t i = 0; i < gm.size(); ++i) {
                pooled_scores.push_back(pred.data()[i]);
                pooled_gt.push_back(gm[i]);
            }
        }
    } else if (mode == "centerline") {
        rep.columns = {"se", "fdr"};
        for (const auto& name : names) {
            Tensor<float> pred = read_image((fs::path(pred_dir) / name).string());
            Tensor<float> gt = read_image((fs::path(gt_dir) / name).string());
            if (pred.shape().dims != gt.shape().dims)
                throw DimensionError("eval: shape mismatch for " + name);
            int H = static_cast<int>(pred.shape()[1]), W = static_cast<int>(pred.shape()[2]);
            CenterlineResult c =
                centerline_metrics(threshold_mask(pred), threshold_mask(gt), H, W);
            rep.add_row(name, {c.se, c.fdr});
        }
    } else {
        throw ConfigError("unknown eval mode '" + mode +
                          "' (expected pixel, centerline, or volume3d)");
    }

    rep.write_csv((fs::path(out_dir) / "metrics.csv").string());
    bool has_both_classes =
        std::count(pooled_gt.begin(), pooled_gt.end(), 1) > 0 &&
        std::count(pooled_gt.begin(), pooled_gt.end(), 0) > 0;
    if (!pooled_scores.empty() && has_both_classes) {
        RocCurve roc = auc_roc(pooled_scores, pooled_gt);
        write_roc_csv(roc, (fs::path(out_dir) / "roc.csv").string());
        render_roc_png(roc, (fs::path(out_dir) / "roc.png").string());
        std::cout << "auc=" << roc.auc << "\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

int cmd_gradcheck(std::uint64_t seed, int precision, bool inject_fault) {
    double tol = precision == 64 ? 1e-5 : 1e-3;
    auto results = precision == 64 ? run_gradcheck<double>(seed) : run_gradcheck<float>(seed);
    if (inject_fault) results.emplace_back("fault_injection", 1.0);
    bool ok = true;
    std::string worst_block;
    for (const auto& [name, err] : results) {
        std::cout << name << " " << err << "\n";
        if (!(err < tol)) {
            ok = false;
            if (worst_block.empty()) worst_block = name;
        }
    }
    if (!ok) {
        std::cerr << "gradcheck failed: " << worst_block << " exceeds tolerance " << tol << "\n";
        return kExitCheckFailed;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CS2-Net curvilinear structure segmentation toolkit"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate synthetic curvilinear samples");
    int s_dims = 2, s_count = 4;
    long s_size = 64;
    double s_noise = 0.0;
    std::uint64_t s_seed = 0;
    std::string s_out;
    synth->add_option("--dims", s_dims, "2 for images, 3 for volumes (default 2)")
        ->check(CLI::IsMember({2, 3}));
    synth->add_option("--count", s_count, "number of samples (default 4)")
        ->check(CLI::PositiveNumber);
    synth->add_option("--size", s_size, "edge length per axis (default 64)")
        ->check(CLI::PositiveNumber);
    synth->add_option("--noise-var", s_noise, "Gaussian noise variance on the 0-255 scale (default 0)")
        ->check(CLI::NonNegativeNumber);
    synth->add_option("--seed", s_seed, "base RNG seed (default 0)");
    synth->add_option("--out", s_out, "output directory")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a model from a config file");
    std::string t_config, t_out, t_ablation;
    int t_fold = 0;
    train_cmd->add_option("--config", t_config, "config file path")->required();
    train_cmd->add_option("--out", t_out, "output directory")->required();
    train_cmd->add_option("--fold", t_fold, "run k-fold cross-validation (default off)")
        ->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--ablation", t_ablation,
                          "model variant: backbone, +sab, +cab, or full (default full)");

    // infer
    auto* infer_cmd = app.add_subcommand("infer", "Run inference with a checkpoint");
    std::string i_ckpt, i_in, i_out;
    bool i_dump = false;
    long i_window = 0;
    infer_cmd->add_option("--ckpt", i_ckpt, "checkpoint path")->required();
    infer_cmd->add_option("--in", i_in, "input .pgm image or .vol volume")->required();
    infer_cmd->add_option("--out", i_out, "output directory")->required();
    infer_cmd->add_flag("--dump-attention", i_dump, "write attention heatmap PGMs");
    infer_cmd->add_option("--window", i_window,
                          "3D sliding-window edge length, 0 = direct forward (default 0)")
        ->check(CLI::NonNegativeNumber);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Score predictions against ground truth");
    std::string e_pred, e_gt, e_mode = "pixel", e_out;
    eval_cmd->add_option("--pred", e_pred, "prediction directory")->required();
    eval_cmd->add_option("--gt", e_gt, "ground-truth directory")->required();
    eval_cmd->add_option("--mode", e_mode, "pixel, centerline, or volume3d (default pixel)")
        ->check(CLI::IsMember({"pixel", "centerline", "volume3d"}));
    eval_cmd->add_option("--out", e_out, "output directory")->required();

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
    std::uint64_t g_seed = 0;
    int g_precision = 64;
    bool g_fault = false;
    gc->add_option("--seed", g_seed, "RNG seed (default 0)");
    gc->add_option("--precision", g_precision,
                   "64 (tolerance 1e-5) or 32 (tolerance 1e-3), default 64")
        ->check(CLI::IsMember({32, 64}));
    gc->add_flag("--inject-fault", g_fault,
                 "deliberately report one failing block (self-test of the failure path)");

    try {
        app.parse(argc, argv);
        if (synth->parsed()) return cmd_synth(s_dims, s_count, s_size, s_noise, s_seed, s_out);
        if (train_cmd->parsed()) return cmd_train(t_config, t_fold, t_ablation, t_out);
        if (infer_cmd->parsed()) return cmd_infer(i_ckpt, i_in, i_out, i_dump, i_window);
        if (eval_cmd->parsed()) return cmd_eval(e_pred, e_gt, e_mode, e_out);
        if (gc->parsed()) return cmd_gradcheck(g_seed, g_precision, g_fault);
        return kExitUsage;
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    } catch (const NumericError& e) {
        std::cerr << "numeric abort: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
