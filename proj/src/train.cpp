#include "cs2net/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

namespace cs2net {

void RunLog::write_csv(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw ParseError("cannot open " + path + " for writing");
    f.precision(17);
    f << "iter,lr,loss\n";
    for (const auto& e : entries) f << e.iter << "," << e.lr << "," << e.loss << "\n";
}

namespace {

Tensor<float> batch_inputs(const std::vector<const Sample*>& batch) {
    std::vector<Tensor<float>> parts;
    for (const Sample* s : batch) parts.push_back(s->input);
    return stack_batch(parts);
}

Tensor<float> batch_masks(const std::vector<const Sample*>& batch) {
    std::vector<Tensor<float>> parts;
    for (const Sample* s : batch) parts.push_back(s->mask);
    return stack_batch(parts);
}

}  // namespace

double evaluate_dice(Model<float>& model, const std::vector<Sample>& samples) {
    if (samples.empty()) return -1.0;
    bool was_training = model.training();
    model.set_training(false);
    double acc = 0;
    for (const Sample& s : samples) {
        InferResult r = infer(model, s.input);
        std::vector<std::uint8_t> gt(s.mask.data().size());
        for (size_t i = 0; i < gt.size(); ++i) gt[i] = s.mask.data()[i] >= 0.5f ? 1 : 0;
        acc += dice_coefficient(r.mask, gt);
    }
    model.set_training(was_training);
    return acc / static_cast<double>(samples.size());
}

TrainResult train(const TrainConfig& cfg, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set, const std::string& out_dir) {
    cfg.validate();
    if (train_set.empty()) throw ContractError("train: empty training set");

    Rng rng(cfg.seed);
    TrainResult result;
    result.model = Model<float>(cfg.model, rng);
    Model<float>& model = result.model;
    model.set_training(true);

    Adam<float> opt(model.named_parameters(), cfg.weight_decay);

    long n = static_cast<long>(train_set.size());
    long steps_per_epoch = std::max<long>(1, (n + cfg.batch_size - 1) / cfg.batch_size);
    long val_every = cfg.val_interval > 0 ? cfg.val_interval : steps_per_epoch;

    PolySchedule sched;
    sched.base_lr = cfg.base_lr;
    sched.max_iter = cfg.schedule_unit == ScheduleUnit::step
                         ? std::max<long>(1, cfg.max_iters)
                         : std::max<long>(1, (cfg.max_iters + steps_per_epoch - 1) / steps_per_epoch);

    const std::vector<Sample>& val_ref = val_set.empty() ? train_set : val_set;

    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    long cursor = 0;

    auto save_best = [&](long iter) {
        double d = evaluate_dice(model, val_ref);
        result.log.val_dice.emplace_back(iter, d);
        if (d > result.best_val_dice) {
            result.best_val_dice = d;
            result.best_iter = iter;
            if (!out_dir.empty()) {
                result.best_checkpoint = out_dir + "/best.ckpt";
                save_checkpoint(model, result.best_checkpoint, static_cast<std::uint64_t>(iter));
            }
        }
    };

    for (long iter = 0; iter < cfg.max_iters; ++iter) {
        if (iter % steps_per_epoch == 0) {
            std::shuffle(order.begin(), order.end(), rng);
            cursor = 0;
        }
        std::vector<const Sample*> batch;
        std::vector<Sample> augmented;
        augmented.reserve(static_cast<size_t>(cfg.batch_size));
        for (int b = 0; b < cfg.batch_size; ++b) {
            const Sample& s = train_set[static_cast<size_t>(order[static_cast<size_t>(cursor % n)])];
            ++cursor;
            if (cfg.augment.enabled) {
                augmented.push_back(augment(s, cfg.augment, rng));
                batch.push_back(&augmented.back());
            } else {
                batch.push_back(&s);
            }
        }

        long sched_unit = cfg.schedule_unit == ScheduleUnit::step ? iter : iter / steps_per_epoch;
        double lr = poly_lr(sched, sched_unit);

        opt.zero_grad();
        Tensor<float> x = batch_inputs(batch);
        Tensor<float> g = batch_masks(batch);
        double loss_value = 0.0;
        try {
            Tensor<float> p = model.forward(x);
            Tensor<float> loss = cfg.loss == LossKind::bce
                                     ? bce_loss(p, g, static_cast<float>(cfg.loss_cfg.clamp))
                                     : combined_loss(p, g, cfg.loss_cfg);
            backward(loss);
            loss_value = static_cast<double>(loss.item());
            if (!std::isfinite(loss_value)) throw NumericError("train: NaN loss");
            opt.step(lr);
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " (iteration " + std::to_string(iter) +
                               ", seed " + std::to_string(cfg.seed) + ")");
        }
        result.log.entries.push_back({iter, lr, loss_value});
        if (cfg.verbose)
            std::cout << "iter=" << iter << " lr=" << lr << " loss=" << loss_value << "\n";

        if ((iter + 1) % val_every == 0 || iter + 1 == cfg.max_iters) {
            try {
                save_best(iter);
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " (iteration " + std::to_string(iter) +
                                   ", seed " + std::to_string(cfg.seed) + ")");
            }
        }
    }
    if (cfg.max_iters == 0 && !out_dir.empty()) save_best(-1);

    if (!out_dir.empty()) {
        result.final_checkpoint = out_dir + "/final.ckpt";
        CheckpointExtra extra;
        for (auto& [name, st] : opt.state_tensors())
            extra.tensors.push_back({name, st.first, std::move(st.second)});
        save_checkpoint(model, result.final_checkpoint,
                        static_cast<std::uint64_t>(cfg.max_iters), &extra);
        result.log.write_csv(out_dir + "/runlog.csv");
    }
    return result;
}

namespace {

InferResult direct_forward(Model<float>& model, const Tensor<float>& input) {
    NoGradGuard ng;
    bool was_training = model.training();
    model.set_training(false);
    std::vector<Index> bdims = {1};
    bdims.insert(bdims.end(), input.shape().dims.begin(), input.shape().dims.end());
    Tensor<float> x = reshape(input, Shape(bdims));
    Tensor<float> out = model.forward(x);
    model.set_training(was_training);
    InferResult r;
    r.probability = Tensor<float>::from_vector(input.shape(), out.data());
    r.mask.resize(out.data().size());
    for (size_t i = 0; i < r.mask.size(); ++i) r.mask[i] = out.data()[i] >= 0.5f ? 1 : 0;
    return r;
}

}  // namespace

InferResult infer(Model<float>& model, const Tensor<float>& input,
                  const std::vector<Index>& window) {
    int sr = model.config().dims;
    if (input.rank() != sr + 1)
        throw DimensionError("infer: expected [C, spatial...] input, got " + input.shape().str());
    std::vector<Index> sp(input.shape().dims.begin() + 1, input.shape().dims.end());

    bool fits = window.empty();
    if (!fits) {
        fits = true;
        for (size_t a = 0; a < sp.size(); ++a)
            if (sp[a] > window[a]) fits = false;
    }
    if (fits) return direct_forward(model, input);

    if (sr != 3) throw ContractError("infer: sliding window is only supported for 3D volumes");
    if (window.size() != 3) throw DimensionError("infer: 3D window must have 3 dims");

    // 50% overlap, mean blending
    std::vector<std::vector<Index>> starts(3);
    for (int a = 0; a < 3; ++a) {
        Index w = std::min(window[static_cast<size_t>(a)], sp[static_cast<size_t>(a)]);
        Index stride = std::max<Index>(1, w / 2);
        for (Index s = 0;; s += stride) {
            if (s + w >= sp[static_cast<size_t>(a)]) {
                starts[static_cast<size_t>(a)].push_back(sp[static_cast<size_t>(a)] - w);
                break;
            }
            starts[static_cast<size_t>(a)].push_back(s);
        }
    }

    Index H = sp[0], W = sp[1], D = sp[2];
    Index wh = std::min(window[0], H), ww = std::min(window[1], W), wd = std::min(window[2], D);
    std::vector<double> acc(input.data().size(), 0.0);
    std::vector<double> cnt(input.data().size(), 0.0);
    for (Index sy : starts[0])
        for (Index sx : starts[1])
            for (Index sz : starts[2]) {
                std::vector<float> tile(static_cast<size_t>(wh * ww * wd));
                for (Index y = 0; y < wh; ++y)
                    for (Index x = 0; x < ww; ++x)
                        for (Index z = 0; z < wd; ++z)
                            tile[static_cast<size_t>((y * ww + x) * wd + z)] =
                                input.data()[static_cast<size_t>(((sy + y) * W + sx + x) * D + sz + z)];
                Tensor<float> tt = Tensor<float>::from_vector(Shape{1, wh, ww, wd}, std::move(tile));
                InferResult tr = direct_forward(model, tt);
                for (Index y = 0; y < wh; ++y)
                    for (Index x = 0; x < ww; ++x)
                        for (Index z = 0; z < wd; ++z) {
                            size_t gi = static_cast<size_t>(((sy + y) * W + sx + x) * D + sz + z);
                            acc[gi] += tr.probability.data()[static_cast<size_t>((y * ww + x) * wd + z)];
                            cnt[gi] += 1.0;
                        }
            }

    InferResult r;
    std::vector<float> prob(acc.size());
    for (size_t i = 0; i < acc.size(); ++i) prob[i] = static_cast<float>(acc[i] / cnt[i]);
    r.probability = Tensor<float>::from_vector(input.shape(), std::move(prob));
    r.mask.resize(acc.size());
    for (size_t i = 0; i < acc.size(); ++i) r.mask[i] = r.probability.data()[i] >= 0.5f ? 1 : 0;
    return r;
}

MetricsReport run_fold_experiment(const TrainConfig& cfg, const std::vector<Sample>& dataset,
                                  int k, const std::string& out_dir) {
    auto folds = kfold_split(static_cast<int>(dataset.size()), k, cfg.seed);
    MetricsReport report;
    report.columns = {"acc", "se", "sp", "dice"};

    for (int f = 0; f < k; ++f) {
        std::vector<Sample> train_set, test_set;
        for (int i = 0; i < static_cast<int>(dataset.size()); ++i) {
            bool held_out = std::find(folds[static_cast<size_t>(f)].begin(),
                                      folds[static_cast<size_t>(f)].end(),
                                      i) != folds[static_cast<size_t>(f)].end();
            (held_out ? test_set : train_set).push_back(dataset[static_cast<size_t>(i)]);
        }
        TrainConfig fold_cfg = cfg;
        fold_cfg.seed = cfg.seed + static_cast<std::uint64_t>(f);
        std::string fold_dir;
        if (!out_dir.empty()) {
            fold_dir = out_dir + "/fold" + std::to_string(f);
            std::filesystem::create_directories(fold_dir);
        }
        TrainResult tr = train(fold_cfg, train_set, test_set, fold_dir);

        double acc = 0, se = 0, sp = 0, dice = 0;
        int se_n = 0, sp_n = 0;
        for (const Sample& s : test_set) {
            InferResult ir = infer(tr.model, s.input);
            std::vector<std::uint8_t> gt(s.mask.data().size());
            for (size_t i = 0; i < gt.size(); ++i) gt[i] = s.mask.data()[i] >= 0.5f ? 1 : 0;
            BasicRates br = basic_rates(confusion(ir.mask, gt));
            acc += br.acc.value;
            if (br.se.defined) {
                se += br.se.value;
                ++se_n;
            }
            if (br.sp.defined) {
                sp += br.sp.value;
                ++sp_n;
            }
            dice += dice_coefficient(ir.mask, gt);
        }
        double m = static_cast<double>(test_set.size());
        report.add_row("fold" + std::to_string(f),
                       {Rate{acc / m, true},
                        se_n ? Rate{se / se_n, true} : Rate::undefined(),
                        sp_n ? Rate{sp / sp_n, true} : Rate::undefined(),
                        Rate{dice / m, true}});
    }
    if (!out_dir.empty()) report.write_csv(out_dir + "/folds.csv");
    return report;
}

}  // namespace cs2net
