#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cs2net/train.hpp"

using namespace cs2net;
using F = Tensor<float>;

namespace {

std::vector<Sample> tiny_dataset(int count, std::uint64_t seed, int dims = 2) {
    SynthConfig sc;
    sc.dims = dims;
    sc.size.assign(static_cast<size_t>(dims), dims == 2 ? 32 : 16);
    sc.seed = seed;
    std::vector<Sample> set;
    for (int i = 0; i < count; ++i) {
        sc.seed = seed + static_cast<std::uint64_t>(i);
        set.push_back(dims == 2 ? synth_2d(sc) : synth_3d(sc));
    }
    return set;
}

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.model.dims = 2;
    cfg.model.base_width = 2;
    cfg.batch_size = 2;
    cfg.max_iters = 4;
    cfg.base_lr = 1e-3;
    cfg.augment.enabled = false;
    cfg.seed = 1;
    return cfg;
}

}  // namespace

TEST_CASE("zero iterations leaves the model at initialization") {
    TrainConfig cfg = tiny_config();
    cfg.max_iters = 0;
    auto set = tiny_dataset(2, 5);
    TrainResult res = train(cfg, set, {});

    Rng rng(cfg.seed);
    Model<float> fresh(cfg.model, rng);
    ParamMap<float> pa = fresh.named_parameters(), pb = res.model.named_parameters();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].second.data() == pb[i].second.data());
    CHECK(res.log.entries.empty());
}

TEST_CASE("logged lr reproduces the poly schedule exactly, starting at base_lr") {
    TrainConfig cfg = tiny_config();
    cfg.max_iters = 6;
    auto set = tiny_dataset(2, 7);
    TrainResult res = train(cfg, set, {});
    REQUIRE(res.log.entries.size() == 6);
    PolySchedule s;
    s.base_lr = cfg.base_lr;
    s.max_iter = cfg.max_iters;
    for (size_t i = 0; i < res.log.entries.size(); ++i) {
        CHECK(res.log.entries[i].iter == static_cast<long>(i));
        CHECK(res.log.entries[i].lr == poly_lr(s, static_cast<long>(i)));
    }
    CHECK(res.log.entries[0].lr == cfg.base_lr);
    for (size_t i = 1; i < res.log.entries.size(); ++i)
        CHECK(res.log.entries[i].iter > res.log.entries[i - 1].iter);
}

TEST_CASE("training is deterministic for a fixed seed") {
    TrainConfig cfg = tiny_config();
    auto set = tiny_dataset(2, 9);
    TrainResult a = train(cfg, set, {});
    TrainResult b = train(cfg, set, {});
    ParamMap<float> pa = a.model.named_parameters(), pb = b.model.named_parameters();
    for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].second.data() == pb[i].second.data());
    REQUIRE(a.log.entries.size() == b.log.entries.size());
    for (size_t i = 0; i < a.log.entries.size(); ++i)
        CHECK(a.log.entries[i].loss == b.log.entries[i].loss);
}

TEST_CASE("one small step on a fixed batch decreases the batch loss") {
    // lr 1e-5 probe of the descent property
    TrainConfig cfg = tiny_config();
    cfg.max_iters = 1;
    cfg.base_lr = 1e-5;
    cfg.batch_size = 2;
    auto set = tiny_dataset(2, 11);
    TrainResult res = train(cfg, set, {});
    REQUIRE(res.log.entries.size() == 1);
    double loss_before = res.log.entries[0].loss;

    // recompute the same batch's loss after the update (train pathway uses
    // the whole 2-sample set as one batch, no augmentation, so this matches)
    res.model.set_training(true);
    std::vector<Tensor<float>> ins, gts;
    for (const auto& s : set) {
        ins.push_back(reshape(s.input, Shape{1, 1, 32, 32}));
        gts.push_back(reshape(s.mask, Shape{1, 1, 32, 32}));
    }
    F batch_in = stack_batch(std::vector<F>{select_batch(ins[0], 0), select_batch(ins[1], 0)});
    F batch_in4 = reshape(batch_in, Shape{2, 1, 32, 32});
    NoGradGuard ng;
    F p = res.model.forward(batch_in4);
    F g = reshape(stack_batch(std::vector<F>{select_batch(gts[0], 0), select_batch(gts[1], 0)}),
                  Shape{2, 1, 32, 32});
    double loss_after = static_cast<double>(bce_loss(p, g).item());
    CHECK(loss_after < loss_before);
}

TEST_CASE("nan loss aborts with iteration and seed in the message") {
    TrainConfig cfg = tiny_config();
    cfg.base_lr = 1e25;  // guaranteed numeric blow-up within a few steps
    cfg.max_iters = 20;
    cfg.seed = 3;
    auto set = tiny_dataset(2, 13);
    try {
        train(cfg, set, {});
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        std::string msg = e.what();
        CHECK(msg.find("iteration") != std::string::npos);
        CHECK(msg.find("seed") != std::string::npos);
    }
}

TEST_CASE("runlog csv round trips the schedule column") {
    TrainConfig cfg = tiny_config();
    auto set = tiny_dataset(2, 15);
    auto dir = std::filesystem::temp_directory_path() / "cs2net_test_runlog";
    std::filesystem::create_directories(dir);
    TrainResult res = train(cfg, set, {}, dir.string());
    CHECK(std::filesystem::exists(dir / "runlog.csv"));
    CHECK(std::filesystem::exists(res.final_checkpoint));
    CHECK(std::filesystem::exists(res.best_checkpoint));

    std::ifstream f(dir / "runlog.csv");
    std::string header;
    std::getline(f, header);
    CHECK(header == "iter,lr,loss");
    std::string line;
    int rows = 0;
    while (std::getline(f, line))
        if (!line.empty()) ++rows;
    CHECK(rows == static_cast<int>(res.log.entries.size()));
    std::filesystem::remove_all(dir);
}

TEST_CASE("final checkpoint restores the optimizer state") {
    TrainConfig cfg = tiny_config();
    auto set = tiny_dataset(2, 17);
    auto dir = std::filesystem::temp_directory_path() / "cs2net_test_ckpt_state";
    std::filesystem::create_directories(dir);
    TrainResult res = train(cfg, set, {}, dir.string());
    Model<float> m;
    LoadedCheckpoint lc = load_checkpoint(res.final_checkpoint, m);
    CHECK(lc.iteration == 4);
    bool has_adam = false;
    for (const auto& t : lc.extra) has_adam |= t.name.rfind("adam.m.", 0) == 0;
    CHECK(has_adam);
    std::filesystem::remove_all(dir);
}

TEST_CASE("inference is deterministic and thresholds at 0.5") {
    TrainConfig cfg = tiny_config();
    auto set = tiny_dataset(1, 19);
    TrainResult res = train(cfg, set, {});
    InferResult a = infer(res.model, set[0].input);
    InferResult b = infer(res.model, set[0].input);
    CHECK(a.probability.data() == b.probability.data());
    CHECK(a.mask == b.mask);
    for (size_t i = 0; i < a.mask.size(); ++i)
        CHECK(a.mask[i] == (a.probability.data()[i] >= 0.5f ? 1 : 0));
}

TEST_CASE("sliding window on a volume equal to one window equals direct forward") {
    ModelConfig mc;
    mc.dims = 3;
    mc.base_width = 2;
    Rng rng(21);
    Model<float> m(mc, rng);
    m.set_training(false);
    SynthConfig sc;
    sc.dims = 3;
    sc.size = {16, 16, 16};
    sc.seed = 23;
    Sample s = synth_3d(sc);
    InferResult direct = infer(m, s.input);
    InferResult tiled = infer(m, s.input, {16, 16, 16});
    for (size_t i = 0; i < direct.probability.data().size(); ++i)
        CHECK(tiled.probability.data()[i] ==
              doctest::Approx(direct.probability.data()[i]).epsilon(1e-6));
}

TEST_CASE("sliding window handles a volume larger than the window") {
    ModelConfig mc;
    mc.dims = 3;
    mc.base_width = 2;
    Rng rng(25);
    Model<float> m(mc, rng);
    m.set_training(false);
    SynthConfig sc;
    sc.dims = 3;
    sc.size = {32, 32, 16};
    sc.seed = 27;
    Sample s = synth_3d(sc);
    InferResult r = infer(m, s.input, {16, 16, 16});
    CHECK(r.probability.shape().dims == s.input.shape().dims);
    for (float v : r.probability.data()) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }
}

TEST_CASE("fold experiment structure: k rows plus aggregate, mean consistency") {
    TrainConfig cfg = tiny_config();
    cfg.max_iters = 2;
    auto set = tiny_dataset(4, 29);
    auto dir = std::filesystem::temp_directory_path() / "cs2net_test_folds";
    std::filesystem::create_directories(dir);
    MetricsReport rep = run_fold_experiment(cfg, set, 4, dir.string());
    REQUIRE(rep.rows.size() == 4);  // aggregate row appended by write_csv
    size_t acc_col = 0;
    REQUIRE(rep.columns[acc_col] == "acc");
    double mean = 0;
    int defined = 0;
    for (const auto& [name, vals] : rep.rows)
        if (vals[acc_col].defined) {
            mean += vals[acc_col].value;
            ++defined;
        }
    mean /= defined;
    CHECK(rep.aggregate()[acc_col].value == doctest::Approx(mean).epsilon(1e-12));
    CHECK(std::filesystem::exists(dir / "folds.csv"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("leave-one-out fold experiment runs") {
    TrainConfig cfg = tiny_config();
    cfg.max_iters = 1;
    cfg.batch_size = 2;
    auto set = tiny_dataset(3, 31);
    MetricsReport rep = run_fold_experiment(cfg, set, 3);
    CHECK(rep.rows.size() == 3);
}
