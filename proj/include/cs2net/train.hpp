#ifndef CS2NET_TRAIN_HPP
#define CS2NET_TRAIN_HPP

#include <string>
#include <vector>

#include "cs2net/data.hpp"
#include "cs2net/loss.hpp"
#include "cs2net/metrics.hpp"
#include "cs2net/model.hpp"
#include "cs2net/optim.hpp"

namespace cs2net {

enum class LossKind { bce, combined };
enum class ScheduleUnit { step, epoch };

struct TrainConfig {
    ModelConfig model;
    LossConfig loss_cfg;
    double base_lr = 1e-4;
    double weight_decay = 5e-4;
    int batch_size = 8;
    long max_iters = 100;  // optimizer steps (schedule counts steps or epochs, see unit)
    LossKind loss = LossKind::bce;
    ScheduleUnit schedule_unit = ScheduleUnit::step;
    AugmentConfig augment;
    std::uint64_t seed = 0;
    long val_interval = 0;  // 0 = once per epoch
    bool verbose = false;

    void validate() const {
        model.validate();
        loss_cfg.validate();
        if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
        if (max_iters < 0) throw ConfigError("TrainConfig: max_iters must be >= 0");
    }
};

struct RunLogEntry {
    long iter;
    double lr;
    double loss;
};

struct RunLog {
    std::vector<RunLogEntry> entries;
    std::vector<std::pair<long, double>> val_dice;  // (iter, dice)
    void write_csv(const std::string& path) const;
};

struct TrainResult {
    Model<float> model;  // final state
    RunLog log;
    double best_val_dice = -1.0;
    long best_iter = -1;
    std::string best_checkpoint;   // path, empty if out_dir empty
    std::string final_checkpoint;  // path, empty if out_dir empty
};

// Deterministic for a fixed seed. Writes best.ckpt / final.ckpt under out_dir
// when it is non-empty. Raises NumericError on a NaN loss, with the failing
// iteration in the message.
TrainResult train(const TrainConfig& cfg, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set, const std::string& out_dir = "");

struct InferResult {
    Tensor<float> probability;  // [1, spatial...]
    std::vector<std::uint8_t> mask;  // probability >= 0.5
};

// Eval-mode forward. A 3D input larger than `window` (when window is
// non-empty) is tiled with 50% overlap and mean blending.
InferResult infer(Model<float>& model, const Tensor<float>& input,
                  const std::vector<Index>& window = {});

// Mean dice over a sample set at threshold 0.5.
double evaluate_dice(Model<float>& model, const std::vector<Sample>& samples);

// Trains one model per fold on the remaining folds and evaluates on the
// held-out fold. Returns a report with one row per fold plus the aggregate.
MetricsReport run_fold_experiment(const TrainConfig& cfg, const std::vector<Sample>& dataset,
                                  int k, const std::string& out_dir = "");

}  // namespace cs2net

#endif
