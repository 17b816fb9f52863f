#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "scenegen/losses/losses.hpp"
#include "scenegen/model/model.hpp"
#include "scenegen/numerics/optim.hpp"
#include "scenegen/synth/scene.hpp"
#include "scenegen/train/batching.hpp"

namespace scenegen {

struct TrainConfig {
    real lr = real(5e-5);
    real weight_decay = real(0.01);
    int batch_size = 8;
    int epochs = 240;
    real lambda_floor = real(0.2);   // pose/collision weight floor
    real lambda_decay = real(0.99);  // per-epoch decay factor
    LossWeights weights;             // mu terms and Huber thresholds
    real cond_dropout_p = real(0.1);
    uint64_t seed = 0;
    std::string trainable = "global_only";  // or "all"
    AblationFlags ablation;
    int collision_res = 64;
    real collision_temp = 1;

    static TrainConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// One JSONL log line per optimizer step.
struct StepRecord {
    int64_t step = 0;
    int64_t epoch = 0;
    LossBreakdown loss;

    nlohmann::json to_json() const;
};

// Marks the trainable parameter set. "global_only" mirrors the frozen-encoder
// regime: scene-level attention weights, the prefix tokens and the position
// head. "all" trains everything except the separately trained structure
// decoder; "decoder_only" is the decoder pretraining mode.
void select_trainable(ParamStore& params, const std::string& mode);

class Trainer {
public:
    Trainer(SceneGenModel model, const TrainConfig& cfg);

    // One optimizer step over a same-asset-count batch of scenes. Throws
    // TrainingError with a diagnostic dump when any loss term is non-finite.
    LossBreakdown train_step(const std::vector<const SceneSample*>& batch);

    // One shuffled full pass; appends a JSONL record per step when log != null.
    std::vector<StepRecord> train_epoch(const std::vector<SceneSample>& corpus,
                                        std::ostream* log);

    // Directory layout: weights.sgck, optimizer.sgck, state.json.
    void save_checkpoint(const std::string& dir) const;
    void load_checkpoint(const std::string& dir);
    // Rebuilds model + optimizer + rng from a checkpoint directory.
    static Trainer from_checkpoint(const std::string& dir);

    real current_lambda() const;

    SceneGenModel& model() { return model_; }
    const SceneGenModel& model() const { return model_; }
    const TrainConfig& config() const { return cfg_; }
    int64_t step() const { return step_; }
    int64_t epoch() const { return epoch_; }
    Rng& rng() { return rng_; }

private:
    SceneGenModel model_;
    TrainConfig cfg_;
    AdamW opt_;
    Rng rng_;
    int64_t step_ = 0;
    int64_t epoch_ = 0;
};

// Structure-decoder pretraining on clean latent codes plus Gaussian noise;
// returns the held-out decoded-shell IoU (held-out = every 5th asset).
real train_decoder(SceneGenModel& model, const std::vector<SceneSample>& corpus, int epochs,
                   real lr, real noise_std, uint64_t seed, std::ostream* log);

}  // namespace scenegen
