#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swan/features.hpp"
#include "swan/model.hpp"
#include "swan/nn.hpp"
#include "swan/srg.hpp"

namespace swan::harness {

struct TrainConfig {
    nn::AdamConfig adam;
    std::size_t batch_size = 256;
    std::size_t epochs = 3;
    std::uint64_t seed = 1;
    // Used when the harness builds the graph itself (sweeps, in-process runs).
    double cc_threshold = 0.05;
    std::size_t buckets = 10;
    ModelConfig model;

    void validate() const;
    // Flat object: lr, beta1, beta2, eps, batch_size, epochs, seed,
    // cc_threshold, buckets and every ModelConfig key. Unknown keys are errors.
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
    static TrainConfig load(const std::string& path);
};

// Sets one TrainConfig field by its JSON name (tau, n_a, lr, cc_threshold,
// ablation.srg, ...). Throws ConfigError for unknown names or bad values.
void apply_param(TrainConfig& config, const std::string& name, const std::string& value);

struct TrainResult {
    std::vector<double> epoch_loss;
    std::size_t steps = 0;
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

// Mini-batch Adam over a seeded shuffle. Throws ArgumentError on an empty
// dataset and TrainingError on a non-finite batch loss.
TrainResult train(CtrModel& model, std::span<const Example> data, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

inline constexpr std::size_t kMinSceneExamples = 30;
inline constexpr const char* kPooledScene = "other";

struct EvalReport {
    std::optional<double> auc_all;
    std::optional<double> auc_cold_start;
    // Scenes with >= 30 examples and both classes; smaller scenes pool into "other".
    std::map<std::string, double> per_scene;
    std::vector<std::string> single_class_scenes;
    std::optional<double> gini_improvement;
    bool gini_undefined = false;
    std::size_t examples = 0;
    std::size_t cold_start_examples = 0;

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static EvalReport load(const std::string& path);
};

// Per-scene improvement vs a reference: (AUC − 0.5)/(AUC_ref − 0.5) − 1,
// floored at 0, over scenes both reports list (pooled bucket excluded) whose
// reference AUC exceeds 0.5.
std::vector<double> improvement_ratios(const EvalReport& model, const EvalReport& reference);

EvalReport evaluate(CtrModel& model, std::span<const Example> test, const EvalReport* reference = nullptr);

// Fraction of selector gates within `tol` of 0 or 1 over `examples`.
double gate_saturation(SwanModel& model, std::span<const Example> examples, double tol = 0.05);

enum class Baseline { Swan, Dnn };

struct RunResult {
    std::unique_ptr<CtrModel> model;
    TrainResult curve;
    EvalReport report;
};

// Builds the model (graph required for SwAN) with parameters seeded from
// config.seed, trains it, and evaluates on `test`.
RunResult fit_and_evaluate(Baseline kind, const FeatureSchema& schema, std::span<const Example> train_set,
                           std::span<const Example> test, const srg::SceneRelationGraph* graph,
                           const TrainConfig& config, const EvalReport* reference = nullptr);

}  // namespace swan::harness
