#pragma once

// End-to-end models over a shared feature space: SwAN (SRG neighbours → SAN →
// CFR → AEM → decision layer) and the plain DNN baseline, plus the binary
// model format.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swan/aem.hpp"
#include "swan/autodiff.hpp"
#include "swan/cfr.hpp"
#include "swan/features.hpp"
#include "swan/head.hpp"
#include "swan/nn.hpp"
#include "swan/san.hpp"
#include "swan/srg.hpp"

namespace swan {

// Component switches; `false` ablates the component.
struct Ablation {
    bool srg = true;
    bool aem = true;
    bool cfr = true;
    bool loss_var = true;
    bool loss_cos = true;

    bool operator==(const Ablation&) const = default;
};

struct ModelConfig {
    std::size_t d = 16;
    std::size_t n_a = 10;
    std::size_t n_s = 10;
    double tau = 1e-3;
    std::size_t k = 5;
    int min_weight = 1;
    std::vector<std::size_t> san_hidden{32, 16};
    std::vector<std::size_t> expert_hidden{32, 16};
    std::size_t expert_out = 16;
    std::vector<std::size_t> selector_hidden{};
    std::vector<std::size_t> threshold_hidden{};
    std::vector<std::size_t> gate_hidden{};
    std::vector<std::size_t> final_hidden{16};
    std::vector<std::size_t> dnn_hidden{64, 32};
    bool gate_softmax = true;
    head::VarLossSign var_loss_sign = head::VarLossSign::Negated;
    bool hard_gate_inference = false;
    Ablation ablation;
    head::LossWeights loss;
    std::uint64_t seed = 1;

    void validate() const;
    nlohmann::json to_json() const;
    // Reads the keys it knows and leaves the rest at their defaults.
    static ModelConfig from_json(const nlohmann::json& j);
};

enum class ModelKind : std::uint32_t { Swan = 1, Dnn = 2 };
const char* to_string(ModelKind kind);

enum class Mode { Train, Infer };

class CtrModel {
public:
    virtual ~CtrModel() = default;

    virtual ModelKind kind() const noexcept = 0;
    // ŷ for a batch, [B × 1].
    virtual ad::Var forward(ad::Tape& tape, std::span<const Example* const> batch, Mode mode) const = 0;
    // Training objective for a batch.
    virtual ad::Var loss(ad::Tape& tape, std::span<const Example* const> batch) const = 0;
    // Lets the model see whole evaluation scenes up front (cold-start profiling).
    virtual void prepare_scenes(std::span<const Example> examples) { (void)examples; }

    std::vector<double> predict(std::span<const Example> examples, std::size_t batch_size = 512);

    const ModelConfig& config() const noexcept { return config_; }
    const FeatureSchema& schema() const noexcept { return schema_; }
    const SceneCatalog& catalog() const noexcept { return catalog_; }
    nn::ParamStore& params() noexcept { return store_; }
    const nn::ParamStore& params() const noexcept { return store_; }

protected:
    CtrModel(FeatureSchema schema, SceneCatalog catalog, ModelConfig config);

    static ad::Var labels_of(ad::Tape& tape, std::span<const Example* const> batch);

    FeatureSchema schema_;
    SceneCatalog catalog_;
    ModelConfig config_;
    nn::ParamStore store_;
};

// Fits numeric buckets on the training split and collects the known scenes.
struct PreparedSchema {
    FeatureSchema schema;
    SceneCatalog catalog;
};
PreparedSchema prepare_schema(FeatureSchema schema, std::span<const Example> train);

struct SwanPass {
    ad::Var yhat;                // [B × 1]
    ad::Var w;                   // [B × N_a] selector gates (ones when AEM is ablated)
    ad::Var s;                   // [B × K] attention weights; unset when no row has neighbours
    std::vector<ad::Var> aeg;    // N_a × [B × d_expert]
};

class SwanModel final : public CtrModel {
public:
    SwanModel(FeatureSchema fitted_schema, SceneCatalog catalog, srg::SceneRelationGraph graph, ModelConfig config);
    SwanModel(const SwanModel&) = delete;
    SwanModel& operator=(const SwanModel&) = delete;

    static std::unique_ptr<SwanModel> create(FeatureSchema schema, std::span<const Example> train,
                                             srg::SceneRelationGraph graph, ModelConfig config);

    ModelKind kind() const noexcept override { return ModelKind::Swan; }
    ad::Var forward(ad::Tape& tape, std::span<const Example* const> batch, Mode mode) const override;
    ad::Var loss(ad::Tape& tape, std::span<const Example* const> batch) const override;
    void prepare_scenes(std::span<const Example> examples) override;

    SwanPass run(ad::Tape& tape, std::span<const Example* const> batch, Mode mode) const;

    // Catalog indices of the similar scenes used for `scene_id`. Known graph
    // nodes use their stored profile; other scenes are profiled from `items`
    // (or from examples passed to prepare_scenes earlier). A scene is never its
    // own neighbour.
    const std::vector<std::size_t>& neighbors(const std::string& scene_id,
                                              std::span<const Example* const> items = {}) const;
    // Same resolution from an explicit profile, bypassing the cache.
    std::vector<std::size_t> neighbors_from_profile(const srg::SceneProfile& profile) const;

    // Selector gates W for every example, row-major [n × N_a].
    std::vector<double> gate_values(std::span<const Example> examples, std::size_t batch_size = 512);

    const srg::SceneRelationGraph& graph() const noexcept { return graph_; }
    const FeatureEmbeddings& embeddings() const noexcept { return emb_; }
    san::SanParams& san_params() noexcept { return san_; }
    cfr::CfrTables& cfr_tables() noexcept { return cfr_; }
    aem::AemParams& aem_params() noexcept { return aem_; }
    head::HeadParams& head_params() noexcept { return head_; }

private:
    std::vector<std::size_t> random_neighbors(const std::string& scene_id, std::size_t count) const;

    srg::SceneRelationGraph graph_;
    FeatureEmbeddings emb_;
    san::SanParams san_;
    cfr::CfrTables cfr_;
    aem::AemParams aem_;
    head::HeadParams head_;
    mutable std::map<std::string, std::vector<std::size_t>> neighbor_cache_;
};

// Single-tower baseline: every feature embedding, the scene id, and each scene
// attribute concatenated into one MLP; cross-entropy only.
class DnnModel final : public CtrModel {
public:
    DnnModel(FeatureSchema fitted_schema, SceneCatalog catalog, ModelConfig config);
    DnnModel(const DnnModel&) = delete;
    DnnModel& operator=(const DnnModel&) = delete;

    static std::unique_ptr<DnnModel> create(FeatureSchema schema, std::span<const Example> train, ModelConfig config);

    ModelKind kind() const noexcept override { return ModelKind::Dnn; }
    ad::Var forward(ad::Tape& tape, std::span<const Example* const> batch, Mode mode) const override;
    ad::Var loss(ad::Tape& tape, std::span<const Example* const> batch) const override;

private:
    FeatureEmbeddings emb_;
    nn::Mlp tower_;
};

inline constexpr char kModelMagic[9] = "SWANMDL1";
inline constexpr std::uint32_t kModelVersion = 1;

// Layout: magic, u32 version, u32 kind, u64 length + JSON header (config,
// schema, catalog, graph), u64 tensor count, then per tensor: u32 name length,
// name, u32 rank, u64 dims, little-endian f64 data.
void save_model(const CtrModel& model, const std::string& path);
std::unique_ptr<CtrModel> load_model(const std::string& path);

}  // namespace swan
