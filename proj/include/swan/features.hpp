#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swan/autodiff.hpp"
#include "swan/nn.hpp"

namespace swan {

enum class FeatureKind { Categorical, Numeric };
enum class FeatureGroup { User, Item, Scene, Other };

const char* to_string(FeatureKind kind);
const char* to_string(FeatureGroup group);

// Equal-frequency bucketing. A value's bucket is the number of thresholds it
// strictly exceeds; thresholds are the order statistics at ranks ceil(c·n/B)
// for c = 1..B-1, so a training value of rank r lands in floor(r·B/n).
struct EqualFrequencyBuckets {
    std::vector<double> thresholds;

    static EqualFrequencyBuckets fit(std::vector<double> values, std::size_t buckets);
    std::uint32_t index(double v) const;
    std::size_t bucket_count() const noexcept { return thresholds.size() + 1; }
};

struct FeatureDescriptor {
    std::string name;
    FeatureKind kind = FeatureKind::Categorical;
    FeatureGroup group = FeatureGroup::Other;
    // Categorical: either explicit string labels or an integer vocabulary [0, vocab_size).
    std::size_t vocab_size = 0;
    std::vector<std::string> vocab;
    // Numeric: bucket count and (after fitting) the bucket thresholds.
    std::size_t buckets = 10;
    std::optional<EqualFrequencyBuckets> boundaries;

    // Distinct embedding indices, excluding the reserved out-of-vocabulary row.
    std::size_t cardinality() const;
    std::size_t oov_index() const { return cardinality(); }
    // Embedding index of a stored example value.
    std::uint32_t embed_index(double stored) const;
};

class FeatureSchema {
public:
    FeatureSchema() = default;
    explicit FeatureSchema(std::vector<FeatureDescriptor> descriptors);

    static FeatureSchema from_json(const nlohmann::json& j);
    static FeatureSchema load(const std::string& path);
    nlohmann::json to_json() const;
    void save(const std::string& path) const;

    const std::vector<FeatureDescriptor>& descriptors() const noexcept { return descriptors_; }
    std::vector<FeatureDescriptor>& descriptors() noexcept { return descriptors_; }
    const FeatureDescriptor& at(std::size_t i) const { return descriptors_.at(i); }
    std::size_t size() const noexcept { return descriptors_.size(); }
    std::optional<std::size_t> index_of(const std::string& name) const;
    // Descriptor indices of one group, in schema order.
    std::vector<std::size_t> group(FeatureGroup g) const;
    // E_o members: item and other groups, in schema order.
    std::vector<std::size_t> other_and_item() const;

private:
    std::vector<FeatureDescriptor> descriptors_;
    std::map<std::string, std::size_t> by_name_;
};

// One impression. `values` follows schema order: categorical entries hold the
// vocabulary index (oov_index() when unseen), numeric entries the raw value.
struct Example {
    std::vector<double> values;
    std::string scene_id;
    int label = 0;
};

struct LoadResult {
    std::vector<Example> examples;
    std::size_t oov_count = 0;
};

// JSON-lines: {"user": {...}, "item": {...}, "scene_id": "...", "label": 0|1}.
// User-group features live under "user"; item, scene, and other groups under "item".
LoadResult load_dataset(const std::string& path, const FeatureSchema& schema);
LoadResult parse_dataset(std::istream& in, const FeatureSchema& schema, const std::string& source);
void write_dataset(const std::string& path, const FeatureSchema& schema, std::span<const Example> examples);
nlohmann::json example_to_json(const FeatureSchema& schema, const Example& ex);

// Fits thresholds for every numeric descriptor lacking them, over `examples`.
void fit_numeric_buckets(FeatureSchema& schema, std::span<const Example> examples);

// Known training scenes with their scene-attribute indices (modal value per
// attribute over the scene's examples, lower index on ties).
class SceneCatalog {
public:
    SceneCatalog() = default;
    static SceneCatalog build(const FeatureSchema& schema, std::span<const Example> examples);

    std::size_t size() const noexcept { return ids_.size(); }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    std::optional<std::size_t> index_of(const std::string& id) const;
    // Attribute embedding indices of a known scene, in schema scene-group order.
    const std::vector<std::uint32_t>& attributes(std::size_t scene) const { return attributes_.at(scene); }

    nlohmann::json to_json() const;
    static SceneCatalog from_json(const nlohmann::json& j);

private:
    std::vector<std::string> ids_;
    std::map<std::string, std::size_t> by_id_;
    std::vector<std::vector<std::uint32_t>> attributes_;
};

struct EmbeddingBundle {
    ad::Var e_u;       // [B × n_user·d], user features concatenated in schema order
    ad::Var e_o;       // [B × n_other·d], item and other features concatenated in schema order
    ad::Var e_t_id;    // [B × d], scene-id row; unseen scenes use the OOV row
    ad::Var e_t_attr;  // [B × d], sum of scene-attribute embeddings
    std::vector<ad::Var> attrs;  // one [B × d] lookup per scene attribute
    std::vector<bool> cold_start;
};

// Shared embedding tables: one per feature plus the scene-id table. Every
// table has cardinality + 1 rows; the last row is the reserved OOV row. The
// scene-id OOV row starts at zero and never sees a training gradient.
class FeatureEmbeddings {
public:
    FeatureEmbeddings() = default;
    FeatureEmbeddings(nn::ParamStore& store, const FeatureSchema& schema, const SceneCatalog& scenes,
                      std::size_t dim, nn::Rng& rng);

    EmbeddingBundle embed(ad::Tape& tape, std::span<const Example* const> batch) const;
    // Embedding of one feature's indices: [indices.size() × d].
    ad::Var lookup(ad::Tape& tape, std::size_t feature, std::vector<std::size_t> indices) const;
    // E_s for known scenes: id row + summed attribute rows, [scenes.size() × d].
    ad::Var scene_embedding(ad::Tape& tape, std::span<const std::size_t> scenes) const;

    std::size_t dim() const noexcept { return dim_; }
    // An empty group embeds as one zero block of width d.
    std::size_t user_width() const noexcept { return std::max<std::size_t>(user_.size(), 1) * dim_; }
    std::size_t other_width() const noexcept { return std::max<std::size_t>(other_.size(), 1) * dim_; }
    const std::vector<std::size_t>& scene_features() const noexcept { return scene_; }

private:
    const FeatureSchema* schema_ = nullptr;
    const SceneCatalog* scenes_ = nullptr;
    std::size_t dim_ = 0;
    std::vector<ad::Parameter*> tables_;
    ad::Parameter* scene_id_table_ = nullptr;
    std::vector<std::size_t> user_;
    std::vector<std::size_t> other_;
    std::vector<std::size_t> scene_;
};

inline constexpr double kEmbeddingInitBound = 0.05;

}  // namespace swan
