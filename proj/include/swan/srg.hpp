#pragma once

// Scene Relation Graph: scenes are profiled by aggregate statistics of the
// item features most correlated with clicks, each aggregate is bucketed, and
// the edge weight between two scenes is the number of slots whose buckets
// agree.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "swan/features.hpp"

namespace swan::srg {

enum class Aggregate : std::uint8_t { Mean, Var, Max, Min };
inline constexpr std::size_t kAggregatesPerFeature = 4;
const char* to_string(Aggregate a);

// Pearson correlation; nullopt when either side has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

struct KeyFeature {
    std::string name;
    double correlation = 0.0;
};

// Features with |r| >= cc_threshold, sorted by |r| descending then name.
// Zero-variance columns are dropped. `cap` keeps only the first n.
std::vector<KeyFeature> select_key_features(std::span<const std::string> names,
                                            std::span<const std::vector<double>> columns,
                                            std::span<const double> labels, double cc_threshold,
                                            std::optional<std::size_t> cap = std::nullopt);

// Item-group features of a dataset (categorical ones by index) vs. the click label.
std::vector<KeyFeature> select_key_features(const FeatureSchema& schema, std::span<const Example> examples,
                                            double cc_threshold, std::optional<std::size_t> cap = std::nullopt);

// Per key feature (outer) and aggregate (inner, Mean/Var/Max/Min): population
// statistics over the scene's items. columns[f] holds feature f's values.
std::vector<double> profile_scene(std::span<const std::vector<double>> columns);

struct ProfileSlot {
    std::string feature;
    Aggregate aggregate = Aggregate::Mean;

    bool operator==(const ProfileSlot&) const = default;
};

struct SceneProfile {
    std::string scene_id;
    std::vector<ProfileSlot> slots;
    std::vector<std::uint32_t> categories;
};

struct RawProfile {
    std::string scene_id;
    std::vector<double> aggregates;
};

// Bucket boundaries per slot, fitted jointly over all scenes.
struct Categorizer {
    std::vector<ProfileSlot> slots;
    std::vector<EqualFrequencyBuckets> columns;
    std::size_t buckets = 0;

    SceneProfile apply(const RawProfile& raw) const;
};

struct Categorized {
    std::vector<SceneProfile> profiles;
    Categorizer categorizer;
};

Categorized categorize(std::span<const RawProfile> raw, std::span<const std::string> key_features, std::size_t buckets);

class SceneRelationGraph {
public:
    SceneRelationGraph() = default;

    std::size_t node_count() const noexcept { return nodes_.size(); }
    const std::vector<SceneProfile>& nodes() const noexcept { return nodes_; }
    std::optional<std::size_t> index_of(const std::string& scene_id) const;
    const SceneProfile& node(std::size_t i) const { return nodes_.at(i); }

    // Stored weight, 0 when no edge.
    int weight(const std::string& a, const std::string& b) const;
    const std::map<std::pair<std::string, std::string>, int>& edges() const noexcept { return edges_; }

    const std::vector<KeyFeature>& key_features() const noexcept { return key_features_; }
    const Categorizer& categorizer() const noexcept { return categorizer_; }
    double cc_threshold() const noexcept { return cc_threshold_; }

    // Profiles a scene that is not (necessarily) a node, from its items,
    // with the graph's key features and bucket boundaries.
    SceneProfile profile_target(const FeatureSchema& schema, const std::string& scene_id,
                                std::span<const Example* const> items) const;

    nlohmann::json to_json() const;
    static SceneRelationGraph from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static SceneRelationGraph load(const std::string& path);

    friend SceneRelationGraph build_graph(std::vector<SceneProfile> profiles);
    friend SceneRelationGraph build_graph_from_dataset(const FeatureSchema&, std::span<const Example>, double,
                                                       std::size_t, std::optional<std::size_t>);

private:
    std::vector<SceneProfile> nodes_;
    std::map<std::string, std::size_t> by_id_;
    std::map<std::pair<std::string, std::string>, int> edges_;
    std::vector<KeyFeature> key_features_;
    Categorizer categorizer_;
    double cc_threshold_ = 0.0;
};

// Number of slots with equal category. Throws SchemaError on layout mismatch.
int shared_slots(const SceneProfile& a, const SceneProfile& b);

// Undirected, zero-weight edges omitted, edge keys ordered (min id, max id).
SceneRelationGraph build_graph(std::vector<SceneProfile> profiles);

// Full pipeline: key features over all examples, profiles over each scene's
// examples, joint categorization, graph.
SceneRelationGraph build_graph_from_dataset(const FeatureSchema& schema, std::span<const Example> examples,
                                            double cc_threshold, std::size_t buckets,
                                            std::optional<std::size_t> cap = std::nullopt);

struct Neighbor {
    std::string scene_id;
    int weight = 0;

    bool operator==(const Neighbor&) const = default;
};

// Top-k graph nodes by shared-slot count against `target`, weight >= min_weight,
// ties by ascending scene id. `exclude` drops one node (the target itself when
// it is a known scene).
std::vector<Neighbor> similar_scenes(const SceneRelationGraph& graph, const SceneProfile& target, std::size_t k,
                                     int min_weight, const std::optional<std::string>& exclude = std::nullopt);

}  // namespace swan::srg
