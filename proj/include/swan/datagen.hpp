#pragma once

// Synthetic dynamic multi-scene CTR data. Every scene belongs to a hidden
// archetype. The archetype shifts the distribution of the scene's item
// features (visible in aggregate, weak per item), sets the user-segment
// affinity that drives clicks, and is reflected noisily in the scene
// attributes. Cold-start scenes draw archetypes from the same pool but only
// appear in the test split.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swan/features.hpp"

namespace swan::datagen {

struct GenConfig {
    std::size_t archetypes = 4;
    std::size_t train_scenes = 60;
    std::size_t cold_start_scenes = 20;
    std::size_t users = 2000;
    std::size_t items_per_scene = 60;
    std::size_t examples_per_scene = 834;
    std::size_t user_features = 4;
    std::size_t item_features = 8;
    std::size_t scene_attribute_features = 3;
    double label_noise = 0.1;
    std::uint64_t seed = 1;
    // Optional knobs.
    double positive_rate = 0.25;
    double warm_test_fraction = 0.2;  // held-out examples of train scenes, per scene
    double archetype_shift = 0.5;     // item-feature mean shift between archetypes, in item sd
    double attribute_fidelity = 0.4;  // chance a scene attribute shows its archetype's value

    void validate() const;
    nlohmann::json to_json() const;
    static GenConfig from_json(const nlohmann::json& j);
    static GenConfig load(const std::string& path);
};

inline constexpr std::size_t kUserSegments = 8;
inline constexpr std::size_t kAttributeVocab = 6;

struct SceneTruth {
    std::size_t archetype = 0;
    double offset = 0.0;
    bool cold_start = false;
};

struct GroundTruth {
    std::vector<std::vector<double>> preferences;  // [archetype][user segment] affinity
    std::vector<double> item_coefficients;
    std::vector<std::vector<std::uint32_t>> canonical_attributes;  // [archetype][attribute]
    std::vector<std::uint32_t> user_segments;
    std::map<std::string, SceneTruth> scenes;
    double bias = 0.0;

    nlohmann::json to_json() const;
    void save(const std::string& path) const;
};

struct Dataset {
    FeatureSchema schema;
    std::vector<Example> train;
    std::vector<Example> test;
    GroundTruth truth;
};

// Deterministic in `config.seed`. Throws ArgumentError on an invalid config.
Dataset generate(const GenConfig& config);

// Noiseless click logit z for an example, before the bias; label = [z + bias >= 0]
// before flipping.
double clean_logit(const GroundTruth& truth, const FeatureSchema& schema, const Example& ex);

}  // namespace swan::datagen
