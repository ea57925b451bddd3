#include "swan/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "swan/error.hpp"

namespace swan::datagen {

using nlohmann::json;

void GenConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) throw ArgumentError(std::string("gen config: ") + name + " must be positive");
    };
    positive(archetypes, "archetypes");
    positive(train_scenes, "train_scenes");
    positive(cold_start_scenes, "cold_start_scenes");
    positive(users, "users");
    positive(items_per_scene, "items_per_scene");
    positive(examples_per_scene, "examples_per_scene");
    positive(user_features, "user_features");
    positive(item_features, "item_features");
    positive(scene_attribute_features, "scene_attribute_features");
    if (!(label_noise >= 0.0 && label_noise < 0.5)) throw ArgumentError("gen config: label_noise must be in [0, 0.5)");
    if (!(positive_rate > label_noise && positive_rate < 1.0 - label_noise))
        throw ArgumentError("gen config: positive_rate must lie strictly between label_noise and 1 - label_noise");
    if (!(warm_test_fraction >= 0.0 && warm_test_fraction <= 1.0))
        throw ArgumentError("gen config: warm_test_fraction must be in [0, 1]");
    if (!(archetype_shift >= 0.0)) throw ArgumentError("gen config: archetype_shift must be non-negative");
    if (!(attribute_fidelity >= 0.0 && attribute_fidelity <= 1.0))
        throw ArgumentError("gen config: attribute_fidelity must be in [0, 1]");
}

json GenConfig::to_json() const {
    return json{{"archetypes", archetypes},
                {"train_scenes", train_scenes},
                {"cold_start_scenes", cold_start_scenes},
                {"users", users},
                {"items_per_scene", items_per_scene},
                {"examples_per_scene", examples_per_scene},
                {"user_features", user_features},
                {"item_features", item_features},
                {"scene_attribute_features", scene_attribute_features},
                {"label_noise", label_noise},
                {"seed", seed},
                {"positive_rate", positive_rate},
                {"warm_test_fraction", warm_test_fraction},
                {"archetype_shift", archetype_shift},
                {"attribute_fidelity", attribute_fidelity}};
}

GenConfig GenConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("gen config must be a JSON object");
    GenConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "archetypes") c.archetypes = value.get<std::size_t>();
            else if (key == "train_scenes") c.train_scenes = value.get<std::size_t>();
            else if (key == "cold_start_scenes") c.cold_start_scenes = value.get<std::size_t>();
            else if (key == "users") c.users = value.get<std::size_t>();
            else if (key == "items_per_scene") c.items_per_scene = value.get<std::size_t>();
            else if (key == "examples_per_scene") c.examples_per_scene = value.get<std::size_t>();
            else if (key == "user_features") c.user_features = value.get<std::size_t>();
            else if (key == "item_features") c.item_features = value.get<std::size_t>();
            else if (key == "scene_attribute_features") c.scene_attribute_features = value.get<std::size_t>();
            else if (key == "label_noise") c.label_noise = value.get<double>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "positive_rate") c.positive_rate = value.get<double>();
            else if (key == "warm_test_fraction") c.warm_test_fraction = value.get<double>();
            else if (key == "archetype_shift") c.archetype_shift = value.get<double>();
            else if (key == "attribute_fidelity") c.attribute_fidelity = value.get<double>();
            else throw ConfigError("gen config: unknown field '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("gen config: ") + e.what());
    }
    c.validate();
    return c;
}

GenConfig GenConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open gen config " + path);
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ParseError(path, 0, e.byte, e.what());
    }
}

json GroundTruth::to_json() const {
    json scenes_j = json::object();
    for (const auto& [id, s] : scenes)
        scenes_j[id] = {{"archetype", s.archetype}, {"offset", s.offset}, {"cold_start", s.cold_start}};
    return json{{"preferences", preferences},
                {"item_coefficients", item_coefficients},
                {"canonical_attributes", canonical_attributes},
                {"user_segments", user_segments},
                {"scenes", scenes_j},
                {"bias", bias}};
}

void GroundTruth::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << to_json().dump(2) << '\n';
}

namespace {

constexpr double kPreferenceScale = 1.5;
constexpr double kSceneOffsetSd = 0.25;
constexpr double kSegmentFidelity = 0.7;

std::string scene_name(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%03zu", prefix, i);
    return buf;
}

// Item feature k's click coefficient: geometrically graded so the features
// span a range of label correlations; the last two features (when there are
// at least four) carry no signal at all.
std::vector<double> item_coefficients(std::size_t n) {
    const std::size_t silent = n >= 4 ? 2 : 0;
    std::vector<double> beta(n, 0.0);
    for (std::size_t k = 0; k + silent < n; ++k) beta[k] = 0.8 * std::pow(0.55, static_cast<double>(k));
    return beta;
}

}  // namespace

double clean_logit(const GroundTruth& truth, const FeatureSchema& schema, const Example& ex) {
    const auto scene = truth.scenes.find(ex.scene_id);
    if (scene == truth.scenes.end()) throw ArgumentError("clean_logit: unknown scene " + ex.scene_id);
    const auto users = schema.group(FeatureGroup::User);
    const auto items = schema.group(FeatureGroup::Item);
    if (users.empty() || items.size() != truth.item_coefficients.size())
        throw SchemaError("clean_logit: schema does not match the generator layout");
    const auto segment = static_cast<std::size_t>(ex.values.at(users[0]));
    double z = truth.preferences.at(scene->second.archetype).at(segment) + scene->second.offset;
    for (std::size_t k = 0; k < items.size(); ++k) z += truth.item_coefficients[k] * ex.values.at(items[k]);
    return z;
}

Dataset generate(const GenConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

    const std::size_t A = config.archetypes;
    const std::size_t F = config.item_features;
    Dataset out;
    GroundTruth& truth = out.truth;

    std::vector<FeatureDescriptor> desc;
    for (std::size_t j = 0; j < config.user_features; ++j) {
        FeatureDescriptor d;
        d.name = "user_" + std::to_string(j);
        d.kind = FeatureKind::Categorical;
        d.group = FeatureGroup::User;
        d.vocab_size = j < 2 ? kUserSegments : 4 + j;
        desc.push_back(d);
    }
    for (std::size_t k = 0; k < F; ++k) {
        FeatureDescriptor d;
        d.name = "item_" + std::to_string(k);
        d.kind = FeatureKind::Numeric;
        d.group = FeatureGroup::Item;
        d.buckets = 10;
        desc.push_back(d);
    }
    for (std::size_t a = 0; a < config.scene_attribute_features; ++a) {
        FeatureDescriptor d;
        d.name = "scene_attr_" + std::to_string(a);
        d.kind = FeatureKind::Categorical;
        d.group = FeatureGroup::Scene;
        d.vocab_size = kAttributeVocab;
        desc.push_back(d);
    }
    out.schema = FeatureSchema(std::move(desc));

    truth.preferences.assign(A, std::vector<double>(kUserSegments));
    for (auto& row : truth.preferences)
        for (auto& v : row) v = kPreferenceScale * normal(rng);
    truth.item_coefficients = item_coefficients(F);
    std::vector<std::vector<double>> mu(A, std::vector<double>(F, 0.0));
    std::vector<std::vector<double>> sigma(A, std::vector<double>(F, 1.0));
    for (std::size_t a = 0; a < A; ++a) {
        for (std::size_t k = 0; k < F; ++k) {
            if (truth.item_coefficients[k] == 0.0) continue;
            mu[a][k] = config.archetype_shift * normal(rng);
            sigma[a][k] = 0.6 + 0.8 * unit(rng);
        }
    }
    truth.canonical_attributes.assign(A, std::vector<std::uint32_t>(config.scene_attribute_features));
    for (auto& row : truth.canonical_attributes)
        for (auto& v : row) v = static_cast<std::uint32_t>(pick(kAttributeVocab));

    std::vector<std::vector<double>> user_values(config.users);
    truth.user_segments.resize(config.users);
    for (std::size_t u = 0; u < config.users; ++u) {
        const std::size_t seg = pick(kUserSegments);
        truth.user_segments[u] = static_cast<std::uint32_t>(seg);
        auto& vals = user_values[u];
        vals.push_back(static_cast<double>(seg));
        for (std::size_t j = 1; j < config.user_features; ++j) {
            if (j == 1) vals.push_back(static_cast<double>(unit(rng) < kSegmentFidelity ? seg : pick(kUserSegments)));
            else vals.push_back(static_cast<double>(pick(4 + j)));
        }
    }

    struct Pending {
        Example ex;
        double z;
        bool test;
    };
    std::vector<Pending> pending;
    const std::size_t warm = static_cast<std::size_t>(
        std::llround(config.warm_test_fraction * static_cast<double>(config.examples_per_scene)));

    auto make_scene = [&](const std::string& id, std::size_t archetype, bool cold) {
        SceneTruth st{archetype, kSceneOffsetSd * normal(rng), cold};
        truth.scenes[id] = st;
        std::vector<double> attrs(config.scene_attribute_features);
        for (std::size_t a = 0; a < attrs.size(); ++a) {
            const bool faithful = unit(rng) < config.attribute_fidelity;
            attrs[a] = static_cast<double>(faithful ? truth.canonical_attributes[archetype][a] : pick(kAttributeVocab));
        }
        std::vector<std::vector<double>> items(config.items_per_scene, std::vector<double>(F));
        for (auto& item : items)
            for (std::size_t k = 0; k < F; ++k) item[k] = mu[archetype][k] + sigma[archetype][k] * normal(rng);

        const std::size_t train_n = cold ? 0 : config.examples_per_scene;
        const std::size_t test_n = cold ? config.examples_per_scene : warm;
        for (std::size_t e = 0; e < train_n + test_n; ++e) {
            const std::size_t u = pick(config.users);
            const auto& item = items[pick(items.size())];
            Example ex;
            ex.scene_id = id;
            ex.values = user_values[u];
            ex.values.insert(ex.values.end(), item.begin(), item.end());
            ex.values.insert(ex.values.end(), attrs.begin(), attrs.end());
            double z = truth.preferences[archetype][truth.user_segments[u]] + st.offset;
            for (std::size_t k = 0; k < F; ++k) z += truth.item_coefficients[k] * item[k];
            pending.push_back({std::move(ex), z, e >= train_n});
        }
    };
    for (std::size_t s = 0; s < config.train_scenes; ++s) make_scene(scene_name("s", s), s % A, false);
    for (std::size_t s = 0; s < config.cold_start_scenes; ++s) make_scene(scene_name("c", s), s % A, true);

    // Place the bias midway between the m-th and (m+1)-th largest logits, where
    // m positives before flipping give the target rate after flipping.
    const double eps = config.label_noise;
    const double clean_rate = (config.positive_rate - eps) / (1.0 - 2.0 * eps);
    std::vector<double> z(pending.size());
    for (std::size_t i = 0; i < pending.size(); ++i) z[i] = pending[i].z;
    std::sort(z.begin(), z.end(), std::greater<>());
    const auto m = static_cast<std::size_t>(std::llround(clean_rate * static_cast<double>(z.size())));
    if (m == 0) truth.bias = -z.front() - 1.0;
    else if (m >= z.size()) truth.bias = -z.back() + 1.0;
    else truth.bias = -0.5 * (z[m - 1] + z[m]);

    for (auto& p : pending) {
        int label = p.z + truth.bias >= 0.0 ? 1 : 0;
        if (unit(rng) < eps) label = 1 - label;
        p.ex.label = label;
        (p.test ? out.test : out.train).push_back(std::move(p.ex));
    }
    return out;
}

}  // namespace swan::datagen
