#include "swan/srg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "swan/error.hpp"

namespace swan::srg {

using nlohmann::json;

const char* to_string(Aggregate a) {
    switch (a) {
        case Aggregate::Mean: return "mean";
        case Aggregate::Var: return "var";
        case Aggregate::Max: return "max";
        case Aggregate::Min: return "min";
    }
    return "?";
}

namespace {

Aggregate parse_aggregate(const std::string& s) {
    if (s == "mean") return Aggregate::Mean;
    if (s == "var") return Aggregate::Var;
    if (s == "max") return Aggregate::Max;
    if (s == "min") return Aggregate::Min;
    throw SchemaError("unknown aggregate: " + s);
}

constexpr Aggregate kAggregateOrder[kAggregatesPerFeature] = {Aggregate::Mean, Aggregate::Var, Aggregate::Max,
                                                               Aggregate::Min};

}  // namespace

// Welford co-moment update; one pass, no catastrophic cancellation.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DimensionError("pearson: columns of different lengths");
    if (x.size() < 2) throw ArgumentError("pearson: need at least 2 observations");
    double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double n = static_cast<double>(i + 1);
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        mx += dx / n;
        my += dy / n;
        sxx += dx * (x[i] - mx);
        syy += dy * (y[i] - my);
        sxy += dx * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<KeyFeature> select_key_features(std::span<const std::string> names,
                                            std::span<const std::vector<double>> columns,
                                            std::span<const double> labels, double cc_threshold,
                                            std::optional<std::size_t> cap) {
    if (labels.empty() || columns.empty()) throw ArgumentError("select_key_features: empty input");
    if (labels.size() < 2) throw ArgumentError("select_key_features: need at least 2 examples");
    if (names.size() != columns.size()) throw DimensionError("select_key_features: names and columns differ in count");
    std::vector<KeyFeature> out;
    for (std::size_t f = 0; f < columns.size(); ++f) {
        const auto r = pearson(columns[f], labels);
        if (!r) continue;
        if (std::fabs(*r) >= cc_threshold) out.push_back({names[f], *r});
    }
    std::sort(out.begin(), out.end(), [](const KeyFeature& a, const KeyFeature& b) {
        const double fa = std::fabs(a.correlation), fb = std::fabs(b.correlation);
        if (fa != fb) return fa > fb;
        return a.name < b.name;
    });
    if (cap && out.size() > *cap) out.resize(*cap);
    return out;
}

std::vector<KeyFeature> select_key_features(const FeatureSchema& schema, std::span<const Example> examples,
                                            double cc_threshold, std::optional<std::size_t> cap) {
    if (examples.empty()) throw ArgumentError("select_key_features: empty input");
    const auto items = schema.group(FeatureGroup::Item);
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;
    for (std::size_t f : items) {
        names.push_back(schema.at(f).name);
        auto& col = columns.emplace_back();
        col.reserve(examples.size());
        for (const auto& ex : examples) col.push_back(ex.values[f]);
    }
    std::vector<double> labels;
    labels.reserve(examples.size());
    for (const auto& ex : examples) labels.push_back(static_cast<double>(ex.label));
    if (columns.empty()) return {};
    return select_key_features(names, columns, labels, cc_threshold, cap);
}

std::vector<double> profile_scene(std::span<const std::vector<double>> columns) {
    std::vector<double> out;
    out.reserve(columns.size() * kAggregatesPerFeature);
    for (const auto& col : columns) {
        if (col.empty()) throw ArgumentError("profile_scene: scene has no items");
        double mean = 0.0;
        for (double v : col) mean += v;
        mean /= static_cast<double>(col.size());
        double var = 0.0;
        for (double v : col) var += (v - mean) * (v - mean);
        var /= static_cast<double>(col.size());
        const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
        out.insert(out.end(), {mean, var, *hi, *lo});
    }
    return out;
}

SceneProfile Categorizer::apply(const RawProfile& raw) const {
    if (raw.aggregates.size() != columns.size()) {
        throw SchemaError("profile of scene '" + raw.scene_id + "' has " + std::to_string(raw.aggregates.size()) +
                          " aggregates, expected " + std::to_string(columns.size()));
    }
    SceneProfile p;
    p.scene_id = raw.scene_id;
    p.slots = slots;
    p.categories.reserve(columns.size());
    for (std::size_t s = 0; s < columns.size(); ++s) p.categories.push_back(columns[s].index(raw.aggregates[s]));
    return p;
}

Categorized categorize(std::span<const RawProfile> raw, std::span<const std::string> key_features, std::size_t buckets) {
    if (buckets < 1) throw ArgumentError("categorize: buckets must be at least 1");
    if (raw.empty()) throw ArgumentError("categorize: no scenes");
    const std::size_t width = key_features.size() * kAggregatesPerFeature;
    Categorized out;
    out.categorizer.buckets = buckets;
    for (const auto& f : key_features)
        for (Aggregate a : kAggregateOrder) out.categorizer.slots.push_back({f, a});
    for (const auto& r : raw) {
        if (r.aggregates.size() != width)
            throw SchemaError("scene '" + r.scene_id + "' has an inconsistent aggregate layout");
    }
    for (std::size_t s = 0; s < width; ++s) {
        std::vector<double> column;
        column.reserve(raw.size());
        for (const auto& r : raw) column.push_back(r.aggregates[s]);
        out.categorizer.columns.push_back(EqualFrequencyBuckets::fit(std::move(column), buckets));
    }
    for (const auto& r : raw) out.profiles.push_back(out.categorizer.apply(r));
    return out;
}

int shared_slots(const SceneProfile& a, const SceneProfile& b) {
    if (a.categories.size() != b.categories.size() || a.slots != b.slots) {
        throw SchemaError("profiles '" + a.scene_id + "' and '" + b.scene_id + "' have different slot layouts");
    }
    int w = 0;
    for (std::size_t s = 0; s < a.categories.size(); ++s)
        if (a.categories[s] == b.categories[s]) ++w;
    return w;
}

SceneRelationGraph build_graph(std::vector<SceneProfile> profiles) {
    if (profiles.empty()) throw ArgumentError("build_graph: no profiles");
    std::sort(profiles.begin(), profiles.end(),
              [](const SceneProfile& a, const SceneProfile& b) { return a.scene_id < b.scene_id; });
    SceneRelationGraph g;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        if (!g.by_id_.emplace(profiles[i].scene_id, i).second)
            throw SchemaError("duplicate scene id in graph: " + profiles[i].scene_id);
    }
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        for (std::size_t j = i + 1; j < profiles.size(); ++j) {
            const int w = shared_slots(profiles[i], profiles[j]);
            if (w > 0) g.edges_[{profiles[i].scene_id, profiles[j].scene_id}] = w;
        }
    }
    if (!profiles.empty()) g.categorizer_.slots = profiles.front().slots;
    g.nodes_ = std::move(profiles);
    return g;
}

namespace {

std::vector<std::vector<double>> key_columns(const FeatureSchema& schema, std::span<const KeyFeature> keys,
                                             std::span<const Example* const> items) {
    std::vector<std::vector<double>> cols;
    for (const auto& k : keys) {
        const auto f = schema.index_of(k.name);
        if (!f) throw SchemaError("key feature '" + k.name + "' is not in the schema");
        auto& col = cols.emplace_back();
        col.reserve(items.size());
        for (const Example* ex : items) col.push_back(ex->values[*f]);
    }
    return cols;
}

}  // namespace

SceneRelationGraph build_graph_from_dataset(const FeatureSchema& schema, std::span<const Example> examples,
                                            double cc_threshold, std::size_t buckets, std::optional<std::size_t> cap) {
    if (examples.empty()) throw ArgumentError("build_graph_from_dataset: empty dataset");
    auto keys = select_key_features(schema, examples, cc_threshold, cap);
    std::map<std::string, std::vector<const Example*>> by_scene;
    for (const auto& ex : examples) by_scene[ex.scene_id].push_back(&ex);

    std::vector<RawProfile> raw;
    for (const auto& [id, items] : by_scene) raw.push_back({id, profile_scene(key_columns(schema, keys, items))});
    std::vector<std::string> names;
    for (const auto& k : keys) names.push_back(k.name);
    auto cat = categorize(raw, names, buckets);
    SceneRelationGraph g = build_graph(std::move(cat.profiles));
    g.categorizer_ = std::move(cat.categorizer);
    g.key_features_ = std::move(keys);
    g.cc_threshold_ = cc_threshold;
    return g;
}

std::optional<std::size_t> SceneRelationGraph::index_of(const std::string& scene_id) const {
    auto it = by_id_.find(scene_id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

int SceneRelationGraph::weight(const std::string& a, const std::string& b) const {
    auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    auto it = edges_.find(key);
    return it == edges_.end() ? 0 : it->second;
}

SceneProfile SceneRelationGraph::profile_target(const FeatureSchema& schema, const std::string& scene_id,
                                                std::span<const Example* const> items) const {
    if (items.empty()) throw ArgumentError("profile_target: scene '" + scene_id + "' has no items");
    return categorizer_.apply({scene_id, profile_scene(key_columns(schema, key_features_, items))});
}

std::vector<Neighbor> similar_scenes(const SceneRelationGraph& graph, const SceneProfile& target, std::size_t k,
                                     int min_weight, const std::optional<std::string>& exclude) {
    if (graph.node_count() == 0) throw ArgumentError("similar_scenes: empty graph");
    std::vector<Neighbor> all;
    for (const auto& node : graph.nodes()) {
        if (exclude && node.scene_id == *exclude) continue;
        const int w = shared_slots(node, target);
        if (w >= min_weight && w > 0) all.push_back({node.scene_id, w});
    }
    std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
        if (a.weight != b.weight) return a.weight > b.weight;
        return a.scene_id < b.scene_id;
    });
    if (all.size() > k) all.resize(k);
    return all;
}

// ---------------------------------------------------------------- json

json SceneRelationGraph::to_json() const {
    json j;
    j["cc_threshold"] = cc_threshold_;
    j["buckets"] = categorizer_.buckets;
    json keys = json::array();
    for (const auto& k : key_features_) keys.push_back({{"name", k.name}, {"correlation", k.correlation}});
    j["key_features"] = keys;
    json slots = json::array();
    for (std::size_t s = 0; s < categorizer_.slots.size(); ++s) {
        json slot{{"feature", categorizer_.slots[s].feature}, {"aggregate", to_string(categorizer_.slots[s].aggregate)}};
        if (s < categorizer_.columns.size()) slot["thresholds"] = categorizer_.columns[s].thresholds;
        slots.push_back(std::move(slot));
    }
    j["slots"] = slots;
    json nodes = json::array();
    for (const auto& n : nodes_) nodes.push_back({{"scene_id", n.scene_id}, {"categories", n.categories}});
    j["nodes"] = nodes;
    json edges = json::array();
    for (const auto& [key, w] : edges_) edges.push_back({{"a", key.first}, {"b", key.second}, {"weight", w}});
    j["edges"] = edges;
    return j;
}

SceneRelationGraph SceneRelationGraph::from_json(const json& j) {
    Categorizer cat;
    cat.buckets = j.at("buckets").get<std::size_t>();
    for (const auto& s : j.at("slots")) {
        cat.slots.push_back({s.at("feature").get<std::string>(), parse_aggregate(s.at("aggregate").get<std::string>())});
        if (s.contains("thresholds"))
            cat.columns.push_back(EqualFrequencyBuckets{s.at("thresholds").get<std::vector<double>>()});
    }
    std::vector<SceneProfile> profiles;
    for (const auto& n : j.at("nodes")) {
        profiles.push_back({n.at("scene_id").get<std::string>(), cat.slots,
                            n.at("categories").get<std::vector<std::uint32_t>>()});
    }
    SceneRelationGraph g = build_graph(std::move(profiles));
    for (const auto& e : j.at("edges")) {
        if (g.weight(e.at("a").get<std::string>(), e.at("b").get<std::string>()) != e.at("weight").get<int>())
            throw SchemaError("graph edge list disagrees with node profiles");
    }
    g.categorizer_ = std::move(cat);
    g.cc_threshold_ = j.at("cc_threshold").get<double>();
    for (const auto& k : j.at("key_features"))
        g.key_features_.push_back({k.at("name").get<std::string>(), k.at("correlation").get<double>()});
    return g;
}

void SceneRelationGraph::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write graph file " + path);
    out << to_json().dump(2) << '\n';
}

SceneRelationGraph SceneRelationGraph::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open graph file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError(path, 1, e.byte, e.what());
    }
    return from_json(j);
}

}  // namespace swan::srg
