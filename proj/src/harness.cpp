#include "swan/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "swan/error.hpp"
#include "swan/metrics.hpp"

namespace swan::harness {

using nlohmann::json;

// ---------------------------------------------------------------- config

void TrainConfig::validate() const {
    if (!(adam.lr >= 0.0)) throw ConfigError("lr must be non-negative");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
        throw ConfigError("Adam betas must be in [0, 1)");
    if (!(adam.eps > 0.0)) throw ConfigError("eps must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (!(cc_threshold >= 0.0)) throw ConfigError("cc_threshold must be non-negative");
    if (buckets == 0) throw ConfigError("buckets must be positive");
    model.validate();
}

json TrainConfig::to_json() const {
    json j = model.to_json();
    j["lr"] = adam.lr;
    j["beta1"] = adam.beta1;
    j["beta2"] = adam.beta2;
    j["eps"] = adam.eps;
    j["batch_size"] = batch_size;
    j["epochs"] = epochs;
    j["seed"] = seed;
    j["cc_threshold"] = cc_threshold;
    j["buckets"] = buckets;
    return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("train config must be a JSON object");
    const json model_keys = ModelConfig{}.to_json();
    TrainConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "lr") c.adam.lr = value.get<double>();
            else if (key == "beta1") c.adam.beta1 = value.get<double>();
            else if (key == "beta2") c.adam.beta2 = value.get<double>();
            else if (key == "eps") c.adam.eps = value.get<double>();
            else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
            else if (key == "epochs") c.epochs = value.get<std::size_t>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "cc_threshold") c.cc_threshold = value.get<double>();
            else if (key == "buckets") c.buckets = value.get<std::size_t>();
            else if (!model_keys.contains(key)) throw ConfigError("train config: unknown field '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
    c.model = ModelConfig::from_json(j);
    c.model.seed = c.seed;
    c.validate();
    return c;
}

TrainConfig TrainConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open train config " + path);
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ParseError(path, 0, e.byte, e.what());
    }
}

void apply_param(TrainConfig& config, const std::string& name, const std::string& value) {
    json j = config.to_json();
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::parse_error&) {
        parsed = value;
    }
    if (name.starts_with("ablation.")) {
        const std::string flag = name.substr(9);
        if (!j["ablation"].contains(flag)) throw ConfigError("unknown ablation flag '" + flag + "'");
        j["ablation"][flag] = parsed;
    } else {
        if (!j.contains(name) || name == "ablation") throw ConfigError("unknown parameter '" + name + "'");
        j[name] = parsed;
    }
    config = TrainConfig::from_json(j);
}

// ---------------------------------------------------------------- training

TrainResult train(CtrModel& model, std::span<const Example> data, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
    config.validate();
    if (data.empty()) throw ArgumentError("train: empty dataset");
    nn::Adam adam(model.params(), config.adam);
    std::mt19937_64 rng(config.seed ^ 0x5eed5eed5eed5eedULL);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    model.params().zero_grad();

    TrainResult result;
    std::vector<const Example*> batch;
    std::size_t batch_index = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(&data[order[i]]);
            ad::Tape tape;
            ad::Var loss = model.loss(tape, batch);
            const double value = loss.value().item();
            if (!std::isfinite(value)) throw TrainingError(batch_index, "non-finite loss " + std::to_string(value));
            tape.backward(loss);
            adam.step();
            model.params().zero_grad();
            total += value * static_cast<double>(end - start);
            ++result.steps;
        }
        result.epoch_loss.push_back(total / static_cast<double>(data.size()));
        if (on_epoch) on_epoch(epoch, result.epoch_loss.back());
    }
    return result;
}

// ---------------------------------------------------------------- reports

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

std::optional<double> try_auc(const std::vector<int>& labels, const std::vector<double>& scores) {
    try {
        return metrics::auc(labels, scores);
    } catch (const MetricError&) {
        return std::nullopt;
    }
}

}  // namespace

json EvalReport::to_json() const {
    return json{{"auc_all", optional_number(auc_all)},
                {"auc_cold_start", optional_number(auc_cold_start)},
                {"per_scene", per_scene},
                {"gini_improvement", optional_number(gini_improvement)},
                {"flags", {{"gini_undefined", gini_undefined}, {"single_class_scenes", single_class_scenes}}},
                {"examples", examples},
                {"cold_start_examples", cold_start_examples}};
}

EvalReport EvalReport::from_json(const json& j) {
    EvalReport r;
    try {
        r.auc_all = read_optional(j, "auc_all");
        r.auc_cold_start = read_optional(j, "auc_cold_start");
        r.per_scene = j.at("per_scene").get<std::map<std::string, double>>();
        r.gini_improvement = read_optional(j, "gini_improvement");
        if (j.contains("flags")) {
            const auto& f = j.at("flags");
            r.gini_undefined = f.value("gini_undefined", false);
            if (f.contains("single_class_scenes"))
                r.single_class_scenes = f.at("single_class_scenes").get<std::vector<std::string>>();
        }
        r.examples = j.value("examples", std::size_t{0});
        r.cold_start_examples = j.value("cold_start_examples", std::size_t{0});
    } catch (const json::exception& e) {
        throw ConfigError(std::string("report: ") + e.what());
    }
    return r;
}

void EvalReport::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write report " + path);
    out << to_json().dump(2) << '\n';
}

EvalReport EvalReport::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open report " + path);
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ParseError(path, 0, e.byte, e.what());
    }
}

std::vector<double> improvement_ratios(const EvalReport& model, const EvalReport& reference) {
    std::vector<double> out;
    for (const auto& [scene, ref] : reference.per_scene) {
        if (scene == kPooledScene || !(ref > 0.5)) continue;
        const auto it = model.per_scene.find(scene);
        if (it == model.per_scene.end()) continue;
        out.push_back(std::max(0.0, (it->second - 0.5) / (ref - 0.5) - 1.0));
    }
    return out;
}

EvalReport evaluate(CtrModel& model, std::span<const Example> test, const EvalReport* reference) {
    if (test.empty()) throw ArgumentError("evaluate: empty test set");
    const std::vector<double> scores = model.predict(test);

    EvalReport r;
    r.examples = test.size();
    std::vector<int> labels(test.size());
    std::vector<int> cold_labels;
    std::vector<double> cold_scores;
    std::map<std::string, std::vector<std::size_t>> by_scene;
    for (std::size_t i = 0; i < test.size(); ++i) {
        labels[i] = test[i].label;
        by_scene[test[i].scene_id].push_back(i);
        if (!model.catalog().index_of(test[i].scene_id)) {
            cold_labels.push_back(test[i].label);
            cold_scores.push_back(scores[i]);
        }
    }
    r.cold_start_examples = cold_labels.size();
    r.auc_all = try_auc(labels, scores);
    r.auc_cold_start = try_auc(cold_labels, cold_scores);

    std::vector<int> pooled_labels;
    std::vector<double> pooled_scores;
    for (const auto& [scene, rows] : by_scene) {
        std::vector<int> l;
        std::vector<double> s;
        for (std::size_t i : rows) {
            l.push_back(labels[i]);
            s.push_back(scores[i]);
        }
        if (rows.size() < kMinSceneExamples) {
            pooled_labels.insert(pooled_labels.end(), l.begin(), l.end());
            pooled_scores.insert(pooled_scores.end(), s.begin(), s.end());
            continue;
        }
        if (auto a = try_auc(l, s)) r.per_scene[scene] = *a;
        else r.single_class_scenes.push_back(scene);
    }
    if (!pooled_labels.empty()) {
        if (auto a = try_auc(pooled_labels, pooled_scores)) r.per_scene[kPooledScene] = *a;
        else r.single_class_scenes.push_back(kPooledScene);
    }

    if (reference != nullptr) {
        const auto ratios = improvement_ratios(r, *reference);
        try {
            r.gini_improvement = metrics::gini(ratios);
        } catch (const MetricError&) {
            r.gini_improvement = 0.0;
            r.gini_undefined = true;
        }
    }
    return r;
}

double gate_saturation(SwanModel& model, std::span<const Example> examples, double tol) {
    const auto w = model.gate_values(examples);
    if (w.empty()) throw ArgumentError("gate_saturation: no examples");
    std::size_t near = 0;
    for (double v : w)
        if (v <= tol || v >= 1.0 - tol) ++near;
    return static_cast<double>(near) / static_cast<double>(w.size());
}

RunResult fit_and_evaluate(Baseline kind, const FeatureSchema& schema, std::span<const Example> train_set,
                           std::span<const Example> test, const srg::SceneRelationGraph* graph,
                           const TrainConfig& config, const EvalReport* reference) {
    RunResult out;
    ModelConfig model_config = config.model;
    model_config.seed = config.seed;
    if (kind == Baseline::Swan) {
        if (graph == nullptr) throw ArgumentError("fit_and_evaluate: SwAN needs a scene relation graph");
        out.model = SwanModel::create(schema, train_set, *graph, model_config);
    } else {
        out.model = DnnModel::create(schema, train_set, model_config);
    }
    out.curve = train(*out.model, train_set, config);
    out.report = evaluate(*out.model, test, reference);
    return out;
}

}  // namespace swan::harness
