#include "swan/model.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <random>

#include "swan/error.hpp"

namespace swan {

using nlohmann::json;

// ---------------------------------------------------------------- config

void ModelConfig::validate() const {
    if (d == 0) throw ConfigError("d must be positive");
    if (n_a == 0 || n_s == 0) throw ConfigError("n_a and n_s must be at least 1");
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    if (k == 0) throw ConfigError("k must be at least 1");
    if (expert_out == 0) throw ConfigError("expert_out must be positive");
    if (!(loss.alpha > 0.0) || loss.beta < 0.0 || loss.gamma < 0.0)
        throw ConfigError("loss weights need alpha > 0 and beta, gamma >= 0");
}

json ModelConfig::to_json() const {
    return json{
        {"d", d},
        {"n_a", n_a},
        {"n_s", n_s},
        {"tau", tau},
        {"k", k},
        {"min_weight", min_weight},
        {"san_hidden", san_hidden},
        {"expert_hidden", expert_hidden},
        {"expert_out", expert_out},
        {"selector_hidden", selector_hidden},
        {"threshold_hidden", threshold_hidden},
        {"gate_hidden", gate_hidden},
        {"final_hidden", final_hidden},
        {"dnn_hidden", dnn_hidden},
        {"gate_softmax", gate_softmax},
        {"var_loss_sign", var_loss_sign == head::VarLossSign::Negated ? "negated" : "literal"},
        {"hard_gate_inference", hard_gate_inference},
        {"ablation",
         {{"srg", ablation.srg},
          {"aem", ablation.aem},
          {"cfr", ablation.cfr},
          {"loss_var", ablation.loss_var},
          {"loss_cos", ablation.loss_cos}}},
        {"alpha", loss.alpha},
        {"beta", loss.beta},
        {"gamma", loss.gamma},
        {"seed", seed},
    };
}

ModelConfig ModelConfig::from_json(const json& j) {
    ModelConfig c;
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
        };
        get("d", c.d);
        get("n_a", c.n_a);
        get("n_s", c.n_s);
        get("tau", c.tau);
        get("k", c.k);
        get("min_weight", c.min_weight);
        get("san_hidden", c.san_hidden);
        get("expert_hidden", c.expert_hidden);
        get("expert_out", c.expert_out);
        get("selector_hidden", c.selector_hidden);
        get("threshold_hidden", c.threshold_hidden);
        get("gate_hidden", c.gate_hidden);
        get("final_hidden", c.final_hidden);
        get("dnn_hidden", c.dnn_hidden);
        get("gate_softmax", c.gate_softmax);
        get("hard_gate_inference", c.hard_gate_inference);
        get("alpha", c.loss.alpha);
        get("beta", c.loss.beta);
        get("gamma", c.loss.gamma);
        get("seed", c.seed);
        if (j.contains("var_loss_sign")) {
            const auto s = j.at("var_loss_sign").get<std::string>();
            if (s == "negated") c.var_loss_sign = head::VarLossSign::Negated;
            else if (s == "literal") c.var_loss_sign = head::VarLossSign::Literal;
            else throw ConfigError("var_loss_sign must be \"negated\" or \"literal\", got \"" + s + "\"");
        }
        if (j.contains("ablation")) {
            const auto& a = j.at("ablation");
            for (const auto& [key, value] : a.items()) {
                const bool on = value.get<bool>();
                if (key == "srg") c.ablation.srg = on;
                else if (key == "aem") c.ablation.aem = on;
                else if (key == "cfr") c.ablation.cfr = on;
                else if (key == "loss_var") c.ablation.loss_var = on;
                else if (key == "loss_cos") c.ablation.loss_cos = on;
                else throw ConfigError("unknown ablation flag '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model config: ") + e.what());
    }
    c.validate();
    return c;
}

const char* to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::Swan: return "swan";
        case ModelKind::Dnn: return "dnn";
    }
    return "?";
}

// ---------------------------------------------------------------- base

CtrModel::CtrModel(FeatureSchema schema, SceneCatalog catalog, ModelConfig config)
    : schema_(std::move(schema)), catalog_(std::move(catalog)), config_(std::move(config)) {
    config_.validate();
    if (catalog_.size() == 0) throw ArgumentError("model needs at least one training scene");
}

ad::Var CtrModel::labels_of(ad::Tape& tape, std::span<const Example* const> batch) {
    ad::Tensor y({batch.size(), 1});
    for (std::size_t r = 0; r < batch.size(); ++r) y[r] = batch[r]->label;
    return tape.constant(std::move(y));
}

std::vector<double> CtrModel::predict(std::span<const Example> examples, std::size_t batch_size) {
    if (batch_size == 0) throw ArgumentError("predict: batch size must be positive");
    prepare_scenes(examples);
    std::vector<double> out;
    out.reserve(examples.size());
    std::vector<const Example*> batch;
    for (std::size_t start = 0; start < examples.size(); start += batch_size) {
        const std::size_t end = std::min(examples.size(), start + batch_size);
        batch.clear();
        for (std::size_t i = start; i < end; ++i) batch.push_back(&examples[i]);
        ad::Tape tape;
        const auto& y = forward(tape, batch, Mode::Infer).value();
        out.insert(out.end(), y.data().begin(), y.data().end());
    }
    return out;
}

PreparedSchema prepare_schema(FeatureSchema schema, std::span<const Example> train) {
    if (train.empty()) throw ArgumentError("training set is empty");
    fit_numeric_buckets(schema, train);
    SceneCatalog catalog = SceneCatalog::build(schema, train);
    return {std::move(schema), std::move(catalog)};
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<std::uint32_t> target_attributes(const FeatureSchema& schema, const std::vector<std::size_t>& scene,
                                             const Example& ex) {
    std::vector<std::uint32_t> out(scene.size());
    for (std::size_t a = 0; a < scene.size(); ++a) {
        const auto& d = schema.at(scene[a]);
        out[a] = std::min<std::uint32_t>(d.embed_index(ex.values.at(scene[a])), static_cast<std::uint32_t>(d.oov_index()));
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------- SwAN

SwanModel::SwanModel(FeatureSchema fitted_schema, SceneCatalog catalog, srg::SceneRelationGraph graph,
                     ModelConfig config)
    : CtrModel(std::move(fitted_schema), std::move(catalog), std::move(config)), graph_(std::move(graph)) {
    const auto& c = config_;
    nn::Rng rng(c.seed);
    emb_ = FeatureEmbeddings(store_, schema_, catalog_, c.d, rng);
    san_ = san::SanParams(store_, emb_.user_width(), c.d, c.san_hidden, rng);

    std::vector<std::size_t> rows;
    for (std::size_t f : emb_.scene_features()) rows.push_back(schema_.at(f).cardinality() + 1);
    cfr_ = cfr::CfrTables(store_, catalog_.size(), rows, c.d, rng);

    aem::AemShape shape;
    shape.input_width = emb_.other_width() + emb_.user_width() + 2 * c.d;
    shape.user_width = emb_.user_width();
    shape.scene_width = c.d;
    shape.adaptive = c.n_a;
    shape.shared = c.n_s;
    shape.expert_out = c.expert_out;
    shape.expert_hidden = c.expert_hidden;
    shape.selector_hidden = c.selector_hidden;
    shape.threshold_hidden = c.threshold_hidden;
    shape.tau = c.tau;
    aem_ = aem::AemParams(store_, shape, rng);

    head::HeadShape hs;
    hs.input_width = shape.input_width;
    hs.experts = c.n_a + c.n_s;
    hs.expert_out = c.expert_out;
    hs.gate_hidden = c.gate_hidden;
    hs.final_hidden = c.final_hidden;
    hs.gate_softmax = c.gate_softmax;
    head_ = head::HeadParams(store_, hs, rng);
}

std::unique_ptr<SwanModel> SwanModel::create(FeatureSchema schema, std::span<const Example> train,
                                             srg::SceneRelationGraph graph, ModelConfig config) {
    auto prepared = prepare_schema(std::move(schema), train);
    return std::make_unique<SwanModel>(std::move(prepared.schema), std::move(prepared.catalog), std::move(graph),
                                       std::move(config));
}

std::vector<std::size_t> SwanModel::random_neighbors(const std::string& scene_id, std::size_t count) const {
    std::vector<std::size_t> pool;
    const auto self = catalog_.index_of(scene_id);
    for (std::size_t s = 0; s < catalog_.size(); ++s)
        if (!self || s != *self) pool.push_back(s);
    nn::Rng rng(config_.seed ^ fnv1a(scene_id));
    count = std::min(count, pool.size());
    // Partial Fisher-Yates with explicit draws keeps the choice library-independent.
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng() % (pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
}

std::vector<std::size_t> SwanModel::neighbors_from_profile(const srg::SceneProfile& profile) const {
    std::vector<std::size_t> out;
    if (graph_.node_count() == 0) return out;
    for (const auto& n : srg::similar_scenes(graph_, profile, config_.k, config_.min_weight, profile.scene_id)) {
        if (auto idx = catalog_.index_of(n.scene_id)) out.push_back(*idx);
    }
    if (!config_.ablation.srg) out = random_neighbors(profile.scene_id, out.size());
    return out;
}

const std::vector<std::size_t>& SwanModel::neighbors(const std::string& scene_id,
                                                     std::span<const Example* const> items) const {
    if (auto it = neighbor_cache_.find(scene_id); it != neighbor_cache_.end()) return it->second;
    std::vector<std::size_t> found;
    if (auto node = graph_.index_of(scene_id)) {
        found = neighbors_from_profile(graph_.node(*node));
    } else if (!items.empty()) {
        found = neighbors_from_profile(graph_.profile_target(schema_, scene_id, items));
    } else {
        static const std::vector<std::size_t> none;
        return none;
    }
    return neighbor_cache_.emplace(scene_id, std::move(found)).first->second;
}

void SwanModel::prepare_scenes(std::span<const Example> examples) {
    std::map<std::string, std::vector<const Example*>> by_scene;
    for (const auto& ex : examples)
        if (!neighbor_cache_.contains(ex.scene_id)) by_scene[ex.scene_id].push_back(&ex);
    for (const auto& [id, items] : by_scene) neighbors(id, items);
}

SwanPass SwanModel::run(ad::Tape& tape, std::span<const Example* const> batch, Mode mode) const {
    const std::size_t rows = batch.size();
    const std::size_t slots = config_.k;
    const std::size_t d = config_.d;
    EmbeddingBundle bundle = emb_.embed(tape, batch);
    ad::Var e_t = ad::add(bundle.e_t_id, bundle.e_t_attr);

    std::map<std::string, std::vector<const Example*>> unresolved;
    for (const Example* ex : batch)
        if (!neighbor_cache_.contains(ex->scene_id) && !graph_.index_of(ex->scene_id))
            unresolved[ex->scene_id].push_back(ex);
    for (const auto& [id, items] : unresolved) neighbors(id, items);

    std::vector<std::size_t> similar(rows * slots, 0);
    std::vector<double> mask(rows * slots, 0.0);
    bool any = false;
    for (std::size_t r = 0; r < rows; ++r) {
        const auto& nb = neighbors(batch[r]->scene_id);
        for (std::size_t j = 0; j < nb.size() && j < slots; ++j) {
            similar[r * slots + j] = nb[j];
            mask[r * slots + j] = 1.0;
            any = true;
        }
    }

    SwanPass pass;
    ad::Var vec_san;
    ad::Var e_cfr;
    if (any) {
        ad::Var e_s = emb_.scene_embedding(tape, similar);
        auto att = san::san_forward_batch(tape, bundle.e_u, e_t, e_s, slots, mask, san_);
        vec_san = att.vec_san;
        pass.s = att.weights;
        if (config_.ablation.cfr && cfr_.attribute_count() > 0) {
            std::vector<std::vector<std::uint32_t>> attrs;
            attrs.reserve(rows);
            for (const Example* ex : batch) attrs.push_back(target_attributes(schema_, emb_.scene_features(), *ex));
            e_cfr = cfr::cfr_forward(tape, att.weights, similar, attrs, cfr_);
        }
    } else {
        vec_san = tape.constant(ad::Tensor({rows, d}, 0.0));
    }
    if (e_cfr.tape == nullptr) e_cfr = tape.constant(ad::Tensor({rows, d}, 0.0));

    ad::Var e_in = cfr::assemble_input(bundle.e_o, bundle.e_u, vec_san, e_t, e_cfr);

    if (config_.ablation.aem) {
        pass.w = aem::expert_selector(tape, bundle.e_u, vec_san, aem_).w;
        if (mode == Mode::Infer && config_.hard_gate_inference) {
            ad::Tensor hard = pass.w.value();
            for (auto& v : hard.data()) v = v >= 0.5 ? 1.0 : 0.0;
            pass.w = tape.constant(std::move(hard));
        }
    } else {
        pass.w = tape.constant(ad::Tensor({rows, config_.n_a}, 1.0));
    }
    pass.aeg = aem::aeg_forward(tape, e_in, aem_);
    std::vector<ad::Var> seg = aem::seg_forward(tape, e_in, aem_);
    pass.yhat = head::decide(tape, e_in, seg, pass.aeg, pass.w, head_);
    return pass;
}

ad::Var SwanModel::forward(ad::Tape& tape, std::span<const Example* const> batch, Mode mode) const {
    return run(tape, batch, mode).yhat;
}

ad::Var SwanModel::loss(ad::Tape& tape, std::span<const Example* const> batch) const {
    SwanPass pass = run(tape, batch, Mode::Train);
    ad::Var zero = tape.constant(ad::Tensor::scalar(0.0));
    ad::Var ce = head::ce_loss(labels_of(tape, batch), pass.yhat);
    ad::Var cos = config_.ablation.loss_cos ? head::cos_loss(tape, pass.aeg) : zero;
    ad::Var var = config_.ablation.loss_var && config_.ablation.aem ? head::var_loss(pass.w, config_.var_loss_sign) : zero;
    return head::total_loss(ce, cos, var, config_.loss);
}

std::vector<double> SwanModel::gate_values(std::span<const Example> examples, std::size_t batch_size) {
    if (batch_size == 0) throw ArgumentError("gate_values: batch size must be positive");
    prepare_scenes(examples);
    std::vector<double> out;
    out.reserve(examples.size() * config_.n_a);
    std::vector<const Example*> batch;
    for (std::size_t start = 0; start < examples.size(); start += batch_size) {
        const std::size_t end = std::min(examples.size(), start + batch_size);
        batch.clear();
        for (std::size_t i = start; i < end; ++i) batch.push_back(&examples[i]);
        ad::Tape tape;
        const auto& w = run(tape, batch, Mode::Infer).w.value();
        out.insert(out.end(), w.data().begin(), w.data().end());
    }
    return out;
}

// ---------------------------------------------------------------- DNN

DnnModel::DnnModel(FeatureSchema fitted_schema, SceneCatalog catalog, ModelConfig config)
    : CtrModel(std::move(fitted_schema), std::move(catalog), std::move(config)) {
    nn::Rng rng(config_.seed);
    emb_ = FeatureEmbeddings(store_, schema_, catalog_, config_.d, rng);
    const std::size_t width =
        emb_.user_width() + emb_.other_width() + config_.d * (1 + emb_.scene_features().size());
    tower_ = nn::Mlp(store_, "dnn.tower", width, config_.dnn_hidden, 1, rng);
}

std::unique_ptr<DnnModel> DnnModel::create(FeatureSchema schema, std::span<const Example> train, ModelConfig config) {
    auto prepared = prepare_schema(std::move(schema), train);
    return std::make_unique<DnnModel>(std::move(prepared.schema), std::move(prepared.catalog), std::move(config));
}

ad::Var DnnModel::forward(ad::Tape& tape, std::span<const Example* const> batch, Mode mode) const {
    (void)mode;
    EmbeddingBundle b = emb_.embed(tape, batch);
    std::vector<ad::Var> parts{b.e_u, b.e_o, b.e_t_id};
    parts.insert(parts.end(), b.attrs.begin(), b.attrs.end());
    return ad::sigmoid(tower_.forward(tape, ad::concat(parts)));
}

ad::Var DnnModel::loss(ad::Tape& tape, std::span<const Example* const> batch) const {
    return head::ce_loss(labels_of(tape, batch), forward(tape, batch, Mode::Train));
}

// ---------------------------------------------------------------- model.bin

namespace {

static_assert(std::endian::native == std::endian::little, "model.bin is written in native little-endian order");

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& in, const std::string& path) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw ParseError(path, 0, 0, "truncated model file");
    return v;
}

std::string take_string(std::istream& in, std::size_t n, const std::string& path) {
    std::string s(n, '\0');
    if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n))) throw ParseError(path, 0, 0, "truncated model file");
    return s;
}

}  // namespace

void save_model(const CtrModel& model, const std::string& path) {
    json header{{"kind", to_string(model.kind())},
                {"config", model.config().to_json()},
                {"schema", model.schema().to_json()},
                {"catalog", model.catalog().to_json()}};
    if (const auto* swan = dynamic_cast<const SwanModel*>(&model)) header["graph"] = swan->graph().to_json();
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write model file " + path);
    out.write(kModelMagic, 8);
    put<std::uint32_t>(out, kModelVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(model.kind()));
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    put<std::uint64_t>(out, model.params().size());
    for (const auto& p : model.params()) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.shape().size()));
        for (std::size_t dim : p.value.shape()) put<std::uint64_t>(out, dim);
        out.write(reinterpret_cast<const char*>(p.value.data().data()),
                  static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    }
    if (!out) throw ConfigError("failed writing model file " + path);
}

std::unique_ptr<CtrModel> load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open model file " + path);
    if (take_string(in, 8, path) != std::string(kModelMagic, 8)) throw ParseError(path, 0, 0, "not a SWANMDL1 model file");
    const auto version = take<std::uint32_t>(in, path);
    if (version != kModelVersion) throw ParseError(path, 0, 8, "unsupported model version " + std::to_string(version));
    const auto kind = static_cast<ModelKind>(take<std::uint32_t>(in, path));
    const auto len = take<std::uint64_t>(in, path);
    json header;
    try {
        header = json::parse(take_string(in, len, path));
    } catch (const json::parse_error& e) {
        throw ParseError(path, 0, 24 + e.byte, "model header: " + std::string(e.what()));
    }

    FeatureSchema schema = FeatureSchema::from_json(header.at("schema"));
    SceneCatalog catalog = SceneCatalog::from_json(header.at("catalog"));
    ModelConfig config = ModelConfig::from_json(header.at("config"));
    std::unique_ptr<CtrModel> model;
    switch (kind) {
        case ModelKind::Swan:
            model = std::make_unique<SwanModel>(std::move(schema), std::move(catalog),
                                                srg::SceneRelationGraph::from_json(header.at("graph")),
                                                std::move(config));
            break;
        case ModelKind::Dnn:
            model = std::make_unique<DnnModel>(std::move(schema), std::move(catalog), std::move(config));
            break;
        default:
            throw ParseError(path, 0, 12, "unknown model kind");
    }

    const auto count = take<std::uint64_t>(in, path);
    if (count != model->params().size())
        throw ConfigError("model file holds " + std::to_string(count) + " tensors, architecture expects " +
                          std::to_string(model->params().size()));
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::string name = take_string(in, take<std::uint32_t>(in, path), path);
        if (!model->params().contains(name)) throw ConfigError("model file has unexpected tensor '" + name + "'");
        auto& p = model->params().get(name);
        ad::Shape shape(take<std::uint32_t>(in, path));
        for (auto& dim : shape) dim = take<std::uint64_t>(in, path);
        if (shape != p.value.shape())
            throw ConfigError("tensor '" + name + "' has shape " + ad::shape_string(shape) + ", expected " +
                              ad::shape_string(p.value.shape()));
        if (!in.read(reinterpret_cast<char*>(p.value.data().data()),
                     static_cast<std::streamsize>(p.value.size() * sizeof(double))))
            throw ParseError(path, 0, 0, "truncated tensor '" + name + "'");
    }
    return model;
}

}  // namespace swan
