#include "swan/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "swan/error.hpp"

namespace swan {

using nlohmann::json;

const char* to_string(FeatureKind kind) { return kind == FeatureKind::Categorical ? "categorical" : "numeric"; }

const char* to_string(FeatureGroup group) {
    switch (group) {
        case FeatureGroup::User: return "user";
        case FeatureGroup::Item: return "item";
        case FeatureGroup::Scene: return "scene";
        case FeatureGroup::Other: return "other";
    }
    return "?";
}

namespace {

FeatureKind parse_kind(const std::string& s) {
    if (s == "categorical") return FeatureKind::Categorical;
    if (s == "numeric") return FeatureKind::Numeric;
    throw SchemaError("unknown feature kind: " + s);
}

FeatureGroup parse_group(const std::string& s) {
    if (s == "user") return FeatureGroup::User;
    if (s == "item") return FeatureGroup::Item;
    if (s == "scene") return FeatureGroup::Scene;
    if (s == "other") return FeatureGroup::Other;
    throw SchemaError("unknown feature group: " + s);
}

}  // namespace

// ---------------------------------------------------------------- buckets

EqualFrequencyBuckets EqualFrequencyBuckets::fit(std::vector<double> values, std::size_t buckets) {
    if (buckets < 1) throw ArgumentError("bucket count must be at least 1");
    if (values.empty()) throw ArgumentError("cannot fit buckets on an empty column");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    EqualFrequencyBuckets out;
    for (std::size_t c = 1; c < buckets; ++c) {
        const std::size_t rank = (c * n + buckets - 1) / buckets;
        out.thresholds.push_back(values[std::max<std::size_t>(rank, 1) - 1]);
    }
    return out;
}

std::uint32_t EqualFrequencyBuckets::index(double v) const {
    return static_cast<std::uint32_t>(std::lower_bound(thresholds.begin(), thresholds.end(), v) - thresholds.begin());
}

// ---------------------------------------------------------------- schema

std::size_t FeatureDescriptor::cardinality() const {
    if (kind == FeatureKind::Numeric) return boundaries ? boundaries->bucket_count() : buckets;
    return vocab.empty() ? vocab_size : vocab.size();
}

std::uint32_t FeatureDescriptor::embed_index(double stored) const {
    if (kind == FeatureKind::Categorical) return static_cast<std::uint32_t>(stored);
    if (!boundaries) throw ConfigError("numeric feature '" + name + "' has no fitted bucket boundaries");
    if (!std::isfinite(stored)) return static_cast<std::uint32_t>(oov_index());
    return boundaries->index(stored);
}

FeatureSchema::FeatureSchema(std::vector<FeatureDescriptor> descriptors) : descriptors_(std::move(descriptors)) {
    for (std::size_t i = 0; i < descriptors_.size(); ++i) {
        const auto& d = descriptors_[i];
        if (d.name.empty()) throw SchemaError("feature with empty name");
        if (!by_name_.emplace(d.name, i).second) throw SchemaError("duplicate feature name: " + d.name);
        if (d.kind == FeatureKind::Categorical && d.cardinality() == 0)
            throw SchemaError("categorical feature '" + d.name + "' needs vocab or vocab_size");
        if (d.kind == FeatureKind::Numeric && d.buckets < 1)
            throw SchemaError("numeric feature '" + d.name + "' needs at least one bucket");
    }
}

FeatureSchema FeatureSchema::from_json(const json& j) {
    std::vector<FeatureDescriptor> out;
    for (const auto& f : j.at("features")) {
        FeatureDescriptor d;
        d.name = f.at("name").get<std::string>();
        d.kind = parse_kind(f.at("kind").get<std::string>());
        d.group = parse_group(f.at("group").get<std::string>());
        if (f.contains("vocab")) d.vocab = f.at("vocab").get<std::vector<std::string>>();
        if (f.contains("vocab_size")) d.vocab_size = f.at("vocab_size").get<std::size_t>();
        if (f.contains("buckets")) d.buckets = f.at("buckets").get<std::size_t>();
        if (f.contains("boundaries"))
            d.boundaries = EqualFrequencyBuckets{f.at("boundaries").get<std::vector<double>>()};
        out.push_back(std::move(d));
    }
    return FeatureSchema(std::move(out));
}

FeatureSchema FeatureSchema::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open schema file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError(path, 1, e.byte, e.what());
    }
    try {
        return from_json(j);
    } catch (const json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
}

json FeatureSchema::to_json() const {
    json features = json::array();
    for (const auto& d : descriptors_) {
        json f;
        f["name"] = d.name;
        f["kind"] = to_string(d.kind);
        f["group"] = to_string(d.group);
        if (d.kind == FeatureKind::Categorical) {
            if (!d.vocab.empty()) f["vocab"] = d.vocab;
            else f["vocab_size"] = d.vocab_size;
        } else {
            f["buckets"] = d.buckets;
            if (d.boundaries) f["boundaries"] = d.boundaries->thresholds;
        }
        features.push_back(std::move(f));
    }
    return json{{"features", features}};
}

void FeatureSchema::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write schema file " + path);
    out << to_json().dump(2) << '\n';
}

std::optional<std::size_t> FeatureSchema::index_of(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::size_t> FeatureSchema::group(FeatureGroup g) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < descriptors_.size(); ++i)
        if (descriptors_[i].group == g) out.push_back(i);
    return out;
}

std::vector<std::size_t> FeatureSchema::other_and_item() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < descriptors_.size(); ++i)
        if (descriptors_[i].group == FeatureGroup::Item || descriptors_[i].group == FeatureGroup::Other)
            out.push_back(i);
    return out;
}

// ---------------------------------------------------------------- datasets

namespace {

struct LineContext {
    const std::string& source;
    std::size_t line;
};

[[noreturn]] void fail(const LineContext& ctx, const std::string& what) {
    throw ParseError(ctx.source, ctx.line, 1, what);
}

double parse_value(const FeatureDescriptor& d, const json& v, const LineContext& ctx, std::size_t& oov) {
    if (d.kind == FeatureKind::Numeric) {
        if (!v.is_number()) fail(ctx, "feature '" + d.name + "' must be numeric");
        return v.get<double>();
    }
    if (!d.vocab.empty()) {
        if (v.is_string()) {
            auto it = std::find(d.vocab.begin(), d.vocab.end(), v.get<std::string>());
            if (it != d.vocab.end()) return static_cast<double>(it - d.vocab.begin());
        } else if (!v.is_number_integer()) {
            fail(ctx, "feature '" + d.name + "' must be a string label");
        }
        ++oov;
        return static_cast<double>(d.oov_index());
    }
    if (!v.is_number_integer()) fail(ctx, "feature '" + d.name + "' must be an integer category");
    const auto idx = v.get<std::int64_t>();
    if (idx < 0 || static_cast<std::size_t>(idx) >= d.vocab_size) {
        ++oov;
        return static_cast<double>(d.oov_index());
    }
    return static_cast<double>(idx);
}

}  // namespace

LoadResult parse_dataset(std::istream& in, const FeatureSchema& schema, const std::string& source) {
    LoadResult result;
    std::string text;
    std::size_t line_no = 0;
    while (std::getline(in, text)) {
        ++line_no;
        if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) continue;
        const LineContext ctx{source, line_no};
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ParseError(source, line_no, e.byte, e.what());
        }
        if (!j.is_object()) fail(ctx, "record must be a JSON object");
        for (const auto& key : {"user", "item", "scene_id", "label"})
            if (!j.contains(key)) fail(ctx, std::string("missing key '") + key + "'");
        for (auto it = j.begin(); it != j.end(); ++it) {
            const auto& k = it.key();
            if (k != "user" && k != "item" && k != "scene_id" && k != "label")
                fail(ctx, "unexpected key '" + k + "'");
        }

        Example ex;
        const json& label = j["label"];
        if (label.is_boolean()) ex.label = label.get<bool>() ? 1 : 0;
        else if (label.is_number_integer() && (label.get<std::int64_t>() == 0 || label.get<std::int64_t>() == 1))
            ex.label = static_cast<int>(label.get<std::int64_t>());
        else fail(ctx, "label must be 0 or 1, got " + label.dump());
        if (!j["scene_id"].is_string()) fail(ctx, "scene_id must be a string");
        ex.scene_id = j["scene_id"].get<std::string>();

        ex.values.assign(schema.size(), std::numeric_limits<double>::quiet_NaN());
        std::vector<bool> seen(schema.size(), false);
        for (const auto& section : {"user", "item"}) {
            const json& obj = j[section];
            if (!obj.is_object()) fail(ctx, std::string("'") + section + "' must be an object");
            const bool user_section = std::string(section) == "user";
            for (auto it = obj.begin(); it != obj.end(); ++it) {
                const auto idx = schema.index_of(it.key());
                if (!idx) {
                    throw SchemaError(source + ":" + std::to_string(line_no) + ": unknown feature '" + it.key() + "'");
                }
                const auto& d = schema.at(*idx);
                if ((d.group == FeatureGroup::User) != user_section)
                    fail(ctx, "feature '" + d.name + "' belongs under '" + (user_section ? "item" : "user") + "'");
                ex.values[*idx] = parse_value(d, it.value(), ctx, result.oov_count);
                seen[*idx] = true;
            }
        }
        for (std::size_t i = 0; i < schema.size(); ++i)
            if (!seen[i]) fail(ctx, "missing feature '" + schema.at(i).name + "'");
        result.examples.push_back(std::move(ex));
    }
    return result;
}

LoadResult load_dataset(const std::string& path, const FeatureSchema& schema) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset file " + path);
    return parse_dataset(in, schema, path);
}

json example_to_json(const FeatureSchema& schema, const Example& ex) {
    json user = json::object();
    json item = json::object();
    for (std::size_t i = 0; i < schema.size(); ++i) {
        const auto& d = schema.at(i);
        json& target = d.group == FeatureGroup::User ? user : item;
        if (d.kind == FeatureKind::Numeric) {
            target[d.name] = ex.values[i];
        } else {
            const auto idx = static_cast<std::size_t>(ex.values[i]);
            if (!d.vocab.empty()) target[d.name] = idx < d.vocab.size() ? json(d.vocab[idx]) : json(idx);
            else target[d.name] = idx;
        }
    }
    return json{{"user", user}, {"item", item}, {"scene_id", ex.scene_id}, {"label", ex.label}};
}

void write_dataset(const std::string& path, const FeatureSchema& schema, std::span<const Example> examples) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write dataset file " + path);
    for (const auto& ex : examples) out << example_to_json(schema, ex).dump() << '\n';
}

void fit_numeric_buckets(FeatureSchema& schema, std::span<const Example> examples) {
    if (examples.empty()) throw ArgumentError("cannot fit numeric buckets on an empty dataset");
    for (std::size_t i = 0; i < schema.size(); ++i) {
        auto& d = schema.descriptors()[i];
        if (d.kind != FeatureKind::Numeric || d.boundaries) continue;
        std::vector<double> column;
        column.reserve(examples.size());
        for (const auto& ex : examples)
            if (std::isfinite(ex.values[i])) column.push_back(ex.values[i]);
        if (column.empty()) throw ArgumentError("numeric feature '" + d.name + "' has no finite values");
        d.boundaries = EqualFrequencyBuckets::fit(std::move(column), d.buckets);
    }
}

// ---------------------------------------------------------------- scenes

SceneCatalog SceneCatalog::build(const FeatureSchema& schema, std::span<const Example> examples) {
    const auto attrs = schema.group(FeatureGroup::Scene);
    std::map<std::string, std::vector<std::map<std::uint32_t, std::size_t>>> counts;
    for (const auto& ex : examples) {
        auto& per_attr = counts[ex.scene_id];
        per_attr.resize(attrs.size());
        for (std::size_t a = 0; a < attrs.size(); ++a)
            ++per_attr[a][schema.at(attrs[a]).embed_index(ex.values[attrs[a]])];
    }
    SceneCatalog out;
    for (const auto& [id, per_attr] : counts) {
        std::vector<std::uint32_t> modal;
        for (const auto& hist : per_attr) {
            std::uint32_t best = 0;
            std::size_t best_count = 0;
            for (const auto& [value, count] : hist) {
                if (count > best_count) {
                    best = value;
                    best_count = count;
                }
            }
            modal.push_back(best);
        }
        out.by_id_.emplace(id, out.ids_.size());
        out.ids_.push_back(id);
        out.attributes_.push_back(std::move(modal));
    }
    return out;
}

std::optional<std::size_t> SceneCatalog::index_of(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

json SceneCatalog::to_json() const {
    json scenes = json::array();
    for (std::size_t i = 0; i < ids_.size(); ++i) scenes.push_back({{"scene_id", ids_[i]}, {"attributes", attributes_[i]}});
    return scenes;
}

SceneCatalog SceneCatalog::from_json(const json& j) {
    SceneCatalog out;
    for (const auto& s : j) {
        out.by_id_.emplace(s.at("scene_id").get<std::string>(), out.ids_.size());
        out.ids_.push_back(s.at("scene_id").get<std::string>());
        out.attributes_.push_back(s.at("attributes").get<std::vector<std::uint32_t>>());
    }
    return out;
}

// ---------------------------------------------------------------- embeddings

FeatureEmbeddings::FeatureEmbeddings(nn::ParamStore& store, const FeatureSchema& schema, const SceneCatalog& scenes,
                                     std::size_t dim, nn::Rng& rng)
    : schema_(&schema), scenes_(&scenes), dim_(dim) {
    if (dim == 0) throw ArgumentError("embedding dimension must be positive");
    for (std::size_t i = 0; i < schema.size(); ++i) {
        const auto& d = schema.at(i);
        tables_.push_back(&store.add("emb." + d.name, nn::uniform_tensor({d.cardinality() + 1, dim},
                                                                         -kEmbeddingInitBound, kEmbeddingInitBound,
                                                                         rng)));
    }
    ad::Tensor ids = nn::uniform_tensor({scenes.size() + 1, dim}, -kEmbeddingInitBound, kEmbeddingInitBound, rng);
    for (std::size_t c = 0; c < dim; ++c) ids.at(scenes.size(), c) = 0.0;
    scene_id_table_ = &store.add("emb.scene_id", std::move(ids));
    user_ = schema.group(FeatureGroup::User);
    other_ = schema.other_and_item();
    scene_ = schema.group(FeatureGroup::Scene);
}

ad::Var FeatureEmbeddings::lookup(ad::Tape& tape, std::size_t feature, std::vector<std::size_t> indices) const {
    if (feature >= tables_.size()) throw ConfigError("no embedding table for feature #" + std::to_string(feature));
    return ad::gather_rows(tape.param(*tables_[feature]), std::move(indices));
}

EmbeddingBundle FeatureEmbeddings::embed(ad::Tape& tape, std::span<const Example* const> batch) const {
    if (schema_ == nullptr) throw ConfigError("embedding tables are not initialized");
    if (batch.empty()) throw ArgumentError("embed: empty batch");
    const std::size_t rows = batch.size();
    auto column = [&](std::size_t feature) {
        const auto& d = schema_->at(feature);
        std::vector<std::size_t> idx(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            if (batch[r]->values.size() != schema_->size())
                throw SchemaError("example has " + std::to_string(batch[r]->values.size()) + " values, schema has " +
                                  std::to_string(schema_->size()));
            idx[r] = std::min<std::size_t>(d.embed_index(batch[r]->values[feature]), d.oov_index());
        }
        return lookup(tape, feature, std::move(idx));
    };
    auto concat_group = [&](const std::vector<std::size_t>& members) -> ad::Var {
        if (members.empty()) return tape.constant(ad::Tensor({rows, dim_}, 0.0));
        std::vector<ad::Var> parts;
        for (std::size_t f : members) parts.push_back(column(f));
        return parts.size() == 1 ? parts[0] : ad::concat(parts);
    };

    EmbeddingBundle out;
    out.e_u = concat_group(user_);
    out.e_o = concat_group(other_);

    std::vector<std::size_t> ids(rows);
    out.cold_start.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto known = scenes_->index_of(batch[r]->scene_id);
        out.cold_start[r] = !known.has_value();
        ids[r] = known.value_or(scenes_->size());
    }
    out.e_t_id = ad::gather_rows(tape.param(*scene_id_table_), std::move(ids));

    if (scene_.empty()) {
        out.e_t_attr = tape.constant(ad::Tensor({rows, dim_}, 0.0));
    } else {
        for (std::size_t f : scene_) out.attrs.push_back(column(f));
        out.e_t_attr = out.attrs[0];
        for (std::size_t a = 1; a < out.attrs.size(); ++a) out.e_t_attr = ad::add(out.e_t_attr, out.attrs[a]);
    }
    return out;
}

ad::Var FeatureEmbeddings::scene_embedding(ad::Tape& tape, std::span<const std::size_t> scenes) const {
    if (scenes.empty()) throw ArgumentError("scene_embedding: empty scene list");
    std::vector<std::size_t> ids(scenes.begin(), scenes.end());
    for (std::size_t s : ids)
        if (s >= scenes_->size()) throw ConfigError("scene index " + std::to_string(s) + " is not a known scene");
    ad::Var out = ad::gather_rows(tape.param(*scene_id_table_), ids);
    for (std::size_t a = 0; a < scene_.size(); ++a) {
        std::vector<std::size_t> idx(ids.size());
        for (std::size_t r = 0; r < ids.size(); ++r) idx[r] = scenes_->attributes(ids[r])[a];
        out = ad::add(out, lookup(tape, scene_[a], std::move(idx)));
    }
    return out;
}

}  // namespace swan
