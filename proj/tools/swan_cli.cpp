#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "swan/datagen.hpp"
#include "swan/error.hpp"
#include "swan/features.hpp"
#include "swan/harness.hpp"
#include "swan/model.hpp"
#include "swan/srg.hpp"

using namespace swan;
using nlohmann::json;

namespace {

std::vector<Example> load_examples(const std::string& path, const FeatureSchema& schema) {
    LoadResult r = load_dataset(path, schema);
    if (r.oov_count > 0)
        std::cerr << "warning: " << path << ": " << r.oov_count << " out-of-vocabulary value(s) mapped to the OOV row\n";
    return std::move(r.examples);
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << j.dump(2) << '\n';
}

harness::TrainConfig load_train_config(const std::string& path) {
    return path.empty() ? harness::TrainConfig{} : harness::TrainConfig::load(path);
}

std::vector<std::string> split_values(const std::string& csv) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : csv) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SwAN cold-start multi-scene CTR toolkit"};
    app.require_subcommand(1);

    // datagen
    auto* gen = app.add_subcommand("datagen", "Generate a synthetic multi-scene dataset");
    std::string gen_config, out_train, out_test, out_truth, out_schema;
    gen->add_option("--config", gen_config, "Generator config (JSON)")->required()->check(CLI::ExistingFile);
    gen->add_option("--out-train", out_train, "Training split (JSON lines)")->required();
    gen->add_option("--out-test", out_test, "Test split with cold-start scenes (JSON lines)")->required();
    gen->add_option("--out-truth", out_truth, "Ground-truth sidecar (JSON)")->required();
    gen->add_option("--out-schema", out_schema, "Feature schema (default: schema.json next to the training split)");

    // srg build
    auto* srg_cmd = app.add_subcommand("srg", "Scene relation graph tools");
    srg_cmd->require_subcommand(1);
    auto* build = srg_cmd->add_subcommand("build", "Build the scene relation graph from training data");
    std::string srg_data, srg_schema, srg_out;
    double cc_threshold = 0.05;
    std::size_t buckets = 10;
    std::optional<std::size_t> top_n;
    build->add_option("--data", srg_data, "Training data (JSON lines)")->required()->check(CLI::ExistingFile);
    build->add_option("--schema", srg_schema, "Feature schema")->required()->check(CLI::ExistingFile);
    build->add_option("--cc-threshold", cc_threshold, "Minimum |Pearson r| for key features")->capture_default_str();
    build->add_option("--buckets", buckets, "Categories per profile slot")->capture_default_str();
    build->add_option("--top-n", top_n, "Keep at most n key features");
    build->add_option("--out", srg_out, "Output graph (JSON)")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "Train SwAN or the DNN baseline");
    std::string tr_data, tr_schema, tr_graph, tr_config, tr_out, tr_kind = "swan", tr_curve;
    train_cmd->add_option("--train", tr_data, "Training data (JSON lines)")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--schema", tr_schema, "Feature schema")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--graph", tr_graph, "Scene relation graph (built from --train when omitted)");
    train_cmd->add_option("--config", tr_config, "Training config (JSON)");
    train_cmd->add_option("--out", tr_out, "Output model file")->required();
    train_cmd->add_option("--model", tr_kind, "swan or dnn")->check(CLI::IsMember({"swan", "dnn"}))->capture_default_str();
    train_cmd->add_option("--loss-curve", tr_curve, "Write per-epoch mean loss (JSON)");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a trained model");
    std::string ev_model, ev_test, ev_report, ev_reference;
    eval_cmd->add_option("--model", ev_model, "Model file")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--test", ev_test, "Test data (JSON lines)")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--report", ev_report, "Output report (JSON)")->required();
    eval_cmd->add_option("--reference", ev_reference, "Reference report for the improvement Gini")
        ->check(CLI::ExistingFile);

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "Train and evaluate once per value of one parameter");
    std::string sw_param, sw_values, sw_data, sw_test, sw_schema, sw_config, sw_out, sw_kind = "swan";
    sweep_cmd->add_option("--param", sw_param, "Config key, e.g. tau, n_a, cc_threshold, ablation.srg")->required();
    sweep_cmd->add_option("--values", sw_values, "Comma-separated values")->required();
    sweep_cmd->add_option("--train", sw_data, "Training data (JSON lines)")->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--test", sw_test, "Test data (JSON lines)")->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--schema", sw_schema, "Feature schema")->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--config", sw_config, "Base training config (JSON)");
    sweep_cmd->add_option("--model", sw_kind, "swan or dnn")->check(CLI::IsMember({"swan", "dnn"}))->capture_default_str();
    sweep_cmd->add_option("--out", sw_out, "Sweep results (JSON); stdout when omitted");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const auto cfg = datagen::GenConfig::load(gen_config);
            const auto data = datagen::generate(cfg);
            if (out_schema.empty())
                out_schema = (std::filesystem::path(out_train).parent_path() / "schema.json").string();
            data.schema.save(out_schema);
            write_dataset(out_train, data.schema, data.train);
            write_dataset(out_test, data.schema, data.test);
            data.truth.save(out_truth);
            std::cerr << "wrote " << data.train.size() << " training and " << data.test.size()
                      << " test examples; schema " << out_schema << "\n";
        } else if (build->parsed()) {
            const auto schema = FeatureSchema::load(srg_schema);
            const auto examples = load_examples(srg_data, schema);
            const auto graph = srg::build_graph_from_dataset(schema, examples, cc_threshold, buckets, top_n);
            graph.save(srg_out);
            std::cerr << graph.node_count() << " scenes, " << graph.edges().size() << " edges, "
                      << graph.key_features().size() << " key features\n";
        } else if (train_cmd->parsed()) {
            const auto cfg = load_train_config(tr_config);
            const auto schema = FeatureSchema::load(tr_schema);
            const auto examples = load_examples(tr_data, schema);
            std::unique_ptr<CtrModel> model;
            if (tr_kind == "dnn") {
                model = DnnModel::create(schema, examples, cfg.model);
            } else {
                auto graph = tr_graph.empty()
                                 ? srg::build_graph_from_dataset(schema, examples, cfg.cc_threshold, cfg.buckets)
                                 : srg::SceneRelationGraph::load(tr_graph);
                model = SwanModel::create(schema, examples, std::move(graph), cfg.model);
            }
            const auto result = harness::train(*model, examples, cfg, [](std::size_t epoch, double loss) {
                std::cerr << "epoch " << epoch + 1 << " mean loss " << loss << "\n";
            });
            save_model(*model, tr_out);
            if (!tr_curve.empty()) write_json(tr_curve, json{{"epoch_loss", result.epoch_loss}, {"steps", result.steps}});
        } else if (eval_cmd->parsed()) {
            auto model = load_model(ev_model);
            const auto examples = load_examples(ev_test, model->schema());
            std::optional<harness::EvalReport> reference;
            if (!ev_reference.empty()) reference = harness::EvalReport::load(ev_reference);
            const auto report = harness::evaluate(*model, examples, reference ? &*reference : nullptr);
            report.save(ev_report);
            if (!report.single_class_scenes.empty())
                std::cerr << "warning: " << report.single_class_scenes.size()
                          << " scene(s) with a single class left out of the per-scene table\n";
            auto fmt = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("undefined"); };
            std::cerr << "auc_all " << fmt(report.auc_all) << ", auc_cold_start " << fmt(report.auc_cold_start) << "\n";
        } else if (sweep_cmd->parsed()) {
            const auto base = load_train_config(sw_config);
            const auto schema = FeatureSchema::load(sw_schema);
            const auto train_set = load_examples(sw_data, schema);
            const auto test_set = load_examples(sw_test, schema);
            json rows = json::array();
            for (const auto& value : split_values(sw_values)) {
                auto cfg = base;
                harness::apply_param(cfg, sw_param, value);
                json row{{"value", value}};
                std::optional<srg::SceneRelationGraph> graph;
                if (sw_kind == "swan") {
                    graph = srg::build_graph_from_dataset(schema, train_set, cfg.cc_threshold, cfg.buckets);
                    row["key_features"] = graph->key_features().size();
                }
                auto run = harness::fit_and_evaluate(
                    sw_kind == "swan" ? harness::Baseline::Swan : harness::Baseline::Dnn, schema, train_set, test_set,
                    graph ? &*graph : nullptr, cfg);
                row["report"] = run.report.to_json();
                row["epoch_loss"] = run.curve.epoch_loss;
                if (auto* swan = dynamic_cast<SwanModel*>(run.model.get()))
                    row["gate_saturation"] = harness::gate_saturation(*swan, test_set);
                std::cerr << sw_param << "=" << value << " done\n";
                rows.push_back(std::move(row));
            }
            const json out{{"param", sw_param}, {"model", sw_kind}, {"runs", rows}};
            if (sw_out.empty()) std::cout << out.dump(2) << '\n';
            else write_json(sw_out, out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
