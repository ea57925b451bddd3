#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "swan/datagen.hpp"
#include "swan/error.hpp"
#include "swan/harness.hpp"
#include "swan/metrics.hpp"
#include "test_util.hpp"

using namespace swan;

namespace {

ModelConfig small_model() {
    ModelConfig c;
    c.d = 4;
    c.n_a = 2;
    c.n_s = 2;
    c.k = 3;
    c.tau = 0.1;
    c.san_hidden = {6};
    c.expert_hidden = {6};
    c.expert_out = 4;
    c.final_hidden = {4};
    c.dnn_hidden = {16};
    return c;
}

harness::TrainConfig toy_train(std::size_t epochs) {
    harness::TrainConfig t;
    t.adam.lr = 0.01;
    t.batch_size = 32;
    t.epochs = epochs;
    t.model = small_model();
    return t;
}

// Scores each example by its first feature value.
class ScoreModel final : public CtrModel {
public:
    ScoreModel(FeatureSchema schema, SceneCatalog catalog) : CtrModel(std::move(schema), std::move(catalog), {}) {}
    ModelKind kind() const noexcept override { return ModelKind::Dnn; }
    ad::Var forward(ad::Tape& tape, std::span<const Example* const> batch, Mode) const override {
        ad::Tensor y({batch.size(), 1});
        for (std::size_t i = 0; i < batch.size(); ++i) y[i] = batch[i]->values[0];
        return tape.constant(y);
    }
    ad::Var loss(ad::Tape& tape, std::span<const Example* const> batch) const override {
        return ad::sum(forward(tape, batch, Mode::Train));
    }
};

Example row(const std::string& scene, double score, int label) {
    Example ex;
    ex.scene_id = scene;
    ex.values = {score};
    ex.label = label;
    return ex;
}

std::unique_ptr<ScoreModel> score_model(std::span<const Example> known) {
    FeatureDescriptor d;
    d.name = "score";
    d.kind = FeatureKind::Numeric;
    d.group = FeatureGroup::Item;
    d.buckets = 2;
    FeatureSchema schema({d});
    auto catalog = SceneCatalog::build(schema, known);
    return std::make_unique<ScoreModel>(schema, catalog);
}

class HarnessTest : public ::testing::Test {
protected:
    void SetUp() override {
        data = datagen::generate(testutil::tiny_gen(5));
        toy.assign(data.train.begin(), data.train.end());
        // keep 200 examples spread over the scenes
        std::vector<Example> picked;
        for (std::size_t i = 0; i < toy.size() && picked.size() < 200; i += toy.size() / 200) picked.push_back(toy[i]);
        toy = picked;
        graph = srg::build_graph_from_dataset(data.schema, toy, 0.01, 3);
    }

    datagen::Dataset data;
    std::vector<Example> toy;
    srg::SceneRelationGraph graph;
};

}  // namespace

TEST_F(HarnessTest, LossDecreasesOverFirstEpochs) {
    for (auto kind : {harness::Baseline::Swan, harness::Baseline::Dnn}) {
        auto res = harness::fit_and_evaluate(kind, data.schema, toy, data.test, &graph, toy_train(5));
        ASSERT_EQ(res.curve.epoch_loss.size(), 5u);
        EXPECT_LT(res.curve.epoch_loss[1], res.curve.epoch_loss[0]);
        EXPECT_LT(res.curve.epoch_loss[2], res.curve.epoch_loss[1]);
        EXPECT_EQ(res.curve.steps, 5u * 7u);
    }
}

TEST_F(HarnessTest, ZeroLearningRateLeavesParameters) {
    auto m = SwanModel::create(data.schema, toy, graph, small_model());
    std::vector<std::vector<double>> before;
    for (auto& p : m->params()) before.push_back(p.value.storage());
    auto cfg = toy_train(2);
    cfg.adam.lr = 0.0;
    harness::train(*m, toy, cfg);
    std::size_t i = 0;
    for (auto& p : m->params()) EXPECT_EQ(p.value.storage(), before[i++]) << p.name;
}

TEST_F(HarnessTest, SameSeedSameParameters) {
    auto cfg = toy_train(2);
    auto a = harness::fit_and_evaluate(harness::Baseline::Swan, data.schema, toy, data.test, &graph, cfg);
    auto b = harness::fit_and_evaluate(harness::Baseline::Swan, data.schema, toy, data.test, &graph, cfg);
    auto it = b.model->params().begin();
    for (auto& p : a.model->params()) {
        EXPECT_EQ(p.value.storage(), it->value.storage()) << p.name;
        ++it;
    }
    EXPECT_EQ(a.report.to_json(), b.report.to_json());
    EXPECT_EQ(a.curve.epoch_loss, b.curve.epoch_loss);
}

TEST_F(HarnessTest, EmptyDatasetIsArgumentError) {
    auto m = DnnModel::create(data.schema, toy, small_model());
    std::vector<Example> none;
    EXPECT_THROW(harness::train(*m, none, toy_train(1)), ArgumentError);
    EXPECT_THROW(harness::evaluate(*m, none), ArgumentError);
}

TEST_F(HarnessTest, OverfitsCleanToySet) {
    auto cfg = testutil::tiny_gen(6);
    cfg.label_noise = 0.0;
    auto clean = datagen::generate(cfg);
    std::vector<Example> set(clean.train.begin(), clean.train.begin() + 200);
    auto tc = toy_train(150);
    tc.model.dnn_hidden = {64, 32};
    auto res = harness::fit_and_evaluate(harness::Baseline::Dnn, clean.schema, set, set, nullptr, tc);
    ASSERT_TRUE(res.report.auc_all.has_value());
    EXPECT_GT(*res.report.auc_all, 0.95);
}

TEST_F(HarnessTest, SelfReferenceGiniIsZeroAndFlagged) {
    auto res = harness::fit_and_evaluate(harness::Baseline::Dnn, data.schema, toy, data.test, nullptr, toy_train(2));
    auto again = harness::evaluate(*res.model, data.test, &res.report);
    ASSERT_TRUE(again.gini_improvement.has_value());
    EXPECT_EQ(*again.gini_improvement, 0.0);
    EXPECT_TRUE(again.gini_undefined);
}

TEST(Evaluate, PooledAucDiffersFromSceneAverage) {
    std::vector<Example> test;
    // scene a: perfectly ranked, scene b: constant scores
    for (int i = 0; i < 40; ++i) test.push_back(row("a", i < 20 ? 0.9 : 0.1, i < 20));
    for (int i = 0; i < 40; ++i) test.push_back(row("b", 0.5, i % 2));
    // two small scenes pool together
    for (int i = 0; i < 10; ++i) test.push_back(row("c", 0.2 + 0.01 * i, i >= 5));
    for (int i = 0; i < 10; ++i) test.push_back(row("d", 0.3, i % 2));
    auto model = score_model(test);
    auto r = harness::evaluate(*model, test);
    EXPECT_EQ(r.per_scene.at("a"), 1.0);
    EXPECT_EQ(r.per_scene.at("b"), 0.5);
    EXPECT_EQ(r.per_scene.count("c"), 0u);
    EXPECT_EQ(r.per_scene.count("d"), 0u);
    std::vector<int> pl;
    std::vector<double> ps;
    std::vector<int> al;
    std::vector<double> as;
    for (const auto& ex : test) {
        al.push_back(ex.label);
        as.push_back(ex.values[0]);
        if (ex.scene_id == "c" || ex.scene_id == "d") {
            pl.push_back(ex.label);
            ps.push_back(ex.values[0]);
        }
    }
    EXPECT_EQ(r.per_scene.at(harness::kPooledScene), metrics::auc(pl, ps));
    EXPECT_EQ(*r.auc_all, metrics::auc(al, as));
    EXPECT_NE(*r.auc_all, 0.75);
    EXPECT_EQ(r.cold_start_examples, 0u);
    EXPECT_FALSE(r.auc_cold_start.has_value());
}

TEST(Evaluate, SingleClassScenesAreListed) {
    std::vector<Example> test;
    for (int i = 0; i < 40; ++i) test.push_back(row("a", 0.01 * i, i % 2));
    for (int i = 0; i < 40; ++i) test.push_back(row("b", 0.01 * i, 0));
    auto model = score_model(test);
    auto r = harness::evaluate(*model, test);
    EXPECT_EQ(r.single_class_scenes, std::vector<std::string>{"b"});
    EXPECT_EQ(r.per_scene.count("b"), 0u);
    EXPECT_EQ(harness::EvalReport::from_json(r.to_json()).to_json(), r.to_json());
}

TEST(Evaluate, ImprovementRatios) {
    harness::EvalReport ref, model;
    ref.per_scene = {{"a", 0.6}, {"b", 0.7}, {"c", 0.5}, {harness::kPooledScene, 0.6}};
    model.per_scene = {{"a", 0.7}, {"b", 0.65}, {"c", 0.9}, {harness::kPooledScene, 0.9}};
    auto r = harness::improvement_ratios(model, ref);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_NEAR(r[0], 1.0, 1e-12);
    EXPECT_EQ(r[1], 0.0);
}

TEST(TrainConfigJson, RoundTripAndApplyParam) {
    harness::TrainConfig c;
    c.epochs = 7;
    c.model.tau = 0.25;
    auto back = harness::TrainConfig::from_json(c.to_json());
    EXPECT_EQ(back.to_json(), c.to_json());
    auto j = c.to_json();
    j["nonsense"] = 3;
    EXPECT_THROW(harness::TrainConfig::from_json(j), ConfigError);

    harness::apply_param(c, "tau", "0.01");
    EXPECT_EQ(c.model.tau, 0.01);
    harness::apply_param(c, "cc_threshold", "0.2");
    EXPECT_EQ(c.cc_threshold, 0.2);
    harness::apply_param(c, "n_a", "4");
    EXPECT_EQ(c.model.n_a, 4u);
    harness::apply_param(c, "ablation.srg", "false");
    EXPECT_FALSE(c.model.ablation.srg);
    harness::apply_param(c, "lr", "0.05");
    EXPECT_EQ(c.adam.lr, 0.05);
    EXPECT_THROW(harness::apply_param(c, "bogus", "1"), ConfigError);
    EXPECT_THROW(harness::apply_param(c, "tau", "abc"), ConfigError);
}
