#include <gtest/gtest.h>

#include <random>

#include "pasa/data.hpp"
#include "pasa/models.hpp"
#include "support/oracles.hpp"

using namespace pasa;

namespace {

TrainConfig quick(std::size_t epochs, std::uint64_t seed = 1) {
  TrainConfig c;
  c.epochs = epochs;
  c.learning_rate = 0.01;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(ModelSpec, JsonRoundTripAndValidation) {
  for (const auto& s : {ModelSpec::mlp(Shape{4}, {8, 8}, 3), ModelSpec::lenet(Shape{28, 28}),
                        ModelSpec::single_layer(5, 2, Activation::sigmoid)}) {
    nlohmann::json j = s;
    EXPECT_EQ(j.get<ModelSpec>(), s);
  }
  EXPECT_THROW(make_model(ModelSpec::mlp(Shape{4}, {8}, 1), 0), ArgumentError);
  EXPECT_THROW(make_model(ModelSpec::mlp(Shape{4}, {0}, 2), 0), ArgumentError);
}

TEST(ModelSpec, LenetLayerChain) {
  TrainedModel m = make_model(ModelSpec::lenet(Shape{28, 28}), 3);
  EXPECT_EQ(m.graph.parameter("fc1.weight").shape(), (Shape{120, 256}));
  EXPECT_EQ(m.graph.parameter("fc2.weight").shape(), (Shape{84, 120}));
  EXPECT_EQ(m.graph.output_size(), 10u);
  std::mt19937_64 rng(1);
  Tensor z = forward(m.graph, pasa::testing::random_tensor({28, 28}, rng, 0, 1));
  EXPECT_EQ(z.shape(), Shape{10});
  EXPECT_TRUE(z.all_finite());
}

TEST(Train, SeparableBlobsReachHighAccuracy) {
  Dataset d = synth_blobs(3, 6, 900, 12.0, 4);
  Split s = split(d, {0.7, 0, 0, 0.3}, 2);
  TrainedModel m = train(ModelSpec::mlp(Shape{6}, {16}, 3), s.train, s.test, quick(20));
  EXPECT_GE(m.record.accuracy, 0.99);
  EXPECT_EQ(m.record.accuracy, accuracy(m.graph, s.test));
}

TEST(Train, IndistinguishableClassesStayAtChance) {
  Dataset d = synth_blobs(4, 6, 2000, 0.0, 4);
  Split s = split(d, {0.5, 0, 0, 0.5}, 2);
  TrainedModel m = train(ModelSpec::mlp(Shape{6}, {16}, 4), s.train, s.test, quick(5));
  EXPECT_NEAR(m.record.accuracy, 0.25, 0.05);
}

TEST(Train, ZeroEpochsLeavesInitialisation) {
  Dataset d = synth_blobs(2, 3, 50, 2.0, 1);
  auto spec = ModelSpec::mlp(Shape{3}, {5}, 2);
  TrainedModel m = train(spec, d, d, quick(0, 9));
  TrainedModel init = make_model(spec, 9);
  for (const auto& [name, t] : init.graph.parameters()) EXPECT_EQ(m.graph.parameter(name), t);
}

TEST(Train, BitReproducible) {
  Dataset d = synth_blobs(2, 3, 200, 2.0, 1);
  auto spec = ModelSpec::mlp(Shape{3}, {5}, 2);
  EXPECT_EQ(save(train(spec, d, d, quick(3, 5))), save(train(spec, d, d, quick(3, 5))));
  TrainConfig sgd = quick(3, 5);
  sgd.optimizer = Optimizer::sgd_momentum;
  EXPECT_NE(save(train(spec, d, d, sgd)), save(train(spec, d, d, quick(3, 5))));
}

TEST(Train, DivergenceAndShapeErrors) {
  Dataset d = synth_blobs(2, 3, 200, 2.0, 1);
  TrainConfig wild = quick(50);
  wild.optimizer = Optimizer::sgd_momentum;
  wild.learning_rate = 1e300;
  EXPECT_THROW(train(ModelSpec::mlp(Shape{3}, {32, 32}, 2), d, d, wild), NumericError);
  EXPECT_THROW(train(ModelSpec::mlp(Shape{4}, {5}, 2), d, d, quick(1)), ShapeError);
}

TEST(Predict, ArgmaxAndTies) {
  EXPECT_EQ(argmax(std::vector<double>{0.1, 0.9}), 1u);
  EXPECT_EQ(argmax(std::vector<double>{0.5, 0.5}), 0u);
  Tensor eye(Shape{5, 5}, 0.0);
  for (std::size_t i = 0; i < 5; ++i) eye[i * 5 + i] = 1.0;
  TrainedModel id = make_single_layer(eye, Activation::identity);
  Tensor onehot(Shape{1, 5}, 0.0);
  onehot[3] = 1.0;
  EXPECT_EQ(predict(id, onehot).labels, std::vector<std::size_t>{3});
  EXPECT_THROW(predict(id, Tensor(Shape{1, 4}, 0.0)), ShapeError);
}

TEST(Predict, InvariantUnderLogitShift) {
  std::mt19937_64 rng(3);
  TrainedModel m = make_model(ModelSpec::mlp(Shape{4}, {6}, 3), 2);
  Tensor x = pasa::testing::random_tensor({30, 4}, rng);
  auto base = predict(m, x).labels;
  auto& b = m.graph.parameter("out.bias");
  for (auto& v : b.data()) v += 7.5;
  EXPECT_EQ(predict(m, x).labels, base);
}

TEST(Persistence, RoundTripIsBitExact) {
  std::mt19937_64 rng(6);
  for (const auto& spec : {ModelSpec::mlp(Shape{4}, {8, 8}, 3), ModelSpec::lenet(Shape{1, 28, 28}, 4)}) {
    TrainedModel m = make_model(spec, 11);
    m.record = {3, 11, 0.5, 0.25};
    TrainedModel r = load(save(m));
    EXPECT_EQ(r.spec, m.spec);
    EXPECT_EQ(r.record.accuracy, 0.5);
    Shape batch = batched(100, spec.input_shape);
    Tensor x = pasa::testing::random_tensor(batch, rng, 0, 1);
    EXPECT_EQ(predict(r, x).logits, predict(m, x).logits);
  }
}

TEST(Persistence, CorruptStreams) {
  const std::string bytes = save(make_model(ModelSpec::mlp(Shape{4}, {8}, 3), 1));
  std::string bad = bytes;
  bad[1] = 'X';
  EXPECT_THROW(load(bad), FormatError);
  std::string newer = bytes;
  newer[8] = 2;
  try {
    load(newer);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("version 2"), std::string::npos);
  }
  EXPECT_THROW(load(bytes.substr(0, bytes.size() - 1)), FormatError);
  EXPECT_THROW(load(bytes + "x"), FormatError);
  EXPECT_THROW(load(bytes.substr(0, 10)), FormatError);
  EXPECT_THROW(load_file("/nonexistent/model.bin"), ArgumentError);
}

TEST(Persistence, MetadataTravelsWithWeights) {
  TrainedModel m = make_model(ModelSpec::mlp(Shape{3}, {4}, 2), 1);
  nlohmann::json meta;
  load(save(m), &meta);
  EXPECT_TRUE(meta.is_null());
  load(save(m, {{"config_hash", "abc"}, {"seed", 5}}), &meta);
  EXPECT_EQ(meta.at("config_hash"), "abc");
  EXPECT_EQ(meta.at("seed"), 5);
}

TEST(ModelSpec, UnknownEnumNamesAreRejected) {
  auto j = nlohmann::json(ModelSpec::mlp(Shape{4}, {8}, 3));
  j["architecture"] = "resnet";
  EXPECT_THROW(j.get<ModelSpec>(), ArgumentError);
  EXPECT_THROW((nlohmann::json{{"optimizer", "rmsprop"}}.get<TrainConfig>()), ArgumentError);
}
