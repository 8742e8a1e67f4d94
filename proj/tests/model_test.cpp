/*
 * Copyright 2026 The Empathy-LSTM Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "empathy/errors.hpp"
#include "empathy/model.hpp"
#include "empathy/ops.hpp"
#include "test_support.hpp"

namespace {

using namespace empathy;
using empathy::testing::gradient_check;
using empathy::testing::random_features;
using empathy::testing::random_vector;
using empathy::testing::sequence_loss;
using empathy::testing::small_config;

void fill_parameters(EmpathyModel& model, double value) {
  for (auto& p : model.parameters()) {
    for (auto& v : p.tensor.mutable_values()) v = value;
  }
}

Tensor row(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor::matrix(1, n, std::move(v));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TEST(VariantTest, AllSevenNames) {
  const std::vector<std::string> expected{"A", "T", "V", "AT", "AV", "TV", "ATV"};
  ASSERT_EQ(variant_names().size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(variant_names()[i], expected[i]);
  for (const auto& name : expected) {
    ModelConfig c = variant_factory(name);
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.modalities.size(), name.size());
  }
}

TEST(VariantTest, AudioTextUsesAttentionWithoutDelta) {
  ModelConfig c = variant_factory("AT");
  EXPECT_EQ(c.modalities, (std::vector<Modality>{Modality::audio, Modality::text}));
  EXPECT_TRUE(c.use_attention);
  EXPECT_FALSE(c.predict_delta);
}

TEST(VariantTest, TextOnlyPredictsDeltasWithoutAttention) {
  ModelConfig c = variant_factory("T");
  EXPECT_EQ(c.modalities, (std::vector<Modality>{Modality::text}));
  EXPECT_FALSE(c.use_attention);
  EXPECT_TRUE(c.predict_delta);
}

TEST(VariantTest, VisualOnlyHasNoAttention) {
  ModelConfig c = variant_factory("V");
  EXPECT_EQ(c.modalities, (std::vector<Modality>{Modality::visual}));
  EXPECT_FALSE(c.use_attention);
  EXPECT_FALSE(c.predict_delta);
}

TEST(VariantTest, UnknownNameListsTheSeven) {
  try {
    variant_factory("X");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (auto name : variant_names()) EXPECT_NE(msg.find(std::string(name)), std::string::npos);
  }
  EXPECT_EQ(variant_factory("atv").modalities.size(), 3u);
}

TEST(ModelConfigTest, DefaultsAndInvariants) {
  ModelConfig c = variant_factory("ATV");
  EXPECT_EQ(c.embed_dim, 128u);
  EXPECT_EQ(c.hidden_dim, 512u);
  EXPECT_EQ(c.attention_window, 3u);
  EXPECT_EQ(c.attention_mlp_hidden, 128u);
  EXPECT_EQ(c.head_dim, 128u);
  EXPECT_EQ(c.input_dim(Modality::audio), 990u);
  EXPECT_EQ(c.input_dim(Modality::text), 300u);
  EXPECT_EQ(c.input_dim(Modality::visual), 4096u);
  EXPECT_EQ(c.fused_dim(), 384u);

  ModelConfig bad = c;
  bad.attention_window = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.hidden_dim = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.modalities.clear();
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.predict_delta = true;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad.allow_delta_with_any_modalities = true;
  EXPECT_NO_THROW(bad.validate());
}

TEST(ModelConfigTest, JsonRoundTrip) {
  ModelConfig c = small_config("TV", 99);
  c.attention_window = 5;
  nlohmann::json j = c;
  EXPECT_EQ(j.get<ModelConfig>(), c);
}

TEST(EmpathyModelTest, ParameterShapesFollowConfig) {
  ModelConfig c = small_config("ATV");
  EmpathyModel a(c), b(c);
  EXPECT_EQ(a.parameter_count(), b.parameter_count());
  const std::size_t F = 3 * c.embed_dim, H = c.hidden_dim;
  std::size_t expected = 0;
  for (auto m : c.modalities) expected += (c.input_dim(m) + 1) * c.embed_dim;
  expected += (F + H + 1) * 4 * H;
  expected += (F + 1) * c.attention_mlp_hidden + (c.attention_mlp_hidden + 1) * 3;
  expected += (H + 1) * c.head_dim + c.head_dim + 1;
  EXPECT_EQ(a.parameter_count(), expected);
  EXPECT_EQ(a.parameter("lstm.input_weight").shape(), (Shape{F, 4 * H}));

  EmpathyModel t(small_config("T"));
  EXPECT_THROW(t.parameter("attention.score_weight"), ContractError);
}

TEST(EmpathyModelTest, InitialisationIsSeededAndBounded) {
  ModelConfig c = small_config("AT", 5);
  EmpathyModel a(c), b(c);
  c.seed = 6;
  EmpathyModel d(c);
  bool differs = false;
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    const auto& pa = a.parameters()[i].tensor;
    const auto& pb = b.parameters()[i].tensor;
    const auto& pd = d.parameters()[i].tensor;
    EXPECT_TRUE(std::equal(pa.values().begin(), pa.values().end(), pb.values().begin()));
    differs |= !std::equal(pa.values().begin(), pa.values().end(), pd.values().begin());
  }
  EXPECT_TRUE(differs);
  const std::size_t H = c.hidden_dim;
  auto bias = a.parameter("lstm.bias").values();
  const double bound = 1.0 / std::sqrt(double(c.fused_dim() + H));
  for (std::size_t j = 0; j < 4 * H; ++j) {
    if (j >= H && j < 2 * H) {
      EXPECT_EQ(bias[j], 1.0);
    } else {
      EXPECT_LE(std::abs(bias[j]), bound);
    }
  }
}

TEST(EncodeTest, ZeroParametersGiveZeroEmbedding) {
  EmpathyModel model(variant_factory("A"));
  fill_parameters(model, 0.0);
  std::mt19937_64 rng(1);
  Tensor e = model.encode_modality(Tensor::vector(random_vector(990, rng)), Modality::audio);
  for (double v : e.values()) EXPECT_EQ(v, 0.0);
}

TEST(EncodeTest, AudioCompressesTo128WithTanhRange) {
  EmpathyModel model(variant_factory("A"));
  std::mt19937_64 rng(2);
  Tensor e = model.encode_modality(Tensor::vector(random_vector(990, rng)), Modality::audio);
  EXPECT_EQ(e.shape(), (Shape{128}));
  for (double v : e.values()) {
    EXPECT_GT(v, -1.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(EncodeTest, WrongWidthNamesModality) {
  EmpathyModel model(variant_factory("AT"));
  try {
    model.encode_modality(Tensor(Shape{299}), Modality::text);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("text"), std::string::npos);
  }
}

TEST(FuseTest, WidthIsModalityCountTimesEmbed) {
  EmpathyModel atv(variant_factory("ATV"));
  std::vector<Tensor> three(3, Tensor(Shape{128}, 0.1));
  EXPECT_EQ(atv.fuse(three).shape(), (Shape{384}));
  EmpathyModel t(variant_factory("T"));
  std::vector<Tensor> one(1, Tensor(Shape{128}, 0.1));
  EXPECT_EQ(t.fuse(one).shape(), (Shape{128}));
  EXPECT_THROW(atv.fuse(one), ContractError);
}

TEST(FuseTest, PermutationChangesLayoutNotNorm) {
  ModelConfig c = small_config("ATV");
  EmpathyModel model(c);
  std::mt19937_64 rng(3);
  std::vector<Tensor> e{Tensor::vector(random_vector(4, rng)), Tensor::vector(random_vector(4, rng)),
                        Tensor::vector(random_vector(4, rng))};
  std::vector<Tensor> swapped{e[2], e[0], e[1]};
  auto norm = [](const Tensor& t) {
    double s = 0;
    for (double v : t.values()) s += v * v;
    return s;
  };
  Tensor a = model.fuse(e), b = model.fuse(swapped);
  EXPECT_NEAR(norm(a), norm(b), 1e-15);
  EXPECT_NE(a.at(0), b.at(0));
}

TEST(LstmTest, ZeroParametersKeepZeroState) {
  ModelConfig c = small_config("A");
  EmpathyModel model(c);
  fill_parameters(model, 0.0);
  std::mt19937_64 rng(4);
  RecurrentState s = model.initial_state(1);
  for (int t = 0; t < 5; ++t) s = model.lstm_step(row(random_vector(c.fused_dim(), rng)), s);
  for (double v : s.hidden.values()) EXPECT_EQ(v, 0.0);
  for (double v : s.cell.values()) EXPECT_EQ(v, 0.0);
}

TEST(LstmTest, SaturatedForgetGateCarriesMemory) {
  ModelConfig c = small_config("A");
  EmpathyModel model(c);
  const std::size_t H = c.hidden_dim;
  auto bias = model.parameter("lstm.bias").mutable_values();
  for (std::size_t j = H; j < 2 * H; ++j) bias[j] = 50.0;
  std::mt19937_64 rng(5);
  Tensor x = row(random_vector(c.fused_dim(), rng));
  RecurrentState prev{row(random_vector(H, rng, -0.9, 0.9)), row(random_vector(H, rng))};
  RecurrentState next = model.lstm_step(x, prev);

  // cell == cell_prev + i * g once the forget gate is 1.
  Tensor gates = ops::add(model.project_input(x),
                          ops::matmul(prev.hidden, model.parameter("lstm.hidden_weight")));
  for (std::size_t j = 0; j < H; ++j) {
    const double i = sigmoid(gates.at(j));
    const double g = std::tanh(gates.at(2 * H + j));
    EXPECT_NEAR(next.cell.at(j), prev.cell.at(j) + i * g, 1e-12);
  }
}

TEST(LstmTest, MatchesHandCodedReferenceCell) {
  // A 4-input, 4-unit cell evaluated with scalar loops over the raw weights.
  ModelConfig c = small_config("A", 31);
  c.embed_dim = 4;
  c.hidden_dim = 4;
  EmpathyModel model(c);
  std::mt19937_64 rng(6);
  const std::size_t F = 4, H = 4;
  auto x = random_vector(F, rng);
  auto h_prev = random_vector(H, rng);
  auto c_prev = random_vector(H, rng);
  RecurrentState next = model.lstm_step(row(x), {row(h_prev), row(c_prev)});

  auto wx = model.parameter("lstm.input_weight").values();
  auto wh = model.parameter("lstm.hidden_weight").values();
  auto b = model.parameter("lstm.bias").values();
  auto pre = [&](std::size_t gate, std::size_t j) {
    const std::size_t col = gate * H + j;
    double z = b[col];
    for (std::size_t k = 0; k < F; ++k) z += x[k] * wx[k * 4 * H + col];
    for (std::size_t k = 0; k < H; ++k) z += h_prev[k] * wh[k * 4 * H + col];
    return z;
  };
  for (std::size_t j = 0; j < H; ++j) {
    const double i = sigmoid(pre(0, j)), f = sigmoid(pre(1, j));
    const double g = std::tanh(pre(2, j)), o = sigmoid(pre(3, j));
    const double cell = f * c_prev[j] + i * g;
    EXPECT_NEAR(next.cell.at(j), cell, 1e-14);
    EXPECT_NEAR(next.hidden.at(j), o * std::tanh(cell), 1e-14);
  }
}

TEST(LstmTest, ShapeMismatch) {
  ModelConfig c = small_config("A");
  EmpathyModel model(c);
  EXPECT_THROW(model.lstm_step(row(std::vector<double>(c.fused_dim() + 1)), model.initial_state(1)),
               DimensionError);
  EXPECT_THROW(model.lstm_step(row(std::vector<double>(c.fused_dim())), model.initial_state(2)),
               DimensionError);
}

TEST(AttentionTest, SingleHistoryReturnsThatState) {
  ModelConfig c = small_config("AT");
  EmpathyModel model(c);
  std::mt19937_64 rng(7);
  Tensor h0 = row(random_vector(c.hidden_dim, rng));
  for (double s : {-30.0, 0.0, 12.0}) {
    Tensor scores = row({s, -s, 2 * s});
    AttentionContext ctx = model.attend(scores, std::span(&h0, 1));
    EXPECT_EQ(ctx.weights.at(0), 1.0);
    for (std::size_t j = 0; j < c.hidden_dim; ++j) EXPECT_EQ(ctx.context.at(j), h0.at(j));
  }
}

TEST(AttentionTest, UniformScoresAverageTheWindow) {
  ModelConfig c = small_config("AT");
  EmpathyModel model(c);
  std::mt19937_64 rng(8);
  std::vector<Tensor> h;
  for (int i = 0; i < 3; ++i) h.push_back(row(random_vector(c.hidden_dim, rng)));
  AttentionContext ctx = model.attend(row({0.7, 0.7, 0.7}), h);
  for (std::size_t j = 0; j < c.hidden_dim; ++j) {
    EXPECT_NEAR(ctx.context.at(j), (h[0].at(j) + h[1].at(j) + h[2].at(j)) / 3.0, 1e-15);
  }
}

TEST(AttentionTest, HandSetWeightsOnBasisStates) {
  ModelConfig c = small_config("AT");
  EmpathyModel model(c);
  const std::size_t H = c.hidden_dim;
  std::vector<Tensor> basis;
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<double> e(H, 0.0);
    e[i] = 1.0;
    basis.push_back(row(e));
  }
  // Scores equal to log weights reproduce the weights after softmax.
  AttentionContext ctx =
      model.attend(row({std::log(0.5), std::log(0.3), std::log(0.2)}), basis);
  const std::vector<double> expected{0.5, 0.3, 0.2, 0.0, 0.0};
  for (std::size_t j = 0; j < H; ++j) EXPECT_NEAR(ctx.context.at(j), expected[j], 1e-15);
}

TEST(AttentionTest, ErrorsOnEmptyOrOverlongHistory) {
  ModelConfig c = small_config("AT");
  EmpathyModel model(c);
  std::vector<Tensor> none;
  Tensor x = row(std::vector<double>(c.fused_dim(), 0.1));
  EXPECT_THROW(model.local_attention(x, none), ContractError);
  std::vector<Tensor> four(4, row(std::vector<double>(c.hidden_dim, 0.0)));
  EXPECT_THROW(model.local_attention(x, four), ContractError);
  EmpathyModel t(small_config("T"));
  EXPECT_THROW(t.attention_scores(x), ContractError);
}

TEST(AttentionTest, WeightsFormSimplexAndContextIsConvex) {
  ModelConfig c = small_config("ATV", 12);
  EmpathyModel model(c);
  std::mt19937_64 rng(9);
  std::vector<Tensor> h;
  for (int t = 0; t < 12; ++t) h.push_back(row(random_vector(c.hidden_dim, rng)));
  for (std::size_t t = 0; t < h.size(); ++t) {
    Tensor x = row(random_vector(c.fused_dim(), rng, -3, 3));
    AttentionContext ctx = model.attend_at(model.attention_scores(x), h, t);
    EXPECT_EQ(ctx.weights.cols(), std::min<std::size_t>(t + 1, 3));
    double total = 0;
    for (double w : ctx.weights.values()) {
      EXPECT_GE(w, 0.0);
      total += w;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
    for (std::size_t j = 0; j < c.hidden_dim; ++j) {
      double lo = 1e9, hi = -1e9;
      for (std::size_t i = 0; i < ctx.weights.cols(); ++i) {
        lo = std::min(lo, h[t - i].at(j));
        hi = std::max(hi, h[t - i].at(j));
      }
      EXPECT_GE(ctx.context.at(j), lo - 1e-15);
      EXPECT_LE(ctx.context.at(j), hi + 1e-15);
    }
  }
}

TEST(AttentionTest, StatesOutsideTheWindowHaveNoEffect) {
  ModelConfig c = small_config("AT", 13);
  EmpathyModel model(c);
  std::mt19937_64 rng(10);
  std::vector<Tensor> h;
  for (int t = 0; t < 10; ++t) h.push_back(row(random_vector(c.hidden_dim, rng)));
  Tensor scores = model.attention_scores(row(random_vector(c.fused_dim(), rng)));
  const std::size_t t = 7;
  const Tensor base = model.attend_at(scores, h, t).context;
  for (std::size_t k = 3; k <= t; ++k) {
    auto moved = h;
    moved[t - k] = row(random_vector(c.hidden_dim, rng, 5, 9));
    const Tensor ctx = model.attend_at(scores, moved, t).context;
    for (std::size_t j = 0; j < c.hidden_dim; ++j) EXPECT_EQ(ctx.at(j), base.at(j));
  }
  auto moved = h;
  moved[t - 2] = row(random_vector(c.hidden_dim, rng, 5, 9));
  EXPECT_NE(model.attend_at(scores, moved, t).context.at(0), base.at(0));
}

TEST(HeadTest, ZeroParametersGiveZero) {
  ModelConfig c = small_config("A");
  EmpathyModel model(c);
  fill_parameters(model, 0.0);
  std::mt19937_64 rng(11);
  EXPECT_EQ(model.predict_step(row(random_vector(c.hidden_dim, rng))).item(), 0.0);
}

TEST(HeadTest, ScalarOutputForEveryVariant) {
  for (auto name : variant_names()) {
    ModelConfig c = small_config(name);
    EmpathyModel model(c);
    EXPECT_EQ(model.predict_step(row(std::vector<double>(c.hidden_dim, 0.3))).size(), 1u);
  }
  EmpathyModel model(small_config("A"));
  EXPECT_THROW(model.predict_step(row({1.0})), DimensionError);
}

TEST(HeadTest, GradientMatchesFiniteDifferences) {
  ModelConfig c = small_config("A", 14);
  EmpathyModel model(c);
  std::mt19937_64 rng(12);
  Tensor summary(Shape{6, c.hidden_dim}, random_vector(6 * c.hidden_dim, rng));
  Tensor target(Shape{6, 1}, random_vector(6, rng));
  std::vector<NamedParameter> head;
  for (auto& p : model.parameters()) {
    if (p.name.starts_with("head.")) head.push_back(p);
  }
  auto loss = [&] { return ops::mse_loss(model.predict_step(summary), target); };
  EXPECT_LT(gradient_check(loss, head).max_relative_error, 1e-6);
}

TEST(ForwardTest, ZeroParametersGiveZeroTrace) {
  ModelConfig c = small_config("ATV");
  EmpathyModel model(c);
  fill_parameters(model, 0.0);
  std::mt19937_64 rng(13);
  auto trace = model.forward_sequence(random_features(c, 17, rng));
  ASSERT_EQ(trace.valence.size(), 17u);
  for (double v : trace.valence) EXPECT_EQ(v, 0.0);
}

TEST(ForwardTest, ThreeHundredStepsInThreeHundredOut) {
  ModelConfig c = variant_factory("AT");
  c.hidden_dim = 32;
  EmpathyModel model(c);
  std::mt19937_64 rng(14);
  EXPECT_EQ(model.forward_sequence(random_features(c, 300, rng)).valence.size(), 300u);
}

TEST(ForwardTest, DeltaModeIntegratesFromZero) {
  const double d = 0.03;
  std::vector<double> raw(50, d);
  auto trace = integrate_outputs(raw, true, false);
  for (std::size_t t = 0; t < raw.size(); ++t) EXPECT_NEAR(trace[t], (t + 1) * d, 1e-12);
  auto clipped = integrate_outputs(raw, true, true);
  EXPECT_EQ(clipped.back(), 1.0);
  EXPECT_EQ(integrate_outputs(std::vector<double>{-3.0, 0.2}, false, true),
            (std::vector<double>{-1.0, 0.2}));
}

TEST(ForwardTest, ConstantDeltaModelProducesRamp) {
  // Text-only model whose head emits a constant: trace is the running sum.
  ModelConfig c = small_config("T");
  EmpathyModel model(c);
  fill_parameters(model, 0.0);
  model.parameter("head.output_bias").mutable_values()[0] = 0.01;
  std::mt19937_64 rng(15);
  auto trace = model.forward_sequence(random_features(c, 150, rng));
  for (std::size_t t = 0; t < 99; ++t) EXPECT_NEAR(trace.valence[t], (t + 1) * 0.01, 1e-12);
  EXPECT_EQ(trace.valence[120], 1.0);
}

TEST(ForwardTest, EmptySequenceIsRejected) {
  ModelConfig c = small_config("A");
  EmpathyModel model(c);
  FeatureMap empty{{Modality::audio, Matrix(0, 6)}};
  EXPECT_THROW(model.forward_sequence(empty), ContractError);
  FeatureMap wrong{{Modality::text, Matrix(3, 5)}};
  EXPECT_THROW(model.forward_sequence(wrong), DataError);
}

TEST(ForwardTest, EveryVariantReturnsTFiniteValuesInRange) {
  std::mt19937_64 rng(16);
  std::uniform_int_distribution<std::size_t> steps(1, 400);
  for (auto name : variant_names()) {
    ModelConfig c = small_config(name, 17);
    EmpathyModel model(c);
    for (std::size_t T : {std::size_t{1}, std::size_t{2}, steps(rng), std::size_t{400}}) {
      auto trace = model.forward_sequence(random_features(c, T, rng));
      ASSERT_EQ(trace.valence.size(), T) << name;
      for (double v : trace.valence) {
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_GE(v, -1.0);
        EXPECT_LE(v, 1.0);
      }
    }
  }
}

TEST(ForwardTest, RawOutputsAreUnclamped) {
  ModelConfig c = small_config("A");
  EmpathyModel model(c);
  model.parameter("head.output_bias").mutable_values()[0] = 4.0;
  std::mt19937_64 rng(18);
  FeatureMap f = random_features(c, 5, rng);
  SequenceView view{&f, 0, 5};
  Tensor raw = model.forward_raw(make_batch(std::span(&view, 1), c.modalities, 5));
  EXPECT_GT(raw.at(0), 1.0);
  for (double v : model.forward_sequence(f).valence) EXPECT_EQ(v, 1.0);
}

TEST(ForwardTest, BatchedInferenceMatchesOneAtATime) {
  ModelConfig c = small_config("ATV", 19);
  EmpathyModel model(c);
  std::mt19937_64 rng(19);
  std::vector<FeatureMap> seqs{random_features(c, 9, rng), random_features(c, 23, rng),
                               random_features(c, 1, rng)};
  std::vector<const FeatureMap*> ptrs{&seqs[0], &seqs[1], &seqs[2]};
  auto batched = model.forward_sequences(ptrs);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    auto single = model.forward_sequence(seqs[i]).valence;
    ASSERT_EQ(batched[i].valence.size(), single.size());
    for (std::size_t t = 0; t < single.size(); ++t) {
      EXPECT_NEAR(batched[i].valence[t], single[t], 1e-13);
    }
  }
}

TEST(ForwardTest, SameSeedSameTrace) {
  ModelConfig c = small_config("AV", 21);
  std::mt19937_64 rng(20);
  FeatureMap f = random_features(c, 30, rng);
  EXPECT_EQ(EmpathyModel(c).forward_sequence(f).valence,
            EmpathyModel(c).forward_sequence(f).valence);
}

TEST(GradientTest, EveryVariantMatchesFiniteDifferences) {
  for (auto name : variant_names()) {
    ModelConfig c = small_config(name, 23);
    EmpathyModel model(c);
    std::mt19937_64 rng(21);
    FeatureMap f = random_features(c, 20, rng);
    auto loss = sequence_loss(model, f, random_vector(20, rng));
    auto result = gradient_check(loss, model.parameters());
    EXPECT_LT(result.max_relative_error, 1e-4) << name << " worst " << result.worst;
    EXPECT_EQ(result.checked, model.parameter_count());
  }
}

TEST(GradientTest, EveryParameterReceivesGradient) {
  for (auto name : variant_names()) {
    ModelConfig c = small_config(name, 25);
    EmpathyModel model(c);
    std::mt19937_64 rng(22);
    FeatureMap f = random_features(c, 20, rng);
    auto loss = sequence_loss(model, f, random_vector(20, rng));
    {
      Tape tape;
      tape.backward(loss());
    }
    for (const auto& p : model.parameters()) {
      ASSERT_TRUE(p.tensor.has_grad()) << name << " " << p.name;
      bool nonzero = false;
      for (double g : p.tensor.grad()) nonzero |= g != 0.0;
      EXPECT_TRUE(nonzero) << name << " " << p.name;
    }
  }
}

TEST(GradientTest, PaddedBatchMatchesSumOfSequences) {
  // Masked batch loss over padded sequences equals the per-sequence losses.
  ModelConfig c = small_config("AT", 27);
  EmpathyModel model(c);
  std::mt19937_64 rng(23);
  FeatureMap a = random_features(c, 8, rng), b = random_features(c, 5, rng);
  auto ta = random_vector(8, rng), tb = random_vector(5, rng);
  std::vector<SequenceView> views{{&a, 0, 8}, {&b, 0, 5}};
  SequenceBatch batch = make_batch(views, c.modalities, 8);
  std::vector<double> target(16, 0.0), mask(16, 0.0);
  for (std::size_t t = 0; t < 8; ++t) {
    target[t * 2] = ta[t];
    mask[t * 2] = 1.0;
    if (t < 5) {
      target[t * 2 + 1] = tb[t];
      mask[t * 2 + 1] = 1.0;
    }
  }
  const double batched = ops::mse_loss(model.forward_raw(batch), Tensor({8, 2}, target),
                                       Tensor({8, 2}, mask)).item();
  const double la = sequence_loss(model, a, ta)().item();
  const double lb = sequence_loss(model, b, tb)().item();
  EXPECT_NEAR(batched, (8 * la + 5 * lb) / 13.0, 1e-14);
}

TEST(CheckpointTest, RoundTripIsBitIdentical) {
  ModelConfig c = small_config("ATV", 29);
  c.attention_window = 4;
  EmpathyModel model(c);
  const auto path = std::filesystem::temp_directory_path() / "empathy_model_test" / "ckpt.bin";
  save_checkpoint(model, path);
  EmpathyModel loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.config(), model.config());
  ASSERT_EQ(loaded.parameters().size(), model.parameters().size());
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    const auto& a = model.parameters()[i].tensor.values();
    const auto& b = loaded.parameters()[i].tensor.values();
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
  std::mt19937_64 rng(24);
  FeatureMap f = random_features(c, 40, rng);
  EXPECT_EQ(model.forward_sequence(f).valence, loaded.forward_sequence(f).valence);
  EXPECT_EQ(serialize_checkpoint(loaded), serialize_checkpoint(model));
  std::filesystem::remove_all(path.parent_path());
}

TEST(CheckpointTest, CorruptInputIsRejected) {
  EmpathyModel model(small_config("A"));
  std::string bytes = serialize_checkpoint(model);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), DataError);
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad), DataError);
  EXPECT_THROW(deserialize_checkpoint(""), DataError);
  EXPECT_THROW(load_checkpoint("/nonexistent/ckpt.bin"), DataError);
}

TEST(CheckpointTest, CloneDoesNotAlias) {
  EmpathyModel model(small_config("A"));
  EmpathyModel copy = model.clone();
  copy.parameter("head.output_bias").mutable_values()[0] = 42.0;
  EXPECT_NE(model.parameter("head.output_bias").at(0), 42.0);
  model.copy_parameters_from(copy);
  EXPECT_EQ(model.parameter("head.output_bias").at(0), 42.0);
}

}  // namespace
