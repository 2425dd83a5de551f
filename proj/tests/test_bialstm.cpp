#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace netsentry;
using testing_support::TempDir;

namespace {

BiALSTMConfig tiny_config() {
  BiALSTMConfig c;
  c.input_dim = 6;
  c.lstm_hidden = {4, 3};
  c.conv_channels = {2, 3};
  c.kernel = 3;
  c.fusion_dim = 4;
  return c;
}

SequenceTensor random_tensor(std::size_t alpha, std::size_t dim, const std::vector<bool> &mask, std::mt19937_64 &rng) {
  SequenceTensor s;
  s.alpha = alpha;
  s.dim = dim;
  s.mask = mask;
  s.x.resize(alpha * dim);
  s.y.assign(alpha, -1);
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t t = 0; t < alpha; ++t) {
    for (std::size_t j = 0; j < dim; ++j) s.x[t * dim + j] = mask[t] ? u(rng) : 0.0;
    if (mask[t]) s.y[t] = static_cast<int>(rng() % kNumClasses);
  }
  return s;
}

BiALSTM initialized(const BiALSTMConfig &cfg, std::uint64_t seed) {
  BiALSTM m(cfg);
  auto rng = substream(seed, stream::Init);
  m.init(rng);
  // non-zero biases so their gradients are exercised away from the symmetric point
  std::mt19937_64 brng(seed);
  for (auto *p : m.params())
    if (p->shape.size() == 1) oracle::fill_random(*p, brng, 0.3);
  return m;
}

} // namespace

TEST(BiALSTM, FullModelGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  auto model = initialized(tiny_config(), 1);
  const auto s0 = random_tensor(4, 6, {true, true, true, false}, rng);
  const auto s1 = random_tensor(4, 6, {true, false, true, true}, rng);
  const std::vector<const SequenceTensor *> batch = {&s0, &s1};
  for (auto reduction : {NllReduction::Sum, NllReduction::Mean}) {
    auto loss = [&](bool with_backward) {
      Rng masks(42); // identical dropout masks on every evaluation
      return model.batch_loss(batch, 0.5, with_backward, &masks, reduction);
    };
    EXPECT_EQ(gradcheck::check(model.params(), loss, {1e-5, 1e-4, 1e-7}), 0)
        << (reduction == NllReduction::Sum ? "sum" : "mean");
  }
}

TEST(BiALSTM, DefaultArchitectureShapes) {
  BiALSTM m;
  const auto &c = m.config();
  EXPECT_EQ(c.conv_length(0), 65u);
  EXPECT_EQ(c.conv_length(1), 32u);
  EXPECT_EQ(c.conv_out(), 96u); // 6 channels x 16 after the second pool
  EXPECT_EQ(c.lstm_out(), 48u);
  // parameter count from the layer shapes, written out by hand
  const std::size_t lstm = 4 * (48 * 65 + 48 * 48 + 48) + 4 * (48 * 48 + 48 * 48 + 48);
  const std::size_t conv = 4 * (3 * 1 * 3 + 3 * 3 * 3 + 3) + 4 * (6 * 3 * 3 + 6 * 6 * 3 + 6);
  const std::size_t head = 32 * 48 + 32 * 96 + 5 * 32 + 5;
  EXPECT_EQ(m.parameter_count(), lstm + conv + head);
  EXPECT_EQ(m.parameter_count(), 46113u);

  BiALSTMConfig last_only;
  last_only.pool_between_layers = false;
  EXPECT_EQ(last_only.conv_out(), 6u * 32u);
}

TEST(BiALSTM, InvalidArchitecturesAreRejected) {
  auto c = tiny_config();
  c.kernel = 2;
  EXPECT_THROW(BiALSTM{c}, PreconditionError);
  c = tiny_config();
  c.input_dim = 3; // pooling chain collapses below two positions
  EXPECT_THROW(BiALSTM{c}, PreconditionError);
  c = tiny_config();
  c.conv_channels.clear();
  EXPECT_THROW(BiALSTM{c}, PreconditionError);
}

TEST(BiALSTM, InitUsesXavierWeightsAndZeroBiases) {
  BiALSTM m(tiny_config());
  auto rng = substream(3, stream::Init);
  m.init(rng);
  for (const auto *p : m.params()) {
    bool any = false;
    for (double v : p->value) any = any || v != 0.0;
    EXPECT_EQ(any, p->shape.size() >= 2) << p->name;
  }
}

TEST(Fusion, InvariantToPositiveScalingOfEitherProjection) {
  const std::vector<double> a = {0.3, -1.2, 2.0, 0.1}, b = {1.0, 0.5, -0.5, 0.0};
  const auto base = fuse(a, b);
  for (double c : {0.01, 3.0, 1e4}) {
    std::vector<double> ca = a, cb = b;
    for (auto &v : ca) v *= c;
    for (auto &v : cb) v *= c;
    const auto x = fuse(ca, b), y = fuse(a, cb);
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_NEAR(x[i], base[i], 1e-9);
      EXPECT_NEAR(y[i], base[i], 1e-9);
    }
  }
}

TEST(Fusion, EqualDirectionsGiveTanhOfTwiceTheUnitVector) {
  const std::vector<double> a = {3, 4, 0};
  const std::vector<double> b = {6, 8, 0};
  const auto h = fuse(a, b);
  EXPECT_NEAR(h[0], std::tanh(1.2), 1e-12);
  EXPECT_NEAR(h[1], std::tanh(1.6), 1e-12);
  EXPECT_NEAR(h[2], 0.0, 1e-12);
  // opposite directions cancel
  const std::vector<double> na = {-3, -4, 0};
  for (double v : fuse(na, a)) EXPECT_NEAR(v, 0.0, 1e-12);
  EXPECT_THROW(fuse(a, std::vector<double>{1.0}), PreconditionError);
}

TEST(BiALSTM, FusedRepresentationMatchesVectorFormula) {
  std::mt19937_64 rng(4);
  auto model = initialized(tiny_config(), 4);
  const auto s = random_tensor(3, 6, {true, true, true}, rng);
  nn::Tape t;
  const auto tr = model.forward(t, s);
  for (std::size_t i = 0; i < 3; ++i) {
    auto proj = [&](nn::Param &U, nn::Var h) {
      std::vector<double> out(U.shape[0], 0.0);
      const auto hv = t.value(h);
      for (std::size_t r = 0; r < U.shape[0]; ++r)
        for (std::size_t c = 0; c < U.shape[1]; ++c) out[r] += U.value[r * U.shape[1] + c] * hv[c];
      return out;
    };
    const auto want = fuse(proj(model.U_conv(), tr.h_conv[i]), proj(model.U_fc(), tr.h_fc[i]));
    for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(t.value(tr.fused[i])[k], want[k], 1e-12);
  }
}

TEST(BiALSTM, PaddingContentAndPositionDoNotAffectRealTimesteps) {
  std::mt19937_64 rng(5);
  auto model = initialized(tiny_config(), 5);
  auto a = random_tensor(4, 6, {true, true, false, false}, rng);
  auto b = a;
  for (std::size_t j = 0; j < 6; ++j) b.x[3 * 6 + j] = 1e3 * (j + 1); // garbage in a pad row
  // same two real rows with the pad between them
  auto c = a;
  std::copy(a.x.begin() + 6, a.x.begin() + 12, c.x.begin() + 12);
  std::fill(c.x.begin() + 6, c.x.begin() + 12, -7.0);
  c.mask = {true, false, true, false};
  c.y = {a.y[0], -1, a.y[1], -1};
  const auto pa = model.probabilities(a), pb = model.probabilities(b), pc = model.probabilities(c);
  ASSERT_EQ(pa.size(), 2u);
  EXPECT_EQ(pa, pb);
  EXPECT_EQ(pa, pc);
  EXPECT_DOUBLE_EQ(model.batch_loss(std::vector<const SequenceTensor *>{&a}, 0.0, false, nullptr, NllReduction::Sum),
                   model.batch_loss(std::vector<const SequenceTensor *>{&c}, 0.0, false, nullptr, NllReduction::Sum));
}

TEST(BiALSTM, ForwardUnitIsCausalAndBackwardUnitIsAntiCausal) {
  std::mt19937_64 rng(6);
  auto model = initialized(tiny_config(), 6);
  const auto a = random_tensor(3, 6, {true, true, true}, rng);
  auto late = a, early = a;
  for (std::size_t j = 0; j < 6; ++j) {
    late.x[2 * 6 + j] += 0.5;
    early.x[j] += 0.5;
  }
  nn::Tape ta, tl, te;
  const auto ra = model.forward(ta, a), rl = model.forward(tl, late), re = model.forward(te, early);
  auto same = [](nn::Tape &x, nn::Var vx, nn::Tape &y, nn::Var vy) {
    const auto p = x.value(vx), q = y.value(vy);
    return std::equal(p.begin(), p.end(), q.begin(), q.end());
  };
  EXPECT_TRUE(same(ta, ra.h_fc[0], tl, rl.h_fc[0]));       // future rows never reach the forward unit
  EXPECT_FALSE(same(ta, ra.h_conv[0], tl, rl.h_conv[0]));  // but do reach the backward unit
  EXPECT_TRUE(same(ta, ra.h_conv[2], te, re.h_conv[2]));   // and vice versa
  EXPECT_FALSE(same(ta, ra.h_fc[2], te, re.h_fc[2]));
}

TEST(BiALSTM, ProbabilitiesAreNormalizedAndDeterministicInEvalMode) {
  std::mt19937_64 rng(7);
  auto model = initialized(tiny_config(), 7);
  const auto s = random_tensor(5, 6, {true, true, true, true, false}, rng);
  const auto p1 = model.probabilities(s), p2 = model.probabilities(s);
  EXPECT_EQ(p1, p2);
  for (const auto &p : p1) {
    double sum = 0;
    for (double v : p) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  SequenceTensor wrong = s;
  wrong.dim = 5;
  EXPECT_THROW(model.probabilities(wrong), PreconditionError);
}

TEST(BiALSTM, SumReductionIsRealCountTimesMean) {
  std::mt19937_64 rng(8);
  auto model = initialized(tiny_config(), 8);
  const auto s0 = random_tensor(4, 6, {true, true, false, false}, rng);
  const auto s1 = random_tensor(4, 6, {true, true, true, true}, rng);
  const std::vector<const SequenceTensor *> batch = {&s0, &s1};
  const double sum = model.batch_loss(batch, 0.0, false, nullptr, NllReduction::Sum);
  const double mean = model.batch_loss(batch, 0.0, false, nullptr, NllReduction::Mean);
  EXPECT_NEAR(sum, 6 * mean, 1e-12);
  double sq = 0;
  for (const auto *p : model.params())
    for (double v : p->value) sq += v * v;
  EXPECT_NEAR(model.batch_loss(batch, 0.25, false, nullptr, NllReduction::Sum), sum + 0.25 * sq, 1e-10);
}

TEST(BiALSTM, TrainingIsSeedDeterministicAndLearnsASeparableTask) {
  // class follows the first feature: high -> DOS, low -> BENIGN
  std::mt19937_64 rng(9);
  std::vector<SequenceTensor> data;
  for (int i = 0; i < 40; ++i) {
    auto s = random_tensor(3, 6, {true, true, true}, rng);
    for (std::size_t t = 0; t < 3; ++t) s.y[t] = s.x[t * 6] > 0.5 ? 1 : 0;
    data.push_back(s);
  }
  TrainConfig cfg;
  cfg.epochs = 25;
  cfg.batch_size = 8;
  cfg.lr = 1e-2;
  cfg.l2 = 1e-4;
  cfg.seed = 3;
  BiALSTM a(tiny_config()), b(tiny_config()), c(tiny_config());
  const auto ra = train(a, data, cfg);
  const auto rb = train(b, data, cfg);
  EXPECT_EQ(a.parameter_hash(), b.parameter_hash());
  EXPECT_EQ(ra.epoch_loss, rb.epoch_loss);
  EXPECT_EQ(ra.steps, 25u * 5u);
  cfg.seed = 4;
  train(c, data, cfg);
  EXPECT_NE(a.parameter_hash(), c.parameter_hash());

  EXPECT_LT(ra.epoch_loss.back(), 0.5 * ra.epoch_loss.front());
  std::size_t correct = 0, total = 0;
  for (const auto &p : predict(a, data)) {
    correct += static_cast<int>(p.cls) == data[p.sequence].y[p.timestep];
    ++total;
  }
  EXPECT_GT(static_cast<double>(correct) / static_cast<double>(total), 0.9);
}

TEST(BiALSTM, PredictAppliesThresholdToAnomalyScore) {
  std::mt19937_64 rng(10);
  auto model = initialized(tiny_config(), 10);
  const std::vector<SequenceTensor> data = {random_tensor(3, 6, {true, false, true}, rng)};
  const auto probs = model.probabilities(data[0]);
  for (double th : {0.0, 0.3, 0.7, 1.0}) {
    const auto pred = predict(model, data, th);
    ASSERT_EQ(pred.size(), 2u);
    EXPECT_EQ(pred[1].timestep, 2u);
    for (std::size_t k = 0; k < 2; ++k) {
      EXPECT_DOUBLE_EQ(pred[k].anomaly, 1.0 - probs[k][0]);
      EXPECT_EQ(pred[k].malicious, pred[k].anomaly >= th);
    }
  }
  EXPECT_THROW(predict(model, data, 1.5), PreconditionError);
}

TEST(Checkpoint, RoundTripPreservesWeightsAndPredictions) {
  TempDir dir("ckpt");
  std::mt19937_64 rng(11);
  Checkpoint ck{initialized(tiny_config(), 11), {}, 11, {1.5, 0.7}};
  for (std::size_t i = 0; i < kModelFeatures; ++i) ck.normalizer.max[i] = 1.0 + static_cast<double>(i);
  save_checkpoint(dir.file("m.json"), ck);
  auto back = load_checkpoint(dir.file("m.json"));
  EXPECT_EQ(back.model.parameter_hash(), ck.model.parameter_hash());
  EXPECT_EQ(back.model.config(), ck.model.config());
  EXPECT_EQ(back.normalizer, ck.normalizer);
  EXPECT_EQ(back.loss_curve, ck.loss_curve);
  EXPECT_EQ(back.seed, 11u);
  const auto s = random_tensor(4, 6, {true, true, true, false}, rng);
  EXPECT_EQ(back.model.probabilities(s), ck.model.probabilities(s));
}

TEST(Checkpoint, TamperedOrForeignFilesAreRejected) {
  TempDir dir("ckpt");
  Checkpoint ck{initialized(tiny_config(), 12), {}, 12, {}};
  auto j = checkpoint_to_json(ck);
  j["parameters"][0]["values"][0] = 123.0;
  EXPECT_THROW(checkpoint_from_json(j), FormatError);
  auto k = checkpoint_to_json(ck);
  k["format"] = "something.else";
  EXPECT_THROW(checkpoint_from_json(k), FormatError);
  EXPECT_THROW(checkpoint_from_json(nlohmann::json::object()), FormatError);
  EXPECT_THROW(load_checkpoint(dir.file("absent.json")), FormatError);
}
