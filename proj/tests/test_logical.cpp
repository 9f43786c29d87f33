#include <gtest/gtest.h>

#include "afe/dataset.hpp"
#include "afe/logical.hpp"
#include "afe/resample.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace afe {
namespace {

using namespace oracle;

using DTensor = BasicTensor<double>;

LogicalGrads<double>* const kNoGrads = nullptr;
LogicalGrads<float>* const kNoGradsF = nullptr;

TEST(LossTotal, DecomposesExactly) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const LogicalProblem p = make_logical_problem(seed);
    for (const LossWeights lambda : {LossWeights{}, LossWeights{0.3, 2.0, 0.7}}) {
      const LossBundle b = loss_total(p.params, "pinboard", p.in, lambda, true, kNoGrads);
      EXPECT_EQ(b.l_total - (lambda.cos * b.l_cos + lambda.mse * b.l_mse + lambda.vq * b.l_vq),
                0.0);
      EXPECT_GE(b.l_cos, 0.0);
      EXPECT_GE(b.l_mse, 0.0);
      EXPECT_GE(b.l_vq, 0.0);
    }
  }
}

TEST(LossTotal, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    for (const LossWeights lambda : {LossWeights{}, LossWeights{0.5, 2.0, 1.5}}) {
      LogicalProblem p = make_logical_problem(seed);
      LogicalGrads<double> grads;
      LogicalPass<double> pass;
      const LossBundle b = loss_total(p.params, "pinboard", p.in, lambda, true, &grads, &pass);
      std::vector<std::vector<std::uint32_t>> idx;
      std::vector<DTensor> fz, fe;
      for (std::size_t k = 0; k < 4; ++k) {
        idx.push_back(pass.q[k].indices);
        fz.push_back(pass.z[k]);
        fe.push_back(pass.q[k].e);
      }
      auto loss = [&] { return frozen_objective(p, idx, fz, fe, lambda); };
      ASSERT_NEAR(loss(), b.l_total, 1e-12);

      std::size_t n_params = 0;
      auto check = [&](DTensor& param, const DTensor& analytic, const std::string& name) {
        n_params += param.size();
        const auto fd = test::numeric_gradient(param, loss, 1e-6);
        EXPECT_LT(test::relative_error(test::as_doubles(analytic), fd), 1e-4)
            << name << " seed " << seed;
      };
      auto dp = p.params.decoder.parameters();
      const auto dg = grads.decoder.parameters();
      for (std::size_t i = 0; i < dp.size(); ++i) check(*dp[i], *dg[i], "decoder " + std::to_string(i));
      check(p.params.contexts.vector_param("pinboard"), grads.contexts.vector_param("pinboard"), "g");
      for (std::size_t k = 0; k < 4; ++k) {
        check(p.params.projectors[k].weight, grads.projectors[k], "theta " + std::to_string(k + 1));
        check(p.params.codebooks[k].entries, grads.entries[k], "entries " + std::to_string(k + 1));
      }
      EXPECT_LE(n_params, 10000u);
    }
  }
}

TEST(LossTotal, AdapterGradientMatchesFiniteDifferences) {
  LogicalProblem p = make_logical_problem(4);
  p.params.contexts.set_embedding("pinboard", test::random_tensor<double>({6}, 2).storage());
  LogicalGrads<double> grads;
  LogicalPass<double> pass;
  loss_total(p.params, "pinboard", p.in, LossWeights{}, true, &grads, &pass);
  std::vector<std::vector<std::uint32_t>> idx;
  std::vector<DTensor> fz, fe;
  for (std::size_t k = 0; k < 4; ++k) {
    idx.push_back(pass.q[k].indices);
    fz.push_back(pass.z[k]);
    fe.push_back(pass.q[k].e);
  }
  auto loss = [&] { return frozen_objective(p, idx, fz, fe, LossWeights{}); };
  const auto fd_w = test::numeric_gradient(p.params.contexts.adapter_weight(), loss, 1e-6);
  const auto fd_b = test::numeric_gradient(p.params.contexts.adapter_bias(), loss, 1e-6);
  EXPECT_LT(test::relative_error(test::as_doubles(grads.contexts.adapter_weight()), fd_w), 1e-4);
  EXPECT_LT(test::relative_error(test::as_doubles(grads.contexts.adapter_bias()), fd_b), 1e-4);
}

TEST(LossTotal, StraightThroughIsExactIdentity) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const LogicalProblem p = make_logical_problem(seed);
    // Without the commitment term z receives exactly what e receives.
    LogicalGrads<double> g0;
    loss_total(p.params, "pinboard", p.in, LossWeights{1, 1, 0}, true, &g0);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(g0.grad_z[k], g0.grad_e[k]);

    // With it, the only addition is λ3 times the commitment gradient.
    LogicalGrads<double> g1;
    LogicalPass<double> pass;
    const LossWeights lambda{1, 1, 0.5};
    loss_total(p.params, "pinboard", p.in, lambda, true, &g1, &pass);
    for (std::size_t k = 0; k < 4; ++k) {
      const auto vq = vq_loss(pass.z[k], pass.q[k], p.params.codebooks[k]);
      DTensor expect = g1.grad_e[k];
      for (std::size_t i = 0; i < expect.size(); ++i) {
        expect[i] += static_cast<double>(lambda.vq * vq.grad_z[i]);
      }
      EXPECT_EQ(g1.grad_z[k], expect);
      // The commitment weight never leaks into the decoder-side gradient.
      EXPECT_EQ(g1.grad_e[k], g0.grad_e[k]);
    }
  }
}

TEST(LossTotal, ThetaSeesOnlyCommitmentWhenNotJoint) {
  const LogicalProblem p = make_logical_problem(2);
  LogicalGrads<double> grads;
  LogicalPass<double> pass;
  loss_total(p.params, "pinboard", p.in, LossWeights{}, false, &grads, &pass);
  for (std::size_t k = 0; k < 4; ++k) {
    const auto vq = vq_loss(pass.z[k], pass.q[k], p.params.codebooks[k]);
    EXPECT_EQ(grads.projectors[k], project_weight_grad(context_pool(p.in.features[k]), vq.grad_z));
  }
}

TEST(LossTotal, NamesNonFiniteInput) {
  LogicalProblem p = make_logical_problem(1);
  p.in.features[2][3] = std::nan("");
  try {
    loss_total(p.params, "pinboard", p.in, LossWeights{}, true, kNoGrads);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("f_E^3"), std::string::npos) << e.what();
  }
  p = make_logical_problem(1);
  p.in.image[0] = INFINITY;
  EXPECT_THROW(loss_total(p.params, "pinboard", p.in, LossWeights{}, true, kNoGrads), NumericError);
}

// --- the float model on real pinboard images ----------------------------------

LogicalConfig small_config() {
  LogicalConfig c;
  c.encoder = EncoderSpec{5};
  c.epochs = 3;
  c.seed = 5;
  return c;
}

std::vector<LogicalInputs<float>> pinboard_inputs(const LogicalModel& m, std::size_t n,
                                                  AnomalyKind kind = AnomalyKind::kNone) {
  std::vector<LogicalInputs<float>> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(prepare_inputs(m, render_pinboard(PinboardConfig{}, kind, 3, i).image));
  }
  return out;
}

TEST(TrainLogical, LossDecreasesAndEncoderStaysFrozen) {
  const LogicalConfig cfg = small_config();
  LogicalModel m = LogicalModel::init(cfg, "pinboard", ToyEncoder(cfg.encoder));
  const auto hash = m.encoder.weights_hash();
  const auto inputs = pinboard_inputs(m, 4);
  train_logical(m, inputs);
  ASSERT_EQ(m.loss_curve.size(), cfg.epochs + 1);
  EXPECT_LT(m.loss_curve.back().l_total, m.loss_curve.front().l_total);
  EXPECT_EQ(m.encoder.weights_hash(), hash);
  EXPECT_TRUE(m.trained);
}

TEST(TrainLogical, ZeroEpochsKeepsInitialization) {
  LogicalConfig cfg = small_config();
  cfg.epochs = 0;
  LogicalModel m = LogicalModel::init(cfg, "pinboard", ToyEncoder(cfg.encoder));
  const LogicalModel before = m;
  train_logical(m, pinboard_inputs(m, 2));
  const auto a = before.params.decoder.parameters();
  const auto b = std::as_const(m.params.decoder).parameters();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i], *b[i]);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(before.params.projectors[k].weight, m.params.projectors[k].weight);
  }
  EXPECT_EQ(before.params.contexts.resolve("pinboard"), m.params.contexts.resolve("pinboard"));
  EXPECT_THROW(train_logical(m, {}), InvalidArgument);
}

TEST(TrainLogical, DivergenceKeepsLastGoodModel) {
  LogicalConfig cfg = small_config();
  cfg.lr = 1e12;
  cfg.epochs = 4;
  LogicalModel m = LogicalModel::init(cfg, "pinboard", ToyEncoder(cfg.encoder));
  try {
    train_logical(m, pinboard_inputs(m, 2));
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    for (const auto* t : e.last_good().params.decoder.parameters()) EXPECT_TRUE(all_finite(*t));
  }
}

TEST(LogicalScore, SumOfUpsampledLevelMaps) {
  const LogicalConfig cfg = small_config();
  LogicalModel m = LogicalModel::init(cfg, "pinboard", ToyEncoder(cfg.encoder));
  const auto inputs = pinboard_inputs(m, 2);
  EXPECT_THROW(logical_score(m, inputs[0], 64, 64), InvalidState);
  train_logical(m, inputs);

  const LogicalScore s = logical_score(m, inputs[1], 64, 64);
  ASSERT_EQ(s.level_maps.size(), 4u);
  std::vector<double> sum(64 * 64, 0.0);
  for (const auto& lm : s.level_maps) {
    const Tensor up = bilinear_upsample(lm, 64, 64);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += up[i];
  }
  for (std::size_t i = 0; i < sum.size(); ++i) {
    EXPECT_NEAR(s.a_log.values()[i], sum[i], 1e-5);
    EXPECT_GE(s.a_log.values()[i], 0.0f);
    EXPECT_LE(s.a_log.values()[i], 8.0f);
  }
}

TEST(LogicalScore, ContextIsConstantAcrossImages) {
  const LogicalConfig cfg = small_config();
  LogicalModel m = LogicalModel::init(cfg, "pinboard", ToyEncoder(cfg.encoder));
  train_logical(m, pinboard_inputs(m, 2));
  const auto normal = pinboard_inputs(m, 1);
  const auto odd = pinboard_inputs(m, 1, AnomalyKind::kLogical);
  LogicalPass<float> a, b;
  loss_total(m.params, m.category, normal[0], m.config.lambda, true, kNoGradsF, &a);
  loss_total(m.params, m.category, odd[0], m.config.lambda, true, kNoGradsF, &b);
  EXPECT_EQ(a.g, b.g);
}

TEST(LogicalModel, SaveLoadReproducesScores) {
  test::TempDir dir("logical");
  const LogicalConfig cfg = small_config();
  LogicalModel m = LogicalModel::init(cfg, "pinboard", ToyEncoder(cfg.encoder));
  const auto inputs = pinboard_inputs(m, 2);
  EXPECT_THROW(m.save(dir / "untrained"), InvalidState);
  train_logical(m, inputs);
  m.save(dir / "model");
  const LogicalModel back = LogicalModel::load(dir / "model");
  EXPECT_EQ(back.category, m.category);
  EXPECT_EQ(back.encoder.weights_hash(), m.encoder.weights_hash());
  const auto again = prepare_inputs(back, render_pinboard(PinboardConfig{}, AnomalyKind::kNone, 3, 1).image);
  const ScoreMap a = logical_score(m, inputs[1], 32, 32).a_log;
  const ScoreMap b = logical_score(back, again, 32, 32).a_log;
  EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  EXPECT_THROW(LogicalModel::load(dir / "absent"), IoError);
}

}  // namespace
}  // namespace afe
