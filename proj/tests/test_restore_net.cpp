#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "far/restore_net.hpp"
#include "support.hpp"

using namespace far;
using test::central_diff;
using test::random_tensor;
using test::rel_err;

namespace {

ModelConfig small_config(Parameterization p, int scales = 1) {
  ModelConfig mc;
  mc.channels = 4;
  mc.kernel_size = 3;
  mc.scales = scales;
  mc.parameterization = p;
  return mc;
}

double weighted_sum(const Tensor& t, const Tensor& w) {
  double s = 0.0;
  for (std::int64_t i = 0; i < t.size(); ++i)
    s += t.data()[i] * w.data()[i];
  return s;
}

}  // namespace

TEST_CASE("init is deterministic and projection-related across parameterizations") {
  ModelConfig far_cfg = small_config(Parameterization::Far);
  ModelConfig van_cfg = small_config(Parameterization::Vanilla);

  ModelState a = init_model(far_cfg, 99);
  ModelState b = init_model(far_cfg, 99);
  for (std::size_t li = 0; li < a.layers.size(); ++li) {
    for (std::int64_t i = 0; i < a.layers[li].weights.size(); ++i) {
      CHECK(a.layers[li].weights.data()[i] == b.layers[li].weights.data()[i]);
    }
  }

  ModelState v = init_model(van_cfg, 99);
  std::vector<Tensor> ka = a.spatial_kernels();
  std::vector<Tensor> kv = v.spatial_kernels();
  for (std::size_t li = 0; li < ka.size(); ++li) {
    for (std::int64_t i = 0; i < ka[li].size(); ++i) {
      CHECK(std::fabs(ka[li].data()[i] - kv[li].data()[i]) < 1e-12);
    }
  }
}

TEST_CASE("parameter count matches the closed-form total") {
  ModelConfig mc;
  mc.channels = 16;
  mc.kernel_size = 3;
  mc.scales = 3;
  mc.parameterization = Parameterization::Far;
  ModelState st = init_model(mc, 1);
  // 3*16*9 + 16 + 16*16*9 + 16 + 16*3*9 + 3
  const std::int64_t expect =
      3 * 16 * 9 + 16 + 16 * 16 * 9 + 16 + 16 * 3 * 9 + 3;
  CHECK(st.parameter_count() == expect);
  CHECK(expect == 3203);
}

TEST_CASE("zero weights give restored == clamped decoded") {
  ModelConfig mc = small_config(Parameterization::Vanilla, 3);
  ModelState st = init_model(mc, 5);
  for (LayerState& l : st.layers) {
    l.weights = Tensor(l.weights.shape());
    l.bias = Tensor(l.bias.shape());
  }
  Rng rng(31);
  Tensor decoded = random_tensor({1, 3, 8, 8}, rng, 0.0, 1.0);
  Tensor restored = forward(st, decoded);
  for (std::int64_t i = 0; i < decoded.size(); ++i) {
    CHECK(restored.data()[i] == decoded.data()[i]);
  }
}

TEST_CASE("single-scale forward equals a hand-composed pipeline") {
  ModelConfig mc = small_config(Parameterization::Vanilla, 1);
  ModelState st = init_model(mc, 6);
  Rng rng(32);
  Tensor decoded = random_tensor({1, 3, 6, 6}, rng, 0.0, 1.0);

  Tensor restored = forward(st, decoded);

  std::vector<Tensor> ks = st.spatial_kernels();
  auto bias_span = [](const LayerState& l) {
    return std::span<const double>(l.bias.data(), std::size_t(l.bias.size()));
  };
  Tensor x = conv2d_forward(decoded, ks[0], bias_span(st.layers[0]));
  x = relu(instance_norm_forward(x, mc.norm_epsilon).first);
  x = conv2d_forward(x, ks[1], bias_span(st.layers[1]));
  x = relu(instance_norm_forward(x, mc.norm_epsilon).first);
  x = conv2d_forward(x, ks[2], bias_span(st.layers[2]));
  for (std::int64_t i = 0; i < x.size(); ++i) {
    const double want = std::clamp(x.data()[i] + decoded.data()[i], 0.0, 1.0);
    CHECK(std::fabs(restored.data()[i] - want) < 1e-12);
  }
}

TEST_CASE("far and vanilla produce identical outputs at projected init") {
  Rng rng(33);
  Tensor decoded = random_tensor({1, 3, 8, 8}, rng, 0.0, 1.0);
  for (int scales : {1, 2, 3}) {
    ModelState f = init_model(small_config(Parameterization::Far, scales), 77);
    ModelState v =
        init_model(small_config(Parameterization::Vanilla, scales), 77);
    Tensor a = forward(f, decoded);
    Tensor b = forward(v, decoded);
    for (std::int64_t i = 0; i < a.size(); ++i) {
      CHECK(std::fabs(a.data()[i] - b.data()[i]) < 1e-12);
    }
  }
}

TEST_CASE("forward output stays within [0, 1] and keeps the shape") {
  Rng rng(34);
  ModelState st = init_model(small_config(Parameterization::Far, 2), 3);
  Tensor decoded = random_tensor({1, 3, 12, 8}, rng, 0.0, 1.0);
  Tensor restored = forward(st, decoded);
  CHECK(restored.same_shape(decoded));
  for (std::int64_t i = 0; i < restored.size(); ++i) {
    CHECK(restored.data()[i] >= 0.0);
    CHECK(restored.data()[i] <= 1.0);
  }
}

TEST_CASE("forward rejects indivisible spatial sizes with a padding hint") {
  ModelState st = init_model(small_config(Parameterization::Far, 3), 3);
  Tensor decoded({1, 3, 10, 12});
  try {
    forward(st, decoded);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("pad") != std::string::npos);
  }
}

TEST_CASE("backward zero cotangent gives zero parameter gradients") {
  Rng rng(35);
  ModelState st = init_model(small_config(Parameterization::Far, 2), 4);
  Tensor decoded = random_tensor({1, 3, 8, 8}, rng, 0.0, 1.0);
  ForwardCache cache;
  forward(st, decoded, &cache);
  std::vector<LayerGrads> grads =
      backward(st, cache, Tensor(cache.pre_clamp.shape()));
  for (const LayerGrads& g : grads) {
    CHECK(g.weights.max_abs() == 0.0);
    CHECK(g.bias.max_abs() == 0.0);
  }
}

TEST_CASE("backward matches finite differences on every parameter") {
  Rng rng(36);
  for (Parameterization p :
       {Parameterization::Far, Parameterization::Vanilla}) {
    ModelConfig mc = small_config(p, 1);
    mc.channels = 3;
    ModelState st = init_model(mc, 11);
    Tensor decoded = random_tensor({1, 3, 6, 6}, rng, 0.25, 0.75);
    Tensor cot = random_tensor({1, 3, 6, 6}, rng);

    ForwardCache cache;
    forward(st, decoded, &cache);
    std::vector<LayerGrads> grads = backward(st, cache, cot);

    for (std::size_t li = 0; li < st.layers.size(); ++li) {
      auto loss_w = [&](const Tensor& w) {
        ModelState probe = st;
        probe.layers[li].weights = w;
        return weighted_sum(forward(probe, decoded), cot);
      };
      const Tensor& w = st.layers[li].weights;
      for (std::int64_t i = 0; i < w.size(); i += 3) {
        const double fd = central_diff(loss_w, w, i);
        CHECK(rel_err(grads[li].weights.data()[i], fd) < 1e-4);
      }
      auto loss_b = [&](const Tensor& b) {
        ModelState probe = st;
        probe.layers[li].bias = b;
        return weighted_sum(forward(probe, decoded), cot);
      };
      const Tensor& b = st.layers[li].bias;
      for (std::int64_t i = 0; i < b.size(); ++i) {
        const double fd = central_diff(loss_b, b, i);
        CHECK(rel_err(grads[li].bias.data()[i], fd) < 1e-4);
      }
    }
  }
}

TEST_CASE("shared-bulk gradient equals the sum over scales") {
  Rng rng(37);
  ModelConfig mc = small_config(Parameterization::Vanilla, 3);
  ModelState st = init_model(mc, 21);
  Tensor decoded = random_tensor({1, 3, 8, 8}, rng, 0.3, 0.7);
  Tensor cot = random_tensor({1, 3, 8, 8}, rng);

  ForwardCache cache;
  forward(st, decoded, &cache);
  std::vector<LayerGrads> grads = backward(st, cache, cot);

  // Sharing disabled: run each scale as its own single-scale model on the
  // downsampled input, upsample the cotangent path manually by linearity.
  std::vector<Tensor> acc;
  for (const LayerState& l : st.layers) acc.emplace_back(l.weights.shape());

  Tensor scaled = decoded;
  for (int s = 0; s < 3; ++s) {
    if (s > 0) scaled = resample(scaled, ResampleMode::Down2);
    ModelConfig one = mc;
    one.scales = 1;
    one.predict_residual = false;
    ModelState sub = st;
    sub.config = one;

    // Cotangent for this branch: backward through clamp and 1/scales, then
    // through the up2 chain.
    Tensor g(cot.shape());
    for (std::int64_t i = 0; i < g.size(); ++i) {
      const double pre = cache.pre_clamp.data()[i];
      g.data()[i] =
          (pre >= 0.0 && pre <= 1.0) ? cot.data()[i] / 3.0 : 0.0;
    }
    for (int u = s - 1; u >= 0; --u) {
      Shape before{1, 3, scaled.h() << u, scaled.w() << u};
      g = resample_backward(g, ResampleMode::Up2, before);
    }

    ForwardCache sub_cache;
    forward(sub, scaled, &sub_cache);
    // Neutralize the sub-model clamp mask; the branch cotangent g already
    // went through the full model's clamp.
    sub_cache.pre_clamp = Tensor::full(sub_cache.pre_clamp.shape(), 0.5);
    std::vector<LayerGrads> sub_grads = backward(sub, sub_cache, g);
    for (std::size_t li = 0; li < acc.size(); ++li) {
      for (std::int64_t i = 0; i < acc[li].size(); ++i) {
        acc[li].data()[i] += sub_grads[li].weights.data()[i];
      }
    }
  }
  for (std::size_t li = 0; li < acc.size(); ++li) {
    for (std::int64_t i = 0; i < acc[li].size(); ++i) {
      CHECK(std::fabs(acc[li].data()[i] - grads[li].weights.data()[i]) <
            1e-10);
    }
  }
}
