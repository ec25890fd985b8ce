#include <doctest.h>

#include <cmath>

#include "metasched/common/stats.hpp"
#include "metasched/metalearn/metrics.hpp"
#include "metasched/taskgen/generate.hpp"

using namespace metasched;
using metalearn::AdaptedModel;
using metalearn::ArchSpec;
using metalearn::MetaModel;
using numkit::ParamSet;
using numkit::Tensor;
using taskgen::TaskInstance;
using taskgen::TaskKind;

namespace {

MetaModel small_regression_model(std::uint64_t seed = 1, std::vector<int> hidden = {8, 8}) {
  ArchSpec arch;
  arch.kind = TaskKind::regression;
  arch.input_dim = 1;
  arch.hidden = std::move(hidden);
  arch.output_dim = 1;
  Rng rng(seed);
  return MetaModel::init(arch, rng);
}

TaskInstance sinusoid(std::uint64_t seed) {
  Rng rng(seed);
  return taskgen::gen_sinusoid_task(rng, {});
}

// A task whose labels equal the model's own predictions: zero loss, zero
// gradients.
TaskInstance self_labeled(const MetaModel& model, std::uint64_t seed) {
  TaskInstance t = sinusoid(seed);
  t.support_y = metalearn::model_forward(model, t.support_x);
  t.query_y = metalearn::model_forward(model, t.query_x);
  return t;
}

}  // namespace

TEST_CASE("adaptation moves the head only") {
  const MetaModel model = small_regression_model();
  const TaskInstance t = sinusoid(3);
  const std::vector<double> body_before = model.body.flatten().vec();
  const AdaptedModel adapted = metalearn::adapt(model, t.support_x, t.support_y, 5, 0.01);
  CHECK(adapted.steps_taken == 5);
  CHECK(model.body.flatten().vec() == body_before);
  CHECK(adapted.adapted_head.flatten().vec() != model.head.flatten().vec());
  CHECK_THROWS_AS(
      static_cast<void>(metalearn::adapt(model, t.support_x, t.support_y, 0, 0.01)),
      UsageError);
}

TEST_CASE("perfectly fit support is a fixed point of adaptation") {
  const MetaModel model = small_regression_model(7);
  const TaskInstance t = self_labeled(model, 11);
  const AdaptedModel adapted = metalearn::adapt(model, t.support_x, t.support_y, 3, 0.01);
  CHECK(adapted.adapted_head.flatten().vec() == model.head.flatten().vec());
  CHECK(metalearn::query_loss(adapted, t.query_x, t.query_y) == 0.0);
}

TEST_CASE("one-step adaptation matches the hand closed form") {
  const MetaModel model = small_regression_model(5);
  const TaskInstance t = sinusoid(13);
  const double alpha = 0.01;
  const AdaptedModel adapted = metalearn::adapt(model, t.support_x, t.support_y, 1, alpha);

  const Tensor z = metalearn::body_forward(model.arch, model.body, t.support_x);
  const int m = z.rows();
  const int d = z.cols();
  const Tensor& w = model.head.get("head.W");
  const double b = model.head.get("head.b")[0];
  std::vector<double> r(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    double p = b;
    for (int j = 0; j < d; ++j) p += w[j] * z.at(i, j);
    r[static_cast<std::size_t>(i)] = p - t.support_y[i];
  }
  for (int j = 0; j < d; ++j) {
    double g = 0.0;
    for (int i = 0; i < m; ++i) g += z.at(i, j) * r[static_cast<std::size_t>(i)];
    const double expect = w[j] - alpha * 2.0 / m * g;
    CHECK(adapted.adapted_head.get("head.W")[j] ==
          doctest::Approx(expect).epsilon(1e-12));
  }
  double gb = 0.0;
  for (int i = 0; i < m; ++i) gb += r[static_cast<std::size_t>(i)];
  CHECK(adapted.adapted_head.get("head.b")[0] ==
        doctest::Approx(b - alpha * 2.0 / m * gb).epsilon(1e-12));
}

TEST_CASE("divergent adaptation raises AdaptError with a step index") {
  const MetaModel model = small_regression_model(9);
  const TaskInstance t = sinusoid(17);
  try {
    static_cast<void>(metalearn::adapt(model, t.support_x, t.support_y, 50, 1e14));
    FAIL("expected AdaptError");
  } catch (const AdaptError& e) {
    CHECK(e.step >= 0);
    CHECK(e.step < 50);
  }
}

TEST_CASE("query loss of uniform logits is ln(n_way)") {
  ArchSpec arch;
  arch.kind = TaskKind::classification;
  arch.input_dim = 2;
  arch.hidden = {8};
  arch.output_dim = 5;
  Rng rng(2);
  MetaModel model = MetaModel::init(arch, rng);
  model.head.set("head.W", Tensor({5, 8}));
  model.head.set("head.b", Tensor({5}));
  AdaptedModel adapted;
  adapted.base = &model;
  adapted.adapted_head = model.head;

  taskgen::BlobSpec spec;
  std::vector<int> allowed{0, 1, 2, 3, 4};
  Rng trng(4);
  const TaskInstance t = taskgen::gen_blob_classification_task(trng, spec, allowed);
  CHECK(metalearn::query_loss(adapted, t.query_x, t.query_y) ==
        doctest::Approx(std::log(5.0)).epsilon(1e-12));
}

TEST_CASE("query loss matches an independent straight-line computation") {
  const MetaModel model = small_regression_model(21, {4});
  const TaskInstance t = sinusoid(23);
  const AdaptedModel adapted = metalearn::adapt(model, t.support_x, t.support_y, 2, 0.01);
  const double got = metalearn::query_loss(adapted, t.query_x, t.query_y);

  // Straight-line recomputation from raw parameter values.
  const Tensor& w0 = model.body.get("body.0.W");
  const Tensor& b0 = model.body.get("body.0.b");
  const Tensor& hw = adapted.adapted_head.get("head.W");
  const double hb = adapted.adapted_head.get("head.b")[0];
  double loss = 0.0;
  for (int i = 0; i < t.query_x.rows(); ++i) {
    double pred = hb;
    for (int o = 0; o < 4; ++o) {
      double s = b0[o] + w0[o] * t.query_x.at(i, 0);
      s = s > 0.0 ? s : 0.01 * s;
      pred += hw[o] * s;
    }
    const double d = pred - t.query_y[i];
    loss += d * d;
  }
  loss /= t.query_x.rows();
  CHECK(std::fabs(got - loss) <= 1e-12 * std::max(1.0, std::fabs(loss)));
}

TEST_CASE("gradient similarity endpoints") {
  const MetaModel model = small_regression_model(31);
  TaskInstance t = sinusoid(37);

  SUBCASE("query equal to support gives cosine one") {
    t.query_x = t.support_x;
    t.query_y = t.support_y;
    const auto st = metalearn::grad_similarity(model, t, metalearn::SimMode::cosine);
    CHECK(st.cosine == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(st.inner_product ==
          doctest::Approx(st.support_norm * st.query_norm).epsilon(1e-12));
  }

  SUBCASE("mirrored residuals give opposite gradients") {
    const Tensor pred_s = metalearn::model_forward(model, t.support_x);
    const Tensor pred_q = pred_s;
    t.query_x = t.support_x;
    Tensor ys(pred_s.shape()), yq(pred_s.shape());
    for (int i = 0; i < pred_s.numel(); ++i) {
      ys[i] = pred_s[i] + 1.0;
      yq[i] = pred_q[i] - 1.0;
    }
    t.support_y = ys;
    t.query_y = yq;
    const auto st = metalearn::grad_similarity(model, t, metalearn::SimMode::cosine);
    CHECK(st.cosine == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(st.inner_product ==
          doctest::Approx(-st.support_norm * st.support_norm).epsilon(1e-10));
  }

  SUBCASE("zero-norm gradients are degenerate with cosine zero") {
    const TaskInstance fit = self_labeled(model, 41);
    const auto st = metalearn::grad_similarity(model, fit, metalearn::SimMode::cosine);
    CHECK(st.degenerate);
    CHECK(st.cosine == 0.0);
  }

  SUBCASE("swap symmetry of the inner product") {
    const auto st = metalearn::grad_similarity(model, t, metalearn::SimMode::inner_product);
    TaskInstance swapped = t;
    std::swap(swapped.support_x, swapped.query_x);
    std::swap(swapped.support_y, swapped.query_y);
    const auto st2 =
        metalearn::grad_similarity(model, swapped, metalearn::SimMode::inner_product);
    CHECK(st.inner_product == doctest::Approx(st2.inner_product).epsilon(1e-12));
  }
}

TEST_CASE("inner product of gradients matches a finite-difference oracle") {
  const MetaModel model = small_regression_model(43, {4});
  const TaskInstance t = sinusoid(47);
  const auto st = metalearn::grad_similarity(model, t, metalearn::SimMode::inner_product);

  const ParamSet joined = model.joined();
  auto loss_at = [&](const ParamSet& ps, const Tensor& x, const Tensor& y) {
    MetaModel m;
    m.arch = model.arch;
    for (const auto& [name, tv] : ps) {
      if (name.starts_with("head"))
        m.head.set(name, tv);
      else
        m.body.set(name, tv);
    }
    return metalearn::loss_value(m.arch.kind, metalearn::model_forward(m, x), y);
  };
  const double step = 1e-6;
  double dot = 0.0;
  for (const auto& [name, tv] : joined) {
    for (int i = 0; i < tv.numel(); ++i) {
      ParamSet hi = joined, lo = joined;
      Tensor th = tv, tl = tv;
      th[i] += step;
      tl[i] -= step;
      hi.set(name, th);
      lo.set(name, tl);
      const double gs =
          (loss_at(hi, t.support_x, t.support_y) - loss_at(lo, t.support_x, t.support_y)) /
          (2 * step);
      const double gq =
          (loss_at(hi, t.query_x, t.query_y) - loss_at(lo, t.query_x, t.query_y)) /
          (2 * step);
      dot += gs * gq;
    }
  }
  CHECK(std::fabs(st.inner_product - dot) <=
        1e-6 * std::max(std::fabs(dot), std::fabs(st.inner_product)));
}

TEST_CASE("outer update over identical tasks equals the single-task update") {
  const MetaModel model = small_regression_model(53);
  const TaskInstance t = sinusoid(59);
  const std::vector<TaskInstance> twice{t, t};
  const std::vector<TaskInstance> once{t};
  const MetaModel a = metalearn::outer_update(model, twice, 0.01, 0.001, 5);
  const MetaModel b = metalearn::outer_update(model, once, 0.01, 0.001, 5);
  CHECK(a.joined().flatten().vec() == b.joined().flatten().vec());
}

TEST_CASE("small outer steps decrease the batch mean adapted query loss") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const MetaModel model = small_regression_model(seed, {16, 16});
    Rng rng(seed * 100 + 7);
    std::vector<TaskInstance> batch;
    for (int i = 0; i < 4; ++i) batch.push_back(taskgen::gen_sinusoid_task(rng, {}));
    const double before = metalearn::batch_adapted_query_loss(model, batch, 0.01, 5);
    const MetaModel next = metalearn::outer_update(model, batch, 0.01, 1e-4, 5);
    const double after = metalearn::batch_adapted_query_loss(next, batch, 0.01, 5);
    CHECK_MESSAGE(after < before, "seed ", seed);
  }
}

TEST_CASE("temporal copy semantics: beta zero leaves the model unchanged") {
  const MetaModel model = small_regression_model(61);
  const TaskInstance t = sinusoid(67);
  const std::vector<TaskInstance> batch{t};
  const MetaModel out = metalearn::outer_update(model, batch, 0.01, 0.0, 5);
  CHECK(out.joined().flatten().vec() == model.joined().flatten().vec());
}

TEST_CASE("exact one-step head meta-gradient matches finite differences") {
  const MetaModel model = small_regression_model(71, {6});
  const TaskInstance t = sinusoid(73);
  const double alpha = 0.05;
  const ParamSet exact = metalearn::exact_head_meta_gradient(model, t, alpha);

  auto pipeline = [&](const ParamSet& head) {
    MetaModel m = model;
    m.head = head;
    const AdaptedModel a = metalearn::adapt(m, t.support_x, t.support_y, 1, alpha);
    return metalearn::query_loss(a, t.query_x, t.query_y);
  };
  const double step = 1e-6;
  for (const auto& [name, tv] : model.head) {
    for (int i = 0; i < tv.numel(); ++i) {
      ParamSet hi = model.head, lo = model.head;
      Tensor th = tv, tl = tv;
      th[i] += step;
      tl[i] -= step;
      hi.set(name, th);
      lo.set(name, tl);
      const double fd = (pipeline(hi) - pipeline(lo)) / (2 * step);
      CHECK(std::fabs(exact.get(name)[i] - fd) <=
            1e-5 * std::max(1.0, std::fabs(fd)));
    }
  }
}

TEST_CASE("r squared properties") {
  CHECK(metalearn::r_squared(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) ==
        doctest::Approx(1.0).epsilon(1e-12));

  // Affine transforms with positive slope leave it unchanged.
  Rng rng(79);
  std::vector<double> preds(50), labels(50), scaled(50);
  for (int i = 0; i < 50; ++i) {
    preds[static_cast<std::size_t>(i)] = rng.uniform(-1, 1);
    labels[static_cast<std::size_t>(i)] = rng.uniform(-1, 1);
    scaled[static_cast<std::size_t>(i)] = 3.7 * preds[static_cast<std::size_t>(i)] + 0.4;
  }
  CHECK(std::fabs(metalearn::r_squared(preds, labels) -
                  metalearn::r_squared(scaled, labels)) <= 1e-10);

  // Independent predictions score near zero.
  std::vector<double> a(1000), b(1000);
  for (int i = 0; i < 1000; ++i) {
    a[static_cast<std::size_t>(i)] = rng.normal();
    b[static_cast<std::size_t>(i)] = rng.normal();
  }
  CHECK(metalearn::r_squared(a, b) <= 0.05);

  // Degenerate inputs are defined as zero.
  CHECK(metalearn::r_squared(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3}) ==
        0.0);
}

TEST_CASE("evaluate aggregates regression metrics") {
  const MetaModel model = small_regression_model(83);
  std::vector<TaskInstance> tasks;
  for (std::uint64_t s = 0; s < 10; ++s) tasks.push_back(self_labeled(model, 200 + s));
  const metalearn::Metrics m = metalearn::evaluate(model, tasks, 3, 0.01);
  CHECK(m.kind == TaskKind::regression);
  CHECK(m.n_tasks == 10);
  CHECK(m.mean_query_loss == 0.0);
  CHECK(m.r2_mean == doctest::Approx(1.0));
  CHECK(m.r2_median == doctest::Approx(1.0));
  CHECK(m.r2_above == 10);
}
