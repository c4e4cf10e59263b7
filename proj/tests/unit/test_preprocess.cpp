#include <doctest.h>

#include <cmath>
#include <random>

#include "wellsim/preprocess.hpp"

using namespace wellsim;

namespace {

FeatureDef def(std::string name, FeatureKind k, std::vector<std::string> cats = {}) {
  FeatureDef f;
  f.name = std::move(name);
  f.kind = k;
  f.categories = std::move(cats);
  if (k == FeatureKind::ordinal) f.max_level = 10;
  return f;
}

// One-feature-per-column population from columns of optional values.
Population make_pop(std::vector<FeatureDef> defs, const std::vector<std::vector<std::optional<double>>>& cols) {
  Population p;
  p.schema = FeatureSchema(std::move(defs), "test");
  const std::size_t n = cols.front().size();
  for (std::size_t i = 0; i < n; ++i) {
    AgentRecord a;
    a.agent_id = static_cast<std::int64_t>(i + 1);
    for (const auto& c : cols) a.raw.push_back(c[i]);
    p.agents.push_back(a);
  }
  return p;
}

std::vector<std::optional<double>> col(std::initializer_list<double> v) {
  return {v.begin(), v.end()};
}

}  // namespace

TEST_SUITE("preprocess") {
  TEST_CASE("type-7 quantiles against hand values") {
    // positions (n-1)q: 0.25 -> 1.0, 0.75 -> 3.0 for five points
    CHECK(quantile({1, 2, 3, 4, 100}, 0.25) == doctest::Approx(2.0));
    CHECK(quantile({1, 2, 3, 4, 100}, 0.75) == doctest::Approx(4.0));
    // four points: (n-1)*0.25 = 0.75 -> 1 + 0.75*(2-1)
    CHECK(quantile({4, 1, 3, 2}, 0.25) == doctest::Approx(1.75));
    CHECK(quantile({7}, 0.9) == 7.0);
  }

  TEST_CASE("median imputation leaves observed values alone") {
    const auto pop = make_pop({def("x", FeatureKind::continuous)}, {{1.0, 2.0, std::nullopt, 4.0}});
    const auto dm = fit_transform(pop);
    CHECK(dm.transform.features[0].median == 2.0);
    const double mean = (1 + 2 + 2 + 4) / 4.0;
    const double sd = std::sqrt(((1 - mean) * (1 - mean) + 2 * (2 - mean) * (2 - mean) + (4 - mean) * (4 - mean)) / 4.0);
    CHECK(dm.rows(0, 0) == doctest::Approx((1 - mean) / sd).epsilon(1e-12));
    CHECK(dm.rows(2, 0) == doctest::Approx((2 - mean) / sd).epsilon(1e-12));
  }

  TEST_CASE("standardising [2, 4, 6]") {
    const auto dm = fit_transform(make_pop({def("x", FeatureKind::continuous)}, {col({2, 4, 6})}));
    const double z = 2.0 / std::sqrt(8.0 / 3.0);
    CHECK(dm.rows(0, 0) == doctest::Approx(-z).epsilon(1e-12));
    CHECK(dm.rows(1, 0) == doctest::Approx(0.0));
    CHECK(dm.rows(2, 0) == doctest::Approx(z).epsilon(1e-12));
    CHECK(z == doctest::Approx(1.2247).epsilon(1e-4));
  }

  TEST_CASE("apply with mean 4 and stddev 1.633") {
    TransformParams p;
    FeatureTransform t;
    t.name = "x";
    t.mean = 4.0;
    t.stddev = 1.633;
    p.features.push_back(t);
    p.columns = {"x"};
    p.column_feature = {0};
    const auto pop = make_pop({def("x", FeatureKind::continuous)}, {col({6})});
    const auto dm = apply(p, pop);
    CHECK(dm.rows(0, 0) == doctest::Approx(1.2247).epsilon(1e-4));
  }

  TEST_CASE("outlier is flagged and kept") {
    const auto dm = fit_transform(make_pop({def("x", FeatureKind::continuous)}, {col({1, 2, 3, 4, 100})}));
    CHECK(dm.flags(4, 0));
    for (int i = 0; i < 4; ++i) CHECK_FALSE(dm.flags(i, 0));
    CHECK(dm.n() == 5);
  }

  TEST_CASE("IQR flags are invariant under positive affine rescaling") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<std::optional<double>> a, b;
      const double scale = 0.1 + rep, shift = -5.0 + rep;
      for (int i = 0; i < 60; ++i) {
        double v = nd(rng);
        if (i % 17 == 0) v *= 8.0;
        a.push_back(v);
        b.push_back(scale * v + shift);
      }
      const auto fa = fit_transform(make_pop({def("x", FeatureKind::continuous)}, {a}));
      const auto fb = fit_transform(make_pop({def("x", FeatureKind::continuous)}, {b}));
      CHECK((fa.flags == fb.flags).all());
    }
  }

  TEST_CASE("standardised columns have mean 0 and sd 1 to 1e-9") {
    const auto pop = synthesize_population(561, 7);
    const auto dm = fit_transform(pop);
    for (Eigen::Index c = 0; c < dm.p(); ++c) {
      const auto& t = dm.transform.features[static_cast<std::size_t>(dm.column_feature[static_cast<std::size_t>(c)])];
      if (!t.standardized() || t.stddev == 0.0) continue;
      const double m = dm.rows.col(c).mean();
      const double sd = std::sqrt((dm.rows.col(c).array() - m).square().mean());
      CHECK(std::abs(m) < 1e-9);
      CHECK(std::abs(sd - 1.0) < 1e-9);
    }
    CHECK(dm.rows.allFinite());
  }

  TEST_CASE("one-hot blocks sum to one per row") {
    const auto pop = synthesize_population(300, 4);
    const auto dm = fit_transform(pop);
    int blocks = 0;
    for (std::size_t f = 0; f < dm.transform.features.size(); ++f) {
      const auto& t = dm.transform.features[f];
      if (t.kind != FeatureKind::categorical) continue;
      ++blocks;
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(dm.n());
      int width = 0;
      for (std::size_t c = 0; c < dm.column_feature.size(); ++c)
        if (dm.column_feature[c] == static_cast<int>(f)) {
          sum += dm.rows.col(static_cast<Eigen::Index>(c));
          ++width;
        }
      CHECK(width == static_cast<int>(t.categories.size()));
      CHECK((sum.array() == 1.0).all());
    }
    CHECK(blocks == 8);
  }

  TEST_CASE("unseen category gives a zero block and a warning") {
    const std::vector<std::string> cats{"a", "b", "c"};
    const auto train = make_pop({def("c", FeatureKind::categorical, cats)}, {col({0, 1, 0, 1})});
    const auto dm = fit_transform(train);
    // the scoring-time schema knows a fourth category the fit never saw
    const FeatureSchema wider({def("c", FeatureKind::categorical, {"a", "b", "c", "d"})}, "wider");
    AgentRecord a;
    a.raw = {3.0};
    std::vector<std::string> warnings;
    const auto row = apply_row(dm.transform, wider, a, &warnings);
    CHECK(row.size() == 3);
    CHECK(row.sum() == 0.0);
    CHECK(warnings.size() == 1);
  }

  TEST_CASE(">30% missing column is dropped, >10% warns") {
    std::vector<std::optional<double>> heavy, light, ok;
    for (int i = 0; i < 20; ++i) {
      heavy.push_back(i < 7 ? std::nullopt : std::optional<double>(i));
      light.push_back(i < 3 ? std::nullopt : std::optional<double>(i));
      ok.push_back(i);
    }
    const auto pop = make_pop({def("heavy", FeatureKind::continuous), def("light", FeatureKind::continuous),
                               def("ok", FeatureKind::continuous)},
                              {heavy, light, ok});
    const auto dm = fit_transform(pop);
    CHECK(dm.transform.dropped == std::vector<std::string>{"heavy"});
    CHECK(dm.columns == std::vector<std::string>{"light", "ok"});
    CHECK(dm.warnings.size() >= 2);
  }

  TEST_CASE("binary imputed by mode, categorical ties to the smallest index") {
    const auto pop = make_pop({def("b", FeatureKind::binary), def("c", FeatureKind::categorical, {"x", "y", "z"})},
                              {{1.0, 1.0, 0.0, std::nullopt}, {2.0, 1.0, std::nullopt, 0.0}});
    const auto dm = fit_transform(pop);
    CHECK(dm.rows(3, 0) == 1.0);
    CHECK(dm.rows(2, 1) == 1.0);  // c=x
    CHECK(dm.columns[1] == "c=x");
  }

  TEST_CASE("zero variance column maps to zeros with a warning") {
    const auto dm = fit_transform(make_pop({def("k", FeatureKind::continuous)}, {col({3, 3, 3})}));
    CHECK((dm.rows.array() == 0.0).all());
    CHECK_FALSE(dm.warnings.empty());
  }

  TEST_CASE("apply on the fitting set equals fit_transform, and is deterministic") {
    const auto pop = synthesize_population(120, 8);
    const auto a = fit_transform(pop);
    const auto b = apply(a.transform, pop);
    CHECK(a.rows == b.rows);
    CHECK(fit_transform(pop).rows == a.rows);
    const auto back = TransformParams::from_json(a.transform.to_json());
    CHECK(apply(back, pop).rows == a.rows);
  }
}
