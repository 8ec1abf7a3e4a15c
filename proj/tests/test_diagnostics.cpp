#include <doctest.h>

#include <cmath>
#include <numbers>

#include "gtid/diagnostics.hpp"
#include "gtid/error.hpp"
#include "gtid/random.hpp"

using namespace gtid;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

double trapezoid(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  double area = 0.0;
  for (Index i = 1; i < x.size(); ++i) area += 0.5 * (x(i) - x(i - 1)) * (y(i) + y(i - 1));
  return area;
}

} // namespace

TEST_CASE("summary statistics") {
  const auto s = summary_stats(vec({1, 2, 3}));
  CHECK(s.median == 2.0);
  CHECK(s.mean == 2.0);
  CHECK(*s.sd == 1.0);
  const auto c = summary_stats(vec({4, 4, 4, 4}));
  CHECK(*c.sd == 0.0);
  CHECK(c.median == 4.0);
  CHECK(c.mean == 4.0);
  CHECK(summary_stats(vec({1, 2, 3, 4})).median == 2.5);
  CHECK_FALSE(summary_stats(vec({7})).sd.has_value());
  CHECK_THROWS_AS(summary_stats(Eigen::VectorXd(0)), InputError);
}

TEST_CASE("shifting data shifts location and keeps spread") {
  Rng rng(1);
  Eigen::VectorXd x(31);
  for (Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
  const Eigen::VectorXd y = x.array() + 12.5;
  const auto a = summary_stats(x), b = summary_stats(y);
  CHECK(std::abs(b.median - a.median - 12.5) < 1e-12);
  CHECK(std::abs(b.mean - a.mean - 12.5) < 1e-12);
  CHECK(std::abs(*b.sd - *a.sd) < 1e-12);
}

TEST_CASE("ECDF steps") {
  const auto one = ecdf(vec({5}));
  REQUIRE(one.size() == 1);
  CHECK(one[0].value == 5);
  CHECK(one[0].probability == 1.0);
  const auto three = ecdf(vec({3, 1, 2}));
  REQUIRE(three.size() == 3);
  CHECK(three[0].probability == 1.0 / 3.0);
  CHECK(three[1].probability == 2.0 / 3.0);
  CHECK(three[2].probability == 1.0);
  const auto ties = ecdf(vec({2, 4, 2}));
  REQUIRE(ties.size() == 2);
  CHECK(ties[0].value == 2);
  CHECK(ties[0].probability == 2.0 / 3.0);
  CHECK(ties[1].probability == 1.0);
  CHECK_THROWS_AS(ecdf(Eigen::VectorXd(0)), InputError);

  Rng rng(2);
  Eigen::VectorXd x(97);
  for (Index i = 0; i < x.size(); ++i) x(i) = std::round(rng.normal() * 4);
  const auto e = ecdf(x);
  CHECK(e.back().probability == 1.0);
  for (std::size_t i = 1; i < e.size(); ++i) {
    CHECK(e[i].value > e[i - 1].value);
    CHECK(e[i].probability > e[i - 1].probability);
  }
}

TEST_CASE("quantiles and bandwidth") {
  CHECK(quantile(vec({1, 2, 3, 4}), 0.5) == 2.5);
  CHECK(quantile(vec({1, 2, 3, 4}), 0.0) == 1.0);
  CHECK(quantile(vec({1, 2, 3, 4}), 1.0) == 4.0);
  CHECK(quantile(vec({10, 20, 30, 40, 50}), 0.25) == 20.0);
  CHECK(silverman_bandwidth(vec({0, 0})) == 1e-6);
  // IQR of {0,0,0,0,10} is 0, so sd alone drives the bandwidth.
  const Eigen::VectorXd spike = vec({0, 0, 0, 0, 10});
  CHECK(silverman_bandwidth(spike) ==
        doctest::Approx(0.9 * *summary_stats(spike).sd * std::pow(5.0, -0.2)));
  const Eigen::VectorXd x = vec({1, 2, 3, 4, 5, 6, 7, 8});
  const double sd = *summary_stats(x).sd;
  const double iqr = quantile(x, 0.75) - quantile(x, 0.25);
  CHECK(silverman_bandwidth(x) ==
        doctest::Approx(0.9 * std::min(sd, iqr / 1.34) * std::pow(8.0, -0.2)));
}

TEST_CASE("KDE values, symmetry and mass") {
  const auto at0 = kde(vec({0, 0}), vec({0}));
  CHECK(at0(0) == doctest::Approx(1.0 / (1e-6 * std::sqrt(2 * std::numbers::pi))));
  CHECK_THROWS_AS(kde(vec({0, 1}), vec({0}), 0.0), InputError);
  CHECK_THROWS_AS(kde(vec({0}), vec({0})), InputError);

  Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(201, -4, 4);
  const auto sym = kde(vec({-1.3, 1.3}), grid);
  for (Index i = 0; i < grid.size(); ++i)
    CHECK(std::abs(sym(i) - sym(grid.size() - 1 - i)) <= 1e-15);

  Rng rng(3);
  for (int t = 0; t < 5; ++t) {
    const Index n = 2 + static_cast<Index>(rng.below(200));
    Eigen::VectorXd x(n);
    for (Index i = 0; i < n; ++i) x(i) = rng.normal(rng.uniform(-5, 5), rng.uniform(0.1, 3));
    const double h = silverman_bandwidth(x);
    const Eigen::VectorXd g = Eigen::VectorXd::LinSpaced(2001, x.minCoeff() - 5 * h,
                                                         x.maxCoeff() + 5 * h);
    const auto d = kde(x, g);
    CHECK((d.array() >= 0.0).all());
    CHECK(std::abs(trapezoid(g, d) - 1.0) <= 0.01);
  }
}

TEST_CASE("KS statistic") {
  CHECK(ks_statistic(vec({1, 2, 3}), vec({3, 2, 1})) == 0.0);
  CHECK(ks_statistic(vec({1, 2}), vec({10, 11})) == 1.0);
  CHECK(ks_statistic(vec({1, 2}), vec({1.5, 2.5})) == 0.5);
  CHECK_THROWS_AS(ks_statistic(vec({1}), Eigen::VectorXd(0)), InputError);
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd a(1 + rng.below(20)), b(1 + rng.below(20));
    for (Index i = 0; i < a.size(); ++i) a(i) = static_cast<double>(rng.below(6));
    for (Index i = 0; i < b.size(); ++i) b(i) = static_cast<double>(rng.below(6));
    const double ab = ks_statistic(a, b);
    CHECK(ab == ks_statistic(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    // Oracle: sup over the pooled support of the ECDF gap by direct counting.
    double best = 0.0;
    for (double v = 0; v < 6; ++v) {
      const double fa = (a.array() <= v).count() / static_cast<double>(a.size());
      const double fb = (b.array() <= v).count() / static_cast<double>(b.size());
      best = std::max(best, std::abs(fa - fb));
    }
    CHECK(std::abs(ab - best) < 1e-15);
  }
}

TEST_CASE("compare a sample with itself") {
  Rng rng(5);
  Matrix x(50, 3);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  const auto r = compare(x, x, {"a", "b", "c"});
  REQUIRE(r.features.size() == 3);
  for (const auto& f : r.features) {
    CHECK(f.ks == 0.0);
    CHECK(f.real_stats.median == f.synthetic_stats.median);
    CHECK(f.real_stats.mean == f.synthetic_stats.mean);
    CHECK(*f.real_stats.sd == *f.synthetic_stats.sd);
    CHECK(f.kde_grid.size() == kKdeGridPoints);
    CHECK(f.kde_real == f.kde_synthetic);
    const double h = std::max(f.bandwidth_real, f.bandwidth_synthetic);
    CHECK(f.kde_grid(0) == doctest::Approx(x.col(&f - r.features.data()).minCoeff() - 3 * h));
  }
  const auto j = r.to_json();
  CHECK(j["summary_table"].size() == 4);
  CHECK(r.summary_table().find("all_features") != std::string::npos);
  CHECK(r.features[0].ecdf_csv().rfind("source,value,probability\n", 0) == 0);
  CHECK(r.features[0].kde_csv().rfind("grid,density_real,density_synthetic\n", 0) == 0);
  CHECK_THROWS_AS(compare(x, Matrix::Zero(50, 2)), InputError);
  CHECK_THROWS_AS(compare(x, Matrix::Zero(1, 3)), InputError);
}
