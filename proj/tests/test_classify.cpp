#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "bci/classify.hpp"
#include "bci/io.hpp"
#include "test_support.hpp"

using namespace bci;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr auto RTR = MovementClass::RTR;
constexpr auto RTL = MovementClass::RTL;
constexpr auto WF = MovementClass::WF;
constexpr auto OTHER = MovementClass::OTHER;

Matrix rows_of(const std::vector<std::vector<double>>& rows) {
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

double loop_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc;
}

std::vector<double> loo_oracle(const Matrix& x) {
  std::vector<double> out;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double best = kInf;
    for (std::size_t j = 0; j < x.rows(); ++j)
      if (i != j) best = std::min(best, loop_distance(x.row(i), x.row(j)));
    out.push_back(best);
  }
  return out;
}

// Distance from q to the line through a and b, found by scanning mu instead of
// projecting: a coarse grid, then a fine grid around the coarse winner.
double grid_line_distance(std::span<const double> q, std::span<const double> a, std::span<const double> b) {
  auto at = [&](double mu) {
    double acc = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double p = a[i] + mu * (b[i] - a[i]);
      acc += (q[i] - p) * (q[i] - p);
    }
    return acc;
  };
  double best_mu = 0.0, best = kInf;
  for (double mu = -60.0; mu <= 60.0; mu += 0.01)
    if (at(mu) < best) best = at(mu), best_mu = mu;
  const double centre = best_mu;
  for (double mu = centre - 0.011; mu <= centre + 0.011; mu += 1e-6) best = std::min(best, at(mu));
  return best;
}

struct Instance {
  Matrix x;
  std::vector<MovementClass> labels;
};

// 2-5 points per class for 2-3 classes, coordinates on a 0.5 grid in [-6, 6]
// with distinct points, so every line is well defined.
Instance random_instance(std::mt19937_64& rng, std::size_t dim) {
  std::uniform_int_distribution<int> n_classes(2, 3), n_points(2, 5), coord(-12, 12);
  Instance inst;
  std::vector<std::vector<double>> rows;
  std::set<std::vector<double>> seen;
  const int classes = n_classes(rng);
  for (int c = 0; c < classes; ++c) {
    const int n = n_points(rng);
    for (int k = 0; k < n;) {
      std::vector<double> p(dim);
      for (auto& v : p) v = 0.5 * coord(rng);
      if (!seen.insert(p).second) continue;
      rows.push_back(p);
      inst.labels.push_back(kTrainableClasses[c]);
      ++k;
    }
  }
  inst.x = rows_of(rows);
  return inst;
}

std::vector<double> random_query(std::mt19937_64& rng, std::size_t dim) {
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  std::vector<double> q(dim);
  for (auto& v : q) v = u(rng);
  return q;
}

}  // namespace

TEST_CASE("squared_distance") {
  const std::vector<double> o{0, 0}, p{3, 4};
  CHECK(squared_distance(o, p) == 25.0);
  CHECK(squared_distance(p, p) == 0.0);
  CHECK_THROWS_AS(squared_distance(o, std::vector<double>{1, 2, 3}), InvalidInput);
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 50; ++rep) {
    const auto m = bci::test::random_matrix(2, 50, rng, 10.0);
    CHECK(squared_distance(m.row(0), m.row(1)) == doctest::Approx(loop_distance(m.row(0), m.row(1))).epsilon(1e-12));
  }
}

TEST_CASE("digital codes") {
  CHECK(encode_class(RTR).bits == 0b01);
  CHECK(encode_class(RTL).bits == 0b10);
  CHECK(encode_class(WF).bits == 0b11);
  CHECK(encode_class(OTHER).bits == 0b00);
  std::set<int> codes;
  for (auto c : {RTR, RTL, WF, OTHER}) {
    codes.insert(encode_class(c).bits);
    CHECK(decode_code(encode_class(c)) == c);
  }
  CHECK(codes.size() == 4);
}

TEST_CASE("percentile uses linear interpolation") {
  CHECK(percentile({3, 1, 2}, 0) == 1.0);
  CHECK(percentile({3, 1, 2}, 100) == 3.0);
  CHECK(percentile({1, 2, 3, 4}, 50) == doctest::Approx(2.5));
  CHECK(percentile({0, 10}, 95) == doctest::Approx(9.5));
  CHECK_THROWS_AS(percentile({}, 50), InvalidInput);
  CHECK_THROWS_AS(percentile({1}, 101), InvalidInput);
}

TEST_CASE("train_nn") {
  std::mt19937_64 rng(3);
  const Matrix x = bci::test::random_matrix(9, 4, rng);
  const std::vector<MovementClass> labels{RTR, RTR, RTR, RTL, RTL, RTL, WF, WF, WF};
  const auto loo = loo_oracle(x);

  SUBCASE("p = 100 rejects no training point") {
    const auto m = train_nn(x, labels, 100.0);
    CHECK(m.rejection_threshold == doctest::Approx(*std::max_element(loo.begin(), loo.end())));
    for (std::size_t i = 0; i < x.rows(); ++i) {
      Matrix rest(x.rows() - 1, x.cols());
      std::vector<MovementClass> rest_labels;
      for (std::size_t j = 0, r = 0; j < x.rows(); ++j) {
        if (j == i) continue;
        std::copy(x.row(j).begin(), x.row(j).end(), rest.row(r++).begin());
        rest_labels.push_back(labels[j]);
      }
      NnModel held = m;
      held.exemplars = rest;
      held.labels = rest_labels;
      CHECK(classify_nn(held, x.row(i)).label != OTHER);
    }
  }
  SUBCASE("p = 0 is the minimum") {
    CHECK(train_nn(x, labels, 0.0).rejection_threshold == doctest::Approx(*std::min_element(loo.begin(), loo.end())));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(train_nn(x, {RTR, RTR, RTR, RTL, RTL, RTL, RTL, RTL, WF}, 95.0), InvalidInput);
    CHECK_THROWS_AS(train_nn(x, labels, 120.0), InvalidInput);
    CHECK_THROWS_AS(train_nn(x, {RTR, RTR}, 95.0), InvalidInput);
    CHECK_THROWS_AS(train_nn(x, {RTR, RTR, RTR, RTL, RTL, RTL, WF, WF, OTHER}, 95.0), InvalidInput);
  }
}

TEST_CASE("classify_nn") {
  std::mt19937_64 rng(4);
  const Matrix x = bci::test::random_matrix(6, 3, rng);
  const std::vector<MovementClass> labels{RTR, RTR, RTL, RTL, WF, WF};
  auto m = train_nn(x, labels, 95.0);

  SUBCASE("exemplar query") {
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const auto r = classify_nn(m, x.row(i));
      CHECK(r.label == labels[i]);
      CHECK(r.distance == 0.0);
    }
  }
  SUBCASE("threshold rule") {
    const std::vector<double> q{5.0, 5.0, 5.0};
    const auto r = classify_nn(m, q);
    m.rejection_threshold = r.distance;
    CHECK(classify_nn(m, q).label != OTHER);
    m.rejection_threshold = std::nextafter(r.distance, 0.0);
    CHECK(classify_nn(m, q).label == OTHER);
  }
  SUBCASE("tau extremes") {
    m.rejection_threshold = kInf;
    for (int rep = 0; rep < 50; ++rep) CHECK(classify_nn(m, random_query(rng, 3)).label != OTHER);
    m.rejection_threshold = 0.0;
    for (int rep = 0; rep < 50; ++rep) CHECK(classify_nn(m, random_query(rng, 3)).label == OTHER);
    CHECK(classify_nn(m, x.row(2)).label == RTL);
  }
  SUBCASE("ties go to the lowest index") {
    const Matrix sym = rows_of({{-1, 0}, {-2, 0}, {1, 0}, {2, 0}});
    const auto tie = train_nn(sym, {RTL, RTL, RTR, RTR}, 100.0);
    CHECK(classify_nn(tie, std::vector<double>{0, 0}).label == RTL);
  }
  SUBCASE("length mismatch") { CHECK_THROWS_AS(classify_nn(m, std::vector<double>{1, 2}), InvalidInput); }
  SUBCASE("exhaustive-search oracle on 100 random instances") {
    for (int rep = 0; rep < 100; ++rep) {
      const std::size_t dim = 1 + rep % 4;
      const auto inst = random_instance(rng, dim);
      auto model = train_nn(inst.x, inst.labels, 95.0);
      model.rejection_threshold = kInf;
      const auto q = random_query(rng, dim);
      std::size_t best = 0;
      for (std::size_t j = 1; j < inst.x.rows(); ++j)
        if (loop_distance(inst.x.row(j), q) < loop_distance(inst.x.row(best), q)) best = j;
      const auto r = classify_nn(model, q);
      CHECK(r.label == inst.labels[best]);
      CHECK(r.distance == doctest::Approx(loop_distance(inst.x.row(best), q)));
    }
  }
}

TEST_CASE("nfl_line_distance") {
  const std::vector<double> x1{0, 0}, x2{2, 0};
  auto r = nfl_line_distance(std::vector<double>{0, 1}, x1, x2);
  CHECK(r.distance == doctest::Approx(1.0));
  CHECK(r.mu == doctest::Approx(0.0));
  r = nfl_line_distance(std::vector<double>{1, 1}, x1, x2);
  CHECK(r.distance == doctest::Approx(1.0));
  CHECK(r.mu == doctest::Approx(0.5));
  r = nfl_line_distance(std::vector<double>{3, 0}, x1, x2);
  CHECK(r.distance == doctest::Approx(0.0));
  CHECK(r.mu == doctest::Approx(1.5));
  CHECK_THROWS_AS(nfl_line_distance(std::vector<double>{1, 1}, x1, x1), InvalidInput);
  CHECK_THROWS_AS(nfl_line_distance(std::vector<double>{1}, x1, x2), InvalidInput);
}

TEST_CASE("train_nfl") {
  SUBCASE("two-point class contributes no lines to its own held-out points") {
    const Matrix x = rows_of({{0, 0}, {10, 0}, {0, 5}, {1, 5}, {2, 5}});
    const auto m = train_nfl(x, {RTR, RTR, RTL, RTL, RTL}, 100.0);
    // LOO of (0,0): only RTL lines remain; nearest is y = 5 at distance 25.
    // LOO of (10,0): same line, 25. RTL points lie on their own lines: 0.
    CHECK(m.rejection_threshold == doctest::Approx(25.0));
    REQUIRE(m.class_points.size() == 2);
    CHECK(m.class_points[0].rows() == 2);
    CHECK(m.class_points[1].rows() == 3);
  }
  SUBCASE("p = 100 bounds every leave-one-out line distance") {
    std::mt19937_64 rng(12);
    const auto inst = random_instance(rng, 3);
    const auto m = train_nfl(inst.x, inst.labels, 100.0);
    for (std::size_t i = 0; i < inst.x.rows(); ++i) {
      double best = kInf;
      for (std::size_t a = 0; a < inst.x.rows(); ++a)
        for (std::size_t b = a + 1; b < inst.x.rows(); ++b)
          if (a != i && b != i && inst.labels[a] == inst.labels[b])
            best = std::min(best, nfl_line_distance(inst.x.row(i), inst.x.row(a), inst.x.row(b)).distance);
      if (std::isfinite(best)) CHECK(best <= m.rejection_threshold * (1.0 + 1e-12));
    }
  }
  SUBCASE("errors") {
    const Matrix x = rows_of({{0, 0}, {1, 0}, {0, 1}});
    CHECK_THROWS_AS(train_nfl(x, {RTR, RTR, RTL}, 95.0), InvalidInput);
  }
}

TEST_CASE("classify_nfl") {
  SUBCASE("extrapolation pathology: NFL and NN disagree") {
    const Matrix x = rows_of({{0, 0}, {4, 0}, {2, 2}, {3, 2}});
    const std::vector<MovementClass> labels{RTR, RTR, RTL, RTL};
    const std::vector<double> q{10, 1.5};
    auto nfl = train_nfl(x, labels, 95.0);
    nfl.rejection_threshold = kInf;
    auto nn = train_nn(x, labels, 95.0);
    nn.rejection_threshold = kInf;
    const auto a = classify_nfl(nfl, q);
    CHECK(a.label == RTL);
    CHECK(a.distance == doctest::Approx(0.25));
    const auto b = classify_nn(nn, q);
    CHECK(b.label == RTR);
    CHECK(b.distance == doctest::Approx(38.25));
  }
  SUBCASE("stored point query") {
    const Matrix x = rows_of({{0, 0}, {4, 1}, {2, 2}, {3, 7}, {-5, 1}, {-4, -3}});
    const std::vector<MovementClass> labels{RTR, RTR, RTL, RTL, WF, WF};
    const auto m = train_nfl(x, labels, 95.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const auto r = classify_nfl(m, x.row(i));
      CHECK(r.label == labels[i]);
      CHECK(r.distance == doctest::Approx(0.0).scale(1.0));
    }
    CHECK_THROWS_AS(classify_nfl(m, std::vector<double>{1, 2, 3}), InvalidInput);
  }
  SUBCASE("three points give three lines") {
    // Only the line through the first and third point passes through q.
    const Matrix x = rows_of({{0, 0}, {1, 3}, {2, 0}, {10, 10}, {11, 10}});
    auto m = train_nfl(x, {RTR, RTR, RTR, RTL, RTL}, 95.0);
    m.rejection_threshold = kInf;
    const auto r = classify_nfl(m, std::vector<double>{7, 0});
    CHECK(r.label == RTR);
    CHECK(r.distance == doctest::Approx(0.0).scale(1.0));
  }
  SUBCASE("exhaustive pair enumeration with a dense mu grid on 100 random instances") {
    std::mt19937_64 rng(13);
    for (int rep = 0; rep < 100; ++rep) {
      const std::size_t dim = 2 + rep % 3;
      const auto inst = random_instance(rng, dim);
      auto m = train_nfl(inst.x, inst.labels, 95.0);
      m.rejection_threshold = kInf;
      const auto q = random_query(rng, dim);
      double best = kInf;
      MovementClass best_cls = OTHER;
      for (auto cls : kTrainableClasses)
        for (std::size_t a = 0; a < inst.x.rows(); ++a)
          for (std::size_t b = a + 1; b < inst.x.rows(); ++b) {
            if (inst.labels[a] != cls || inst.labels[b] != cls) continue;
            const double d = grid_line_distance(q, inst.x.row(a), inst.x.row(b));
            if (d < best - 1e-9) best = d, best_cls = cls;
          }
      const auto r = classify_nfl(m, q);
      CAPTURE(rep);
      CHECK(std::abs(r.distance - best) <= 1e-6);
      CHECK(r.label == best_cls);
    }
  }
}

TEST_CASE("classifier invariants") {
  std::mt19937_64 rng(14);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t dim = 2 + rep % 3;
    const auto inst = random_instance(rng, dim);
    const auto nn = train_nn(inst.x, inst.labels, 95.0);
    const auto nfl = train_nfl(inst.x, inst.labels, 95.0);
    CAPTURE(rep);

    // Relabel RTR -> RTL -> WF -> RTR.
    auto pi = [](MovementClass c) {
      switch (c) {
        case RTR: return RTL;
        case RTL: return WF;
        case WF: return RTR;
        default: return OTHER;
      }
    };
    std::vector<MovementClass> permuted;
    for (auto l : inst.labels) permuted.push_back(pi(l));
    auto nn_p = train_nn(inst.x, permuted, 95.0);
    auto nfl_p = train_nfl(inst.x, permuted, 95.0);

    // Duplicate the first exemplar, keeping the original thresholds.
    Matrix dup(inst.x.rows() + 1, dim);
    std::copy(inst.x.data().begin(), inst.x.data().end(), dup.data().begin());
    std::copy(inst.x.row(0).begin(), inst.x.row(0).end(), dup.row(inst.x.rows()).begin());
    auto dup_labels = inst.labels;
    dup_labels.push_back(inst.labels[0]);
    auto nn_d = train_nn(dup, dup_labels, 95.0);
    nn_d.rejection_threshold = nn.rejection_threshold;
    auto nfl_d = train_nfl(dup, dup_labels, 95.0);
    nfl_d.rejection_threshold = nfl.rejection_threshold;

    for (int k = 0; k < 10; ++k) {
      const auto q = random_query(rng, dim);
      const auto a = classify_nn(nn, q);
      const auto b = classify_nfl(nfl, q);
      CHECK(b.distance <= a.distance + 1e-12);
      if (a.label != OTHER) CHECK(classify_nn(nn_p, q).label == pi(a.label));
      if (b.label != OTHER) CHECK(classify_nfl(nfl_p, q).label == pi(b.label));
      CHECK(classify_nn(nn_d, q).label == a.label);
      CHECK(classify_nfl(nfl_d, q).label == b.label);
    }
  }
}

TEST_CASE("model JSON round trip") {
  std::mt19937_64 rng(15);
  const auto inst = random_instance(rng, 4);
  FeatureSpec spec;
  spec.mean = {1.5, -2.0, 0.0, 3.25};
  spec.stddev = {1.0, 0.5, 2.0, 1e-3};
  for (const Model& model : {Model{train_nn(inst.x, inst.labels, 95.0, spec.fingerprint())},
                             Model{train_nfl(inst.x, inst.labels, 90.0, spec.fingerprint())},
                             with_threshold(Model{train_nn(inst.x, inst.labels, 95.0, spec.fingerprint())}, kInf)}) {
    const auto doc = model_to_json(model, spec);
    CHECK(doc.at("format_version") == kModelFormatVersion);
    const auto [back, back_spec] = model_from_json(nlohmann::json::parse(doc.dump()));
    CHECK(back.index() == model.index());
    CHECK(back_spec.fingerprint() == spec.fingerprint());
    CHECK(model_fingerprint(back) == spec.fingerprint());
    for (int k = 0; k < 20; ++k) {
      const auto q = random_query(rng, 4);
      const auto a = classify(model, q), b = classify(back, q);
      CHECK(a.label == b.label);
      CHECK(a.distance == b.distance);
    }
  }
  auto doc = model_to_json(Model{train_nn(inst.x, inst.labels, 95.0)}, spec);
  doc["format_version"] = 99;
  CHECK_THROWS_AS(model_from_json(doc), InvalidInput);
  doc = model_to_json(Model{train_nn(inst.x, inst.labels, 95.0)}, spec);
  doc["kind"] = "svm";
  CHECK_THROWS_AS(model_from_json(doc), InvalidInput);
}
