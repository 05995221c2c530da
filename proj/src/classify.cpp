#include "bci/classify.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "bci/kernels.hpp"

namespace bci {

DigitalCode encode_class(MovementClass c) {
  switch (c) {
    case MovementClass::RTR: return {0b01};
    case MovementClass::RTL: return {0b10};
    case MovementClass::WF: return {0b11};
    case MovementClass::OTHER: return {0b00};
  }
  return {0b00};
}

MovementClass decode_code(DigitalCode code) {
  switch (code.bits & 0b11) {
    case 0b01: return MovementClass::RTR;
    case 0b10: return MovementClass::RTL;
    case 0b11: return MovementClass::WF;
    default: return MovementClass::OTHER;
  }
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw InvalidInput("squared_distance: length " + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size()));
  return kernels::squared_distance(a, b);
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw InvalidInput("percentile of an empty set");
  if (!(p >= 0.0 && p <= 100.0)) throw InvalidInput("percentile must be in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = p / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

namespace {

void check_training(const Matrix& vectors, const std::vector<MovementClass>& labels, double p) {
  if (vectors.rows() != labels.size())
    throw InvalidInput("training: " + std::to_string(vectors.rows()) + " vectors but " +
                       std::to_string(labels.size()) + " labels");
  if (!(p >= 0.0 && p <= 100.0)) throw InvalidInput("rejection percentile must be in [0, 100]");
  std::map<MovementClass, std::size_t> counts;
  for (auto l : labels) {
    if (l == MovementClass::OTHER) throw InvalidInput("training: OTHER is not a trainable label");
    ++counts[l];
  }
  if (counts.empty()) throw InvalidInput("training: no exemplars");
  for (const auto& [cls, n] : counts)
    if (n < 2)
      throw InvalidInput("training: class " + std::string(to_string(cls)) + " has " +
                         std::to_string(n) + " exemplar(s), need at least 2");
}

void check_length(std::size_t expected, std::size_t got) {
  if (expected != got)
    throw InvalidInput("feature length " + std::to_string(got) + " does not match model dimension " +
                       std::to_string(expected));
}

Classification apply_threshold(MovementClass best, double distance, double tau) {
  return {distance <= tau ? best : MovementClass::OTHER, distance};
}

}  // namespace

NnModel train_nn(const Matrix& vectors, const std::vector<MovementClass>& labels,
                 double rejection_percentile, std::uint64_t spec_fingerprint) {
  check_training(vectors, labels, rejection_percentile);
  NnModel model;
  model.exemplars = vectors;
  model.labels = labels;
  model.spec_fingerprint = spec_fingerprint;
  model.rejection_threshold = percentile(kernels::loo_nearest(vectors), rejection_percentile);
  return model;
}

Classification classify_nn(const NnModel& model, std::span<const double> v) {
  check_length(model.dimension(), v.size());
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < model.exemplars.rows(); ++j) {
    const double d = kernels::squared_distance(model.exemplars.row(j), v);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return apply_threshold(model.labels[best], best_d, model.rejection_threshold);
}

LineProjection nfl_line_distance(std::span<const double> q, std::span<const double> x1,
                                 std::span<const double> x2) {
  if (q.size() != x1.size() || x1.size() != x2.size())
    throw InvalidInput("nfl_line_distance: length mismatch");
  double dir2 = 0.0, dot = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double d = x2[i] - x1[i];
    dir2 += d * d;
    dot += (q[i] - x1[i]) * d;
  }
  if (dir2 == 0.0) throw InvalidInput("nfl_line_distance: degenerate line (x1 == x2)");
  const double mu = dot / dir2;
  double dist = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double foot = x1[i] + mu * (x2[i] - x1[i]);
    const double r = q[i] - foot;
    dist += r * r;
  }
  return {dist, mu};
}

std::size_t NflModel::dimension() const {
  return class_points.empty() ? 0 : class_points.front().cols();
}

namespace {

// Identical points span no line; the pair then degenerates to its point.
double pair_distance(std::span<const double> q, std::span<const double> a,
                     std::span<const double> b) {
  if (std::equal(a.begin(), a.end(), b.begin())) return kernels::squared_distance(q, a);
  return nfl_line_distance(q, a, b).distance;
}

struct LineHit {
  std::size_t class_slot = 0;
  double distance = std::numeric_limits<double>::infinity();
};

// Nearest feature line over every within-class pair. Pairs touching point
// (skip_class, skip_row) are excluded.
LineHit nearest_line(const NflModel& model, std::span<const double> q, std::ptrdiff_t skip_class,
                     std::ptrdiff_t skip_row) {
  LineHit best;
  for (std::size_t c = 0; c < model.class_points.size(); ++c) {
    const auto& pts = model.class_points[c];
    for (std::size_t i = 0; i < pts.rows(); ++i) {
      if (static_cast<std::ptrdiff_t>(c) == skip_class && static_cast<std::ptrdiff_t>(i) == skip_row)
        continue;
      for (std::size_t j = i + 1; j < pts.rows(); ++j) {
        if (static_cast<std::ptrdiff_t>(c) == skip_class && static_cast<std::ptrdiff_t>(j) == skip_row)
          continue;
        const double d = pair_distance(q, pts.row(i), pts.row(j));
        if (d < best.distance) best = {c, d};
      }
    }
  }
  return best;
}

}  // namespace

NflModel train_nfl(const Matrix& vectors, const std::vector<MovementClass>& labels,
                   double rejection_percentile, std::uint64_t spec_fingerprint) {
  check_training(vectors, labels, rejection_percentile);
  NflModel model;
  model.spec_fingerprint = spec_fingerprint;
  for (auto cls : kTrainableClasses) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) rows.push_back(i);
    if (rows.empty()) continue;
    Matrix pts(rows.size(), vectors.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      auto src = vectors.row(rows[k]);
      std::copy(src.begin(), src.end(), pts.row(k).begin());
    }
    model.class_points.push_back(std::move(pts));
    model.classes.push_back(cls);
  }

  std::vector<std::pair<std::size_t, std::size_t>> queries;
  for (std::size_t c = 0; c < model.class_points.size(); ++c)
    for (std::size_t i = 0; i < model.class_points[c].rows(); ++i) queries.emplace_back(c, i);
  std::vector<double> loo(queries.size());
  const auto n = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const auto [c, i] = queries[static_cast<std::size_t>(k)];
    loo[static_cast<std::size_t>(k)] =
        nearest_line(model, model.class_points[c].row(i), static_cast<std::ptrdiff_t>(c),
                     static_cast<std::ptrdiff_t>(i))
            .distance;
  }
  std::vector<double> finite;
  for (double d : loo)
    if (std::isfinite(d)) finite.push_back(d);
  model.rejection_threshold =
      finite.empty() ? std::numeric_limits<double>::infinity() : percentile(finite, rejection_percentile);
  return model;
}

Classification classify_nfl(const NflModel& model, std::span<const double> v) {
  check_length(model.dimension(), v.size());
  const auto hit = nearest_line(model, v, -1, -1);
  if (!std::isfinite(hit.distance)) return {MovementClass::OTHER, hit.distance};
  return apply_threshold(model.classes[hit.class_slot], hit.distance, model.rejection_threshold);
}

Classification classify(const Model& model, std::span<const double> v) {
  return std::visit(
      [&](const auto& m) -> Classification {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, NnModel>)
          return classify_nn(m, v);
        else
          return classify_nfl(m, v);
      },
      model);
}

std::uint64_t model_fingerprint(const Model& model) {
  return std::visit([](const auto& m) { return m.spec_fingerprint; }, model);
}

std::size_t model_dimension(const Model& model) {
  return std::visit([](const auto& m) { return m.dimension(); }, model);
}

Model with_threshold(Model model, double tau) {
  std::visit([tau](auto& m) { m.rejection_threshold = tau; }, model);
  return model;
}

}  // namespace bci
