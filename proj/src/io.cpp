#include "bci/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace bci {

using nlohmann::json;

std::string fingerprint_hex(std::uint64_t fp) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

json to_json(const FeatureSpec& spec) {
  json bands = json::array();
  for (const auto& b : spec.bands) bands.push_back({b.low_hz, b.high_hz});
  return {{"sampling_rate_hz", spec.sampling_rate},
          {"bands", bands},
          {"analysis_window", {spec.analysis_window.start_s, spec.analysis_window.end_s}},
          {"reference_window", {spec.reference_begin_s, spec.reference_end_s}},
          {"erp_downsample_factor", spec.erp_downsample_factor},
          {"frame_s", spec.frame_s},
          {"hop_s", spec.hop_s},
          {"mean", spec.mean},
          {"std", spec.stddev}};
}

FeatureSpec feature_spec_from_json(const json& j) {
  FeatureSpec spec;
  spec.sampling_rate = j.at("sampling_rate_hz").get<double>();
  spec.bands.clear();
  for (const auto& b : j.at("bands")) spec.bands.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
  spec.analysis_window = {j.at("analysis_window").at(0).get<double>(),
                          j.at("analysis_window").at(1).get<double>()};
  spec.reference_begin_s = j.at("reference_window").at(0).get<double>();
  spec.reference_end_s = j.at("reference_window").at(1).get<double>();
  spec.erp_downsample_factor = j.at("erp_downsample_factor").get<std::size_t>();
  spec.frame_s = j.at("frame_s").get<double>();
  spec.hop_s = j.at("hop_s").get<double>();
  spec.mean = j.at("mean").get<std::vector<double>>();
  spec.stddev = j.at("std").get<std::vector<double>>();
  spec.validate();
  return spec;
}

namespace {

json matrix_rows(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

Matrix rows_matrix(const json& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.at(0).size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto v = rows[r].get<std::vector<double>>();
    if (v.size() != m.cols()) throw InvalidInput("model: ragged exemplar matrix");
    std::copy(v.begin(), v.end(), m.row(r).begin());
  }
  return m;
}

json threshold_json(double tau) { return std::isinf(tau) ? json("inf") : json(tau); }
double threshold_from(const json& j) {
  return j.is_string() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

std::vector<std::string> label_names(const std::vector<MovementClass>& labels) {
  std::vector<std::string> out;
  for (auto l : labels) out.emplace_back(to_string(l));
  return out;
}

std::vector<MovementClass> labels_from(const json& j) {
  std::vector<MovementClass> out;
  for (const auto& s : j) out.push_back(movement_class_from_string(s.get<std::string>()));
  return out;
}

}  // namespace

json model_to_json(const Model& model, const FeatureSpec& spec) {
  json j;
  j["format_version"] = kModelFormatVersion;
  j["spec"] = to_json(spec);
  if (const auto* nn = std::get_if<NnModel>(&model)) {
    j["kind"] = "nn";
    j["labels"] = label_names(nn->labels);
    j["exemplars"] = matrix_rows(nn->exemplars);
    j["rejection_threshold"] = threshold_json(nn->rejection_threshold);
    j["spec_fingerprint"] = fingerprint_hex(nn->spec_fingerprint);
  } else {
    const auto& nfl = std::get<NflModel>(model);
    j["kind"] = "nfl";
    std::vector<MovementClass> labels;
    Matrix all;
    std::vector<double> flat;
    for (std::size_t c = 0; c < nfl.class_points.size(); ++c)
      for (std::size_t r = 0; r < nfl.class_points[c].rows(); ++r) {
        labels.push_back(nfl.classes[c]);
        auto row = nfl.class_points[c].row(r);
        flat.insert(flat.end(), row.begin(), row.end());
      }
    all = Matrix(labels.size(), nfl.dimension());
    all.data() = std::move(flat);
    j["labels"] = label_names(labels);
    j["exemplars"] = matrix_rows(all);
    j["rejection_threshold"] = threshold_json(nfl.rejection_threshold);
    j["spec_fingerprint"] = fingerprint_hex(nfl.spec_fingerprint);
  }
  return j;
}

std::pair<Model, FeatureSpec> model_from_json(const json& j) {
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion)
      throw InvalidInput("unsupported model format_version");
    FeatureSpec spec = feature_spec_from_json(j.at("spec"));
    const auto labels = labels_from(j.at("labels"));
    const Matrix exemplars = rows_matrix(j.at("exemplars"));
    if (exemplars.rows() != labels.size()) throw InvalidInput("model: label count mismatch");
    const double tau = threshold_from(j.at("rejection_threshold"));
    const auto fp = std::stoull(j.at("spec_fingerprint").get<std::string>(), nullptr, 16);
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "nn") {
      NnModel m{exemplars, labels, tau, fp};
      return {Model{std::move(m)}, std::move(spec)};
    }
    if (kind == "nfl") {
      NflModel m;
      m.rejection_threshold = tau;
      m.spec_fingerprint = fp;
      for (auto cls : kTrainableClasses) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < labels.size(); ++i)
          if (labels[i] == cls) rows.push_back(i);
        if (rows.empty()) continue;
        Matrix pts(rows.size(), exemplars.cols());
        for (std::size_t k = 0; k < rows.size(); ++k) {
          auto src = exemplars.row(rows[k]);
          std::copy(src.begin(), src.end(), pts.row(k).begin());
        }
        m.class_points.push_back(std::move(pts));
        m.classes.push_back(cls);
      }
      return {Model{std::move(m)}, std::move(spec)};
    }
    throw InvalidInput("model: unknown kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("model document: ") + e.what());
  }
}

void save_model(const Model& model, const FeatureSpec& spec, const std::filesystem::path& file) {
  std::ofstream out(file);
  out << model_to_json(model, spec).dump(1) << "\n";
  if (!out) throw std::runtime_error("cannot write model " + file.string());
}

std::pair<Model, FeatureSpec> load_model(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InvalidInput("cannot open model " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidInput("model " + file.string() + ": " + e.what());
  }
  return model_from_json(j);
}

json to_json(const EvaluationReport& r) {
  json confusion = json::object();
  for (std::size_t p = 0; p < 4; ++p) {
    json row = json::object();
    for (std::size_t t = 0; t < 3; ++t)
      row[std::string(to_string(static_cast<MovementClass>(t)))] = r.confusion[p][t];
    confusion[std::string(to_string(static_cast<MovementClass>(p)))] = row;
  }
  json acc = json::object();
  for (std::size_t t = 0; t < 3; ++t)
    acc[std::string(to_string(static_cast<MovementClass>(t)))] = r.per_class_accuracy[t];
  json outcomes = json::array();
  for (const auto& o : r.outcomes)
    outcomes.push_back({{"trial_id", o.trial_id},
                        {"true", std::string(to_string(o.truth))},
                        {"predicted", std::string(to_string(o.predicted))},
                        {"distance", o.distance}});
  return {{"n_test", r.n_test},
          {"failure_rate", r.failure_rate},
          {"per_class_accuracy", acc},
          {"confusion_predicted_by_true", confusion},
          {"outcomes", outcomes}};
}

json to_json(const AgreementReport& r) {
  json pairs = json::array();
  for (const auto& p : r.pairs)
    pairs.push_back({{"trial_id", p.trial_id},
                     {"pre_onset", std::string(to_string(p.pre_onset))},
                     {"execution", std::string(to_string(p.execution))}});
  return {{"agreement_rate", r.agreement_rate}, {"pairs", pairs}};
}

json to_json(const RobustnessReport& r) {
  json outcomes = json::array();
  for (const auto& o : r.outcomes) {
    json e{{"trial_id", o.trial_id}, {"error_raised", o.error_raised}};
    if (o.error_raised)
      e["error"] = o.error;
    else
      e["predicted"] = std::string(to_string(o.predicted));
    outcomes.push_back(std::move(e));
  }
  return {{"rejection_rate", r.rejection_rate},
          {"errors_raised", r.errors_raised},
          {"classified", r.classified},
          {"rejected", r.rejected},
          {"outcomes", outcomes}};
}

std::string render_confusion(const EvaluationReport& r) {
  std::ostringstream os;
  char buf[64];
  os << "predicted \\ true     RTR     RTL      WF\n";
  for (std::size_t p = 0; p < 4; ++p) {
    std::snprintf(buf, sizeof buf, "%-16s", std::string(to_string(static_cast<MovementClass>(p))).c_str());
    os << buf;
    for (std::size_t t = 0; t < 3; ++t) {
      std::snprintf(buf, sizeof buf, "%8zu", r.confusion[p][t]);
      os << buf;
    }
    os << "\n";
  }
  std::snprintf(buf, sizeof buf, "n_test=%zu failure_rate=%.4f\n", r.n_test, r.failure_rate);
  os << buf;
  return os.str();
}

}  // namespace bci
