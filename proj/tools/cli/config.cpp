#include "cli/config.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>

namespace drest::cli {

using nlohmann::json;

ConfigError::ConfigError(std::size_t line, const std::string& message)
    : std::runtime_error(line > 0 ? "config line " + std::to_string(line) + ": " + message : "config: " + message),
      line_(line) {}

namespace {

std::size_t line_at(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Offset of the first `"key"` used as an object key at or after `from`.
std::size_t find_key(std::string_view text, std::string_view key, std::size_t from) {
  const std::string quoted = "\"" + std::string(key) + "\"";
  for (std::size_t pos = text.find(quoted, from); pos != std::string_view::npos;
       pos = text.find(quoted, pos + 1)) {
    std::size_t k = pos + quoted.size();
    while (k < text.size() && std::isspace(static_cast<unsigned char>(text[k]))) ++k;
    if (k < text.size() && text[k] == ':') return pos;
  }
  return std::string_view::npos;
}

// Walks a parsed document while keeping enough of the source text to point
// error messages at a line.
class Doc {
 public:
  explicit Doc(std::string_view text) : text_(text) {
    try {
      root_ = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(line_at(text, e.byte > 0 ? e.byte - 1 : 0), "malformed JSON");
    }
    if (!root_.is_object()) throw ConfigError(1, "top level must be an object");
  }

  const json& root() const { return root_; }

  std::size_t line_of(std::string_view key, std::size_t from = 0) const {
    const std::size_t pos = find_key(text_, key, from);
    return pos == std::string_view::npos ? 0 : line_at(text_, pos);
  }
  std::size_t offset_of(std::string_view key, std::size_t from = 0) const {
    const std::size_t pos = find_key(text_, key, from);
    return pos == std::string_view::npos ? from : pos;
  }

  [[noreturn]] void fail(std::string_view key, const std::string& message, std::size_t from = 0) const {
    throw ConfigError(line_of(key, from), std::string(key) + ": " + message);
  }

  void reject_unknown(const json& object, std::initializer_list<std::string_view> allowed,
                      std::size_t from = 0) const {
    for (const auto& [key, value] : object.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) fail(key, "unknown key", from);
    }
  }

  bool get_bool(const json& v, std::string_view key, std::size_t from = 0) const {
    if (!v.is_boolean()) fail(key, "expected true or false", from);
    return v.get<bool>();
  }
  std::uint64_t get_uint(const json& v, std::string_view key, std::uint64_t min, std::size_t from = 0) const {
    if (!v.is_number_unsigned()) fail(key, "expected a nonnegative integer", from);
    const auto x = v.get<std::uint64_t>();
    if (x < min) fail(key, "must be at least " + std::to_string(min), from);
    return x;
  }
  double get_double(const json& v, std::string_view key, std::size_t from = 0) const {
    if (!v.is_number()) fail(key, "expected a number", from);
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(key, "must be finite", from);
    return x;
  }
  std::string get_string(const json& v, std::string_view key, std::size_t from = 0) const {
    if (!v.is_string()) fail(key, "expected a string", from);
    return v.get<std::string>();
  }
  const json& get_array(const json& v, std::string_view key, std::size_t from = 0) const {
    if (!v.is_array()) fail(key, "expected an array", from);
    return v;
  }
  std::vector<EstimatorName> get_estimators(const json& v, std::string_view key, std::size_t from = 0) const {
    std::vector<EstimatorName> out;
    for (const auto& e : get_array(v, key, from)) {
      if (!e.is_string()) fail(key, "estimator names must be strings", from);
      const auto name = parse_estimator_name(e.get<std::string>());
      if (!name) fail(key, "unknown estimator '" + e.get<std::string>() + "'", from);
      if (std::find(out.begin(), out.end(), *name) != out.end()) {
        fail(key, "duplicate estimator '" + e.get<std::string>() + "'", from);
      }
      out.push_back(*name);
    }
    return out;
  }
  std::vector<std::string> get_names(const json& v, std::string_view key, std::size_t from = 0) const {
    std::vector<std::string> out;
    for (const auto& e : get_array(v, key, from)) {
      if (!e.is_string()) fail(key, "covariate names must be strings", from);
      out.push_back(e.get<std::string>());
    }
    return out;
  }
  Link get_link(const json& v, std::string_view key, std::size_t from = 0) const {
    const std::string s = get_string(v, key, from);
    if (s == "identity") return Link::identity;
    if (s == "logit") return Link::logit;
    fail(key, "expected \"identity\" or \"logit\"", from);
  }

 private:
  std::string_view text_;
  json root_;
};

template <std::size_t N>
std::array<double, N> get_fixed(const Doc& doc, const json& v, std::string_view key, std::size_t from) {
  const json& arr = doc.get_array(v, key, from);
  if (arr.size() != N) doc.fail(key, "expected " + std::to_string(N) + " numbers", from);
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = doc.get_double(arr[i], key, from);
  return out;
}

json estimator_list(const std::vector<EstimatorName>& names) {
  json arr = json::array();
  for (auto n : names) arr.push_back(std::string(to_string(n)));
  return arr;
}

}  // namespace

json RunConfig::to_json() const {
  json scen = json::array();
  for (const auto& s : scenarios) scen.push_back({{"pi_correct", s.pi_correct}, {"m_correct", s.m_correct}});
  return {
      {"base_seed", base_seed},
      {"reps", reps},
      {"sample_sizes", sample_sizes},
      {"scenarios", scen},
      {"reverse_roles", reverse_roles},
      {"estimators", estimator_list(estimators)},
      {"dgp",
       {{"intercept", dgp.intercept},
        {"slope", dgp.slope},
        {"z_star_weights", dgp.z_star_weights},
        {"propensity_coefficients", dgp.propensity_coefficients},
        {"noise_sd", dgp.noise_sd}}},
      {"write_values", write_values},
  };
}

RunConfig parse_run_config(std::string_view text) {
  const Doc doc(text);
  const json& root = doc.root();
  doc.reject_unknown(root, {"base_seed", "reps", "sample_sizes", "scenarios", "reverse_roles", "estimators", "dgp",
                            "output_dir", "write_values"});
  RunConfig cfg;
  if (root.contains("base_seed")) cfg.base_seed = doc.get_uint(root["base_seed"], "base_seed", 0);
  if (root.contains("reps")) cfg.reps = doc.get_uint(root["reps"], "reps", 1);
  if (root.contains("sample_sizes")) {
    cfg.sample_sizes.clear();
    for (const auto& v : doc.get_array(root["sample_sizes"], "sample_sizes")) {
      cfg.sample_sizes.push_back(doc.get_uint(v, "sample_sizes", 2));
    }
    if (cfg.sample_sizes.empty()) doc.fail("sample_sizes", "must not be empty");
  }
  if (root.contains("scenarios")) {
    cfg.scenarios.clear();
    const std::size_t at = doc.offset_of("scenarios");
    std::size_t cursor = at;
    for (const auto& v : doc.get_array(root["scenarios"], "scenarios")) {
      if (!v.is_object()) doc.fail("scenarios", "each scenario must be an object");
      doc.reject_unknown(v, {"pi_correct", "m_correct"}, cursor);
      if (!v.contains("pi_correct") || !v.contains("m_correct")) {
        doc.fail("scenarios", "each scenario needs pi_correct and m_correct");
      }
      cfg.scenarios.push_back({doc.get_bool(v["pi_correct"], "pi_correct", cursor),
                               doc.get_bool(v["m_correct"], "m_correct", cursor)});
      cursor = doc.offset_of("m_correct", cursor) + 1;
    }
    if (cfg.scenarios.empty()) doc.fail("scenarios", "must not be empty");
  }
  if (root.contains("reverse_roles")) cfg.reverse_roles = doc.get_bool(root["reverse_roles"], "reverse_roles");
  if (root.contains("estimators")) {
    cfg.estimators = doc.get_estimators(root["estimators"], "estimators");
    if (cfg.estimators.empty()) doc.fail("estimators", "must not be empty");
  }
  if (root.contains("dgp")) {
    const json& d = root["dgp"];
    if (!d.is_object()) doc.fail("dgp", "expected an object");
    const std::size_t at = doc.offset_of("dgp");
    doc.reject_unknown(d, {"intercept", "slope", "z_star_weights", "propensity_coefficients", "noise_sd"}, at);
    if (d.contains("intercept")) cfg.dgp.intercept = doc.get_double(d["intercept"], "intercept", at);
    if (d.contains("slope")) cfg.dgp.slope = doc.get_double(d["slope"], "slope", at);
    if (d.contains("z_star_weights")) cfg.dgp.z_star_weights = get_fixed<4>(doc, d["z_star_weights"], "z_star_weights", at);
    if (d.contains("propensity_coefficients")) {
      cfg.dgp.propensity_coefficients = get_fixed<5>(doc, d["propensity_coefficients"], "propensity_coefficients", at);
    }
    if (d.contains("noise_sd")) {
      cfg.dgp.noise_sd = doc.get_double(d["noise_sd"], "noise_sd", at);
      if (cfg.dgp.noise_sd <= 0) doc.fail("noise_sd", "must be positive", at);
    }
  }
  if (root.contains("output_dir")) cfg.output_dir = doc.get_string(root["output_dir"], "output_dir");
  if (root.contains("write_values")) cfg.write_values = doc.get_bool(root["write_values"], "write_values");
  return cfg;
}

EstimateConfig parse_estimate_config(std::string_view text) {
  const Doc doc(text);
  const json& root = doc.root();
  doc.reject_unknown(root, {"propensity_covariates", "outcome_covariates", "link", "estimators"});
  EstimateConfig cfg;
  if (root.contains("propensity_covariates")) {
    cfg.propensity_covariates = doc.get_names(root["propensity_covariates"], "propensity_covariates");
  }
  if (root.contains("outcome_covariates")) {
    cfg.outcome_covariates = doc.get_names(root["outcome_covariates"], "outcome_covariates");
  }
  if (root.contains("link")) cfg.link = doc.get_link(root["link"], "link");
  if (root.contains("estimators")) cfg.estimators = doc.get_estimators(root["estimators"], "estimators");
  return cfg;
}

namespace {

PropensityKind parse_kind(const Doc& doc, const json& v, std::size_t from) {
  const std::string s = doc.get_string(v, "kind", from);
  if (s == "logistic") return PropensityKind::logistic_mle;
  if (s == "inv_linear_ml") return PropensityKind::inv_linear_ml;
  if (s == "inv_linear_moment") return PropensityKind::inv_linear_moment;
  if (s == "inv_linear_unconstrained") return PropensityKind::inv_linear_unconstrained;
  doc.fail("kind", "expected logistic, inv_linear_ml, inv_linear_moment or inv_linear_unconstrained", from);
}

std::vector<ModelEntry> parse_models(const Doc& doc, const json& root, std::string_view key, ModelRole role) {
  if (!root.contains(key)) doc.fail(key, "required");
  std::vector<ModelEntry> out;
  std::size_t cursor = doc.offset_of(key);
  for (const auto& v : doc.get_array(root[std::string(key)], key)) {
    if (!v.is_object()) doc.fail(key, "each model must be an object");
    if (role == ModelRole::propensity) {
      doc.reject_unknown(v, {"label", "covariates", "kind"}, cursor);
    } else {
      doc.reject_unknown(v, {"label", "covariates", "link"}, cursor);
    }
    ModelEntry m;
    if (!v.contains("covariates")) doc.fail(key, "each model needs covariates");
    m.covariates = doc.get_names(v["covariates"], "covariates", cursor);
    if (m.covariates.empty()) doc.fail("covariates", "must not be empty", cursor);
    m.label = v.contains("label") ? doc.get_string(v["label"], "label", cursor)
                                  : std::string(role == ModelRole::propensity ? "p" : "o") +
                                        std::to_string(out.size() + 1);
    if (v.contains("kind")) m.kind = parse_kind(doc, v["kind"], cursor);
    if (v.contains("link")) m.link = doc.get_link(v["link"], "link", cursor);
    out.push_back(std::move(m));
    cursor = doc.offset_of("covariates", cursor) + 1;
  }
  if (out.empty()) doc.fail(key, "must not be empty");
  return out;
}

}  // namespace

SensitivityConfig parse_sensitivity_config(std::string_view text) {
  const Doc doc(text);
  const json& root = doc.root();
  doc.reject_unknown(root, {"estimator", "boot_reps", "seed", "propensity_models", "outcome_models"});
  SensitivityConfig cfg;
  if (root.contains("estimator")) {
    const std::string s = doc.get_string(root["estimator"], "estimator");
    const auto name = parse_estimator_name(s);
    if (!name || !is_dr_estimator(*name)) doc.fail("estimator", "expected a DR estimator name, got '" + s + "'");
    cfg.estimator = *name;
  }
  if (root.contains("boot_reps")) cfg.boot_reps = doc.get_uint(root["boot_reps"], "boot_reps", 2);
  if (root.contains("seed")) cfg.seed = doc.get_uint(root["seed"], "seed", 0);
  cfg.propensity_models = parse_models(doc, root, "propensity_models", ModelRole::propensity);
  cfg.outcome_models = parse_models(doc, root, "outcome_models", ModelRole::outcome);
  return cfg;
}

}  // namespace drest::cli
