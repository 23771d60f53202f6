#pragma once

// Experiment configuration: a JSON document with five optional sections.
// Missing keys take their defaults, unknown keys and wrong types are
// rejected, and the fully resolved document is echoed into summary.json.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "relaysec/pipeline.hpp"

namespace relaysec::harness {

using Json = nlohmann::ordered_json;

struct ExperimentSpec {
  SystemConfig system;
  double r_b_db = 3.0;
  double r_e_db = 0.0;
  AltConfig alt;
  RoundingConfig rounding;
  PipelineConfig pipeline;
  int trials = 100;
  std::vector<double> eps_values{0.01};
  std::vector<double> r_b_values{3.0, 6.0, 9.0};  // dB
  std::vector<double> r_e_values{-3.0, 0.0, 3.0};  // dB
  std::vector<double> p_s_values{1.0, 10.0, 100.0};
  int eve_samples = 500;
  std::uint64_t root_seed = 1;
  bool sigma_e_flag = false;
  std::string output_dir = "results";
  int threads = 0;  // 0: hardware concurrency

  ExperimentSpec() { sync_thresholds(); }

  void sync_thresholds() {
    system.r_b = db_to_linear(r_b_db);
    system.r_e = db_to_linear(r_e_db);
  }

  RelaxationOptions relaxation() const {
    RelaxationOptions o;
    o.eve_constraint_includes_sigma_e = sigma_e_flag;
    return o;
  }

  void validate() const {
    system.validate();
    alt.validate();
    rounding.validate();
    pipeline.validate();
    if (trials < 1) throw InvalidConfig("experiment.trials must be >= 1");
    if (eve_samples < 1) throw InvalidConfig("experiment.eve_samples must be >= 1");
    if (threads < 0) throw InvalidConfig("experiment.threads must be >= 0");
    if (eps_values.empty()) throw InvalidConfig("experiment.eps_values must be non-empty");
    if (r_b_values.empty()) throw InvalidConfig("experiment.r_b_db_values must be non-empty");
    if (r_e_values.empty()) throw InvalidConfig("experiment.r_e_db_values must be non-empty");
    if (p_s_values.empty()) throw InvalidConfig("experiment.p_s_values must be non-empty");
    for (double e : eps_values) {
      if (!(e >= 0.0) || !std::isfinite(e)) {
        throw InvalidConfig("experiment.eps_values entries must be finite and >= 0");
      }
    }
    for (const auto* list : {&r_b_values, &r_e_values}) {
      for (double v : *list) {
        if (!std::isfinite(v)) throw InvalidConfig("threshold lists must hold finite dB values");
      }
    }
    for (double p : p_s_values) {
      if (!(p > 0.0) || !std::isfinite(p)) {
        throw InvalidConfig("experiment.p_s_values entries must be > 0");
      }
    }
    if (output_dir.empty()) throw InvalidConfig("experiment.output_dir must be non-empty");
  }
};

namespace detail {

// Field-by-field reader over one JSON object; remembers which keys it saw so
// leftovers can be reported as unknown.
class SectionReader {
 public:
  SectionReader(const Json& obj, std::string name) : obj_(obj), name_(std::move(name)) {
    if (!obj_.is_object()) throw InvalidConfig("section '" + name_ + "' must be an object");
  }

  void number(const char* key, double& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number()) fail(key, "a number");
      out = v->get<double>();
    }
  }

  void integer(const char* key, int& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number_integer()) fail(key, "an integer");
      const auto x = v->get<std::int64_t>();
      if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
        fail(key, "an integer in int range");
      }
      out = static_cast<int>(x);
    }
  }

  void seed(const char* key, std::uint64_t& out) {
    if (const Json* v = find(key)) {
      if (v->is_number_unsigned()) {
        out = v->get<std::uint64_t>();
      } else if (v->is_number_integer() && v->get<std::int64_t>() >= 0) {
        out = static_cast<std::uint64_t>(v->get<std::int64_t>());
      } else {
        fail(key, "a nonnegative integer");
      }
    }
  }

  void boolean(const char* key, bool& out) {
    if (const Json* v = find(key)) {
      if (!v->is_boolean()) fail(key, "a boolean");
      out = v->get<bool>();
    }
  }

  void string(const char* key, std::string& out) {
    if (const Json* v = find(key)) {
      if (!v->is_string()) fail(key, "a string");
      out = v->get<std::string>();
    }
  }

  void numbers(const char* key, std::vector<double>& out) {
    if (const Json* v = find(key)) {
      if (!v->is_array()) fail(key, "an array of numbers");
      std::vector<double> vals;
      for (const Json& x : *v) {
        if (!x.is_number()) fail(key, "an array of numbers");
        vals.push_back(x.get<double>());
      }
      out = std::move(vals);
    }
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw InvalidConfig("unknown key '" + name_ + "." + it.key() + "'");
      }
    }
  }

 private:
  const Json* find(const char* key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  [[noreturn]] void fail(const char* key, const char* what) const {
    throw InvalidConfig("'" + name_ + "." + key + "' must be " + what);
  }

  const Json& obj_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace detail

/// Parses and validates a spec. Throws InvalidConfig with the offending key.
inline ExperimentSpec spec_from_json(const Json& doc) {
  if (!doc.is_object()) throw InvalidConfig("config root must be an object");
  static const std::set<std::string> sections{"system", "alternating", "rounding", "pipeline",
                                              "experiment"};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!sections.count(it.key())) throw InvalidConfig("unknown section '" + it.key() + "'");
  }
  ExperimentSpec s;
  const Json empty = Json::object();
  auto section = [&](const char* name) -> const Json& {
    auto it = doc.find(name);
    return it == doc.end() ? empty : *it;
  };

  {
    detail::SectionReader r(section("system"), "system");
    r.integer("n_src", s.system.n_src);
    r.integer("n_relay", s.system.n_relay);
    r.number("sigma2_r", s.system.sigma2_r);
    r.number("sigma2_b", s.system.sigma2_b);
    r.number("sigma2_e", s.system.sigma2_e);
    r.number("r_b_db", s.r_b_db);
    r.number("r_e_db", s.r_e_db);
    r.number("eps", s.system.eps);
    r.finish();
  }
  {
    detail::SectionReader r(section("alternating"), "alternating");
    r.number("xi0", s.alt.xi0);
    r.number("tol", s.alt.tol);
    r.integer("n_max", s.alt.n_max);
    r.number("p_s", s.alt.p_s);
    r.finish();
  }
  {
    detail::SectionReader r(section("rounding"), "rounding");
    r.integer("k_samples", s.rounding.k_samples);
    r.number("rank_tol", s.rounding.rank_tol);
    r.number("feas_tol", s.rounding.feas_tol);
    r.finish();
  }
  {
    detail::SectionReader r(section("pipeline"), "pipeline");
    r.integer("max_refinements", s.pipeline.max_refinements);
    r.number("undercut_tol", s.pipeline.undercut_tol);
    r.finish();
  }
  {
    detail::SectionReader r(section("experiment"), "experiment");
    r.integer("trials", s.trials);
    r.numbers("eps_values", s.eps_values);
    r.numbers("r_b_db_values", s.r_b_values);
    r.numbers("r_e_db_values", s.r_e_values);
    r.numbers("p_s_values", s.p_s_values);
    r.integer("eve_samples", s.eve_samples);
    r.seed("root_seed", s.root_seed);
    r.boolean("sigma_e_flag", s.sigma_e_flag);
    r.string("output_dir", s.output_dir);
    r.integer("threads", s.threads);
    r.finish();
  }
  if (!std::isfinite(s.r_b_db) || !std::isfinite(s.r_e_db)) {
    throw InvalidConfig("system thresholds must be finite dB values");
  }
  s.sync_thresholds();
  s.validate();
  return s;
}

inline ExperimentSpec spec_from_text(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InvalidConfig(std::string("config is not valid JSON: ") + e.what());
  }
  return spec_from_json(doc);
}

inline ExperimentSpec load_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidConfig("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return spec_from_text(buf.str());
}

/// Fully resolved spec, defaults included, in the config file's layout.
inline Json spec_to_json(const ExperimentSpec& s) {
  Json doc;
  doc["system"] = {{"n_src", s.system.n_src},       {"n_relay", s.system.n_relay},
                   {"sigma2_r", s.system.sigma2_r}, {"sigma2_b", s.system.sigma2_b},
                   {"sigma2_e", s.system.sigma2_e}, {"r_b_db", s.r_b_db},
                   {"r_e_db", s.r_e_db},            {"eps", s.system.eps}};
  doc["alternating"] = {
      {"xi0", s.alt.xi0}, {"tol", s.alt.tol}, {"n_max", s.alt.n_max}, {"p_s", s.alt.p_s}};
  doc["rounding"] = {{"k_samples", s.rounding.k_samples},
                     {"rank_tol", s.rounding.rank_tol},
                     {"feas_tol", s.rounding.feas_tol}};
  doc["pipeline"] = {{"max_refinements", s.pipeline.max_refinements},
                     {"undercut_tol", s.pipeline.undercut_tol}};
  doc["experiment"] = {{"trials", s.trials},
                       {"eps_values", s.eps_values},
                       {"r_b_db_values", s.r_b_values},
                       {"r_e_db_values", s.r_e_values},
                       {"p_s_values", s.p_s_values},
                       {"eve_samples", s.eve_samples},
                       {"root_seed", s.root_seed},
                       {"sigma_e_flag", s.sigma_e_flag},
                       {"output_dir", s.output_dir},
                       {"threads", s.threads}};
  return doc;
}

}  // namespace relaysec::harness
