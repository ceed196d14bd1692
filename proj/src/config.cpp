#include "tsgen/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace tsgen {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::invalid_argument("config: " + path + ": " + what);
}

void reject_unknown(const json& obj, const std::string& path,
                    const std::set<std::string>& known) {
  for (const auto& [key, value] : obj.items()) {
    if (!known.contains(key)) fail(path.empty() ? key : path + "." + key, "unknown key");
  }
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

std::vector<double> as_number_list(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(as_number(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

Matrix as_matrix(const json& j, int rows, int cols, const std::string& path) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows) {
    fail(path, "expected " + std::to_string(rows) + " rows");
  }
  Matrix out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const auto row = as_number_list(j[static_cast<std::size_t>(r)],
                                    path + "[" + std::to_string(r) + "]");
    if (static_cast<int>(row.size()) != cols) {
      fail(path + "[" + std::to_string(r) + "]",
           "expected " + std::to_string(cols) + " columns");
    }
    for (int c = 0; c < cols; ++c) out(r, c) = row[static_cast<std::size_t>(c)];
  }
  return out;
}

std::uint64_t as_seed(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  }
  fail(path, "expected a nonnegative integer");
}

// Scalar r means r * I; a nested array is the full matrix.
Matrix as_covariance(const json& j, int dim, const std::string& path) {
  if (j.is_number()) {
    return j.get<double>() * Matrix::Identity(dim, dim);
  }
  return as_matrix(j, dim, dim, path);
}

Vector as_state_vector(const json& j, int dim, const std::string& path) {
  if (j.is_number()) return Vector::Constant(dim, j.get<double>());
  const auto list = as_number_list(j, path);
  if (static_cast<int>(list.size()) != dim) {
    fail(path, "expected " + std::to_string(dim) + " entries");
  }
  Vector out(dim);
  for (int i = 0; i < dim; ++i) out(i) = list[static_cast<std::size_t>(i)];
  return out;
}

std::vector<ClockSpec> parse_clocks(const json& j) {
  std::vector<ClockSpec> clocks;
  if (j.is_object()) {
    reject_unknown(j, "clocks", {"count", "order", "sigma"});
    if (!j.contains("count") || !j.contains("order") || !j.contains("sigma")) {
      fail("clocks", "homogeneous form needs count, order, sigma");
    }
    const int count = as_int(j["count"], "clocks.count");
    ClockSpec spec;
    spec.order = as_int(j["order"], "clocks.order");
    spec.sigma = as_number_list(j["sigma"], "clocks.sigma");
    if (count < 2) fail("clocks.count", "need at least 2 clocks");
    clocks.assign(static_cast<std::size_t>(count), spec);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) {
      const std::string path = "clocks[" + std::to_string(i) + "]";
      const json& cj = j[i];
      if (!cj.is_object()) fail(path, "expected an object");
      reject_unknown(cj, path, {"order", "sigma"});
      ClockSpec spec;
      spec.order = as_int(cj.at("order"), path + ".order");
      spec.sigma = as_number_list(cj.at("sigma"), path + ".sigma");
      clocks.push_back(std::move(spec));
    }
  } else {
    fail("clocks", "expected an object or an array");
  }
  return clocks;
}

ExperimentConfig parse_validated(const json& root);

}  // namespace

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::jst: return "jst";
    case Algorithm::ckf: return "ckf";
    case Algorithm::both: return "both";
    case Algorithm::obs_ckf: return "obs-ckf";
  }
  return "?";
}

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: JSON parse error: ") + e.what());
  }
  if (!root.is_object()) throw std::invalid_argument("config: top level must be an object");
  try {
    return parse_validated(root);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
}

namespace {

ExperimentConfig parse_validated(const json& root) {
  reject_unknown(root, "",
                 {"clocks", "weights", "tau", "horizon", "r_true", "r_guess", "w_guess",
                  "p0", "x0", "x0_guess", "algorithm", "reduction", "paths", "seeds",
                  "out_dir"});
  for (const char* key : {"clocks", "tau", "horizon"}) {
    if (!root.contains(key)) fail(key, "required key missing");
  }

  ExperimentConfig out;
  EnsembleConfig& ens = out.ensemble;
  ens.clocks = parse_clocks(root["clocks"]);
  const int m = ens.size();
  const int nm = ens.state_dim();

  if (root.contains("weights")) {
    const auto w = as_number_list(root["weights"], "weights");
    if (static_cast<int>(w.size()) != m) fail("weights", "size must equal clock count");
    ens.weights = Eigen::Map<const Vector>(w.data(), static_cast<Index>(w.size()));
  } else {
    ens.weights = Vector::Constant(m, 1.0 / m);
  }

  if (root["tau"].is_number()) {
    ens.tau = {as_number(root["tau"], "tau")};
  } else {
    ens.tau = as_number_list(root["tau"], "tau");
  }
  ens.horizon = as_int(root["horizon"], "horizon");

  ens.r_true = root.contains("r_true")
                   ? as_covariance(root["r_true"], m - 1, "r_true")
                   : Matrix::Zero(m - 1, m - 1);
  ens.r_guess = root.contains("r_guess")
                    ? as_covariance(root["r_guess"], m - 1, "r_guess")
                    : ens.r_true;
  ens.w_guess = root.contains("w_guess")
                    ? as_matrix(root["w_guess"], nm, nm, "w_guess")
                    : true_process_cov(ens, ens.tau.front());
  ens.p0 = root.contains("p0") ? as_number(root["p0"], "p0") : 1e-8;
  ens.x0 = root.contains("x0") ? as_state_vector(root["x0"], nm, "x0")
                               : Vector::Zero(nm);
  ens.x0_guess = root.contains("x0_guess")
                     ? as_state_vector(root["x0_guess"], nm, "x0_guess")
                     : ens.x0;

  if (root.contains("algorithm")) {
    const std::string a = root["algorithm"].get<std::string>();
    if (a == "jst") out.algorithm = Algorithm::jst;
    else if (a == "ckf") out.algorithm = Algorithm::ckf;
    else if (a == "both") out.algorithm = Algorithm::both;
    else if (a == "obs-ckf") out.algorithm = Algorithm::obs_ckf;
    else fail("algorithm", "expected jst | ckf | both | obs-ckf");
  }
  if (root.contains("reduction")) {
    out.reduction = root["reduction"].get<std::string>();
    if (out.reduction != "none" && out.reduction != "common-mode-projection") {
      fail("reduction", "expected none | common-mode-projection");
    }
  }
  if (root.contains("paths")) {
    out.paths = as_int(root["paths"], "paths");
    if (out.paths < 1) fail("paths", "must be >= 1");
  }
  if (root.contains("seeds")) {
    const json& s = root["seeds"];
    if (!s.is_object()) fail("seeds", "expected an object");
    reject_unknown(s, "seeds", {"process", "measurement"});
    if (s.contains("process")) {
      out.seeds.process_seed = as_seed(s["process"], "seeds.process");
    }
    if (s.contains("measurement")) {
      out.seeds.measurement_seed = as_seed(s["measurement"], "seeds.measurement");
    }
  }
  if (root.contains("out_dir")) out.out_dir = root["out_dir"].get<std::string>();

  try {
    ens.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return out;
}

}  // namespace

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace tsgen
