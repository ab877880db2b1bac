#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dgtime/cli.hpp"

namespace dgtime {

namespace {

using nlohmann::json;

Matrix read_matrix(const json& doc, const char* key, int rows_hint, int cols) {
  if (!doc.contains(key)) {
    throw config_error(std::string("system file: missing matrix '") + key + "'");
  }
  const json& rows = doc.at(key);
  if (!rows.is_array()) throw config_error(std::string("system file: '") + key + "' is not an array");
  const int n_rows = static_cast<int>(rows.size());
  if (rows_hint >= 0 && n_rows != rows_hint) {
    throw config_error(std::string("system file: '") + key + "' has the wrong number of rows");
  }
  Matrix out = Matrix::Zero(n_rows, cols);
  for (int i = 0; i < n_rows; ++i) {
    const json& row = rows[i];
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      throw config_error(std::string("system file: row ") + std::to_string(i) + " of '" + key +
                         "' must have " + std::to_string(cols) + " entries");
    }
    for (int j = 0; j < cols; ++j) {
      if (!row[j].is_number()) throw config_error(std::string("system file: non-numeric entry in '") + key + "'");
      out(i, j) = row[j].get<double>();
    }
  }
  return out;
}

SaddleManufactured trig_preset(int m, int r1) {
  SaddleManufactured mf;
  mf.u = [m](double t) {
    Vector v(m);
    for (int i = 0; i < m; ++i) v[i] = std::sin((1.0 + 0.5 * i) * t + 0.3 * i);
    return v;
  };
  mf.du = [m](double t) {
    Vector v(m);
    for (int i = 0; i < m; ++i) v[i] = (1.0 + 0.5 * i) * std::cos((1.0 + 0.5 * i) * t + 0.3 * i);
    return v;
  };
  mf.p = [r1](double t) {
    Vector v(r1);
    for (int j = 0; j < r1; ++j) v[j] = std::exp(0.5 * (j + 1) * t);
    return v;
  };
  return mf;
}

}  // namespace

ConstrainedSystem parse_system(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw config_error(std::string("system file: ") + e.what());
  }
  if (!doc.is_object()) throw config_error("system file: top level must be an object");
  if (!doc.contains("M") || !doc["M"].is_array() || doc["M"].empty()) {
    throw config_error("system file: 'M' must be a non-empty matrix");
  }
  const int m = static_cast<int>(doc["M"].size());
  Matrix M = read_matrix(doc, "M", m, m);
  Matrix A = read_matrix(doc, "A", m, m);
  Matrix B1 = doc.contains("B1") ? read_matrix(doc, "B1", -1, m) : Matrix::Zero(0, m);
  Matrix B2 = doc.contains("B2") ? read_matrix(doc, "B2", -1, m) : Matrix::Zero(0, m);
  std::optional<Matrix> lift;
  if (doc.contains("lift")) lift = read_matrix(doc, "lift", m, static_cast<int>(B2.rows()));

  const std::string data = doc.value("data", "zero");
  const std::string name = doc.value("name", "system");
  ConstrainedSystem sys;
  if (data == "trig") {
    sys = assemble_manufactured_system(name, M, A, B1, B2, lift,
                                       trig_preset(m, static_cast<int>(B1.rows())));
  } else if (data == "zero") {
    sys.name = name;
    sys.M = M;
    sys.A = A;
    sys.B1 = B1;
    sys.B2 = B2;
    sys.lift = lift ? *lift : right_inverse(B2);
    sys.normU = M + A;
    sys.normQ1 = Matrix::Identity(B1.rows(), B1.rows());
    sys.u0 = Vector::Zero(m);
    sys.f = [m](double) -> Vector { return Vector::Zero(m); };
    const auto r1 = B1.rows(), r2 = B2.rows();
    sys.g1 = [r1](double) -> Vector { return Vector::Zero(r1); };
    sys.g2 = [r2](double) -> Vector { return Vector::Zero(r2); };
  } else {
    throw config_error("system file: unknown data preset '" + data + "'");
  }
  if (doc.contains("normU")) sys.normU = read_matrix(doc, "normU", m, m);
  if (doc.contains("normQ1")) {
    sys.normQ1 = read_matrix(doc, "normQ1", static_cast<int>(B1.rows()), static_cast<int>(B1.rows()));
  }
  if (doc.contains("u0")) {
    const json& u0 = doc["u0"];
    if (!u0.is_array() || static_cast<int>(u0.size()) != m) {
      throw config_error("system file: 'u0' must have " + std::to_string(m) + " entries");
    }
    for (int i = 0; i < m; ++i) sys.u0[i] = u0[i].get<double>();
    sys.warnings.clear();
    record_initial_compatibility(sys);
  }
  return sys;
}

ConstrainedSystem load_system_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open system file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_system(buffer.str());
}

ConstrainedSystem load_problem(const std::string& ref, int elements) {
  if (ref == "heat1d") {
    try {
      return build_heat_1d(elements, heat_trig());
    } catch (const std::invalid_argument& e) {
      throw config_error(e.what());
    }
  }
  if (ref == "stokes3") return build_saddle_preset(ref);
  return load_system_file(ref);
}

}  // namespace dgtime
