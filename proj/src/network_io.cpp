#include "robustify/network_io.hpp"

#include <fstream>
#include <sstream>

#include "robustify/errors.hpp"
#include "robustify/json_eigen.hpp"

namespace robustify {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what,
                                 Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array()) throw SchemaError(what + " must be an array of rows");
  const auto r = static_cast<Eigen::Index>(j.size());
  Eigen::Index c = -1;
  for (const auto& row : j) {
    if (!row.is_array()) throw SchemaError(what + " must be an array of rows");
    if (c < 0) c = static_cast<Eigen::Index>(row.size());
    if (static_cast<Eigen::Index>(row.size()) != c) {
      throw DimensionMismatch(what + " has ragged rows");
    }
  }
  if (c < 0) c = cols < 0 ? 0 : cols;
  if ((rows >= 0 && r != rows) || (cols >= 0 && c != cols)) {
    throw DimensionMismatch(what + " is " + std::to_string(r) + "x" +
                            std::to_string(c) + ", expected " +
                            std::to_string(rows) + "x" + std::to_string(cols));
  }
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index k = 0; k < c; ++k) {
      const json& v = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
      if (!v.is_number()) throw SchemaError(what + " has a non-numeric entry");
      m(i, k) = v.get<double>();
    }
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& what,
                                 Eigen::Index size) {
  if (!j.is_array()) throw SchemaError(what + " must be an array");
  const auto n = static_cast<Eigen::Index>(j.size());
  if (size >= 0 && n != size) {
    throw DimensionMismatch(what + " has length " + std::to_string(n) +
                            ", expected " + std::to_string(size));
  }
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const json& e = j[static_cast<std::size_t>(i)];
    if (!e.is_number()) throw SchemaError(what + " has a non-numeric entry");
    v(i) = e.get<double>();
  }
  return v;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path);
}

json network_to_json(const ImplicitNetwork& net) {
  net.validate();
  const NetworkDims d = net.dims();
  json j;
  j["n"] = d.n;
  j["n_u"] = d.n_u;
  j["n_g"] = d.n_g;
  if (net.activation.kind() == Activation::Kind::kCustomSampled) {
    j["activation"] = {{"kind", "custom_sampled"},
                       {"knots_x", net.activation.knots_x()},
                       {"knots_y", net.activation.knots_y()}};
  } else {
    j["activation"] = net.activation.name();
  }
  j["W_x"] = matrix_to_json(net.state_weights);
  j["W_u"] = matrix_to_json(net.input_weights);
  j["W_fx"] = matrix_to_json(net.output_state_weights);
  j["W_fu"] = matrix_to_json(net.output_input_weights);
  j["b"] = vector_to_json(net.state_bias);
  j["b_f"] = vector_to_json(net.output_bias);
  return j;
}

namespace {

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(std::string("missing field '") + key + "'");
  return *it;
}

int dim_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw SchemaError(std::string("'") + key + "' must be a nonnegative integer");
  }
  return v.get<int>();
}

Activation activation_from_json(const json& a) {
  try {
    if (a.is_string()) return Activation::from_name(a.get<std::string>());
    if (a.is_object() && a.value("kind", "") == "custom_sampled") {
      return Activation::custom_sampled(
          field(a, "knots_x").get<std::vector<double>>(),
          field(a, "knots_y").get<std::vector<double>>());
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("activation: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("activation: ") + e.what());
  }
  throw SchemaError("unrecognized activation");
}

}  // namespace

ImplicitNetwork network_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("network document must be an object");
  static const char* kKeys[] = {"n",  "n_u",  "n_g",  "activation", "W_x",
                                "W_u", "W_fx", "W_fu", "b",          "b_f"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : kKeys) known = known || it.key() == k;
    if (!known) throw SchemaError("unknown network field '" + it.key() + "'");
  }
  const int n = dim_field(j, "n");
  const int n_u = dim_field(j, "n_u");
  const int n_g = dim_field(j, "n_g");
  ImplicitNetwork net;
  net.activation = activation_from_json(field(j, "activation"));
  net.state_weights = matrix_from_json(field(j, "W_x"), "W_x", n, n);
  net.input_weights = matrix_from_json(field(j, "W_u"), "W_u", n, n_u);
  net.output_state_weights = matrix_from_json(field(j, "W_fx"), "W_fx", n_g, n);
  net.output_input_weights =
      matrix_from_json(field(j, "W_fu"), "W_fu", n_g, n_u);
  net.state_bias = vector_from_json(field(j, "b"), "b", n);
  net.output_bias = vector_from_json(field(j, "b_f"), "b_f", n_g);
  net.validate();
  return net;
}

void save_network(const std::string& path, const ImplicitNetwork& net) {
  write_json_file(path, network_to_json(net));
}

ImplicitNetwork load_network(const std::string& path) {
  return network_from_json(read_json_file(path));
}

}  // namespace robustify
