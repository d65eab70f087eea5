#pragma once

#include <string>

#include <Eigen/Dense>
#include <json.hpp>

namespace robustify {

/// Row-major nested arrays; an r x 0 matrix is written as r empty rows.
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
nlohmann::json vector_to_json(const Eigen::VectorXd& v);

/// Throws SchemaError when `j` is not a rectangular array of numbers.
/// `rows` / `cols` of -1 accept any size; otherwise a mismatch throws
/// DimensionMismatch naming `what`.
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& what,
                                 Eigen::Index rows = -1, Eigen::Index cols = -1);
Eigen::VectorXd vector_from_json(const nlohmann::json& j, const std::string& what,
                                 Eigen::Index size = -1);

/// Reads a whole file into a JSON document; I/O failures throw
/// std::runtime_error and parse failures SchemaError.
nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace robustify
