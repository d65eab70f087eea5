#pragma once

#include <string>

#include <json.hpp>

#include "robustify/network.hpp"

namespace robustify {

/// Document fields: n, n_u, n_g, activation, W_x, W_u, W_fx, W_fu, b, b_f.
/// `activation` is a name ("relu", "tanh", "sigmoid_shifted") or an object
/// {"kind": "custom_sampled", "knots_x": [...], "knots_y": [...]}.
nlohmann::json network_to_json(const ImplicitNetwork& net);
ImplicitNetwork network_from_json(const nlohmann::json& j);

void save_network(const std::string& path, const ImplicitNetwork& net);
ImplicitNetwork load_network(const std::string& path);

}  // namespace robustify
