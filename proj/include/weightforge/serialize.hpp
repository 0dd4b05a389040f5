#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "weightforge/model.hpp"

namespace wf::model {

// Self-describing binary weights file:
//   magic "WFNN" | u16 format version | u8 kind tag | dimension header |
//   little-endian f64 payload per tensor in declared order.
void save_network(const NetworkState& state, const std::string& path);
NetworkState load_network(const std::string& path);

// Human-inspectable dump: spec dimensions plus every tensor with its shape
// and flat row-major values.
nlohmann::json network_to_json(const NetworkState& state);

}  // namespace wf::model
