#pragma once

#include <map>
#include <string>
#include <vector>

#include "anocast/nn.hpp"

namespace anocast {

// Versioned JSON persistence for named parameter sets. Values round-trip
// bit for bit (shortest-representation doubles). `meta` carries numeric
// architecture fields needed to rebuild the model before loading.
void save_params(const std::string& path, const std::string& model_name,
                 const std::vector<Param>& params,
                 const std::map<std::string, double>& meta = {});

// Reads just the meta block (model identity is checked).
std::map<std::string, double> load_meta(const std::string& path,
                                        const std::string& expected_model);

// Loads values into an existing parameter set. Every stored entry must match
// a parameter of the same name and shape, and vice versa.
void load_params(const std::string& path, const std::string& expected_model,
                 std::vector<Param>& params);

} // namespace anocast
