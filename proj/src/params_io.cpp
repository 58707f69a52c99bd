#include "anocast/params_io.hpp"

#include <fstream>
#include <map>

#include <json.hpp>

namespace anocast {

namespace {
constexpr const char* kSchema = "anocast-params-v1";
}

namespace {

nlohmann::json read_doc(const std::string& path, const std::string& expected_model) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (doc.value("schema", "") != kSchema)
        throw ParseError(path + ": unsupported schema tag");
    if (doc.value("model", "") != expected_model)
        throw ParseError(path + ": expected model '" + expected_model + "', found '" +
                         doc.value("model", "") + "'");
    return doc;
}

} // namespace

void save_params(const std::string& path, const std::string& model_name,
                 const std::vector<Param>& params,
                 const std::map<std::string, double>& meta) {
    nlohmann::json doc;
    doc["schema"] = kSchema;
    doc["model"] = model_name;
    doc["meta"] = meta;
    auto& list = doc["params"] = nlohmann::json::array();
    for (const auto& p : params) {
        nlohmann::json entry;
        entry["name"] = p.name;
        auto& shape = entry["shape"] = nlohmann::json::array();
        for (std::size_t i = 0; i < p.node->value.rank(); ++i)
            shape.push_back(p.node->value.shape[i]);
        entry["data"] = p.node->value.data;
        list.push_back(std::move(entry));
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << doc.dump();
    if (!out) throw DataError("failed writing " + path);
}

std::map<std::string, double> load_meta(const std::string& path,
                                        const std::string& expected_model) {
    const auto doc = read_doc(path, expected_model);
    std::map<std::string, double> meta;
    if (doc.contains("meta"))
        for (const auto& [key, value] : doc.at("meta").items())
            meta[key] = value.get<double>();
    return meta;
}

void load_params(const std::string& path, const std::string& expected_model,
                 std::vector<Param>& params) {
    const auto doc = read_doc(path, expected_model);

    std::map<std::string, const nlohmann::json*> stored;
    for (const auto& entry : doc.at("params"))
        stored[entry.at("name").get<std::string>()] = &entry;
    if (stored.size() != params.size())
        throw ParseError(path + ": parameter count mismatch");

    for (auto& p : params) {
        auto it = stored.find(p.name);
        if (it == stored.end()) throw ParseError(path + ": missing parameter " + p.name);
        const auto& entry = *it->second;
        const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        const Tensor& cur = p.node->value;
        bool same = shape.size() == cur.rank();
        for (std::size_t i = 0; same && i < shape.size(); ++i) same = shape[i] == cur.shape[i];
        if (!same) throw ParseError(path + ": shape mismatch for " + p.name);
        auto data = entry.at("data").get<std::vector<double>>();
        if (data.size() != cur.numel())
            throw ParseError(path + ": data length mismatch for " + p.name);
        p.node->value.data = std::move(data);
    }
}

} // namespace anocast
