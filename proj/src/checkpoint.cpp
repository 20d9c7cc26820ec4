#include "lanedrop/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace lanedrop {

using nlohmann::json;

std::string checkpoint_to_string(std::span<const ConstParamRef> tensors) {
    json doc;
    doc["format"] = kCheckpointFormat;
    doc["version"] = kCheckpointVersion;
    json list = json::array();
    for (const auto& t : tensors) {
        json entry;
        entry["name"] = t.name;
        entry["shape"] = {t.value->rows(), t.value->cols()};
        entry["values"] = std::vector<double>(t.value->data().begin(), t.value->data().end());
        list.push_back(std::move(entry));
    }
    doc["tensors"] = std::move(list);
    return doc.dump(1);
}

void write_checkpoint(const std::filesystem::path& path, std::span<const ConstParamRef> tensors) {
    std::ofstream out(path);
    if (!out) {
        throw CheckpointError("cannot open checkpoint for writing: " + path.string());
    }
    out << checkpoint_to_string(tensors) << '\n';
    if (!out) {
        throw CheckpointError("failed writing checkpoint: " + path.string());
    }
}

void checkpoint_from_string(const std::string& text, std::span<const ParamRef> tensors) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw CheckpointError(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    if (doc.value("format", std::string{}) != kCheckpointFormat) {
        throw CheckpointError("not a lanedrop checkpoint");
    }
    if (doc.value("version", -1) != kCheckpointVersion) {
        throw CheckpointError("unsupported checkpoint version " + doc.value("version", json(-1)).dump());
    }
    std::unordered_map<std::string, const json*> by_name;
    for (const auto& entry : doc.at("tensors")) {
        by_name[entry.at("name").get<std::string>()] = &entry;
    }
    for (const auto& t : tensors) {
        const auto it = by_name.find(t.name);
        if (it == by_name.end()) {
            throw CheckpointError("checkpoint is missing tensor '" + t.name + "'");
        }
        const json& entry = *it->second;
        const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        if (shape.size() != 2 || shape[0] != t.value->rows() || shape[1] != t.value->cols()) {
            std::ostringstream msg;
            msg << "tensor '" << t.name << "' has shape " << entry.at("shape").dump() << " in checkpoint, expected ["
                << t.value->rows() << "," << t.value->cols() << "]";
            throw CheckpointError(msg.str());
        }
        const auto values = entry.at("values").get<std::vector<double>>();
        if (values.size() != t.value->size()) {
            throw CheckpointError("tensor '" + t.name + "' has the wrong number of values");
        }
        std::copy(values.begin(), values.end(), t.value->data().begin());
    }
}

void read_checkpoint(const std::filesystem::path& path, std::span<const ParamRef> tensors) {
    std::ifstream in(path);
    if (!in) {
        throw CheckpointError("cannot open checkpoint: " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    checkpoint_from_string(buffer.str(), tensors);
}

} // namespace lanedrop
