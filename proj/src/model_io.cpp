#include "corrph/model_io.hpp"

#include <fstream>
#include <sstream>

namespace corrph {

using nlohmann::json;

namespace {

json matrix_json(const Matrix& A) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < A.cols(); ++j) row.push_back(A(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

json vector_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

const json& field(const json& doc, const char* name) {
    if (!doc.contains(name)) throw FormatError(std::string("missing field '") + name + "'");
    return doc.at(name);
}

Vector read_vector(const json& v, const char* name) {
    if (!v.is_array()) throw FormatError(std::string("field '") + name + "' must be an array");
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) throw FormatError(std::string("field '") + name + "' must hold numbers");
        out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
    }
    return out;
}

Matrix read_matrix(const json& m, const char* name) {
    if (!m.is_array() || m.empty()) throw FormatError(std::string("field '") + name + "' must be a non-empty array of rows");
    const std::size_t cols = m[0].is_array() ? m[0].size() : 0;
    Matrix out(static_cast<Eigen::Index>(m.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!m[i].is_array() || m[i].size() != cols) throw FormatError(std::string("field '") + name + "' is not rectangular");
        out.row(static_cast<Eigen::Index>(i)) = read_vector(m[i], name).transpose();
    }
    return out;
}

}  // namespace

std::string ModelFile::kind() const {
    switch (payload.index()) {
        case 0: return "phase_type";
        case 1: return "map";
        default: return "coupling";
    }
}

json to_json(const ModelFile& model) {
    json doc = {{"kind", model.kind()}, {"version", model_format_version}};
    if (const auto* phd = std::get_if<PhaseType>(&model.payload)) {
        doc["order"] = phd->order();
        doc["pi"] = vector_json(phd->pi());
        doc["D"] = matrix_json(phd->D());
    } else if (const auto* map = std::get_if<Map>(&model.payload)) {
        doc["order"] = map->order();
        doc["D0"] = matrix_json(map->D0());
        doc["D1"] = matrix_json(map->D1());
        doc["start"] = vector_json(map->embedded());
        doc["warnings"] = map->warnings();
    } else {
        const auto& c = std::get<CouplingRecord>(model.payload);
        doc["mode"] = c.mode;
        doc["flow"] = matrix_json(c.flow);
        doc["rho"] = c.rho;
        doc["objective"] = c.objective;
    }
    for (const auto& [key, value] : model.extra.items())
        if (!doc.contains(key)) doc[key] = value;
    return doc;
}

ModelFile model_from_json(const json& doc) {
    if (!doc.is_object()) throw FormatError("model document must be a JSON object");
    const json& kind = field(doc, "kind");
    const json& version = field(doc, "version");
    if (!version.is_number_integer() || version.get<int>() != model_format_version)
        throw FormatError("unsupported model format version");
    if (!kind.is_string()) throw FormatError("field 'kind' must be a string");
    const std::string k = kind.get<std::string>();
    if (k == "phase_type")
        return {PhaseType(read_vector(field(doc, "pi"), "pi"), read_matrix(field(doc, "D"), "D")), json::object()};
    if (k == "map") {
        Vector start = doc.contains("start") ? read_vector(doc.at("start"), "start") : Vector();
        return {Map(read_matrix(field(doc, "D0"), "D0"), read_matrix(field(doc, "D1"), "D1"), start), json::object()};
    }
    if (k == "coupling") {
        CouplingRecord c;
        const json& mode = field(doc, "mode");
        if (!mode.is_string()) throw FormatError("field 'mode' must be a string");
        c.mode = mode.get<std::string>();
        c.flow = read_matrix(field(doc, "flow"), "flow");
        if (!field(doc, "rho").is_number() || !field(doc, "objective").is_number())
            throw FormatError("coupling needs numeric 'rho' and 'objective'");
        c.rho = doc.at("rho").get<double>();
        c.objective = doc.at("objective").get<double>();
        return {c, json::object()};
    }
    throw FormatError("unknown model kind '" + k + "'");
}

std::string dump_model(const ModelFile& model) { return to_json(model).dump(2) + "\n"; }

ModelFile parse_model(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("malformed JSON: ") + e.what());
    }
    return model_from_json(doc);
}

ModelFile read_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot read '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_model(buffer.str());
}

}  // namespace corrph
