#pragma once

#include "corrph/map.hpp"
#include "corrph/phase_type.hpp"

#include <json.hpp>

#include <string>
#include <variant>

namespace corrph {

constexpr int model_format_version = 1;

/// Malformed or unreadable model document.
class FormatError : public Error {
public:
    using Error::Error;
};

struct CouplingRecord {
    std::string mode;  // "parallel", "sequential" or "map"
    Matrix flow;
    double rho = 0.0;
    double objective = 0.0;
};

/// One model with a "kind" discriminator; `extra` carries derived
/// quantities (bounds, autocorrelation, ...) that are not read back.
struct ModelFile {
    std::variant<PhaseType, Map, CouplingRecord> payload;
    nlohmann::json extra = nlohmann::json::object();

    std::string kind() const;
};

nlohmann::json to_json(const ModelFile& model);
ModelFile model_from_json(const nlohmann::json& doc);

/// Doubles are written in shortest round-trip form, so parse(dump(x)) == x.
std::string dump_model(const ModelFile& model);
ModelFile parse_model(const std::string& text);
ModelFile read_model_file(const std::string& path);

}  // namespace corrph
