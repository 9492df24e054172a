#pragma once

// JSON activation descriptors, the exchange format between the CLI and the
// library: {"kind":"sign"}, {"kind":"constant","states":N},
// {"kind":"linear","states":N,"d0":...,"d1":...}, or
// {"kind":"general","base":A,"offsets":[...],"heights":[...]}.

#include <string>

#include <json.hpp>

#include "qprop/activation.hpp"

namespace qprop {

inline QuantizedActivation activation_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind"))
        throw std::domain_error("activation descriptor: missing \"kind\"");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "sign") return make_sign();
    if (kind == "constant") return make_constant_spaced(j.at("states").get<int>());
    if (kind == "linear")
        return make_linear_spaced(j.at("states").get<int>(), j.at("d0").get<double>(),
                                  j.at("d1").get<double>());
    if (kind == "general")
        return QuantizedActivation(j.at("base").get<double>(),
                                   j.at("offsets").get<std::vector<double>>(),
                                   j.at("heights").get<std::vector<double>>());
    throw std::domain_error("activation descriptor: unknown kind \"" + kind + "\"");
}

/// Accepts either a JSON object or the bare shorthands "sign" and "constant:N".
inline QuantizedActivation activation_from_string(const std::string& text) {
    if (!text.empty() && text.front() == '{')
        return activation_from_json(nlohmann::json::parse(text));
    if (text == "sign") return make_sign();
    if (text.rfind("constant:", 0) == 0)
        return make_constant_spaced(std::stoi(text.substr(9)));
    throw std::domain_error("activation descriptor: cannot parse \"" + text + "\"");
}

inline nlohmann::json activation_to_json(const QuantizedActivation& act) {
    return nlohmann::json{{"kind", "general"},
                          {"base", act.base()},
                          {"offsets", act.offsets()},
                          {"heights", act.heights()}};
}

}  // namespace qprop
