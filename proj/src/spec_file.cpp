#include "dagsim/spec_file.hpp"

#include <fstream>
#include <sstream>

#include "dagsim/error.hpp"

namespace dagsim {

namespace {

std::vector<std::string> name_list(const Json& v) {
    if (v.is_string()) return {v.get<std::string>()};
    if (!v.is_array() || v.empty()) throw std::invalid_argument("'name' must be a string or a non-empty array");
    std::vector<std::string> out;
    for (const auto& x : v) {
        if (!x.is_string()) throw std::invalid_argument("'name' entries must be strings");
        out.push_back(x.get<std::string>());
    }
    return out;
}

NodeSpec read_node(const Json& j, const std::string& name) {
    for (const auto& [k, v] : j.items()) {
        (void)v;
        if (k != "name" && k != "kind" && k != "type" && k != "params" && k != "formula" && k != "parents" &&
            k != "output")
            throw std::invalid_argument("unknown key '" + k + "'");
    }
    if (!j.contains("type") || !j["type"].is_string()) throw std::invalid_argument("'type' must be a string");
    const auto type = j["type"].get<std::string>();
    Json params = Json::object();
    if (j.contains("params")) {
        if (!j["params"].is_object()) throw std::invalid_argument("'params' must be an object");
        params = j["params"];
    }
    std::optional<std::string> formula;
    if (j.contains("formula")) {
        if (!j["formula"].is_string()) throw std::invalid_argument("'formula' must be a string");
        formula = j["formula"].get<std::string>();
    }
    NodeSpec s = node(name, type, params, formula);
    if (j.contains("kind")) {
        const auto& k = j["kind"];
        if (k == "root") s.kind = NodeKind::Root;
        else if (k == "child") s.kind = NodeKind::Child;
        else if (k == "td") s.kind = NodeKind::TimeDependent;
        else throw std::invalid_argument("'kind' must be \"root\", \"child\" or \"td\"");
    } else if (is_event_type(type)) {
        s.kind = NodeKind::TimeDependent;
    }
    if (j.contains("parents")) {
        const auto& p = j["parents"];
        if (!p.is_array()) throw std::invalid_argument("'parents' must be an array of names");
        std::vector<std::string> parents;
        for (const auto& x : p) {
            if (!x.is_string()) throw std::invalid_argument("'parents' must be an array of names");
            parents.push_back(x.get<std::string>());
        }
        s.parents = std::move(parents);
    }
    if (j.contains("output")) {
        if (!j["output"].is_string()) throw std::invalid_argument("'output' must be a string");
        s.output = parse_output_coercion(j["output"].get<std::string>());
    }
    return s;
}

}  // namespace

SpecFile parse_spec(const std::string& text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        fail(ErrorCode::ParseError, std::string("spec is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) fail(ErrorCode::ValidationError, "spec must be a JSON object");

    SpecFile out;
    out.text = text;
    std::vector<std::string> problems;
    for (const auto& [k, v] : doc.items()) {
        (void)v;
        if (k != "nodes" && k != "defaults") problems.push_back("unknown top-level key '" + k + "'");
    }
    if (doc.contains("defaults")) {
        const auto& d = doc["defaults"];
        if (!d.is_object()) {
            problems.push_back("'defaults' must be an object");
        } else {
            for (const auto& [k, v] : d.items()) {
                if (k == "seed" && v.is_number_unsigned()) out.seed = v.get<std::uint64_t>();
                else if (k == "n" && v.is_number_unsigned()) out.n = v.get<std::size_t>();
                else if (k == "seed" || k == "n") problems.push_back("defaults." + k + " must be a non-negative integer");
                else problems.push_back("unknown key 'defaults." + k + "'");
            }
        }
    }

    if (!doc.contains("nodes") || !doc["nodes"].is_array()) {
        problems.push_back("'nodes' must be an array");
    } else if (doc["nodes"].empty()) {
        problems.push_back("no nodes");
    } else {
        std::size_t index = 0;
        for (const auto& j : doc["nodes"]) {
            const std::string where = "nodes[" + std::to_string(index++) + "]";
            if (!j.is_object()) {
                problems.push_back(where + ": must be an object");
                continue;
            }
            std::vector<std::string> names;
            try {
                if (!j.contains("name")) throw std::invalid_argument("'name' is required");
                names = name_list(j["name"]);
            } catch (const std::exception& e) {
                problems.push_back(where + ": " + e.what());
                continue;
            }
            for (const auto& name : names) {
                try {
                    out.dag = add_node(std::move(out.dag), read_node(j, name));
                } catch (const Error& e) {
                    problems.push_back(where + " '" + name + "': " + e.what());
                } catch (const std::exception& e) {
                    problems.push_back(where + " '" + name + "': " + e.what());
                }
            }
        }
    }

    if (!problems.empty()) {
        std::string msg = problems.size() == 1 ? problems.front() : std::to_string(problems.size()) + " problems:";
        if (problems.size() > 1)
            for (const auto& p : problems) msg += "\n  - " + p;
        fail(ErrorCode::ValidationError, msg);
    }
    validate(out.dag);
    return out;
}

SpecFile load_spec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IOError, "cannot read spec file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_spec(buf.str());
}

}  // namespace dagsim
