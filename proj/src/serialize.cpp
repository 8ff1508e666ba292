#include "rprop/serialize.hpp"

#include <istream>
#include <ostream>
#include <string>

#include "rprop/error.hpp"

namespace rprop {

using nlohmann::json;

json task_to_json(const ReasoningTask& task) {
    json chain = json::array();
    for (const auto& p : task.seq.chain.pairs()) chain.push_back({p.first.value, p.second.value});
    return json{{"chain", chain}, {"sigma", task.seq.sigma.forward()}, {"start_pair", task.start_pair},
                {"m", task.steps}};
}

ReasoningTask task_from_json(const json& j) {
    try {
        std::vector<ReasoningPair> pairs;
        for (const auto& p : j.at("chain")) {
            if (!p.is_array() || p.size() != 2) throw Error(ErrorKind::ParseError, "pairs are [first, second]");
            pairs.push_back({Token{p[0].get<std::int64_t>()}, Token{p[1].get<std::int64_t>()}});
        }
        auto chain = validate_chain(pairs);
        auto sigma = Permutation::from_forward(j.at("sigma").get<std::vector<int>>());
        return attach_start(build_sequence(chain, sigma), j.at("start_pair").get<int>(), j.at("m").get<int>());
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::ParseError) throw;
        throw Error(ErrorKind::ParseError, e.what());
    }
}

std::vector<ReasoningTask> read_tasks(std::istream& in) {
    std::vector<ReasoningTask> tasks;
    std::string line;
    for (std::size_t number = 1; std::getline(in, line); ++number) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            tasks.push_back(task_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw Error(ErrorKind::ParseError, "line " + std::to_string(number) + ": " + e.what());
        }
    }
    return tasks;
}

void write_tasks(std::ostream& out, const std::vector<ReasoningTask>& tasks) {
    for (const auto& t : tasks) out << task_to_json(t).dump() << '\n';
}

namespace {

json tokens_json(const std::vector<Token>& v) {
    json a = json::array();
    for (Token t : v) a.push_back(t.value);
    return a;
}

}  // namespace

json trace_to_json(const LayerTrace& trace) {
    json layers = json::array();
    for (const auto& layer : trace.layers) {
        json nodes = json::array();
        for (const auto& node : layer) nodes.push_back({{"values", tokens_json(node.values)}, {"indices", node.indices}});
        layers.push_back(std::move(nodes));
    }
    return json{{"n", trace.n}, {"L", trace.L}, {"masked", trace.masked}, {"layers", layers}};
}

json report_to_json(const BoundReport& report) {
    json layers = json::array();
    for (const auto& b : report.layers)
        layers.push_back({{"layer", b.layer},
                          {"measured", b.measured},
                          {"measured_upper", b.measured_upper},
                          {"lower", b.lower},
                          {"upper", b.upper},
                          {"checked", b.checked},
                          {"pass", b.pass},
                          {"attains_lower", b.attains_lower},
                          {"attains_upper", b.attains_upper}});
    json j{{"layers", layers},
           {"valid_up_to", report.valid_up_to},
           {"pass", report.pass()},
           {"upper_bound_attained", report.upper_attained()}};
    if (report.probe) j["probe"] = report.probe->value;
    return j;
}

json decoded_to_json(const std::vector<std::vector<xf::DecodedNode>>& decoded) {
    json layers = json::array();
    for (const auto& layer : decoded) {
        json nodes = json::array();
        for (const auto& node : layer)
            nodes.push_back(
                {{"position", node.position}, {"values", tokens_json(node.values)}, {"alignment", node.alignment}});
        layers.push_back(std::move(nodes));
    }
    return layers;
}

json state_to_json(const xf::XfState& state, const std::vector<std::vector<xf::DecodedNode>>& decoded) {
    json activations = json::array();
    for (const auto& layer : state.X) {
        json rows = json::array();
        for (const auto& row : layer) {
            json entries = json::array();
            for (const auto& [c, v] : row) entries.push_back({c, v});
            rows.push_back(std::move(entries));
        }
        activations.push_back(std::move(rows));
    }
    return json{{"tokens", tokens_json(state.tokens)}, {"decoded", decoded_to_json(decoded)},
                {"activations", activations}};
}

}  // namespace rprop
