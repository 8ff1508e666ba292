#pragma once

#include <iosfwd>
#include <vector>

#include <json.hpp>

#include "rprop/bounds.hpp"
#include "rprop/propagate.hpp"
#include "rprop/seqcore.hpp"
#include "rprop/xformer.hpp"

namespace rprop {

// Task lines: {"chain": [[a,b],...], "sigma": [...], "start_pair": m0, "m": k}.
// sigma and start_pair are 1-based.
nlohmann::json task_to_json(const ReasoningTask& task);
ReasoningTask task_from_json(const nlohmann::json& j);

// Blank lines are skipped; a bad line raises ParseError naming its line number.
std::vector<ReasoningTask> read_tasks(std::istream& in);
void write_tasks(std::ostream& out, const std::vector<ReasoningTask>& tasks);

nlohmann::json trace_to_json(const LayerTrace& trace);
nlohmann::json report_to_json(const BoundReport& report);
nlohmann::json decoded_to_json(const std::vector<std::vector<xf::DecodedNode>>& decoded);
nlohmann::json state_to_json(const xf::XfState& state, const std::vector<std::vector<xf::DecodedNode>>& decoded);

}  // namespace rprop
