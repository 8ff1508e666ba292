#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "rprop/bounds.hpp"
#include "rprop/error.hpp"
#include "rprop/intmath.hpp"
#include "rprop/propagate.hpp"
#include "rprop/serialize.hpp"
#include "rprop/xformer.hpp"

namespace rprop::cli {

using nlohmann::json;

unsigned default_jobs() {
    if (const char* env = std::getenv("REASON_PROP_JOBS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
    }
    return 1;
}

namespace {

struct RunConfig {
    std::string input = "-";
    std::string output = "-";
    std::string format = "json";
    std::string witness;
    std::string dataset;
    std::string dump_state;
    std::uint64_t seed = 0;
    int s = 0;
    int L = 0;
    int m = 0;
    int ltilde = 0;
    int count = 1;
    bool unmasked = false;
    unsigned jobs = 1;
    long long width_cap = xf::kDefaultWidthCap;
};

// Runs fn(0..count-1) on up to `jobs` threads; results keep input order.
template <class R>
std::vector<R> parallel_map(std::size_t count, unsigned jobs, const std::function<R(std::size_t)>& fn) {
    std::vector<R> results(count);
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < count; k = next++) {
            try {
                results[k] = fn(k);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(count)));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

std::vector<ReasoningTask> load_tasks(const std::string& path) {
    if (path == "-") return read_tasks(std::cin);
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path);
    return read_tasks(in);
}

class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : out_(&fallback) {
        if (path != "-") {
            file_.open(path);
            if (!file_) throw Error(ErrorKind::ParseError, "cannot write " + path);
            out_ = &file_;
        }
    }
    std::ostream& stream() { return *out_; }

private:
    std::ofstream file_;
    std::ostream* out_;
};

void print_report_table(std::ostream& out, const BoundReport& r) {
    out << std::setw(6) << "layer" << std::setw(10) << "measured" << std::setw(8) << "lower" << std::setw(8)
        << "upper" << "  verdict\n";
    for (const auto& b : r.layers) {
        out << std::setw(6) << b.layer << std::setw(10);
        if (b.measured == b.measured_upper) out << b.measured;
        else out << (std::to_string(b.measured) + "/" + std::to_string(b.measured_upper));
        out << std::setw(8) << b.lower << std::setw(8) << b.upper << "  "
            << (!b.checked ? "info" : b.pass ? "pass" : "FAIL") << (b.checked && b.attains_upper ? " (upper attained)" : "")
            << '\n';
    }
}

int cmd_gen(const RunConfig& cfg, std::ostream& out) {
    std::vector<ReasoningTask> tasks;
    if (cfg.witness == "lower") {
        tasks.push_back(witness_lower(cfg.s));
    } else if (cfg.witness == "fractal") {
        tasks.push_back(witness_fractal(cfg.ltilde));
    } else if (!cfg.dataset.empty()) {
        DatasetSpec spec;
        spec.s = cfg.s;
        spec.count = cfg.count;
        spec.seed = cfg.seed;
        spec.split = cfg.dataset == "test" ? Split::Test : Split::Train;
        if (cfg.m > 0) spec.steps = cfg.m;
        tasks = gen_dataset(spec);
    } else {
        throw CLI::ValidationError("gen", "choose --witness or --dataset");
    }
    Sink sink(cfg.output, out);
    write_tasks(sink.stream(), tasks);
    return kOk;
}

int cmd_propagate(const RunConfig& cfg, std::ostream& out) {
    const auto tasks = load_tasks(cfg.input);
    const auto traces = parallel_map<LayerTrace>(tasks.size(), cfg.jobs, [&](std::size_t k) {
        return propagate(tasks[k], cfg.L, !cfg.unmasked);
    });
    Sink sink(cfg.output, out);
    for (std::size_t k = 0; k < traces.size(); ++k) {
        if (cfg.format == "table") {
            const auto q = info_quantity(traces[k]);
            sink.stream() << "task " << k + 1 << " (C per position)\n";
            for (std::size_t l = 0; l < q.C.size(); ++l) {
                sink.stream() << "  l=" << l << ':';
                for (int c : q.C[l]) sink.stream() << ' ' << c;
                sink.stream() << '\n';
            }
        } else {
            sink.stream() << trace_to_json(traces[k]).dump() << '\n';
        }
    }
    return kOk;
}

int cmd_verify(const RunConfig& cfg, std::ostream& out) {
    const auto tasks = load_tasks(cfg.input);
    const auto reports = parallel_map<BoundReport>(tasks.size(), cfg.jobs, [&](std::size_t k) {
        return verify_theorem_finite(tasks[k], cfg.L);
    });
    Sink sink(cfg.output, out);
    bool all = true;
    for (std::size_t k = 0; k < reports.size(); ++k) {
        all = all && reports[k].pass();
        if (cfg.format == "table") {
            sink.stream() << "task " << k + 1 << " s=" << tasks[k].s() << " valid up to l=" << reports[k].valid_up_to
                          << '\n';
            print_report_table(sink.stream(), reports[k]);
        } else {
            sink.stream() << json{{"task", k + 1}, {"report", report_to_json(reports[k])}}.dump() << '\n';
        }
    }
    return all ? kOk : kVerificationFailed;
}

int cmd_brute(const RunConfig& cfg, std::ostream& out) {
    const auto r = brute_force_max(cfg.s, cfg.L, cfg.jobs);
    const auto lower = pow2(cfg.L - 1), upper = pow3(cfg.L - 1);
    const bool checked = cfg.L <= validity_limit(static_cast<std::size_t>(cfg.s));
    const bool inside = lower <= r.max_c && r.max_c <= upper;
    Sink sink(cfg.output, out);
    if (cfg.format == "table") {
        sink.stream() << "s=" << cfg.s << " L=" << cfg.L << " max C=" << r.max_c << " envelope [" << lower << ", "
                      << upper << "]" << (checked ? (inside ? " pass" : " FAIL") : " info") << "\n  sigma:";
        for (int v : r.sigma.forward()) sink.stream() << ' ' << v;
        sink.stream() << "  start pair " << r.start_pair << "\n  tasks examined " << r.tasks_examined
                      << ", max effective steps " << r.max_effective_steps << '\n';
    } else {
        sink.stream() << json{{"s", cfg.s},
                              {"L", cfg.L},
                              {"max_c", r.max_c},
                              {"lower", lower},
                              {"upper", upper},
                              {"checked", checked},
                              {"pass", !checked || inside},
                              {"sigma", r.sigma.forward()},
                              {"start_pair", r.start_pair},
                              {"max_effective_steps", r.max_effective_steps},
                              {"tasks_examined", r.tasks_examined}}
                             .dump()
                      << '\n';
    }
    return !checked || inside ? kOk : kVerificationFailed;
}

struct XfOutcome {
    json line;
    json state;
    bool correct = false;
    bool no_answer = false;
    bool equivalent = false;
};

int cmd_xf(const RunConfig& cfg, std::ostream& out) {
    const auto tasks = load_tasks(cfg.input);
    if (!tasks.empty())
        for (const auto& t : tasks)
            if (t.n() != tasks.front().n())
                throw Error(ErrorKind::ParseError, "all tasks in one xf run must share the same length");
    const bool dump = !cfg.dump_state.empty();
    const auto outcomes = parallel_map<XfOutcome>(tasks.size(), cfg.jobs, [&](std::size_t k) {
        const auto& task = tasks[k];
        const int m = cfg.m > 0 ? cfg.m : task.steps;
        const auto scheme = xf::scheme_for(task, cfg.L, cfg.width_cap);
        const auto result = xf::forward(task, m, scheme);
        const auto decoded = xf::decode_trace(result.state, scheme);
        const auto mismatches = xf::trace_mismatches(decoded, propagate(task, cfg.L, true));

        std::optional<Token> truth;
        if (task.start_pair + m - 1 <= static_cast<int>(task.s())) {
            auto t = task;
            t.steps = m;
            truth = reasoning_result(t);
        }
        XfOutcome o;
        o.correct = truth && result.prediction == truth;
        o.no_answer = !result.prediction;
        o.equivalent = mismatches.empty();
        o.line = json{{"task", k + 1},
                      {"m", m},
                      {"case", xf::to_string(xf::case_classify(m, cfg.L))},
                      {"predicted", result.prediction ? json(result.prediction->value) : json(nullptr)},
                      {"truth", truth ? json(truth->value) : json(nullptr)},
                      {"correct", o.correct},
                      {"equivalent", o.equivalent},
                      {"d_m", scheme.d_m}};
        if (dump) o.state = state_to_json(result.state, decoded);
        return o;
    });

    Sink sink(cfg.output, out);
    std::size_t correct = 0, no_answer = 0, equivalent = 0;
    for (const auto& o : outcomes) {
        correct += o.correct;
        no_answer += o.no_answer;
        equivalent += o.equivalent;
        if (cfg.format == "table") {
            const auto& l = o.line;
            sink.stream() << "task " << l["task"] << " m=" << l["m"] << ' ' << l["case"].get<std::string>()
                          << " predicted=" << (l["predicted"].is_null() ? "NoAnswer" : l["predicted"].dump())
                          << " truth=" << (l["truth"].is_null() ? "-" : l["truth"].dump())
                          << (o.equivalent ? " equivalent" : " MISMATCH") << '\n';
        } else {
            sink.stream() << o.line.dump() << '\n';
        }
    }
    const double total = static_cast<double>(std::max<std::size_t>(1, outcomes.size()));
    json summary{{"tasks", outcomes.size()},
                 {"accuracy", static_cast<double>(correct) / total},
                 {"no_answer_rate", static_cast<double>(no_answer) / total},
                 {"equivalent", equivalent}};
    if (cfg.format == "table")
        sink.stream() << "accuracy " << summary["accuracy"].get<double>() << ", NoAnswer rate "
                      << summary["no_answer_rate"].get<double>() << ", equivalent " << equivalent << '/'
                      << outcomes.size() << '\n';
    else
        sink.stream() << json{{"summary", summary}}.dump() << '\n';

    if (dump) {
        std::ofstream f(cfg.dump_state);
        if (!f) throw Error(ErrorKind::ParseError, "cannot write " + cfg.dump_state);
        for (const auto& o : outcomes) f << o.state.dump() << '\n';
    }
    return equivalent == outcomes.size() ? kOk : kVerificationFailed;
}

int cmd_envelope(const RunConfig& cfg, std::ostream& out) {
    const auto [lo, hi] = corollary_envelope(cfg.L);
    const auto onset = partial_failure_onset(cfg.L);
    Sink sink(cfg.output, out);
    if (cfg.format == "table")
        sink.stream() << "L=" << cfg.L << " guaranteed steps " << lo << ", maximal steps " << hi
                      << ", partial failure onset " << onset << '\n';
    else
        sink.stream() << json{{"L", cfg.L}, {"min_steps", lo}, {"max_steps", hi}, {"partial_failure_onset", onset}}.dump()
                      << '\n';
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    cfg.jobs = default_jobs();

    CLI::App app{"Information propagation in reasoning sequences", "reason-prop"};
    app.require_subcommand(1);
    auto formats = CLI::IsMember({"json", "table"});

    auto* gen = app.add_subcommand("gen", "Write tasks as JSON lines");
    gen->add_option("--witness", cfg.witness)->check(CLI::IsMember({"lower", "fractal"}));
    gen->add_option("--dataset", cfg.dataset)->check(CLI::IsMember({"train", "test"}));
    gen->add_option("--s", cfg.s)->check(CLI::PositiveNumber);
    gen->add_option("--ltilde", cfg.ltilde)->check(CLI::Range(2, 8));
    gen->add_option("--count", cfg.count)->check(CLI::PositiveNumber);
    gen->add_option("--seed", cfg.seed);
    gen->add_option("--m", cfg.m)->check(CLI::PositiveNumber);
    gen->add_option("--out", cfg.output);

    auto* prop = app.add_subcommand("propagate", "Run the propagation rules on tasks");
    auto* verify = app.add_subcommand("verify", "Check measured information against the bounds");
    auto* xfc = app.add_subcommand("xf", "Run the constructed transformer");
    for (auto* sub : {prop, verify, xfc}) {
        sub->add_option("--in", cfg.input, "task file, - for stdin");
        sub->add_option("--out", cfg.output);
        sub->add_option("--L", cfg.L)->required()->check(CLI::Range(1, 12));
        sub->add_option("--format", cfg.format)->check(formats);
        sub->add_option("--jobs", cfg.jobs)->check(CLI::PositiveNumber);
    }
    prop->add_flag("--masked", "causal mask (default)");
    prop->add_flag("--unmasked", cfg.unmasked, "drop the causal mask");
    xfc->add_option("--m", cfg.m, "override each task's step count")->check(CLI::PositiveNumber);
    xfc->add_option("--dump-state", cfg.dump_state, "write decoded nodes and activations per task");
    xfc->add_option("--width-cap", cfg.width_cap, "largest model width to build")->check(CLI::PositiveNumber);

    auto* brute = app.add_subcommand("brute", "Exhaustive maximum over layouts and start pairs");
    brute->add_option("--s", cfg.s)->required()->check(CLI::Range(1, 7));
    brute->add_option("--L", cfg.L)->required()->check(CLI::Range(1, 12));
    brute->add_option("--format", cfg.format)->check(formats);
    brute->add_option("--jobs", cfg.jobs)->check(CLI::PositiveNumber);
    brute->add_option("--out", cfg.output);

    auto* env = app.add_subcommand("envelope", "Step-count envelope for L layers");
    env->add_option("--L", cfg.L)->required()->check(CLI::Range(1, 30));
    env->add_option("--format", cfg.format)->check(formats);
    env->add_option("--out", cfg.output);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
        if (gen->parsed()) {
            if (cfg.witness == "lower" && cfg.s < 1) throw CLI::ValidationError("--s", "required for --witness lower");
            if (cfg.witness == "fractal" && cfg.ltilde < 2)
                throw CLI::ValidationError("--ltilde", "required for --witness fractal");
            if (!cfg.dataset.empty() && cfg.s < 1) throw CLI::ValidationError("--s", "required for --dataset");
            return cmd_gen(cfg, out);
        }
        if (prop->parsed()) return cmd_propagate(cfg, out);
        if (verify->parsed()) return cmd_verify(cfg, out);
        if (xfc->parsed()) return cmd_xf(cfg, out);
        if (brute->parsed()) return cmd_brute(cfg, out);
        if (env->parsed()) return cmd_envelope(cfg, out);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}

}  // namespace rprop::cli
