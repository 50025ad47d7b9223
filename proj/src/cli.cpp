#include "qdl/cli.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <regex>
#include <sstream>

#include <CLI11.hpp>

#include "qdl/ledger.hpp"
#include "qdl/network.hpp"
#include "qdl/teleport.hpp"

namespace qdl::cli {

namespace {

constexpr const char* kExitCodesHelp = "Exit codes:\n"
                                       "  0  success\n"
                                       "  2  usage error, unparsable state or invalid config\n"
                                       "  3  tamper or attack detected (or teleport fidelity failure)";

std::string format_amplitude(Amplitude a) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(6) << a.real() << (a.imag() < 0 ? '-' : '+') << std::abs(a.imag()) << 'i';
    return s.str();
}

std::string format_ket(const Ket& v) {
    std::string out = "(";
    for (std::size_t i = 0; i < v.dimension(); ++i) {
        if (i) {
            out += ", ";
        }
        out += format_amplitude(v[i]);
    }
    return out + ")";
}

bool write_file(const std::string& path, const std::string& text, std::ostream& err) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        err << "error: cannot write " << path << "\n";
        return false;
    }
    f << text;
    return static_cast<bool>(f);
}

struct TeleportDemoArgs {
    std::string state;
    bool random = false;
    std::uint64_t seed = 0;
    std::string json_path;
};

int teleport_demo(const TeleportDemoArgs& a, std::ostream& out, std::ostream& err) {
    Ket g = Ket::basis(1, 0);
    if (a.random) {
        Rng rng(a.seed);
        g = random_qubit(rng);
    } else {
        auto parsed = parse_state(a.state);
        if (!parsed) {
            err << "error: cannot parse state '" << a.state << "' (expected \"a,b\" with a, b like 0.6 or 0.5+0.5i)\n";
            return kExitUsage;
        }
        if (parsed->norm() == 0.0) {
            err << "error: state has zero norm\n";
            return kExitUsage;
        }
        if (std::abs(parsed->norm() - 1.0) > 1e-6) {
            err << "warning: state norm " << parsed->norm() << " != 1, normalizing\n";
            parsed = parsed->normalized();
        }
        g = *parsed;
    }

    const auto pipeline = teleport::build_canonical_pipeline();
    const auto trace = teleport::run_unitary(pipeline, g);
    out << "input |g> = " << format_ket(g) << "\n";
    for (std::size_t s = 0; s < trace.stage_vectors.size(); ++s) {
        out << "stage " << std::setw(2) << s + 1 << " [" << pipeline.steps[s].label << "] "
            << format_ket(trace.stage_vectors[s]) << "\n";
    }

    const auto report = teleport::verify_factorization(trace, g);
    out << "factorization holds: " << (report.holds ? "yes" : "no") << " (trace distance " << std::scientific
        << std::setprecision(3) << report.trace_distance << std::defaultfloat << ")\n";

    const auto outcome = teleport::run_measured(g, a.seed);
    std::string corrections;
    for (auto p : outcome.corrections) {
        corrections += teleport::to_string(p);
    }
    out << "measurement (m1, m2) = (" << outcome.record.outcomes[0] << ", " << outcome.record.outcomes[1]
        << "), probability " << std::setprecision(6) << outcome.record.probability << "\n";
    out << "corrections: " << (corrections.empty() ? "none" : corrections) << "\n";
    out << "output = " << format_ket(outcome.output_state) << "\n";
    out << "fidelity = " << std::setprecision(12) << outcome.fidelity_vs_input << "\n";

    if (!a.json_path.empty() && !write_file(a.json_path, teleport::trace_to_json(trace).dump(2) + "\n", err)) {
        return kExitUsage;
    }
    return outcome.fidelity_vs_input >= 1.0 - kPipelineTol ? kExitOk : kExitTamper;
}

std::optional<Json> load_json(const std::string& path, std::ostream& err) {
    std::ifstream f(path);
    if (!f) {
        err << "error: cannot open " << path << "\n";
        return std::nullopt;
    }
    try {
        return Json::parse(f);
    } catch (const Json::parse_error& e) {
        err << "error: " << path << " is not valid JSON: " << e.what() << "\n";
        return std::nullopt;
    }
}

struct LedgerRunArgs {
    std::string config_path;
    std::string out_path;
    std::string events_path;
};

int ledger_run(const LedgerRunArgs& a, std::ostream& out, std::ostream& err) {
    const auto doc = load_json(a.config_path, err);
    if (!doc) {
        return kExitUsage;
    }
    network::ScenarioConfig cfg;
    try {
        cfg = network::parse_scenario(*doc);
    } catch (const network::ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    const auto result = network::run_scenario(cfg);

    const auto& sender = result.final_chains.at(cfg.nodes[0].label);
    const auto& receiver = result.final_chains.at(cfg.nodes[1].label);
    const auto verification = ledger::verify_chain(receiver);
    const bool chains_equal = sender == receiver;
    const auto& stats = result.check_statistics;

    out << "blocks appended: " << receiver.blocks.size() - 1 << " of " << cfg.payloads.size()
        << " (rejected " << result.rejected_appends << ")\n";
    out << "receiver chain valid: " << (verification.valid ? "yes" : "no") << "\n";
    out << "chains equal: " << (chains_equal ? "yes" : "no") << "\n";
    out << "check pairs: " << stats.pairs_tested << ", mismatches: " << stats.mismatches
        << ", detected: " << (stats.detected ? "yes" : "no") << "\n";

    Json j = network::result_to_json(result);
    if (!a.out_path.empty() && !write_file(a.out_path, j.dump(2) + "\n", err)) {
        return kExitUsage;
    }
    if (!a.events_path.empty() && !write_file(a.events_path, network::event_log_jsonl(result), err)) {
        return kExitUsage;
    }

    const bool tampered = stats.detected || result.rejected_appends > 0 || !chains_equal || !verification.valid;
    if (tampered) {
        out << "TAMPER DETECTED\n";
        return kExitTamper;
    }
    return kExitOk;
}

struct AttackRunArgs {
    std::size_t check_pairs = 16;
    std::size_t runs = 1000;
    std::size_t payloads = 0;
    std::string basis = "Z";
    std::uint64_t seed = 0;
    std::string json_path;
};

int attack_run(const AttackRunArgs& a, std::ostream& out, std::ostream& err) {
    Basis basis;
    try {
        basis = parse_basis(a.basis);
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    if (a.check_pairs == 0 || a.runs == 0) {
        err << "error: --check-pairs and --runs must be positive\n";
        return kExitUsage;
    }

    network::ScenarioConfig cfg;
    cfg.nodes = {{"alice"}, {"bob"}};
    for (std::size_t i = 0; i < a.payloads; ++i) {
        cfg.payloads.push_back({static_cast<std::uint8_t>(i)});
    }
    cfg.check_pairs = a.check_pairs;

    std::size_t detected = 0;
    for (std::size_t r = 0; r < a.runs; ++r) {
        const std::uint64_t seed = a.seed + r;
        cfg.attacker = network::AttackerConfig{true, basis, seed ^ 0x9e3779b97f4a7c15ULL};
        if (network::run_scenario(cfg, seed).check_statistics.detected) {
            ++detected;
        }
    }

    const double per_pair = network::exact_detection_probability(basis);
    const double expected = 1.0 - network::undetected_probability(basis, a.check_pairs);
    const double rate = static_cast<double>(detected) / static_cast<double>(a.runs);
    const double sigma = std::sqrt(expected * (1.0 - expected) / static_cast<double>(a.runs));

    out << std::setprecision(6);
    out << "attacker basis: " << to_string(basis) << ", check pairs: " << a.check_pairs << ", runs: " << a.runs
        << "\n";
    out << "per-pair detection probability (exact): " << per_pair << "\n";
    out << "detection probability (exact): " << expected << "\n";
    out << "detection rate (empirical): " << rate << " (" << detected << "/" << a.runs << "), sigma " << sigma
        << "\n";

    if (!a.json_path.empty()) {
        Json j;
        j["attacker_basis"] = to_string(basis);
        j["check_pairs"] = a.check_pairs;
        j["runs"] = a.runs;
        j["seed"] = a.seed;
        j["per_pair_detection_exact"] = per_pair;
        j["detection_exact"] = expected;
        j["detected_runs"] = detected;
        j["detection_rate"] = rate;
        j["sigma"] = sigma;
        if (!write_file(a.json_path, j.dump(2) + "\n", err)) {
            return kExitUsage;
        }
    }
    return kExitOk;
}

int stats(std::ostream& out) {
    const auto s = teleport::pipeline_stats(teleport::build_canonical_pipeline());
    Json j;
    j["stages"] = s.stage_operator_count;
    j["factor_matrices"] = s.factor_matrix_count;
    j["intermediate_vectors"] = s.intermediate_vector_count;
    j["total"] = s.total_matrix_count;
    j["qubits_for_1e12_bits"] = ledger::qubits_required(1'000'000'000'000ULL);
    out << j.dump() << "\n";
    return kExitOk;
}

} // namespace

std::optional<Amplitude> parse_amplitude(const std::string& text) {
    static const std::regex re(R"(^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(?:\s*([+-])\s*((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)i)?\s*$)");
    std::smatch m;
    if (!std::regex_match(text, m, re)) {
        return std::nullopt;
    }
    const double re_part = std::stod(m[1].str());
    double im_part = 0.0;
    if (m[2].matched) {
        im_part = std::stod(m[3].str());
        if (m[2].str() == "-") {
            im_part = -im_part;
        }
    }
    if (!std::isfinite(re_part) || !std::isfinite(im_part)) {
        return std::nullopt;
    }
    return Amplitude{re_part, im_part};
}

std::optional<Ket> parse_state(const std::string& text) {
    const auto comma = text.find(',');
    if (comma == std::string::npos || text.find(',', comma + 1) != std::string::npos) {
        return std::nullopt;
    }
    const auto a = parse_amplitude(text.substr(0, comma));
    const auto b = parse_amplitude(text.substr(comma + 1));
    if (!a || !b) {
        return std::nullopt;
    }
    return Ket(*a, *b);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Quantum distributed ledger simulator", "qdl"};
    app.footer(kExitCodesHelp);
    app.require_subcommand(1, 1);

    TeleportDemoArgs demo;
    auto* demo_cmd = app.add_subcommand("teleport-demo", "Teleport one qubit through the ten-stage pipeline");
    auto* state_opt = demo_cmd->add_option("--state", demo.state, "Amplitudes \"a,b\", each \"re\" or \"re+imi\"");
    auto* random_flag = demo_cmd->add_flag("--random", demo.random, "Use a seeded random state");
    state_opt->excludes(random_flag);
    demo_cmd->add_option("--seed", demo.seed, "Seed for measurement and --random");
    demo_cmd->add_option("--json", demo.json_path, "Write the stage trace as JSON");

    LedgerRunArgs ledger_args;
    auto* ledger_cmd = app.add_subcommand("ledger-run", "Run a two-node ledger scenario from a JSON config");
    ledger_cmd->add_option("--config", ledger_args.config_path, "Scenario config JSON")->required();
    ledger_cmd->add_option("--out", ledger_args.out_path, "Write the scenario result JSON");
    ledger_cmd->add_option("--events", ledger_args.events_path, "Write the event log as JSON lines");

    AttackRunArgs attack;
    auto* attack_cmd = app.add_subcommand("attack-run", "Measure intercept-resend detection over many seeded runs");
    attack_cmd->add_option("--check-pairs", attack.check_pairs, "Check pairs per run")->capture_default_str();
    attack_cmd->add_option("--runs", attack.runs, "Number of seeded runs")->capture_default_str();
    attack_cmd->add_option("--payloads", attack.payloads, "Blocks appended per run")->capture_default_str();
    attack_cmd->add_option("--basis", attack.basis, "Attacker basis, Z or X")->capture_default_str();
    attack_cmd->add_option("--seed", attack.seed, "First seed")->capture_default_str();
    attack_cmd->add_option("--json", attack.json_path, "Write the study summary as JSON");

    auto* stats_cmd = app.add_subcommand("stats", "Print pipeline accounting and qubit sizing");
    for (auto* cmd : {demo_cmd, ledger_cmd, attack_cmd, stats_cmd}) {
        cmd->footer(kExitCodesHelp);
    }

    std::vector<const char*> argv{"qdl"};
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }

    if (demo_cmd->parsed()) {
        if (!demo.random && demo.state.empty()) {
            err << "error: teleport-demo needs --state or --random\n" << demo_cmd->help();
            return kExitUsage;
        }
        return teleport_demo(demo, out, err);
    }
    if (ledger_cmd->parsed()) {
        return ledger_run(ledger_args, out, err);
    }
    if (attack_cmd->parsed()) {
        return attack_run(attack, out, err);
    }
    if (stats_cmd->parsed()) {
        return stats(out);
    }
    return kExitUsage;
}

} // namespace qdl::cli
