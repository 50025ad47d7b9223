#pragma once

// Two-node discrete-event simulation: a classical control channel, a quantum
// data channel, EPR distribution, digest teleportation, correlation checks and
// an optional intercept-resend attacker on the data channel.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "qdl/ledger.hpp"
#include "qdl/qstate.hpp"

namespace qdl::network {

class SimulatorError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

struct NodeId {
    std::string label;

    friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

/// Reference to one physical qubit. A handle is single-use: sending,
/// measuring or intercepting consumes it and any replacement gets a new id.
struct QubitHandle {
    std::uint64_t id = 0;

    friend bool operator==(const QubitHandle&, const QubitHandle&) = default;
};

/// Owns the joint state of every live qubit. Qubits that interact are merged
/// into one register; measured qubits are factored out and discarded.
class QuantumStore {
  public:
    QubitHandle prepare(const Ket& single_qubit);
    std::pair<QubitHandle, QubitHandle> prepare_pair(const Ket& two_qubits);

    /// Consumes `h` and returns a fresh handle for the same qubit.
    QubitHandle transfer(QubitHandle h);
    void apply(const Gate2x2& gate, QubitHandle h);
    void cnot(QubitHandle control, QubitHandle target);
    /// Measures in `basis` and consumes the handle.
    int measure(QubitHandle h, Basis basis, Rng& rng);

    /// State of an unentangled qubit. Throws SimulatorError if it is entangled.
    Ket product_state(QubitHandle h) const;
    /// Joint pure state of the listed qubits, which must form a whole register.
    Ket joint_state(const std::vector<QubitHandle>& qubits) const;
    DensityMatrix reduced_state(QubitHandle h) const;

    bool is_live(QubitHandle h) const;
    std::size_t live_qubits() const { return handles_.size(); }

  private:
    struct Register {
        Ket state;
        std::vector<std::uint64_t> qubits; // physical qubit ids, slot order
    };
    struct Location {
        std::uint64_t reg;
        std::size_t slot;
    };

    std::uint64_t physical(QubitHandle h) const;
    Location locate(std::uint64_t phys) const;
    QubitHandle mint(std::uint64_t phys);
    void consume(QubitHandle h);
    std::uint64_t merge(std::uint64_t a, std::uint64_t b);
    std::uint64_t add_register(Ket state, std::vector<std::uint64_t> qubits);

    std::map<std::uint64_t, Register> registers_;
    std::unordered_map<std::uint64_t, std::uint64_t> handles_; // live handle -> physical qubit
    std::unordered_map<std::uint64_t, std::uint64_t> owner_;   // physical qubit -> register
    std::uint64_t next_handle_ = 1;
    std::uint64_t next_physical_ = 1;
    std::uint64_t next_register_ = 1;
};

enum class BellState { PhiPlus, PhiMinus, PsiPlus, PsiMinus };

Ket bell_ket(BellState s);
/// Expected correlation of the pair in `basis` (+1 or -1).
int expected_correlation(BellState s, Basis basis);

struct EprSource {
    std::size_t pair_count = 0;
    BellState state = BellState::PhiPlus;
};

struct SharedPair {
    NodeId holder_a;
    NodeId holder_b;
    QubitHandle half_a;
    QubitHandle half_b;
    BellState state = BellState::PhiPlus;
};

/// Creates one pair from `source`. Throws SimulatorError when it is exhausted.
SharedPair distribute_epr(EprSource& source, const NodeId& a, const NodeId& b, QuantumStore& store);

enum class Channel { Control, Data };
std::string to_string(Channel c);

namespace msg {
struct EprReady {
    std::string purpose; // "teleport" or "check"
    std::uint64_t pair = 0;
};
struct BellOutcome {
    std::uint64_t block = 0;
    std::size_t position = 0;
    int m1 = 0;
    int m2 = 0;
};
struct AppendRequest {
    std::uint64_t index = 0;
    std::string payload_hex;
    ledger::Digest prev_digest = 0;
    std::uint64_t timestamp = 0;
};
struct Ack {
    std::uint64_t block = 0;
    bool accepted = false;
};
struct CheckRequest {
    std::vector<Basis> bases;
};
struct CheckReport {
    std::vector<int> outcomes;
};
} // namespace msg

using MessageKind =
    std::variant<msg::EprReady, msg::BellOutcome, msg::AppendRequest, msg::Ack, msg::CheckRequest, msg::CheckReport>;

std::string kind_name(const MessageKind& k);

struct ChannelMessage {
    Channel channel = Channel::Control;
    NodeId sender;
    NodeId receiver;
    MessageKind kind;
    std::vector<QubitHandle> payload_qubits;
    std::uint64_t event_time = 0;
};

/// One JSON object per message with a fixed field order.
Json message_to_json(const ChannelMessage& m);

struct AttackerConfig {
    bool active = false;
    Basis intercept_basis = Basis::Z;
    std::uint64_t seed = 0;
};

/// Measures every qubit of a data message in the attacker's basis and forwards
/// freshly prepared eigenstates of the observed outcomes. Control messages and
/// inactive attackers pass through bit-exact.
ChannelMessage intercept_resend(const AttackerConfig& attacker, const ChannelMessage& m, QuantumStore& store,
                                Rng& rng);

struct CheckStatistics {
    std::size_t pairs_tested = 0;
    std::size_t mismatches = 0;
    bool detected = false;

    friend bool operator==(const CheckStatistics&, const CheckStatistics&) = default;
};

struct CheckRound {
    std::vector<Basis> bases;
    std::vector<int> outcomes_a;
    std::vector<int> outcomes_b;
    CheckStatistics stats;
};

/// Both holders measure each pair in a common random basis and compare against
/// the pair's expected correlation. Throws SimulatorError for an empty pair list.
CheckRound check_round(const std::vector<SharedPair>& pairs, QuantumStore& store, Rng& rng);
CheckRound check_round(const std::vector<SharedPair>& pairs, QuantumStore& store, std::uint64_t seed);

/// Probability that one Phi+ check pair reveals an intercept in `attacker_basis`,
/// enumerated over check bases, attacker outcomes and check outcomes.
double exact_detection_probability(Basis attacker_basis);
/// Probability that none of k independent check pairs reveals the attacker.
double undetected_probability(Basis attacker_basis, std::size_t k);

struct ScenarioConfig {
    std::vector<NodeId> nodes;
    std::vector<ledger::Bytes> payloads;
    std::size_t check_pairs = 0;
    std::optional<AttackerConfig> attacker;
    std::uint64_t seed = 0;
};

/// Parses the scenario JSON. Throws ConfigError listing every missing or
/// malformed field.
ScenarioConfig parse_scenario(const Json& j);

struct ScenarioResult {
    std::map<std::string, ledger::Chain> final_chains;
    std::vector<ChannelMessage> events;
    CheckStatistics check_statistics;
    /// Smallest teleport fidelity per appended block.
    std::vector<double> block_fidelities;
    std::size_t rejected_appends = 0;
    std::size_t intercepted_qubits = 0;
};

ScenarioResult run_scenario(const ScenarioConfig& config);
ScenarioResult run_scenario(const ScenarioConfig& config, std::uint64_t seed);

/// Event log as JSON lines.
std::string event_log_jsonl(const ScenarioResult& r);
Json result_to_json(const ScenarioResult& r);

} // namespace qdl::network
