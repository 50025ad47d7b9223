#include "qdl/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace qdl::network {

namespace {

Ket eigenstate(Basis basis, int bit) {
    if (basis == Basis::Z) {
        return Ket::basis(1, bit ? 1 : 0);
    }
    const double s = (1.0 / std::numbers::sqrt2);
    return bit ? Ket(s, -s) : Ket(s, s);
}

} // namespace

// ---------------------------------------------------------------------------
// QuantumStore

std::uint64_t QuantumStore::add_register(Ket state, std::vector<std::uint64_t> qubits) {
    const std::uint64_t id = next_register_++;
    for (std::uint64_t q : qubits) {
        owner_[q] = id;
    }
    registers_.emplace(id, Register{std::move(state), std::move(qubits)});
    return id;
}

QubitHandle QuantumStore::mint(std::uint64_t phys) {
    const QubitHandle h{next_handle_++};
    handles_.emplace(h.id, phys);
    return h;
}

std::uint64_t QuantumStore::physical(QubitHandle h) const {
    const auto it = handles_.find(h.id);
    if (it == handles_.end()) {
        throw SimulatorError("qubit handle " + std::to_string(h.id) + " was already consumed or never existed");
    }
    return it->second;
}

void QuantumStore::consume(QubitHandle h) {
    physical(h);
    handles_.erase(h.id);
}

QuantumStore::Location QuantumStore::locate(std::uint64_t phys) const {
    const std::uint64_t reg = owner_.at(phys);
    const auto& qs = registers_.at(reg).qubits;
    const auto pos = std::find(qs.begin(), qs.end(), phys);
    return {reg, static_cast<std::size_t>(pos - qs.begin())};
}

std::uint64_t QuantumStore::merge(std::uint64_t a, std::uint64_t b) {
    Register ra = std::move(registers_.at(a));
    Register rb = std::move(registers_.at(b));
    registers_.erase(a);
    registers_.erase(b);
    std::vector<std::uint64_t> qubits = std::move(ra.qubits);
    qubits.insert(qubits.end(), rb.qubits.begin(), rb.qubits.end());
    return add_register(tensor(ra.state, rb.state), std::move(qubits));
}

QubitHandle QuantumStore::prepare(const Ket& single_qubit) {
    if (single_qubit.num_qubits() != 1) {
        throw SimulatorError("prepare expects a single-qubit state");
    }
    const std::uint64_t phys = next_physical_++;
    add_register(single_qubit, {phys});
    return mint(phys);
}

std::pair<QubitHandle, QubitHandle> QuantumStore::prepare_pair(const Ket& two_qubits) {
    if (two_qubits.num_qubits() != 2) {
        throw SimulatorError("prepare_pair expects a two-qubit state");
    }
    const std::uint64_t p0 = next_physical_++;
    const std::uint64_t p1 = next_physical_++;
    add_register(two_qubits, {p0, p1});
    const QubitHandle h0 = mint(p0);
    return {h0, mint(p1)};
}

QubitHandle QuantumStore::transfer(QubitHandle h) {
    const std::uint64_t phys = physical(h);
    consume(h);
    return mint(phys);
}

void QuantumStore::apply(const Gate2x2& gate, QubitHandle h) {
    const auto loc = locate(physical(h));
    auto& reg = registers_.at(loc.reg);
    reg.state = apply_gate(gate, loc.slot, reg.state);
}

void QuantumStore::cnot(QubitHandle control, QubitHandle target) {
    const std::uint64_t pc = physical(control);
    const std::uint64_t pt = physical(target);
    if (pc == pt) {
        throw SimulatorError("CNOT control and target are the same qubit");
    }
    if (owner_.at(pc) != owner_.at(pt)) {
        merge(owner_.at(pc), owner_.at(pt));
    }
    const auto lc = locate(pc);
    const auto lt = locate(pt);
    auto& reg = registers_.at(lc.reg);
    reg.state = apply_controlled_not(lc.slot, lt.slot, reg.state);
}

int QuantumStore::measure(QubitHandle h, Basis basis, Rng& rng) {
    const std::uint64_t phys = physical(h);
    consume(h);
    const auto loc = locate(phys);
    Register& reg = registers_.at(loc.reg);
    Ket state = reg.state;
    if (basis == Basis::X) {
        state = apply_gate(gates::H(), loc.slot, state);
    }
    const auto m = qdl::measure(state, {loc.slot}, rng);
    const int bit = m.record.outcomes[0];

    // Factor the measured qubit out of the register.
    const std::size_t n = reg.qubits.size();
    const std::size_t mask = std::size_t{1} << (n - 1 - loc.slot);
    std::vector<Amplitude> rest;
    rest.reserve(m.post_state.dimension() / 2);
    for (std::size_t i = 0; i < m.post_state.dimension(); ++i) {
        if (((i & mask) != 0) == (bit == 1)) {
            rest.push_back(m.post_state[i]);
        }
    }
    owner_.erase(phys);
    reg.qubits.erase(reg.qubits.begin() + static_cast<std::ptrdiff_t>(loc.slot));
    if (reg.qubits.empty()) {
        registers_.erase(loc.reg);
    } else {
        reg.state = Ket(n - 1, std::move(rest));
    }
    return bit;
}

Ket QuantumStore::product_state(QubitHandle h) const {
    const auto loc = locate(physical(h));
    const Register& reg = registers_.at(loc.reg);
    if (reg.qubits.size() == 1) {
        return reg.state;
    }
    const DensityMatrix rho = partial_trace(reg.state, {loc.slot});
    if (rho.purity() < 1.0 - kPipelineTol) {
        throw SimulatorError("qubit handle " + std::to_string(h.id) + " is entangled");
    }
    // Read the factor off the largest amplitude's row.
    const std::size_t n = reg.qubits.size();
    const std::size_t mask = std::size_t{1} << (n - 1 - loc.slot);
    std::size_t best = 0;
    for (std::size_t i = 1; i < reg.state.dimension(); ++i) {
        if (std::abs(reg.state[i]) > std::abs(reg.state[best])) {
            best = i;
        }
    }
    return Ket(reg.state[best & ~mask], reg.state[best | mask]).normalized();
}

Ket QuantumStore::joint_state(const std::vector<QubitHandle>& qubits) const {
    if (qubits.empty()) {
        throw SimulatorError("joint_state needs at least one qubit");
    }
    const std::uint64_t reg_id = owner_.at(physical(qubits.front()));
    const Register& reg = registers_.at(reg_id);
    if (qubits.size() != reg.qubits.size()) {
        throw SimulatorError("joint_state must name every qubit of the register");
    }
    std::vector<std::size_t> slots;
    for (const auto& h : qubits) {
        const auto loc = locate(physical(h));
        if (loc.reg != reg_id) {
            throw SimulatorError("joint_state qubits live in different registers");
        }
        slots.push_back(loc.slot);
    }
    const std::size_t n = slots.size();
    std::vector<Amplitude> amps(reg.state.dimension());
    for (std::size_t i = 0; i < amps.size(); ++i) {
        // Bit k of the requested order comes from register slot slots[k].
        std::size_t src = 0;
        for (std::size_t k = 0; k < n; ++k) {
            if (i & (std::size_t{1} << (n - 1 - k))) {
                src |= std::size_t{1} << (n - 1 - slots[k]);
            }
        }
        amps[i] = reg.state[src];
    }
    return Ket(n, std::move(amps));
}

DensityMatrix QuantumStore::reduced_state(QubitHandle h) const {
    const auto loc = locate(physical(h));
    return partial_trace(registers_.at(loc.reg).state, {loc.slot});
}

bool QuantumStore::is_live(QubitHandle h) const { return handles_.contains(h.id); }

// ---------------------------------------------------------------------------
// EPR pairs

Ket bell_ket(BellState s) {
    const double r = (1.0 / std::numbers::sqrt2);
    switch (s) {
    case BellState::PhiPlus:
        return Ket(2, {r, 0.0, 0.0, r});
    case BellState::PhiMinus:
        return Ket(2, {r, 0.0, 0.0, -r});
    case BellState::PsiPlus:
        return Ket(2, {0.0, r, r, 0.0});
    case BellState::PsiMinus:
        return Ket(2, {0.0, r, -r, 0.0});
    }
    throw std::logic_error("unknown Bell state");
}

int expected_correlation(BellState s, Basis basis) {
    switch (s) {
    case BellState::PhiPlus:
        return 1;
    case BellState::PhiMinus:
        return basis == Basis::Z ? 1 : -1;
    case BellState::PsiPlus:
        return basis == Basis::Z ? -1 : 1;
    case BellState::PsiMinus:
        return -1;
    }
    throw std::logic_error("unknown Bell state");
}

SharedPair distribute_epr(EprSource& source, const NodeId& a, const NodeId& b, QuantumStore& store) {
    if (source.pair_count == 0) {
        throw SimulatorError("EPR source exhausted");
    }
    --source.pair_count;
    auto [ha, hb] = store.prepare_pair(bell_ket(source.state));
    return SharedPair{a, b, ha, hb, source.state};
}

// ---------------------------------------------------------------------------
// Messages

std::string to_string(Channel c) { return c == Channel::Control ? "control" : "data"; }

std::string kind_name(const MessageKind& k) {
    struct Visitor {
        std::string operator()(const msg::EprReady&) const { return "EprReady"; }
        std::string operator()(const msg::BellOutcome&) const { return "BellOutcome"; }
        std::string operator()(const msg::AppendRequest&) const { return "AppendRequest"; }
        std::string operator()(const msg::Ack&) const { return "Ack"; }
        std::string operator()(const msg::CheckRequest&) const { return "CheckRequest"; }
        std::string operator()(const msg::CheckReport&) const { return "CheckReport"; }
    };
    return std::visit(Visitor{}, k);
}

Json message_to_json(const ChannelMessage& m) {
    struct Body {
        Json operator()(const msg::EprReady& e) const {
            Json j;
            j["purpose"] = e.purpose;
            j["pair"] = e.pair;
            return j;
        }
        Json operator()(const msg::BellOutcome& e) const {
            Json j;
            j["block"] = e.block;
            j["position"] = e.position;
            j["m1"] = e.m1;
            j["m2"] = e.m2;
            return j;
        }
        Json operator()(const msg::AppendRequest& e) const {
            Json j;
            j["index"] = e.index;
            j["payload"] = e.payload_hex;
            j["prev_digest"] = ledger::digest_hex(e.prev_digest);
            j["timestamp"] = e.timestamp;
            return j;
        }
        Json operator()(const msg::Ack& e) const {
            Json j;
            j["block"] = e.block;
            j["accepted"] = e.accepted;
            return j;
        }
        Json operator()(const msg::CheckRequest& e) const {
            Json bases = Json::array();
            for (Basis b : e.bases) {
                bases.push_back(to_string(b));
            }
            Json j;
            j["bases"] = std::move(bases);
            return j;
        }
        Json operator()(const msg::CheckReport& e) const {
            Json j;
            j["outcomes"] = e.outcomes;
            return j;
        }
    };
    Json qubits = Json::array();
    for (const auto& h : m.payload_qubits) {
        qubits.push_back(h.id);
    }
    Json j;
    j["time"] = m.event_time;
    j["channel"] = to_string(m.channel);
    j["sender"] = m.sender.label;
    j["receiver"] = m.receiver.label;
    j["kind"] = kind_name(m.kind);
    j["body"] = std::visit(Body{}, m.kind);
    j["qubits"] = std::move(qubits);
    return j;
}

ChannelMessage intercept_resend(const AttackerConfig& attacker, const ChannelMessage& m, QuantumStore& store,
                                Rng& rng) {
    if (!attacker.active || m.channel != Channel::Data) {
        return m;
    }
    ChannelMessage out = m;
    out.payload_qubits.clear();
    for (const auto& h : m.payload_qubits) {
        const int bit = store.measure(h, attacker.intercept_basis, rng);
        out.payload_qubits.push_back(store.prepare(eigenstate(attacker.intercept_basis, bit)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Correlation checks

CheckRound check_round(const std::vector<SharedPair>& pairs, QuantumStore& store, Rng& rng) {
    if (pairs.empty()) {
        throw SimulatorError("check round needs at least one shared pair");
    }
    CheckRound round;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        round.bases.push_back(rng.bit() ? Basis::X : Basis::Z);
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const int a = store.measure(pairs[i].half_a, round.bases[i], rng);
        const int b = store.measure(pairs[i].half_b, round.bases[i], rng);
        round.outcomes_a.push_back(a);
        round.outcomes_b.push_back(b);
        const int observed = a == b ? 1 : -1;
        if (observed != expected_correlation(pairs[i].state, round.bases[i])) {
            ++round.stats.mismatches;
        }
    }
    round.stats.pairs_tested = pairs.size();
    round.stats.detected = round.stats.mismatches > 0;
    return round;
}

CheckRound check_round(const std::vector<SharedPair>& pairs, QuantumStore& store, std::uint64_t seed) {
    Rng rng(seed);
    return check_round(pairs, store, rng);
}

double exact_detection_probability(Basis attacker_basis) {
    const Ket pair = bell_ket(BellState::PhiPlus);
    // Rotate the intercepted half so the attacker's measurement is computational.
    const Ket seen = attacker_basis == Basis::X ? apply_gate(gates::H(), 1, pair) : pair;
    const auto attack_probs = outcome_probabilities(seen, {1});

    double detect = 0.0;
    for (Basis check : {Basis::Z, Basis::X}) {
        for (int a = 0; a < 2; ++a) {
            if (attack_probs[a] <= 0.0) {
                continue;
            }
            Ket after = collapse(seen, {1}, {a}).post_state;
            if (attacker_basis == Basis::X) {
                after = apply_gate(gates::H(), 1, after);
            }
            if (check == Basis::X) {
                after = apply_gate(gates::H(), 0, apply_gate(gates::H(), 1, after));
            }
            const auto p = outcome_probabilities(after, {0, 1});
            const double mismatch = p[0b01] + p[0b10];
            detect += 0.5 * attack_probs[a] * mismatch;
        }
    }
    return detect;
}

double undetected_probability(Basis attacker_basis, std::size_t k) {
    return std::pow(1.0 - exact_detection_probability(attacker_basis), static_cast<double>(k));
}

// ---------------------------------------------------------------------------
// Scenario

ScenarioConfig parse_scenario(const Json& j) {
    if (!j.is_object()) {
        throw ConfigError("scenario config must be a JSON object");
    }
    std::vector<std::string> problems;
    ScenarioConfig cfg;
    auto missing = [&](const char* key) {
        if (!j.contains(key)) {
            problems.push_back(std::string("missing field '") + key + "'");
            return true;
        }
        return false;
    };

    if (!missing("nodes")) {
        const auto& nodes = j["nodes"];
        if (!nodes.is_array() || nodes.size() != 2 || !nodes[0].is_string() || !nodes[1].is_string()) {
            problems.emplace_back("'nodes' must be an array of two node names");
        } else {
            cfg.nodes = {NodeId{nodes[0].get<std::string>()}, NodeId{nodes[1].get<std::string>()}};
            if (cfg.nodes[0] == cfg.nodes[1]) {
                problems.emplace_back("'nodes' must name two distinct nodes");
            }
        }
    }
    if (!missing("payloads")) {
        const auto& payloads = j["payloads"];
        if (!payloads.is_array()) {
            problems.emplace_back("'payloads' must be an array of hex strings");
        } else {
            for (const auto& p : payloads) {
                try {
                    cfg.payloads.push_back(ledger::from_hex(p.get<std::string>()));
                } catch (const std::exception& e) {
                    problems.push_back(std::string("bad payload: ") + e.what());
                }
            }
        }
    }
    if (!missing("check_pairs")) {
        if (!j["check_pairs"].is_number_unsigned()) {
            problems.emplace_back("'check_pairs' must be a non-negative integer");
        } else {
            cfg.check_pairs = j["check_pairs"].get<std::size_t>();
        }
    }
    if (!missing("seed")) {
        if (!j["seed"].is_number_unsigned()) {
            problems.emplace_back("'seed' must be a non-negative integer");
        } else {
            cfg.seed = j["seed"].get<std::uint64_t>();
        }
    }
    if (j.contains("attacker")) {
        const auto& a = j["attacker"];
        AttackerConfig att;
        att.seed = cfg.seed ^ 0x9e3779b97f4a7c15ULL;
        if (!a.is_object()) {
            problems.emplace_back("'attacker' must be an object");
        } else {
            if (!a.contains("active") || !a["active"].is_boolean()) {
                problems.emplace_back("missing field 'attacker.active' (boolean)");
            } else {
                att.active = a["active"].get<bool>();
            }
            if (!a.contains("basis") || !a["basis"].is_string()) {
                problems.emplace_back("missing field 'attacker.basis' (\"Z\" or \"X\")");
            } else {
                try {
                    att.intercept_basis = parse_basis(a["basis"].get<std::string>());
                } catch (const std::exception& e) {
                    problems.emplace_back(e.what());
                }
            }
            if (a.contains("seed")) {
                if (!a["seed"].is_number_unsigned()) {
                    problems.emplace_back("'attacker.seed' must be a non-negative integer");
                } else {
                    att.seed = a["seed"].get<std::uint64_t>();
                }
            }
        }
        cfg.attacker = att;
    }

    if (!problems.empty()) {
        std::ostringstream msg;
        msg << "invalid scenario config:";
        for (const auto& p : problems) {
            msg << "\n  - " << p;
        }
        throw ConfigError(msg.str());
    }
    return cfg;
}

namespace {

class Simulation {
  public:
    Simulation(const ScenarioConfig& cfg, std::uint64_t seed)
        : cfg_(cfg), rng_(seed), attacker_rng_(cfg.attacker ? cfg.attacker->seed : 0), alice_(cfg.nodes.at(0)),
          bob_(cfg.nodes.at(1)) {
        source_.pair_count = cfg.payloads.size() * ledger::kDigestBits + cfg.check_pairs;
        alice_chain_ = ledger::Chain::genesis();
        bob_chain_ = ledger::Chain::genesis();
    }

    ScenarioResult run() {
        for (const auto& payload : cfg_.payloads) {
            append(payload);
        }
        if (cfg_.check_pairs > 0) {
            check();
        }
        result_.final_chains[alice_.label] = alice_chain_;
        result_.final_chains[bob_.label] = bob_chain_;
        return std::move(result_);
    }

  private:
    ChannelMessage send(Channel channel, const NodeId& from, const NodeId& to, MessageKind kind,
                        std::vector<QubitHandle> qubits = {}) {
        if (channel == Channel::Control && !qubits.empty()) {
            throw SimulatorError("control channel cannot carry qubits");
        }
        if (channel == Channel::Data && qubits.empty()) {
            throw SimulatorError("data channel message without qubits");
        }
        ChannelMessage m{channel, from, to, std::move(kind), std::move(qubits), ++clock_};
        if (cfg_.attacker && channel == Channel::Data) {
            m = intercept_resend(*cfg_.attacker, m, store_, attacker_rng_);
            if (cfg_.attacker->active) {
                result_.intercepted_qubits += m.payload_qubits.size();
            }
        }
        result_.events.push_back(m);
        return m;
    }

    // Ships the far half of a fresh pair to bob over the data channel.
    SharedPair share_pair(const std::string& purpose) {
        SharedPair pair = distribute_epr(source_, alice_, bob_, store_);
        const auto delivered = send(Channel::Data, alice_, bob_, msg::EprReady{purpose, next_pair_++}, {pair.half_b});
        pair.half_b = store_.transfer(delivered.payload_qubits.front());
        return pair;
    }

    void append(const ledger::Bytes& payload) {
        const ledger::Block& tip = alice_chain_.tip();
        const ledger::Block block = ledger::make_block(tip.index + 1, payload, tip.digest, clock_ + 1);
        send(Channel::Control, alice_, bob_,
             msg::AppendRequest{block.index, ledger::to_hex(block.payload), block.prev_digest, block.timestamp});

        const auto sent = ledger::encode_block(block);
        ledger::QuantumEncoding received;
        received.bit_count = sent.bit_count;
        double min_fidelity = 1.0;
        for (std::size_t pos = 0; pos < sent.qubit_kets.size(); ++pos) {
            const SharedPair pair = share_pair("teleport");

            // Bell measurement on alice's side.
            const QubitHandle data = store_.prepare(sent.qubit_kets[pos]);
            store_.cnot(data, pair.half_a);
            store_.apply(gates::H(), data);
            const int m1 = store_.measure(data, Basis::Z, rng_);
            const int m2 = store_.measure(pair.half_a, Basis::Z, rng_);
            send(Channel::Control, alice_, bob_, msg::BellOutcome{block.index, pos, m1, m2});

            // Corrections on bob's side.
            if (m2) {
                store_.apply(gates::X(), pair.half_b);
            }
            if (m1) {
                store_.apply(gates::Z(), pair.half_b);
            }
            const Ket out = store_.product_state(pair.half_b);
            store_.measure(pair.half_b, Basis::Z, rng_); // readout
            min_fidelity = std::min(min_fidelity, fidelity(DensityMatrix::pure(out), sent.qubit_kets[pos]));
            received.qubit_kets.push_back(out);
        }
        result_.block_fidelities.push_back(min_fidelity);

        bool accepted = false;
        try {
            const ledger::Digest got = ledger::decode_block(received);
            const ledger::Block& bob_tip = bob_chain_.tip();
            const ledger::Block rebuilt =
                ledger::make_block(block.index, block.payload, block.prev_digest, block.timestamp);
            accepted = got == rebuilt.digest && block.prev_digest == bob_tip.digest && block.index == bob_tip.index + 1;
        } catch (const ledger::TamperError&) {
            accepted = false;
        }
        if (accepted) {
            bob_chain_.blocks.push_back(block);
            accepted = ledger::verify_chain(bob_chain_).valid;
            if (!accepted) {
                bob_chain_.blocks.pop_back();
            }
        }
        send(Channel::Control, bob_, alice_, msg::Ack{block.index, accepted});
        if (accepted) {
            alice_chain_.blocks.push_back(block);
        } else {
            ++result_.rejected_appends;
        }
    }

    void check() {
        std::vector<SharedPair> pairs;
        pairs.reserve(cfg_.check_pairs);
        for (std::size_t i = 0; i < cfg_.check_pairs; ++i) {
            pairs.push_back(share_pair("check"));
        }
        const CheckRound round = check_round(pairs, store_, rng_);
        send(Channel::Control, alice_, bob_, msg::CheckRequest{round.bases});
        send(Channel::Control, bob_, alice_, msg::CheckReport{round.outcomes_b});
        result_.check_statistics = round.stats;
    }

    const ScenarioConfig& cfg_;
    Rng rng_;
    Rng attacker_rng_;
    NodeId alice_;
    NodeId bob_;
    QuantumStore store_;
    EprSource source_;
    ledger::Chain alice_chain_;
    ledger::Chain bob_chain_;
    std::uint64_t clock_ = 0;
    std::uint64_t next_pair_ = 0;
    ScenarioResult result_;
};

} // namespace

ScenarioResult run_scenario(const ScenarioConfig& config, std::uint64_t seed) {
    if (config.nodes.size() != 2 || config.nodes[0] == config.nodes[1]) {
        throw ConfigError("scenario needs exactly two distinct nodes");
    }
    return Simulation(config, seed).run();
}

ScenarioResult run_scenario(const ScenarioConfig& config) { return run_scenario(config, config.seed); }

std::string event_log_jsonl(const ScenarioResult& r) {
    std::string out;
    for (const auto& e : r.events) {
        out += message_to_json(e).dump();
        out += '\n';
    }
    return out;
}

Json result_to_json(const ScenarioResult& r) {
    Json chains = Json::object();
    for (const auto& [label, chain] : r.final_chains) {
        chains[label] = ledger::chain_to_json(chain);
    }
    Json events = Json::array();
    for (const auto& e : r.events) {
        events.push_back(message_to_json(e));
    }
    Json stats;
    stats["pairs_tested"] = r.check_statistics.pairs_tested;
    stats["mismatches"] = r.check_statistics.mismatches;
    stats["detected"] = r.check_statistics.detected;

    Json j;
    j["final_chains"] = std::move(chains);
    j["check_statistics"] = std::move(stats);
    j["block_fidelities"] = r.block_fidelities;
    j["rejected_appends"] = r.rejected_appends;
    j["intercepted_qubits"] = r.intercepted_qubits;
    j["events"] = std::move(events);
    return j;
}

} // namespace qdl::network
