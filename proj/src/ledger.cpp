#include "qdl/ledger.hpp"

#include <bit>
#include <cmath>

namespace qdl::ledger {

namespace {

void put_u64_be(Bytes& out, std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) {
        out.push_back(static_cast<std::uint8_t>(v >> shift));
    }
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') {
        return c - '0';
    }
    if (c >= 'a' && c <= 'f') {
        return c - 'a' + 10;
    }
    if (c >= 'A' && c <= 'F') {
        return c - 'A' + 10;
    }
    return -1;
}

} // namespace

Digest fnv1a64(std::span<const std::uint8_t> data) {
    Digest h = kFnvOffsetBasis;
    for (std::uint8_t byte : data) {
        h ^= byte;
        h *= kFnvPrime;
    }
    return h;
}

Digest fnv1a64(std::string_view text) {
    return fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Bytes digest_input(const Block& b) {
    Bytes out;
    out.reserve(24 + b.payload.size());
    put_u64_be(out, b.index);
    out.insert(out.end(), b.payload.begin(), b.payload.end());
    put_u64_be(out, b.prev_digest);
    put_u64_be(out, b.timestamp);
    return out;
}

Digest compute_digest(const Block& b) { return fnv1a64(digest_input(b)); }

Block make_block(std::uint64_t index, Bytes payload, Digest prev_digest, std::uint64_t timestamp) {
    Block b{index, std::move(payload), prev_digest, 0, timestamp};
    b.digest = compute_digest(b);
    return b;
}

Block genesis_block() { return make_block(0, {}, 0, 0); }

std::size_t qubits_required(std::uint64_t n_classical_bits) {
    if (n_classical_bits == 0) {
        throw std::invalid_argument("qubits_required: need at least one classical bit");
    }
    // ceil(log2 n) == bit width of n - 1
    return std::max<std::size_t>(1, std::bit_width(n_classical_bits - 1));
}

QuantumEncoding encode_digest(Digest d) {
    QuantumEncoding q;
    q.bit_count = kDigestBits;
    q.qubit_kets.reserve(kDigestBits);
    for (std::size_t i = 0; i < kDigestBits; ++i) {
        const bool bit = (d >> (kDigestBits - 1 - i)) & 1;
        q.qubit_kets.push_back(Ket::basis(1, bit ? 1 : 0));
    }
    return q;
}

QuantumEncoding encode_block(const Block& b) { return encode_digest(b.digest); }

Digest decode_block(const QuantumEncoding& q) {
    if (q.qubit_kets.size() != kDigestBits || q.bit_count != kDigestBits) {
        throw TamperError("encoding carries " + std::to_string(q.qubit_kets.size()) + " qubits, expected " +
                              std::to_string(kDigestBits),
                          q.qubit_kets.size());
    }
    Digest d = 0;
    for (std::size_t i = 0; i < kDigestBits; ++i) {
        const Ket& k = q.qubit_kets[i];
        if (k.num_qubits() != 1) {
            throw TamperError("position " + std::to_string(i) + " is not a single qubit", i);
        }
        const double a0 = std::abs(k[0]);
        const double a1 = std::abs(k[1]);
        int bit = -1;
        if (a1 <= kPipelineTol && std::abs(a0 - 1.0) <= kPipelineTol) {
            bit = 0;
        } else if (a0 <= kPipelineTol && std::abs(a1 - 1.0) <= kPipelineTol) {
            bit = 1;
        }
        if (bit < 0) {
            throw TamperError("qubit at position " + std::to_string(i) + " is not a basis state", i);
        }
        d = (d << 1) | static_cast<Digest>(bit);
    }
    return d;
}

Transport teleport_transport() {
    return [](const std::vector<Ket>& kets, std::uint64_t seed) { return teleport::cascade(kets, seed); };
}

AppendResult append_block(const Chain& chain, Bytes payload, const Transport& transport, std::uint64_t rng_seed,
                          std::optional<std::uint64_t> timestamp) {
    if (chain.blocks.empty()) {
        throw std::invalid_argument("append_block: chain has no genesis block");
    }
    const Block& tip = chain.tip();
    const std::uint64_t ts = timestamp.value_or(tip.timestamp + 1);
    if (ts <= tip.timestamp) {
        throw std::invalid_argument("append_block: timestamp must exceed the tip's");
    }

    AppendResult result;
    result.chain = chain;
    result.candidate = make_block(tip.index + 1, std::move(payload), tip.digest, ts);

    const QuantumEncoding sent = encode_block(result.candidate);
    result.transfers = transport(sent.qubit_kets, rng_seed);

    auto reject = [&](TamperReport report) {
        report.sent_digest = result.candidate.digest;
        result.tamper = std::move(report);
        return result;
    };

    if (result.transfers.size() != sent.qubit_kets.size()) {
        return reject({"transport delivered " + std::to_string(result.transfers.size()) + " of " +
                           std::to_string(sent.qubit_kets.size()) + " qubits",
                       std::nullopt, 0, std::nullopt});
    }

    QuantumEncoding received;
    received.bit_count = sent.bit_count;
    result.min_fidelity = 1.0;
    std::optional<std::size_t> worst;
    for (std::size_t i = 0; i < result.transfers.size(); ++i) {
        const auto& t = result.transfers[i];
        received.qubit_kets.push_back(t.output_state);
        const double f = fidelity(DensityMatrix::pure(t.output_state), sent.qubit_kets[i]);
        if (f < result.min_fidelity) {
            result.min_fidelity = f;
            worst = i;
        }
    }

    Digest got = 0;
    try {
        got = decode_block(received);
    } catch (const TamperError& e) {
        return reject({e.what(), e.position(), 0, std::nullopt});
    }
    if (got != result.candidate.digest) {
        std::optional<std::size_t> first_diff;
        const Digest diff = got ^ result.candidate.digest;
        first_diff = static_cast<std::size_t>(std::countl_zero(diff));
        return reject({"received digest does not match sent digest", first_diff, 0, got});
    }
    if (result.min_fidelity < 1.0 - kPipelineTol) {
        return reject({"teleport fidelity below tolerance", worst, 0, got});
    }

    result.accepted = true;
    result.chain.blocks.push_back(result.candidate);
    return result;
}

VerificationReport verify_chain(const Chain& chain) {
    auto bad = [](std::size_t i, std::string why) { return VerificationReport{false, i, std::move(why)}; };
    if (chain.blocks.empty()) {
        return bad(0, "chain is empty");
    }
    for (std::size_t i = 0; i < chain.blocks.size(); ++i) {
        const Block& b = chain.blocks[i];
        if (b.index != i) {
            return bad(i, "block index " + std::to_string(b.index) + " at position " + std::to_string(i));
        }
        if (compute_digest(b) != b.digest) {
            return bad(i, "stored digest does not match block contents");
        }
        if (i == 0) {
            if (b.prev_digest != 0) {
                return bad(i, "genesis block links to a predecessor");
            }
            continue;
        }
        const Block& prev = chain.blocks[i - 1];
        if (b.prev_digest != prev.digest) {
            return bad(i, "prev_digest does not match predecessor digest");
        }
        if (b.timestamp <= prev.timestamp) {
            return bad(i, "timestamp does not increase");
        }
    }
    return {};
}

VerificationReport verify_chain(const Chain& chain, const ChainAnchor& expected_tip) {
    auto report = verify_chain(chain);
    if (!report.valid) {
        return report;
    }
    const Block& tip = chain.tip();
    if (tip.index < expected_tip.index) {
        return {false, chain.blocks.size(), "chain ends before the anchored tip"};
    }
    const Block& anchored = chain.blocks[expected_tip.index];
    if (anchored.digest != expected_tip.digest) {
        return {false, static_cast<std::size_t>(expected_tip.index), "anchored block digest differs"};
    }
    return report;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (std::uint8_t b : bytes) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 0xf]);
    }
    return out;
}

std::string digest_hex(Digest d) {
    Bytes be;
    put_u64_be(be, d);
    return to_hex(be);
}

Bytes from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) {
        throw std::invalid_argument("hex string has odd length");
    }
    Bytes out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        const int hi = hex_value(hex[i]);
        const int lo = hex_value(hex[i + 1]);
        if (hi < 0 || lo < 0) {
            throw std::invalid_argument("invalid hex character in '" + std::string(hex) + "'");
        }
        out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
    }
    return out;
}

Digest parse_digest_hex(std::string_view hex) {
    const Bytes b = from_hex(hex);
    if (b.size() != 8) {
        throw std::invalid_argument("digest must be 16 hex digits");
    }
    Digest d = 0;
    for (std::uint8_t byte : b) {
        d = (d << 8) | byte;
    }
    return d;
}

Json block_to_json(const Block& b) {
    Json j;
    j["index"] = b.index;
    j["payload"] = to_hex(b.payload);
    j["prev_digest"] = digest_hex(b.prev_digest);
    j["digest"] = digest_hex(b.digest);
    j["timestamp"] = b.timestamp;
    return j;
}

Block block_from_json(const Json& j) {
    Block b;
    b.index = j.at("index").get<std::uint64_t>();
    b.payload = from_hex(j.at("payload").get<std::string>());
    b.prev_digest = parse_digest_hex(j.at("prev_digest").get<std::string>());
    b.digest = parse_digest_hex(j.at("digest").get<std::string>());
    b.timestamp = j.at("timestamp").get<std::uint64_t>();
    return b;
}

Json chain_to_json(const Chain& c) {
    Json arr = Json::array();
    for (const auto& b : c.blocks) {
        arr.push_back(block_to_json(b));
    }
    return arr;
}

Chain chain_from_json(const Json& j) {
    if (!j.is_array()) {
        throw std::invalid_argument("chain file must hold a JSON array of blocks");
    }
    Chain c;
    for (const auto& item : j) {
        c.blocks.push_back(block_from_json(item));
    }
    return c;
}

} // namespace qdl::ledger
