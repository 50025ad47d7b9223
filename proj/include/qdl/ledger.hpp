#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qdl/qstate.hpp"
#include "qdl/teleport.hpp"

namespace qdl::ledger {

using Bytes = std::vector<std::uint8_t>;
using Digest = std::uint64_t;

inline constexpr Digest kFnvOffsetBasis = 14695981039346656037ULL;
inline constexpr Digest kFnvPrime = 1099511628211ULL;

Digest fnv1a64(std::span<const std::uint8_t> data);
Digest fnv1a64(std::string_view text);

struct Block {
    std::uint64_t index = 0;
    Bytes payload;
    Digest prev_digest = 0;
    Digest digest = 0;
    std::uint64_t timestamp = 0;

    friend bool operator==(const Block&, const Block&) = default;
};

/// index (8 bytes BE) || payload || prev_digest (8 bytes BE) || timestamp (8 bytes BE)
Bytes digest_input(const Block& b);
Digest compute_digest(const Block& b);
/// Builds a block with its digest filled in.
Block make_block(std::uint64_t index, Bytes payload, Digest prev_digest, std::uint64_t timestamp);
Block genesis_block();

struct Chain {
    std::vector<Block> blocks;

    static Chain genesis() { return Chain{{genesis_block()}}; }
    const Block& tip() const { return blocks.back(); }

    friend bool operator==(const Chain&, const Chain&) = default;
};

/// Number of qubits whose basis spans n classical values: max(1, ceil(log2 n)).
/// Throws std::invalid_argument for n == 0.
std::size_t qubits_required(std::uint64_t n_classical_bits);

class TamperError : public std::runtime_error {
  public:
    TamperError(const std::string& what, std::size_t position) : std::runtime_error(what), position_(position) {}
    std::size_t position() const { return position_; }

  private:
    std::size_t position_;
};

struct QuantumEncoding {
    std::vector<Ket> qubit_kets;
    std::size_t bit_count = 0;
};

inline constexpr std::size_t kDigestBits = 64;

/// One basis ket per digest bit, most significant bit first.
QuantumEncoding encode_digest(Digest d);
QuantumEncoding encode_block(const Block& b);
/// Throws TamperError naming the first ket that is not a basis state.
Digest decode_block(const QuantumEncoding& q);

/// Sends the kets to the receiver and reports one teleport outcome per ket.
using Transport = std::function<std::vector<teleport::TeleportOutcome>(const std::vector<Ket>&, std::uint64_t seed)>;

Transport teleport_transport();

struct TamperReport {
    std::string reason;
    std::optional<std::size_t> qubit_position;
    Digest sent_digest = 0;
    std::optional<Digest> received_digest;
};

struct AppendResult {
    bool accepted = false;
    Chain chain; // unchanged input chain when rejected
    Block candidate;
    std::optional<TamperReport> tamper;
    std::vector<teleport::TeleportOutcome> transfers;
    /// Smallest receiver-side fidelity against the sent kets.
    double min_fidelity = 0.0;
};

/// Appends `payload` with timestamp tip+1 (or `timestamp` if given, which must
/// exceed the tip's). The digest is teleported through `transport` and decoded
/// on the receiving side; any mismatch rejects the append.
AppendResult append_block(const Chain& chain, Bytes payload, const Transport& transport, std::uint64_t rng_seed,
                          std::optional<std::uint64_t> timestamp = std::nullopt);

struct VerificationReport {
    bool valid = true;
    std::optional<std::size_t> first_bad_index;
    std::string reason;
};

/// The receiver's last known tip; lets verification notice a truncated tail.
struct ChainAnchor {
    std::uint64_t index = 0;
    Digest digest = 0;
};

VerificationReport verify_chain(const Chain& chain);
VerificationReport verify_chain(const Chain& chain, const ChainAnchor& expected_tip);

std::string to_hex(std::span<const std::uint8_t> bytes);
std::string digest_hex(Digest d);
/// Throws std::invalid_argument on odd length or non-hex characters.
Bytes from_hex(std::string_view hex);
Digest parse_digest_hex(std::string_view hex);

Json block_to_json(const Block& b);
Block block_from_json(const Json& j);
/// JSON array of block records.
Json chain_to_json(const Chain& c);
Chain chain_from_json(const Json& j);

} // namespace qdl::ledger
