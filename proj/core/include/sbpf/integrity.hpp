#pragma once

#include "sbpf/error.hpp"
#include "sbpf/shmem.hpp"
#include "sbpf/verifier.hpp"

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

/// Signed library containers and the load gate: tag check, then
/// verification, then segment allocation and handle disclosure.
namespace sbpf::integrity {

using Key = std::array<std::uint8_t, 32>;
using Tag = std::array<std::uint8_t, 32>;

inline constexpr std::array<std::uint8_t, 4> kMagic{'S', 'B', 'P', 'F'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kPrefixSize = 4 + 2 + 4;
inline constexpr std::size_t kTagSize = 32;

struct SignedLibrary {
    std::uint16_t version = kVersion;
    std::vector<std::uint8_t> payload;
    Tag tag{};

    /// Container bytes: magic, version, payload_len, payload, tag (LE).
    std::vector<std::uint8_t> serialize() const;
    /// Throws MalformedContainer on bad magic, version or length.
    static SignedLibrary parse(std::span<const std::uint8_t> bytes);
};

/// HMAC-SHA256(key, data).
Tag hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data);

/// Throws EmptyPayload.
SignedLibrary sign_library(std::span<const std::uint8_t> payload, const Key& key);

/// Constant-time tag comparison over the recomputed MAC.
bool verify_library(const SignedLibrary& lib, const Key& key);

/// Parses then verifies; throws MalformedContainer for unparsable input.
bool verify_container(std::span<const std::uint8_t> bytes, const Key& key);

/// Parses 64 hex characters. Throws IoError on bad input.
Key parse_key_hex(std::string_view hex);
std::string key_to_hex(const Key& key);
/// Reads a key file holding 64 hex characters (surrounding whitespace ignored).
Key load_key_file(const std::filesystem::path& path);
/// Key from SBPF_SERVICE_KEY, if set.
std::optional<Key> key_from_env();

struct LoadCounters {
    std::uint64_t integrity_checks = 0;
    std::uint64_t integrity_rejections = 0;
    std::uint64_t verifier_invocations = 0;
    std::uint64_t handles_disclosed = 0;
};

struct LoadResult {
    std::uint64_t base_handle;
    std::shared_ptr<shmem::SharedSegment> segment;
    verifier::VerifiedProgram program;
    bool reused_segment;
};

/// Thrown by load_library when the verifier rejects the payload.
class VerificationError : public Error {
public:
    explicit VerificationError(verifier::VerifierReport report);
    const verifier::VerifierReport& report() const noexcept { return report_; }

private:
    verifier::VerifierReport report_;
};

class LibraryLoader {
public:
    LibraryLoader(Key key, shmem::SegmentManager& manager, verifier::HelperSet helpers);

    /// Throws IntegrityRejected (bad tag or malformed container),
    /// VerificationError (VerificationRejected) or AllocationFailed. Nothing
    /// about the segment is disclosed on failure.
    LoadResult load_library(std::span<const std::uint8_t> container, shmem::TaskId task_id);

    LoadCounters counters() const;

private:
    Key key_;
    shmem::SegmentManager& manager_;
    verifier::HelperSet helpers_;
    std::mutex mutex_;
    std::atomic<std::uint64_t> integrity_checks_{0};
    std::atomic<std::uint64_t> integrity_rejections_{0};
    std::atomic<std::uint64_t> verifier_invocations_{0};
    std::atomic<std::uint64_t> handles_disclosed_{0};
};

} // namespace sbpf::integrity
