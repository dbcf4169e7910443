#include "sbpf/integrity.hpp"

#include <cctype>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>

namespace sbpf::integrity {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v)
{
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::vector<std::uint8_t> signed_bytes(std::uint16_t version, std::span<const std::uint8_t> payload)
{
    std::vector<std::uint8_t> out;
    out.reserve(kPrefixSize + payload.size() + kTagSize);
    out.insert(out.end(), kMagic.begin(), kMagic.end());
    put_u16(out, version);
    put_u32(out, static_cast<std::uint32_t>(payload.size()));
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

int hex_digit(char c)
{
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

} // namespace

Tag hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data)
{
    Tag tag{};
    unsigned int len = 0;
    if (!HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(), data.size(), tag.data(), &len)
        || len != tag.size())
        throw std::runtime_error("HMAC-SHA256 failed");
    return tag;
}

std::vector<std::uint8_t> SignedLibrary::serialize() const
{
    std::vector<std::uint8_t> out = signed_bytes(version, payload);
    out.insert(out.end(), tag.begin(), tag.end());
    return out;
}

SignedLibrary SignedLibrary::parse(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < kPrefixSize + kTagSize)
        throw Error(Errc::MalformedContainer, "container of " + std::to_string(bytes.size()) + " bytes is truncated");
    if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
        throw Error(Errc::MalformedContainer, "bad magic");
    SignedLibrary lib;
    lib.version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
    if (lib.version != kVersion)
        throw Error(Errc::MalformedContainer, "unsupported container version " + std::to_string(lib.version));
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i)
        len |= static_cast<std::uint32_t>(bytes[6 + i]) << (8 * i);
    if (bytes.size() != kPrefixSize + std::size_t{len} + kTagSize)
        throw Error(Errc::MalformedContainer, "payload_len " + std::to_string(len) + " does not match container size "
                                                  + std::to_string(bytes.size()));
    lib.payload.assign(bytes.begin() + kPrefixSize, bytes.begin() + kPrefixSize + len);
    std::copy(bytes.end() - kTagSize, bytes.end(), lib.tag.begin());
    return lib;
}

SignedLibrary sign_library(std::span<const std::uint8_t> payload, const Key& key)
{
    if (payload.empty())
        throw Error(Errc::EmptyPayload, "cannot sign an empty payload");
    SignedLibrary lib;
    lib.payload.assign(payload.begin(), payload.end());
    lib.tag = hmac_sha256(key, signed_bytes(lib.version, lib.payload));
    return lib;
}

bool verify_library(const SignedLibrary& lib, const Key& key)
{
    const Tag expected = hmac_sha256(key, signed_bytes(lib.version, lib.payload));
    return CRYPTO_memcmp(expected.data(), lib.tag.data(), kTagSize) == 0;
}

bool verify_container(std::span<const std::uint8_t> bytes, const Key& key)
{
    return verify_library(SignedLibrary::parse(bytes), key);
}

Key parse_key_hex(std::string_view hex)
{
    if (hex.size() != 64)
        throw Error(Errc::IoError, "service key must be 64 hex characters, got " + std::to_string(hex.size()));
    Key key{};
    for (std::size_t i = 0; i < key.size(); ++i) {
        const int hi = hex_digit(hex[2 * i]);
        const int lo = hex_digit(hex[2 * i + 1]);
        if (hi < 0 || lo < 0)
            throw Error(Errc::IoError, "service key contains a non-hex character");
        key[i] = static_cast<std::uint8_t>(hi << 4 | lo);
    }
    return key;
}

std::string key_to_hex(const Key& key)
{
    static const char digits[] = "0123456789abcdef";
    std::string out;
    for (std::uint8_t b : key) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 15]);
    }
    return out;
}

Key load_key_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::IoError, "cannot read key file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back())))
        text.pop_back();
    std::size_t start = 0;
    while (start < text.size() && std::isspace(static_cast<unsigned char>(text[start])))
        ++start;
    return parse_key_hex(std::string_view(text).substr(start));
}

std::optional<Key> key_from_env()
{
    const char* value = std::getenv("SBPF_SERVICE_KEY");
    if (!value)
        return std::nullopt;
    return parse_key_hex(value);
}

VerificationError::VerificationError(verifier::VerifierReport report)
    : Error(Errc::VerificationRejected,
            "verifier rejected the program with " + std::to_string(report.violations.size()) + " violation(s)")
    , report_(std::move(report))
{
}

LibraryLoader::LibraryLoader(Key key, shmem::SegmentManager& manager, verifier::HelperSet helpers)
    : key_(key), manager_(manager), helpers_(std::move(helpers))
{
}

LoadResult LibraryLoader::load_library(std::span<const std::uint8_t> container, shmem::TaskId task_id)
{
    std::lock_guard lock(mutex_);
    ++integrity_checks_;
    SignedLibrary lib;
    bool authentic = false;
    try {
        lib = SignedLibrary::parse(container);
        authentic = verify_library(lib, key_);
    } catch (const Error&) {
        authentic = false;
    }
    if (!authentic) {
        ++integrity_rejections_;
        throw Error(Errc::IntegrityRejected, "library integrity check failed");
    }

    ++verifier_invocations_;
    std::optional<isa::Program> program;
    try {
        program.emplace(isa::decode_program(lib.payload));
    } catch (const Error& e) {
        verifier::VerifierReport report;
        report.instruction_count = lib.payload.size() / isa::kSlotSize;
        report.violations.push_back({e.position().value_or(0), verifier::ViolationKind::InvalidInstruction, e.what()});
        throw VerificationError(std::move(report));
    }
    verifier::VerifyResult verdict = verifier::verify(*program, helpers_);
    if (auto* report = std::get_if<verifier::VerifierReport>(&verdict))
        throw VerificationError(std::move(*report));

    std::shared_ptr<shmem::SharedSegment> segment = manager_.find(task_id);
    const bool reused = segment != nullptr;
    if (!segment) {
        try {
            segment = manager_.allocate(task_id);
        } catch (const Error& e) {
            throw Error(Errc::AllocationFailed, std::string("segment allocation failed: ") + e.what());
        }
    }
    ++handles_disclosed_;
    return LoadResult{segment->base_handle, segment, std::move(std::get<verifier::VerifiedProgram>(verdict)), reused};
}

LoadCounters LibraryLoader::counters() const
{
    return {integrity_checks_.load(), integrity_rejections_.load(), verifier_invocations_.load(),
            handles_disclosed_.load()};
}

} // namespace sbpf::integrity
