#include "test_support.hpp"

#include "sbpf/builder.hpp"
#include "sbpf/error.hpp"
#include "sbpf/integrity.hpp"
#include "sbpf/programs.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

using namespace sbpf;
using namespace sbpf::integrity;
using namespace sbpf::isa::ins;

namespace {

std::vector<std::uint8_t> bytes_of(std::string_view s) { return {s.begin(), s.end()}; }

std::string hex(std::span<const std::uint8_t> bytes)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    for (auto b : bytes) {
        out += digits[b >> 4];
        out += digits[b & 15];
    }
    return out;
}

Errc error_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error";
    return Errc::IoError;
}

} // namespace

TEST(Hmac, Rfc4231Case1)
{
    const std::vector<std::uint8_t> key(20, 0x0b);
    EXPECT_EQ(hex(hmac_sha256(key, bytes_of("Hi There"))),
              "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7");
}

TEST(Hmac, Rfc4231Case2)
{
    EXPECT_EQ(hex(hmac_sha256(bytes_of("Jefe"), bytes_of("what do ya want for nothing?"))),
              "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843");
}

TEST(Sign, RoundtripSameKey)
{
    const auto payload = isa::encode_program(programs::shm_roundtrip());
    const SignedLibrary lib = sign_library(payload, test::test_key(1));
    EXPECT_TRUE(verify_library(lib, test::test_key(1)));
    EXPECT_FALSE(verify_library(lib, test::test_key(2)));
    const auto container = lib.serialize();
    EXPECT_TRUE(verify_container(container, test::test_key(1)));
    EXPECT_FALSE(verify_container(container, test::test_key(2)));
}

TEST(Sign, EmptyPayload)
{
    EXPECT_EQ(error_of([] { sign_library({}, test::test_key()); }), Errc::EmptyPayload);
}

TEST(Container, Layout)
{
    const std::vector<std::uint8_t> payload{1, 2, 3};
    const auto container = sign_library(payload, test::test_key()).serialize();
    ASSERT_EQ(container.size(), kPrefixSize + 3 + kTagSize);
    EXPECT_EQ(std::string(container.begin(), container.begin() + 4), "SBPF");
    EXPECT_EQ(container[4], 1);
    EXPECT_EQ(container[5], 0);
    EXPECT_EQ(container[6], 3);
    EXPECT_EQ(container[7] | container[8] | container[9], 0);
    const auto parsed = SignedLibrary::parse(container);
    EXPECT_EQ(parsed.payload, payload);
    EXPECT_EQ(parsed.version, kVersion);
}

TEST(Container, TagCoversHeader)
{
    // Changing the version byte must break the tag even if the parser accepted it.
    auto lib = sign_library(std::vector<std::uint8_t>{9, 9}, test::test_key());
    lib.version = 2;
    EXPECT_FALSE(verify_library(lib, test::test_key()));
}

TEST(Container, EverySingleByteFlipRejected)
{
    const auto container = sign_library(isa::encode_program(programs::ring_pusher()), test::test_key()).serialize();
    for (std::size_t i = 0; i < container.size(); ++i) {
        auto bad = container;
        bad[i] ^= 0x01;
        bool accepted = false;
        try {
            accepted = verify_container(bad, test::test_key());
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), Errc::MalformedContainer);
        }
        EXPECT_FALSE(accepted) << "byte " << i;
    }
}

TEST(Container, Truncated)
{
    const auto container = sign_library(std::vector<std::uint8_t>{1, 2, 3, 4}, test::test_key()).serialize();
    for (std::size_t n : {std::size_t{0}, std::size_t{4}, kPrefixSize, container.size() - 1})
        EXPECT_EQ(error_of([&] { SignedLibrary::parse(std::span(container).first(n)); }), Errc::MalformedContainer)
            << n;
    auto longer = container;
    longer.push_back(0);
    EXPECT_EQ(error_of([&] { SignedLibrary::parse(longer); }), Errc::MalformedContainer);
}

TEST(Keys, HexRoundtrip)
{
    const Key k = test::test_key(3);
    EXPECT_EQ(parse_key_hex(key_to_hex(k)), k);
    EXPECT_EQ(key_to_hex(k).size(), 64u);
    EXPECT_EQ(error_of([] { parse_key_hex("abc"); }), Errc::IoError);
    EXPECT_EQ(error_of([] { parse_key_hex(std::string(64, 'g')); }), Errc::IoError);
}

TEST(Keys, FileAndEnvironment)
{
    const std::string path = ::testing::TempDir() + "sbpf_key.txt";
    std::ofstream(path) << "  " << key_to_hex(test::test_key(4)) << "\n";
    EXPECT_EQ(load_key_file(path), test::test_key(4));
    EXPECT_EQ(error_of([] { load_key_file("/nonexistent/key"); }), Errc::IoError);

    ::setenv("SBPF_SERVICE_KEY", key_to_hex(test::test_key(5)).c_str(), 1);
    EXPECT_EQ(key_from_env(), test::test_key(5));
    ::unsetenv("SBPF_SERVICE_KEY");
    EXPECT_FALSE(key_from_env().has_value());
}

class Loader : public ::testing::Test {
protected:
    shmem::SegmentManager manager{shmem::random_session_id(), 11};
    LibraryLoader loader{test::test_key(), manager, helpers::standard_signatures()};
};

TEST_F(Loader, AcceptsSignedVerifiableProgram)
{
    const auto result = loader.load_library(test::signed_container(programs::shm_roundtrip(), test::test_key()), 9);
    EXPECT_NE(result.segment, nullptr);
    EXPECT_EQ(result.base_handle, manager.lookup(9)->base_handle);
    EXPECT_FALSE(result.reused_segment);
    EXPECT_EQ(loader.counters().handles_disclosed, 1u);
    EXPECT_EQ(loader.counters().verifier_invocations, 1u);

    const auto again = loader.load_library(test::signed_container(programs::ring_pusher(), test::test_key()), 9);
    EXPECT_TRUE(again.reused_segment);
    EXPECT_EQ(again.base_handle, result.base_handle);
}

TEST_F(Loader, BackwardJumpRejectedWithoutStateChange)
{
    const auto prog = isa::Program::from_instructions({mov64_imm(0, 0), ja(-2), exit()});
    try {
        loader.load_library(test::signed_container(prog, test::test_key()), 9);
        FAIL();
    } catch (const VerificationError& e) {
        EXPECT_EQ(e.code(), Errc::VerificationRejected);
        EXPECT_TRUE(e.report().has(verifier::ViolationKind::BackwardJump));
    }
    EXPECT_EQ(manager.size(), 0u);
    EXPECT_EQ(manager.find(9), nullptr);
    EXPECT_EQ(loader.counters().handles_disclosed, 0u);
}

TEST_F(Loader, TamperRejectedBeforeVerification)
{
    auto container = test::signed_container(programs::shm_roundtrip(), test::test_key());
    container.back() ^= 0x80;
    EXPECT_EQ(error_of([&] { loader.load_library(container, 9); }), Errc::IntegrityRejected);
    const auto c = loader.counters();
    EXPECT_EQ(c.integrity_checks, 1u);
    EXPECT_EQ(c.integrity_rejections, 1u);
    EXPECT_EQ(c.verifier_invocations, 0u);
    EXPECT_EQ(c.handles_disclosed, 0u);
    EXPECT_EQ(manager.size(), 0u);
}

TEST_F(Loader, WrongKeyRejected)
{
    const auto container = test::signed_container(programs::shm_roundtrip(), test::test_key(2));
    EXPECT_EQ(error_of([&] { loader.load_library(container, 9); }), Errc::IntegrityRejected);
}

TEST_F(Loader, MalformedContainerIsIntegrityRejection)
{
    const std::vector<std::uint8_t> junk{'n', 'o', 'p', 'e'};
    EXPECT_EQ(error_of([&] { loader.load_library(junk, 9); }), Errc::IntegrityRejected);
    EXPECT_EQ(loader.counters().verifier_invocations, 0u);
}

TEST_F(Loader, UndecodablePayloadIsVerificationRejection)
{
    const std::vector<std::uint8_t> payload(8, 0); // opcode 0x00
    const auto container = sign_library(payload, test::test_key()).serialize();
    try {
        loader.load_library(container, 9);
        FAIL();
    } catch (const VerificationError& e) {
        EXPECT_TRUE(e.report().has(verifier::ViolationKind::InvalidInstruction));
    }
    EXPECT_EQ(manager.size(), 0u);
}
