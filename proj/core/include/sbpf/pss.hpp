#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

/// Hashed perceptron predictor whose weight table lives in shared memory.
namespace sbpf::pss {

inline constexpr std::uint64_t kHashMultiplier = 0x9E3779B97F4A7C15ull;
inline constexpr unsigned kIndexBits = 14;
inline constexpr std::size_t kTableSize = std::size_t{1} << kIndexBits;
inline constexpr std::int16_t kWeightMin = -128;
inline constexpr std::int16_t kWeightMax = 127;

/// ((feature ^ salt) * 0x9E3779B97F4A7C15 mod 2^64) >> 50
constexpr std::uint32_t hash_index(std::uint64_t feature, std::uint64_t salt) noexcept
{
    return static_cast<std::uint32_t>(((feature ^ salt) * kHashMultiplier) >> (64 - kIndexBits));
}

struct ModelParams {
    std::array<std::uint64_t, 3> salts{1, 2, 3};
    std::int32_t theta = 48;
};

using Features = std::array<std::uint64_t, 3>;

struct Prediction {
    int decision = 1;
    std::int32_t margin = 0;

    friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Non-owning view over a weight table stored as little-endian int16.
class PerceptronModel {
public:
    /// `region` must hold at least kTableSize * 2 bytes.
    explicit PerceptronModel(std::span<std::uint8_t> region, ModelParams params = {});

    Prediction predict(const Features& f) const noexcept;
    /// Returns true when the weights were changed.
    bool update(const Features& f, int outcome) noexcept;

    std::int16_t weight(std::size_t index) const noexcept;
    void set_weight(std::size_t index, std::int16_t value) noexcept;
    void clear() noexcept;

    const ModelParams& params() const noexcept { return params_; }
    std::span<const std::uint8_t> bytes() const noexcept { return region_; }

private:
    std::span<std::uint8_t> region_;
    ModelParams params_;
};

/// A model with its own heap-backed table; used as a reference and by tests.
class LocalModel {
public:
    explicit LocalModel(ModelParams params = {}) : storage_(kTableSize * 2), model_(storage_, params) {}
    LocalModel(const LocalModel& other) : storage_(other.storage_), model_(storage_, other.model_.params()) {}
    LocalModel& operator=(const LocalModel&) = delete;

    PerceptronModel& model() noexcept { return model_; }
    const PerceptronModel& model() const noexcept { return model_; }

private:
    std::vector<std::uint8_t> storage_;
    PerceptronModel model_;
};

struct UpdateRecord {
    Features features{};
    std::uint8_t outcome = 0;

    friend bool operator==(const UpdateRecord&, const UpdateRecord&) = default;
};

inline constexpr std::size_t kDefaultBatchSize = 64;
inline constexpr std::size_t kUpdateRecordWireSize = 3 * 8 + 1;

struct UpdateBatch {
    std::vector<UpdateRecord> pending;
    std::size_t batch_size = kDefaultBatchSize;

    bool full() const noexcept { return pending.size() >= batch_size; }
};

/// u32 count, then count x (3 x u64 features, u8 outcome), little-endian.
std::vector<std::uint8_t> encode_batch(std::span<const UpdateRecord> records);
/// Throws ProtocolError on malformed input.
std::vector<UpdateRecord> decode_batch(std::span<const std::uint8_t> bytes);

} // namespace sbpf::pss
