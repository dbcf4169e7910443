#include "sbpf/pss.hpp"

#include "sbpf/error.hpp"

#include <cstring>
#include <stdexcept>

namespace sbpf::pss {

namespace {

std::span<std::uint8_t> table_bytes(std::span<std::uint8_t> region)
{
    if (region.size() < kTableSize * 2)
        throw std::invalid_argument("perceptron region too small");
    return region.first(kTableSize * 2);
}

} // namespace

PerceptronModel::PerceptronModel(std::span<std::uint8_t> region, ModelParams params)
    : region_(table_bytes(region)), params_(params)
{
}

std::int16_t PerceptronModel::weight(std::size_t index) const noexcept
{
    const std::uint8_t* p = region_.data() + 2 * index;
    return static_cast<std::int16_t>(static_cast<std::uint16_t>(p[0] | (p[1] << 8)));
}

void PerceptronModel::set_weight(std::size_t index, std::int16_t value) noexcept
{
    const auto u = static_cast<std::uint16_t>(value);
    std::uint8_t* p = region_.data() + 2 * index;
    p[0] = static_cast<std::uint8_t>(u & 0xff);
    p[1] = static_cast<std::uint8_t>(u >> 8);
}

void PerceptronModel::clear() noexcept
{
    std::memset(region_.data(), 0, region_.size());
}

Prediction PerceptronModel::predict(const Features& f) const noexcept
{
    std::int32_t margin = 0;
    for (std::size_t i = 0; i < f.size(); ++i)
        margin += weight(hash_index(f[i], params_.salts[i]));
    return {margin >= 0 ? 1 : 0, margin};
}

bool PerceptronModel::update(const Features& f, int outcome) noexcept
{
    const Prediction p = predict(f);
    const std::int32_t magnitude = p.margin < 0 ? -p.margin : p.margin;
    if (p.decision == outcome && magnitude > params_.theta)
        return false;
    const int step = outcome == 1 ? 1 : -1;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const std::uint32_t idx = hash_index(f[i], params_.salts[i]);
        const int w = weight(idx) + step;
        set_weight(idx, static_cast<std::int16_t>(w < kWeightMin ? kWeightMin : w > kWeightMax ? kWeightMax : w));
    }
    return true;
}

std::vector<std::uint8_t> encode_batch(std::span<const UpdateRecord> records)
{
    std::vector<std::uint8_t> out(4 + records.size() * kUpdateRecordWireSize);
    const auto count = static_cast<std::uint32_t>(records.size());
    std::memcpy(out.data(), &count, 4);
    std::uint8_t* p = out.data() + 4;
    for (const UpdateRecord& r : records) {
        std::memcpy(p, r.features.data(), 24);
        p[24] = r.outcome;
        p += kUpdateRecordWireSize;
    }
    return out;
}

std::vector<UpdateRecord> decode_batch(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 4)
        throw Error(Errc::ProtocolError, "batch shorter than its count field");
    std::uint32_t count;
    std::memcpy(&count, bytes.data(), 4);
    if (bytes.size() != 4 + std::size_t{count} * kUpdateRecordWireSize)
        throw Error(Errc::ProtocolError, "batch length does not match count " + std::to_string(count));
    std::vector<UpdateRecord> out(count);
    const std::uint8_t* p = bytes.data() + 4;
    for (UpdateRecord& r : out) {
        std::memcpy(r.features.data(), p, 24);
        r.outcome = p[24];
        if (r.outcome > 1)
            throw Error(Errc::ProtocolError, "update outcome must be 0 or 1");
        p += kUpdateRecordWireSize;
    }
    return out;
}

} // namespace sbpf::pss
