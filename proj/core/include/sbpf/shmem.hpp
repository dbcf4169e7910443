#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <unordered_map>

/// Emulation of the kernel-side shared memory manager: one fixed-length
/// segment per task, indexed by task ID, backed by a named POSIX shared
/// memory object that both the service and the user process map.
namespace sbpf::shmem {

using TaskId = std::uint64_t;

inline constexpr std::size_t kKiB = 1024;
inline constexpr std::size_t kSegmentSize = 1024 * kKiB;

// Segment partition.
inline constexpr std::size_t kSlotPoolOffset = 0;
inline constexpr std::size_t kSlotPoolSize = 512 * kKiB;
inline constexpr std::size_t kPssRegionOffset = 512 * kKiB;
inline constexpr std::size_t kPssRegionSize = 256 * kKiB;
inline constexpr std::size_t kRingRegionOffset = 768 * kKiB;
inline constexpr std::size_t kRingRegionSize = 256 * kKiB;

/// Non-owning view of a mapped segment plus the handle under which it was
/// disclosed.
struct SegmentView {
    std::span<std::uint8_t> bytes;
    std::uint64_t base_handle = 0;

    bool empty() const noexcept { return bytes.empty(); }

    /// Bounds-checked sub-span; throws HelperFault when [offset, offset+len)
    /// leaves the segment.
    std::span<std::uint8_t> slice(std::uint64_t offset, std::uint64_t len) const;

    std::span<std::uint8_t> pss_region() const { return slice(kPssRegionOffset, kPssRegionSize); }
    std::span<std::uint8_t> ring_region() const { return slice(kRingRegionOffset, kRingRegionSize); }
};

/// Per-thread args / return-value partition of the slot pool.
struct ThreadSlotLayout {
    std::size_t pool_base = kSlotPoolOffset;
    std::size_t args_size = 4096;
    std::size_t ret_size = 4096;
    std::size_t max_threads = 64;

    /// Throws InvalidThread when thread_id >= max_threads.
    std::size_t args_offset(std::uint64_t thread_id) const;
    std::size_t ret_offset(std::uint64_t thread_id) const;

    std::size_t pool_end() const noexcept { return pool_base + max_threads * (args_size + ret_size); }
};

/// RAII owner of one mapping of a named shared memory object.
class ShmObject {
public:
    /// Creates (exclusively) and maps a zero-filled object. Throws OutOfMemory.
    static ShmObject create(const std::string& name, std::size_t size);
    /// Maps an existing object. Throws NotFound.
    static ShmObject open(const std::string& name, std::size_t size);

    ShmObject(ShmObject&& other) noexcept;
    ShmObject& operator=(ShmObject&& other) noexcept;
    ShmObject(const ShmObject&) = delete;
    ShmObject& operator=(const ShmObject&) = delete;
    ~ShmObject();

    std::span<std::uint8_t> bytes() const noexcept { return {data_, size_}; }
    const std::string& name() const noexcept { return name_; }

    /// Removes the name now; existing mappings stay valid until destroyed.
    void unlink() noexcept;

private:
    ShmObject(std::string name, std::uint8_t* data, std::size_t size, bool owner)
        : name_(std::move(name)), data_(data), size_(size), owner_(owner)
    {
    }
    void reset() noexcept;

    std::string name_;
    std::uint8_t* data_ = nullptr;
    std::size_t size_ = 0;
    bool owner_ = false;
};

struct SharedSegment {
    TaskId task_id;
    std::size_t size;
    ShmObject backing;
    std::uint64_t base_handle;

    SegmentView view() noexcept { return {backing.bytes(), base_handle}; }
};

/// Random 128-bit session identifier formatted as a UUID.
std::string random_session_id();

/// `/sbpf-<session>-<task>`; the leading slash is the POSIX shm convention.
std::string object_name(const std::string& session_id, TaskId task_id);

class SegmentManager {
public:
    explicit SegmentManager(std::string session_id = random_session_id(),
                            std::uint64_t rng_seed = std::random_device{}(),
                            std::size_t segment_size = kSegmentSize);
    ~SegmentManager();

    SegmentManager(const SegmentManager&) = delete;
    SegmentManager& operator=(const SegmentManager&) = delete;

    /// Throws AlreadyAllocated or OutOfMemory.
    std::shared_ptr<SharedSegment> allocate(TaskId task_id);
    /// Throws NotFound.
    void release(TaskId task_id);
    /// Throws NotFound.
    std::shared_ptr<SharedSegment> lookup(TaskId task_id) const;
    std::shared_ptr<SharedSegment> find(TaskId task_id) const;

    std::size_t size() const;
    std::size_t segment_size() const noexcept { return segment_size_; }
    const std::string& session_id() const noexcept { return session_id_; }

private:
    std::string session_id_;
    std::size_t segment_size_;
    mutable std::mutex mutex_;
    std::mt19937_64 rng_;
    std::unordered_map<TaskId, std::shared_ptr<SharedSegment>> table_;
};

} // namespace sbpf::shmem
