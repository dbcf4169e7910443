#include "sbpf/shmem.hpp"

#include "sbpf/error.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

namespace sbpf::shmem {

std::span<std::uint8_t> SegmentView::slice(std::uint64_t offset, std::uint64_t len) const
{
    if (offset > bytes.size() || len > bytes.size() - offset)
        throw Error(Errc::HelperFault, "segment access [" + std::to_string(offset) + ", +" + std::to_string(len)
                                           + ") outside segment of " + std::to_string(bytes.size()) + " bytes");
    return bytes.subspan(offset, len);
}

std::size_t ThreadSlotLayout::args_offset(std::uint64_t thread_id) const
{
    if (thread_id >= max_threads)
        throw Error(Errc::InvalidThread, "thread " + std::to_string(thread_id) + " >= max_threads "
                                             + std::to_string(max_threads));
    return pool_base + thread_id * (args_size + ret_size);
}

std::size_t ThreadSlotLayout::ret_offset(std::uint64_t thread_id) const
{
    return args_offset(thread_id) + args_size;
}

ShmObject ShmObject::create(const std::string& name, std::size_t size)
{
    const int fd = ::shm_open(name.c_str(), O_CREAT | O_EXCL | O_RDWR, 0600);
    if (fd < 0)
        throw Error(Errc::OutOfMemory, "shm_open(" + name + "): " + std::strerror(errno));
    if (::ftruncate(fd, static_cast<off_t>(size)) != 0) {
        const int err = errno;
        ::close(fd);
        ::shm_unlink(name.c_str());
        throw Error(Errc::OutOfMemory, "ftruncate(" + name + "): " + std::strerror(err));
    }
    void* addr = ::mmap(nullptr, size, PROT_READ | PROT_WRITE, MAP_SHARED, fd, 0);
    const int err = errno;
    ::close(fd);
    if (addr == MAP_FAILED) {
        ::shm_unlink(name.c_str());
        throw Error(Errc::OutOfMemory, "mmap(" + name + "): " + std::strerror(err));
    }
    return ShmObject(name, static_cast<std::uint8_t*>(addr), size, true);
}

ShmObject ShmObject::open(const std::string& name, std::size_t size)
{
    const int fd = ::shm_open(name.c_str(), O_RDWR, 0600);
    if (fd < 0)
        throw Error(Errc::NotFound, "shm_open(" + name + "): " + std::strerror(errno));
    struct stat st {};
    if (::fstat(fd, &st) != 0 || static_cast<std::size_t>(st.st_size) < size) {
        ::close(fd);
        throw Error(Errc::NotFound, "shared object " + name + " is smaller than expected");
    }
    void* addr = ::mmap(nullptr, size, PROT_READ | PROT_WRITE, MAP_SHARED, fd, 0);
    const int err = errno;
    ::close(fd);
    if (addr == MAP_FAILED)
        throw Error(Errc::OutOfMemory, "mmap(" + name + "): " + std::strerror(err));
    return ShmObject(name, static_cast<std::uint8_t*>(addr), size, false);
}

ShmObject::ShmObject(ShmObject&& other) noexcept
    : name_(std::move(other.name_)), data_(other.data_), size_(other.size_), owner_(other.owner_)
{
    other.data_ = nullptr;
    other.size_ = 0;
    other.owner_ = false;
}

ShmObject& ShmObject::operator=(ShmObject&& other) noexcept
{
    if (this != &other) {
        reset();
        name_ = std::move(other.name_);
        data_ = other.data_;
        size_ = other.size_;
        owner_ = other.owner_;
        other.data_ = nullptr;
        other.size_ = 0;
        other.owner_ = false;
    }
    return *this;
}

ShmObject::~ShmObject() { reset(); }

void ShmObject::unlink() noexcept
{
    if (owner_)
        ::shm_unlink(name_.c_str());
    owner_ = false;
}

void ShmObject::reset() noexcept
{
    if (data_)
        ::munmap(data_, size_);
    if (owner_)
        ::shm_unlink(name_.c_str());
    data_ = nullptr;
    size_ = 0;
    owner_ = false;
}

std::string random_session_id()
{
    std::random_device rd;
    std::uint32_t words[4];
    for (auto& w : words)
        w = rd();
    char buf[40];
    std::snprintf(buf, sizeof buf, "%08x-%04x-%04x-%04x-%04x%08x", words[0], words[1] >> 16,
                  (words[1] & 0x0fff) | 0x4000, (words[2] >> 16 & 0x3fff) | 0x8000, words[2] & 0xffff, words[3]);
    return buf;
}

std::string object_name(const std::string& session_id, TaskId task_id)
{
    return "/sbpf-" + session_id + "-" + std::to_string(task_id);
}

SegmentManager::SegmentManager(std::string session_id, std::uint64_t rng_seed, std::size_t segment_size)
    : session_id_(std::move(session_id)), segment_size_(segment_size), rng_(rng_seed)
{
}

SegmentManager::~SegmentManager() = default;

std::shared_ptr<SharedSegment> SegmentManager::allocate(TaskId task_id)
{
    std::lock_guard lock(mutex_);
    if (table_.count(task_id))
        throw Error(Errc::AlreadyAllocated, "task " + std::to_string(task_id) + " already owns a segment");
    ShmObject backing = ShmObject::create(object_name(session_id_, task_id), segment_size_);
    const auto mapped_at = reinterpret_cast<std::uintptr_t>(backing.bytes().data());
    std::uint64_t handle = 0;
    do {
        handle = rng_();
    } while (handle == 0 || handle == mapped_at);
    auto segment = std::make_shared<SharedSegment>(SharedSegment{task_id, segment_size_, std::move(backing), handle});
    table_.emplace(task_id, segment);
    return segment;
}

void SegmentManager::release(TaskId task_id)
{
    std::shared_ptr<SharedSegment> victim;
    {
        std::lock_guard lock(mutex_);
        auto it = table_.find(task_id);
        if (it == table_.end())
            throw Error(Errc::NotFound, "task " + std::to_string(task_id) + " has no segment");
        victim = std::move(it->second);
        table_.erase(it);
        victim->backing.unlink();
    }
}

std::shared_ptr<SharedSegment> SegmentManager::lookup(TaskId task_id) const
{
    auto segment = find(task_id);
    if (!segment)
        throw Error(Errc::NotFound, "task " + std::to_string(task_id) + " has no segment");
    return segment;
}

std::shared_ptr<SharedSegment> SegmentManager::find(TaskId task_id) const
{
    std::lock_guard lock(mutex_);
    auto it = table_.find(task_id);
    return it == table_.end() ? nullptr : it->second;
}

std::size_t SegmentManager::size() const
{
    std::lock_guard lock(mutex_);
    return table_.size();
}

} // namespace sbpf::shmem
