#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace afnio {

enum class CheckpointError { io, bad_magic, version_mismatch, truncated, checksum_mismatch, missing_record };

class CheckpointException : public std::runtime_error {
public:
    CheckpointException(CheckpointError kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    CheckpointError kind() const { return kind_; }

private:
    CheckpointError kind_;
};

/// dtype tags of array records
enum : uint8_t { kDtypeF32 = 0, kDtypeF64 = 1, kDtypeU64 = 2, kDtypeBytes = 3 };

struct ArrayRecord {
    std::string name;
    uint8_t dtype = kDtypeBytes;
    std::vector<uint64_t> dims;
    std::vector<unsigned char> raw;

    uint64_t element_count() const {
        uint64_t n = 1;
        for (uint64_t d : dims) n *= d;
        return n;
    }
};

/// In-memory form of a checkpoint file. On disk, little-endian:
///   magic "AFNIO\0" | u32 version | u64 config length | config text |
///   length-prefixed records (u64 record length; u64 name length; name;
///   u8 dtype; u32 rank; u64 dims[rank]; raw data) | CRC-32 of the records.
struct CheckpointData {
    static constexpr uint32_t kVersion = 1;
    uint32_t version = kVersion;
    std::string config_json;
    std::vector<ArrayRecord> arrays;

    void add_f32(const std::string& name, const std::vector<int>& shape, const float* data);
    void add_f64(const std::string& name, const std::vector<int>& shape, const double* data);
    void add_u64(const std::string& name, uint64_t value);
    void add_bytes(const std::string& name, const std::string& value);

    const ArrayRecord& require(const std::string& name) const;
    const ArrayRecord* find(const std::string& name) const;
    uint64_t get_u64(const std::string& name) const;
    std::string get_bytes(const std::string& name) const;
    std::vector<float> get_f32(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::filesystem::path& path);

static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes a little-endian host");

}  // namespace afnio
