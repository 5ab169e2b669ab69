#include "afnio/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace afnio {

namespace {

constexpr char kMagic[6] = {'A', 'F', 'N', 'I', 'O', '\0'};

template <typename T>
void put(std::vector<unsigned char>& buf, T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    buf.insert(buf.end(), b, b + sizeof(T));
}

template <typename T>
T take(const std::vector<unsigned char>& buf, size_t& pos, size_t end) {
    if (pos + sizeof(T) > end)
        throw CheckpointException(CheckpointError::truncated, "checkpoint truncated inside a record");
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace

void CheckpointData::add_f32(const std::string& name, const std::vector<int>& shape, const float* data) {
    ArrayRecord r;
    r.name = name;
    r.dtype = kDtypeF32;
    uint64_t n = 1;
    for (int d : shape) {
        r.dims.push_back(static_cast<uint64_t>(d));
        n *= static_cast<uint64_t>(d);
    }
    r.raw.resize(n * sizeof(float));
    std::memcpy(r.raw.data(), data, r.raw.size());
    arrays.push_back(std::move(r));
}

void CheckpointData::add_f64(const std::string& name, const std::vector<int>& shape, const double* data) {
    ArrayRecord r;
    r.name = name;
    r.dtype = kDtypeF64;
    uint64_t n = 1;
    for (int d : shape) {
        r.dims.push_back(static_cast<uint64_t>(d));
        n *= static_cast<uint64_t>(d);
    }
    r.raw.resize(n * sizeof(double));
    std::memcpy(r.raw.data(), data, r.raw.size());
    arrays.push_back(std::move(r));
}

void CheckpointData::add_u64(const std::string& name, uint64_t value) {
    ArrayRecord r;
    r.name = name;
    r.dtype = kDtypeU64;
    r.dims = {1};
    r.raw.resize(sizeof(uint64_t));
    std::memcpy(r.raw.data(), &value, sizeof(uint64_t));
    arrays.push_back(std::move(r));
}

void CheckpointData::add_bytes(const std::string& name, const std::string& value) {
    ArrayRecord r;
    r.name = name;
    r.dtype = kDtypeBytes;
    r.dims = {value.size()};
    r.raw.assign(value.begin(), value.end());
    arrays.push_back(std::move(r));
}

const ArrayRecord* CheckpointData::find(const std::string& name) const {
    for (const auto& r : arrays)
        if (r.name == name) return &r;
    return nullptr;
}

const ArrayRecord& CheckpointData::require(const std::string& name) const {
    const ArrayRecord* r = find(name);
    if (!r) throw CheckpointException(CheckpointError::missing_record, "checkpoint record missing: " + name);
    return *r;
}

uint64_t CheckpointData::get_u64(const std::string& name) const {
    const auto& r = require(name);
    uint64_t v;
    std::memcpy(&v, r.raw.data(), sizeof(uint64_t));
    return v;
}

std::string CheckpointData::get_bytes(const std::string& name) const {
    const auto& r = require(name);
    return std::string(r.raw.begin(), r.raw.end());
}

std::vector<float> CheckpointData::get_f32(const std::string& name) const {
    const auto& r = require(name);
    std::vector<float> v(r.raw.size() / sizeof(float));
    std::memcpy(v.data(), r.raw.data(), r.raw.size());
    return v;
}

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
    std::vector<unsigned char> payload;
    for (const auto& r : data.arrays) {
        std::vector<unsigned char> rec;
        put<uint64_t>(rec, r.name.size());
        rec.insert(rec.end(), r.name.begin(), r.name.end());
        put<uint8_t>(rec, r.dtype);
        put<uint32_t>(rec, static_cast<uint32_t>(r.dims.size()));
        for (uint64_t d : r.dims) put<uint64_t>(rec, d);
        rec.insert(rec.end(), r.raw.begin(), r.raw.end());
        put<uint64_t>(payload, rec.size());
        payload.insert(payload.end(), rec.begin(), rec.end());
    }
    uint32_t crc = static_cast<uint32_t>(::crc32(0L, payload.data(), static_cast<uInt>(payload.size())));

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointException(CheckpointError::io, "cannot write checkpoint: " + path.string());
    os.write(kMagic, sizeof(kMagic));
    uint32_t version = data.version;
    os.write(reinterpret_cast<const char*>(&version), sizeof(version));
    uint64_t cfg_len = data.config_json.size();
    os.write(reinterpret_cast<const char*>(&cfg_len), sizeof(cfg_len));
    os.write(data.config_json.data(), static_cast<std::streamsize>(cfg_len));
    os.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    os.write(reinterpret_cast<const char*>(&crc), sizeof(crc));
    if (!os) throw CheckpointException(CheckpointError::io, "checkpoint write failed: " + path.string());
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointException(CheckpointError::io, "cannot open checkpoint: " + path.string());
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

    size_t pos = 0;
    if (buf.size() < sizeof(kMagic) + sizeof(uint32_t) + sizeof(uint64_t))
        throw CheckpointException(CheckpointError::truncated, "checkpoint shorter than its header");
    if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
        throw CheckpointException(CheckpointError::bad_magic, "not a checkpoint file: " + path.string());
    pos = sizeof(kMagic);

    CheckpointData data;
    data.version = take<uint32_t>(buf, pos, buf.size());
    if (data.version != CheckpointData::kVersion)
        throw CheckpointException(CheckpointError::version_mismatch,
                                  "checkpoint version " + std::to_string(data.version) + ", expected " +
                                      std::to_string(CheckpointData::kVersion));
    uint64_t cfg_len = take<uint64_t>(buf, pos, buf.size());
    if (pos + cfg_len + sizeof(uint32_t) > buf.size())
        throw CheckpointException(CheckpointError::truncated, "checkpoint truncated inside the config block");
    data.config_json.assign(buf.begin() + static_cast<std::ptrdiff_t>(pos),
                            buf.begin() + static_cast<std::ptrdiff_t>(pos + cfg_len));
    pos += cfg_len;

    size_t payload_begin = pos;
    size_t payload_end = buf.size() - sizeof(uint32_t);
    uint32_t stored_crc;
    std::memcpy(&stored_crc, buf.data() + payload_end, sizeof(uint32_t));
    uint32_t crc = static_cast<uint32_t>(
        ::crc32(0L, buf.data() + payload_begin, static_cast<uInt>(payload_end - payload_begin)));
    if (crc != stored_crc)
        throw CheckpointException(CheckpointError::checksum_mismatch, "checkpoint payload checksum mismatch");

    while (pos < payload_end) {
        uint64_t rec_len = take<uint64_t>(buf, pos, payload_end);
        size_t rec_end = pos + rec_len;
        if (rec_end > payload_end)
            throw CheckpointException(CheckpointError::truncated, "checkpoint truncated inside a record");
        ArrayRecord r;
        uint64_t name_len = take<uint64_t>(buf, pos, rec_end);
        if (pos + name_len > rec_end)
            throw CheckpointException(CheckpointError::truncated, "checkpoint truncated inside a record name");
        r.name.assign(buf.begin() + static_cast<std::ptrdiff_t>(pos),
                      buf.begin() + static_cast<std::ptrdiff_t>(pos + name_len));
        pos += name_len;
        r.dtype = take<uint8_t>(buf, pos, rec_end);
        uint32_t rank = take<uint32_t>(buf, pos, rec_end);
        for (uint32_t i = 0; i < rank; ++i) r.dims.push_back(take<uint64_t>(buf, pos, rec_end));
        r.raw.assign(buf.begin() + static_cast<std::ptrdiff_t>(pos), buf.begin() + static_cast<std::ptrdiff_t>(rec_end));
        pos = rec_end;
        data.arrays.push_back(std::move(r));
    }
    return data;
}

}  // namespace afnio
