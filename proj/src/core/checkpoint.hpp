#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace reca {

// Checkpoint container: named f64 arrays plus string metadata.
//
// On-disk layout (all integers little-endian):
//   magic "RECA" | version u32 | array count u32
//   per array: name length u32 | name bytes | rank u32 | extents u64[rank]
//              | row-major f64 payload
// Metadata entries ride along as arrays named "meta:<key>" holding one byte
// value per element, so the format stays a pure named-array container and
// round-trips stay bit-exact.
struct NamedArrays {
    std::map<std::string, std::pair<std::vector<uint64_t>, std::vector<double>>> arrays;
    std::map<std::string, std::string> meta;

    void put(const std::string& name, std::vector<uint64_t> extents, std::vector<double> data);
    const std::vector<double>& data(const std::string& name) const;
    const std::vector<uint64_t>& extents(const std::string& name) const;
    bool has(const std::string& name) const { return arrays.count(name) != 0; }
    const std::string& meta_at(const std::string& key) const;
};

inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const NamedArrays& ckpt);
NamedArrays load_checkpoint(const std::string& path);

} // namespace reca
