#include "core/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "core/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace reca {

void NamedArrays::put(const std::string& name, std::vector<uint64_t> extents,
                      std::vector<double> data) {
    uint64_t n = 1;
    for (uint64_t e : extents) n *= e;
    if (n != data.size())
        fail(Error::Kind::invalid_arg,
             "checkpoint array '" + name + "': " + std::to_string(data.size()) +
                 " values do not fill the given extents");
    arrays[name] = {std::move(extents), std::move(data)};
}

const std::vector<double>& NamedArrays::data(const std::string& name) const {
    auto it = arrays.find(name);
    if (it == arrays.end())
        fail(Error::Kind::invalid_arg, "checkpoint has no array '" + name + "'");
    return it->second.second;
}

const std::vector<uint64_t>& NamedArrays::extents(const std::string& name) const {
    auto it = arrays.find(name);
    if (it == arrays.end())
        fail(Error::Kind::invalid_arg, "checkpoint has no array '" + name + "'");
    return it->second.first;
}

const std::string& NamedArrays::meta_at(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end())
        fail(Error::Kind::invalid_arg, "checkpoint has no metadata '" + key + "'");
    return it->second;
}

template <typename T>
static void put_raw(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
static T get_raw(std::istream& is, const std::string& path) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) fail(Error::Kind::io, "checkpoint '" + path + "': truncated");
    return v;
}

void save_checkpoint(const std::string& path, const NamedArrays& ckpt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(Error::Kind::io, "cannot write checkpoint '" + path + "'");

    // materialize metadata as byte-valued arrays so everything is one list
    std::map<std::string, std::pair<std::vector<uint64_t>, std::vector<double>>> all =
        ckpt.arrays;
    for (const auto& [key, text] : ckpt.meta) {
        std::vector<double> bytes(text.size());
        for (size_t i = 0; i < text.size(); ++i) bytes[i] = (double)(unsigned char)text[i];
        all["meta:" + key] = {{(uint64_t)text.size()}, std::move(bytes)};
    }

    os.write("RECA", 4);
    put_raw<uint32_t>(os, kCheckpointVersion);
    put_raw<uint32_t>(os, (uint32_t)all.size());
    for (const auto& [name, arr] : all) {
        put_raw<uint32_t>(os, (uint32_t)name.size());
        os.write(name.data(), (std::streamsize)name.size());
        put_raw<uint32_t>(os, (uint32_t)arr.first.size());
        for (uint64_t e : arr.first) put_raw<uint64_t>(os, e);
        os.write(reinterpret_cast<const char*>(arr.second.data()),
                 (std::streamsize)(arr.second.size() * sizeof(double)));
    }
    if (!os) fail(Error::Kind::io, "checkpoint '" + path + "': write failed");
}

NamedArrays load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(Error::Kind::io, "cannot read checkpoint '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "RECA", 4) != 0)
        fail(Error::Kind::io, "checkpoint '" + path + "': bad magic");
    uint32_t version = get_raw<uint32_t>(is, path);
    if (version != kCheckpointVersion)
        fail(Error::Kind::io, "checkpoint '" + path + "': unsupported version " +
                                  std::to_string(version));
    uint32_t count = get_raw<uint32_t>(is, path);
    NamedArrays out;
    for (uint32_t a = 0; a < count; ++a) {
        uint32_t name_len = get_raw<uint32_t>(is, path);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) fail(Error::Kind::io, "checkpoint '" + path + "': truncated");
        uint32_t rank = get_raw<uint32_t>(is, path);
        std::vector<uint64_t> extents(rank);
        uint64_t n = 1;
        for (uint32_t r = 0; r < rank; ++r) {
            extents[r] = get_raw<uint64_t>(is, path);
            n *= extents[r];
        }
        std::vector<double> data(n);
        is.read(reinterpret_cast<char*>(data.data()), (std::streamsize)(n * sizeof(double)));
        if (!is) fail(Error::Kind::io, "checkpoint '" + path + "': truncated");
        if (name.rfind("meta:", 0) == 0) {
            std::string text(data.size(), '\0');
            for (size_t i = 0; i < data.size(); ++i) text[i] = (char)(unsigned char)data[i];
            out.meta[name.substr(5)] = std::move(text);
        } else {
            out.arrays[name] = {std::move(extents), std::move(data)};
        }
    }
    return out;
}

} // namespace reca
