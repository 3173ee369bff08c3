#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "stylevar/common.hpp"

namespace stylevar {

// Binary checkpoint container.
//
//   magic "SVAR" | u32 version | u64 config json length | json bytes |
//   u32 entry count | entries...
//
// entry: u32 name length | name | u8 dtype (0=f64, 1=i64, 2=u64) | u8 ndims |
//        u32 dims[] | u64 fnv1a(payload) | payload
//
// All integers and floats little-endian; save -> load -> save is
// byte-identical because entry order is preserved.
class Checkpoint {
public:
    static constexpr std::uint32_t kVersion = 1;

    struct Entry {
        std::string name;
        int dtype = 0;
        std::vector<int> dims;
        std::vector<unsigned char> payload;
    };

    std::string config_json;

    void add_real(const std::string& name, std::vector<int> dims, const std::vector<real>& v) {
        check_new(name);
        Entry e;
        e.name = name;
        e.dtype = 0;
        e.dims = std::move(dims);
        check_dims(e, v.size());
        e.payload.resize(v.size() * 8);
        for (std::size_t i = 0; i < v.size(); ++i)
            put_u64(e.payload.data() + i * 8, std::bit_cast<std::uint64_t>(static_cast<double>(v[i])));
        entries_.push_back(std::move(e));
    }

    void add_i64(const std::string& name, const std::vector<std::int64_t>& v) {
        check_new(name);
        Entry e;
        e.name = name;
        e.dtype = 1;
        e.dims = {static_cast<int>(v.size())};
        e.payload.resize(v.size() * 8);
        for (std::size_t i = 0; i < v.size(); ++i)
            put_u64(e.payload.data() + i * 8, static_cast<std::uint64_t>(v[i]));
        entries_.push_back(std::move(e));
    }

    void add_u64(const std::string& name, const std::vector<std::uint64_t>& v) {
        check_new(name);
        Entry e;
        e.name = name;
        e.dtype = 2;
        e.dims = {static_cast<int>(v.size())};
        e.payload.resize(v.size() * 8);
        for (std::size_t i = 0; i < v.size(); ++i) put_u64(e.payload.data() + i * 8, v[i]);
        entries_.push_back(std::move(e));
    }

    bool has(const std::string& name) const { return find(name) != nullptr; }

    std::vector<real> get_real(const std::string& name) const {
        const Entry* e = require_entry(name, 0);
        std::vector<real> out(e->payload.size() / 8);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = static_cast<real>(
                std::bit_cast<double>(get_u64(e->payload.data() + i * 8)));
        return out;
    }

    std::vector<std::int64_t> get_i64(const std::string& name) const {
        const Entry* e = require_entry(name, 1);
        std::vector<std::int64_t> out(e->payload.size() / 8);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = static_cast<std::int64_t>(get_u64(e->payload.data() + i * 8));
        return out;
    }

    std::vector<std::uint64_t> get_u64_vec(const std::string& name) const {
        const Entry* e = require_entry(name, 2);
        std::vector<std::uint64_t> out(e->payload.size() / 8);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = get_u64(e->payload.data() + i * 8);
        return out;
    }

    std::vector<int> dims_of(const std::string& name) const {
        const Entry* e = find(name);
        require(e != nullptr, "checkpoint: no entry named ", name);
        return e->dims;
    }

    const std::vector<Entry>& entries() const { return entries_; }

    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        require(f.good(), "checkpoint save: cannot open ", path);
        f.write("SVAR", 4);
        write_u32(f, kVersion);
        write_u64(f, config_json.size());
        f.write(config_json.data(), static_cast<std::streamsize>(config_json.size()));
        write_u32(f, static_cast<std::uint32_t>(entries_.size()));
        for (const Entry& e : entries_) {
            write_u32(f, static_cast<std::uint32_t>(e.name.size()));
            f.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
            f.put(static_cast<char>(e.dtype));
            f.put(static_cast<char>(e.dims.size()));
            for (int d : e.dims) write_u32(f, static_cast<std::uint32_t>(d));
            write_u64(f, fnv1a(e.payload.data(), e.payload.size()));
            f.write(reinterpret_cast<const char*>(e.payload.data()),
                    static_cast<std::streamsize>(e.payload.size()));
        }
        require(f.good(), "checkpoint save: short write to ", path);
    }

    static Checkpoint load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        require(f.good(), "checkpoint load: cannot open ", path);
        char magic[4];
        f.read(magic, 4);
        require(f.gcount() == 4 && std::memcmp(magic, "SVAR", 4) == 0,
                "checkpoint load: bad magic in ", path);
        std::uint32_t version = read_u32(f, path);
        require(version == kVersion, "checkpoint load: unknown version ", version, " in ", path);
        Checkpoint ck;
        std::uint64_t json_len = read_u64(f, path);
        ck.config_json.resize(json_len);
        f.read(ck.config_json.data(), static_cast<std::streamsize>(json_len));
        require(f.gcount() == static_cast<std::streamsize>(json_len),
                "checkpoint load: truncated config in ", path);
        std::uint32_t count = read_u32(f, path);
        for (std::uint32_t i = 0; i < count; ++i) {
            Entry e;
            std::uint32_t name_len = read_u32(f, path);
            e.name.resize(name_len);
            f.read(e.name.data(), static_cast<std::streamsize>(name_len));
            require(f.gcount() == static_cast<std::streamsize>(name_len),
                    "checkpoint load: truncated entry name in ", path);
            int dtype = f.get();
            int ndims = f.get();
            require(dtype >= 0 && dtype <= 2 && ndims >= 0, "checkpoint load: bad entry header for ",
                    e.name);
            e.dtype = dtype;
            std::uint64_t numel = 1;
            for (int d = 0; d < ndims; ++d) {
                std::uint32_t dim = read_u32(f, path);
                e.dims.push_back(static_cast<int>(dim));
                numel *= dim;
            }
            std::uint64_t checksum = read_u64(f, path);
            e.payload.resize(numel * 8);
            f.read(reinterpret_cast<char*>(e.payload.data()),
                   static_cast<std::streamsize>(e.payload.size()));
            require(f.gcount() == static_cast<std::streamsize>(e.payload.size()),
                    "checkpoint load: truncated payload for entry ", e.name);
            require(fnv1a(e.payload.data(), e.payload.size()) == checksum,
                    "checkpoint load: checksum mismatch for entry ", e.name);
            ck.entries_.push_back(std::move(e));
        }
        return ck;
    }

private:
    const Entry* find(const std::string& name) const {
        for (const Entry& e : entries_)
            if (e.name == name) return &e;
        return nullptr;
    }
    const Entry* require_entry(const std::string& name, int dtype) const {
        const Entry* e = find(name);
        require(e != nullptr, "checkpoint: no entry named ", name);
        require(e->dtype == dtype, "checkpoint: entry ", name, " has dtype ", e->dtype,
                ", expected ", dtype);
        return e;
    }
    void check_new(const std::string& name) {
        require(find(name) == nullptr, "checkpoint: duplicate entry ", name);
    }
    static void check_dims(const Entry& e, std::size_t n) {
        std::uint64_t numel = 1;
        for (int d : e.dims) numel *= static_cast<std::uint64_t>(d);
        require(numel == n, "checkpoint: entry ", e.name, " dims do not match payload size");
    }

    static void put_u64(unsigned char* p, std::uint64_t v) {
        for (int i = 0; i < 8; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
    }
    static std::uint64_t get_u64(const unsigned char* p) {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        return v;
    }
    static void write_u32(std::ofstream& f, std::uint32_t v) {
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        f.write(reinterpret_cast<const char*>(b), 4);
    }
    static void write_u64(std::ofstream& f, std::uint64_t v) {
        unsigned char b[8];
        put_u64(b, v);
        f.write(reinterpret_cast<const char*>(b), 8);
    }
    static std::uint32_t read_u32(std::ifstream& f, const std::string& path) {
        unsigned char b[4];
        f.read(reinterpret_cast<char*>(b), 4);
        require(f.gcount() == 4, "checkpoint load: truncated file ", path);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }
    static std::uint64_t read_u64(std::ifstream& f, const std::string& path) {
        unsigned char b[8];
        f.read(reinterpret_cast<char*>(b), 8);
        require(f.gcount() == 8, "checkpoint load: truncated file ", path);
        return get_u64(b);
    }

    std::vector<Entry> entries_;
};

}  // namespace stylevar
