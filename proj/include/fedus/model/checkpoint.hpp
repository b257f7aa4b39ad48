#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "fedus/model/params.hpp"
#include "fedus/version.hpp"

namespace fedus::model {

inline constexpr std::array<char, 8> checkpoint_magic{'F', 'E', 'D', 'U', 'S', '1', '\0', '\0'};

namespace detail {

class LeWriter {
public:
    explicit LeWriter(std::ostream& os) : os_(os) {}
    void u32(std::uint32_t v) { put(v); }
    void i64(std::int64_t v) { put(static_cast<std::uint64_t>(v)); }
    void f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        os_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

private:
    template <class U>
    void put(U v) {
        unsigned char b[sizeof(U)];
        for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        os_.write(reinterpret_cast<const char*>(b), sizeof(U));
    }
    std::ostream& os_;
};

class LeReader {
public:
    LeReader(std::istream& is, std::string origin) : is_(is), origin_(std::move(origin)) {}
    std::uint32_t u32() { return get<std::uint32_t>(); }
    std::int64_t i64() { return static_cast<std::int64_t>(get<std::uint64_t>()); }
    float f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
    std::string str(std::uint32_t max_len = 4096) {
        const auto n = u32();
        if (n > max_len) fail("string too long");
        std::string s(n, '\0');
        if (!is_.read(s.data(), n)) fail("truncated string");
        return s;
    }
    void bytes(char* out, std::size_t n) {
        if (!is_.read(out, static_cast<std::streamsize>(n))) fail("truncated header");
    }
    [[noreturn]] void fail(const std::string& why) const { throw ModelError("checkpoint " + origin_ + ": " + why); }

private:
    template <class U>
    U get() {
        unsigned char b[sizeof(U)];
        if (!is_.read(reinterpret_cast<char*>(b), sizeof(U))) fail("unexpected end of file");
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
        return v;
    }
    std::istream& is_;
    std::string origin_;
};

inline std::vector<std::pair<std::string, std::vector<std::int64_t>>> arch_fields(const ArchConfig& a) {
    return {{"n_filters", {a.n_filters}},
            {"kernel", {a.kernel}},
            {"dilations", std::vector<std::int64_t>(a.dilations.begin(), a.dilations.end())},
            {"n_beats", {a.n_beats}},
            {"l_in", {static_cast<std::int64_t>(a.l_in)}},
            {"l_out", {static_cast<std::int64_t>(a.l_out)}},
            {"post_skip_convs", {a.post_skip_convs}}};
}

} // namespace detail

inline std::string describe(const ArchConfig& a) {
    std::string s;
    for (const auto& [name, values] : detail::arch_fields(a)) {
        s += (s.empty() ? "" : " ") + name + "=";
        for (std::size_t i = 0; i < values.size(); ++i) s += (i ? "," : "") + std::to_string(values[i]);
    }
    return s;
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelParams<float>& p) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write checkpoint " + path.string());
    detail::LeWriter w(os);
    os.write(checkpoint_magic.data(), checkpoint_magic.size());
    w.u32(checkpoint_format_version);
    const auto fields = detail::arch_fields(p.arch);
    w.u32(static_cast<std::uint32_t>(fields.size()));
    for (const auto& [name, values] : fields) {
        w.str(name);
        w.u32(static_cast<std::uint32_t>(values.size()));
        for (auto v : values) w.i64(v);
    }
    const auto tensors = p.named();
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        w.str(name);
        w.u32(static_cast<std::uint32_t>(t->rank()));
        for (auto d : t->shape) w.u32(static_cast<std::uint32_t>(d));
        for (float v : t->data) w.f32(v);
    }
    if (!os) throw DataError("failed writing checkpoint " + path.string());
}

/// Reads a checkpoint; every tensor name and shape must match the stored ArchConfig.
inline ModelParams<float> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint " + path.string());
    detail::LeReader r(is, path.string());
    std::array<char, 8> magic{};
    r.bytes(magic.data(), magic.size());
    if (magic != checkpoint_magic) r.fail("bad magic (not a checkpoint)");
    const auto version = r.u32();
    if (version != checkpoint_format_version)
        r.fail("format version " + std::to_string(version) + ", expected " + std::to_string(checkpoint_format_version));

    std::map<std::string, std::vector<std::int64_t>> fields;
    const auto n_fields = r.u32();
    if (n_fields > 64) r.fail("implausible field count");
    for (std::uint32_t i = 0; i < n_fields; ++i) {
        auto name = r.str();
        const auto n = r.u32();
        if (n > 64) r.fail("implausible field length");
        std::vector<std::int64_t> v(n);
        for (auto& x : v) x = r.i64();
        fields[name] = std::move(v);
    }
    auto scalar = [&](const char* name) -> std::int64_t {
        auto it = fields.find(name);
        if (it == fields.end() || it->second.size() != 1) r.fail(std::string("missing arch field ") + name);
        return it->second[0];
    };
    ArchConfig a;
    a.n_filters = static_cast<int>(scalar("n_filters"));
    a.kernel = static_cast<int>(scalar("kernel"));
    a.n_beats = static_cast<int>(scalar("n_beats"));
    a.l_in = static_cast<std::size_t>(scalar("l_in"));
    a.l_out = static_cast<std::size_t>(scalar("l_out"));
    a.post_skip_convs = static_cast<int>(scalar("post_skip_convs"));
    if (!fields.count("dilations")) r.fail("missing arch field dilations");
    a.dilations.assign(fields["dilations"].begin(), fields["dilations"].end());
    try {
        validate(a);
    } catch (const Error& e) {
        r.fail(std::string("invalid stored architecture: ") + e.what());
    }

    ModelParams<float> p(a);
    auto expected = p.named();
    const auto n_tensors = r.u32();
    if (n_tensors != expected.size())
        r.fail("holds " + std::to_string(n_tensors) + " tensors, architecture needs " + std::to_string(expected.size()));
    for (auto& [name, t] : expected) {
        const auto got = r.str();
        if (got != name) r.fail("tensor '" + got + "' where '" + name + "' was expected");
        const auto rank = r.u32();
        if (rank != t->rank()) r.fail("tensor " + name + " has rank " + std::to_string(rank));
        for (std::size_t d = 0; d < rank; ++d)
            if (r.u32() != t->shape[d]) r.fail("tensor " + name + " shape differs from " + nn::shape_str(t->shape));
        for (auto& v : t->data) v = r.f32();
    }
    if (is.peek() != std::char_traits<char>::eof()) r.fail("trailing bytes");
    if (!p.all_finite()) r.fail("non-finite parameter values");
    return p;
}

/// As load_checkpoint, but the stored architecture must equal `expected`.
inline ModelParams<float> load_checkpoint(const std::filesystem::path& path, const ArchConfig& expected) {
    auto p = load_checkpoint(path);
    if (!(p.arch == expected))
        throw ModelError("checkpoint " + path.string() + ": architecture mismatch (stored " + describe(p.arch) +
                         "; configured " + describe(expected) + ")");
    return p;
}

} // namespace fedus::model
