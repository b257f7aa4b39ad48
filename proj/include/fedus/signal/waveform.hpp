#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fedus/error.hpp"

namespace fedus::signal {

/// Uniformly sampled real signal with an explicit sampling rate in Hz.
struct Waveform {
    std::vector<double> samples;
    double fs = 0.0;

    std::size_t size() const noexcept { return samples.size(); }
    double duration() const noexcept { return fs > 0 ? static_cast<double>(samples.size()) / fs : 0.0; }
};

/// One-sided power spectral density (power per Hz) on a uniform grid starting at 0 Hz.
struct PsdEstimate {
    std::vector<double> freqs;
    std::vector<double> power;

    double df() const noexcept { return freqs.size() > 1 ? freqs[1] - freqs[0] : 0.0; }
};

inline void validate(const Waveform& w, std::size_t min_len = 1) {
    if (!(w.fs > 0.0) || !std::isfinite(w.fs))
        throw std::invalid_argument("waveform: sampling rate must be positive");
    if (w.samples.size() < min_len)
        throw std::invalid_argument("waveform: need at least " + std::to_string(min_len) + " samples");
    for (double v : w.samples)
        if (!std::isfinite(v)) throw std::invalid_argument("waveform: non-finite sample");
}

inline Waveform slice(const Waveform& w, std::size_t begin, std::size_t count) {
    Waveform out{{}, w.fs};
    if (begin >= w.size()) return out;
    const std::size_t end = std::min(w.size(), begin + count);
    out.samples.assign(w.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                       w.samples.begin() + static_cast<std::ptrdiff_t>(end));
    return out;
}

// CSV waveform files: "# fs=<Hz>" then one amplitude per line.

inline void write_csv(const Waveform& w, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw DataError("cannot open for writing: " + path);
    std::fprintf(f, "# fs=%.9g\n", w.fs);
    char buf[64];
    std::string chunk;
    chunk.reserve(1 << 16);
    for (double v : w.samples) {
        const int n = std::snprintf(buf, sizeof buf, "%.9g\n", v);
        chunk.append(buf, static_cast<std::size_t>(n));
        if (chunk.size() > (1 << 16) - 64) {
            std::fwrite(chunk.data(), 1, chunk.size(), f);
            chunk.clear();
        }
    }
    std::fwrite(chunk.data(), 1, chunk.size(), f);
    if (std::fclose(f) != 0) throw DataError("write failed: " + path);
}

inline Waveform read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open waveform: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    Waveform w;
    std::string_view rest(text);
    bool have_fs = false;
    std::size_t line_no = 0;
    while (!rest.empty()) {
        const auto nl = rest.find('\n');
        std::string_view line = rest.substr(0, nl);
        rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
        while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
        if (line.empty()) continue;
        if (line.front() == '#') {
            const auto pos = line.find("fs=");
            if (pos != std::string_view::npos) {
                const auto num = line.substr(pos + 3);
                auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), w.fs);
                if (ec != std::errc{}) throw DataError(path + ": bad fs header");
                have_fs = true;
            }
            continue;
        }
        double v = 0.0;
        auto [p, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
        if (ec != std::errc{} || p != line.data() + line.size())
            throw DataError(path + ":" + std::to_string(line_no) + ": bad sample");
        w.samples.push_back(v);
    }
    if (!have_fs) throw DataError(path + ": missing '# fs=' header");
    try {
        validate(w);
    } catch (const std::invalid_argument& e) {
        throw DataError(path + ": " + e.what());
    }
    return w;
}

} // namespace fedus::signal
