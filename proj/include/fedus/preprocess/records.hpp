#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedus/error.hpp"
#include "fedus/signal/waveform.hpp"

namespace fedus::preprocess {

using signal::Waveform;

inline constexpr double segment_seconds = 3.75;
inline constexpr double dus_rate = 2000.0;
inline constexpr double fecg_rate = 250.0;
inline constexpr std::size_t rate_ratio = 8;  // dus_rate / fecg_rate

/// Dual-annotator quality labels for one 3.75 s segment.
struct SegmentAnnotation {
    double start = 0.0;
    double duration = segment_seconds;
    std::array<int, 2> dus_sqi{1, 1};
    std::vector<std::array<int, 2>> fecg_sqi;  // per channel (annotator A, B)
    std::vector<int> auto_rank;                // per channel, 1 = best

    double end() const noexcept { return start + duration; }
};

/// Generator-side truth, present only for synthetic subjects.
struct SubjectTruth {
    std::vector<double> segment_fhr;  // mean of 60/interval over beats in each segment
    double injected_lag_s = 0.0;
};

struct SubjectRecord {
    std::string subject_id;
    Waveform dus;
    std::vector<Waveform> fecg_channels;
    std::vector<double> peaks;  // R-peak times, seconds
    std::vector<SegmentAnnotation> segments;
    std::optional<SubjectTruth> truth;
};

/// One aligned training example. dus_out has 8x the samples of fecg_in.
struct BeatPair {
    std::vector<float> fecg_in;
    std::vector<float> dus_out;
    std::string subject_id;
    double peak_time = 0.0;
};

inline void validate_annotation(const SegmentAnnotation& seg, std::size_t n_channels) {
    auto bad = [](int v) { return v < 1 || v > 5; };
    if (std::abs(seg.duration - segment_seconds) > 1e-9)
        throw DataError("segment duration must be 3.75 s");
    if (bad(seg.dus_sqi[0]) || bad(seg.dus_sqi[1])) throw DataError("DUS SQI outside 1..5");
    if (seg.fecg_sqi.size() != n_channels || seg.auto_rank.size() != n_channels)
        throw DataError("segment annotation does not cover every FECG channel");
    for (const auto& s : seg.fecg_sqi)
        if (bad(s[0]) || bad(s[1])) throw DataError("FECG SQI outside 1..5");
    std::vector<int> ranks = seg.auto_rank;
    std::sort(ranks.begin(), ranks.end());
    for (std::size_t i = 0; i < ranks.size(); ++i)
        if (ranks[i] != static_cast<int>(i) + 1) throw DataError("auto_rank is not a permutation of 1..n");
}

inline void validate_record(const SubjectRecord& rec) {
    try {
        signal::validate(rec.dus);
        if (rec.fecg_channels.empty() || rec.fecg_channels.size() > 7)
            throw DataError(rec.subject_id + ": need 1-7 FECG channels");
        for (const auto& ch : rec.fecg_channels) {
            signal::validate(ch);
            if (ch.size() != rec.fecg_channels.front().size() || ch.fs != rec.fecg_channels.front().fs)
                throw DataError(rec.subject_id + ": FECG channels differ in length or rate");
        }
    } catch (const std::invalid_argument& e) {
        throw DataError(rec.subject_id + ": " + e.what());
    }
    const double dur = rec.fecg_channels.front().duration();
    for (std::size_t i = 0; i < rec.peaks.size(); ++i) {
        if (i > 0 && !(rec.peaks[i] > rec.peaks[i - 1]))
            throw DataError(rec.subject_id + ": peaks must be strictly ascending");
        if (rec.peaks[i] < 0.0 || rec.peaks[i] >= dur)
            throw DataError(rec.subject_id + ": peak outside signal duration");
    }
    for (const auto& seg : rec.segments) validate_annotation(seg, rec.fecg_channels.size());
}

// ------------------------------------------------------------------ manifest

inline nlohmann::json annotation_to_json(const SegmentAnnotation& s) {
    nlohmann::json fe = nlohmann::json::array();
    for (const auto& p : s.fecg_sqi) fe.push_back({p[0], p[1]});
    return {{"start", s.start},
            {"duration", s.duration},
            {"dus_sqi", {s.dus_sqi[0], s.dus_sqi[1]}},
            {"fecg_sqi", fe},
            {"auto_rank", s.auto_rank}};
}

inline SegmentAnnotation annotation_from_json(const nlohmann::json& j) {
    SegmentAnnotation s;
    s.start = j.at("start").get<double>();
    s.duration = j.at("duration").get<double>();
    const auto& d = j.at("dus_sqi");
    if (d.size() != 2) throw DataError("dus_sqi must hold two scores");
    s.dus_sqi = {d[0].get<int>(), d[1].get<int>()};
    for (const auto& p : j.at("fecg_sqi")) {
        if (p.size() != 2) throw DataError("fecg_sqi entries must hold two scores");
        s.fecg_sqi.push_back({p[0].get<int>(), p[1].get<int>()});
    }
    s.auto_rank = j.at("auto_rank").get<std::vector<int>>();
    return s;
}

/// Writes `<dir>/<id>.json` plus one CSV per waveform. Returns the manifest path.
inline std::filesystem::path write_subject(const SubjectRecord& rec, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["subject_id"] = rec.subject_id;
    const std::string dus_name = rec.subject_id + "_dus.csv";
    signal::write_csv(rec.dus, (dir / dus_name).string());
    j["dus"] = dus_name;
    j["fecg_channels"] = nlohmann::json::array();
    for (std::size_t c = 0; c < rec.fecg_channels.size(); ++c) {
        const std::string name = rec.subject_id + "_fecg" + std::to_string(c + 1) + ".csv";
        signal::write_csv(rec.fecg_channels[c], (dir / name).string());
        j["fecg_channels"].push_back(name);
    }
    j["peaks"] = rec.peaks;
    j["segments"] = nlohmann::json::array();
    for (const auto& s : rec.segments) j["segments"].push_back(annotation_to_json(s));
    if (rec.truth) {
        j["ground_truth"] = {{"segment_fhr", rec.truth->segment_fhr},
                             {"injected_lag_s", rec.truth->injected_lag_s}};
    }
    const auto path = dir / (rec.subject_id + ".json");
    std::ofstream(path) << j.dump(1) << '\n';
    return path;
}

inline SubjectRecord read_subject(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw DataError("cannot open manifest: " + manifest.string());
    SubjectRecord rec;
    try {
        const auto j = nlohmann::json::parse(in);
        const auto dir = manifest.parent_path();
        rec.subject_id = j.at("subject_id").get<std::string>();
        rec.dus = signal::read_csv((dir / j.at("dus").get<std::string>()).string());
        for (const auto& p : j.at("fecg_channels")) rec.fecg_channels.push_back(signal::read_csv((dir / p.get<std::string>()).string()));
        rec.peaks = j.at("peaks").get<std::vector<double>>();
        for (const auto& s : j.at("segments")) rec.segments.push_back(annotation_from_json(s));
        if (j.contains("ground_truth")) {
            SubjectTruth t;
            t.segment_fhr = j["ground_truth"].at("segment_fhr").get<std::vector<double>>();
            t.injected_lag_s = j["ground_truth"].at("injected_lag_s").get<double>();
            rec.truth = t;
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(manifest.string() + ": " + e.what());
    }
    validate_record(rec);
    return rec;
}

/// A dataset directory holds dataset.json listing subject manifests in order.
inline void write_dataset(const std::vector<SubjectRecord>& subjects, const std::filesystem::path& dir) {
    nlohmann::json index;
    index["subjects"] = nlohmann::json::array();
    for (const auto& s : subjects) index["subjects"].push_back(write_subject(s, dir).filename().string());
    std::ofstream(dir / "dataset.json") << index.dump(1) << '\n';
}

inline std::vector<std::filesystem::path> dataset_manifests(const std::filesystem::path& dir) {
    std::ifstream in(dir / "dataset.json");
    if (!in) throw DataError("missing dataset index: " + (dir / "dataset.json").string());
    std::vector<std::filesystem::path> out;
    try {
        const auto index = nlohmann::json::parse(in);
        for (const auto& s : index.at("subjects")) out.push_back(dir / s.get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("dataset.json: ") + e.what());
    }
    return out;
}

// ------------------------------------------------------------ pair archive
// Little endian: "FDPAIR1\0", u32 count, per pair: u32 id length, id bytes,
// f64 peak_time, u32 n_in, n_in x f32, u32 n_out, n_out x f32.

namespace detail {

static_assert(std::endian::native == std::endian::little, "archive IO assumes a little-endian host");

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw DataError("archive truncated");
    return v;
}

inline std::string get_string(std::istream& is, std::size_t limit = 1 << 20) {
    const auto n = get<std::uint32_t>(is);
    if (n > limit) throw DataError("archive string length implausible");
    std::string s(n, '\0');
    if (n && !is.read(s.data(), n)) throw DataError("archive truncated");
    return s;
}

inline void put_floats(std::ostream& os, const std::vector<float>& v) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(v.size()));
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

inline std::vector<float> get_floats(std::istream& is) {
    const auto n = get<std::uint32_t>(is);
    if (n > (1u << 28)) throw DataError("archive vector length implausible");
    std::vector<float> v(n);
    if (n && !is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float))))
        throw DataError("archive truncated");
    return v;
}

inline constexpr char pair_magic[8] = {'F', 'D', 'P', 'A', 'I', 'R', '1', '\0'};

} // namespace detail

inline void write_pair_archive(const std::vector<BeatPair>& pairs, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write archive: " + path.string());
    os.write(detail::pair_magic, 8);
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(pairs.size()));
    for (const auto& p : pairs) {
        detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(p.subject_id.size()));
        os.write(p.subject_id.data(), static_cast<std::streamsize>(p.subject_id.size()));
        detail::put<double>(os, p.peak_time);
        detail::put_floats(os, p.fecg_in);
        detail::put_floats(os, p.dus_out);
    }
    if (!os) throw DataError("archive write failed: " + path.string());
}

inline std::vector<BeatPair> read_pair_archive(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open archive: " + path.string());
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, detail::pair_magic, 8) != 0)
        throw DataError(path.string() + ": not a beat-pair archive");
    const auto count = detail::get<std::uint32_t>(is);
    std::vector<BeatPair> pairs(count);
    for (auto& p : pairs) {
        p.subject_id = detail::get_string(is);
        p.peak_time = detail::get<double>(is);
        p.fecg_in = detail::get_floats(is);
        p.dus_out = detail::get_floats(is);
    }
    return pairs;
}

} // namespace fedus::preprocess
