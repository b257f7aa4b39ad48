#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "fedus/error.hpp"
#include "fedus/metrics/metrics.hpp"
#include "fedus/model/arch.hpp"
#include "fedus/preprocess/prepare.hpp"
#include "fedus/synth/synthgen.hpp"
#include "fedus/usecase/fhr.hpp"

namespace fedus::pipeline {

namespace fs = std::filesystem;

/// Everything a pipeline run needs. Defaults are the desk profile: the
/// published layer layout with 8 filters per layer and a capped epoch budget,
/// sized so the full LOSO pipeline fits a single CPU core.
struct PipelineConfig {
    synth::SynthConfig synth;
    preprocess::PrepareConfig prepare;
    std::size_t beat_len = model::samples_per_beat;  // L_in per beat
    int n_beats = 1;
    model::ArchConfig arch = model::ArchConfig::for_beats(1, 8);
    model::TrainConfig train = [] {
        model::TrainConfig t;
        t.max_epochs = 12;
        t.patience = 4;
        return t;
    }();
    metrics::EvalConfig eval;
    usecase::FhrConfig fhr;
    unsigned jobs = 1;

    fs::path work_dir = "fedus_work";
    fs::path data_dir, pairs_file, model_dir, report_dir;  // empty: derived from work_dir

    fs::path data() const { return data_dir.empty() ? work_dir / "data" : data_dir; }
    fs::path pairs() const {
        return pairs_file.empty() ? work_dir / ("pairs_b" + std::to_string(n_beats) + ".bin") : pairs_file;
    }
    fs::path models() const {
        return model_dir.empty() ? work_dir / "models" / ("b" + std::to_string(n_beats)) : model_dir;
    }
    fs::path reports() const { return report_dir.empty() ? work_dir / "reports" : report_dir; }
};

namespace detail {

using Tree = boost::property_tree::ptree;

class Reader {
public:
    explicit Reader(const Tree& t) : tree_(t) {}

    template <class T>
    void get(const std::string& section, const std::string& key, T& out) {
        known_.insert(section + "." + key);
        const auto node = tree_.get_child_optional(Tree::path_type(section + "." + key, '.'));
        if (!node) return;
        const auto text = node->get_value<std::string>();
        if constexpr (std::is_same_v<T, std::string>) {
            out = text;
        } else if constexpr (std::is_same_v<T, fs::path>) {
            out = text;
        } else if constexpr (std::is_same_v<T, bool>) {
            if (text == "true" || text == "1" || text == "yes") out = true;
            else if (text == "false" || text == "0" || text == "no") out = false;
            else fail(section, key, text);
        } else if constexpr (std::is_same_v<T, std::vector<int>>) {
            out.clear();
            std::stringstream ss(text);
            std::string item;
            while (std::getline(ss, item, ',')) out.push_back(parse<int>(section, key, item));
        } else {
            out = parse<T>(section, key, text);
        }
    }

    void reject_unknown() const {
        for (const auto& [section, body] : tree_) {
            if (body.empty() && !body.data().empty())
                throw ConfigError("config: key '" + section + "' must live in a [section]");
            for (const auto& [key, value] : body)
                if (!known_.count(section + "." + key))
                    throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
        }
    }

private:
    template <class T>
    static T parse(const std::string& section, const std::string& key, std::string text) {
        while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
        while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.erase(0, 1);
        std::istringstream is(text);
        T v{};
        is >> v;
        if (!is || !is.eof()) fail(section, key, text);
        return v;
    }
    [[noreturn]] static void fail(const std::string& section, const std::string& key, const std::string& text) {
        throw ConfigError("config: cannot parse [" + section + "] " + key + " = '" + text + "'");
    }

    const Tree& tree_;
    std::set<std::string> known_;
};

} // namespace detail

/// Checks cross-field constraints and fills the derived architecture fields.
inline void finalize(PipelineConfig& c) {
    if (c.n_beats < 1 || c.n_beats > 3) throw ConfigError("preprocess: n_beats must be 1, 2 or 3");
    if (c.beat_len == 0) throw ConfigError("preprocess: l_in must be > 0");
    c.arch.n_beats = c.n_beats;
    c.arch.l_in = c.beat_len * static_cast<std::size_t>(c.n_beats);
    c.arch.l_out = model::output_ratio * c.arch.l_in;
    c.train.n_beats = c.n_beats;
    synth::validate(c.synth);
    model::validate(c.arch);
    model::validate(c.train);
    if (c.eval.kld_bins < 1) throw ConfigError("eval: kld_bins must be >= 1");
    if (c.eval.spectral.seg_len < 8) throw ConfigError("eval: welch_seg_len must be >= 8");
    if (!(c.eval.spectral.overlap >= 0.0 && c.eval.spectral.overlap < 1.0))
        throw ConfigError("eval: welch_overlap must lie in [0, 1)");
    if (!(c.eval.frechet_scale >= 0.0)) throw ConfigError("eval: frechet_scale must be >= 0");
    if (!(c.fhr.min_correlation > 0.0 && c.fhr.min_correlation < 1.0))
        throw ConfigError("usecase: min_correlation must lie in (0, 1)");
}

/// INI grammar: `[section]` headers, `key = value` lines, `;` or `#` comments.
/// Unknown sections or keys are errors. [arch] l_out, when given, must equal
/// 8 * l_in * n_beats.
inline PipelineConfig parse_config(std::istream& in, const std::string& origin = "config") {
    detail::Tree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    PipelineConfig c;
    detail::Reader r(tree);
    auto& s = c.synth;
    r.get("synth", "n_subjects", s.n_subjects);
    r.get("synth", "duration_s", s.duration_s);
    r.get("synth", "fhr_base", s.fhr_base);
    r.get("synth", "fhr_spread", s.fhr_spread);
    r.get("synth", "fhr_variability", s.fhr_variability);
    r.get("synth", "dus_peak_hz", s.dus_peak_hz);
    r.get("synth", "noise_snr_db", s.noise_snr_db);
    r.get("synth", "fecg_snr_db", s.fecg_snr_db);
    r.get("synth", "seed", s.seed);
    r.get("synth", "n_channels", s.n_channels);
    r.get("synth", "lag_s", s.lag_s);
    r.get("synth", "corruption_fraction", s.corruption_fraction);
    r.get("synth", "peak_grid_hz", s.peak_grid_hz);

    auto& p = c.prepare;
    r.get("preprocess", "l_in", c.beat_len);
    r.get("preprocess", "n_beats", c.n_beats);
    r.get("preprocess", "max_lag_s", p.max_lag_s);
    r.get("preprocess", "envelope_lpf_hz", p.envelope_lpf_hz);
    r.get("preprocess", "dus_lo_hz", p.dus_lo_hz);
    r.get("preprocess", "dus_hi_hz", p.dus_hi_hz);
    r.get("preprocess", "fecg_lo_hz", p.fecg_lo_hz);
    r.get("preprocess", "fecg_hi_hz", p.fecg_hi_hz);
    r.get("preprocess", "snap_lag_to_fecg_grid", p.snap_lag_to_fecg_grid);

    std::size_t l_out = 0;
    r.get("arch", "n_filters", c.arch.n_filters);
    r.get("arch", "kernel", c.arch.kernel);
    r.get("arch", "dilations", c.arch.dilations);
    r.get("arch", "post_skip_convs", c.arch.post_skip_convs);
    r.get("arch", "l_out", l_out);

    r.get("train", "lr", c.train.lr);
    r.get("train", "batch_size", c.train.batch_size);
    r.get("train", "max_epochs", c.train.max_epochs);
    r.get("train", "patience", c.train.patience);
    r.get("train", "seed", c.train.seed);
    r.get("train", "val_fraction", c.train.val_fraction);

    r.get("eval", "kld_bins", c.eval.kld_bins);
    r.get("eval", "welch_seg_len", c.eval.spectral.seg_len);
    r.get("eval", "welch_overlap", c.eval.spectral.overlap);
    r.get("eval", "frechet_scale", c.eval.frechet_scale);

    r.get("usecase", "min_correlation", c.fhr.min_correlation);
    r.get("usecase", "envelope_lpf_hz", c.fhr.envelope_lpf_hz);

    r.get("run", "jobs", c.jobs);

    r.get("paths", "work_dir", c.work_dir);
    r.get("paths", "data_dir", c.data_dir);
    r.get("paths", "pairs_file", c.pairs_file);
    r.get("paths", "model_dir", c.model_dir);
    r.get("paths", "report_dir", c.report_dir);
    r.reject_unknown();

    finalize(c);
    if (l_out != 0 && l_out != c.arch.l_out)
        throw ConfigError(origin + ": [arch] l_out = " + std::to_string(l_out) + " violates L_out = 8 * L_in (" +
                          std::to_string(c.arch.l_out) + ")");
    return c;
}

inline PipelineConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    auto c = parse_config(in, path.string());
    // Relative paths in the file are resolved against the file's directory.
    const auto base = path.parent_path();
    for (auto* p : {&c.work_dir, &c.data_dir, &c.pairs_file, &c.model_dir, &c.report_dir})
        if (!p->empty() && p->is_relative()) *p = base / *p;
    return c;
}

} // namespace fedus::pipeline
