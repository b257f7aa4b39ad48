#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fedus/metrics/metrics.hpp"
#include "fedus/metrics/svg.hpp"
#include "fedus/model/checkpoint.hpp"
#include "fedus/model/loso.hpp"
#include "fedus/pipeline/config.hpp"
#include "fedus/preprocess/beats.hpp"
#include "fedus/preprocess/prepare.hpp"
#include "fedus/preprocess/records.hpp"
#include "fedus/synth/synthgen.hpp"
#include "fedus/usecase/fhr.hpp"

namespace fedus::pipeline {

using Log = std::function<void(const std::string&)>;

inline Log stderr_log() {
    return [](const std::string& line) { std::cerr << line << '\n'; };
}

/// Generated beats whose Welch PSD peaks inside this band count as DUS-like.
inline constexpr double psd_peak_lo_hz = 150.0;
inline constexpr double psd_peak_hi_hz = 300.0;

namespace detail {

inline std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

inline void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw DataError("write failed: " + path.string());
}

inline std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing input: " + path.string());
    std::vector<std::vector<std::string>> rows;
    for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

inline std::vector<double> to_double(const std::vector<float>& v) { return {v.begin(), v.end()}; }

inline std::vector<preprocess::BeatPair> load_pairs(const PipelineConfig& c) {
    if (!fs::exists(c.pairs())) throw DataError("missing beat-pair archive " + c.pairs().string() + " (run preprocess)");
    auto pairs = preprocess::read_pair_archive(c.pairs());
    if (pairs.empty()) throw DataError("beat-pair archive is empty: " + c.pairs().string());
    for (const auto& p : pairs)
        if (p.fecg_in.size() != c.arch.l_in || p.dus_out.size() != c.arch.l_out)
            throw ConfigError("archive " + c.pairs().string() + " holds windows of " + std::to_string(p.fecg_in.size()) +
                              " -> " + std::to_string(p.dus_out.size()) + " samples; config expects " +
                              std::to_string(c.arch.l_in) + " -> " + std::to_string(c.arch.l_out));
    return pairs;
}

inline std::string tag(const PipelineConfig& c) { return "b" + std::to_string(c.n_beats); }

} // namespace detail

inline fs::path fold_checkpoint(const PipelineConfig& c, const std::string& subject) {
    return c.models() / ("fold_" + subject + ".ckpt");
}

// ------------------------------------------------------------------- synth

inline void run_synth(const PipelineConfig& c, const Log& log = stderr_log()) {
    log("synth: " + std::to_string(c.synth.n_subjects) + " subjects x " + detail::fmt("%g", c.synth.duration_s) + " s");
    const auto data = synth::gen_dataset(c.synth);
    fs::create_directories(c.data());
    preprocess::write_dataset(data, c.data());
    log("synth: wrote " + c.data().string());
}

// -------------------------------------------------------------- preprocess

/// Prepares every subject and writes the beat-pair archive plus a lag table.
/// Returns the number of pairs.
inline std::size_t run_preprocess(const PipelineConfig& c, const Log& log = stderr_log()) {
    const auto manifests = preprocess::dataset_manifests(c.data());
    std::vector<std::vector<preprocess::BeatPair>> per_subject(manifests.size());
    std::vector<std::pair<std::string, double>> lags(manifests.size());
    parallel_for(manifests.size(), c.jobs, [&](std::size_t i) {
        const auto prepared = preprocess::prepare_subject(preprocess::read_subject(manifests[i]), c.prepare);
        lags[i] = {prepared.record.subject_id, prepared.lag_s};
        per_subject[i] = preprocess::extract_beat_pairs(prepared.record, c.n_beats, c.beat_len);
    });
    std::vector<preprocess::BeatPair> pairs;
    std::string lag_csv = "subject_id,lag_s,n_pairs\n";
    for (std::size_t i = 0; i < manifests.size(); ++i) {
        log("preprocess: " + lags[i].first + " lag " + detail::fmt("%.4f", lags[i].second) + " s, " +
            std::to_string(per_subject[i].size()) + " pairs");
        lag_csv += lags[i].first + detail::fmt(",%.9g", lags[i].second) + "," + std::to_string(per_subject[i].size()) + "\n";
        for (auto& p : per_subject[i]) pairs.push_back(std::move(p));
    }
    if (pairs.empty()) throw DataError("preprocess: no beat pairs extracted");
    fs::create_directories(c.pairs().parent_path());
    preprocess::write_pair_archive(pairs, c.pairs());
    detail::write_text(c.work_dir / ("lags_" + detail::tag(c) + ".csv"), lag_csv);
    log("preprocess: wrote " + std::to_string(pairs.size()) + " pairs to " + c.pairs().string());
    return pairs.size();
}

// ------------------------------------------------------------------- train

struct FoldSummary {
    std::string subject;
    double rmse_model = 0.0;
    double rmse_baseline = 0.0;
    int best_epoch = 0;
    std::size_t n_test = 0;
};

inline std::string loso_summary_csv(const std::vector<FoldSummary>& folds) {
    std::string s = "fold,n_test,rmse_model,rmse_baseline,ratio,best_epoch\n";
    for (const auto& f : folds) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s,%zu,%.9g,%.9g,%.9g,%d\n", f.subject.c_str(), f.n_test, f.rmse_model,
                      f.rmse_baseline, f.rmse_model / f.rmse_baseline, f.best_epoch);
        s += buf;
    }
    return s;
}

/// With `loso`, one model per held-out subject (fold_<id>.ckpt, history_<id>.csv,
/// loso_summary.csv); otherwise one model on all pairs (model.ckpt, history.csv).
inline std::vector<FoldSummary> run_train(const PipelineConfig& c, bool loso, const Log& log = stderr_log()) {
    const auto pairs = detail::load_pairs(c);
    fs::create_directories(c.models());
    auto epoch_line = [&](const std::string& who, const model::HistoryRow& r) {
        log("train " + who + ": epoch " + std::to_string(r.epoch) + " train " + detail::fmt("%.6f", r.train_mse) +
            " val " + detail::fmt("%.6f", r.val_mse));
    };
    if (!loso) {
        log("train: " + std::to_string(pairs.size()) + " pairs, " + model::describe(c.arch));
        const auto res = model::train<float>(pairs, c.arch, c.train,
                                             [&](const model::HistoryRow& r) { epoch_line("all", r); });
        model::save_checkpoint(c.models() / "model.ckpt", res.params);
        model::write_history_csv(c.models() / "history.csv", res.history);
        log("train: best epoch " + std::to_string(res.best_epoch) + ", wrote " + (c.models() / "model.ckpt").string());
        return {};
    }
    log("train: LOSO over " + std::to_string(preprocess::subject_ids(pairs).size()) + " subjects, " +
        model::describe(c.arch));
    const auto folds = model::run_loso(pairs, c.arch, c.train, c.jobs, epoch_line);
    std::vector<FoldSummary> out;
    for (const auto& f : folds) {
        model::save_checkpoint(fold_checkpoint(c, f.held_out), f.trained.params);
        model::write_history_csv(c.models() / ("history_" + f.held_out + ".csv"), f.trained.history);
        out.push_back({f.held_out, f.rmse_model, f.rmse_baseline, f.trained.best_epoch, f.test.size()});
        log("train " + f.held_out + ": test RMSE " + detail::fmt("%.4f", f.rmse_model) + " vs mean-beat " +
            detail::fmt("%.4f", f.rmse_baseline));
    }
    detail::write_text(c.models() / "loso_summary.csv", loso_summary_csv(out));
    return out;
}

// ---------------------------------------------------------------- generate

/// Maps each FECG window CSV (L_in samples at 250 Hz) to a DUS CSV at 2 kHz.
inline std::vector<fs::path> run_generate(const PipelineConfig& c, const std::vector<fs::path>& inputs,
                                          const fs::path& out_dir, fs::path checkpoint = {},
                                          const Log& log = stderr_log()) {
    if (inputs.empty()) throw ConfigError("generate: no input files");
    if (checkpoint.empty()) checkpoint = c.models() / "model.ckpt";
    if (!fs::exists(checkpoint)) throw DataError("generate: missing checkpoint " + checkpoint.string());
    const auto params = model::load_checkpoint(checkpoint, c.arch);
    std::vector<std::vector<float>> windows;
    for (const auto& in : inputs) {
        const auto w = signal::read_csv(in.string());
        if (w.size() != c.arch.l_in)
            throw DataError("generate: " + in.string() + " has " + std::to_string(w.size()) + " samples, expected " +
                            std::to_string(c.arch.l_in));
        windows.emplace_back(w.samples.begin(), w.samples.end());
    }
    const auto outs = model::predict_batch(params, windows, c.jobs);
    fs::create_directories(out_dir);
    std::vector<fs::path> written;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto path = out_dir / (inputs[i].stem().string() + "_dus.csv");
        signal::write_csv(signal::Waveform{detail::to_double(outs[i]), preprocess::dus_rate}, path.string());
        written.push_back(path);
    }
    log("generate: wrote " + std::to_string(written.size()) + " DUS beats to " + out_dir.string());
    return written;
}

// -------------------------------------------------------------------- eval

struct EvalSummary {
    metrics::MetricsReport model, baseline;
    double mean_fold_rmse_model = 0.0;
    double mean_fold_rmse_baseline = 0.0;
    double psd_peak_fraction = 0.0;  // generated beats with Welch argmax in [150, 300] Hz
    double dataset_psdd = 0.0;       // RMS dB distance of the mean spectra
    std::size_t n_folds = 0;

    double rmse_ratio() const { return mean_fold_rmse_model / mean_fold_rmse_baseline; }
};

inline double psd_peak_hz(std::span<const double> x, const metrics::SpectralConfig& cfg) {
    const auto p = signal::welch_psd(x, cfg.fs, cfg.seg_len, cfg.overlap);
    const auto k = static_cast<std::size_t>(std::max_element(p.power.begin(), p.power.end()) - p.power.begin());
    return p.freqs[k];
}

inline std::string eval_summary_csv(const EvalSummary& s) {
    std::string out = "n_folds,mean_fold_rmse_model,mean_fold_rmse_baseline,rmse_ratio,psd_peak_fraction,dataset_psdd_db\n";
    char buf[200];
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g\n", s.n_folds, s.mean_fold_rmse_model,
                  s.mean_fold_rmse_baseline, s.rmse_ratio(), s.psd_peak_fraction, s.dataset_psdd);
    return out + buf;
}

/// Scores held-out predictions of every LOSO fold checkpoint. With `identity`
/// the real beats are scored against themselves and no model is needed.
inline EvalSummary run_eval(const PipelineConfig& c, bool identity = false, const Log& log = stderr_log()) {
    const auto pairs = detail::load_pairs(c);
    const auto ids = preprocess::subject_ids(pairs);
    const auto dir = c.reports();
    fs::create_directories(dir);
    const auto sc = c.eval.spectral;

    std::vector<std::pair<std::string, metrics::MetricsReport>> model_rows, base_rows;
    std::vector<metrics::PairMetrics> all_model, all_base;
    std::vector<std::vector<double>> all_real, all_gen;
    std::vector<double> fold_model, fold_base;
    std::size_t in_band = 0;

    for (const auto& id : ids) {
        auto [train_pairs, test] = preprocess::loso_split(pairs, id);
        std::vector<std::vector<float>> preds;
        if (identity) {
            for (const auto& p : test) preds.push_back(p.dus_out);
        } else {
            const auto ckpt = fold_checkpoint(c, id);
            if (!fs::exists(ckpt)) throw DataError("eval: missing fold checkpoint " + ckpt.string() + " (run train --loso)");
            std::vector<std::vector<float>> inputs;
            for (const auto& p : test) inputs.push_back(p.fecg_in);
            preds = model::predict_batch(model::load_checkpoint(ckpt, c.arch), inputs, c.jobs);
        }
        const auto baseline = identity ? std::vector<float>{} : model::mean_beat(train_pairs);

        std::vector<std::vector<double>> reals, gens, bases;
        for (std::size_t i = 0; i < test.size(); ++i) {
            reals.push_back(detail::to_double(test[i].dus_out));
            gens.push_back(detail::to_double(preds[i]));
            if (!identity) bases.push_back(detail::to_double(baseline));
        }
        const auto m = metrics::evaluate_pairs(reals, gens, c.eval, c.jobs);
        model_rows.emplace_back(id, metrics::aggregate(m));
        all_model.insert(all_model.end(), m.begin(), m.end());

        // Pooled per-fold RMSE, as in the LOSO training summary.
        auto pooled = [&](const std::vector<std::vector<double>>& g) {
            double acc = 0.0;
            std::size_t n = 0;
            for (std::size_t i = 0; i < reals.size(); ++i)
                for (std::size_t j = 0; j < reals[i].size(); ++j) {
                    const double d = g[i][j] - reals[i][j];
                    acc += d * d;
                    ++n;
                }
            return std::sqrt(acc / static_cast<double>(n));
        };
        fold_model.push_back(pooled(gens));
        if (!identity) {
            const auto b = metrics::evaluate_pairs(reals, bases, c.eval, c.jobs);
            base_rows.emplace_back(id, metrics::aggregate(b));
            all_base.insert(all_base.end(), b.begin(), b.end());
            fold_base.push_back(pooled(bases));
        }
        for (const auto& g : gens) {
            const double f = psd_peak_hz(g, sc);
            in_band += f >= psd_peak_lo_hz && f <= psd_peak_hi_hz;
        }
        log("eval " + id + ": " + std::to_string(test.size()) + " pairs, RMSE " +
            detail::fmt("%.4f", model_rows.back().second.metric[metrics::RMSE].mean));
        for (auto& r : reals) all_real.push_back(std::move(r));
        for (auto& g : gens) all_gen.push_back(std::move(g));
    }

    EvalSummary s;
    s.n_folds = ids.size();
    s.model = metrics::aggregate(all_model);
    model_rows.emplace_back("all", s.model);
    const auto tag = detail::tag(c);
    metrics::write_report_csv((dir / ("metrics_" + tag + ".csv")).string(), model_rows);
    auto mean = [](const std::vector<double>& v) {
        return v.empty() ? 0.0 : metrics::summarize(v).mean;
    };
    s.mean_fold_rmse_model = mean(fold_model);
    if (!identity) {
        s.baseline = metrics::aggregate(all_base);
        base_rows.emplace_back("all", s.baseline);
        metrics::write_report_csv((dir / ("baseline_" + tag + ".csv")).string(), base_rows);
        s.mean_fold_rmse_baseline = mean(fold_base);
    }
    s.psd_peak_fraction = static_cast<double>(in_band) / static_cast<double>(all_gen.size());
    const auto real_psd = metrics::mean_psd(all_real, sc), gen_psd = metrics::mean_psd(all_gen, sc);
    s.dataset_psdd = metrics::psd_difference(real_psd, gen_psd);
    metrics::write_psd_svg((dir / ("psd_" + tag + ".svg")).string(), real_psd, gen_psd,
                           "Mean PSD, " + std::to_string(c.n_beats) + "-beat input");
    detail::write_text(dir / ("eval_summary_" + tag + ".csv"), eval_summary_csv(s));
    log("eval: RMSE " + detail::fmt("%.4f", s.mean_fold_rmse_model) +
        (identity ? std::string() : " vs mean-beat " + detail::fmt("%.4f", s.mean_fold_rmse_baseline)) +
        ", PSD peak in band " + detail::fmt("%.3f", s.psd_peak_fraction));
    return s;
}

// ----------------------------------------------------------------- usecase

struct UsecaseSummary {
    std::vector<usecase::FhrResult> results;
    usecase::AgreementStats stats;
    std::size_t quality_good = 0;
};

/// For each subject, regenerates its accepted segments with the fold model that
/// never saw it, then estimates FHR on the generated DUS.
inline UsecaseSummary run_usecase(const PipelineConfig& c, const Log& log = stderr_log()) {
    if (c.n_beats != 1) throw ConfigError("usecase: segment stitching needs a single-beat model (n_beats = 1)");
    UsecaseSummary s;
    for (const auto& manifest : preprocess::dataset_manifests(c.data())) {
        const auto prepared = preprocess::prepare_subject(preprocess::read_subject(manifest), c.prepare);
        const auto& rec = prepared.record;
        const auto ckpt = fold_checkpoint(c, rec.subject_id);
        if (!fs::exists(ckpt)) throw DataError("usecase: missing fold checkpoint " + ckpt.string() + " (run train --loso)");
        const auto params = model::load_checkpoint(ckpt, c.arch);
        const auto outcomes = usecase::run_subject(usecase::model_generator(params), rec, c.beat_len, c.fhr, c.jobs);
        std::size_t valid = 0;
        for (const auto& o : outcomes) {
            s.results.push_back(o.fhr);
            s.quality_good += o.quality.good();
            valid += o.fhr.valid;
        }
        log("usecase " + rec.subject_id + ": " + std::to_string(outcomes.size()) + " segments, " +
            std::to_string(valid) + " with a valid estimate");
    }
    s.stats = usecase::agreement(s.results);
    const auto dir = c.reports() / "usecase";
    fs::create_directories(dir);
    usecase::write_results_csv((dir / "results.csv").string(), s.results);
    detail::write_text(dir / "agreement.csv", usecase::agreement_csv(s.stats));
    usecase::write_bland_altman_csv((dir / "bland_altman.csv").string(), s.results);
    usecase::write_bland_altman_svg((dir / "bland_altman.svg").string(), s.results, s.stats);
    log("usecase: bias " + detail::fmt("%.3f", s.stats.bias) + " bpm, Bland-Altman " +
        detail::fmt("%.3f", s.stats.bland_altman) + " bpm, PICP(5 bpm) " + detail::fmt("%.3f", s.stats.picp_5bpm));
    return s;
}

// ------------------------------------------------------------------ report

namespace detail {

inline std::map<std::string, std::string> csv_record(const fs::path& path, const std::string& label) {
    const auto rows = read_csv_rows(path);
    if (rows.empty()) throw DataError("empty csv: " + path.string());
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (!label.empty() && rows[r][0] != label) continue;
        std::map<std::string, std::string> rec;
        for (std::size_t k = 0; k < rows[0].size() && k < rows[r].size(); ++k) rec[rows[0][k]] = rows[r][k];
        return rec;
    }
    throw DataError(path.string() + ": no row labelled '" + label + "'");
}

inline std::string metric_cells(const std::map<std::string, std::string>& rec) {
    std::string s;
    for (auto name : metrics::metric_names) {
        const double m = std::stod(rec.at(std::string(name) + "_mean"));
        const double sd = std::stod(rec.at(std::string(name) + "_std"));
        char buf[80];
        std::snprintf(buf, sizeof buf, " %.4f +- %.4f |", m, sd);
        s += buf;
    }
    return s;
}

inline std::string metric_csv_cells(const std::map<std::string, std::string>& rec) {
    std::string s;
    for (auto name : metrics::metric_names)
        s += "," + rec.at(std::string(name) + "_mean") + "," + rec.at(std::string(name) + "_std");
    return s;
}

} // namespace detail

/// Collects eval and usecase outputs into report.md plus table1.csv (model vs
/// baseline), table2.csv (one row per input beat count) and table3.csv (FHR agreement).
inline fs::path run_report(const PipelineConfig& c, const Log& log = stderr_log()) {
    const auto dir = c.reports();
    std::string md = "# Auto-FEDUS evaluation report\n\n";
    std::string header = "| model | n_pairs |";
    std::string rule = "|---|---|";
    std::string csv_header = "model,n_pairs";
    for (auto name : metrics::metric_names) {
        header += std::string(" ") + name + " |";
        rule += "---|";
        csv_header += std::string(",") + name + "_mean," + name + "_std";
    }
    header += "\n";
    rule += "\n";
    csv_header += "\n";

    // Table 1: single-beat model against the mean-beat baseline.
    const auto m1 = dir / "metrics_b1.csv", b1 = dir / "baseline_b1.csv";
    if (!fs::exists(m1)) throw DataError("report: missing " + m1.string() + " (run eval)");
    std::string t1 = csv_header;
    md += "## Held-out generation quality (LOSO, mean +- std over test beats)\n\n" + header + rule;
    auto add_row = [&](std::string& csv, const std::string& name, const fs::path& path) {
        const auto rec = detail::csv_record(path, "all");
        md += "| " + name + " | " + rec.at("n_pairs") + " |" + detail::metric_cells(rec) + "\n";
        csv += name + "," + rec.at("n_pairs") + detail::metric_csv_cells(rec) + "\n";
    };
    if (fs::exists(b1)) add_row(t1, "mean-beat baseline", b1);
    add_row(t1, "Auto-FEDUS", m1);
    detail::write_text(dir / "table1.csv", t1);

    // Table 2: input beat count ablation.
    std::string t2 = csv_header;
    md += "\n## Input length ablation\n\n" + header + rule;
    for (int n = 1; n <= 3; ++n) {
        const auto path = dir / ("metrics_b" + std::to_string(n) + ".csv");
        if (!fs::exists(path)) continue;
        add_row(t2, "Auto-FEDUS-" + std::to_string(n) + (n == 1 ? " beat" : " beats"), path);
    }
    detail::write_text(dir / "table2.csv", t2);

    md += "\n## Spectral summary\n\n| input beats | mean fold RMSE | mean-beat RMSE | ratio | PSD peak in 150-300 Hz | mean-spectrum distance (dB) |\n|---|---|---|---|---|---|\n";
    for (int n = 1; n <= 3; ++n) {
        const auto path = dir / ("eval_summary_b" + std::to_string(n) + ".csv");
        if (!fs::exists(path)) continue;
        const auto r = detail::csv_record(path, "");
        md += "| " + std::to_string(n) + " | " + r.at("mean_fold_rmse_model") + " | " + r.at("mean_fold_rmse_baseline") +
              " | " + r.at("rmse_ratio") + " | " + r.at("psd_peak_fraction") + " | " + r.at("dataset_psdd_db") + " |\n";
    }

    // Table 3: FHR agreement on generated DUS.
    const auto agree = dir / "usecase" / "agreement.csv";
    if (fs::exists(agree)) {
        const auto rows = detail::read_csv_rows(agree);
        if (rows.size() < 2 || rows[0].size() != rows[1].size()) throw DataError("report: malformed " + agree.string());
        md += "\n## FHR agreement on generated DUS\n\n| statistic | value |\n|---|---|\n";
        std::string t3 = "statistic,value\n";
        for (std::size_t k = 0; k < rows[0].size(); ++k) {
            md += "| " + rows[0][k] + " | " + rows[1][k] + " |\n";
            t3 += rows[0][k] + "," + rows[1][k] + "\n";
        }
        detail::write_text(dir / "table3.csv", t3);
    }
    const auto out = dir / "report.md";
    detail::write_text(out, md);
    log("report: wrote " + out.string());
    return out;
}

} // namespace fedus::pipeline
