// fedus: command-line driver for the synth -> preprocess -> train -> eval -> usecase -> report pipeline.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedus/pipeline/pipeline.hpp"
#include "fedus/version.hpp"

namespace fs = std::filesystem;
using namespace fedus;

namespace {

struct Overrides {
    std::string config;
    std::optional<unsigned> jobs;
    std::optional<int> n_beats;
    std::optional<std::uint64_t> seed;
    std::string work_dir;
};

pipeline::PipelineConfig resolve(const Overrides& o) {
    auto c = o.config.empty() ? pipeline::PipelineConfig{} : pipeline::load_config(o.config);
    if (!o.work_dir.empty()) c.work_dir = o.work_dir;
    if (o.jobs) c.jobs = *o.jobs;
    if (o.seed) {
        c.synth.seed = *o.seed;
        c.train.seed = *o.seed;
    }
    if (o.n_beats) c.n_beats = *o.n_beats;
    pipeline::finalize(c);
    return c;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Auto-FEDUS: fetal ECG to Doppler ultrasound beat generation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("fedus ") + version + " (checkpoint format " +
                                          std::to_string(checkpoint_format_version) + ")");

    Overrides o;
    auto common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", o.config, "INI config file")->check(CLI::ExistingFile);
        sub->add_option("--jobs", o.jobs, "worker threads (0 = all cores)");
        sub->add_option("--work-dir", o.work_dir, "override [paths] work_dir");
        sub->add_option("--seed", o.seed, "override synth and train seeds");
        sub->add_option("--n-beats", o.n_beats, "override [preprocess] n_beats")->check(CLI::Range(1, 3));
    };

    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "generate the synthetic paired dataset");
    common(synth);
    synth->add_option("--out", synth_out, "dataset directory (overrides [paths] data_dir)");

    auto* prep = app.add_subcommand("preprocess", "filter, align and cut beat pairs");
    common(prep);

    bool loso = false;
    auto* train = app.add_subcommand("train", "train Auto-FEDUS");
    common(train);
    train->add_flag("--loso", loso, "one model per held-out subject");

    std::vector<std::string> gen_inputs;
    std::string gen_out = "generated", gen_ckpt;
    auto* gen = app.add_subcommand("generate", "map FECG beat CSVs to DUS beat CSVs");
    common(gen);
    gen->add_option("inputs", gen_inputs, "FECG window CSV files")->required()->check(CLI::ExistingFile);
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--checkpoint", gen_ckpt, "model checkpoint (default <model_dir>/model.ckpt)");

    bool identity = false;
    auto* eval = app.add_subcommand("eval", "score held-out generations");
    common(eval);
    eval->add_flag("--identity", identity, "score real beats against themselves");

    auto* use = app.add_subcommand("usecase", "FHR agreement on generated segments");
    common(use);

    auto* report = app.add_subcommand("report", "aggregate tables into a report bundle");
    common(report);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        if (app.get_subcommands().empty()) std::cerr << app.help();
        return static_cast<int>(ErrorKind::config);
    }

    try {
        auto c = resolve(o);
        if (*synth) {
            if (!synth_out.empty()) c.data_dir = synth_out;
            pipeline::run_synth(c);
        } else if (*prep) {
            pipeline::run_preprocess(c);
        } else if (*train) {
            pipeline::run_train(c, loso);
        } else if (*gen) {
            pipeline::run_generate(c, {gen_inputs.begin(), gen_inputs.end()}, gen_out, gen_ckpt);
        } else if (*eval) {
            pipeline::run_eval(c, identity);
        } else if (*use) {
            pipeline::run_usecase(c);
        } else if (*report) {
            pipeline::run_report(c);
        }
    } catch (const Error& e) {
        std::cerr << "fedus: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "fedus: internal error: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::internal);
    }
    return 0;
}
