// Command-line front end for the spatiotemporal fMRI pipeline.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stfmri/io.hpp"
#include "stfmri/pipeline.hpp"
#include "stfmri/report.hpp"
#include "stfmri/simulation.hpp"

namespace fs = std::filesystem;
using namespace stfmri;

namespace {

struct Globals {
    int threads = default_threads();
    std::uint64_t seed = 1;
    std::string config;
    bool resume = false;
};

PipelineConfig pipeline_config(const Globals& g, const CLI::App& app, const std::string& data, const std::string& out) {
    PipelineConfig c;
    if (!g.config.empty()) c = load_pipeline_config(g.config, c);
    if (app.count("--threads") > 0 || g.config.empty()) c.threads = g.threads;
    if (app.count("--seed") > 0) c.seed = g.seed;
    if (!data.empty()) c.dataset = data;
    if (!out.empty()) c.output = out;
    c.resume = g.resume;
    return c;
}

std::vector<StudyRoi> preset_rois(const std::string& name) {
    PhantomSpec spec = smoke_phantom_spec();
    if (name == "independent") {
        for (auto& t : spec.truth) t.omega = 0.0;
    } else if (name != "smoke") {
        throw CLI::ValidationError("--preset", "unknown preset '" + name + "' (smoke, independent)");
    }
    return study_rois(spec);
}

std::vector<Estimator> parse_estimators(const std::vector<std::string>& names) {
    if (names.empty()) return kAllEstimators;
    std::vector<Estimator> out;
    for (const auto& n : names) {
        bool found = false;
        for (Estimator e : kAllEstimators) {
            if (to_string(e) == n) {
                out.push_back(e);
                found = true;
            }
        }
        if (!found) throw CLI::ValidationError("--estimators", "unknown estimator '" + n + "'");
    }
    return out;
}

void print_study(const StudyReport& r) {
    for (const StudyRow& row : r.rows) {
        if (row.roi != 0) continue;
        std::cout << to_string(row.estimator) << " " << row.value << " (failures " << row.failures << ")\n";
    }
    std::cout << "runtime " << r.runtime_seconds << " s\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatiotemporal covariance modelling and activation testing for block-design fMRI"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", g.seed, "Root random seed");
    app.add_option("--config", g.config, "JSON pipeline configuration")->check(CLI::ExistingFile);
    app.add_flag("--resume", g.resume, "Reuse stages already saved in the output directory");

    std::string data, out, preset = "smoke";
    int reps = 100, roi = 1;
    std::vector<std::string> estimators;
    std::vector<double> effects{0.0, 0.05, 0.1, 0.2, 0.4};
    std::vector<int> holdout;

    auto* simulate = app.add_subcommand("simulate", "Write a seeded phantom dataset");
    simulate->add_option("--out", out, "Dataset directory")->required();

    const std::vector<std::pair<std::string, Stage>> stage_cmds{{"fit-temporal", Stage::Temporal},
                                                                {"fit-local", Stage::Local},
                                                                {"fit-regional", Stage::Regional},
                                                                {"test-activation", Stage::Activation}};
    std::map<CLI::App*, Stage> stage_of;
    for (const auto& [name, stage] : stage_cmds) {
        auto* cmd = app.add_subcommand(name, "Run the pipeline up to " + name);
        cmd->add_option("--data", data, "Dataset directory")->check(CLI::ExistingDirectory);
        cmd->add_option("--out", out, "Output directory");
        stage_of[cmd] = stage;
    }
    auto* run = app.add_subcommand("run", "Run every stage");
    run->add_option("--data", data, "Dataset directory")->check(CLI::ExistingDirectory);
    run->add_option("--out", out, "Output directory");

    auto* report = app.add_subcommand("report", "Rewrite reports from a saved state");
    report->add_option("--data", data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    report->add_option("--out", out, "Output directory of a previous run")->required()->check(CLI::ExistingDirectory);

    auto* krige_cmd = app.add_subcommand("krige", "Predict held-out voxel residuals of one ROI from the rest");
    krige_cmd->add_option("--data", data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    krige_cmd->add_option("--out", out, "Output directory of a previous run")->required()->check(CLI::ExistingDirectory);
    krige_cmd->add_option("--roi", roi, "ROI label")->check(CLI::PositiveNumber);
    krige_cmd->add_option("--voxels", holdout, "Held-out voxel ids")->required();

    auto* study_fp = app.add_subcommand("study-fp", "False-positive simulation study");
    auto* study_krige = app.add_subcommand("study-krige", "Kriging RMSE simulation study");
    auto* study_power = app.add_subcommand("study-power", "Power curve simulation study");
    for (auto* cmd : {study_fp, study_krige, study_power}) {
        cmd->add_option("--preset", preset, "Phantom preset: smoke or independent");
        cmd->add_option("--reps", reps, "Replicates")->check(CLI::PositiveNumber);
        cmd->add_option("--estimators", estimators, "Subset of glm, iso, aniso, l-aniso");
        cmd->add_option("--out", out, "Report CSV path")->required();
    }
    study_power->add_option("--effects", effects, "Task-minus-rest effect sizes");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) {
            const Phantom ph = gen_phantom(smoke_phantom_spec(), g.seed);
            save_dataset(ph.dataset, out);
            std::cout << "wrote " << ph.dataset.voxel_count() << " voxels x " << ph.dataset.scans() << " scans to "
                      << out << "\n";
            return 0;
        }
        for (const auto& [cmd, stage] : stage_of) {
            if (!cmd->parsed()) continue;
            PipelineConfig c = pipeline_config(g, app, data, out);
            c.stop_after = stage;
            // Earlier stages are reused from the output directory; the
            // requested one is always recomputed.
            c.resume = true;
            c.rerun_from = g.resume ? std::nullopt : std::optional<Stage>(stage);
            run_pipeline(c);
            std::cout << to_string(stage) << " done; state in " << c.state_dir() << "\n";
            return 0;
        }
        if (run->parsed()) {
            const PipelineConfig c = pipeline_config(g, app, data, out);
            const FitState s = run_pipeline(c);
            std::cout << "pipeline done; " << std::count(s.activation->fit.reject.begin(), s.activation->fit.reject.end(), true) << " voxels active; reports in "
                      << c.report_dir() << "\n";
            return 0;
        }
        if (report->parsed()) {
            const FmriDataset ds = load_dataset(data);
            const FitState s = load_state(fs::path(out) / "state");
            write_all_reports(fs::path(out) / "reports", ds, s);
            return 0;
        }
        if (krige_cmd->parsed()) {
            const FmriDataset ds = load_dataset(data);
            const FitState s = load_state(fs::path(out) / "state");
            if (!s.local || !s.temporal) throw std::runtime_error("krige needs the fit-local stage");
            if (roi > ds.parcellation.roi_count()) throw std::runtime_error("no ROI " + std::to_string(roi));
            const auto& members = ds.parcellation.members(roi);
            std::vector<int> observed, targets;
            for (std::size_t k = 0; k < members.size(); ++k) {
                const bool held = std::find(holdout.begin(), holdout.end(), members[k] + 1) != holdout.end();
                (held ? targets : observed).push_back(static_cast<int>(k));
            }
            if (targets.size() != holdout.size()) throw std::runtime_error("held-out voxels must belong to the ROI");
            const MatrixXd corr = to_correlation(s.local->rois[roi - 1].shrunk);
            const MatrixXd& e = s.temporal->residuals;
            fs::create_directories(fs::path(out) / "reports");
            auto os = io::open_report(fs::path(out) / "reports" / "krige.csv", "krige");
            os << "voxel_id,scan,observed,predicted\n";
            double sse = 0.0;
            for (Eigen::Index t = 0; t < e.cols(); ++t) {
                VectorXd z(observed.size());
                for (std::size_t k = 0; k < observed.size(); ++k) z[k] = e(members[observed[k]], t);
                const VectorXd pred = krige(corr, observed, z, targets);
                for (std::size_t k = 0; k < targets.size(); ++k) {
                    const double obs = e(members[targets[k]], t);
                    os << members[targets[k]] + 1 << "," << t + 3 << "," << io::format_double(obs) << ","
                       << io::format_double(pred[k]) << "\n";
                    sse += (obs - pred[k]) * (obs - pred[k]);
                }
            }
            std::cout << "rmse " << std::sqrt(sse / (targets.size() * e.cols())) << "\n";
            return 0;
        }
        StudyConfig sc;
        sc.reps = reps;
        sc.seed = g.seed;
        sc.threads = g.threads;
        sc.estimators = parse_estimators(estimators);
        const std::vector<StudyRoi> rois = preset_rois(preset);
        if (study_fp->parsed()) {
            const StudyReport r = run_fp_study(rois, sc);
            write_study_report(out, r);
            print_study(r);
        } else if (study_krige->parsed()) {
            const StudyReport r = run_krige_study(rois, sc);
            write_study_report(out, r);
            print_study(r);
        } else if (study_power->parsed()) {
            const auto points = power_curve(rois, effects, sc);
            write_power_report(out, points);
            for (const PowerPoint& p : points) {
                std::cout << p.effect << " " << to_string(p.estimator) << " " << p.power << "\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
