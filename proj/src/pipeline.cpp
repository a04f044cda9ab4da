#include "stfmri/pipeline.hpp"

#include <fstream>

#include <json.hpp>

#include "stfmri/design.hpp"
#include "stfmri/io.hpp"
#include "stfmri/parallel.hpp"
#include "stfmri/report.hpp"
#include "stfmri/rng.hpp"

namespace stfmri {

namespace fs = std::filesystem;

std::string to_string(Stage s) {
    switch (s) {
        case Stage::Temporal: return "fit-temporal";
        case Stage::Local: return "fit-local";
        case Stage::Regional: return "fit-regional";
        case Stage::Activation: return "test-activation";
    }
    return "?";
}

void PipelineConfig::validate() const {
    if (threads < 1) throw std::invalid_argument("threads must be at least 1");
    if (!(spline_p >= 0 && spline_p <= 1)) throw std::invalid_argument("spline penalty p must lie in [0, 1]");
    if (!(fdr_q > 0 && fdr_q < 1)) throw std::invalid_argument("FDR level q must lie in (0, 1)");
    if (harmonics < 1) throw std::invalid_argument("harmonics must be at least 1");
    if (lambda_count < 1) throw std::invalid_argument("lambda_count must be at least 1");
    if (random_configs < 0 || max_search_steps < 0) throw std::invalid_argument("search settings must be nonnegative");
    if (!(roi_x_tol > 0) || roi_restarts < 0) throw std::invalid_argument("invalid optimizer settings");
    if (dataset.empty()) throw std::invalid_argument("no dataset path given");
    if (output.empty()) throw std::invalid_argument("no output path given");
}

std::string PipelineConfig::hash() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["spline_p"] = io::format_double(spline_p);
    j["fdr_q"] = io::format_double(fdr_q);
    j["harmonics"] = harmonics;
    std::vector<std::string> grid;
    for (double l : lambda_grid) grid.push_back(io::format_double(l));
    j["lambda_grid"] = grid;
    j["lambda_count"] = lambda_count;
    j["correlation_A"] = correlation_A;
    j["random_configs"] = random_configs;
    j["max_search_steps"] = max_search_steps;
    j["roi_x_tol"] = io::format_double(roi_x_tol);
    j["roi_restarts"] = roi_restarts;
    return io::fnv1a_hex(j.dump());
}

PipelineConfig load_pipeline_config(const fs::path& path, PipelineConfig c) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    for (const auto& [key, value] : j.items()) {
        if (key == "dataset") c.dataset = value.get<std::string>();
        else if (key == "output") c.output = value.get<std::string>();
        else if (key == "threads") c.threads = value.get<int>();
        else if (key == "seed") c.seed = value.get<std::uint64_t>();
        else if (key == "spline_p") c.spline_p = value.get<double>();
        else if (key == "fdr_q") c.fdr_q = value.get<double>();
        else if (key == "harmonics") c.harmonics = value.get<int>();
        else if (key == "lambda_grid") c.lambda_grid = value.get<std::vector<double>>();
        else if (key == "lambda_count") c.lambda_count = value.get<int>();
        else if (key == "correlation_A") c.correlation_A = value.get<bool>();
        else if (key == "random_configs") c.random_configs = value.get<int>();
        else if (key == "max_search_steps") c.max_search_steps = value.get<int>();
        else if (key == "roi_x_tol") c.roi_x_tol = value.get<double>();
        else if (key == "roi_restarts") c.roi_restarts = value.get<int>();
        else throw std::runtime_error(path.string() + ": unknown key '" + key + "'");
    }
    return c;
}

namespace {

MatrixXd rows_of(const MatrixXd& m, const std::vector<int>& rows) {
    MatrixXd out(rows.size(), m.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(rows[k]);
    return out;
}

TemporalStage run_temporal(const FmriDataset& ds, const MatrixXd& X, int threads) {
    TemporalStage st;
    const int V = ds.voxel_count();
    st.fits.resize(V);
    parallel_for(static_cast<std::size_t>(V), threads, [&](std::size_t v) {
        try {
            st.fits[v] = fit_voxel(ds.series.row(static_cast<Eigen::Index>(v)).transpose(), X);
        } catch (const std::exception& e) {
            throw StageError("stage fit-temporal failed at voxel " + std::to_string(v + 1) + ": " + e.what());
        }
    });
    st.residuals = standardized_residuals(ds.series, X, st.fits);
    return st;
}

LocalStage run_local(const FmriDataset& ds, const TemporalStage& temporal, const PipelineConfig& cfg) {
    const int R = ds.parcellation.roi_count();
    LocalStage st;
    st.rois.resize(R);
    SearchOptions so;
    so.random_configs = cfg.random_configs;
    so.max_steps = cfg.max_search_steps;
    so.simplex.x_tol = cfg.roi_x_tol;
    so.simplex.restart_count = cfg.roi_restarts;
    ShrinkageConfig sc;
    sc.p = cfg.spline_p;
    parallel_for(static_cast<std::size_t>(R), cfg.threads, [&](std::size_t ri) {
        const int roi = static_cast<int>(ri) + 1;
        try {
            const auto coords = ds.parcellation.coordinates(roi);
            const MatrixXd e = rows_of(temporal.residuals, ds.parcellation.members(roi));
            const SelectionResult sel = bic_search(e, coords, stream_seed(cfg.seed, "bic-search", ri), so);
            const ShrinkageResult shr = select_delta(sample_covariance(e), sel.model.error_cov(), coords, sc);
            RoiLocalFit& f = st.rois[ri];
            f.config = sel.config;
            f.bic = sel.bic;
            f.model_bic = sel.model_bic;
            f.visited = static_cast<int>(sel.visited.size());
            f.model = sel.model;
            f.delta = shr.delta;
            f.delta_closed_form = shr.delta_closed_form;
            f.shrunk = shr.shrunk;
        } catch (const std::exception& e) {
            throw StageError("stage fit-local failed at ROI " + std::to_string(roi) + ": " + e.what());
        }
    });
    return st;
}

RegionalStage run_regional(const FmriDataset& ds, const TemporalStage& temporal, const PipelineConfig& cfg) {
    RegionalStage st;
    try {
        const MatrixXd ebar = roi_means(temporal.residuals, ds.parcellation);
        st.A = sample_covariance(ebar);
        MatrixXd A = cfg.correlation_A ? to_correlation(st.A) : st.A;
        MatrixXd ebar_used = ebar;
        if (cfg.correlation_A) {
            ebar_used = st.A.diagonal().cwiseSqrt().cwiseInverse().asDiagonal() * ebar;
            st.A = A;
        }
        CvConfig cv;
        cv.lambda_grid = cfg.lambda_grid.empty() ? default_lambda_grid(A, cfg.lambda_count) : cfg.lambda_grid;
        cv.seed = stream_seed(cfg.seed, "cv-lambda", 0);
        cv.threads = cfg.threads;
        st.cv = cv_lambda(ebar_used, cv);
        st.glasso = glasso(A, st.cv.lambda_hat);
    } catch (const std::exception& e) {
        throw StageError(std::string("stage fit-regional failed: ") + e.what());
    }
    return st;
}

ActivationStage run_activation(const FmriDataset& ds, const MatrixXd& X, const FitState& state,
                               const PipelineConfig& cfg) {
    ActivationStage st;
    std::vector<MatrixXd> corr;
    for (const RoiLocalFit& f : state.local->rois) {
        corr.push_back(to_correlation(f.shrunk));
    }
    ActivationConfig ac;
    ac.harmonics = cfg.harmonics;
    ac.q = cfg.fdr_q;
    try {
        st.fit = test_activation(ds, X, state.temporal->fits, corr, ac, cfg.threads);
    } catch (const std::exception& e) {
        throw StageError(std::string("stage test-activation failed at ") + e.what());
    }
    return st;
}

}  // namespace

FitState run_pipeline(const PipelineConfig& config) {
    config.validate();
    const FmriDataset ds = load_dataset(config.dataset);
    const MatrixXd X = design_matrix(ds.design, canonical_hrf(ds.design.tr_seconds()));
    const fs::path state_dir = config.state_dir();

    FitState state;
    if (config.resume && fs::exists(state_dir / "provenance.txt")) {
        state = load_state(state_dir);
        if (state.provenance.config_hash != config.hash()) {
            throw StageError("cannot resume: the saved state was produced with a different configuration");
        }
    }
    if (config.rerun_from) {
        const int from = static_cast<int>(*config.rerun_from);
        if (from <= static_cast<int>(Stage::Activation)) state.activation.reset();
        if (from <= static_cast<int>(Stage::Regional)) state.regional.reset();
        if (from <= static_cast<int>(Stage::Local)) state.local.reset();
        if (from <= static_cast<int>(Stage::Temporal)) state.temporal.reset();
    }
    state.provenance.seed = config.seed;
    state.provenance.config_hash = config.hash();
    const auto wanted = [&](Stage s) { return static_cast<int>(s) <= static_cast<int>(config.stop_after); };

    if (wanted(Stage::Temporal) && !state.temporal) {
        state.temporal = run_temporal(ds, X, config.threads);
        if (state.temporal->fits.size() != static_cast<std::size_t>(ds.voxel_count())) {
            throw StageError("stage fit-temporal produced an incomplete result");
        }
        save_state(state, state_dir);
    }
    if (wanted(Stage::Local) && !state.local) {
        state.local = run_local(ds, *state.temporal, config);
        save_state(state, state_dir);
    }
    if (wanted(Stage::Regional) && !state.regional) {
        state.regional = run_regional(ds, *state.temporal, config);
        save_state(state, state_dir);
    }
    if (wanted(Stage::Activation) && !state.activation) {
        state.activation = run_activation(ds, X, state, config);
        save_state(state, state_dir);
    }
    if (!fs::exists(state_dir / "provenance.txt")) {
        save_state(state, state_dir);
    }
    write_all_reports(config.report_dir(), ds, state);
    return state;
}

}  // namespace stfmri
