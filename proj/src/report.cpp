#include "stfmri/report.hpp"

#include <fstream>

#include "stfmri/io.hpp"

namespace stfmri {

namespace {

std::string num(double v) {
    return io::format_double(v);
}

void finish(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

}  // namespace

void write_temporal_report(const fs::path& path, const FmriDataset& ds, const TemporalStage& stage) {
    auto out = io::open_report(path, "temporal");
    out << "voxel_id,roi,phi1,phi2,sigma2,loglik";
    const std::size_t k = stage.fits.empty() ? 0 : static_cast<std::size_t>(stage.fits.front().beta.size());
    for (std::size_t j = 0; j < k; ++j) out << ",beta" << j;
    out << '\n';
    for (std::size_t v = 0; v < stage.fits.size(); ++v) {
        const VoxelFit& f = stage.fits[v];
        const Voxel& vox = ds.parcellation.voxel(static_cast<int>(v));
        out << vox.id << ',' << vox.roi << ',' << num(f.ar.phi1) << ',' << num(f.ar.phi2) << ',' << num(f.ar.sigma2)
            << ',' << num(f.loglik);
        for (Eigen::Index j = 0; j < f.beta.size(); ++j) out << ',' << num(f.beta[j]);
        out << '\n';
    }
    finish(out, path);
}

void write_local_report(const fs::path& path, const LocalStage& stage) {
    auto out = io::open_report(path, "local");
    out << "roi,lx,ly,lz,subregion,voxels,nu,l1,l2,l3,xi1,xi2,omega,delta,bic,model_bic\n";
    for (std::size_t r = 0; r < stage.rois.size(); ++r) {
        const RoiLocalFit& f = stage.rois[r];
        const auto sizes = f.model.partition.sizes();
        for (std::size_t l = 0; l < f.model.params.size(); ++l) {
            const AnisoParams& p = f.model.params[l];
            out << r + 1 << ',' << f.config.lx << ',' << f.config.ly << ',' << f.config.lz << ',' << l + 1 << ','
                << sizes[l] << ',' << num(p.nu) << ',' << num(p.lengths[0]) << ',' << num(p.lengths[1]) << ','
                << num(p.lengths[2]) << ',' << num(p.xi1) << ',' << num(p.xi2) << ',' << num(f.model.omega) << ','
                << num(f.delta) << ',' << num(f.bic) << ',' << num(f.model_bic) << '\n';
        }
    }
    finish(out, path);
}

void write_cv_report(const fs::path& path, const CvResult& cv) {
    auto out = io::open_report(path, "cv_curve");
    out << "lambda,sse,nnz_offdiag,selected\n";
    for (std::size_t i = 0; i < cv.lambdas.size(); ++i) {
        out << num(cv.lambdas[i]) << ',' << num(cv.sse[i]) << ',' << cv.nnz[i] << ','
            << (cv.lambdas[i] == cv.lambda_hat ? 1 : 0) << '\n';
    }
    finish(out, path);
}

void write_edges_report(const fs::path& path, const std::vector<Edge>& edges) {
    auto out = io::open_report(path, "edges");
    out << "r,r_prime,weight\n";
    for (const Edge& e : edges) {
        out << e.r << ',' << e.s << ',' << num(e.weight) << '\n';
    }
    finish(out, path);
}

void write_glasso_path(const fs::path& path, const MatrixXd& A, const std::vector<double>& lambdas) {
    auto out = io::open_report(path, "glasso_path");
    out << "lambda,r,r_prime,weight\n";
    for (double lambda : lambdas) {
        const GlassoResult g = glasso(A, lambda);
        for (const Edge& e : edges(g.W)) {
            out << num(lambda) << ',' << e.r << ',' << e.s << ',' << num(e.weight) << '\n';
        }
    }
    finish(out, path);
}

void write_activation_report(const fs::path& path, const FmriDataset& ds, const ActivationFit& fit) {
    auto out = io::open_report(path, "activation");
    out << "voxel_id,roi,contrast,se,z,p,reject\n";
    for (std::size_t v = 0; v < fit.voxels.size(); ++v) {
        const VoxelTest& t = fit.voxels[v];
        const Voxel& vox = ds.parcellation.voxel(static_cast<int>(v));
        out << vox.id << ',' << vox.roi << ',' << num(t.contrast) << ',' << num(t.se) << ',' << num(t.z) << ','
            << num(t.p) << ',' << (fit.reject[v] ? 1 : 0) << '\n';
    }
    finish(out, path);
}

void write_study_report(const fs::path& path, const StudyReport& report) {
    auto out = io::open_report(path, report.kind == "krige" ? "study_krige" : "study_fp");
    out << "roi,estimator,value,failures,reps\n";
    for (const StudyRow& r : report.rows) {
        out << (r.roi == 0 ? std::string("mean") : std::to_string(r.roi)) << ',' << to_string(r.estimator) << ','
            << num(r.value) << ',' << r.failures << ',' << report.reps << '\n';
    }
    finish(out, path);
}

void write_power_report(const fs::path& path, const std::vector<PowerPoint>& points) {
    auto out = io::open_report(path, "power");
    out << "effect,model,power\n";
    for (const PowerPoint& p : points) {
        out << num(p.effect) << ',' << to_string(p.estimator) << ',' << num(p.power) << '\n';
    }
    finish(out, path);
}

void write_all_reports(const fs::path& dir, const FmriDataset& ds, const FitState& state) {
    fs::create_directories(dir);
    if (state.temporal) write_temporal_report(dir / "temporal.csv", ds, *state.temporal);
    if (state.local) write_local_report(dir / "local.csv", *state.local);
    if (state.regional) {
        write_cv_report(dir / "cv_curve.csv", state.regional->cv);
        write_edges_report(dir / "edges.csv", edges(state.regional->glasso.W));
        write_glasso_path(dir / "glasso_path.csv", state.regional->A, state.regional->cv.lambdas);
    }
    if (state.activation) write_activation_report(dir / "activation.csv", ds, state.activation->fit);
}

}  // namespace stfmri
